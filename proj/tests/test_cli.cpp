#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "assoc/cli.hpp"
#include "cli/toml_lite.hpp"

using namespace assoc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("assoc_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name, const std::string& content) const {
    const fs::path p = path / name;
    std::ofstream(p) << content;
    return p.string();
  }
  std::string at(const std::string& name) const { return (path / name).string(); }
};

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Outcome o;
  o.code = cli::run(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

const char* kWeighted =
    "k,v1,z1,weight\n"
    "0,0,0,10\n"
    "0,0,1,30\n"
    "1,1,0,20\n"
    "1,1,1,40\n";

const char* kTable =
    "z\\v,0,1\n"
    "0,10,20\n"
    "1,30,40\n";

}  // namespace

TEST_CASE("exit code mapping") {
  CHECK(cli::exit_code(ErrorCategory::config) == 2);
  CHECK(cli::exit_code(ErrorCategory::argument) == 2);
  CHECK(cli::exit_code(ErrorCategory::data) == 3);
  CHECK(cli::exit_code(ErrorCategory::consistency) == 3);
  CHECK(cli::exit_code(ErrorCategory::convergence) == 4);
  CHECK(cli::exit_code(ErrorCategory::evaluation) == 4);
  CHECK(cli::exit_code(ErrorCategory::identifiability) == 5);
}

TEST_CASE("conditional csv ingestion") {
  std::istringstream in(kWeighted);
  const ConditionalDataset d = cli::read_conditional_csv(in);
  CHECK(d.counts() == (Vector(2) << 40, 60).finished());
  CHECK(d.dim_x() == 1);
  CHECK(d.dim_y() == 1);

  // unweighted rows with repeats are merged
  std::istringstream rep("k,v1,z1\n0,0,1\n0,0,1\n1,2,0\n");
  const ConditionalDataset r = cli::read_conditional_csv(rep);
  CHECK(r.stratum(0).distinct() == 1);
  CHECK(r.stratum(0).weight[0] == 2);
  CHECK(r.v_levels()(0, 1) == 2);

  auto fails = [](const std::string& text) {
    std::istringstream s(text);
    try {
      cli::read_conditional_csv(s);
    } catch (const DataError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(fails("") != "");
  CHECK(fails("k,v1,z1\n0,1,0\n1,1,1\n").find("stratum 0") != std::string::npos);
  CHECK(fails("k,v1,z1\n1,1,0\n").find("stratum 0") != std::string::npos);
  CHECK(fails("k,v1,z1\n0,0,0\n2,1,0\n") != "");
  CHECK(fails("k,v1,z1\n0,0,0\n1,1,0\n1,2,1\n") != "");
  CHECK(fails("k,v1,z1\n0,0,0\n1,1,abc\n").find("csv line 3") != std::string::npos);
}

TEST_CASE("table csv round trip") {
  std::istringstream in("z\\v,0;0,1;0,0;1\n0,1,2,3\n1,4,5,6\n");
  const ContingencyTable t = cli::read_table_csv(in);
  CHECK(t.counts.rows() == 2);
  CHECK(t.counts.cols() == 3);
  CHECK(t.v_support.rows() == 2);
  CHECK(t.v_support(1, 2) == 1);
  std::ostringstream out;
  cli::write_table_csv(out, t.counts, t.z_support, t.v_support);
  std::istringstream back(out.str());
  const ContingencyTable t2 = cli::read_table_csv(back);
  CHECK(t2.counts == t.counts);
  CHECK(t2.v_support == t.v_support);
}

TEST_CASE("toml subset") {
  const json j = cli::parse_toml(
      "seed = 42\n"
      "# comment\n"
      "[solver]\n"
      "tol = 1e-10  # trailing\n"
      "name = \"a # b\"\n"
      "flag = true\n"
      "[joint]\n"
      "psi = [[0.5, 1],\n"
      "       [2, -inf]]\n"
      "[a.b]\n"
      "c = [1, 2, 3]\n");
  CHECK(j["seed"] == 42);
  CHECK(j["solver"]["tol"].get<double>() == 1e-10);
  CHECK(j["solver"]["name"] == "a # b");
  CHECK(j["solver"]["flag"] == true);
  CHECK(j["joint"]["psi"][1][0].get<double>() == 2.0);
  CHECK(std::isinf(j["joint"]["psi"][1][1].get<double>()));
  CHECK(j["a"]["b"]["c"].size() == 3);

  auto line_of = [](const std::string& text) {
    try {
      cli::parse_toml(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(line_of("a = 1\nb = [1, 2\n").find("line") != std::string::npos);
  CHECK(line_of("a = 1\n[x\n").find("line 2") != std::string::npos);
  CHECK(line_of("a = 1\na = 2\n").find("line 2") != std::string::npos);
  CHECK(line_of("x = \"open\n") != "");
}

TEST_CASE("fit on the worked 2x2 example") {
  TempDir dir;
  const std::string data = dir.file("w.csv", kWeighted);
  const Outcome o = run({"fit", "--data", data, "--no-timestamp"});
  REQUIRE(o.code == 0);
  const json r = json::parse(o.out);
  CHECK(r["converged"] == true);
  CHECK(r["n_vec"][0].get<double>() == 40);
  CHECK(r["n_vec"][1].get<double>() == 60);
  const json& th = r["parameters"][0];
  CHECK(th["block"] == "theta");
  CHECK(th["estimate"].get<double>() == doctest::Approx(std::log(2.0 / 3.0)).epsilon(1e-9));
  CHECK(th["std_error"].get<double>() ==
        doctest::Approx(std::sqrt(1.0 / 10 + 1.0 / 20 + 1.0 / 30 + 1.0 / 40)).epsilon(1e-9));
  const json& g = r["parameters"][1];
  CHECK(g["estimate"].get<double>() == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  CHECK(g["std_error"].get<double>() == doctest::Approx(std::sqrt(1.0 / 10 + 1.0 / 20)).epsilon(1e-9));
  CHECK(r["loglik"].get<double>() == doctest::Approx(-66.898992).epsilon(1e-7));
  CHECK_FALSE(r.contains("generated_at"));

  // table input gives the same estimate, reverse fit too
  const std::string table = dir.file("t.csv", kTable);
  const json rt = json::parse(run({"fit", "--data", table, "--no-timestamp"}).out);
  CHECK(rt["parameters"][0]["estimate"].get<double>() ==
        doctest::Approx(th["estimate"].get<double>()).epsilon(1e-10));
  const Outcome rev = run({"fit-reverse", "--data", table, "--no-timestamp"});
  REQUIRE(rev.code == 0);
  CHECK(json::parse(rev.out)["parameters"][0]["estimate"].get<double>() ==
        doctest::Approx(th["estimate"].get<double>()).epsilon(1e-9));
  CHECK(run({"fit-reverse", "--data", data}).code == 2);
}

TEST_CASE("output files are byte identical without timestamps") {
  TempDir dir;
  const std::string data = dir.file("w.csv", kWeighted);
  const std::string a = dir.at("a.json"), b = dir.at("b.json");
  const Outcome oa = run({"fit", "--data", data, "--out", a, "--no-timestamp"});
  const Outcome ob = run({"fit", "--data", data, "--out", b, "--no-timestamp"});
  REQUIRE(oa.code == 0);
  REQUIRE(ob.code == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(oa.out.find("theta") != std::string::npos);
  CHECK(run({"fit", "--data", data, "--out", a}).code == 0);
  CHECK(json::parse(slurp(a)).contains("generated_at"));
}

TEST_CASE("error paths and exit codes") {
  TempDir dir;
  const std::string out = dir.at("out.json");

  const std::string sep = dir.file("sep.csv", "z\\v,0,1\n0,10,0\n1,0,10\n");
  Outcome o = run({"fit", "--data", sep, "--out", out});
  CHECK(o.code == 4);
  CHECK(json::parse(o.err)["error"]["category"] == "convergence");
  CHECK_FALSE(fs::exists(out));

  const std::string rk =
      dir.file("rk.csv", "z\\v,0;0,1;2,2;4\n0,10,12,9\n1,7,15,11\n");
  o = run({"fit", "--data", rk});
  CHECK(o.code == 5);
  CHECK(json::parse(o.err)["error"]["exit_code"] == 5);

  CHECK(run({"fit", "--data", dir.at("missing.csv")}).code == 3);
  CHECK(run({"fit", "--data", dir.file("bad.csv", "k,v1,z1\n0,1,0\n1,1,1\n")}).code == 3);
  CHECK(run({"fit", "--data", dir.file("empty.csv", "")}).code == 3);

  const std::string data = dir.file("w.csv", kWeighted);
  const std::string bad = dir.file("bad.toml", "[solver]\ntol = = 3\n");
  o = run({"fit", "--config", bad, "--data", data, "--out", out});
  CHECK(o.code == 2);
  CHECK(o.err.find("line 2") != std::string::npos);
  CHECK_FALSE(fs::exists(out));

  CHECK(run({"fit", "--data", data, "--level", "1.5"}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"fit"}).code == 2);
  const std::string kind = dir.file("kind.toml", "[model]\nkind = \"quadratic\"\n");
  CHECK(run({"fit", "--config", kind, "--data", data}).code == 2);
  CHECK(run({"fit", "--data", data, "--max-iter", "1"}).code == 4);
  CHECK(run({"construct"}).code == 2);
}

TEST_CASE("config file settings and overrides") {
  TempDir dir;
  const std::string data = dir.file("w.csv", kWeighted);
  const std::string cfg = dir.file("c.toml",
                                   "[data]\npath = \"" + data +
                                       "\"\n[inference]\nlevel = 0.9\n"
                                       "contrast = [[1.0]]\n[output]\ntimestamp = false\n");
  Outcome o = run({"fit", "--config", cfg});
  REQUIRE(o.code == 0);
  json r = json::parse(o.out);
  CHECK(r["level"].get<double>() == doctest::Approx(0.9));
  CHECK_FALSE(r.contains("generated_at"));
  bool has_contrast = false;
  for (const auto& t : r["wald_tests"])
    if (t["name"] == "contrast") {
      has_contrast = true;
      CHECK(t["statistic"].get<double>() == doctest::Approx(std::pow(std::log(2.0 / 3.0), 2) / (1.0 / 10 + 1.0 / 20 + 1.0 / 30 + 1.0 / 40)));
    }
  CHECK(has_contrast);
  o = run({"fit", "--config", cfg, "--level", "0.99"});
  CHECK(json::parse(o.out)["level"].get<double>() == doctest::Approx(0.99));

  const std::string js = dir.file("c.json", "{\"data\": {\"path\": \"" + data + "\"}, \"output\": {\"timestamp\": false}}");
  CHECK(run({"fit", "--config", js}).code == 0);
}

TEST_CASE("construct and refit") {
  TempDir dir;
  const std::string cfg = dir.file("c.toml",
                                   "[construct]\npi_x = [0.6, 0.4]\npi_y = [0.5, 0.5]\n"
                                   "psi = [[0.6931471805599453]]\n");
  const std::string out = dir.at("joint.csv");
  REQUIRE(run({"construct", "--config", cfg, "--out", out}).code == 0);
  const FiniteJoint j = cli::read_joint_csv(out);
  CHECK(std::abs(j.row_margin()[0] - 0.6) < 1e-12);
  CHECK(std::abs(j.col_margin()[1] - 0.5) < 1e-12);
  CHECK(odds_ratio_matrix(j)(0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-10));

  const std::string bad = dir.file("b.toml", "[construct]\npi_x = [0.6, 0.5]\npi_y = [0.5, 0.5]\npsi = [[1.0]]\n");
  CHECK(run({"construct", "--config", bad}).code == 2);
}

TEST_CASE("simulate command") {
  TempDir dir;
  const std::string cfg = dir.file("s.toml",
                                   "seed = 5\n[joint]\npi_x = [0.6, 0.4]\npi_y = [0.5, 0.5]\n"
                                   "psi = [[0.6931471805599453]]\n"
                                   "[simulate]\nmode = \"coverage\"\nsizes = [150, 150]\n"
                                   "replicates = 50\n[output]\ntimestamp = false\n");
  const std::string a = dir.at("a.csv"), b = dir.at("b.csv");
  const Outcome oa = run({"simulate", "--config", cfg, "--out", a});
  REQUIRE(oa.code == 0);
  const Outcome ob = run({"simulate", "--config", cfg, "--out", b});
  CHECK(oa.out == ob.out);
  CHECK(slurp(a) == slurp(b));
  const json s = json::parse(oa.out);
  CHECK(s["replicates"] == 50);
  CHECK(s["seed"] == 5);

  const Outcome other = run({"simulate", "--config", cfg, "--seed", "6", "--out", b});
  CHECK(other.code == 0);
  CHECK(slurp(a) != slurp(b));

  const std::string cons = dir.file("k.toml",
                                    "[joint]\npi_x = [0.6, 0.4]\npi_y = [0.5, 0.5]\npsi = [[0.7]]\n"
                                    "[simulate]\nmode = \"consistency\"\nsizes = [1, 1]\n"
                                    "n_grid = [200, 800]\nreplicates = 40\n");
  CHECK(run({"simulate", "--config", cons, "--out", dir.at("k.csv")}).code == 0);
  const std::string inv = dir.file("i.toml",
                                   "[joint]\nprobs = [[0.1, 0.2], [0.3, 0.4]]\n"
                                   "[simulate]\nmode = \"invariance\"\nn = 300\nreplicates = 10\n");
  const Outcome oi = run({"simulate", "--config", inv, "--out", dir.at("i.csv")});
  REQUIRE(oi.code == 0);
  const std::string scheme = dir.file("x.toml",
                                      "[joint]\nprobs = [[0.1, 0.2], [0.3, 0.4]]\n"
                                      "[simulate]\nscheme = \"retro\"\nsizes = [5, 5]\n");
  CHECK(run({"simulate", "--config", scheme}).code == 2);
}

TEST_CASE("installed binary") {
  const std::string cmd = std::string(ASSOC_CLI_PATH) + " verify --seed 3 --replicates 2 > /dev/null 2>&1";
  CHECK(std::system(cmd.c_str()) == 0);
  const std::string bad = std::string(ASSOC_CLI_PATH) + " fit --data /nonexistent/x.csv > /dev/null 2>&1";
  const int status = std::system(bad.c_str());
  CHECK(WEXITSTATUS(status) == 3);
}

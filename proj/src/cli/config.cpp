#include "cli/config.hpp"

#include <fstream>
#include <sstream>

#include "assoc/cli.hpp"
#include "assoc/errors.hpp"
#include "cli/toml_lite.hpp"

namespace assoc::cli {

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  json doc;
  if (first != std::string::npos && text[first] == '{') {
    try {
      doc = json::parse(text);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  } else {
    doc = parse_toml(text);
  }
  if (!doc.is_object()) throw ConfigError("config: top level must be a table");
  return doc;
}

const json* find(const json& doc, const std::string& section, const std::string& key) {
  const json* sec = &doc;
  if (!section.empty()) {
    const auto it = doc.find(section);
    if (it == doc.end()) return nullptr;
    if (!it->is_object()) throw ConfigError("config: [" + section + "] must be a table");
    sec = &*it;
  }
  const auto it = sec->find(key);
  return it == sec->end() ? nullptr : &*it;
}

namespace {
std::string where(const std::string& section, const std::string& key) {
  return section.empty() ? key : section + "." + key;
}
}  // namespace

double get_number(const json& doc, const std::string& section, const std::string& key,
                  double fallback) {
  const json* j = find(doc, section, key);
  if (!j) return fallback;
  if (!j->is_number()) throw ConfigError("config: " + where(section, key) + " must be a number");
  return j->get<double>();
}

std::string get_string(const json& doc, const std::string& section, const std::string& key,
                       const std::string& fallback) {
  const json* j = find(doc, section, key);
  if (!j) return fallback;
  if (!j->is_string()) throw ConfigError("config: " + where(section, key) + " must be a string");
  return j->get<std::string>();
}

Vector to_vector(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw ConfigError("config: " + what + " must be a nonempty array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError("config: " + what + " must hold numbers");
    v[static_cast<Index>(i)] = j[i].get<double>();
  }
  return v;
}

Matrix to_matrix(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw ConfigError("config: " + what + " must be an array of rows");
  Matrix m;
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Vector row = to_vector(j[r], what);
    if (r == 0) m.resize(static_cast<Index>(j.size()), row.size());
    if (row.size() != m.cols()) throw ConfigError("config: " + what + " has ragged rows");
    m.row(static_cast<Index>(r)) = row.transpose();
  }
  return m;
}

Matrix to_support(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw ConfigError("config: " + what + " must be an array of points");
  Matrix m;
  for (std::size_t c = 0; c < j.size(); ++c) {
    const Vector pt = j[c].is_number() ? Vector::Constant(1, j[c].get<double>()) : to_vector(j[c], what);
    if (c == 0) m.resize(pt.size(), static_cast<Index>(j.size()));
    if (pt.size() != m.rows()) throw ConfigError("config: " + what + " points differ in length");
    m.col(static_cast<Index>(c)) = pt;
  }
  return m;
}

void apply_file_settings(RunConfig& cfg) {
  const json& d = cfg.doc;
  cfg.solver.grad_tol = get_number(d, "solver", "tol", cfg.solver.grad_tol);
  cfg.solver.step_tol = get_number(d, "solver", "step_tol", cfg.solver.step_tol);
  cfg.solver.max_iter = static_cast<int>(get_number(d, "solver", "max_iter", cfg.solver.max_iter));
  cfg.solver.max_step_halvings =
      static_cast<int>(get_number(d, "solver", "max_step_halvings", cfg.solver.max_step_halvings));
  if (const json* t = find(d, "solver", "init_theta")) cfg.solver.init_theta = to_vector(*t, "solver.init_theta");
  if (const json* g = find(d, "solver", "init_gamma")) cfg.solver.init_gamma = to_vector(*g, "solver.init_gamma");
  cfg.level = get_number(d, "inference", "level", cfg.level);
  const double seed = get_number(d, "", "seed", static_cast<double>(cfg.seed));
  if (seed < 0) throw ConfigError("config: seed must be nonnegative");
  cfg.seed = static_cast<std::uint64_t>(seed);
  if (const json* t = find(d, "output", "timestamp")) {
    if (!t->is_boolean()) throw ConfigError("config: output.timestamp must be true or false");
    cfg.timestamp = t->get<bool>();
  }
  if (const json* p = find(d, "data", "path")) {
    if (!p->is_string()) throw ConfigError("config: data.path must be a string");
    cfg.data_path = p->get<std::string>();
  }
  if (const json* p = find(d, "output", "path")) {
    if (!p->is_string()) throw ConfigError("config: output.path must be a string");
    cfg.out_path = p->get<std::string>();
  }
}

AssociationModel build_model(const json& doc, Index dim_x, Index dim_y, Index levels) {
  const std::string kind = get_string(doc, "model", "kind", "log_bilinear");
  if (kind == "log_bilinear") return make_log_bilinear(dim_x, dim_y);
  if (kind == "glm_canonical") {
    if (dim_y != 1) throw ConfigError("model glm_canonical needs scalar outcome features");
    return make_glm_canonical(dim_x);
  }
  if (kind == "multinomial_logit") {
    if (dim_y != levels - 1) {
      throw ConfigError("model multinomial_logit needs outcome features of dimension K");
    }
    return make_multinomial_logit(dim_x, levels);
  }
  if (kind == "restricted") {
    const json* a = find(doc, "model", "a");
    const json* b = find(doc, "model", "b");
    if (!a || !b) throw ConfigError("model restricted needs matrices a and b");
    try {
      return restrict_bilinear(make_log_bilinear(dim_x, dim_y), to_matrix(*a, "model.a"),
                               to_matrix(*b, "model.b"));
    } catch (const ArgumentError& e) {
      throw ConfigError(std::string("model: ") + e.what());
    }
  }
  throw ConfigError("unknown model kind '" + kind +
                    "' (expected log_bilinear, glm_canonical, multinomial_logit or restricted)");
}

FiniteJoint build_joint(const json& doc, const std::string& section) {
  if (const json* p = find(doc, section, "path")) {
    if (!p->is_string()) throw ConfigError("config: " + section + ".path must be a string");
    return read_joint_csv(p->get<std::string>());
  }
  const json* zs = find(doc, section, "z_support");
  const json* vs = find(doc, section, "v_support");
  try {
    if (const json* probs = find(doc, section, "probs")) {
      const Matrix p = to_matrix(*probs, section + ".probs");
      return FiniteJoint(p, zs ? to_support(*zs, section + ".z_support") : indicator_support(p.rows()),
                         vs ? to_support(*vs, section + ".v_support") : indicator_support(p.cols()));
    }
    const json* px = find(doc, section, "pi_x");
    const json* py = find(doc, section, "pi_y");
    if (!px || !py) {
      throw ConfigError("config: [" + section + "] needs path, probs, or pi_x and pi_y");
    }
    const Vector pi_x = to_vector(*px, section + ".pi_x");
    const Vector pi_y = to_vector(*py, section + ".pi_y");
    const Matrix z = zs ? to_support(*zs, section + ".z_support") : indicator_support(pi_x.size());
    const Matrix v = vs ? to_support(*vs, section + ".v_support") : indicator_support(pi_y.size());
    Matrix psi;
    if (const json* ps = find(doc, section, "psi")) {
      psi = to_matrix(*ps, section + ".psi");
    } else if (const json* th = find(doc, section, "theta")) {
      const AssociationModel model = build_model(doc, z.rows(), v.rows(), v.cols());
      psi = model_psi_table(model, to_vector(*th, section + ".theta"), z, v);
    } else {
      throw ConfigError("config: [" + section + "] needs psi or theta");
    }
    IpfOptions opt;
    opt.tol = get_number(doc, section, "tol", opt.tol);
    return ipf_fit(pi_x, pi_y, psi, z, v, opt);
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

}  // namespace assoc::cli

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "assoc/estimator.hpp"
#include "assoc/simulate.hpp"

namespace assoc::cli {

using nlohmann::json;

json to_json(const Vector& v);
json to_json(const Matrix& m);  // array of rows

struct NamedTest {
  std::string name;
  Matrix contrast;
};

// Parameters with names, standard errors from J^-1, intervals and Wald tests.
json fit_report(const FitReport& fit, const AssociationModel& model, double level,
                const std::vector<NamedTest>& tests);

std::string fit_summary(const json& report);

json coverage_summary(const CoverageResult& r);
std::string coverage_csv(const CoverageResult& r);
json consistency_summary(const ConsistencyResult& r);
std::string consistency_csv(const ConsistencyResult& r);
json invariance_summary(const InvarianceResult& r);
std::string invariance_csv(const InvarianceResult& r);

// UTC time in ISO 8601.
std::string timestamp_now();

}  // namespace assoc::cli

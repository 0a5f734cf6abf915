#pragma once

// JSON (de)serialization.  Readers are strict: unknown or missing keys and
// wrongly typed values raise ConfigError naming the offending field.

#include "flowforge/coupling.hpp"
#include "flowforge/henon.hpp"
#include "flowforge/multipoly.hpp"
#include "flowforge/pipeline.hpp"

#include <json.hpp>

#include <initializer_list>
#include <string>

namespace flowforge {

using json = nlohmann::json;

// Rejects keys outside `allowed` and reports missing `required` keys.
void check_keys(const json& j, std::initializer_list<const char*> allowed,
                std::initializer_list<const char*> required, const std::string& where);

json vector_to_json(const Eigen::VectorXd& v);
json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::VectorXd vector_from_json(const json& j, const std::string& where);
Eigen::MatrixXd matrix_from_json(const json& j, const std::string& where);

json polynomial_to_json(const Polynomial& p);
Polynomial polynomial_from_json(const json& j, const std::string& where = "polynomial");
json trig_to_json(const TrigFunction& f);
TrigFunction trig_from_json(const json& j, const std::string& where = "trig");
json tvp_to_json(const TimeVaryingPolynomial& p);
TimeVaryingPolynomial tvp_from_json(const json& j, const std::string& where = "tvp");

json henon_to_json(const HenonSystem& sys);
HenonSystem henon_from_json(const json& j);

json gaussian_to_json(const GaussianDensity& p);
GaussianDensity gaussian_from_json(const json& j, const std::string& where = "gaussian");

json block_to_json(const CouplingBlock& b);
CouplingBlock block_from_json(const json& j, const std::string& where = "block");

// {"dim", "domain": {"lo", "hi"}, "source"?, "blocks": [...]}
json network_to_json(const CouplingNetwork& net, const GaussianDensity* source = nullptr);
CouplingNetwork network_from_json(const json& j, GaussianDensity* source = nullptr);

json conditioning_to_json(const ConditioningReport& r);
json build_report_to_json(const BuildReport& r);
json slope_report_to_json(const SlopeReport& r);

// Build configuration fields (without the global seed/out_dir/threads keys,
// which the caller strips).
BuildConfig build_config_from_json(const json& j);
json build_config_to_json(const BuildConfig& cfg);

// Fixed formatting used by every CSV writer: %.17g.
std::string format_number(double x);

}  // namespace flowforge

#include "flowforge/io.hpp"

#include "flowforge/errors.hpp"

#include <cmath>
#include <cstdio>
#include <set>

namespace flowforge {

void check_keys(const json& j, std::initializer_list<const char*> allowed,
                std::initializer_list<const char*> required, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  std::set<std::string> ok;
  for (const char* a : allowed) ok.insert(a);
  for (const char* r : required) ok.insert(r);
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) throw ConfigError(where + ": unknown field '" + key + "'");
  for (const char* r : required)
    if (!j.contains(r)) throw ConfigError(where + ": missing required field '" + std::string(r) + "'");
}

namespace {

double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw ConfigError(where + ": expected an integer");
  return j.get<int>();
}

MultiIndex index_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an integer array");
  MultiIndex idx;
  for (const auto& e : j) {
    const int v = integer(e, where);
    if (v < 0) throw ConfigError(where + ": negative exponent");
    idx.push_back(v);
  }
  return idx;
}

}  // namespace

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

Eigen::VectorXd vector_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected a number array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = number(j[i], where);
  return v;
}

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw ConfigError(where + ": expected a non-empty array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw ConfigError(where + ": ragged matrix");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = number(j[r][c], where);
  }
  return m;
}

json polynomial_to_json(const Polynomial& p) {
  json terms = json::array();
  for (const auto& [idx, c] : p.terms()) terms.push_back({{"idx", idx}, {"c", c}});
  return {{"dim", p.dimension()}, {"terms", terms}};
}

Polynomial polynomial_from_json(const json& j, const std::string& where) {
  check_keys(j, {}, {"dim", "terms"}, where);
  const int dim = integer(j.at("dim"), where + ".dim");
  if (dim < 0) throw ConfigError(where + ".dim: must be non-negative");
  Polynomial p(dim);
  if (!j.at("terms").is_array()) throw ConfigError(where + ".terms: expected an array");
  for (const auto& t : j.at("terms")) {
    check_keys(t, {}, {"idx", "c"}, where + ".terms[]");
    const MultiIndex idx = index_from_json(t.at("idx"), where + ".terms[].idx");
    if (static_cast<int>(idx.size()) != dim)
      throw ConfigError(where + ": term index length does not match dim");
    p.add_term(idx, number(t.at("c"), where + ".terms[].c"));
  }
  return p;
}

json trig_to_json(const TrigFunction& f) {
  json modes = json::array();
  for (const auto& [m, mode] : f.modes()) modes.push_back({{"m", m}, {"cos", mode.cos}, {"sin", mode.sin}});
  return {{"modes", modes}};
}

TrigFunction trig_from_json(const json& j, const std::string& where) {
  check_keys(j, {}, {"modes"}, where);
  TrigFunction f;
  if (!j.at("modes").is_array()) throw ConfigError(where + ".modes: expected an array");
  for (const auto& m : j.at("modes")) {
    check_keys(m, {}, {"m", "cos", "sin"}, where + ".modes[]");
    f.add_mode(integer(m.at("m"), where + ".m"), number(m.at("cos"), where + ".cos"),
               number(m.at("sin"), where + ".sin"));
  }
  return f;
}

json tvp_to_json(const TimeVaryingPolynomial& p) {
  json terms = json::array();
  for (const auto& [idx, f] : p.terms()) terms.push_back({{"idx", idx}, {"f", trig_to_json(f)}});
  return {{"dim", p.dimension()}, {"terms", terms}};
}

TimeVaryingPolynomial tvp_from_json(const json& j, const std::string& where) {
  check_keys(j, {}, {"dim", "terms"}, where);
  const int dim = integer(j.at("dim"), where + ".dim");
  TimeVaryingPolynomial p(dim);
  for (const auto& t : j.at("terms")) {
    check_keys(t, {}, {"idx", "f"}, where + ".terms[]");
    const MultiIndex idx = index_from_json(t.at("idx"), where + ".terms[].idx");
    if (static_cast<int>(idx.size()) != dim)
      throw ConfigError(where + ": term index length does not match dim");
    p.add_term(idx, trig_from_json(t.at("f"), where + ".terms[].f"));
  }
  return p;
}

json henon_to_json(const HenonSystem& sys) {
  json J = json::array(), F = json::array(), G = json::array();
  for (int j = 0; j < sys.dimension(); ++j) {
    J.push_back(tvp_to_json(sys.J[j]));
    F.push_back(tvp_to_json(sys.F[j]));
    G.push_back(tvp_to_json(sys.G[j]));
  }
  return {{"omega", sys.omega}, {"tau", sys.tau},         {"gamma", sys.gamma},
          {"max_degree", sys.max_degree}, {"J", J}, {"F", F}, {"G", G},
          {"max_residual", sys.max_residual}, {"min_rank_ratio", sys.min_rank_ratio}};
}

HenonSystem henon_from_json(const json& j) {
  check_keys(j, {"max_residual", "min_rank_ratio"}, {"omega", "tau", "gamma", "max_degree", "J", "F", "G"},
             "henon");
  HenonSystem sys;
  for (const auto& w : j.at("omega")) sys.omega.push_back(integer(w, "henon.omega"));
  sys.tau = number(j.at("tau"), "henon.tau");
  sys.gamma = number(j.at("gamma"), "henon.gamma");
  sys.max_degree = integer(j.at("max_degree"), "henon.max_degree");
  for (const auto& t : j.at("J")) sys.J.push_back(tvp_from_json(t, "henon.J"));
  for (const auto& t : j.at("F")) sys.F.push_back(tvp_from_json(t, "henon.F"));
  for (const auto& t : j.at("G")) sys.G.push_back(tvp_from_json(t, "henon.G"));
  const std::size_t d = sys.omega.size();
  if (sys.J.size() != d || sys.F.size() != d || sys.G.size() != d)
    throw ConfigError("henon: J, F, G must have one entry per frequency");
  if (j.contains("max_residual")) sys.max_residual = number(j.at("max_residual"), "henon.max_residual");
  if (j.contains("min_rank_ratio")) sys.min_rank_ratio = number(j.at("min_rank_ratio"), "henon.min_rank_ratio");
  return sys;
}

json gaussian_to_json(const GaussianDensity& p) {
  return {{"mean", vector_to_json(p.mean)}, {"covariance", matrix_to_json(p.covariance)}};
}

GaussianDensity gaussian_from_json(const json& j, const std::string& where) {
  check_keys(j, {}, {"mean", "covariance"}, where);
  GaussianDensity p{vector_from_json(j.at("mean"), where + ".mean"),
                    matrix_from_json(j.at("covariance"), where + ".covariance")};
  try {
    p.validate();
  } catch (const MatrixError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return p;
}

json block_to_json(const CouplingBlock& b) {
  json mask = json::array(), scale = json::array(), shift = json::array();
  for (bool m : b.mask()) mask.push_back(m ? 1 : 0);
  for (const auto& p : b.scale()) scale.push_back(polynomial_to_json(p));
  for (const auto& p : b.shift()) shift.push_back(polynomial_to_json(p));
  return {{"mask", mask}, {"scale", scale}, {"shift", shift}, {"step_time", b.step_time()}};
}

CouplingBlock block_from_json(const json& j, const std::string& where) {
  check_keys(j, {"step_time"}, {"mask", "scale", "shift"}, where);
  std::vector<bool> mask;
  for (const auto& m : j.at("mask")) mask.push_back(integer(m, where + ".mask") != 0);
  std::vector<Polynomial> scale, shift;
  for (const auto& p : j.at("scale")) scale.push_back(polynomial_from_json(p, where + ".scale"));
  for (const auto& p : j.at("shift")) shift.push_back(polynomial_from_json(p, where + ".shift"));
  const double t = j.contains("step_time") ? number(j.at("step_time"), where + ".step_time") : 0.0;
  try {
    return CouplingBlock(std::move(mask), std::move(scale), std::move(shift), t);
  } catch (const InputError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

json network_to_json(const CouplingNetwork& net, const GaussianDensity* source) {
  json blocks = json::array();
  for (const auto& b : net.blocks) blocks.push_back(block_to_json(b));
  json out = {{"dim", net.dimension()},
              {"domain", {{"lo", vector_to_json(net.domain.lo)}, {"hi", vector_to_json(net.domain.hi)}}},
              {"blocks", blocks}};
  if (source) out["source"] = gaussian_to_json(*source);
  return out;
}

CouplingNetwork network_from_json(const json& j, GaussianDensity* source) {
  check_keys(j, {"source"}, {"dim", "domain", "blocks"}, "network");
  CouplingNetwork net;
  check_keys(j.at("domain"), {}, {"lo", "hi"}, "network.domain");
  net.domain.lo = vector_from_json(j.at("domain").at("lo"), "network.domain.lo");
  net.domain.hi = vector_from_json(j.at("domain").at("hi"), "network.domain.hi");
  const int dim = integer(j.at("dim"), "network.dim");
  if (!j.at("blocks").is_array()) throw ConfigError("network.blocks: expected an array");
  std::size_t i = 0;
  for (const auto& b : j.at("blocks"))
    net.blocks.push_back(block_from_json(b, "network.blocks[" + std::to_string(i++) + "]"));
  try {
    net.validate();
  } catch (const InputError& e) {
    throw ConfigError(std::string("network: ") + e.what());
  }
  if (!net.blocks.empty() && net.blocks.front().dimension() != dim)
    throw ConfigError("network.dim does not match its blocks");
  if (source && j.contains("source")) *source = gaussian_from_json(j.at("source"), "network.source");
  return net;
}

json conditioning_to_json(const ConditioningReport& r) {
  return {{"kappa", r.kappa},
          {"gamma", r.gamma},
          {"lower", r.lower},
          {"upper", r.upper},
          {"bound", r.bound},
          {"observed_min", r.observed_min},
          {"observed_max", r.observed_max},
          {"observed_condition", r.observed_condition},
          {"identity_deviation", r.identity_deviation},
          {"samples", r.samples},
          {"violations", r.violations}};
}

json build_report_to_json(const BuildReport& r) {
  return {{"kappa", r.kappa},
          {"lyapunov0", r.lyapunov0},
          {"lipschitz_bound", r.lipschitz_bound},
          {"epsilon1", r.epsilon1},
          {"phi", r.phi},
          {"phi_chosen", r.phi_chosen},
          {"radius", r.radius},
          {"chunks", r.chunks},
          {"tau_eff", r.tau_eff},
          {"steps_per_chunk", r.steps_per_chunk},
          {"eta_eff", r.eta_eff},
          {"block_count", r.block_count},
          {"max_residual", r.max_residual},
          {"min_rank_ratio", r.min_rank_ratio},
          {"c0", r.c0},
          {"c1", r.c1},
          {"roundtrip", r.roundtrip},
          {"min_abs_scale", r.min_abs_scale},
          {"min_scale_block", r.min_scale_block},
          {"conditioning", conditioning_to_json(r.conditioning)},
          {"notes", r.notes}};
}

json slope_report_to_json(const SlopeReport& r) {
  return {{"parameters", r.parameters}, {"c0", r.c0}, {"c1", r.c1},
          {"slope", std::isfinite(r.slope) ? json(r.slope) : json(nullptr)},
          {"degenerate", r.degenerate}};
}

BuildConfig build_config_from_json(const json& j) {
  check_keys(j,
             {"mean", "epsilon", "eta", "phi", "radius", "freeze", "probe_grid", "probe_half_width",
              "reference_steps_per_unit"},
             {"d", "sigma_x", "gamma", "tau"}, "build config");
  BuildConfig c;
  c.d = integer(j.at("d"), "d");
  c.sigma_x = matrix_from_json(j.at("sigma_x"), "sigma_x");
  c.gamma = number(j.at("gamma"), "gamma");
  c.tau = number(j.at("tau"), "tau");
  if (j.contains("mean")) c.mean = vector_from_json(j.at("mean"), "mean");
  if (j.contains("epsilon")) c.epsilon = number(j.at("epsilon"), "epsilon");
  if (j.contains("eta")) c.eta = number(j.at("eta"), "eta");
  if (j.contains("phi")) c.phi = number(j.at("phi"), "phi");
  if (j.contains("radius")) c.radius = number(j.at("radius"), "radius");
  if (j.contains("freeze")) {
    const json& f = j.at("freeze");
    if (!f.is_string() || (f != "midpoint" && f != "endpoint"))
      throw ConfigError("freeze: expected \"midpoint\" or \"endpoint\"");
    c.freeze_midpoint = f == "midpoint";
  }
  if (j.contains("probe_grid")) c.probe_grid = integer(j.at("probe_grid"), "probe_grid");
  if (j.contains("probe_half_width")) c.probe_half_width = number(j.at("probe_half_width"), "probe_half_width");
  if (j.contains("reference_steps_per_unit"))
    c.reference_steps_per_unit = integer(j.at("reference_steps_per_unit"), "reference_steps_per_unit");
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  } catch (const std::domain_error& e) {
    throw ConfigError(e.what());
  } catch (const MatrixError& e) {
    throw ConfigError(std::string("sigma_x: ") + e.what());
  }
  return c;
}

json build_config_to_json(const BuildConfig& c) {
  json out = {{"d", c.d},
              {"sigma_x", matrix_to_json(c.sigma_x)},
              {"gamma", c.gamma},
              {"tau", c.tau},
              {"epsilon", c.epsilon},
              {"eta", c.eta},
              {"phi", c.phi},
              {"radius", c.radius},
              {"freeze", c.freeze_midpoint ? "midpoint" : "endpoint"},
              {"probe_grid", c.probe_grid},
              {"probe_half_width", c.probe_half_width},
              {"reference_steps_per_unit", c.reference_steps_per_unit}};
  if (c.mean.size()) out["mean"] = vector_to_json(c.mean);
  return out;
}

std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace flowforge

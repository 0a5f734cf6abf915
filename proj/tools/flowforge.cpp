// flowforge <build|verify|sample> --config <path> [--seed N] [--out DIR] [--threads N]
//
// Exit codes: 0 ok, 1 assertion failure, 2 config error, 3 numeric or solver
// error, 4 divergence.

#include "flowforge/errors.hpp"
#include "flowforge/io.hpp"
#include "flowforge/parallel.hpp"
#include "flowforge/pipeline.hpp"
#include "flowforge/suites.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace flowforge;

namespace {

enum Exit { kOk = 0, kAssertion = 1, kConfig = 2, kNumeric = 3, kDivergence = 4 };

struct Globals {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  int threads = 1;
};

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
};

json load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
}

// Removes the global fields from `j` and applies command-line overrides.
Globals take_globals(json& j, const Overrides& o) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  Globals g;
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ConfigError("seed: expected a non-negative integer");
    g.seed = j["seed"].get<std::uint64_t>();
    j.erase("seed");
  }
  if (j.contains("out_dir")) {
    if (!j["out_dir"].is_string()) throw ConfigError("out_dir: expected a string");
    g.out_dir = j["out_dir"].get<std::string>();
    j.erase("out_dir");
  }
  if (j.contains("threads")) {
    if (!j["threads"].is_number_integer() || j["threads"].get<int>() < 0)
      throw ConfigError("threads: expected a non-negative integer");
    g.threads = j["threads"].get<int>();
    j.erase("threads");
  }
  if (o.seed) g.seed = *o.seed;
  if (o.out) g.out_dir = *o.out;
  if (o.threads) {
    if (*o.threads < 0) throw ConfigError("--threads must be non-negative");
    g.threads = *o.threads;
  }
  set_thread_count(g.threads);
  fs::create_directories(g.out_dir);
  return g;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  os << j.dump(2) << '\n';
  if (!os) throw std::runtime_error("cannot write " + path.string());
}

int cmd_build(const Overrides& o) {
  json j = load_config(o.config);
  const Globals g = take_globals(j, o);
  BuildConfig cfg = build_config_from_json(j);
  cfg.seed = g.seed;

  const BuildResult res = build_network(cfg);
  const GaussianDensity source = cfg.source();
  const fs::path out(g.out_dir);
  write_json(out / "network.json", network_to_json(res.network, &source));
  json report = build_report_to_json(res.report);
  report["config"] = build_config_to_json(cfg);
  report["seed"] = g.seed;
  write_json(out / "report.json", report);
  {
    std::ofstream os(out / "probes.csv");
    write_probe_csv(os, probe_flow(network_map(res.network), Box::cube(2 * cfg.d, cfg.probe_half_width),
                                   cfg.probe_grid));
  }
  const BuildReport& r = res.report;
  std::cout << "built " << r.block_count << " blocks over " << r.chunks << " chunks (phi " << r.phi
            << ", tau " << r.tau_eff << ", eta " << r.eta_eff << ")\n"
            << "c0 " << r.c0 << "  c1 " << r.c1 << "  roundtrip " << r.roundtrip << "  condition "
            << r.conditioning.observed_condition << " (bound " << r.conditioning.bound << ")\n";
  return kOk;
}

int cmd_verify(const Overrides& o) {
  json j = load_config(o.config);
  const Globals g = take_globals(j, o);
  if (!j.contains("suite") || !j["suite"].is_string())
    throw ConfigError("missing required field 'suite'");
  const std::string name = j["suite"].get<std::string>();
  j.erase("suite");
  const SuiteResult r = run_suite(name, j, g.seed);
  write_suite(r, g.out_dir);
  std::cout << name << ": " << (r.pass() ? "pass" : "FAIL") << " (" << r.rows.size() << " rows)\n";
  for (const auto& f : r.failures) std::cerr << name << ": " << f << '\n';
  return r.pass() ? kOk : kAssertion;
}

int cmd_sample(const Overrides& o) {
  json j = load_config(o.config);
  const Globals g = take_globals(j, o);
  check_keys(j, {"radius", "directions", "source"}, {"network", "samples"}, "sample config");
  if (!j["network"].is_string()) throw ConfigError("network: expected a path");
  if (!j["samples"].is_number_integer() || j["samples"].get<long>() < 2)
    throw ConfigError("samples: expected an integer >= 2");
  const long n = j["samples"].get<long>();
  int directions = 64;
  if (j.contains("directions")) {
    if (!j["directions"].is_number_integer() || j["directions"].get<int>() < 1)
      throw ConfigError("directions: expected a positive integer");
    directions = j["directions"].get<int>();
  }
  fs::path net_path = j["network"].get<std::string>();
  if (net_path.is_relative()) net_path = fs::path(o.config).parent_path() / net_path;
  std::ifstream is(net_path);
  if (!is) throw ConfigError("cannot open network file '" + net_path.string() + "'");
  json nj;
  try {
    nj = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("network file is not valid JSON: " + std::string(e.what()));
  }
  const int dim = nj.contains("dim") && nj["dim"].is_number_integer() ? nj["dim"].get<int>() : 0;
  GaussianDensity target{Eigen::VectorXd::Zero(dim), Eigen::MatrixXd::Identity(dim, dim)};
  const CouplingNetwork net = network_from_json(nj, &target);
  if (j.contains("source")) target = gaussian_from_json(j["source"], "source");

  double radius = net.domain.hi.size() ? net.domain.hi.maxCoeff() : 0.0;
  if (j.contains("radius")) {
    if (!j["radius"].is_number() || !(j["radius"].get<double>() > 0.0))
      throw ConfigError("radius: expected a positive number");
    radius = j["radius"].get<double>();
  }
  if (!(radius > 0.0)) throw ConfigError("radius: network has no domain; set radius explicitly");

  Eigen::MatrixXd pushed;
  const W1Report w = evaluate_w1(net, target, radius, n, g.seed, directions, &pushed);
  const fs::path out(g.out_dir);
  {
    std::ofstream os(out / "samples.csv");
    write_cloud_csv(os, SampleCloud{std::move(pushed), g.seed}, true);
  }
  write_json(out / "w1.json", {{"samples", w.samples},
                               {"directions", w.directions},
                               {"radius", w.radius},
                               {"seed", g.seed},
                               {"sliced_w1", w.sliced},
                               {"marginal_w1", vector_to_json(w.marginals)}});
  std::cout << "sliced W1 " << w.sliced << " over " << w.samples << " samples\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Builds and verifies affine-coupling flow networks"};
  app.require_subcommand(1);
  Overrides o;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 0;
  for (const char* name : {"build", "verify", "sample"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", o.config, "JSON config file")->required();
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out, "override the output directory");
    sub->add_option("--threads", threads, "worker threads, 0 = hardware concurrency");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }
  CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--seed")) o.seed = seed;
  if (sub->count("--out")) o.out = out;
  if (sub->count("--threads")) o.threads = threads;

  const std::string cmd = sub->get_name();
  try {
    if (cmd == "build") return cmd_build(o);
    if (cmd == "verify") return cmd_verify(o);
    return cmd_sample(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const InputError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const PreconditionError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "divergence: " << e.what() << '\n';
    return kDivergence;
  } catch (const SingularBlockError& e) {
    std::cerr << "singular block " << e.block() << " (coordinate " << e.coordinate() << "): " << e.what()
              << '\n';
    return kNumeric;
  } catch (const SolvabilityError& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  }
}

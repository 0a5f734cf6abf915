// Acceptance run: one PASS/FAIL line per criterion, with the measured values
// and wall time.  Exit status is nonzero if any criterion fails.

#include "flowforge/io.hpp"
#include "flowforge/pipeline.hpp"
#include "flowforge/suites.hpp"

#include <chrono>
#include <cstdio>
#include <exception>
#include <functional>
#include <string>

using namespace flowforge;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = s < budget_s;
  const bool ok = o.pass && in_time;
  if (!ok) ++failures;
  std::printf("%s %2d %-22s %7.2fs (budget %gs%s)  %s\n", ok ? "PASS" : "FAIL", id, name, s, budget_s,
              in_time ? "" : ", exceeded", o.detail.c_str());
  std::fflush(stdout);
}

Outcome from_suite(const std::string& name, const char* key) {
  const SuiteResult r = run_suite(name, json::object(), 0);
  std::string detail = std::to_string(r.rows.size()) + " rows, " + std::to_string(r.failures.size()) + " failing";
  if (key && r.summary.contains(key)) detail += ", " + std::string(key) + " " + r.summary[key].dump();
  if (!r.failures.empty()) detail += "; first: " + r.failures.front();
  return {r.pass(), detail};
}

BuildConfig end_to_end(double tau) {
  BuildConfig c;
  c.d = 1;
  c.sigma_x = Eigen::MatrixXd::Constant(1, 1, 0.5);
  c.gamma = 1.0;
  c.phi = 5.0;
  c.tau = tau;
  c.eta = tau * tau;
  c.probe_grid = 21;
  c.probe_half_width = 2.0;
  return c;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

}  // namespace

int main() {
  criterion(1, "variance proxy", 1, [] { return from_suite("variance", "max_error"); });
  criterion(2, "conditioning bound", 10, [] { return from_suite("conditioning", nullptr); });
  criterion(3, "chunk order", 30, [] { return from_suite("henon-order", "slope"); });
  criterion(4, "euler order", 30, [] { return from_suite("euler-order", "slope"); });
  criterion(5, "perturbation order", 10, [] { return from_suite("perturbation-order", nullptr); });
  criterion(6, "lyapunov decay", 1, [] { return from_suite("lyapunov", "max_ratio_to_bound"); });
  criterion(7, "solvability", 30, [] { return from_suite("solvability", nullptr); });
  criterion(8, "end-to-end build", 300, [] {
    const BuildConfig coarse = end_to_end(0.25), fine = end_to_end(0.125);
    const BuildResult a = build_network(coarse);
    const BuildResult b = build_network(fine);
    const double ratio = a.report.c0 / b.report.c0;
    const double roundtrip = std::max(a.report.roundtrip, b.report.roundtrip);
    const double cond = a.report.conditioning.observed_condition;
    const double cond_max = a.report.conditioning.bound * 1.2;
    const W1Report w = evaluate_w1(a.network, coarse, a.report.radius, 100000, 1);
    const bool ok = ratio >= 1.6 && roundtrip <= 1e-9 && cond <= cond_max && w.sliced <= 0.1;
    return Outcome{ok, "c0 " + fmt(a.report.c0) + " -> " + fmt(b.report.c0) + " (ratio " + fmt(ratio) +
                           "), roundtrip " + fmt(roundtrip) + ", condition " + fmt(cond) + " <= " +
                           fmt(cond_max) + ", sliced W1 " + fmt(w.sliced)};
  });
  criterion(9, "wasserstein properties", 30, [] { return from_suite("wasserstein", nullptr); });
  criterion(10, "convolution sandwich", 1, [] { return from_suite("convolution", "min_margin"); });
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}

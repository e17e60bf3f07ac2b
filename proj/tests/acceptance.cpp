// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failed criteria (0 when all pass).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "afl/auction.hpp"
#include "afl/cli.hpp"
#include "afl/experiment.hpp"
#include "afl/ledger.hpp"
#include "afl/mechanism.hpp"
#include "afl/reputation.hpp"

using namespace afl;

namespace {

using Clock = std::chrono::steady_clock;

// Pinned tolerances and budgets.
constexpr double kClosedFormTol = 1e-12;
constexpr double kRentTol = 1e-9;
constexpr double kGapTol = 1e-9;
constexpr double kSigmas = 3.0;
constexpr double kMaxRegimeGap = 0.02;
constexpr double kC1Seconds = 1.0;
constexpr double kC6Seconds = 10.0;
constexpr double kC7Seconds = 120.0;
constexpr double kC8Seconds = 120.0;

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(const char* id, const char* title, const std::function<Outcome()>& body) {
  const auto start = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  std::printf("[%s] %s %s: %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str(), secs);
  std::fflush(stdout);
  if (!o.pass) ++failures;
}

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::vector<double> grid(std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = static_cast<double>(i) / static_cast<double>(n - 1);
  return g;
}

mechanism::MarketParams reference_point(mechanism::Regime r) {
  mechanism::MarketParams p;
  p.lambda = 1.0;
  p.delta = 2.0;
  p.regime = r;
  return p;
}

std::vector<std::uint64_t> seeds_1_to(std::uint64_t n) {
  std::vector<std::uint64_t> s;
  for (std::uint64_t i = 1; i <= n; ++i) s.push_back(i);
  return s;
}

// Utility comparison over the qualified pool of a buyers' market.
experiment::ExperimentConfig ordering_config(flsim::Algorithm algo) {
  experiment::ExperimentConfig cfg;
  cfg.n_clients = 40;
  cfg.k_values = {5, 10, 15};
  cfg.rounds = 10;
  cfg.seeds = seeds_1_to(20);
  cfg.lambda = 35.0;
  cfg.theta_min = 0.9;
  cfg.theta_max = 1.0;
  cfg.algo = algo;
  if (algo == flsim::Algorithm::FedProx) cfg.prox_mu = 0.1;
  return cfg;
}

Outcome check_ordering(const experiment::ExperimentConfig& cfg, double budget_seconds) {
  const auto start = Clock::now();
  const auto result = experiment::run_experiment(cfg);
  const double secs = seconds_since(start);
  bool ok = true;
  std::ostringstream d;
  for (std::size_t k : cfg.k_values) {
    double c = 0, i = 0, pf = 0, rnd = 0;
    for (const auto& row : result.summary) {
      if (row.k != k) continue;
      switch (row.mechanism) {
        case auction::Mechanism::OursComplete: c = row.mean_utility; break;
        case auction::Mechanism::OursIncomplete: i = row.mean_utility; break;
        case auction::Mechanism::PriceFirst: pf = row.mean_utility; break;
        case auction::Mechanism::Randomized: rnd = row.mean_utility; break;
      }
    }
    const double gap = (c - i) / c;
    const bool k_ok = c >= i && i >= pf && i >= rnd && gap <= kMaxRegimeGap;
    ok = ok && k_ok;
    char buf[200];
    std::snprintf(buf, sizeof buf, "k=%zu C=%.1f I=%.1f PF=%.1f R=%.1f gap=%.2f%%%s; ", k, c, i, pf, rnd,
                  100.0 * gap, k_ok ? "" : " VIOLATED");
    d << buf;
  }
  if (secs >= budget_seconds) {
    ok = false;
    d << "over time budget; ";
  }
  d << fmt("run %.1fs", secs);
  return {ok, d.str()};
}

}  // namespace

int main() {
  report("C1", "closed-form fidelity", [] {
    const auto start = Clock::now();
    double worst = 0.0;
    for (double t : grid(1001)) {
      const mechanism::Efficiency th(t);
      worst = std::max(worst, std::abs(mechanism::solve_incomplete(th, reference_point(mechanism::Regime::Incomplete)).q -
                                       (1 + 2 * t) * (1 + 2 * t) / 6.0));
      worst = std::max(worst, std::abs(mechanism::solve_complete(th, reference_point(mechanism::Regime::Complete)).q -
                                       (1 + 2 * t) / 2.0));
    }
    const double secs = seconds_since(start);
    return Outcome{worst <= kClosedFormTol && secs < kC1Seconds, fmt("max |error| = %.3g on 1001 points", worst)};
  });

  report("C2", "no distortion at the top", [] {
    const mechanism::Efficiency one(1.0);
    const auto c = mechanism::solve_complete(one, reference_point(mechanism::Regime::Complete));
    const auto i = mechanism::solve_incomplete(one, reference_point(mechanism::Regime::Incomplete));
    const bool ok = c.q == 1.5 && c.r == 0.75 && i.q == 1.5 && i.r == 0.75;
    char buf[160];
    std::snprintf(buf, sizeof buf, "complete (%.17g, %.17g), incomplete (%.17g, %.17g)", c.q, c.r, i.q, i.r);
    return Outcome{ok, buf};
  });

  report("C3", "downward distortion and nonnegative rent", [] {
    bool ok = true;
    std::size_t strict = 0, points = 0;
    for (double t : grid(1001)) {
      const mechanism::Efficiency th(t);
      const auto ci = mechanism::solve_complete(th, reference_point(mechanism::Regime::Complete));
      const auto star = mechanism::solve_incomplete(th, reference_point(mechanism::Regime::Incomplete));
      const double rent = mechanism::information_rent(th, star.q, 2.0);
      ok = ok && star.q <= ci.q + kClosedFormTol && rent >= -kClosedFormTol;
      if (t < 1.0) {
        ++points;
        if (star.q < ci.q) ++strict;
      } else {
        ok = ok && std::abs(rent) <= kClosedFormTol;
      }
    }
    ok = ok && strict == points;
    return Outcome{ok, std::to_string(strict) + "/" + std::to_string(points) + " strict below theta=1"};
  });

  report("C4", "surplus extraction", [] {
    double worst_ci = 0.0, worst_rent = 0.0;
    for (double t : grid(1001)) {
      const mechanism::Efficiency th(t);
      const auto ci = mechanism::solve_complete(th, reference_point(mechanism::Regime::Complete));
      const auto star = mechanism::solve_incomplete(th, reference_point(mechanism::Regime::Incomplete));
      worst_ci = std::max(worst_ci, std::abs(mechanism::client_utility(ci, th, 2.0)));
      worst_rent = std::max(worst_rent, std::abs(mechanism::client_utility(star, th, 2.0) -
                                                 mechanism::information_rent(th, star.q, 2.0)));
    }
    // Same check on the clients who accept in simulated rounds.
    experiment::ExperimentConfig cfg;
    cfg.n_clients = 20;
    cfg.k_values = {5};
    cfg.data.base_samples = 40;
    const auto scenario = experiment::build_scenario(cfg, 1);
    for (auto regime : {mechanism::Regime::Complete, mechanism::Regime::Incomplete}) {
      std::vector<auction::RoundReport> reps;
      cfg.rounds = 2;
      experiment::run_mechanism(cfg, scenario, 5, regime, 1, experiment::LedgerMode::Chained, std::nullopt, &reps);
      for (const auto& r : reps) {
        for (auction::ClientId id : r.accepted) {
          const auto th = scenario.clients[id].theta;
          const double u = mechanism::client_utility(r.contracts.at(id), th, 2.0);
          if (regime == mechanism::Regime::Complete) {
            worst_ci = std::max(worst_ci, std::abs(u));
          } else {
            worst_rent = std::max(worst_rent, std::abs(u - mechanism::information_rent(th, r.contracts.at(id).q, 2.0)));
          }
        }
      }
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "max |U_complete| = %.3g, max |U_incomplete - rent| = %.3g", worst_ci, worst_rent);
    return Outcome{worst_ci <= kClosedFormTol && worst_rent <= kRentTol, buf};
  });

  report("C5", "regime gap", [] {
    const auto pc = reference_point(mechanism::Regime::Complete);
    const auto pi = reference_point(mechanism::Regime::Incomplete);
    double min_gap = std::numeric_limits<double>::infinity(), top_gap = 0.0;
    for (double t : grid(1001)) {
      const mechanism::Efficiency th(t);
      const double gap = mechanism::server_utility_per_client(mechanism::solve_complete(th, pc), pc) -
                         mechanism::server_utility_per_client(mechanism::solve_incomplete(th, pi), pi);
      min_gap = std::min(min_gap, gap);
      if (t == 1.0) top_gap = gap;
    }
    char buf[120];
    std::snprintf(buf, sizeof buf, "min gap = %.3g, gap at theta=1 = %.3g", min_gap, top_gap);
    return Outcome{min_gap >= 0.0 && std::abs(top_gap) <= kGapTol, buf};
  });

  report("C6", "Banzhaf estimator against exact enumeration", [] {
    const auto start = Clock::now();
    constexpr std::size_t n = 8;
    std::mt19937_64 rng(20240601);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    int within = 0;
    double worst_z = 0.0;
    bool additive_exact = true;
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> table(1 << n);
      for (double& x : table) x = unit(rng);
      table[0] = 0.0;
      const auto u = reputation::CoalitionUtility::general([&table](reputation::Coalition s) { return table[s.bits()]; });
      const auto player = static_cast<reputation::ClientId>(trial % n);
      const double exact = reputation::banzhaf_exact(u, n, player);
      const auto est = reputation::banzhaf_mc(u, n, player, 10000, 7000 + static_cast<std::uint64_t>(trial));
      const double z = std::abs(est.value - exact) / est.std_error;
      worst_z = std::max(worst_z, z);
      if (z <= kSigmas) ++within;

      std::vector<double> v(n);
      for (double& x : v) x = unit(rng);
      const auto add = reputation::CoalitionUtility::additive(v);
      for (std::size_t i = 0; i < n; ++i) {
        additive_exact = additive_exact && reputation::banzhaf_exact(add, n, i) == v[i] &&
                         reputation::banzhaf_mc(add, n, i, 10000, 1).value == v[i];
      }
    }
    const double secs = seconds_since(start);
    char buf[160];
    std::snprintf(buf, sizeof buf, "%d/50 within %.0f SE (max z = %.2f), additive exact: %s", within, kSigmas, worst_z,
                  additive_exact ? "yes" : "no");
    return Outcome{within == 50 && additive_exact && secs < kC6Seconds, buf};
  });

  report("C7", "utility ordering (FedAvg)", [] { return check_ordering(ordering_config(flsim::Algorithm::FedAvg), kC7Seconds); });

  report("C8", "poisoning detection", [] {
    const auto start = Clock::now();
    experiment::ExperimentConfig cfg;
    cfg.n_clients = 20;
    cfg.k_values = {5};
    cfg.rounds = 10;
    cfg.lambda = 35.0;
    cfg.poison_count = 3;
    cfg.flip_rate = 0.8;
    bool ok = true;
    std::ostringstream d;
    for (auto regime : {mechanism::Regime::Complete, mechanism::Regime::Incomplete}) {
      int separated = 0;
      for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto scenario = experiment::build_scenario(cfg, seed);
        std::vector<auction::RoundReport> reps;
        experiment::run_mechanism(cfg, scenario, 5, regime, seed, experiment::LedgerMode::Chained, std::nullopt, &reps);
        double max_poison = -std::numeric_limits<double>::infinity();
        double min_honest = std::numeric_limits<double>::infinity();
        for (const auto& [id, eps] : reps.back().epsilon) {
          if (scenario.clients[id].behavior == auction::Behavior::Poisoner) {
            max_poison = std::max(max_poison, eps);
          } else {
            min_honest = std::min(min_honest, eps);
          }
        }
        if (max_poison < min_honest) ++separated;
      }
      ok = ok && separated >= 18;
      d << mechanism::to_string(regime) << " " << separated << "/20; ";
    }
    const double secs = seconds_since(start);
    d << fmt("run %.1fs", secs);
    return Outcome{ok && secs < kC8Seconds, d.str()};
  });

  report("C9", "ordering under FedAvg, FedProx and Scaffold", [] {
    bool ok = true;
    std::ostringstream d;
    for (auto algo : {flsim::Algorithm::FedAvg, flsim::Algorithm::FedProx, flsim::Algorithm::Scaffold}) {
      const Outcome o = check_ordering(ordering_config(algo), kC7Seconds);
      ok = ok && o.pass;
      d << flsim::to_string(algo) << (o.pass ? " ok" : " FAILED") << " [" << o.detail << "] ";
    }
    return Outcome{ok, d.str()};
  });

  report("C10", "ledger robustness", [] {
    experiment::ExperimentConfig cfg;
    cfg.n_clients = 40;
    cfg.k_values = {10};
    cfg.rounds = 10;
    cfg.seeds = seeds_1_to(20);
    cfg.lambda = 35.0;
    cfg.regimes = {mechanism::Regime::Complete};
    cfg.baselines = false;
    cfg.poison_count = 4;
    cfg.tamper_alpha = {0.1, 0.3};
    cfg.tamper_beta = {1.5, 3.0};
    const auto rows = experiment::run_robustness(cfg);
    bool ok = rows.size() == 8;
    std::ostringstream d;
    for (std::size_t j = 0; j + 1 < rows.size(); j += 2) {
      const auto& chained = rows[j];
      const auto& plain = rows[j + 1];
      const bool cell = chained.mode == experiment::LedgerMode::Chained &&
                        plain.mode == experiment::LedgerMode::Vulnerable && chained.mean_utility >= plain.mean_utility;
      ok = ok && cell;
      char buf[120];
      std::snprintf(buf, sizeof buf, "(%.1f,%.1f) %.1f vs %.1f%s; ", chained.alpha, chained.beta,
                    chained.mean_utility, plain.mean_utility, cell ? "" : " VIOLATED");
      d << buf;
    }

    ledger::HashChainLedger chain;
    for (std::uint64_t i = 0; i < 200; ++i) chain.append(i / 20, i % 20, 0.001 * static_cast<double>(i), std::sin(i));
    const auto pristine = chain.to_bytes();
    std::mt19937_64 rng(10);
    std::uniform_int_distribution<std::size_t> record(0, 199), offset(0, ledger::kStoredRecordSize - 1);
    std::uniform_int_distribution<int> flip(1, 255);
    int detected = 0;
    for (int t = 0; t < 1000; ++t) {
      auto bytes = pristine;
      const std::size_t idx = record(rng);
      bytes[idx * (4 + ledger::kStoredRecordSize) + 4 + offset(rng)] ^= static_cast<std::uint8_t>(flip(rng));
      const auto bad = ledger::HashChainLedger::from_bytes(bytes).verify_chain();
      if (bad && *bad <= idx) ++detected;
    }
    ok = ok && detected == 1000;
    d << "mutations detected " << detected << "/1000";
    return Outcome{ok, d.str()};
  });

  report("C11", "end-to-end determinism", [] {
    const auto root = std::filesystem::temp_directory_path() / "afl_acceptance_c11";
    std::filesystem::remove_all(root);
    experiment::ExperimentConfig cfg;
    cfg.n_clients = 12;
    cfg.k_values = {3, 5};
    cfg.rounds = 4;
    cfg.seeds = {1, 2, 3};
    cfg.lambda = 35.0;
    cfg.poison_count = 2;
    cfg.tamper_alpha = {0.3};
    cfg.tamper_beta = {2.0};
    std::vector<std::string> contents[2];
    const char* files[] = {"rounds.csv", "summary.csv", "reputation.csv", "robustness.csv", "ledger.bin", "ledger.jsonl"};
    for (int run = 0; run < 2; ++run) {
      cfg.output_dir = (root / ("run" + std::to_string(run))).string();
      std::ostringstream out, err;
      if (cli::cmd_run(cfg, out, err) != cli::kOk) return Outcome{false, "run failed: " + err.str()};
      for (const char* f : files) {
        std::ifstream in(std::filesystem::path(cfg.output_dir) / f, std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        contents[run].push_back(s.str());
      }
    }
    std::filesystem::remove_all(root);
    const bool same = contents[0] == contents[1];
    std::size_t bytes = 0;
    for (const auto& s : contents[0]) bytes += s.size();
    return Outcome{same && bytes > 0, std::to_string(std::size(files)) + " files, " + std::to_string(bytes) +
                                          " bytes, identical: " + (same ? "yes" : "no")};
  });

  std::printf("%d criteria failed\n", failures);
  return failures;
}

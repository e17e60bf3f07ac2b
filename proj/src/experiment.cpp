#include "afl/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>

#include "afl/seeding.hpp"

namespace afl::experiment {

namespace {

enum StreamTag : std::uint64_t { kThetas = 1, kPoisoners, kData, kPoisonLabels, kBaseline, kTamper, kRound };

double sample_std(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double mean_of(const std::vector<double>& xs) {
  double m = 0.0;
  std::size_t n = 0;
  for (double x : xs) m += (x - m) / static_cast<double>(++n);
  return m;
}

std::unique_ptr<ledger::ReputationStore> make_store(LedgerMode mode) {
  if (mode == LedgerMode::Chained) return std::make_unique<ledger::HashChainLedger>();
  return std::make_unique<ledger::PlainStore>();
}

}  // namespace

std::string_view to_string(LedgerMode mode) { return mode == LedgerMode::Chained ? "chained" : "vulnerable"; }

LedgerMode parse_ledger_mode(std::string_view text) {
  if (text == "chained") return LedgerMode::Chained;
  if (text == "vulnerable") return LedgerMode::Vulnerable;
  throw std::invalid_argument("unknown ledger mode '" + std::string(text) + "' (expected chained or vulnerable)");
}

void ExperimentConfig::validate() const {
  if (n_clients < 1) throw std::invalid_argument("invariant violated: n_clients >= 1");
  if (k_values.empty()) throw std::invalid_argument("invariant violated: at least one k_select value");
  for (std::size_t k : k_values) {
    if (k < 1) throw std::invalid_argument("invariant violated: k_select >= 1");
    if (k > n_clients) throw std::invalid_argument("invariant violated: k_select <= n_clients");
  }
  if (seeds.empty()) throw std::invalid_argument("invariant violated: at least one seed");
  if (regimes.empty() && !baselines) throw std::invalid_argument("invariant violated: at least one mechanism");
  market(k_values.front(), mechanism::Regime::Complete).validate();
  if (!(theta_min >= 0.0 && theta_min <= theta_max && theta_max <= 1.0)) {
    throw std::invalid_argument("invariant violated: 0 <= theta_min <= theta_max <= 1");
  }
  if (!(margin_min >= 1.0 && margin_min <= margin_max)) {
    throw std::invalid_argument("invariant violated: 1 <= margin_min <= margin_max");
  }
  if (data.dim < 1 || data.base_samples < 1 || data.test_samples < 1) {
    throw std::invalid_argument("invariant violated: dim, base_samples and test_samples >= 1");
  }
  if (local_epochs > 100000) throw std::invalid_argument("invariant violated: local_epochs <= 100000");
  aggregation().validate();
  reputation().validate();
  if (poison_count > n_clients) throw std::invalid_argument("invariant violated: poison_count <= n_clients");
  if (!(flip_rate >= 0.0 && flip_rate <= 1.0)) throw std::invalid_argument("invariant violated: 0 <= flip_rate <= 1");
  if (tamper_alpha.empty() != tamper_beta.empty()) {
    throw std::invalid_argument("invariant violated: tamper_alpha and tamper_beta are both set or both empty");
  }
  for (double a : tamper_alpha) ledger::TamperConfig{a, 1.0, 0}.validate();
  for (double b : tamper_beta) ledger::TamperConfig{0.0, b, 0}.validate();
  if (coalition == reputation::CoalitionMode::Retrain && n_clients > 10) {
    throw std::invalid_argument("invariant violated: n_clients <= 10 with retrain contributions");
  }
  if (output_dir.empty()) throw std::invalid_argument("invariant violated: output_dir is not empty");
}

mechanism::MarketParams ExperimentConfig::market(std::size_t k, mechanism::Regime regime) const {
  return {lambda, delta, n_clients, k, regime};
}

flsim::AggregationConfig ExperimentConfig::aggregation() const {
  flsim::AggregationConfig agg;
  agg.algo = algo;
  agg.local_epochs = static_cast<int>(local_epochs);
  agg.learning_rate = learning_rate;
  agg.prox_mu = prox_mu;
  return agg;
}

Scenario build_scenario(const ExperimentConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 theta_rng(derive_seed(seed, {kThetas}));
  std::uniform_real_distribution<double> theta_dist(cfg.theta_min, cfg.theta_max);
  std::vector<double> thetas(cfg.n_clients);
  for (double& t : thetas) t = cfg.theta_max > cfg.theta_min ? theta_dist(theta_rng) : cfg.theta_min;

  std::vector<std::size_t> order(cfg.n_clients);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 pick_rng(derive_seed(seed, {kPoisoners}));
  for (std::size_t j = 0; j < cfg.poison_count && j + 1 < order.size(); ++j) {
    std::uniform_int_distribution<std::size_t> pick(j, order.size() - 1);
    std::swap(order[j], order[pick(pick_rng)]);
  }
  std::vector<bool> poisoner(cfg.n_clients, false);
  for (std::size_t j = 0; j < cfg.poison_count; ++j) poisoner[order[j]] = true;

  flsim::Population pop = flsim::generate_population(cfg.n_clients, thetas, derive_seed(seed, {kData}), cfg.data);
  Scenario s;
  s.test = std::move(pop.test);
  s.clients.reserve(cfg.n_clients);
  for (std::size_t i = 0; i < cfg.n_clients; ++i) {
    auction::ClientProfile c;
    c.id = i;
    c.theta = mechanism::Efficiency(thetas[i]);
    if (poisoner[i]) {
      c.behavior = auction::Behavior::Poisoner;
      c.poison = {cfg.flip_rate, {i}};
      c.data = flsim::poison(pop.clients[i], c.poison, derive_seed(seed, {kPoisonLabels, i}));
    } else {
      c.data = std::move(pop.clients[i]);
    }
    s.clients.push_back(std::move(c));
  }
  return s;
}

double run_mechanism(const ExperimentConfig& cfg, const Scenario& scenario, std::size_t k,
                     mechanism::Regime regime, std::uint64_t seed, LedgerMode mode,
                     std::optional<ledger::TamperConfig> attack, std::vector<auction::RoundReport>* reports) {
  return run_mechanism(cfg, scenario, k, regime, seed, mode, attack, reports, nullptr);
}

double run_mechanism(const ExperimentConfig& cfg, const Scenario& scenario, std::size_t k,
                     mechanism::Regime regime, std::uint64_t seed, LedgerMode mode,
                     std::optional<ledger::TamperConfig> attack, std::vector<auction::RoundReport>* reports,
                     std::optional<ledger::HashChainLedger>* chain_out) {
  auction::RoundOptions options{cfg.reputation(), cfg.coalition, cfg.tamper_policy, derive_seed(seed, {kRound})};
  auction::AuctionSimulator sim(scenario.clients, scenario.test, cfg.market(k, regime), cfg.aggregation(),
                                make_store(mode), options);
  sim.set_tamper(attack);
  double total = 0.0;
  for (std::size_t r = 0; r < cfg.rounds; ++r) {
    auction::RoundReport rep = sim.run_round();
    total += rep.server_utility;
    if (reports) reports->push_back(std::move(rep));
  }
  if (chain_out) {
    if (const auto* chain = dynamic_cast<const ledger::HashChainLedger*>(&sim.store())) *chain_out = *chain;
  }
  return total;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult result;
  if (cfg.rounds == 0) return result;

  std::vector<auction::Mechanism> mechanisms;
  for (mechanism::Regime r : cfg.regimes) {
    mechanisms.push_back(r == mechanism::Regime::Complete ? auction::Mechanism::OursComplete
                                                          : auction::Mechanism::OursIncomplete);
  }
  if (cfg.baselines) {
    mechanisms.push_back(auction::Mechanism::PriceFirst);
    mechanisms.push_back(auction::Mechanism::Randomized);
  }

  std::vector<Scenario> scenarios;
  scenarios.reserve(cfg.seeds.size());
  for (std::uint64_t seed : cfg.seeds) scenarios.push_back(build_scenario(cfg, seed));

  for (std::size_t k : cfg.k_values) {
    for (auction::Mechanism m : mechanisms) {
      std::vector<double> totals;
      for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
        const std::uint64_t seed = cfg.seeds[s];
        std::vector<auction::RoundReport> reps;
        double total = 0.0;
        if (m == auction::Mechanism::OursComplete || m == auction::Mechanism::OursIncomplete) {
          const auto regime = m == auction::Mechanism::OursComplete ? mechanism::Regime::Complete
                                                                    : mechanism::Regime::Incomplete;
          const bool trajectory = s == 0 && k == cfg.k_values.front() && regime == cfg.regimes.front();
          total = run_mechanism(cfg, scenarios[s], k, regime, seed, cfg.ledger_mode, std::nullopt, &reps,
                                trajectory ? &result.ledger : nullptr);
          if (trajectory) {
            for (const auction::RoundReport& rep : reps) {
              for (const auto& [id, eps] : rep.epsilon) {
                result.trajectories.push_back({rep.round, id, eps, scenarios[s].clients[id].behavior});
              }
            }
          }
        } else {
          auction::BaselineSimulator sim(m, scenarios[s].clients, scenarios[s].test,
                                         cfg.market(k, mechanism::Regime::Complete), cfg.aggregation(),
                                         cfg.margin_min, cfg.margin_max, derive_seed(seed, {kBaseline}));
          for (std::size_t r = 0; r < cfg.rounds; ++r) {
            auction::RoundReport rep = sim.run_round();
            total += rep.server_utility;
            reps.push_back(std::move(rep));
          }
        }
        totals.push_back(total);
        for (auto& rep : reps) result.reports.push_back({m, k, seed, std::move(rep)});
      }
      const double mean = mean_of(totals);
      result.summary.push_back({m, k, mean, sample_std(totals, mean)});
    }
  }

  result.robustness = run_robustness(cfg);
  return result;
}

std::vector<RobustnessRow> run_robustness(const ExperimentConfig& cfg) {
  std::vector<RobustnessRow> rows;
  if (cfg.tamper_alpha.empty() || cfg.rounds == 0) return rows;
  const std::size_t k = cfg.k_values.front();
  const mechanism::Regime regime = cfg.regimes.empty() ? mechanism::Regime::Complete : cfg.regimes.front();

  std::vector<Scenario> scenarios;
  for (std::uint64_t seed : cfg.seeds) scenarios.push_back(build_scenario(cfg, seed));

  for (double alpha : cfg.tamper_alpha) {
    for (double beta : cfg.tamper_beta) {
      for (LedgerMode mode : {LedgerMode::Chained, LedgerMode::Vulnerable}) {
        std::vector<double> totals;
        for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
          // Same attacker (same victims) for both store kinds.
          const ledger::TamperConfig attack{alpha, beta, derive_seed(cfg.seeds[s], {kTamper})};
          totals.push_back(run_mechanism(cfg, scenarios[s], k, regime, cfg.seeds[s], mode, attack));
        }
        rows.push_back({alpha, beta, mode, mean_of(totals)});
      }
    }
  }
  return rows;
}

}  // namespace afl::experiment

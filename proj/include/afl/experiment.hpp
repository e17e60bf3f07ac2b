#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "afl/auction.hpp"
#include "afl/flsim.hpp"
#include "afl/ledger.hpp"
#include "afl/mechanism.hpp"
#include "afl/reputation.hpp"

namespace afl::experiment {

enum class LedgerMode { Chained, Vulnerable };

std::string_view to_string(LedgerMode mode);
LedgerMode parse_ledger_mode(std::string_view text);

struct ExperimentConfig {
  std::size_t n_clients = 20;
  std::vector<std::size_t> k_values{5};
  std::size_t rounds = 10;
  std::vector<std::uint64_t> seeds{1};

  double lambda = 1.0;
  double delta = 2.0;
  std::vector<mechanism::Regime> regimes{mechanism::Regime::Complete, mechanism::Regime::Incomplete};
  bool baselines = true;
  double theta_min = 0.0;
  double theta_max = 1.0;
  double margin_min = 1.0;  // baseline bid = cost * U[margin_min, margin_max]
  double margin_max = 1.3;
  flsim::GenerationOptions data;

  flsim::Algorithm algo = flsim::Algorithm::FedAvg;
  std::size_t local_epochs = 10;
  double learning_rate = 0.5;
  double prox_mu = 0.0;

  double w1 = 0.5;
  double w2 = 0.5;
  reputation::CoalitionMode coalition = reputation::CoalitionMode::Additive;

  std::size_t poison_count = 0;
  double flip_rate = 0.8;

  std::vector<double> tamper_alpha;
  std::vector<double> tamper_beta;
  LedgerMode ledger_mode = LedgerMode::Chained;
  auction::TamperPolicy tamper_policy = auction::TamperPolicy::RejectToZero;

  std::string output_dir = "results";

  /// Throws std::invalid_argument naming the violated invariant.
  void validate() const;

  mechanism::MarketParams market(std::size_t k, mechanism::Regime regime) const;
  flsim::AggregationConfig aggregation() const;
  reputation::ReputationParams reputation() const { return {w1, w2}; }
};

/// Clients and test set shared by every mechanism for one seed.
struct Scenario {
  std::vector<auction::ClientProfile> clients;
  flsim::SyntheticDataset test;
};

/// theta_i ~ U[theta_min, theta_max]; poison_count clients chosen uniformly
/// train on label-flipped data. Deterministic in `seed`.
Scenario build_scenario(const ExperimentConfig& cfg, std::uint64_t seed);

struct TaggedReport {
  auction::Mechanism mechanism;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  auction::RoundReport report;
};

/// Mean and sample standard deviation over seeds of the total server
/// utility summed across rounds.
struct SummaryRow {
  auction::Mechanism mechanism;
  std::size_t k = 0;
  double mean_utility = 0.0;
  double std_utility = 0.0;
};

struct TrajectoryPoint {
  std::size_t round = 0;
  auction::ClientId client = 0;
  double epsilon = 0.0;
  auction::Behavior behavior = auction::Behavior::Honest;
};

struct RobustnessRow {
  double alpha = 0.0;
  double beta = 0.0;
  LedgerMode mode = LedgerMode::Chained;
  double mean_utility = 0.0;
};

struct ExperimentResult {
  std::vector<TaggedReport> reports;
  std::vector<SummaryRow> summary;
  std::vector<TrajectoryPoint> trajectories;  // first seed, first k, first regime
  std::vector<RobustnessRow> robustness;
  std::optional<ledger::HashChainLedger> ledger;  // chain of the trajectory run
};

/// Total server utility of one mechanism run over cfg.rounds rounds.
/// `attack` is replayed before every round; `mode` picks the store.
double run_mechanism(const ExperimentConfig& cfg, const Scenario& scenario, std::size_t k,
                     mechanism::Regime regime, std::uint64_t seed, LedgerMode mode,
                     std::optional<ledger::TamperConfig> attack = std::nullopt,
                     std::vector<auction::RoundReport>* reports = nullptr);

/// As above; also copies the final chain into `chain_out` when the store is chained.
double run_mechanism(const ExperimentConfig& cfg, const Scenario& scenario, std::size_t k,
                     mechanism::Regime regime, std::uint64_t seed, LedgerMode mode,
                     std::optional<ledger::TamperConfig> attack, std::vector<auction::RoundReport>* reports,
                     std::optional<ledger::HashChainLedger>* chain_out);

/// Every requested mechanism for every k and seed, in that nesting order,
/// plus reputation trajectories and the tamper grid when configured.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// (alpha, beta, {chained, vulnerable}) grid under the first regime and k.
std::vector<RobustnessRow> run_robustness(const ExperimentConfig& cfg);

}  // namespace afl::experiment

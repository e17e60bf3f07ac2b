#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "afl/flsim.hpp"
#include "afl/ledger.hpp"
#include "afl/mechanism.hpp"
#include "afl/reputation.hpp"

// One auction round per federated-learning round: post contracts, let
// clients accept, select by ledger reputation, train, then score and record
// every participant. Also the two bid-based baselines used for comparison.
namespace afl::auction {

using ClientId = std::size_t;
using mechanism::Contract;
using mechanism::Efficiency;
using mechanism::MarketParams;
using mechanism::Regime;

enum class Behavior { Honest, Poisoner };

std::string_view to_string(Behavior behavior);

struct ClientProfile {
  ClientId id = 0;
  Efficiency theta{1.0};
  Behavior behavior = Behavior::Honest;
  flsim::PoisonConfig poison;    // only meaningful for poisoners
  flsim::SyntheticDataset data;  // what the client trains on (already poisoned for poisoners)
};

enum class Mechanism { OursComplete, OursIncomplete, PriceFirst, Randomized };

std::string_view to_string(Mechanism mechanism);

struct RoundReport {
  std::size_t round = 0;
  Mechanism mechanism = Mechanism::OursComplete;
  Regime regime = Regime::Complete;
  std::vector<ClientId> selected;
  std::map<ClientId, Contract> contracts;       // every offered contract
  std::map<ClientId, double> realized_q;        // test-accuracy gain of each trained client
  std::map<ClientId, double> payments;          // selected clients only
  double server_utility = 0.0;
  std::map<ClientId, double> client_utilities;  // selected clients only
  double accuracy_global = 0.0;

  std::vector<ClientId> accepted;
  std::map<ClientId, double> zeta;     // this round's contribution
  std::map<ClientId, double> epsilon;  // reputation after this round's update
  std::vector<ledger::Mutation> tampered;

  double total_payment() const;
};

struct Bid {
  ClientId client_id = 0;
  double price = 0.0;
};

/// How a client whose ledger history fails verification is ranked.
enum class TamperPolicy { RejectToZero, LastVerified };

std::string_view to_string(TamperPolicy policy);
TamperPolicy parse_tamper_policy(std::string_view text);

struct RoundOptions {
  reputation::ReputationParams reputation;
  reputation::CoalitionMode coalition = reputation::CoalitionMode::Additive;
  TamperPolicy tamper_policy = TamperPolicy::RejectToZero;
  std::uint64_t seed = 0;
};

/// Runs the posted-contract mechanism round after round over one population.
///
/// Every accepting client trains from the current global model so that its
/// realized contribution can be measured; only the top-k by reputation are
/// aggregated and paid. The contribution game is additive by default:
/// client i is worth lambda * q_i * (1 + gain_i) - R_i to the server, where
/// q_i is the contracted output and gain_i the measured accuracy gain.
class AuctionSimulator {
public:
  AuctionSimulator(std::vector<ClientProfile> population, flsim::SyntheticDataset test,
                   MarketParams params, flsim::AggregationConfig aggregation,
                   std::unique_ptr<ledger::ReputationStore> store, RoundOptions options = {});

  RoundReport run_round();

  /// When set, the attack is replayed against the store before every round
  /// that starts with a non-empty store.
  void set_tamper(std::optional<ledger::TamperConfig> attack) { attack_ = attack; }

  const std::vector<ClientProfile>& population() const { return population_; }
  const MarketParams& params() const { return params_; }
  const flsim::ModelParams& global_model() const { return global_; }
  const reputation::ReputationState& reputation() const { return state_; }
  const ledger::ReputationStore& store() const { return *store_; }
  ledger::ReputationStore& store() { return *store_; }
  std::size_t rounds_run() const { return round_; }

private:
  double effective_reputation(ClientId id) const;
  std::vector<double> contribution_values(const RoundReport& report,
                                          std::span<const flsim::LocalUpdate> updates) const;

  std::vector<ClientProfile> population_;
  flsim::SyntheticDataset test_;
  MarketParams params_;
  flsim::AggregationConfig aggregation_;
  std::unique_ptr<ledger::ReputationStore> store_;
  RoundOptions options_;
  std::optional<ledger::TamperConfig> attack_;

  flsim::ModelParams global_;
  reputation::ReputationState state_;
  std::size_t round_ = 0;
};

/// Median first-best output over the population; the common output every
/// baseline winner is contracted to deliver.
double baseline_target_output(std::span<const ClientProfile> population, const MarketParams& params);

/// bid_i = cost(target_q, theta_i, delta) * m_i with m_i ~ U[margin_lo, margin_hi].
std::vector<Bid> generate_bids(std::span<const ClientProfile> population, double target_q, double delta,
                               double margin_lo, double margin_hi, std::uint64_t seed);

/// The k cheapest bids win (ties by id) and are paid their bids.
RoundReport baseline_price_first(std::span<const ClientProfile> population, std::span<const Bid> bids,
                                 std::size_t k, double target_q, const MarketParams& params);

/// k winners drawn uniformly without replacement, paid their bids.
RoundReport baseline_randomized(std::span<const ClientProfile> population, std::span<const Bid> bids,
                                std::size_t k, double target_q, const MarketParams& params,
                                std::uint64_t seed);

/// Bid-based baseline over rounds, training the winners' models so the
/// global accuracy is comparable with the mechanism runs.
class BaselineSimulator {
public:
  BaselineSimulator(Mechanism mechanism, std::vector<ClientProfile> population,
                    flsim::SyntheticDataset test, MarketParams params,
                    flsim::AggregationConfig aggregation, double margin_lo, double margin_hi,
                    std::uint64_t seed);

  RoundReport run_round();

private:
  Mechanism mechanism_;
  std::vector<ClientProfile> population_;
  flsim::SyntheticDataset test_;
  MarketParams params_;
  flsim::AggregationConfig aggregation_;
  double margin_lo_;
  double margin_hi_;
  std::uint64_t seed_;
  double target_q_;
  flsim::ModelParams global_;
  std::size_t round_ = 0;
};

}  // namespace afl::auction

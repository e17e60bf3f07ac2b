#include "afl/auction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include "afl/seeding.hpp"

namespace afl::auction {

namespace {

constexpr std::size_t kMaxRetrainPlayers = 10;

void check_population(std::span<const ClientProfile> population) {
  if (population.empty()) throw std::invalid_argument("population is empty");
  for (std::size_t i = 0; i < population.size(); ++i) {
    if (population[i].id != i) {
      throw std::invalid_argument("client ids must equal their position in the population");
    }
  }
}

const ClientProfile& find_client(std::span<const ClientProfile> population, ClientId id) {
  if (id >= population.size() || population[id].id != id) {
    throw std::out_of_range("no client with id " + std::to_string(id));
  }
  return population[id];
}

void check_bids(std::span<const ClientProfile> population, std::span<const Bid> bids, std::size_t k) {
  if (k > bids.size()) {
    throw std::invalid_argument("baseline: k = " + std::to_string(k) + " exceeds bid count " +
                                std::to_string(bids.size()));
  }
  std::vector<bool> seen(population.size(), false);
  for (const Bid& b : bids) {
    find_client(population, b.client_id);
    if (!(b.price >= 0.0)) throw std::invalid_argument("baseline: bid prices must be nonnegative");
    seen[b.client_id] = true;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw std::invalid_argument("baseline: every client must submit a bid");
  }
}

RoundReport settle_bids(std::span<const ClientProfile> population, std::vector<Bid> winners, double target_q,
                        const MarketParams& params, Mechanism mechanism) {
  RoundReport report;
  report.mechanism = mechanism;
  for (const Bid& b : winners) {
    const ClientProfile& c = find_client(population, b.client_id);
    report.selected.push_back(b.client_id);
    report.contracts[b.client_id] = {target_q, b.price};
    report.payments[b.client_id] = b.price;
    report.client_utilities[b.client_id] = mechanism::client_utility({target_q, b.price}, c.theta, params.delta);
    report.server_utility += mechanism::server_value(target_q, params.lambda) - b.price;
  }
  return report;
}

flsim::AggregationConfig prepare_aggregation(flsim::AggregationConfig cfg, std::size_t n, std::size_t dim) {
  cfg.validate();
  if (cfg.algo == flsim::Algorithm::Scaffold && cfg.control.client.size() != n) {
    cfg.control = flsim::ControlVariates::zeros(n, dim);
  }
  return cfg;
}

}  // namespace

std::string_view to_string(Behavior behavior) {
  return behavior == Behavior::Honest ? "honest" : "poisoner";
}

std::string_view to_string(Mechanism mechanism) {
  switch (mechanism) {
    case Mechanism::OursComplete:
      return "ours-complete";
    case Mechanism::OursIncomplete:
      return "ours-incomplete";
    case Mechanism::PriceFirst:
      return "price-first";
    case Mechanism::Randomized:
      return "randomized";
  }
  return "unknown";
}

std::string_view to_string(TamperPolicy policy) {
  return policy == TamperPolicy::RejectToZero ? "reject" : "last-verified";
}

TamperPolicy parse_tamper_policy(std::string_view text) {
  if (text == "reject") return TamperPolicy::RejectToZero;
  if (text == "last-verified") return TamperPolicy::LastVerified;
  throw std::invalid_argument("unknown tamper policy '" + std::string(text) +
                              "' (expected reject or last-verified)");
}

double RoundReport::total_payment() const {
  double total = 0.0;
  for (const auto& [_, p] : payments) total += p;
  return total;
}

// ---- AuctionSimulator --------------------------------------------------------

AuctionSimulator::AuctionSimulator(std::vector<ClientProfile> population, flsim::SyntheticDataset test,
                                   MarketParams params, flsim::AggregationConfig aggregation,
                                   std::unique_ptr<ledger::ReputationStore> store, RoundOptions options)
    : population_(std::move(population)),
      test_(std::move(test)),
      params_(params),
      store_(std::move(store)),
      options_(options) {
  check_population(population_);
  params_.validate();
  options_.reputation.validate();
  if (!store_) throw std::invalid_argument("AuctionSimulator needs a reputation store");
  if (test_.rows() == 0) throw std::invalid_argument("AuctionSimulator needs a non-empty test set");
  aggregation_ = prepare_aggregation(std::move(aggregation), population_.size(), test_.dim());
  global_ = flsim::ModelParams::zeros(test_.dim());
  for (const ClientProfile& c : population_) state_.enroll(c.id);
}

double AuctionSimulator::effective_reputation(ClientId id) const {
  if (!store_->contains(id)) return 0.0;
  const ledger::Reading reading = store_->read_reputation(id);
  if (reading.trusted) return reading.epsilon;
  if (options_.tamper_policy == TamperPolicy::LastVerified) {
    if (const auto* chain = dynamic_cast<const ledger::HashChainLedger*>(store_.get())) {
      return chain->last_verified(id).value_or(0.0);
    }
  }
  return 0.0;
}

std::vector<double> AuctionSimulator::contribution_values(const RoundReport& report,
                                                          std::span<const flsim::LocalUpdate> updates) const {
  const std::size_t n = updates.size();
  if (options_.coalition == reputation::CoalitionMode::Additive) {
    std::vector<double> values;
    values.reserve(n);
    for (const flsim::LocalUpdate& u : updates) {
      const Contract& c = report.contracts.at(u.client);
      const double delivered = c.q * (1.0 + report.realized_q.at(u.client));
      values.push_back(mechanism::server_value(delivered, params_.lambda) - c.r);
    }
    return reputation::banzhaf_indices(reputation::CoalitionUtility::additive(std::move(values)), n);
  }

  if (n > kMaxRetrainPlayers) {
    throw std::length_error("retrain contribution mode supports at most " + std::to_string(kMaxRetrainPlayers) +
                            " participants, got " + std::to_string(n));
  }
  const double base = flsim::evaluate_accuracy(global_, test_);
  auto cache = std::make_shared<std::vector<double>>(std::size_t{1} << n, std::numeric_limits<double>::quiet_NaN());
  auto evaluator = [this, updates, base, cache](reputation::Coalition s) {
    double& slot = (*cache)[s.bits()];
    if (std::isnan(slot)) {
      if (s.empty()) {
        slot = 0.0;
      } else {
        std::vector<flsim::ModelParams> models;
        std::vector<std::size_t> counts;
        for (reputation::ClientId j : s.members()) {
          models.push_back(updates[j].model);
          counts.push_back(updates[j].samples);
        }
        slot = flsim::evaluate_accuracy(flsim::aggregate(models, counts), test_) - base;
      }
    }
    return slot;
  };
  return reputation::banzhaf_indices(reputation::CoalitionUtility::general(evaluator), n);
}

RoundReport AuctionSimulator::run_round() {
  ++round_;
  RoundReport report;
  report.round = round_;
  report.regime = params_.regime;
  report.mechanism = params_.regime == Regime::Complete ? Mechanism::OursComplete : Mechanism::OursIncomplete;

  if (attack_ && !store_->empty()) report.tampered = ledger::tamper_attack(*store_, *attack_);

  // Post contracts; a client participates iff its utility is nonnegative.
  for (const ClientProfile& c : population_) {
    const Contract contract = mechanism::solve(c.theta, params_);
    report.contracts[c.id] = contract;
    if (mechanism::client_utility(contract, c.theta, params_.delta) >= 0.0) report.accepted.push_back(c.id);
  }
  if (report.accepted.empty()) throw std::runtime_error("round " + std::to_string(round_) + ": no client accepted");

  // Rank accepted clients by the reputation the store vouches for.
  std::map<ClientId, double> prior;
  reputation::ReputationState ranking;
  for (ClientId id : report.accepted) {
    prior[id] = effective_reputation(id);
    ranking.record(id, 0.0, prior[id], round_);
  }
  report.selected = reputation::select_top_k(ranking, std::min(params_.k_select, report.accepted.size()));

  // Every participant trains from the current global model; only the
  // selected updates are aggregated.
  std::vector<flsim::LocalUpdate> updates;
  updates.reserve(report.accepted.size());
  for (ClientId id : report.accepted) {
    updates.push_back(flsim::local_train(global_, population_[id].data, aggregation_));
  }
  std::vector<flsim::LocalUpdate> chosen;
  for (const flsim::LocalUpdate& u : updates) {
    if (std::find(report.selected.begin(), report.selected.end(), u.client) != report.selected.end()) {
      chosen.push_back(u);
    }
  }

  for (const flsim::LocalUpdate& u : updates) {
    report.realized_q[u.client] = flsim::realized_contribution(global_, u.model, test_);
  }
  const std::vector<double> zeta = contribution_values(report, updates);
  global_ = flsim::aggregate(chosen, aggregation_);

  for (std::size_t j = 0; j < updates.size(); ++j) {
    const ClientId id = updates[j].client;
    const double eps = reputation::update_reputation(prior[id], zeta[j], options_.reputation);
    store_->append(round_, id, zeta[j], eps);
    state_.record(id, zeta[j], eps, round_);
    report.zeta[id] = zeta[j];
    report.epsilon[id] = eps;
  }

  for (ClientId id : report.selected) {
    const Contract& c = report.contracts[id];
    report.payments[id] = c.r;
    report.client_utilities[id] = mechanism::client_utility(c, population_[id].theta, params_.delta);
    report.server_utility += mechanism::server_utility_per_client(c, params_);
  }
  report.accuracy_global = flsim::evaluate_accuracy(global_, test_);
  return report;
}

// ---- baselines -----------------------------------------------------------------

double baseline_target_output(std::span<const ClientProfile> population, const MarketParams& params) {
  if (population.empty()) throw std::invalid_argument("population is empty");
  std::vector<double> q;
  q.reserve(population.size());
  for (const ClientProfile& c : population) q.push_back(mechanism::solve_complete(c.theta, params).q);
  std::sort(q.begin(), q.end());
  const std::size_t m = q.size() / 2;
  return q.size() % 2 == 1 ? q[m] : 0.5 * (q[m - 1] + q[m]);
}

std::vector<Bid> generate_bids(std::span<const ClientProfile> population, double target_q, double delta,
                               double margin_lo, double margin_hi, std::uint64_t seed) {
  if (!(margin_lo >= 1.0 && margin_hi >= margin_lo)) {
    throw std::invalid_argument("bid margins must satisfy 1 <= margin_lo <= margin_hi");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> margin(margin_lo, margin_hi);
  std::vector<Bid> bids;
  bids.reserve(population.size());
  for (const ClientProfile& c : population) {
    const double m = margin_hi > margin_lo ? margin(rng) : margin_lo;
    bids.push_back({c.id, mechanism::cost(target_q, c.theta, delta) * m});
  }
  return bids;
}

RoundReport baseline_price_first(std::span<const ClientProfile> population, std::span<const Bid> bids,
                                 std::size_t k, double target_q, const MarketParams& params) {
  check_bids(population, bids, k);
  std::vector<Bid> ranked(bids.begin(), bids.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const Bid& a, const Bid& b) {
    if (a.price != b.price) return a.price < b.price;
    return a.client_id < b.client_id;
  });
  ranked.resize(k);
  return settle_bids(population, std::move(ranked), target_q, params, Mechanism::PriceFirst);
}

RoundReport baseline_randomized(std::span<const ClientProfile> population, std::span<const Bid> bids,
                                std::size_t k, double target_q, const MarketParams& params, std::uint64_t seed) {
  check_bids(population, bids, k);
  std::vector<Bid> pool(bids.begin(), bids.end());
  std::sort(pool.begin(), pool.end(), [](const Bid& a, const Bid& b) { return a.client_id < b.client_id; });
  std::mt19937_64 rng(seed);
  for (std::size_t j = 0; j < k && j + 1 < pool.size(); ++j) {
    std::uniform_int_distribution<std::size_t> pick(j, pool.size() - 1);
    std::swap(pool[j], pool[pick(rng)]);
  }
  pool.resize(k);
  return settle_bids(population, std::move(pool), target_q, params, Mechanism::Randomized);
}

BaselineSimulator::BaselineSimulator(Mechanism mechanism, std::vector<ClientProfile> population,
                                     flsim::SyntheticDataset test, MarketParams params,
                                     flsim::AggregationConfig aggregation, double margin_lo, double margin_hi,
                                     std::uint64_t seed)
    : mechanism_(mechanism),
      population_(std::move(population)),
      test_(std::move(test)),
      params_(params),
      margin_lo_(margin_lo),
      margin_hi_(margin_hi),
      seed_(seed) {
  if (mechanism_ != Mechanism::PriceFirst && mechanism_ != Mechanism::Randomized) {
    throw std::invalid_argument("BaselineSimulator runs price-first or randomized only");
  }
  check_population(population_);
  params_.validate();
  aggregation_ = prepare_aggregation(std::move(aggregation), population_.size(), test_.dim());
  target_q_ = baseline_target_output(population_, params_);
  global_ = flsim::ModelParams::zeros(test_.dim());
}

RoundReport BaselineSimulator::run_round() {
  ++round_;
  const auto bids = generate_bids(population_, target_q_, params_.delta, margin_lo_, margin_hi_,
                                  derive_seed(seed_, {round_, 1}));
  RoundReport report =
      mechanism_ == Mechanism::PriceFirst
          ? baseline_price_first(population_, bids, params_.k_select, target_q_, params_)
          : baseline_randomized(population_, bids, params_.k_select, target_q_, params_, derive_seed(seed_, {round_, 2}));
  report.round = round_;

  std::vector<flsim::LocalUpdate> updates;
  for (ClientId id : report.selected) {
    updates.push_back(flsim::local_train(global_, population_[id].data, aggregation_));
    report.realized_q[id] = flsim::realized_contribution(global_, updates.back().model, test_);
  }
  global_ = flsim::aggregate(updates, aggregation_);
  report.accuracy_global = flsim::evaluate_accuracy(global_, test_);
  return report;
}

}  // namespace afl::auction

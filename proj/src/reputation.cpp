#include "afl/reputation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace afl::reputation {

namespace {

// Welford running mean and variance; a constant stream keeps its mean exact.
class RunningMoments {
public:
  void push(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  double mean() const { return mean_; }
  double sample_variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  std::size_t count() const { return n_; }

private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

void check_player(std::size_t n, ClientId i) {
  if (i >= n) throw std::out_of_range("player index " + std::to_string(i) + " not in game of size " + std::to_string(n));
}

}  // namespace

std::vector<ClientId> Coalition::members() const {
  std::vector<ClientId> out;
  for (std::uint64_t b = bits_; b != 0; b &= b - 1) {
    out.push_back(static_cast<ClientId>(std::countr_zero(b)));
  }
  return out;
}

CoalitionUtility CoalitionUtility::additive(std::vector<double> values) {
  if (values.size() > Coalition::kMaxPlayers) throw std::length_error("too many players");
  CoalitionUtility u;
  u.mode_ = CoalitionMode::Additive;
  u.values_ = std::move(values);
  return u;
}

CoalitionUtility CoalitionUtility::general(Evaluator evaluator, CoalitionMode mode) {
  if (!evaluator) throw std::invalid_argument("coalition utility needs an evaluator");
  CoalitionUtility u;
  u.mode_ = mode;
  u.evaluator_ = std::move(evaluator);
  return u;
}

double CoalitionUtility::operator()(Coalition s) const {
  if (evaluator_) return evaluator_(s);
  double total = 0.0;
  for (ClientId i : s.members()) {
    if (i >= values_.size()) throw std::out_of_range("coalition member without a value");
    total += values_[i];
  }
  return total;
}

double CoalitionUtility::marginal(Coalition s, ClientId i) const {
  if (!evaluator_) {
    if (i >= values_.size()) throw std::out_of_range("player without a value");
    return values_[i];
  }
  return evaluator_(s.with(i)) - evaluator_(s);
}

double banzhaf_exact(const CoalitionUtility& u, std::size_t n, ClientId i) {
  if (n > kMaxExactPlayers) {
    throw std::length_error("banzhaf_exact: n = " + std::to_string(n) + " exceeds the enumeration limit of " +
                            std::to_string(kMaxExactPlayers));
  }
  check_player(n, i);
  // Enumerate subsets of the n-1 other players and splice bit i out.
  const std::uint64_t low_mask = (std::uint64_t{1} << i) - 1;
  const std::uint64_t count = std::uint64_t{1} << (n - 1);
  RunningMoments acc;
  for (std::uint64_t packed = 0; packed < count; ++packed) {
    const std::uint64_t bits = (packed & low_mask) | ((packed & ~low_mask) << 1);
    acc.push(u.marginal(Coalition(bits), i));
  }
  return acc.mean();
}

std::vector<double> banzhaf_indices(const CoalitionUtility& u, std::size_t n) {
  if (u.mode() == CoalitionMode::Additive && u.additive_values().size() >= n) {
    const auto v = u.additive_values();
    return {v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n)};
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = banzhaf_exact(u, n, i);
  return out;
}

Coalition sample_coalition(std::uint64_t random_bits, std::size_t n, ClientId excluded) {
  const std::uint64_t players = n >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1;
  return Coalition(random_bits & players & ~(std::uint64_t{1} << excluded));
}

Estimate banzhaf_mc(const CoalitionUtility& u, std::size_t n, ClientId i, std::size_t samples,
                    std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("banzhaf_mc: samples must be at least 1");
  if (n > Coalition::kMaxPlayers) throw std::length_error("banzhaf_mc: at most 64 players");
  check_player(n, i);
  std::mt19937_64 rng(seed);
  RunningMoments acc;
  for (std::size_t s = 0; s < samples; ++s) {
    acc.push(u.marginal(sample_coalition(rng(), n, i), i));
  }
  return {acc.mean(), std::sqrt(acc.sample_variance() / static_cast<double>(samples)), samples};
}

void ReputationParams::validate() const {
  if (!(w1 >= 0.0 && w1 <= 1.0)) throw std::invalid_argument("invariant violated: 0 <= w1 <= 1");
  if (!(w2 >= 0.0 && w2 <= 1.0)) throw std::invalid_argument("invariant violated: 0 <= w2 <= 1");
  if (std::abs(w1 + w2 - 1.0) > 1e-9) throw std::invalid_argument("invariant violated: w1 + w2 = 1");
}

double update_reputation(double prev_epsilon, double zeta, const ReputationParams& params) {
  return prev_epsilon * params.w1 + zeta * params.w2;
}

void ReputationState::enroll(ClientId id) { entries_.try_emplace(id); }

void ReputationState::record(ClientId id, double zeta, double epsilon, std::size_t round) {
  Entry& e = entries_[id];
  if (e.updated && round <= e.round) {
    throw std::invalid_argument("reputation round must strictly increase for client " + std::to_string(id));
  }
  e.epsilon = epsilon;
  e.zeta_last = zeta;
  e.round = round;
  e.updated = true;
}

const ReputationState::Entry& ReputationState::at(ClientId id) const {
  auto it = entries_.find(id);
  if (it == entries_.end()) throw std::out_of_range("unknown client " + std::to_string(id));
  return it->second;
}

std::vector<ClientId> select_top_k(const ReputationState& state, std::size_t k) {
  if (k > state.size()) {
    throw std::invalid_argument("select_top_k: k = " + std::to_string(k) + " exceeds population of " +
                                std::to_string(state.size()));
  }
  std::vector<std::pair<double, ClientId>> ranked;
  ranked.reserve(state.size());
  for (const auto& [id, entry] : state.entries()) ranked.emplace_back(entry.epsilon, id);
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<ClientId> out;
  out.reserve(k);
  for (std::size_t j = 0; j < k; ++j) out.push_back(ranked[j].second);
  return out;
}

}  // namespace afl::reputation

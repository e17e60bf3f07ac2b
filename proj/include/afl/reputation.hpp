#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

// Banzhaf-index contribution measurement and recency-weighted reputation.
namespace afl::reputation {

using ClientId = std::size_t;

/// Subset of players 0..63 as a bit set.
class Coalition {
public:
  static constexpr std::size_t kMaxPlayers = 64;

  constexpr Coalition() = default;
  constexpr explicit Coalition(std::uint64_t bits) : bits_(bits) {}

  constexpr bool contains(ClientId i) const { return i < kMaxPlayers && ((bits_ >> i) & 1U) != 0; }
  constexpr Coalition with(ClientId i) const { return Coalition(bits_ | (std::uint64_t{1} << i)); }
  constexpr std::size_t size() const { return static_cast<std::size_t>(std::popcount(bits_)); }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr std::uint64_t bits() const { return bits_; }

  std::vector<ClientId> members() const;

  friend constexpr bool operator==(Coalition, Coalition) = default;

private:
  std::uint64_t bits_ = 0;
};

enum class CoalitionMode { Additive, Retrain };

/// Characteristic function of the contribution game.
///
/// Additive utilities carry their per-player values; their marginal
/// contribution is that value exactly, independent of the coalition.
class CoalitionUtility {
public:
  using Evaluator = std::function<double(Coalition)>;

  static CoalitionUtility additive(std::vector<double> values);
  /// Arbitrary characteristic function, e.g. re-aggregating the coalition's
  /// models and scoring their accuracy gain.
  static CoalitionUtility general(Evaluator evaluator, CoalitionMode mode = CoalitionMode::Retrain);

  double operator()(Coalition s) const;
  /// U(S + i) - U(S) for i not in S.
  double marginal(Coalition s, ClientId i) const;

  CoalitionMode mode() const { return mode_; }
  std::span<const double> additive_values() const { return values_; }

private:
  CoalitionUtility() = default;

  CoalitionMode mode_ = CoalitionMode::Additive;
  std::vector<double> values_;
  Evaluator evaluator_;
};

inline constexpr std::size_t kMaxExactPlayers = 20;

/// Average marginal contribution of `i` over all 2^(n-1) coalitions of the
/// other players. Throws std::length_error when n > kMaxExactPlayers and
/// std::out_of_range when i >= n.
double banzhaf_exact(const CoalitionUtility& u, std::size_t n, ClientId i);

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;  // sample standard deviation / sqrt(samples)
  std::size_t samples = 0;
};

/// Banzhaf index of every player. Additive games return their values
/// directly (any n up to 64); other games are enumerated exactly.
std::vector<double> banzhaf_indices(const CoalitionUtility& u, std::size_t n);

/// Monte Carlo Banzhaf estimate: every other player joins each sampled
/// coalition independently with probability 1/2. Deterministic in `seed`.
Estimate banzhaf_mc(const CoalitionUtility& u, std::size_t n, ClientId i, std::size_t samples,
                    std::uint64_t seed);

/// Draws the coalition used by banzhaf_mc for one sample.
Coalition sample_coalition(std::uint64_t random_bits, std::size_t n, ClientId excluded);

struct ReputationParams {
  double w1 = 0.5;
  double w2 = 0.5;

  /// Both weights in [0, 1] summing to 1 (within 1e-9).
  void validate() const;
};

/// eps' = eps * w1 + zeta * w2
double update_reputation(double prev_epsilon, double zeta, const ReputationParams& params);

class ReputationState {
public:
  struct Entry {
    double epsilon = 0.0;
    double zeta_last = 0.0;
    std::size_t round = 0;
    bool updated = false;
  };

  /// Adds a client with cold-start reputation 0 if it is not yet known.
  void enroll(ClientId id);
  /// Stores a new (zeta, epsilon) pair. Throws std::invalid_argument unless
  /// `round` is strictly greater than the client's previous update round.
  void record(ClientId id, double zeta, double epsilon, std::size_t round);

  bool contains(ClientId id) const { return entries_.contains(id); }
  const Entry& at(ClientId id) const;
  std::size_t size() const { return entries_.size(); }
  const std::map<ClientId, Entry>& entries() const { return entries_; }

private:
  std::map<ClientId, Entry> entries_;
};

/// The k clients with highest epsilon, ordered by (epsilon desc, id asc).
std::vector<ClientId> select_top_k(const ReputationState& state, std::size_t k);

}  // namespace afl::reputation

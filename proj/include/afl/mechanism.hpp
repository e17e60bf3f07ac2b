#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Closed-form procurement contracts for a single buyer (the aggregation
// server) facing sellers with private efficiency. A client of efficiency
// theta producing output q pays cost q^2 / (1 + delta * theta); the server
// values output linearly at lambda per unit.
namespace afl::mechanism {

enum class Regime { Complete, Incomplete };

std::string_view to_string(Regime regime);
Regime parse_regime(std::string_view text);

/// Client efficiency in [0, 1]. Construction throws std::domain_error
/// outside that range (including NaN).
class Efficiency {
public:
  explicit Efficiency(double theta);

  double value() const noexcept { return theta_; }

  friend bool operator==(Efficiency, Efficiency) = default;

private:
  double theta_;
};

struct MarketParams {
  double lambda = 1.0;
  double delta = 2.0;
  std::size_t n_clients = 1;
  std::size_t k_select = 1;
  Regime regime = Regime::Complete;

  /// Throws std::invalid_argument naming the violated invariant.
  void validate() const;
};

/// Output-transfer pair offered to one client.
struct Contract {
  double q = 0.0;
  double r = 0.0;
};

struct IcDiagnostic {
  Efficiency true_theta;
  Efficiency reported_theta;
  double truthful_utility;
  double misreport_utility;
  double violation;  // max(0, misreport - truthful)
};

double cost(double q, Efficiency theta, double delta);
double client_utility(const Contract& contract, Efficiency theta, double delta);
double server_value(double q, double lambda);

/// First-best contract: marginal value equals marginal cost and the
/// transfer equals the cost, so the client keeps nothing.
Contract solve_complete(Efficiency theta, const MarketParams& params);

/// Second-best contract under a uniform prior on efficiency. Output is
/// distorted downward for every theta < 1; the transfer covers cost plus
/// the information rent.
Contract solve_incomplete(Efficiency theta, const MarketParams& params);

/// Dispatches on params.regime.
Contract solve(Efficiency theta, const MarketParams& params);

/// (1 - theta) * delta * q^2 / (1 + delta * theta)^2
double information_rent(Efficiency theta, double q, double delta);

// lambda - marginal cost at q.
double complete_foc_residual(double q, Efficiency theta, const MarketParams& params);
// lambda - marginal virtual cost at q.
double incomplete_foc_residual(double q, Efficiency theta, const MarketParams& params);

/// For each reported type, the utility a client of `true_theta` gets from the
/// contract designed for that report. Requires params.regime == Incomplete and
/// a non-empty grid; throws std::invalid_argument otherwise.
std::vector<IcDiagnostic> ic_diagnostic(Efficiency true_theta,
                                        std::span<const Efficiency> reported_grid,
                                        const MarketParams& params);

double server_utility_per_client(const Contract& contract, const MarketParams& params);

}  // namespace afl::mechanism

#include "afl/mechanism.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace afl::mechanism {

namespace {

void require_delta(double delta) {
  if (!(delta > 0.0)) {
    throw std::domain_error("delta must be positive, got " + std::to_string(delta));
  }
}

void require_lambda(double lambda) {
  if (!(lambda > 0.0)) {
    throw std::domain_error("lambda must be positive, got " + std::to_string(lambda));
  }
}

}  // namespace

std::string_view to_string(Regime regime) {
  switch (regime) {
    case Regime::Complete:
      return "complete";
    case Regime::Incomplete:
      return "incomplete";
  }
  return "unknown";
}

Regime parse_regime(std::string_view text) {
  if (text == "complete") return Regime::Complete;
  if (text == "incomplete") return Regime::Incomplete;
  throw std::invalid_argument("unknown regime '" + std::string(text) +
                              "' (expected complete or incomplete)");
}

Efficiency::Efficiency(double theta) : theta_(theta) {
  if (!(theta >= 0.0 && theta <= 1.0)) {
    throw std::domain_error("efficiency theta must lie in [0, 1], got " + std::to_string(theta));
  }
}

void MarketParams::validate() const {
  if (!(lambda > 0.0)) throw std::invalid_argument("invariant violated: lambda > 0");
  if (!(delta > 0.0)) throw std::invalid_argument("invariant violated: delta > 0");
  if (k_select < 1) throw std::invalid_argument("invariant violated: 1 <= k_select");
  if (k_select > n_clients) {
    throw std::invalid_argument("invariant violated: k_select <= n_clients");
  }
}

double cost(double q, Efficiency theta, double delta) {
  require_delta(delta);
  if (!(q >= 0.0)) throw std::domain_error("output q must be nonnegative");
  return q * q / (1.0 + delta * theta.value());
}

double client_utility(const Contract& contract, Efficiency theta, double delta) {
  return contract.r - cost(contract.q, theta, delta);
}

double server_value(double q, double lambda) { return lambda * q; }

Contract solve_complete(Efficiency theta, const MarketParams& params) {
  require_lambda(params.lambda);
  require_delta(params.delta);
  const double q = params.lambda * (1.0 + params.delta * theta.value()) / 2.0;
  // The transfer is evaluated through cost() so the client's surplus is
  // exactly zero in floating point, not merely close to it.
  return {q, cost(q, theta, params.delta)};
}

Contract solve_incomplete(Efficiency theta, const MarketParams& params) {
  require_lambda(params.lambda);
  require_delta(params.delta);
  const double t = theta.value();
  const double a = 1.0 + params.delta * t;
  const double q = params.lambda * a * a / (2.0 * a + 2.0 * params.delta * (1.0 - t));
  return {q, cost(q, theta, params.delta) + information_rent(theta, q, params.delta)};
}

Contract solve(Efficiency theta, const MarketParams& params) {
  return params.regime == Regime::Complete ? solve_complete(theta, params)
                                           : solve_incomplete(theta, params);
}

double information_rent(Efficiency theta, double q, double delta) {
  require_delta(delta);
  if (!(q >= 0.0)) throw std::domain_error("output q must be nonnegative");
  const double t = theta.value();
  const double a = 1.0 + delta * t;
  return (1.0 - t) * delta * q * q / (a * a);
}

double complete_foc_residual(double q, Efficiency theta, const MarketParams& params) {
  const double a = 1.0 + params.delta * theta.value();
  return params.lambda - 2.0 * q / a;
}

double incomplete_foc_residual(double q, Efficiency theta, const MarketParams& params) {
  const double t = theta.value();
  const double a = 1.0 + params.delta * t;
  // The cross-partial of cost is -2 delta q / a^2; the hazard-rate weight
  // of the uniform prior is (1 - theta).
  return params.lambda - (2.0 * q / a + (1.0 - t) * 2.0 * params.delta * q / (a * a));
}

std::vector<IcDiagnostic> ic_diagnostic(Efficiency true_theta,
                                        std::span<const Efficiency> reported_grid,
                                        const MarketParams& params) {
  if (reported_grid.empty()) throw std::invalid_argument("ic_diagnostic: empty report grid");
  if (params.regime != Regime::Incomplete) {
    throw std::invalid_argument("ic_diagnostic: requires the incomplete-information regime");
  }
  const double truthful = client_utility(solve_incomplete(true_theta, params), true_theta,
                                         params.delta);
  std::vector<IcDiagnostic> out;
  out.reserve(reported_grid.size());
  for (Efficiency reported : reported_grid) {
    const double misreport =
        client_utility(solve_incomplete(reported, params), true_theta, params.delta);
    out.push_back({true_theta, reported, truthful, misreport, std::max(0.0, misreport - truthful)});
  }
  return out;
}

double server_utility_per_client(const Contract& contract, const MarketParams& params) {
  return server_value(contract.q, params.lambda) - contract.r;
}

}  // namespace afl::mechanism

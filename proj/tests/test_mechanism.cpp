#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "afl/mechanism.hpp"

using namespace afl::mechanism;

namespace {

MarketParams market(double lambda, double delta, Regime regime = Regime::Complete) {
  MarketParams p;
  p.lambda = lambda;
  p.delta = delta;
  p.regime = regime;
  return p;
}

std::vector<double> theta_grid(std::size_t points) {
  std::vector<double> g(points);
  for (std::size_t i = 0; i < points; ++i) g[i] = static_cast<double>(i) / static_cast<double>(points - 1);
  return g;
}

}  // namespace

TEST_SUITE("mechanism") {
  TEST_CASE("efficiency domain") {
    CHECK_NOTHROW(Efficiency(0.0));
    CHECK_NOTHROW(Efficiency(1.0));
    CHECK_THROWS_AS(Efficiency(-1e-12), std::domain_error);
    CHECK_THROWS_AS(Efficiency(1.0 + 1e-12), std::domain_error);
    CHECK_THROWS_AS(Efficiency(std::nan("")), std::domain_error);
  }

  TEST_CASE("market params invariants") {
    MarketParams p;
    p.n_clients = 10;
    p.k_select = 3;
    CHECK_NOTHROW(p.validate());
    p.k_select = 11;
    CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("k_select <= n_clients"), std::invalid_argument);
    p.k_select = 0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = MarketParams{};
    p.lambda = 0.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = MarketParams{};
    p.delta = -1.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  }

  TEST_CASE("cost examples") {
    CHECK(cost(1.0, Efficiency(0.0), 2.0) == 1.0);
    CHECK(cost(1.5, Efficiency(1.0), 2.0) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(cost(0.0, Efficiency(0.3), 2.0) == 0.0);
    CHECK_THROWS_AS(cost(1.0, Efficiency(0.5), 0.0), std::domain_error);
    CHECK_THROWS_AS(cost(-1.0, Efficiency(0.5), 2.0), std::domain_error);
  }

  TEST_CASE("cost is increasing convex in q and decreasing in theta") {
    for (double t : theta_grid(11)) {
      double prev = -1.0, prev_step = -1.0;
      for (int j = 0; j <= 20; ++j) {
        const double c = cost(0.1 * j, Efficiency(t), 2.0);
        if (j > 0) {
          CHECK(c > prev);
          if (j > 1) CHECK(c - prev >= prev_step - 1e-15);
          prev_step = c - prev;
        }
        prev = c;
      }
    }
    CHECK(cost(1.0, Efficiency(0.2), 2.0) > cost(1.0, Efficiency(0.8), 2.0));
  }

  TEST_CASE("client utility examples") {
    CHECK(client_utility({1.0, 0.5}, Efficiency(0.5), 2.0) == 0.0);
    CHECK(client_utility({0.0, 0.0}, Efficiency(0.7), 2.0) == 0.0);
    CHECK(client_utility({1.5, 0.75}, Efficiency(1.0), 2.0) == doctest::Approx(0.0).epsilon(1e-15));
  }

  TEST_CASE("server value examples") {
    CHECK(server_value(2.0, 3.0) == 6.0);
    CHECK(server_value(0.0, 5.0) == 0.0);
    CHECK(server_value(1.5, 1.0) == 1.5);
  }

  TEST_CASE("solve_complete examples") {
    const Contract top = solve_complete(Efficiency(1.0), market(1, 2));
    CHECK(top.q == 1.5);
    CHECK(top.r == 0.75);
    const Contract mid = solve_complete(Efficiency(0.5), market(1, 2));
    CHECK(mid.q == 1.0);
    CHECK(mid.r == 0.5);
    const Contract bottom = solve_complete(Efficiency(0.0), market(2, 2));
    CHECK(bottom.q == 1.0);
    CHECK(bottom.r == 1.0);
  }

  TEST_CASE("solve_incomplete examples") {
    const MarketParams p = market(1, 2, Regime::Incomplete);
    const Contract top = solve_incomplete(Efficiency(1.0), p);
    CHECK(top.q == 1.5);
    CHECK(top.r == 0.75);
    const Contract mid = solve_incomplete(Efficiency(0.5), p);
    CHECK(std::abs(mid.q - 2.0 / 3.0) <= 1e-15);
    CHECK(std::abs(mid.r - 1.0 / 3.0) <= 1e-15);
    const Contract bottom = solve_incomplete(Efficiency(0.0), p);
    CHECK(std::abs(bottom.q - 1.0 / 6.0) <= 1e-15);
    CHECK(std::abs(bottom.r - 1.0 / 12.0) <= 1e-15);
  }

  TEST_CASE("solve dispatches on regime") {
    CHECK(solve(Efficiency(0.5), market(1, 2, Regime::Complete)).q == 1.0);
    CHECK(std::abs(solve(Efficiency(0.5), market(1, 2, Regime::Incomplete)).q - 2.0 / 3.0) <= 1e-15);
  }

  TEST_CASE("information rent examples") {
    CHECK(information_rent(Efficiency(1.0), 1.5, 2.0) == 0.0);
    CHECK(std::abs(information_rent(Efficiency(0.5), 2.0 / 3.0, 2.0) - 1.0 / 9.0) <= 1e-15);
    CHECK(std::abs(information_rent(Efficiency(0.0), 1.0 / 6.0, 2.0) - 1.0 / 18.0) <= 1e-15);
  }

  TEST_CASE("server utility per client examples") {
    CHECK(server_utility_per_client({1.5, 0.75}, market(1, 2)) == 0.75);
    CHECK(server_utility_per_client({0.5, 0.25}, market(1, 2)) == 0.25);
    CHECK(server_utility_per_client({0.0, 0.0}, market(7, 2)) == 0.0);
  }

  TEST_CASE("incomplete closed form on the 1001-point grid") {
    const MarketParams p = market(1, 2, Regime::Incomplete);
    for (double t : theta_grid(1001)) {
      const double expected = (1 + 2 * t) * (1 + 2 * t) / 6.0;
      CHECK(std::abs(solve_incomplete(Efficiency(t), p).q - expected) <= 1e-12);
      CHECK(std::abs(solve_complete(Efficiency(t), p).q - (1 + 2 * t) / 2.0) <= 1e-12);
    }
  }

  TEST_CASE("zero rent under complete information across lambda and delta") {
    for (double lambda : {0.5, 1.0, 2.0}) {
      for (double delta : {1.0, 2.0, 4.0}) {
        const MarketParams p = market(lambda, delta);
        for (double t : theta_grid(1001)) {
          const Contract c = solve_complete(Efficiency(t), p);
          CHECK(std::abs(client_utility(c, Efficiency(t), delta)) <= 1e-12);
          CHECK(std::abs(complete_foc_residual(c.q, Efficiency(t), p)) <= 1e-9);
        }
      }
    }
  }

  TEST_CASE("incomplete information: rent, distortion, residuals and monotonicity") {
    for (double lambda : {0.5, 1.0, 2.0}) {
      for (double delta : {1.0, 2.0, 4.0}) {
        const MarketParams pc = market(lambda, delta, Regime::Complete);
        const MarketParams pi = market(lambda, delta, Regime::Incomplete);
        double prev_ci = -1.0, prev_star = -1.0;
        for (double t : theta_grid(1001)) {
          const Efficiency th(t);
          const Contract ci = solve_complete(th, pc);
          const Contract star = solve_incomplete(th, pi);
          const double rent = information_rent(th, star.q, delta);
          CHECK(rent >= 0.0);
          CHECK(std::abs(client_utility(star, th, delta) - rent) <= 1e-9);
          CHECK(std::abs(incomplete_foc_residual(star.q, th, pi)) <= 1e-9);
          CHECK(star.q <= ci.q + 1e-12);
          if (t < 1.0) CHECK(star.q < ci.q);
          CHECK(server_utility_per_client(ci, pc) >= server_utility_per_client(star, pi) - 1e-12);
          CHECK(ci.q >= prev_ci);
          CHECK(star.q >= prev_star);
          prev_ci = ci.q;
          prev_star = star.q;
        }
        const Efficiency one(1.0);
        CHECK(std::abs(server_utility_per_client(solve_complete(one, pc), pc) -
                       server_utility_per_client(solve_incomplete(one, pi), pi)) <= 1e-9);
      }
    }
  }

  TEST_CASE("incomplete transfer is half the output value") {
    for (double t : theta_grid(101)) {
      const MarketParams p = market(3.0, 2.0, Regime::Incomplete);
      const Contract c = solve_incomplete(Efficiency(t), p);
      CHECK(std::abs(c.r - 1.5 * c.q) <= 1e-12);
    }
  }

  TEST_CASE("ic diagnostic") {
    const MarketParams p = market(1, 2, Regime::Incomplete);
    const std::vector<Efficiency> one{Efficiency(1.0)};
    auto d = ic_diagnostic(Efficiency(1.0), one, p);
    REQUIRE(d.size() == 1);
    CHECK(d[0].violation == 0.0);

    const std::vector<Efficiency> quarter{Efficiency(0.25)};
    d = ic_diagnostic(Efficiency(0.25), quarter, p);
    CHECK(d[0].violation == 0.0);

    CHECK_THROWS_AS(ic_diagnostic(Efficiency(0.5), std::vector<Efficiency>{}, p), std::invalid_argument);
    CHECK_THROWS_AS(ic_diagnostic(Efficiency(0.5), one, market(1, 2, Regime::Complete)), std::invalid_argument);
  }

  TEST_CASE("ic diagnostic regression fixture at theta 0.5") {
    const MarketParams p = market(1, 2, Regime::Incomplete);
    std::vector<Efficiency> grid;
    for (int i = 0; i <= 100; ++i) grid.emplace_back(i / 100.0);
    const auto d = ic_diagnostic(Efficiency(0.5), grid, p);
    REQUIRE(d.size() == 101);
    std::size_t worst = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      CHECK(d[i].violation >= 0.0);
      CHECK(std::abs(d[i].truthful_utility - 1.0 / 9.0) <= 1e-12);
      CHECK((d[i].violation == 0.0) == (d[i].truthful_utility >= d[i].misreport_utility));
      if (d[i].violation > d[worst].violation) worst = i;
    }
    // Exact rational value 6245239 / 450000000 from an independent evaluation.
    CHECK(worst == 37);
    CHECK(std::abs(d[worst].violation - 6245239.0 / 450000000.0) <= 1e-12);
  }

  TEST_CASE("regime parsing") {
    CHECK(parse_regime("complete") == Regime::Complete);
    CHECK(parse_regime("incomplete") == Regime::Incomplete);
    CHECK(to_string(Regime::Incomplete) == "incomplete");
    CHECK_THROWS_AS(parse_regime("partial"), std::invalid_argument);
  }
}

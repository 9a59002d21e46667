#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <riskdpg/errors.hpp>
#include <riskdpg/retdist.hpp>
#include <riskdpg/rng.hpp>

#include "oracles/oracles.hpp"

using namespace riskdpg;

namespace {

ReturnSamples samples(std::vector<double> z, bool sorted = false) {
  ReturnSamples s;
  s.atoms = std::move(z);
  s.sorted = sorted;
  return s;
}

ReturnSamples random_samples(std::size_t n, Rng& rng) {
  ReturnSamples s;
  for (std::size_t i = 0; i < n; ++i) s.atoms.push_back(3.0 * rng.normal());
  return s;
}

}  // namespace

TEST_CASE("huber values and derivative") {
  CHECK(huber(0.5, 1.0) == doctest::Approx(0.125));
  CHECK(huber(2.0, 1.0) == doctest::Approx(1.5));
  CHECK(huber(-2.0, 1.0) == doctest::Approx(1.5));
  CHECK(huber(-0.7, 0.0) == doctest::Approx(0.7));
  CHECK(huber_derivative(0.5, 1.0) == doctest::Approx(0.5));
  CHECK(huber_derivative(-3.0, 1.0) == doctest::Approx(-1.0));
  CHECK(huber_derivative(4.0, 0.01) == doctest::Approx(0.01));
  CHECK(huber_derivative(-0.2, 0.0) == -1.0);
  CHECK(huber_derivative(0.0, 0.0) == 0.0);
}

TEST_CASE("huber is continuous at the threshold") {
  for (double zeta : {0.01, 0.5, 1.0, 3.0}) {
    CHECK(huber(zeta * (1 - 1e-12), zeta) == doctest::Approx(huber(zeta * (1 + 1e-12), zeta)));
    CHECK(huber_derivative(zeta * (1 - 1e-12), zeta) ==
          doctest::Approx(huber_derivative(zeta * (1 + 1e-12), zeta)));
  }
}

TEST_CASE("quantile grid midpoints") {
  const auto g2 = quantile_grid(2);
  REQUIRE(g2.size() == 2);
  CHECK(g2.tau_hat[0] == doctest::Approx(0.25));
  CHECK(g2.tau_hat[1] == doctest::Approx(0.75));
  const auto g1 = quantile_grid(1);
  CHECK(g1.tau_hat[0] == doctest::Approx(0.5));
  const auto g51 = quantile_grid(51);
  CHECK(std::is_sorted(g51.tau_hat.begin(), g51.tau_hat.end()));
  CHECK(g51.tau_hat.front() > 0.0);
  CHECK(g51.tau_hat.back() < 1.0);
  CHECK_THROWS_AS(quantile_grid(0), DomainError);
}

TEST_CASE("stable sort keeps tie order") {
  const auto s = sort_with_permutation(samples({2.0, 2.0, 1.0}));
  CHECK(s.sorted.atoms == std::vector<double>{1.0, 2.0, 2.0});
  CHECK(s.perm == std::vector<std::size_t>{2, 0, 1});
  CHECK(s.sorted.sorted);
}

TEST_CASE("quantile huber loss on a single atom") {
  const auto g = quantile_grid(1);
  const auto lg = quantile_huber_loss(samples({0.0}, true), samples({1.0}), g, 1.0);
  CHECK(lg.loss == doctest::Approx(0.25));
  CHECK(lg.grad_pred[0] == doctest::Approx(-0.5));
}

TEST_CASE("quantile huber gradient matches central differences") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng.uniform_index(6);
    const std::size_t m = 1 + rng.uniform_index(8);
    auto pred = sort_with_permutation(random_samples(n, rng)).sorted;
    const auto target = random_samples(m, rng);
    const auto grid = quantile_grid(n);
    const double zeta = 0.5 + rng.uniform();
    const auto lg = quantile_huber_loss(pred, target, grid, zeta);
    Vector x = Eigen::Map<const Vector>(pred.atoms.data(), static_cast<Eigen::Index>(n));
    // Perturbations stay well inside the sorted order for these draws.
    auto f = [&](const Vector& v) {
      ReturnSamples p;
      p.atoms.assign(v.data(), v.data() + v.size());
      p.sorted = true;
      return quantile_huber_loss(p, target, grid, zeta).loss;
    };
    const Vector fd = oracles::central_difference(f, x, 1e-6);
    const Vector an = Eigen::Map<const Vector>(lg.grad_pred.data(), static_cast<Eigen::Index>(n));
    CHECK(oracles::relative_error(an, fd) <= 1e-6);
  }
}

TEST_CASE("quantile huber loss rejects unsorted or mismatched input") {
  const auto g = quantile_grid(2);
  CHECK_THROWS_AS(quantile_huber_loss(samples({2.0, 1.0}, true), samples({0.0}), g, 1.0),
                  DomainError);
  CHECK_THROWS_AS(quantile_huber_loss(samples({1.0, 2.0}, true), samples({0.0}), quantile_grid(3), 1.0),
                  DimensionError);
  CHECK_THROWS_AS(quantile_huber_loss(samples({1.0, 2.0}, true), samples({}), g, 1.0),
                  DomainError);
}

TEST_CASE("bellman target") {
  const auto t = bellman_target(1.0, 0.9, samples({0.0, 2.0}), false);
  CHECK(t.atoms[0] == doctest::Approx(1.0));
  CHECK(t.atoms[1] == doctest::Approx(2.8));
  const auto term = bellman_target(-3.0, 0.9, samples({5.0, 7.0}), true);
  CHECK(term.atoms == std::vector<double>{-3.0, -3.0});
  CHECK_THROWS_AS(bellman_target(0.0, 1.5, samples({0.0}), false), DomainError);
}

TEST_CASE("var, cvar and subgradient on small sets") {
  const auto z = samples({4.0, 2.0, 1.0, 3.0});
  CHECK(var_estimate(samples({1.0, 2.0, 3.0, 4.0}), 0.5) == 2.0);
  CHECK(cvar_estimate(samples({1.0, 2.0, 3.0, 4.0}), 0.5).cvar == doctest::Approx(1.5));
  CHECK(cvar_estimate(samples({1.0, 2.0, 3.0, 4.0}), 0.0).cvar == doctest::Approx(2.5));
  const auto w = cvar_subgradient(samples({1.0, 2.0, 3.0, 4.0}), 0.5);
  CHECK(w == std::vector<double>{0.5, 0.5, 0.0, 0.0});
  const auto wz = cvar_subgradient(z, 0.5);
  CHECK(wz == std::vector<double>{0.0, 0.5, 0.5, 0.0});
  const auto ties = cvar_subgradient(samples({2.0, 2.0, 2.0}), 2.0 / 3.0);
  CHECK(ties[0] == doctest::Approx(1.0));
  CHECK(ties[1] == 0.0);
  CHECK(ties[2] == 0.0);
  CHECK(mean_return(samples({1.0, 2.0, 3.0})) == doctest::Approx(2.0));
}

TEST_CASE("tail count and level errors") {
  CHECK(tail_count(10, 0.9) == 1);
  CHECK(tail_count(10, 0.7) == 3);
  CHECK(tail_count(51, 0.0) == 51);
  CHECK_THROWS_AS(tail_count(1, 0.5), LevelError);
  CHECK_THROWS_AS(cvar_estimate(samples({1.0, 2.0}), 0.6), LevelError);
  CHECK_THROWS_AS(cvar_estimate(samples({1.0, 2.0}), 1.0), DomainError);
  CHECK_THROWS_AS(cvar_estimate(samples({1.0, 2.0}), -0.1), DomainError);
  CHECK_THROWS_AS(mean_return(samples({})), DomainError);
  CHECK_THROWS_AS(cvar_estimate(samples({1.0, std::nan("")}), 0.0), DomainError);
}

TEST_CASE("alpha zero cvar is the mean bit for bit") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const auto z = random_samples(1 + rng.uniform_index(64), rng);
    CHECK(cvar_estimate(z, 0.0).cvar == mean_return(z));
  }
}

TEST_CASE("cvar properties on integral tail sizes") {
  Rng rng(41);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 20 * (1 + rng.uniform_index(3));
    const auto z = random_samples(n, rng);
    const auto w = cvar_subgradient(z, 0.5);
    double dot = 0.0;
    for (std::size_t j = 0; j < n; ++j) dot += w[j] * z.atoms[j];
    const auto stats = cvar_estimate(z, 0.5);
    CHECK(dot == stats.cvar);
    CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0));
    CHECK(stats.cvar <= stats.var);
    CHECK(stats.cvar <= mean_return(z) + 1e-12);
    // Monotone in alpha: each level below keeps n(1 - alpha) integral.
    double prev = cvar_estimate(z, 0.0).cvar;
    for (double a : {0.25, 0.5, 0.75, 0.95}) {
      const double c = cvar_estimate(z, a).cvar;
      CHECK(c <= prev + 1e-12);
      prev = c;
    }
    // Permuting the atoms does not change the estimate.
    auto shuffled = z;
    for (std::size_t i = n - 1; i > 0; --i)
      std::swap(shuffled.atoms[i], shuffled.atoms[rng.uniform_index(i + 1)]);
    CHECK(cvar_estimate(shuffled, 0.5).cvar == doctest::Approx(stats.cvar).epsilon(1e-12));
    // Shifting every atom shifts the estimate.
    auto shifted = z;
    for (auto& v : shifted.atoms) v += 10.0;
    CHECK(cvar_estimate(shifted, 0.5).cvar == doctest::Approx(stats.cvar + 10.0).epsilon(1e-12));
  }
}

TEST_CASE("cvar agrees with the rank-counting oracle") {
  Rng rng(51);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(64);
    auto z = random_samples(n, rng);
    if (trial % 3 == 0)
      for (auto& v : z.atoms) v = std::round(v);
    const std::uint64_t num = rng.uniform_index(10);  // alpha = num / 10
    const std::size_t k = oracles::exact_tail_count(n, num, 10);
    if (k == 0) continue;
    const double alpha = static_cast<double>(num) / 10.0;
    const double denom = static_cast<double>(n) * (1.0 - alpha);
    CHECK(cvar_estimate(z, alpha).cvar == oracles::brute_force_cvar(z.atoms, k, denom));
  }
}

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>
#include <vector>

#include <riskdpg/errors.hpp>
#include <riskdpg/replay.hpp>

using namespace riskdpg;

namespace {

Transition make(double tag, bool terminal = false) {
  Transition t;
  t.x = Eigen::VectorXd::Constant(2, tag);
  t.a = Eigen::VectorXd::Constant(1, -tag);
  t.r = tag * 0.5;
  t.x_next = Eigen::VectorXd::Constant(2, tag + 1.0);
  t.terminal = terminal;
  return t;
}

}  // namespace

TEST_CASE("pool fills then overwrites oldest first") {
  ReplayPool pool(3, 2, 1);
  CHECK(pool.empty());
  for (int i = 0; i < 3; ++i) pool.push(make(i));
  CHECK(pool.size() == 3);
  CHECK(pool.at(0).r == 0.0);
  pool.push(make(3));
  pool.push(make(4));
  CHECK(pool.size() == 3);
  CHECK(pool.capacity() == 3);
  CHECK(pool.at(0).r == doctest::Approx(1.0));
  CHECK(pool.at(1).r == doctest::Approx(1.5));
  CHECK(pool.at(2).r == doctest::Approx(2.0));
  CHECK_THROWS_AS(pool.at(3), DomainError);
}

TEST_CASE("pool validates transitions") {
  ReplayPool pool(4, 2, 1);
  auto t = make(1);
  t.x = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(pool.push(t), DimensionError);
  auto u = make(1);
  u.r = std::nan("");
  CHECK_THROWS_AS(pool.push(u), DomainError);
  CHECK(pool.empty());
  CHECK_THROWS_AS(ReplayPool(0, 2, 1), DomainError);
}

TEST_CASE("sampling needs a full batch") {
  ReplayPool pool(10, 2, 1);
  Rng rng(1);
  pool.push(make(1));
  CHECK_THROWS_AS(pool.sample_batch(2, rng), InsufficientDataError);
  pool.push(make(2));
  const auto batch = pool.sample_batch(2, rng);
  CHECK(batch.size() == 2);
  CHECK_THROWS_AS(pool.sample_batch(0, rng), DomainError);
}

TEST_CASE("sampling is uniform with replacement") {
  constexpr std::size_t kSize = 20;
  constexpr int kDraws = 100'000;
  ReplayPool pool(kSize, 2, 1);
  for (std::size_t i = 0; i < kSize; ++i) pool.push(make(static_cast<double>(i)));
  Rng rng(2);
  std::vector<int> counts(kSize, 0);
  for (int d = 0; d < kDraws; d += static_cast<int>(kSize))
    for (auto i : pool.sample_indices(kSize, rng)) ++counts[i];
  const double p = 1.0 / kSize;
  const double sigma = std::sqrt(kDraws * p * (1 - p));
  for (int c : counts) CHECK(std::abs(c - kDraws * p) <= 3.5 * sigma);
}

TEST_CASE("same seed draws the same batch") {
  ReplayPool pool(50, 2, 1);
  for (int i = 0; i < 50; ++i) pool.push(make(i));
  Rng a(9), b(9);
  CHECK(pool.sample_batch(16, a) == pool.sample_batch(16, b));
}

TEST_CASE("binary dump round trips after wrap-around") {
  ReplayPool pool(4, 2, 1);
  for (int i = 0; i < 6; ++i) pool.push(make(i * 0.1, i % 2 == 0));
  std::stringstream ss;
  pool.save(ss);
  CHECK(ss.str().rfind("CVSDPG1", 0) == 0);
  const auto back = ReplayPool::load(ss);
  REQUIRE(back.size() == pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) CHECK(back.at(i) == pool.at(i));

  const auto path = std::filesystem::temp_directory_path() / "riskdpg_test_replay.bin";
  pool.save(path);
  const auto from_file = ReplayPool::load(path);
  CHECK(from_file.at(3) == pool.at(3));
  std::filesystem::remove(path);

  std::stringstream bad("garbage");
  CHECK_THROWS_AS(ReplayPool::load(bad), ParseError);
  const std::string text = ss.str();
  std::stringstream truncated(text.substr(0, text.size() - 5));
  CHECK_THROWS_AS(ReplayPool::load(truncated), ParseError);
}

#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "riskdpg/rng.hpp"

namespace riskdpg {

/// One environment interaction (x, a, r, x', terminal). The next action that
/// an asynchronous collector would also record is never read by the learner
/// and is not stored.
struct Transition {
  Eigen::VectorXd x;
  Eigen::VectorXd a;
  double r = 0.0;
  Eigen::VectorXd x_next;
  bool terminal = false;

  bool operator==(const Transition&) const = default;
};

/// Bounded FIFO pool with uniform sampling (with replacement).
///
/// Not internally synchronized: a concurrent collector and learner must
/// serialize push() and sample_batch() themselves.
class ReplayPool {
 public:
  ReplayPool(std::size_t capacity, Eigen::Index state_dim, Eigen::Index action_dim);

  void push(Transition t);
  std::vector<Transition> sample_batch(std::size_t batch_size, Rng& rng) const;
  /// Indices into logical insertion order; the same draws sample_batch makes.
  std::vector<std::size_t> sample_indices(std::size_t batch_size, Rng& rng) const;

  /// i = 0 is the oldest stored transition.
  const Transition& at(std::size_t i) const;

  std::size_t size() const { return count_; }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return count_ == 0; }
  Eigen::Index state_dim() const { return state_dim_; }
  Eigen::Index action_dim() const { return action_dim_; }

  /// Binary dump: "CVSDPG1" magic, "REPLAY" tag, little-endian u64 header
  /// fields (capacity, state_dim, action_dim, count) and raw doubles per
  /// transition in oldest-first order.
  void save(std::ostream& out) const;
  static ReplayPool load(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static ReplayPool load(const std::filesystem::path& path);

 private:
  std::size_t capacity_;
  Eigen::Index state_dim_;
  Eigen::Index action_dim_;
  std::vector<Transition> ring_;
  std::size_t head_ = 0;  // next write slot once full
  std::size_t count_ = 0;
};

}  // namespace riskdpg

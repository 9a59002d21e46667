#pragma once

// Sample-based return distributions: quantile grid, (quantile-)Huber losses,
// distributional Bellman targets, and lower-tail VaR/CVaR estimators.
//
// Conventions: atoms are sorted ascending and paired with an increasing
// quantile midpoint grid tau_hat[i] = (2i + 1) / (2n), i = 0..n-1. CVaR at
// level alpha averages the k = floor(n(1 - alpha)) smallest atoms, normalized
// by n(1 - alpha); alpha = 0 is the plain mean.

#include <cstddef>
#include <span>
#include <vector>

namespace riskdpg {

struct ReturnSamples {
  std::vector<double> atoms;
  bool sorted = false;

  std::size_t size() const { return atoms.size(); }
  /// n >= 1, finite atoms, and ascending order when `sorted` is set.
  void validate() const;
};

struct QuantileGrid {
  std::vector<double> tau_hat;
  std::size_t size() const { return tau_hat.size(); }
};

struct RiskStats {
  double var = 0.0;
  double cvar = 0.0;
  double alpha = 0.0;
};

struct SortedSamples {
  ReturnSamples sorted;
  std::vector<std::size_t> perm;  // sorted position -> original index
};

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad_pred;
};

QuantileGrid quantile_grid(std::size_t n);

/// Huber function L_zeta. zeta = 0 gives |v|.
double huber(double v, double zeta);
/// d/dv of huber(v, zeta); sign(v) when zeta = 0 (0 at v = 0).
double huber_derivative(double v, double zeta);

/// Stable ascending sort that also returns the permutation.
SortedSamples sort_with_permutation(const ReturnSamples& samples);

/// (1/(n*m)) sum_j sum_k |tau_j - 1{u<0}| L_zeta(u), u = target_k - pred_j,
/// with the exact gradient with respect to each prediction atom.
LossAndGrad quantile_huber_loss(const ReturnSamples& pred_sorted, const ReturnSamples& target,
                                const QuantileGrid& grid, double zeta);

/// atom_j = r + gamma * next_j, or r everywhere when terminal.
ReturnSamples bellman_target(double r, double gamma, const ReturnSamples& next_samples,
                             bool terminal);

/// Number of tail atoms floor(n(1 - alpha)), computed robustly against
/// representation error in alpha. Throws LevelError when it is zero.
std::size_t tail_count(std::size_t n, double alpha);

double var_estimate(const ReturnSamples& samples, double alpha);
RiskStats cvar_estimate(const ReturnSamples& samples, double alpha);
/// d(cvar)/d(atom_j) with the tail selection held fixed, in original order.
std::vector<double> cvar_subgradient(const ReturnSamples& samples, double alpha);

double mean_return(const ReturnSamples& samples);

}  // namespace riskdpg

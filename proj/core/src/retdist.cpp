#include "riskdpg/retdist.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "riskdpg/errors.hpp"

namespace riskdpg {

void ReturnSamples::validate() const {
  if (atoms.empty()) throw DomainError("return samples must contain at least one atom");
  for (double z : atoms)
    if (!std::isfinite(z)) throw DomainError("non-finite return atom");
  if (sorted && !std::is_sorted(atoms.begin(), atoms.end()))
    throw DomainError("samples flagged sorted are not in ascending order");
}

QuantileGrid quantile_grid(std::size_t n) {
  if (n == 0) throw DomainError("quantile grid needs n >= 1");
  QuantileGrid g;
  g.tau_hat.resize(n);
  const double denom = 2.0 * static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) g.tau_hat[i] = (2.0 * static_cast<double>(i) + 1.0) / denom;
  return g;
}

double huber(double v, double zeta) {
  const double a = std::abs(v);
  if (zeta == 0.0) return a;
  if (a < zeta) return 0.5 * v * v;
  return zeta * (a - 0.5 * zeta);
}

double huber_derivative(double v, double zeta) {
  if (std::abs(v) < zeta) return v;
  if (v > 0.0) return zeta > 0.0 ? zeta : 1.0;
  if (v < 0.0) return zeta > 0.0 ? -zeta : -1.0;
  return 0.0;
}

SortedSamples sort_with_permutation(const ReturnSamples& samples) {
  SortedSamples out;
  const auto n = samples.atoms.size();
  out.perm.resize(n);
  std::iota(out.perm.begin(), out.perm.end(), std::size_t{0});
  std::stable_sort(out.perm.begin(), out.perm.end(), [&](std::size_t a, std::size_t b) {
    return samples.atoms[a] < samples.atoms[b];
  });
  out.sorted.atoms.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.sorted.atoms[i] = samples.atoms[out.perm[i]];
  out.sorted.sorted = true;
  return out;
}

LossAndGrad quantile_huber_loss(const ReturnSamples& pred_sorted, const ReturnSamples& target,
                                const QuantileGrid& grid, double zeta) {
  if (pred_sorted.atoms.empty() || target.atoms.empty())
    throw DomainError("quantile Huber loss needs non-empty inputs");
  if (!pred_sorted.sorted) throw DomainError("prediction atoms must be sorted");
  if (grid.size() != pred_sorted.size()) throw DimensionError("grid length != prediction atoms");
  if (!(zeta >= 0.0)) throw DomainError("zeta must be >= 0");
  pred_sorted.validate();
  target.validate();

  const auto n = pred_sorted.size();
  const auto m = target.size();
  const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(m));
  LossAndGrad out;
  out.grad_pred.assign(n, 0.0);
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double tau = grid.tau_hat[j];
    const double z = pred_sorted.atoms[j];
    double lj = 0.0;
    double gj = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double u = target.atoms[k] - z;
      const double w = u < 0.0 ? 1.0 - tau : tau;
      lj += w * huber(u, zeta);
      gj -= w * huber_derivative(u, zeta);
    }
    total += lj;
    out.grad_pred[j] = gj * scale;
  }
  out.loss = total * scale;
  return out;
}

ReturnSamples bellman_target(double r, double gamma, const ReturnSamples& next_samples,
                             bool terminal) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw DomainError("gamma must lie in [0, 1]");
  if (!std::isfinite(r)) throw DomainError("non-finite reward");
  ReturnSamples out;
  out.atoms.resize(next_samples.size());
  for (std::size_t j = 0; j < next_samples.size(); ++j)
    out.atoms[j] = terminal ? r : r + gamma * next_samples.atoms[j];
  return out;
}

std::size_t tail_count(std::size_t n, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in [0, 1)");
  const double x = static_cast<double>(n) * (1.0 - alpha);
  // 0.1 etc. are not representable; absorb the last-ulp error before flooring.
  const auto k = static_cast<std::size_t>(std::floor(x + 1e-9 * std::max(1.0, x)));
  if (k == 0)
    throw LevelError("alpha=" + std::to_string(alpha) + " leaves no tail atoms for n=" +
                     std::to_string(n));
  return std::min(k, n);
}

namespace {

// Tail membership under the tie policy: the k smallest atoms in stable order.
std::vector<char> tail_mask(const ReturnSamples& samples, std::size_t k) {
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return samples.atoms[a] < samples.atoms[b];
  });
  std::vector<char> mask(samples.size(), 0);
  for (std::size_t i = 0; i < k; ++i) mask[order[i]] = 1;
  return mask;
}

}  // namespace

double var_estimate(const ReturnSamples& samples, double alpha) {
  samples.validate();
  const std::size_t k = tail_count(samples.size(), alpha);
  if (samples.sorted) return samples.atoms[k - 1];
  std::vector<double> a = samples.atoms;
  std::nth_element(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(k - 1), a.end());
  return a[k - 1];
}

// cvar and the subgradient both accumulate z_j * w in original index order,
// so sum_j weight_j * z_j reproduces cvar bit for bit.
RiskStats cvar_estimate(const ReturnSamples& samples, double alpha) {
  samples.validate();
  const auto n = samples.size();
  const std::size_t k = tail_count(n, alpha);
  const double w = 1.0 / (static_cast<double>(n) * (1.0 - alpha));
  const auto mask = tail_mask(samples, k);
  RiskStats s;
  s.alpha = alpha;
  double acc = 0.0;
  double var = 0.0;
  bool first = true;
  for (std::size_t j = 0; j < n; ++j) {
    if (!mask[j]) continue;
    acc += samples.atoms[j] * w;
    if (first || samples.atoms[j] > var) var = samples.atoms[j];
    first = false;
  }
  s.cvar = acc;
  s.var = var;
  return s;
}

std::vector<double> cvar_subgradient(const ReturnSamples& samples, double alpha) {
  samples.validate();
  const auto n = samples.size();
  const std::size_t k = tail_count(n, alpha);
  const double w = 1.0 / (static_cast<double>(n) * (1.0 - alpha));
  const auto mask = tail_mask(samples, k);
  std::vector<double> weights(n, 0.0);
  for (std::size_t j = 0; j < n; ++j)
    if (mask[j]) weights[j] = w;
  return weights;
}

double mean_return(const ReturnSamples& samples) {
  samples.validate();
  // Same arithmetic as cvar_estimate at alpha = 0.
  const double w = 1.0 / (static_cast<double>(samples.size()) * 1.0);
  double acc = 0.0;
  for (double z : samples.atoms) acc += z * w;
  return acc;
}

}  // namespace riskdpg

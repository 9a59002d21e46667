#pragma once

// Minimal fully connected network engine: forward evaluation, reverse-mode
// gradients with respect to both parameters and inputs, SGD/Adam steps and
// target-network blending. All arithmetic is double precision.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace riskdpg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { relu, tanh, linear };

std::string_view to_string(Activation act);
Activation parse_activation(std::string_view name);

struct Layer {
  Matrix weight;  // [out x in]
  Vector bias;    // [out]
  Activation activation = Activation::linear;

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }

  bool operator==(const Layer& other) const {
    return activation == other.activation && weight.rows() == other.weight.rows() &&
           weight.cols() == other.weight.cols() && bias.size() == other.bias.size() &&
           weight == other.weight && bias == other.bias;
  }
};

/// Layered weights of a feed-forward network. Layer k's output feeds layer k+1.
struct NetworkParams {
  std::vector<Layer> layers;

  Eigen::Index in_dim() const;
  Eigen::Index out_dim() const;
  Eigen::Index parameter_count() const;

  /// Throws DimensionError if adjacent layers do not chain, DomainError on
  /// non-finite entries.
  void validate() const;

  bool same_shape(const NetworkParams& other) const;
  bool operator==(const NetworkParams& other) const = default;
};

/// Gradient holder with the same layout as NetworkParams.
struct ParamGrads {
  std::vector<Matrix> weight;
  std::vector<Vector> bias;

  static ParamGrads zeros_like(const NetworkParams& params);
  double squared_norm() const;
  bool all_finite() const;
  ParamGrads& operator*=(double s);
  ParamGrads& operator+=(const ParamGrads& other);
};

/// Activations recorded by forward(); one row per batch element.
struct ForwardCache {
  Matrix input;
  std::vector<Matrix> pre;   // pre-activation per layer
  std::vector<Matrix> post;  // post-activation per layer

  Eigen::Index batch() const { return input.rows(); }
};

struct GradBundle {
  ParamGrads params;
  Matrix input;  // d(objective)/d(input), same shape as the forward input
  std::vector<Matrix> scratch;  // per-layer deltas, reused by backward_into
};

struct ForwardResult {
  Matrix output;
  ForwardCache cache;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
NetworkParams mlp_init(std::span<const int> layer_sizes,
                       std::span<const Activation> activations,
                       std::uint64_t seed);

ForwardResult forward(const NetworkParams& params, const Matrix& input);

/// Same as forward(), writing into an existing cache so repeated calls with
/// the same shapes do not allocate. Returns the network output.
const Matrix& forward_into(const NetworkParams& params, const Matrix& input, ForwardCache& cache);

/// Output only, no cache.
Matrix predict(const NetworkParams& params, const Matrix& input);

/// Reverse-mode pass. output_grads is d(objective)/d(output), [batch x out].
/// The ReLU derivative at exactly zero is taken as zero.
GradBundle backward(const NetworkParams& params, const ForwardCache& cache,
                    const Matrix& output_grads);

/// Input gradients only; skips the weight-gradient products.
Matrix backward_input(const NetworkParams& params, const ForwardCache& cache,
                      const Matrix& output_grads);

/// Allocation-free variant of backward(); `out` is resized on first use.
/// When with_params is false only out.input is written.
void backward_into(const NetworkParams& params, const ForwardCache& cache,
                   const Matrix& output_grads, GradBundle& out, bool with_params = true);

// --- optimizers ------------------------------------------------------------

enum class OptimizerKind { sgd, adam };
enum class Direction { ascend, descend };

std::string_view to_string(OptimizerKind kind);
OptimizerKind parse_optimizer(std::string_view name);

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  ParamGrads first_moment;
  ParamGrads second_moment;

  static OptimizerState make(OptimizerKind kind, const NetworkParams& params);
};

/// Moves params along -grads (descend) or +grads (ascend). Throws
/// DivergenceError and leaves params and state untouched if any gradient is
/// non-finite.
void optimizer_step(NetworkParams& params, const ParamGrads& grads,
                    OptimizerState& state, double lr, Direction direction);

/// Rescales grads in place so the global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_global_norm(ParamGrads& grads, double max_norm);

/// tau * online + (1 - tau) * target, elementwise.
NetworkParams polyak_update(const NetworkParams& target, const NetworkParams& online,
                            double tau);
void polyak_update_inplace(NetworkParams& target, const NetworkParams& online, double tau);

// --- flat views (used by gradient checks and norms) -------------------------

Vector flatten(const NetworkParams& params);
Vector flatten(const ParamGrads& grads);
void unflatten(const Vector& flat, NetworkParams& params);

// --- input normalization ------------------------------------------------------

/// Per-feature running mean/variance (Welford). Applied to network inputs only.
class RunningNormalizer {
 public:
  RunningNormalizer() = default;
  explicit RunningNormalizer(Eigen::Index dim);

  void update(const Vector& sample);
  /// (x - mean) / sqrt(var + eps); identity until two samples were seen.
  Vector apply(const Vector& x) const;
  void apply_rows(Matrix& rows, Eigen::Index first_col = 0) const;

  Eigen::Index dim() const { return mean_.size(); }
  std::int64_t count() const { return count_; }
  const Vector& mean() const { return mean_; }
  Vector stddev() const;

  void save(std::ostream& out) const;
  static RunningNormalizer load(std::istream& in);

 private:
  Vector mean_;
  Vector m2_;
  std::int64_t count_ = 0;
  double eps_ = 1e-8;
};

// --- checkpoints -----------------------------------------------------------

inline constexpr std::string_view kCheckpointMagic = "CVSDPG1";

/// Text format:
///   CVSDPG1
///   layers <L>
///   layer <in> <out> <activation>     (L times, followed by)
///   <out*in weights, row-major, %.17g>
///   <out biases>
void save_params(std::ostream& out, const NetworkParams& params);
NetworkParams load_params(std::istream& in);
void save_params(const std::filesystem::path& path, const NetworkParams& params);
NetworkParams load_params(const std::filesystem::path& path);

}  // namespace riskdpg

#include "riskdpg/gradnet.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "riskdpg/errors.hpp"
#include "riskdpg/rng.hpp"

namespace riskdpg {

std::string_view to_string(Activation act) {
  switch (act) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::linear: return "linear";
  }
  return "linear";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "linear") return Activation::linear;
  throw ParseError("unknown activation '" + std::string(name) + "'");
}

Eigen::Index NetworkParams::in_dim() const {
  return layers.empty() ? 0 : layers.front().in_dim();
}

Eigen::Index NetworkParams::out_dim() const {
  return layers.empty() ? 0 : layers.back().out_dim();
}

Eigen::Index NetworkParams::parameter_count() const {
  Eigen::Index n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

void NetworkParams::validate() const {
  if (layers.empty()) throw DimensionError("network has no layers");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    if (l.weight.rows() == 0 || l.weight.cols() == 0)
      throw DimensionError("layer " + std::to_string(k) + " has zero size");
    if (l.bias.size() != l.weight.rows())
      throw DimensionError("layer " + std::to_string(k) + " bias length mismatch");
    if (k > 0 && layers[k - 1].out_dim() != l.in_dim())
      throw DimensionError("layer " + std::to_string(k) + " does not chain with its predecessor");
    if (!l.weight.allFinite() || !l.bias.allFinite())
      throw DomainError("layer " + std::to_string(k) + " has non-finite entries");
  }
}

bool NetworkParams::same_shape(const NetworkParams& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (layers[k].weight.rows() != other.layers[k].weight.rows() ||
        layers[k].weight.cols() != other.layers[k].weight.cols() ||
        layers[k].activation != other.layers[k].activation)
      return false;
  }
  return true;
}

ParamGrads ParamGrads::zeros_like(const NetworkParams& params) {
  ParamGrads g;
  g.weight.reserve(params.layers.size());
  g.bias.reserve(params.layers.size());
  for (const auto& l : params.layers) {
    g.weight.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(Vector::Zero(l.bias.size()));
  }
  return g;
}

double ParamGrads::squared_norm() const {
  double s = 0.0;
  for (const auto& w : weight) s += w.squaredNorm();
  for (const auto& b : bias) s += b.squaredNorm();
  return s;
}

bool ParamGrads::all_finite() const {
  for (const auto& w : weight)
    if (!w.allFinite()) return false;
  for (const auto& b : bias)
    if (!b.allFinite()) return false;
  return true;
}

ParamGrads& ParamGrads::operator*=(double s) {
  for (auto& w : weight) w *= s;
  for (auto& b : bias) b *= s;
  return *this;
}

ParamGrads& ParamGrads::operator+=(const ParamGrads& other) {
  if (other.weight.size() != weight.size()) throw DimensionError("gradient layout mismatch");
  for (std::size_t k = 0; k < weight.size(); ++k) {
    weight[k] += other.weight[k];
    bias[k] += other.bias[k];
  }
  return *this;
}

NetworkParams mlp_init(std::span<const int> layer_sizes,
                       std::span<const Activation> activations, std::uint64_t seed) {
  if (layer_sizes.size() < 2) throw DimensionError("need at least input and output sizes");
  if (activations.size() != layer_sizes.size() - 1)
    throw DimensionError("need one activation per layer");
  for (int s : layer_sizes)
    if (s <= 0) throw DimensionError("layer sizes must be positive");

  Rng rng = Rng::substream(seed, "mlp_init");
  NetworkParams params;
  for (std::size_t k = 0; k + 1 < layer_sizes.size(); ++k) {
    const int in = layer_sizes[k];
    const int out = layer_sizes[k + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    Layer layer;
    layer.weight.resize(out, in);
    // Row-major draw order so the scheme is easy to reproduce elsewhere.
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) layer.weight(r, c) = bound * (2.0 * rng.uniform() - 1.0);
    layer.bias = Vector::Zero(out);
    layer.activation = activations[k];
    params.layers.push_back(std::move(layer));
  }
  return params;
}

namespace {

void activate(Activation act, const Matrix& pre, Matrix& post) {
  switch (act) {
    case Activation::relu: post = pre.cwiseMax(0.0); break;
    case Activation::tanh: post = pre.array().tanh().matrix(); break;
    case Activation::linear: post = pre; break;
  }
}

// delta <- delta * f'(pre), using post where cheaper.
void apply_derivative(Activation act, const Matrix& pre, const Matrix& post, Matrix& delta) {
  switch (act) {
    case Activation::relu:
      delta = (pre.array() > 0.0).select(delta, 0.0);
      break;
    case Activation::tanh:
      delta.array() *= (1.0 - post.array().square());
      break;
    case Activation::linear:
      break;
  }
}

void check_input(const NetworkParams& params, const Matrix& input) {
  if (params.layers.empty()) throw DimensionError("network has no layers");
  if (input.cols() != params.in_dim())
    throw DimensionError("input width " + std::to_string(input.cols()) + " != network input " +
                         std::to_string(params.in_dim()));
}

void backward_impl(const NetworkParams& params, const ForwardCache& cache,
                   const Matrix& output_grads, ParamGrads* pg, Matrix& input_grads,
                   std::vector<Matrix>& delta) {
  const std::size_t L = params.layers.size();
  if (cache.pre.size() != L || cache.post.size() != L)
    throw DimensionError("forward cache does not match network depth");
  if (output_grads.rows() != cache.batch() || output_grads.cols() != params.out_dim())
    throw DimensionError("output gradient shape does not match forward output");

  if (delta.size() != L + 1) delta.resize(L + 1);
  delta[L] = output_grads;
  for (std::size_t k = L; k-- > 0;) {
    const Layer& layer = params.layers[k];
    if (cache.pre[k].cols() != layer.out_dim())
      throw DimensionError("forward cache does not match network parameters");
    Matrix& d = delta[k + 1];
    apply_derivative(layer.activation, cache.pre[k], cache.post[k], d);
    const Matrix& prev = k == 0 ? cache.input : cache.post[k - 1];
    if (pg) {
      pg->weight[k].noalias() = d.transpose() * prev;
      pg->bias[k].noalias() = d.colwise().sum().transpose();
    }
    if (k == 0) {
      input_grads.noalias() = d * layer.weight;
    } else {
      delta[k].noalias() = d * layer.weight;
    }
  }
}

}  // namespace

const Matrix& forward_into(const NetworkParams& params, const Matrix& input,
                           ForwardCache& cache) {
  check_input(params, input);
  if (!input.allFinite()) throw DomainError("non-finite network input");
  cache.input = input;
  cache.pre.resize(params.layers.size());
  cache.post.resize(params.layers.size());
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    const Layer& layer = params.layers[k];
    const Matrix& prev = k == 0 ? cache.input : cache.post[k - 1];
    if (prev.cols() != layer.in_dim()) throw DimensionError("layer dimensions do not chain");
    cache.pre[k].noalias() = prev * layer.weight.transpose();
    cache.pre[k].rowwise() += layer.bias.transpose();
    activate(layer.activation, cache.pre[k], cache.post[k]);
  }
  return cache.post.back();
}

ForwardResult forward(const NetworkParams& params, const Matrix& input) {
  ForwardResult res;
  res.output = forward_into(params, input, res.cache);
  return res;
}

Matrix predict(const NetworkParams& params, const Matrix& input) {
  check_input(params, input);
  Matrix buf[2];
  const Matrix* x = &input;
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    const Layer& layer = params.layers[k];
    Matrix& pre = buf[k % 2];
    pre.noalias() = *x * layer.weight.transpose();
    pre.rowwise() += layer.bias.transpose();
    switch (layer.activation) {
      case Activation::relu: pre = pre.cwiseMax(0.0); break;
      case Activation::tanh: pre = pre.array().tanh().matrix(); break;
      case Activation::linear: break;
    }
    x = &pre;
  }
  return *x;
}

GradBundle backward(const NetworkParams& params, const ForwardCache& cache,
                    const Matrix& output_grads) {
  GradBundle g;
  backward_into(params, cache, output_grads, g, true);
  return g;
}

Matrix backward_input(const NetworkParams& params, const ForwardCache& cache,
                      const Matrix& output_grads) {
  Matrix input;
  std::vector<Matrix> delta;
  backward_impl(params, cache, output_grads, nullptr, input, delta);
  return input;
}

void backward_into(const NetworkParams& params, const ForwardCache& cache,
                   const Matrix& output_grads, GradBundle& out, bool with_params) {
  if (with_params && out.params.weight.size() != params.layers.size())
    out.params = ParamGrads::zeros_like(params);
  backward_impl(params, cache, output_grads, with_params ? &out.params : nullptr, out.input,
                out.scratch);
}

// --- optimizers --------------------------------------------------------------

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::sgd ? "sgd" : "adam";
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw ParseError("unknown optimizer '" + std::string(name) + "'");
}

OptimizerState OptimizerState::make(OptimizerKind kind, const NetworkParams& params) {
  OptimizerState s;
  s.kind = kind;
  if (kind == OptimizerKind::adam) {
    s.first_moment = ParamGrads::zeros_like(params);
    s.second_moment = ParamGrads::zeros_like(params);
  }
  return s;
}

void optimizer_step(NetworkParams& params, const ParamGrads& grads, OptimizerState& state,
                    double lr, Direction direction) {
  if (!(lr > 0.0)) throw DomainError("learning rate must be positive");
  if (grads.weight.size() != params.layers.size()) throw DimensionError("gradient layout mismatch");
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    if (grads.weight[k].rows() != params.layers[k].weight.rows() ||
        grads.weight[k].cols() != params.layers[k].weight.cols() ||
        grads.bias[k].size() != params.layers[k].bias.size())
      throw DimensionError("gradient shape mismatch at layer " + std::to_string(k));
  }
  if (!grads.all_finite()) throw DivergenceError("non-finite gradient; step rejected");

  const double sign = direction == Direction::descend ? -1.0 : 1.0;
  if (state.kind == OptimizerKind::sgd) {
    for (std::size_t k = 0; k < params.layers.size(); ++k) {
      params.layers[k].weight += sign * lr * grads.weight[k];
      params.layers[k].bias += sign * lr * grads.bias[k];
    }
    ++state.step;
    return;
  }

  if (state.first_moment.weight.size() != params.layers.size()) {
    state.first_moment = ParamGrads::zeros_like(params);
    state.second_moment = ParamGrads::zeros_like(params);
  }
  ++state.step;
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const double step_size = sign * lr / c1;
  const double eps = state.epsilon;
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = b1 * m + (1.0 - b1) * g;
    v.array() = b2 * v.array() + (1.0 - b2) * g.array().square();
    param.array() += step_size * m.array() / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    update(params.layers[k].weight, state.first_moment.weight[k], state.second_moment.weight[k],
           grads.weight[k]);
    update(params.layers[k].bias, state.first_moment.bias[k], state.second_moment.bias[k],
           grads.bias[k]);
  }
}

double clip_global_norm(ParamGrads& grads, double max_norm) {
  const double norm = std::sqrt(grads.squared_norm());
  if (norm > max_norm && max_norm > 0.0) grads *= max_norm / norm;
  return norm;
}

NetworkParams polyak_update(const NetworkParams& target, const NetworkParams& online, double tau) {
  NetworkParams out = target;
  polyak_update_inplace(out, online, tau);
  return out;
}

void polyak_update_inplace(NetworkParams& target, const NetworkParams& online, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw DomainError("tau must lie in [0, 1]");
  if (!target.same_shape(online)) throw DimensionError("target and online networks differ in shape");
  if (tau == 1.0) {
    target = online;
    return;
  }
  if (tau == 0.0) return;
  for (std::size_t k = 0; k < target.layers.size(); ++k) {
    target.layers[k].weight = tau * online.layers[k].weight + (1.0 - tau) * target.layers[k].weight;
    target.layers[k].bias = tau * online.layers[k].bias + (1.0 - tau) * target.layers[k].bias;
  }
}

// --- flat views --------------------------------------------------------------

Vector flatten(const NetworkParams& params) {
  Vector flat(params.parameter_count());
  Eigen::Index i = 0;
  for (const auto& l : params.layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) flat[i++] = l.weight(r, c);
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) flat[i++] = l.bias[r];
  }
  return flat;
}

Vector flatten(const ParamGrads& grads) {
  Eigen::Index n = 0;
  for (std::size_t k = 0; k < grads.weight.size(); ++k)
    n += grads.weight[k].size() + grads.bias[k].size();
  Vector flat(n);
  Eigen::Index i = 0;
  for (std::size_t k = 0; k < grads.weight.size(); ++k) {
    const auto& w = grads.weight[k];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat[i++] = w(r, c);
    for (Eigen::Index r = 0; r < grads.bias[k].size(); ++r) flat[i++] = grads.bias[k][r];
  }
  return flat;
}

void unflatten(const Vector& flat, NetworkParams& params) {
  if (flat.size() != params.parameter_count()) throw DimensionError("flat parameter length mismatch");
  Eigen::Index i = 0;
  for (auto& l : params.layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = flat[i++];
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias[r] = flat[i++];
  }
}

// --- normalizer --------------------------------------------------------------

RunningNormalizer::RunningNormalizer(Eigen::Index dim)
    : mean_(Vector::Zero(dim)), m2_(Vector::Zero(dim)) {}

void RunningNormalizer::update(const Vector& sample) {
  if (sample.size() != mean_.size()) throw DimensionError("normalizer dimension mismatch");
  ++count_;
  const Vector d = sample - mean_;
  mean_ += d / static_cast<double>(count_);
  m2_.array() += d.array() * (sample - mean_).array();
}

Vector RunningNormalizer::stddev() const {
  if (count_ < 2) return Vector::Ones(mean_.size());
  return (m2_.array() / static_cast<double>(count_ - 1) + eps_).sqrt().matrix();
}

Vector RunningNormalizer::apply(const Vector& x) const {
  if (x.size() != mean_.size()) throw DimensionError("normalizer dimension mismatch");
  if (count_ < 2) return x;
  return ((x - mean_).array() / stddev().array()).matrix();
}

void RunningNormalizer::apply_rows(Matrix& rows, Eigen::Index first_col) const {
  if (count_ < 2) return;
  const Vector sd = stddev();
  auto block = rows.middleCols(first_col, mean_.size());
  block.rowwise() -= mean_.transpose();
  block.array().rowwise() /= sd.transpose().array();
}

void RunningNormalizer::save(std::ostream& out) const {
  char buf[40];
  out << "normalizer " << mean_.size() << ' ' << count_ << '\n';
  for (Eigen::Index i = 0; i < mean_.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", mean_[i]);
    out << buf << ' ';
    std::snprintf(buf, sizeof buf, "%.17g", m2_[i]);
    out << buf << '\n';
  }
}

RunningNormalizer RunningNormalizer::load(std::istream& in) {
  std::string tag;
  Eigen::Index dim = 0;
  RunningNormalizer n;
  if (!(in >> tag >> dim >> n.count_) || tag != "normalizer" || dim < 0)
    throw ParseError("malformed normalizer header");
  n.mean_.resize(dim);
  n.m2_.resize(dim);
  for (Eigen::Index i = 0; i < dim; ++i)
    if (!(in >> n.mean_[i] >> n.m2_[i])) throw ParseError("truncated normalizer statistics");
  return n;
}

// --- checkpoints ---------------------------------------------------------------

void save_params(std::ostream& out, const NetworkParams& params) {
  char buf[40];
  out << kCheckpointMagic << '\n' << "layers " << params.layers.size() << '\n';
  for (const auto& l : params.layers) {
    out << "layer " << l.in_dim() << ' ' << l.out_dim() << ' ' << to_string(l.activation) << '\n';
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", l.weight(r, c));
        out << (c ? " " : "") << buf;
      }
      out << '\n';
    }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) {
      std::snprintf(buf, sizeof buf, "%.17g", l.bias[r]);
      out << (r ? " " : "") << buf;
    }
    out << '\n';
  }
}

NetworkParams load_params(std::istream& in) {
  std::string magic;
  if (!(in >> magic) || magic != kCheckpointMagic)
    throw ParseError("missing " + std::string(kCheckpointMagic) + " header");
  std::string tag;
  std::size_t count = 0;
  if (!(in >> tag >> count) || tag != "layers") throw ParseError("expected 'layers <count>'");
  NetworkParams params;
  for (std::size_t k = 0; k < count; ++k) {
    Eigen::Index in_dim = 0, out_dim = 0;
    std::string act;
    if (!(in >> tag >> in_dim >> out_dim >> act) || tag != "layer" || in_dim <= 0 || out_dim <= 0)
      throw ParseError("malformed layer header " + std::to_string(k));
    Layer l;
    l.activation = parse_activation(act);
    l.weight.resize(out_dim, in_dim);
    l.bias.resize(out_dim);
    for (Eigen::Index r = 0; r < out_dim; ++r)
      for (Eigen::Index c = 0; c < in_dim; ++c)
        if (!(in >> l.weight(r, c))) throw ParseError("truncated weights in layer " + std::to_string(k));
    for (Eigen::Index r = 0; r < out_dim; ++r)
      if (!(in >> l.bias[r])) throw ParseError("truncated biases in layer " + std::to_string(k));
    params.layers.push_back(std::move(l));
  }
  params.validate();
  return params;
}

void save_params(const std::filesystem::path& path, const NetworkParams& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  save_params(out, params);
  if (!out) throw IoError("write failed: " + path.string());
}

NetworkParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return load_params(in);
}

}  // namespace riskdpg

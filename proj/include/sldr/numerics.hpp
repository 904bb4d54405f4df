#pragma once

// Dense feed-forward networks with exact reverse-mode gradients and Adam.
//
// Vectors are columns; a batch is a matrix with one sample per column. All
// arithmetic is double precision. Networks have exactly three dense layers:
// two ReLU hidden layers and an identity or tanh output layer.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "sldr/errors.hpp"
#include "sldr/rng.hpp"

namespace sldr {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Activation { kIdentity = 0, kRelu = 1, kTanh = 2 };

inline constexpr std::size_t kMlpLayers = 3;

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out

  friend bool operator==(const DenseLayer& a, const DenseLayer& b) {
    return a.weight.rows() == b.weight.rows() &&
           a.weight.cols() == b.weight.cols() && a.weight == b.weight &&
           a.bias.size() == b.bias.size() && a.bias == b.bias;
  }
};

struct MlpParams {
  std::vector<DenseLayer> layers;
  Activation hidden_activation = Activation::kRelu;
  Activation output_activation = Activation::kIdentity;

  int input_dim() const {
    return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols());
  }
  int output_dim() const {
    return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows());
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }

  friend bool operator==(const MlpParams& a, const MlpParams& b) = default;
};

// Per-layer gradients plus the gradient with respect to the input batch.
struct GradientBundle {
  std::vector<DenseLayer> layers;
  Matrix input_grad;  // in x batch
};

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<DenseLayer> first_moment;
  std::vector<DenseLayer> second_moment;
  std::int64_t step_count = 0;
  AdamHyper hyper;

  friend bool operator==(const AdamState& a, const AdamState& b) {
    return a.first_moment == b.first_moment &&
           a.second_moment == b.second_moment &&
           a.step_count == b.step_count &&
           a.hyper.learning_rate == b.hyper.learning_rate &&
           a.hyper.beta1 == b.hyper.beta1 && a.hyper.beta2 == b.hyper.beta2 &&
           a.hyper.epsilon == b.hyper.epsilon;
  }
};

namespace detail {

inline std::string shape_str(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

inline void apply_activation(Activation act, Matrix& z) {
  switch (act) {
    case Activation::kIdentity:
      break;
    case Activation::kRelu:
      z = z.cwiseMax(0.0);
      break;
    case Activation::kTanh:
      z = z.array().tanh().matrix();
      break;
  }
}

// Multiplies `delta` in place by the activation derivative, expressed through
// the post-activation value `out`.
inline void activation_backward(Activation act, const Matrix& out,
                                Matrix& delta) {
  switch (act) {
    case Activation::kIdentity:
      break;
    case Activation::kRelu:
      delta = (out.array() > 0.0).select(delta, 0.0);
      break;
    case Activation::kTanh:
      delta = (delta.array() * (1.0 - out.array().square())).matrix();
      break;
  }
}

inline bool all_finite(const DenseLayer& l) {
  return l.weight.allFinite() && l.bias.allFinite();
}

}  // namespace detail

// Throws ShapeError unless the layer chain is well formed and finite.
inline void validate(const MlpParams& p) {
  if (p.layers.size() != kMlpLayers)
    throw ShapeError("mlp: expected " + std::to_string(kMlpLayers) +
                     " layers, got " + std::to_string(p.layers.size()));
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const auto& l = p.layers[i];
    if (l.bias.size() != l.weight.rows())
      throw ShapeError("mlp: layer " + std::to_string(i) + " bias length " +
                       std::to_string(l.bias.size()) + " vs weight " +
                       detail::shape_str(l.weight.rows(), l.weight.cols()));
    if (i > 0 && l.weight.cols() != p.layers[i - 1].weight.rows())
      throw ShapeError("mlp: layer " + std::to_string(i) + " input " +
                       std::to_string(l.weight.cols()) +
                       " does not chain with previous output " +
                       std::to_string(p.layers[i - 1].weight.rows()));
    if (!detail::all_finite(l))
      throw NumericError("mlp: non-finite entry in layer " + std::to_string(i));
  }
}

inline MlpParams make_mlp(int input_dim, int hidden_dim, int output_dim,
                          Activation output_activation) {
  MlpParams p;
  p.output_activation = output_activation;
  const int dims[] = {input_dim, hidden_dim, hidden_dim, output_dim};
  for (std::size_t i = 0; i < kMlpLayers; ++i) {
    p.layers.push_back(
        {Matrix::Zero(dims[i + 1], dims[i]), Vector::Zero(dims[i + 1])});
  }
  return p;
}

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias.
inline MlpParams init_mlp(int input_dim, int hidden_dim, int output_dim,
                          Activation output_activation, Rng& rng) {
  MlpParams p = make_mlp(input_dim, hidden_dim, output_dim, output_activation);
  for (auto& l : p.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.weight.cols()));
    for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
        l.weight(r, c) = rng.uniform(-bound, bound);
    for (Eigen::Index r = 0; r < l.bias.size(); ++r)
      l.bias(r) = rng.uniform(-bound, bound);
  }
  return p;
}

// Layer activations retained for the backward pass; activations[0] is the
// input batch and activations.back() the network output.
struct ForwardCache {
  std::vector<Matrix> activations;

  const Matrix& output() const { return activations.back(); }
};

inline ForwardCache mlp_forward_batch(const MlpParams& p, const Matrix& input) {
  if (p.layers.empty() || input.rows() != p.input_dim())
    throw ShapeError("mlp_forward: input has " + std::to_string(input.rows()) +
                     " rows, network expects " + std::to_string(p.input_dim()));
  ForwardCache cache;
  cache.activations.reserve(p.layers.size() + 1);
  cache.activations.push_back(input);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const auto& l = p.layers[i];
    Matrix z = l.weight * cache.activations.back();
    z.colwise() += l.bias;
    detail::apply_activation(
        i + 1 == p.layers.size() ? p.output_activation : p.hidden_activation, z);
    cache.activations.push_back(std::move(z));
  }
  return cache;
}

inline Matrix mlp_eval_batch(const MlpParams& p, const Matrix& input) {
  return mlp_forward_batch(p, input).activations.back();
}

inline Vector mlp_forward(const MlpParams& p, const Vector& input) {
  return mlp_forward_batch(p, Matrix(input)).activations.back().col(0);
}

// Gradients of sum over the batch of <output, upstream>.
inline GradientBundle mlp_backward_batch(const MlpParams& p,
                                         const ForwardCache& cache,
                                         const Matrix& upstream) {
  const Matrix& out = cache.activations.back();
  if (upstream.rows() != out.rows() || upstream.cols() != out.cols())
    throw ShapeError("mlp_backward: upstream " +
                     detail::shape_str(upstream.rows(), upstream.cols()) +
                     " vs output " + detail::shape_str(out.rows(), out.cols()));
  GradientBundle g;
  g.layers.resize(p.layers.size());
  Matrix delta = upstream;
  for (std::size_t i = p.layers.size(); i-- > 0;) {
    detail::activation_backward(
        i + 1 == p.layers.size() ? p.output_activation : p.hidden_activation,
        cache.activations[i + 1], delta);
    const Matrix& in = cache.activations[i];
    g.layers[i].weight = delta * in.transpose();
    g.layers[i].bias = delta.rowwise().sum();
    delta = p.layers[i].weight.transpose() * delta;
  }
  g.input_grad = std::move(delta);
  return g;
}

inline GradientBundle mlp_backward(const MlpParams& p, const Vector& input,
                                   const Vector& upstream) {
  if (upstream.size() != p.output_dim())
    throw ShapeError("mlp_backward: upstream length " +
                     std::to_string(upstream.size()) + " vs output " +
                     std::to_string(p.output_dim()));
  const ForwardCache cache = mlp_forward_batch(p, Matrix(input));
  return mlp_backward_batch(p, cache, Matrix(upstream));
}

inline AdamState make_adam(const MlpParams& p, AdamHyper hyper = {}) {
  AdamState s;
  s.hyper = hyper;
  for (const auto& l : p.layers) {
    DenseLayer zero{Matrix::Zero(l.weight.rows(), l.weight.cols()),
                    Vector::Zero(l.bias.size())};
    s.first_moment.push_back(zero);
    s.second_moment.push_back(std::move(zero));
  }
  return s;
}

namespace detail {

inline void adam_update_block(Eigen::Ref<Matrix> param,
                              const Eigen::Ref<const Matrix>& grad,
                              Eigen::Ref<Matrix> m, Eigen::Ref<Matrix> v,
                              const AdamHyper& h, double bc1, double bc2) {
  for (Eigen::Index c = 0; c < param.cols(); ++c) {
    for (Eigen::Index r = 0; r < param.rows(); ++r) {
      const double g = grad(r, c);
      double& mi = m(r, c);
      double& vi = v(r, c);
      mi = h.beta1 * mi + (1.0 - h.beta1) * g;
      vi = h.beta2 * vi + (1.0 - h.beta2) * g * g;
      param(r, c) -= h.learning_rate * (mi / bc1) / (std::sqrt(vi / bc2) + h.epsilon);
    }
  }
}

}  // namespace detail

// In-place bias-corrected Adam step; the functional adam_step wraps this.
inline void adam_apply(MlpParams& params, const GradientBundle& grads,
                       AdamState& state) {
  if (grads.layers.size() != params.layers.size() ||
      state.first_moment.size() != params.layers.size())
    throw ShapeError("adam_step: layer count mismatch");
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& p = params.layers[i];
    const auto& g = grads.layers[i];
    if (g.weight.rows() != p.weight.rows() || g.weight.cols() != p.weight.cols() ||
        g.bias.size() != p.bias.size() ||
        state.first_moment[i].weight.rows() != p.weight.rows() ||
        state.first_moment[i].weight.cols() != p.weight.cols())
      throw ShapeError("adam_step: shape mismatch in layer " + std::to_string(i));
    if (!detail::all_finite(g))
      throw NumericError("adam_step: non-finite gradient in layer " +
                         std::to_string(i));
  }
  const AdamHyper& h = state.hyper;
  const auto t = static_cast<double>(state.step_count + 1);
  const double bc1 = 1.0 - std::pow(h.beta1, t);
  const double bc2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    auto& p = params.layers[i];
    const auto& g = grads.layers[i];
    detail::adam_update_block(p.weight, g.weight, state.first_moment[i].weight,
                              state.second_moment[i].weight, h, bc1, bc2);
    detail::adam_update_block(p.bias, g.bias, state.first_moment[i].bias,
                              state.second_moment[i].bias, h, bc1, bc2);
  }
  ++state.step_count;
}

inline std::pair<MlpParams, AdamState> adam_step(const MlpParams& params,
                                                 const GradientBundle& grads,
                                                 const AdamState& state) {
  const AdamHyper& h = state.hyper;
  if (!(h.learning_rate > 0.0) || !(h.epsilon > 0.0) || !(h.beta1 > 0.0) ||
      !(h.beta1 < 1.0) || !(h.beta2 > 0.0) || !(h.beta2 < 1.0))
    throw ArgumentError("adam_step: invalid hyperparameters");
  std::pair<MlpParams, AdamState> out{params, state};
  adam_apply(out.first, grads, out.second);
  return out;
}

// Polyak averaging: tau * online + (1 - tau) * target, entrywise.
inline void soft_update_inplace(MlpParams& target, const MlpParams& online,
                                double tau) {
  if (!(tau >= 0.0 && tau <= 1.0))
    throw ArgumentError("soft_update: tau must lie in [0, 1], got " +
                        std::to_string(tau));
  if (target.layers.size() != online.layers.size())
    throw ShapeError("soft_update: layer count mismatch");
  for (std::size_t i = 0; i < target.layers.size(); ++i) {
    auto& t = target.layers[i];
    const auto& o = online.layers[i];
    if (t.weight.rows() != o.weight.rows() || t.weight.cols() != o.weight.cols() ||
        t.bias.size() != o.bias.size())
      throw ShapeError("soft_update: shape mismatch in layer " +
                       std::to_string(i));
    t.weight = tau * o.weight + (1.0 - tau) * t.weight;
    t.bias = tau * o.bias + (1.0 - tau) * t.bias;
  }
}

inline MlpParams soft_update(const MlpParams& target, const MlpParams& online,
                             double tau) {
  MlpParams out = target;
  soft_update_inplace(out, online, tau);
  return out;
}

// Adds `b` scaled by `scale` into `a` layer by layer.
inline void accumulate(GradientBundle& a, const GradientBundle& b,
                       double scale = 1.0) {
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    a.layers[i].weight += scale * b.layers[i].weight;
    a.layers[i].bias += scale * b.layers[i].bias;
  }
}

}  // namespace sldr

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mql {

enum class Activation { relu, identity };

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// Dense feed-forward network. Layer k maps dim(k) -> dim(k+1) with
/// weights[k] of shape (out x in).
template <typename Scalar>
struct Mlp {
  std::vector<MatrixX<Scalar>> weights;
  std::vector<VectorX<Scalar>> biases;
  std::vector<Activation> activations;

  Eigen::Index num_layers() const { return static_cast<Eigen::Index>(weights.size()); }
  Eigen::Index input_dim() const { return weights.front().cols(); }
  Eigen::Index output_dim() const { return weights.back().rows(); }

  std::vector<Eigen::Index> layer_sizes() const {
    std::vector<Eigen::Index> sizes{input_dim()};
    for (const auto& w : weights) sizes.push_back(w.rows());
    return sizes;
  }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) n += weights[k].size() + biases[k].size();
    return n;
  }
};

/// Cotangents of an Mlp; shape-congruent with the parameters it came from.
template <typename Scalar>
struct MlpGrad {
  std::vector<MatrixX<Scalar>> weights;
  std::vector<VectorX<Scalar>> biases;

  static MlpGrad zeros_like(const Mlp<Scalar>& params) {
    MlpGrad g;
    for (std::size_t k = 0; k < params.weights.size(); ++k) {
      g.weights.push_back(MatrixX<Scalar>::Zero(params.weights[k].rows(), params.weights[k].cols()));
      g.biases.push_back(VectorX<Scalar>::Zero(params.biases[k].size()));
    }
    return g;
  }

  MlpGrad& operator+=(const MlpGrad& other) {
    for (std::size_t k = 0; k < weights.size(); ++k) {
      weights[k] += other.weights[k];
      biases[k] += other.biases[k];
    }
    return *this;
  }

  MlpGrad& operator*=(Scalar s) {
    for (std::size_t k = 0; k < weights.size(); ++k) {
      weights[k] *= s;
      biases[k] *= s;
    }
    return *this;
  }

  bool all_finite() const {
    for (std::size_t k = 0; k < weights.size(); ++k)
      if (!weights[k].allFinite() || !biases[k].allFinite()) return false;
    return true;
  }
};

/// Forward cache. post[0] is the input batch; post[k+1] = act(pre[k]).
/// Columns are samples.
template <typename Scalar>
struct Activations {
  std::vector<MatrixX<Scalar>> pre;
  std::vector<MatrixX<Scalar>> post;

  const MatrixX<Scalar>& output() const { return post.back(); }
};

template <typename Scalar>
struct MlpBackward {
  MlpGrad<Scalar> grad;
  MatrixX<Scalar> input_grad;
};

/// ReLU on every hidden layer and identity on the output layer.
inline std::vector<Activation> regression_activations(std::size_t num_layers) {
  std::vector<Activation> acts(num_layers, Activation::relu);
  if (!acts.empty()) acts.back() = Activation::identity;
  return acts;
}

/// ReLU everywhere; used for feature trunks whose output feeds further layers.
inline std::vector<Activation> feature_activations(std::size_t num_layers) {
  return std::vector<Activation>(num_layers, Activation::relu);
}

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero biases.
template <typename Scalar = double>
Mlp<Scalar> mlp_init(std::span<const Eigen::Index> layer_sizes, std::span<const Activation> activations,
                     std::uint64_t seed) {
  if (layer_sizes.size() < 2) throw std::invalid_argument("mlp_init: need at least two layer sizes");
  for (auto s : layer_sizes)
    if (s <= 0) throw std::invalid_argument("mlp_init: layer sizes must be positive");
  if (activations.size() != layer_sizes.size() - 1)
    throw std::invalid_argument("mlp_init: one activation per layer required");

  std::mt19937_64 rng(seed);
  Mlp<Scalar> params;
  for (std::size_t k = 0; k + 1 < layer_sizes.size(); ++k) {
    const auto fan_in = layer_sizes[k];
    const Scalar bound = Scalar(1) / std::sqrt(static_cast<Scalar>(fan_in));
    std::uniform_real_distribution<Scalar> dist(-bound, bound);
    MatrixX<Scalar> w(layer_sizes[k + 1], fan_in);
    // Column-major fill order is part of the determinism contract.
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = dist(rng);
    params.weights.push_back(std::move(w));
    params.biases.push_back(VectorX<Scalar>::Zero(layer_sizes[k + 1]));
    params.activations.push_back(activations[k]);
  }
  return params;
}

template <typename Scalar = double>
Mlp<Scalar> mlp_init(std::initializer_list<Eigen::Index> layer_sizes, std::uint64_t seed) {
  std::vector<Eigen::Index> sizes(layer_sizes);
  const auto acts = regression_activations(sizes.size() < 2 ? 0 : sizes.size() - 1);
  return mlp_init<Scalar>(sizes, acts, seed);
}

template <typename Scalar, typename Derived>
Activations<Scalar> mlp_forward(const Mlp<Scalar>& params, const Eigen::MatrixBase<Derived>& input) {
  if (input.rows() != params.input_dim())
    throw std::invalid_argument("mlp_forward: input has " + std::to_string(input.rows()) + " rows, expected " +
                                std::to_string(params.input_dim()));
  Activations<Scalar> acts;
  acts.pre.reserve(params.weights.size());
  acts.post.reserve(params.weights.size() + 1);
  acts.post.emplace_back(input);
  for (std::size_t k = 0; k < params.weights.size(); ++k) {
    MatrixX<Scalar> z = params.weights[k] * acts.post.back();
    z.colwise() += params.biases[k];
    if (params.activations[k] == Activation::relu)
      acts.post.push_back(z.cwiseMax(Scalar(0)));
    else
      acts.post.push_back(z);
    acts.pre.push_back(std::move(z));
  }
  return acts;
}

/// Output only; skips caching pre-activations.
template <typename Scalar, typename Derived>
MatrixX<Scalar> mlp_predict(const Mlp<Scalar>& params, const Eigen::MatrixBase<Derived>& input) {
  if (input.rows() != params.input_dim()) throw std::invalid_argument("mlp_predict: input dimension mismatch");
  MatrixX<Scalar> h = input;
  for (std::size_t k = 0; k < params.weights.size(); ++k) {
    MatrixX<Scalar> z = params.weights[k] * h;
    z.colwise() += params.biases[k];
    if (params.activations[k] == Activation::relu) z = z.cwiseMax(Scalar(0));
    h = std::move(z);
  }
  return h;
}

/// Reverse-mode gradients of sum(output_grad .* output), summed over the
/// batch columns. ReLU subgradient at 0 is 0.
template <typename Scalar, typename Derived>
MlpBackward<Scalar> mlp_backward(const Mlp<Scalar>& params, const Activations<Scalar>& acts,
                                 const Eigen::MatrixBase<Derived>& output_grad) {
  if (acts.post.size() != params.weights.size() + 1)
    throw std::invalid_argument("mlp_backward: activations do not belong to these parameters");
  if (output_grad.rows() != params.output_dim() || output_grad.cols() != acts.output().cols())
    throw std::invalid_argument("mlp_backward: output gradient shape mismatch");

  MlpBackward<Scalar> out;
  out.grad.weights.resize(params.weights.size());
  out.grad.biases.resize(params.weights.size());
  MatrixX<Scalar> delta = output_grad;
  for (std::size_t k = params.weights.size(); k-- > 0;) {
    if (params.activations[k] == Activation::relu)
      delta = (acts.pre[k].array() > Scalar(0)).select(delta, Scalar(0));
    out.grad.weights[k].noalias() = delta * acts.post[k].transpose();
    out.grad.biases[k] = delta.rowwise().sum();
    MatrixX<Scalar> next = params.weights[k].transpose() * delta;
    delta = std::move(next);
  }
  out.input_grad = std::move(delta);
  return out;
}

/// ReLU on/off pattern of a forward pass; differs between two passes iff a
/// perturbation crossed a kink.
template <typename Scalar>
std::vector<bool> relu_pattern(const Mlp<Scalar>& params, const Activations<Scalar>& acts) {
  std::vector<bool> pattern;
  for (std::size_t k = 0; k < params.weights.size(); ++k) {
    if (params.activations[k] != Activation::relu) continue;
    const auto& z = acts.pre[k];
    for (Eigen::Index i = 0; i < z.size(); ++i) pattern.push_back(z.data()[i] > Scalar(0));
  }
  return pattern;
}

/// Visits every scalar parameter in a fixed order (layer, weights col-major, then bias).
template <typename Scalar, typename Fn>
void for_each_parameter(Mlp<Scalar>& params, Fn&& fn) {
  for (std::size_t k = 0; k < params.weights.size(); ++k) {
    for (Eigen::Index i = 0; i < params.weights[k].size(); ++i) fn(params.weights[k].data()[i]);
    for (Eigen::Index i = 0; i < params.biases[k].size(); ++i) fn(params.biases[k].data()[i]);
  }
}

template <typename Scalar, typename Fn>
void for_each_parameter(const MlpGrad<Scalar>& grad, Fn&& fn) {
  for (std::size_t k = 0; k < grad.weights.size(); ++k) {
    for (Eigen::Index i = 0; i < grad.weights[k].size(); ++i) fn(grad.weights[k].data()[i]);
    for (Eigen::Index i = 0; i < grad.biases[k].size(); ++i) fn(grad.biases[k].data()[i]);
  }
}

/// target <- tau * source + (1 - tau) * target
template <typename Scalar>
void soft_update(const Mlp<Scalar>& source, Mlp<Scalar>& target, Scalar tau) {
  if (source.weights.size() != target.weights.size()) throw std::invalid_argument("soft_update: layer count mismatch");
  for (std::size_t k = 0; k < source.weights.size(); ++k) {
    if (source.weights[k].rows() != target.weights[k].rows() || source.weights[k].cols() != target.weights[k].cols())
      throw std::invalid_argument("soft_update: shape mismatch");
    if (tau == Scalar(1)) {
      target.weights[k] = source.weights[k];
      target.biases[k] = source.biases[k];
    } else {
      target.weights[k] = tau * source.weights[k] + (Scalar(1) - tau) * target.weights[k];
      target.biases[k] = tau * source.biases[k] + (Scalar(1) - tau) * target.biases[k];
    }
  }
}

}  // namespace mql

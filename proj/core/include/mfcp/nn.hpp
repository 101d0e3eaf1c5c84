#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfcp/linalg.hpp"

namespace mfcp::nn {

using linalg::Matrix;

enum class Activation { Relu, Identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct DenseLayer {
  Matrix weights;               // out x in
  std::vector<double> biases;   // out
  Activation activation = Activation::Identity;
  bool trainable = true;

  std::size_t in() const noexcept { return weights.cols(); }
  std::size_t out() const noexcept { return weights.rows(); }
  std::size_t parameter_count() const noexcept { return weights.size() + biases.size(); }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Per-layer activations of a batched forward pass. Row i of every matrix
/// belongs to sample i.
struct ForwardCache {
  Matrix input;
  std::vector<Matrix> pre;    // z = a_prev W^T + b
  std::vector<Matrix> post;   // a = act(z)

  const Matrix& output() const { return post.back(); }
};

/// Parameter gradients, one entry per layer. Frozen layers carry empty
/// matrices.
struct Gradients {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
  Matrix input;   // d loss / d input, filled when requested

  /// Flattens trainable-layer gradients in the same order as
  /// Mlp::trainable_parameters().
  std::vector<double> flatten() const;
};

/// Fully connected feed-forward network.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers);

  /// Builds [dims[0] -> dims[1] -> ... -> dims.back()] with `hidden` on all
  /// but the last layer and `output` on the last. ReLU layers get He-uniform
  /// weights, identity layers Xavier-uniform; biases start at zero.
  static Mlp build(std::span<const std::size_t> dims, Activation hidden, Activation output,
                   std::uint64_t seed);

  std::size_t input_size() const;
  std::size_t output_size() const;
  std::size_t depth() const noexcept { return layers_.size(); }
  bool empty() const noexcept { return layers_.empty(); }

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  const DenseLayer& layer(std::size_t i) const { return layers_.at(i); }

  std::vector<bool> trainable_mask() const;
  void set_trainable(bool trainable);
  void set_trainable(std::size_t layer, bool trainable);

  std::size_t trainable_parameter_count() const;
  std::vector<double> trainable_parameters() const;
  /// Writes `values` back into the trainable layers. Throws NumericError if
  /// any value is not finite.
  void set_trainable_parameters(std::span<const double> values);
  /// Single entry of the trainable_parameters() vector.
  double trainable_parameter(std::size_t index) const;
  void set_trainable_parameter(std::size_t index, double value);

  /// Layers [begin, end) as a new network.
  Mlp slice(std::size_t begin, std::size_t end) const;
  /// This network followed by `next`.
  Mlp then(const Mlp& next) const;

  /// Batched forward pass; rows of `x` are samples.
  ForwardCache forward(const Matrix& x) const;
  std::vector<double> forward(std::span<const double> x) const;
  Matrix predict(const Matrix& x) const { return forward(x).output(); }

  /// Back-propagates `grad_out` (d loss / d output, same shape as the cached
  /// output). Frozen layers pass the upstream gradient through without
  /// emitting parameter gradients. With `want_input_grad` false, propagation
  /// stops below the lowest trainable layer.
  Gradients backward(const ForwardCache& cache, const Matrix& grad_out,
                     bool want_input_grad = true) const;

  /// FNV-style digest of all parameters; equal digests mean bit-equal
  /// parameters for practical purposes.
  std::uint64_t parameter_hash() const;

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  std::vector<DenseLayer> layers_;
};

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Mean of squared differences and its gradient 2 (pred - target) / len.
LossResult mse_loss(std::span<const double> pred, std::span<const double> target);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

/// Adam moments for a flat parameter vector.
class AdamState {
 public:
  AdamState(AdamConfig config, std::size_t n_params);

  /// One bias-corrected Adam update of `params` in place; t advances by one.
  void step(std::span<double> params, std::span<const double> grads);

  const AdamConfig& config() const noexcept { return config_; }
  std::uint64_t t() const noexcept { return t_; }
  std::span<const double> m() const noexcept { return m_; }
  std::span<const double> v() const noexcept { return v_; }

 private:
  AdamConfig config_;
  std::uint64_t t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

/// Held-out set watched during training for early stopping.
struct Monitor {
  const Matrix* inputs = nullptr;
  const Matrix* targets = nullptr;
  std::size_t patience = 100;
};

struct TrainOptions {
  std::size_t epochs = 1;          // hard cap on optimizer steps
  AdamConfig adam{};
  std::optional<Monitor> monitor;  // enables early stopping
  /// Called after each epoch with (epoch, train loss, monitor loss or NaN).
  std::function<void(std::size_t, double, double)> on_epoch;
};

struct TrainHistory {
  std::vector<double> train_loss;    // one entry per executed epoch
  std::vector<double> monitor_loss;  // monitor loss after each epoch
  double initial_monitor_loss = 0.0;
  std::size_t best_epoch = 0;        // 0 = initial weights were best
  double best_monitor_loss = 0.0;
  bool stopped_early = false;
};

/// Full-batch MSE training with Adam. With a monitor, training halts once
/// `patience` epochs pass without the monitor loss dropping below the best
/// seen minus 1e-12, and the best weights (possibly the initial ones) are
/// restored. Throws ValidationError for epochs == 0 or shape mismatch and
/// NumericError (with the epoch index) on a non-finite loss.
TrainHistory train(Mlp& net, const Matrix& inputs, const Matrix& targets,
                   const TrainOptions& options);

/// Mean squared error of the network over a batch.
double evaluate_mse(const Mlp& net, const Matrix& inputs, const Matrix& targets);

inline constexpr int kModelFormatVersion = 1;

nlohmann::json to_json(const Mlp& net, std::uint64_t seed = 0);
/// Parses a document written by to_json; `seed` receives the stored seed.
Mlp mlp_from_json(const nlohmann::json& doc, std::uint64_t* seed = nullptr);

}  // namespace mfcp::nn

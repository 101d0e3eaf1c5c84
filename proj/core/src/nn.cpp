#include "mfcp/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <string>

#include "mfcp/errors.hpp"
#include "mfcp/rng.hpp"

namespace mfcp::nn {

std::string to_string(Activation a) {
  return a == Activation::Relu ? "relu" : "identity";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "identity") return Activation::Identity;
  throw ValidationError("unknown activation '" + s + "'");
}

std::vector<double> Gradients::flatten() const {
  std::vector<double> out;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].empty() && biases[l].empty()) continue;
    out.insert(out.end(), weights[l].data().begin(), weights[l].data().end());
    out.insert(out.end(), biases[l].begin(), biases[l].end());
  }
  return out;
}

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.in() == 0 || layer.out() == 0)
      throw ValidationError("Mlp: layer " + std::to_string(l) + " has a zero dimension");
    if (layer.biases.size() != layer.out())
      throw ValidationError("Mlp: layer " + std::to_string(l) + " bias length mismatch");
    if (l > 0 && layers_[l - 1].out() != layer.in())
      throw ValidationError("Mlp: layer " + std::to_string(l) + " input " +
                            std::to_string(layer.in()) + " does not chain with previous output " +
                            std::to_string(layers_[l - 1].out()));
  }
}

Mlp Mlp::build(std::span<const std::size_t> dims, Activation hidden, Activation output,
               std::uint64_t seed) {
  if (dims.size() < 2) throw ValidationError("Mlp::build: need at least input and output sizes");
  Engine rng = make_engine(seed);
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t in = dims[l];
    const std::size_t out = dims[l + 1];
    if (in == 0 || out == 0) throw ValidationError("Mlp::build: zero layer width");
    DenseLayer layer;
    layer.activation = (l + 2 == dims.size()) ? output : hidden;
    const double limit = layer.activation == Activation::Relu
                             ? std::sqrt(6.0 / static_cast<double>(in))
                             : std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    std::vector<double> w(out * in);
    for (double& v : w) v = dist(rng);
    layer.weights = Matrix(out, in, std::move(w));
    layer.biases.assign(out, 0.0);
    layers.push_back(std::move(layer));
  }
  return Mlp(std::move(layers));
}

std::size_t Mlp::input_size() const {
  if (layers_.empty()) throw ValidationError("Mlp: empty network");
  return layers_.front().in();
}

std::size_t Mlp::output_size() const {
  if (layers_.empty()) throw ValidationError("Mlp: empty network");
  return layers_.back().out();
}

std::vector<bool> Mlp::trainable_mask() const {
  std::vector<bool> mask;
  for (const auto& l : layers_) mask.push_back(l.trainable);
  return mask;
}

void Mlp::set_trainable(bool trainable) {
  for (auto& l : layers_) l.trainable = trainable;
}

void Mlp::set_trainable(std::size_t layer, bool trainable) {
  layers_.at(layer).trainable = trainable;
}

std::size_t Mlp::trainable_parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_)
    if (l.trainable) n += l.parameter_count();
  return n;
}

std::vector<double> Mlp::trainable_parameters() const {
  std::vector<double> out;
  out.reserve(trainable_parameter_count());
  for (const auto& l : layers_) {
    if (!l.trainable) continue;
    out.insert(out.end(), l.weights.data().begin(), l.weights.data().end());
    out.insert(out.end(), l.biases.begin(), l.biases.end());
  }
  return out;
}

void Mlp::set_trainable_parameters(std::span<const double> values) {
  if (values.size() != trainable_parameter_count())
    throw ValidationError("Mlp: trainable parameter count mismatch");
  for (double v : values)
    if (!std::isfinite(v)) throw NumericError("Mlp: non-finite parameter after update");
  std::size_t pos = 0;
  for (auto& l : layers_) {
    if (!l.trainable) continue;
    auto w = l.weights.data();
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos), w.size(), w.begin());
    pos += w.size();
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(pos), l.biases.size(),
                l.biases.begin());
    pos += l.biases.size();
  }
}

namespace {

// Address of a trainable-parameter index; offsets past a layer's weights
// address its biases.
template <typename Layers>
auto locate(Layers& layers, std::size_t index) -> decltype(&layers.front().biases[0]) {
  for (auto& l : layers) {
    if (!l.trainable) continue;
    if (index < l.weights.size()) return &l.weights.data()[index];
    index -= l.weights.size();
    if (index < l.biases.size()) return &l.biases[index];
    index -= l.biases.size();
  }
  throw ValidationError("Mlp: trainable parameter index out of range");
}

}  // namespace

double Mlp::trainable_parameter(std::size_t index) const { return *locate(layers_, index); }

void Mlp::set_trainable_parameter(std::size_t index, double value) {
  if (!std::isfinite(value)) throw NumericError("Mlp: non-finite parameter");
  *locate(layers_, index) = value;
}

Mlp Mlp::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > layers_.size()) throw ValidationError("Mlp::slice: bad range");
  return Mlp(std::vector<DenseLayer>(layers_.begin() + static_cast<std::ptrdiff_t>(begin),
                                     layers_.begin() + static_cast<std::ptrdiff_t>(end)));
}

Mlp Mlp::then(const Mlp& next) const {
  std::vector<DenseLayer> layers = layers_;
  layers.insert(layers.end(), next.layers_.begin(), next.layers_.end());
  return Mlp(std::move(layers));
}

namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
#pragma omp simd reduction(+ : s)
  for (std::size_t k = 0; k < n; ++k) s += a[k] * b[k];
  return s;
}

// z = a W^T + b. Samples are processed four at a time so each weight row is
// streamed once per block.
void affine(const Matrix& a, const DenseLayer& layer, Matrix& z) {
  const std::size_t batch = a.rows();
  const std::size_t in = layer.in();
  std::size_t i = 0;
  for (; i + 4 <= batch; i += 4) {
    const double* a0 = a.row(i).data();
    const double* a1 = a.row(i + 1).data();
    const double* a2 = a.row(i + 2).data();
    const double* a3 = a.row(i + 3).data();
    for (std::size_t o = 0; o < layer.out(); ++o) {
      const double* w = layer.weights.row(o).data();
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
#pragma omp simd reduction(+ : s0, s1, s2, s3)
      for (std::size_t k = 0; k < in; ++k) {
        s0 += a0[k] * w[k];
        s1 += a1[k] * w[k];
        s2 += a2[k] * w[k];
        s3 += a3[k] * w[k];
      }
      z(i, o) = layer.biases[o] + s0;
      z(i + 1, o) = layer.biases[o] + s1;
      z(i + 2, o) = layer.biases[o] + s2;
      z(i + 3, o) = layer.biases[o] + s3;
    }
  }
  for (; i < batch; ++i)
    for (std::size_t o = 0; o < layer.out(); ++o)
      z(i, o) = layer.biases[o] + dot(a.row(i).data(), layer.weights.row(o).data(), in);
}

}  // namespace

ForwardCache Mlp::forward(const Matrix& x) const {
  if (layers_.empty()) throw ValidationError("Mlp::forward: empty network");
  if (x.cols() != input_size())
    throw ValidationError("Mlp::forward: input has " + std::to_string(x.cols()) +
                          " features, network expects " + std::to_string(input_size()));
  ForwardCache cache;
  cache.input = x;
  cache.pre.reserve(layers_.size());
  cache.post.reserve(layers_.size());
  const std::size_t batch = x.rows();
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DenseLayer& layer = layers_[l];
    const Matrix& a = l == 0 ? cache.input : cache.post[l - 1];
    Matrix z(batch, layer.out());
    affine(a, layer, z);
    Matrix act = z;
    if (layer.activation == Activation::Relu)
      for (double& v : act.data()) v = v > 0.0 ? v : 0.0;
    cache.pre.push_back(std::move(z));
    cache.post.push_back(std::move(act));
  }
  return cache;
}

std::vector<double> Mlp::forward(std::span<const double> x) const {
  Matrix in(1, x.size(), std::vector<double>(x.begin(), x.end()));
  const ForwardCache cache = forward(in);
  const auto out = cache.output().row(0);
  return {out.begin(), out.end()};
}

Gradients Mlp::backward(const ForwardCache& cache, const Matrix& grad_out,
                        bool want_input_grad) const {
  if (cache.post.size() != layers_.size() || cache.pre.size() != layers_.size())
    throw ValidationError("Mlp::backward: cache does not match network depth");
  const std::size_t batch = cache.input.rows();
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (cache.pre[l].rows() != batch || cache.pre[l].cols() != layers_[l].out())
      throw ValidationError("Mlp::backward: stale cache for layer " + std::to_string(l));
  }
  if (grad_out.rows() != batch || grad_out.cols() != output_size())
    throw ValidationError("Mlp::backward: gradient shape does not match output");

  Gradients g;
  g.weights.resize(layers_.size());
  g.biases.resize(layers_.size());

  std::size_t lowest = layers_.size();
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].trainable) {
      lowest = l;
      break;
    }
  }
  const std::size_t stop = want_input_grad ? 0 : lowest;

  Matrix upstream = grad_out;
  for (std::size_t l = layers_.size(); l-- > stop;) {
    const DenseLayer& layer = layers_[l];
    Matrix dz = std::move(upstream);
    if (layer.activation == Activation::Relu) {
      const auto z = cache.pre[l].data();
      auto d = dz.data();
      for (std::size_t i = 0; i < d.size(); ++i)
        if (z[i] <= 0.0) d[i] = 0.0;
    }
    const Matrix& a = l == 0 ? cache.input : cache.post[l - 1];

    if (layer.trainable) {
      Matrix dw(layer.out(), layer.in());
      std::vector<double> db(layer.out(), 0.0);
      for (std::size_t i = 0; i < batch; ++i) {
        auto dzi = dz.row(i);
        auto ai = a.row(i);
        for (std::size_t o = 0; o < layer.out(); ++o) {
          const double d = dzi[o];
          if (d == 0.0) continue;
          db[o] += d;
          auto dwo = dw.row(o);
          for (std::size_t k = 0; k < layer.in(); ++k) dwo[k] += d * ai[k];
        }
      }
      g.weights[l] = std::move(dw);
      g.biases[l] = std::move(db);
    }

    if (l == stop && !(want_input_grad && l == 0)) break;
    Matrix da(batch, layer.in());
    for (std::size_t i = 0; i < batch; ++i) {
      auto dzi = dz.row(i);
      auto dai = da.row(i);
      for (std::size_t o = 0; o < layer.out(); ++o) {
        const double d = dzi[o];
        if (d == 0.0) continue;
        auto wo = layer.weights.row(o);
        for (std::size_t k = 0; k < layer.in(); ++k) dai[k] += d * wo[k];
      }
    }
    upstream = std::move(da);
  }
  if (want_input_grad) g.input = std::move(upstream);
  return g;
}

std::uint64_t Mlp::parameter_hash() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& l : layers_) {
    const std::uint64_t dims[2] = {l.out(), l.in()};
    mix(dims, sizeof dims);
    mix(l.weights.data().data(), l.weights.size() * sizeof(double));
    mix(l.biases.data(), l.biases.size() * sizeof(double));
  }
  return h;
}

LossResult mse_loss(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size())
    throw ValidationError("mse_loss: prediction and target lengths differ");
  if (pred.empty()) throw ValidationError("mse_loss: empty input");
  LossResult out;
  out.grad.resize(pred.size());
  const double n = static_cast<double>(pred.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    sum += d * d;
    out.grad[i] = 2.0 * d / n;
  }
  out.loss = sum / n;
  return out;
}

AdamState::AdamState(AdamConfig config, std::size_t n_params)
    : config_(config), m_(n_params, 0.0), v_(n_params, 0.0) {
  if (!(config_.lr > 0.0) || !(config_.beta1 >= 0.0 && config_.beta1 < 1.0) ||
      !(config_.beta2 >= 0.0 && config_.beta2 < 1.0) || !(config_.eps > 0.0))
    throw ValidationError("AdamState: invalid hyperparameters");
}

void AdamState::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw ValidationError("AdamState::step: parameter/gradient size mismatch");
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g * g;
    const double m_hat = m_[i] / c1;
    const double v_hat = v_[i] / c2;
    params[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
  }
}

namespace {

void check_batch(const Mlp& net, const Matrix& inputs, const Matrix& targets,
                 const char* what) {
  if (inputs.rows() != targets.rows())
    throw ValidationError(std::string(what) + ": input and target sample counts differ");
  if (inputs.rows() == 0) throw ValidationError(std::string(what) + ": empty batch");
  if (inputs.cols() != net.input_size() || targets.cols() != net.output_size())
    throw ValidationError(std::string(what) + ": batch shape does not match network");
}

}  // namespace

double evaluate_mse(const Mlp& net, const Matrix& inputs, const Matrix& targets) {
  check_batch(net, inputs, targets, "evaluate_mse");
  const Matrix out = net.predict(inputs);
  return mse_loss(out.data(), targets.data()).loss;
}

TrainHistory train(Mlp& net, const Matrix& inputs, const Matrix& targets,
                   const TrainOptions& options) {
  if (options.epochs == 0) throw ValidationError("train: epochs must be at least 1");
  check_batch(net, inputs, targets, "train");
  const Monitor* monitor = options.monitor ? &*options.monitor : nullptr;
  if (monitor) {
    if (!monitor->inputs || !monitor->targets)
      throw ValidationError("train: monitor without data");
    check_batch(net, *monitor->inputs, *monitor->targets, "train monitor");
  }

  TrainHistory history;
  AdamState adam(options.adam, net.trainable_parameter_count());
  std::vector<double> params = net.trainable_parameters();
  std::vector<double> best_params;
  if (monitor) {
    history.initial_monitor_loss = evaluate_mse(net, *monitor->inputs, *monitor->targets);
    history.best_monitor_loss = history.initial_monitor_loss;
    best_params = params;
  }

  history.train_loss.reserve(options.epochs);
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    const ForwardCache cache = net.forward(inputs);
    LossResult loss = mse_loss(cache.output().data(), targets.data());
    if (!std::isfinite(loss.loss))
      throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch));
    Matrix grad_out(targets.rows(), targets.cols(), std::move(loss.grad));
    const Gradients grads = net.backward(cache, grad_out, false);
    const std::vector<double> flat = grads.flatten();
    adam.step(params, flat);
    try {
      net.set_trainable_parameters(params);
    } catch (const NumericError&) {
      throw NumericError("train: non-finite parameters at epoch " + std::to_string(epoch));
    }
    history.train_loss.push_back(loss.loss);

    double monitored = std::numeric_limits<double>::quiet_NaN();
    if (monitor) {
      monitored = evaluate_mse(net, *monitor->inputs, *monitor->targets);
      if (!std::isfinite(monitored))
        throw NumericError("train: non-finite monitor loss at epoch " + std::to_string(epoch));
      history.monitor_loss.push_back(monitored);
      if (monitored < history.best_monitor_loss - 1e-12) {
        history.best_monitor_loss = monitored;
        history.best_epoch = epoch;
        best_params = params;
      }
    }
    if (options.on_epoch) options.on_epoch(epoch, loss.loss, monitored);
    if (monitor && epoch - history.best_epoch >= monitor->patience) {
      history.stopped_early = true;
      break;
    }
  }
  if (monitor) {
    net.set_trainable_parameters(best_params);
  } else {
    history.best_epoch = history.train_loss.size();
  }
  return history;
}

}  // namespace mfcp::nn

// Central finite-difference check of Mlp::backward.
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "mfcp/nn.hpp"

namespace gradcheck {

using mfcp::linalg::Matrix;
using mfcp::nn::Mlp;

// Denominator floor for the relative error, so parameters whose true
// gradient is (numerically) zero are judged on an absolute 1e-11 scale.
inline constexpr double kRelFloor = 1e-6;

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kRelFloor});
}

struct Report {
  double worst = 0.0;
  std::size_t probes = 0;
  std::size_t redraws = 0;
};

namespace detail {

struct Probe {
  double loss;
  std::vector<bool> relu;   // sign pattern of every ReLU pre-activation
};

inline Probe probe(const Mlp& net, const Matrix& x, const Matrix& t) {
  const auto cache = net.forward(x);
  Probe p{mfcp::nn::mse_loss(cache.output().data(), t.data()).loss, {}};
  for (std::size_t l = 0; l < net.depth(); ++l)
    if (net.layer(l).activation == mfcp::nn::Activation::Relu)
      for (double z : cache.pre[l].data()) p.relu.push_back(z > 0.0);
  return p;
}

}  // namespace detail

// Checks `probes` random parameters of every trainable layer. Probes whose
// +/- h perturbation flips a ReLU are redrawn: the loss has a kink there and
// no finite difference is meaningful.
inline Report check(Mlp net, const Matrix& x, const Matrix& t, std::size_t probes,
                    std::uint64_t seed, double h = 1e-5) {
  Report report;
  const auto cache = net.forward(x);
  auto l = mfcp::nn::mse_loss(cache.output().data(), t.data());
  const Matrix grad_out(t.rows(), t.cols(), std::move(l.grad));
  const std::vector<double> analytic = net.backward(cache, grad_out).flatten();
  const auto base = detail::probe(net, x, t).relu;
  auto eval = [&](std::size_t idx, double value, bool& same) {
    net.set_trainable_parameter(idx, value);
    auto p = detail::probe(net, x, t);
    same = p.relu == base;
    return p.loss;
  };

  std::mt19937_64 rng(seed);
  std::size_t offset = 0;
  for (std::size_t layer = 0; layer < net.depth(); ++layer) {
    if (!net.layer(layer).trainable) continue;
    const std::size_t n = net.layer(layer).parameter_count();
    std::uniform_int_distribution<std::size_t> pick(offset, offset + n - 1);
    std::size_t done = 0;
    for (std::size_t attempt = 0; done < probes && attempt < 50 * probes; ++attempt) {
      const std::size_t idx = pick(rng);
      const double orig = net.trainable_parameter(idx);
      bool same_up = false;
      bool same_down = false;
      const double up = eval(idx, orig + h, same_up);
      const double down = eval(idx, orig - h, same_down);
      net.set_trainable_parameter(idx, orig);
      if (!same_up || !same_down) {
        ++report.redraws;
        continue;
      }
      const double numeric = (up - down) / (2.0 * h);
      report.worst = std::max(report.worst, relative_error(analytic[idx], numeric));
      ++done;
      ++report.probes;
    }
    offset += n;
  }
  return report;
}

}  // namespace gradcheck

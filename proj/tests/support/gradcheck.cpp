#include "support/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "prosody/rng.hpp"

namespace prosody::gradcheck {

using nn::Mode;
using nn::Network;
using nn::Tensor;

namespace {

double loss_of(Network& net, const Tensor& x, const std::vector<double>& w,
               Mode mode, const std::array<std::uint64_t, 4>& rng_state) {
  net.rng().set_state(rng_state);
  const Tensor y = net.forward(x, mode);
  double loss = 0.0;
  for (std::size_t i = 0; i < y.v.size(); ++i) loss += w[i] * y.v[i];
  return loss;
}

double rel_err(double a, double b) {
  const double denom = std::max({std::abs(a), std::abs(b), 1e-3});
  return std::abs(a - b) / denom;
}

}  // namespace

Result check_network(Network& net, const Tensor& x, std::uint64_t weight_seed,
                     bool check_input, double step, Mode mode) {
  const auto rng_state = net.rng().state();

  net.rng().set_state(rng_state);
  Tensor y = net.forward(x, mode);
  Rng wrng(weight_seed);
  std::vector<double> w(y.v.size());
  for (auto& wi : w) wi = wrng.uniform(-1.0, 1.0);

  net.zero_grad();
  Tensor loss_grad(y.shape, w);
  const Tensor dx = net.backward(loss_grad);

  Result result;
  for (auto* layer : net.layers()) {
    auto& params = layer->params();
    const auto analytic = layer->grads();
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double keep = params[i];
      params[i] = keep + step;
      const double up = loss_of(net, x, w, mode, rng_state);
      params[i] = keep - step;
      const double down = loss_of(net, x, w, mode, rng_state);
      params[i] = keep;
      const double numeric = (up - down) / (2.0 * step);
      result.max_rel_err =
          std::max(result.max_rel_err, rel_err(analytic[i], numeric));
      ++result.checked;
    }
  }

  if (check_input) {
    Tensor probe = x;
    for (std::size_t i = 0; i < probe.v.size(); ++i) {
      const double keep = probe.v[i];
      probe.v[i] = keep + step;
      const double up = loss_of(net, probe, w, mode, rng_state);
      probe.v[i] = keep - step;
      const double down = loss_of(net, probe, w, mode, rng_state);
      probe.v[i] = keep;
      const double numeric = (up - down) / (2.0 * step);
      result.max_rel_err =
          std::max(result.max_rel_err, rel_err(dx.v[i], numeric));
      ++result.checked;
    }
  }
  return result;
}

}  // namespace prosody::gradcheck

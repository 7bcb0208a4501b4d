// SPDX-License-Identifier: Apache-2.0
#include "pcrt/learn.hpp"

#include <cmath>
#include <stdexcept>

namespace pcrt {

using ad::DiffScalar;

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

} // namespace

ParameterSet::ParameterSet(std::size_t material_count) : raw_(material_count * 3) {
  const double raw_eps = ad::softplus_inverse(3.0 - 1.0);
  const double raw_sigma = ad::softplus_inverse(0.01);
  const double raw_s = ad::sigmoid_inverse(0.3);
  for (std::size_t m = 0; m < material_count; ++m) {
    raw_[3 * m + 0] = raw_eps;
    raw_[3 * m + 1] = raw_sigma;
    raw_[3 * m + 2] = raw_s;
  }
}

MaterialSet ParameterSet::materials() const {
  if (ad::active_parameter_count() != static_cast<int>(raw_.size()))
    throw std::logic_error("active autodiff parameter count does not match parameter set");
  MaterialSet out;
  out.reserve(material_count());
  for (std::size_t m = 0; m < material_count(); ++m) {
    MaterialDiff mat;
    mat.relative_permittivity =
        1.0 + ad::softplus(DiffScalar::parameter(raw_[3 * m + 0], static_cast<int>(3 * m + 0)));
    mat.conductivity =
        ad::softplus(DiffScalar::parameter(raw_[3 * m + 1], static_cast<int>(3 * m + 1)));
    mat.scattering_coefficient =
        ad::sigmoid(DiffScalar::parameter(raw_[3 * m + 2], static_cast<int>(3 * m + 2)));
    out.push_back(std::move(mat));
  }
  return out;
}

std::vector<MaterialParams> ParameterSet::values() const {
  std::vector<MaterialParams> out;
  out.reserve(material_count());
  for (std::size_t m = 0; m < material_count(); ++m) {
    MaterialParams p;
    p.relative_permittivity = 1.0 + (raw_[3 * m] > 30.0 ? raw_[3 * m] : std::log1p(std::exp(raw_[3 * m])));
    p.conductivity = raw_[3 * m + 1] > 30.0 ? raw_[3 * m + 1] : std::log1p(std::exp(raw_[3 * m + 1]));
    p.scattering_coefficient = 1.0 / (1.0 + std::exp(-raw_[3 * m + 2]));
    out.push_back(p);
  }
  return out;
}

ad::DiffScalar cir_loss(const ChannelImpulseResponse& h,
                        const std::vector<std::complex<double>>& h_hat) {
  if (h.impulse.size() != h_hat.size())
    throw std::invalid_argument("CIR tap grids differ; synthesis settings must match");
  double denom = 0.0;
  for (const auto& z : h_hat) denom += std::norm(z);
  if (denom <= 0.0) throw std::invalid_argument("ground-truth CIR has zero norm");

  DiffScalar acc(0.0);
  for (std::size_t k = 0; k < h_hat.size(); ++k) {
    const ad::DiffComplex diff = h.impulse[k] - ad::DiffComplex(h_hat[k]);
    acc += ad::norm(diff);
  }
  return acc / denom;
}

TrainResult train(const std::vector<std::vector<PropagationPath>>& paths_per_rx,
                  const std::vector<std::vector<std::complex<double>>>& truth_per_rx,
                  std::size_t material_count, const Scene& scene, const TrainConfig& config,
                  const EmConfig& em_config, ThreadPool* pool) {
  if (paths_per_rx.size() != truth_per_rx.size())
    throw std::invalid_argument("paths and ground truth must cover the same receivers");
  if (paths_per_rx.empty()) throw std::invalid_argument("no receivers to train on");

  ParameterSet params(material_count);
  ad::set_active_parameter_count(static_cast<int>(params.parameter_count()));

  std::vector<double> m1(params.parameter_count(), 0.0);
  std::vector<double> m2(params.parameter_count(), 0.0);

  TrainResult result;
  result.history.reserve(static_cast<std::size_t>(std::max(config.iterations, 0)));
  std::uint64_t rng_state = config.seed;
  int adam_steps = 0;

  for (int iter = 1; iter <= config.iterations; ++iter) {
    const std::size_t rx = static_cast<std::size_t>(splitmix64(rng_state) % paths_per_rx.size());
    if (paths_per_rx[rx].empty()) {
      ++result.skipped_iterations;
      continue;
    }

    const MaterialSet materials = params.materials();
    const ChannelImpulseResponse cir = synthesize_cir(
        std::span<const PropagationPath>(paths_per_rx[rx]), scene, materials, em_config, pool);
    const DiffScalar loss = cir_loss(cir, truth_per_rx[rx]);

    ++adam_steps;
    const double bc1 = 1.0 - std::pow(config.beta1, adam_steps);
    const double bc2 = 1.0 - std::pow(config.beta2, adam_steps);
    for (std::size_t i = 0; i < params.parameter_count(); ++i) {
      const double g = loss.g[i];
      m1[i] = config.beta1 * m1[i] + (1.0 - config.beta1) * g;
      m2[i] = config.beta2 * m2[i] + (1.0 - config.beta2) * g * g;
      params.raw()[i] -= config.learning_rate * (m1[i] / bc1) /
                         (std::sqrt(m2[i] / bc2) + config.epsilon);
    }

    TrainRecord rec;
    rec.iteration = iter;
    rec.loss = loss.v;
    rec.params = params.values();
    result.history.push_back(std::move(rec));
  }

  result.final_params = params.values();
  return result;
}

} // namespace pcrt

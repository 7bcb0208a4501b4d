// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <vector>

#include "pcrt/em.hpp"

namespace pcrt {

struct TrainConfig {
  double learning_rate = 0.01;
  int iterations = 5000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
};

/// Unconstrained raw parameters mapped into valid material ranges:
/// eps_r = 1 + softplus(raw), sigma = softplus(raw), S = sigmoid(raw).
/// Three raws per material label; parameter ids are 3*label + {0,1,2}.
class ParameterSet {
public:
  /// Default initialization: eps_r = 3, sigma = 0.01 S/m, S = 0.3 everywhere.
  explicit ParameterSet(std::size_t material_count);

  std::size_t material_count() const { return raw_.size() / 3; }
  std::size_t parameter_count() const { return raw_.size(); }

  /// Transformed, gradient-seeded view. Requires the active autodiff
  /// parameter count to equal parameter_count().
  MaterialSet materials() const;

  /// Transformed plain values.
  std::vector<MaterialParams> values() const;

  std::vector<double>& raw() { return raw_; }
  const std::vector<double>& raw() const { return raw_; }

private:
  std::vector<double> raw_;
};

/// Normalized CIR error |h - h_hat|^2 / |h_hat|^2 over band-limited taps.
ad::DiffScalar cir_loss(const ChannelImpulseResponse& h,
                        const std::vector<std::complex<double>>& h_hat);

struct TrainRecord {
  int iteration = 0; // 1-based; loss is evaluated before the step
  double loss = 0.0;
  std::vector<MaterialParams> params; // after the step
};

struct TrainResult {
  std::vector<TrainRecord> history;
  std::vector<MaterialParams> final_params;
  std::size_t skipped_iterations = 0; // sampled an RX with no paths
};

/// Adam over the constrained parameters: each iteration samples one receiver
/// (seeded), synthesizes its CIR with the current materials, and steps on the
/// normalized CIR error. Path geometry stays frozen throughout.
TrainResult train(const std::vector<std::vector<PropagationPath>>& paths_per_rx,
                  const std::vector<std::vector<std::complex<double>>>& truth_per_rx,
                  std::size_t material_count, const Scene& scene, const TrainConfig& config,
                  const EmConfig& em_config, ThreadPool* pool = nullptr);

} // namespace pcrt

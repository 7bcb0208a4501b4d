// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <span>
#include <vector>

#include "pcrt/autodiff.hpp"
#include "pcrt/threading.hpp"
#include "pcrt/trace.hpp"

namespace pcrt {

struct EmConfig {
  double center_frequency = 8e9; // Hz
  double bandwidth = 1.5e9;      // Hz
  int num_freq_samples = 129;
  // Surface patch one scatter path stands for (voxel_size^2).
  double scatter_cell_area = 0.0625 * 0.0625;
  // TX power and antenna pattern are fixed: isotropic, unit gain, vertical
  // polarization.
};

/// Differentiable view of one material's parameters.
struct MaterialDiff {
  ad::DiffScalar relative_permittivity;
  ad::DiffScalar conductivity;
  ad::DiffScalar scattering_coefficient;
};

using MaterialSet = std::vector<MaterialDiff>;

/// Wraps the scene's material table as non-differentiable constants.
MaterialSet constant_materials(const std::vector<MaterialParams>& table);

/// eta = eps_r - j sigma / (2 pi f eps_0)
ad::DiffComplex complex_permittivity(const MaterialDiff& mat, double frequency_hz);

enum class Polarization { TE, TM };

/// Fresnel reflection coefficient against a medium of complex relative
/// permittivity eta, with the principal (Re >= 0) branch of the transmitted
/// term sqrt(eta - sin^2 theta_i).
ad::DiffComplex fresnel_reflection(const ad::DiffComplex& eta, double cos_theta_i,
                                   Polarization pol);

/// Complex path coefficient at the center frequency: free-space spreading,
/// per-bounce Fresnel with TE/TM decomposition about the incidence plane and
/// the sqrt(1 - S^2) specular energy split, and a Lambertian diffuse factor
/// when the last interaction is a scatter point. Diffraction paths carry a
/// zero coefficient.
ad::DiffComplex path_coefficient(const PropagationPath& path, const Scene& scene,
                                 const MaterialSet& materials, const EmConfig& config);

struct ChannelImpulseResponse {
  std::vector<double> tap_delays;          // per contributing path, seconds
  std::vector<ad::DiffComplex> tap_coeffs; // per contributing path
  std::vector<double> freq_grid;           // Hz, num_freq_samples entries
  std::vector<ad::DiffComplex> cfr;        // per frequency sample
  std::vector<double> time_grid;           // seconds, band-limited tap times
  std::vector<ad::DiffComplex> impulse;    // band-limited CIR (IDFT of cfr)
};

/// CFR over the configured grid by coherent tap summation (fixed path order),
/// then the band-limited CIR by inverse DFT with a rectangular window.
/// An empty path list yields a valid all-zero response.
ChannelImpulseResponse synthesize_cir(std::span<const PropagationPath> paths, const Scene& scene,
                                      const MaterialSet& materials, const EmConfig& config,
                                      ThreadPool* pool = nullptr);

/// Grid synthesis from explicit taps; the tail end of synthesize_cir, exposed
/// so tests can drive exact tap configurations.
ChannelImpulseResponse cir_from_taps(std::vector<double> delays,
                                     std::vector<ad::DiffComplex> coeffs, const EmConfig& config,
                                     ThreadPool* pool = nullptr);

} // namespace pcrt

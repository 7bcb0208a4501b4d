// SPDX-License-Identifier: Apache-2.0
#include "pcrt/em.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pcrt {

using ad::DiffComplex;
using ad::DiffScalar;

namespace {

/// Vertical (z-referenced) polarization direction transverse to d.
Vec3 vertical_transverse(const Vec3& d) {
  Vec3 v = Vec3{0, 0, 1} - dot(Vec3{0, 0, 1}, d) * d;
  if (norm_sq(v) < 1e-12) v = Vec3{1, 0, 0} - dot(Vec3{1, 0, 0}, d) * d;
  return normalized(v);
}

struct FieldVec {
  DiffComplex x, y, z;

  DiffComplex dot_real(const Vec3& v) const { return x * v.x + y * v.y + z * v.z; }
  DiffScalar power() const { return ad::norm(x) + ad::norm(y) + ad::norm(z); }
};

FieldVec axis_field(const DiffComplex& amplitude, const Vec3& axis) {
  return {amplitude * axis.x, amplitude * axis.y, amplitude * axis.z};
}

FieldVec operator+(const FieldVec& a, const FieldVec& b) {
  return {a.x + b.x, a.y + b.y, a.z + b.z};
}

const MaterialDiff& material_of(const MaterialSet& materials, std::uint32_t label) {
  if (label >= materials.size())
    throw std::out_of_range("material label " + std::to_string(label) + " not in material set");
  return materials[label];
}

} // namespace

MaterialSet constant_materials(const std::vector<MaterialParams>& table) {
  MaterialSet out;
  out.reserve(table.size());
  for (const MaterialParams& m : table)
    out.push_back({DiffScalar(m.relative_permittivity), DiffScalar(m.conductivity),
                   DiffScalar(m.scattering_coefficient)});
  return out;
}

DiffComplex complex_permittivity(const MaterialDiff& mat, double frequency_hz) {
  const double scale = 1.0 / (2.0 * kPi * frequency_hz * kVacuumPermittivity);
  return {mat.relative_permittivity, -scale * mat.conductivity};
}

DiffComplex fresnel_reflection(const DiffComplex& eta, double cos_theta_i, Polarization pol) {
  const double sin_sq = 1.0 - cos_theta_i * cos_theta_i;
  const DiffComplex transmitted = ad::sqrt(eta - DiffComplex(sin_sq));
  if (pol == Polarization::TE) {
    const DiffComplex c{cos_theta_i};
    return (c - transmitted) / (c + transmitted);
  }
  const DiffComplex eta_cos = eta * cos_theta_i;
  return (eta_cos - transmitted) / (eta_cos + transmitted);
}

DiffComplex path_coefficient(const PropagationPath& path, const Scene& scene,
                             const MaterialSet& materials, const EmConfig& config) {
  const Vec3 tx = scene.transmitters.at(static_cast<std::size_t>(path.tx_index));
  const Vec3 rx = scene.receivers.at(static_cast<std::size_t>(path.rx_index));
  const double lambda = kSpeedOfLight / config.center_frequency;
  const double d_tot = path_length(tx, path.interactions, rx);

  for (const Interaction& it : path.interactions)
    if (it.kind == InteractionKind::Diffraction) return DiffComplex(0.0); // geometry-only

  const std::complex<double> phase =
      std::polar(1.0, -2.0 * kPi * d_tot / lambda); // e^{-j 2 pi d / lambda}

  if (path.interactions.empty()) {
    // Free space; co-polarized isotropic antennas give a unit projection.
    return DiffComplex(phase) * (lambda / (4.0 * kPi * d_tot));
  }

  Vec3 prev = tx;
  Vec3 dir = normalized(path.interactions.front().point - tx);
  FieldVec field = axis_field(DiffComplex(1.0), vertical_transverse(dir));
  double dist_to_last = 0.0;

  for (std::size_t k = 0; k < path.interactions.size(); ++k) {
    const Interaction& it = path.interactions[k];
    dist_to_last += distance(prev, it.point);
    const Vec3 d_in = normalized(it.point - prev);
    const Vec3 n = it.normal; // faces the incoming ray
    const double cos_i = std::clamp(-dot(d_in, n), 0.0, 1.0);
    const MaterialDiff& mat = material_of(materials, it.material_label);
    const DiffComplex eta = complex_permittivity(mat, config.center_frequency);
    const DiffComplex gamma_te = fresnel_reflection(eta, cos_i, Polarization::TE);
    const DiffComplex gamma_tm = fresnel_reflection(eta, cos_i, Polarization::TM);
    const DiffScalar& s_coef = mat.scattering_coefficient;

    if (it.kind == InteractionKind::Scatter) {
      // Lambertian diffuse tap: the path stands for a voxel-sized patch.
      const Vec3 d_out = normalized(rx - it.point);
      const double cos_s = std::clamp(dot(d_out, n), 0.0, 1.0);
      const double d_sc = distance(it.point, rx);
      const DiffScalar gamma_eff = ad::sqrt(0.5 * (ad::norm(gamma_te) + ad::norm(gamma_tm)));
      const DiffScalar incident = ad::sqrt(field.power());
      const DiffScalar amp =
          s_coef * gamma_eff * incident *
          std::sqrt(config.scatter_cell_area * cos_i * cos_s / kPi) *
          (lambda / (4.0 * kPi * dist_to_last * d_sc));
      return DiffComplex(phase) * amp;
    }

    // Specular: decompose about the incidence plane, reflect, and keep the
    // sqrt(1 - S^2) share not diverted to diffuse scattering.
    Vec3 s_axis = cross(d_in, n);
    if (norm_sq(s_axis) < 1e-18) s_axis = orthonormal_basis(d_in).first; // normal incidence
    s_axis = normalized(s_axis);
    const Vec3 p_in = cross(s_axis, d_in);
    const Vec3 d_out = reflect(d_in, n);
    const Vec3 p_out = cross(s_axis, d_out);
    const DiffScalar split = ad::sqrt(1.0 - s_coef * s_coef);
    const DiffComplex e_s = field.dot_real(s_axis) * split;
    const DiffComplex e_p = field.dot_real(p_in) * split;
    field = axis_field(gamma_te * e_s, s_axis) + axis_field(gamma_tm * e_p, p_out);

    prev = it.point;
  }

  const Vec3 arrival = normalized(rx - path.interactions.back().point);
  const DiffComplex projected = field.dot_real(vertical_transverse(arrival));
  return DiffComplex(phase) * projected * (lambda / (4.0 * kPi * d_tot));
}

ChannelImpulseResponse cir_from_taps(std::vector<double> delays,
                                     std::vector<ad::DiffComplex> coeffs, const EmConfig& config,
                                     ThreadPool* pool) {
  if (config.num_freq_samples < 2) throw std::invalid_argument("need >= 2 frequency samples");
  if (config.bandwidth <= 0.0) throw std::invalid_argument("bandwidth must be positive");
  const int m_count = config.num_freq_samples;
  const double delta_f = config.bandwidth / (m_count - 1);
  const double f0 = config.center_frequency - 0.5 * config.bandwidth;

  ChannelImpulseResponse cir;
  cir.tap_delays = std::move(delays);
  cir.tap_coeffs = std::move(coeffs);
  cir.freq_grid.resize(m_count);
  cir.time_grid.resize(m_count);
  for (int m = 0; m < m_count; ++m) cir.freq_grid[m] = f0 + m * delta_f;
  for (int k = 0; k < m_count; ++k) cir.time_grid[k] = k / (delta_f * m_count);

  cir.cfr.assign(m_count, DiffComplex(0.0));
  auto fill_cfr = [&](std::size_t begin, std::size_t end) {
    for (std::size_t m = begin; m < end; ++m) {
      DiffComplex acc(0.0);
      for (std::size_t p = 0; p < cir.tap_coeffs.size(); ++p) {
        const std::complex<double> steer =
            std::polar(1.0, -2.0 * kPi * cir.freq_grid[m] * cir.tap_delays[p]);
        acc += cir.tap_coeffs[p] * steer;
      }
      cir.cfr[m] = acc;
    }
  };
  if (pool)
    pool->parallel_for(static_cast<std::size_t>(m_count), 4, fill_cfr);
  else
    fill_cfr(0, static_cast<std::size_t>(m_count));

  cir.impulse.assign(m_count, DiffComplex(0.0));
  auto fill_impulse = [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      DiffComplex acc(0.0);
      for (int m = 0; m < m_count; ++m) {
        const std::complex<double> twiddle =
            std::polar(1.0, 2.0 * kPi * static_cast<double>(m) * static_cast<double>(k) /
                                static_cast<double>(m_count));
        acc += cir.cfr[m] * twiddle;
      }
      cir.impulse[k] = acc * (1.0 / m_count);
    }
  };
  if (pool)
    pool->parallel_for(static_cast<std::size_t>(m_count), 4, fill_impulse);
  else
    fill_impulse(0, static_cast<std::size_t>(m_count));

  return cir;
}

ChannelImpulseResponse synthesize_cir(std::span<const PropagationPath> paths, const Scene& scene,
                                      const MaterialSet& materials, const EmConfig& config,
                                      ThreadPool* pool) {
  std::vector<double> delays;
  std::vector<DiffComplex> coeffs;
  std::vector<std::size_t> contributing;
  for (std::size_t p = 0; p < paths.size(); ++p) {
    bool diffraction = false;
    for (const Interaction& it : paths[p].interactions)
      diffraction |= it.kind == InteractionKind::Diffraction;
    if (!diffraction) contributing.push_back(p);
  }
  delays.resize(contributing.size());
  coeffs.resize(contributing.size());

  auto fill = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const PropagationPath& path = paths[contributing[i]];
      const Vec3 tx = scene.transmitters.at(static_cast<std::size_t>(path.tx_index));
      const Vec3 rx = scene.receivers.at(static_cast<std::size_t>(path.rx_index));
      delays[i] = path_length(tx, path.interactions, rx) / kSpeedOfLight;
      coeffs[i] = path_coefficient(path, scene, materials, config);
    }
  };
  if (pool)
    pool->parallel_for(contributing.size(), 32, fill);
  else
    fill(0, contributing.size());

  return cir_from_taps(std::move(delays), std::move(coeffs), config, pool);
}

} // namespace pcrt

// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <complex>
#include <random>

#include "pcrt/em.hpp"
#include "pcrt/synthgen.hpp"

using namespace pcrt;
using ad::DiffComplex;
using ad::DiffScalar;

namespace {

MaterialDiff constant_material(double eps_r, double sigma, double scat) {
  return {DiffScalar::constant(eps_r), DiffScalar::constant(sigma), DiffScalar::constant(scat)};
}

Scene two_antenna_scene(Vec3 tx, Vec3 rx, std::vector<MaterialParams> materials) {
  Scene s;
  s.points = {{{50, 50, 50}, {0, 0, 1}, 0, 0}}; // placeholder cloud far away
  s.transmitters = {tx};
  s.receivers = {rx};
  s.materials = std::move(materials);
  for (std::uint32_t i = 0; i < s.materials.size(); ++i) s.material_ids.push_back(i);
  s.surface_ids = {0};
  s.bounds = compute_bounds(s);
  return s;
}

PropagationPath los_path() {
  PropagationPath p;
  p.refined = true;
  return p;
}

PropagationPath one_bounce(Vec3 point, Vec3 normal, InteractionKind kind = InteractionKind::Specular,
                           std::uint32_t material = 0) {
  PropagationPath p;
  Interaction it;
  it.kind = kind;
  it.point = point;
  it.normal = normal;
  it.material_label = material;
  it.voxel = {0, 0, 0};
  p.interactions = {it};
  p.refined = true;
  return p;
}

} // namespace

TEST_CASE("complex permittivity") {
  ad::set_active_parameter_count(0);
  SUBCASE("zero conductivity is purely real") {
    const auto eta = complex_permittivity(constant_material(4.0, 0.0, 0.0), 8e9);
    CHECK(eta.re.v == doctest::Approx(4.0));
    CHECK(eta.im.v == 0.0);
  }
  SUBCASE("vacuum") {
    const auto eta = complex_permittivity(constant_material(1.0, 0.0, 0.0), 1e9);
    CHECK(eta.value() == std::complex<double>{1.0, 0.0});
  }
  SUBCASE("conductive imaginary part at 8 GHz") {
    const auto eta = complex_permittivity(constant_material(4.0, 0.1, 0.0), 8e9);
    // -0.1 / (2 pi 8e9 eps0), evaluated independently: about -0.2247.
    CHECK(eta.im.v == doctest::Approx(-0.224706).epsilon(1e-4));
    CHECK(eta.re.v == doctest::Approx(4.0));
  }
}

TEST_CASE("Fresnel reflection closed forms") {
  ad::set_active_parameter_count(0);
  const DiffComplex eta{DiffScalar::constant(4.0), DiffScalar::constant(0.0)};

  SUBCASE("normal incidence on eta = 4") {
    const auto gamma = fresnel_reflection(eta, 1.0, Polarization::TE);
    CHECK(gamma.re.v == doctest::Approx(-1.0 / 3.0).epsilon(1e-12));
    CHECK(gamma.im.v == doctest::Approx(0.0));
    const auto gamma_tm = fresnel_reflection(eta, 1.0, Polarization::TM);
    CHECK(gamma_tm.re.v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("grazing incidence reflects everything") {
    for (const auto pol : {Polarization::TE, Polarization::TM}) {
      const auto gamma = fresnel_reflection(eta, 1e-9, pol);
      CHECK(std::abs(gamma.value()) == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
  SUBCASE("no contrast, no reflection") {
    const DiffComplex vacuum{DiffScalar::constant(1.0), DiffScalar::constant(0.0)};
    for (double c : {1.0, 0.7, 0.2}) {
      CHECK(std::abs(fresnel_reflection(vacuum, c, Polarization::TE).value()) < 1e-12);
      CHECK(std::abs(fresnel_reflection(vacuum, c, Polarization::TM).value()) < 1e-12);
    }
  }
}

TEST_CASE("LOS coefficient is the free-space term") {
  ad::set_active_parameter_count(0);
  const Scene s = two_antenna_scene({0, 0, 0}, {0, 0, 1}, {{2.0, 0.0, 0.0}});
  EmConfig cfg;
  const auto a = path_coefficient(los_path(), s, constant_materials(s.materials), cfg);
  const double lambda = kSpeedOfLight / cfg.center_frequency;
  CHECK(std::abs(a.value()) == doctest::Approx(lambda / (4.0 * kPi)).epsilon(1e-12));
  // |a| at 8 GHz over 1 m is about 2.9822e-3.
  CHECK(std::abs(a.value()) == doctest::Approx(2.9822e-3).epsilon(1e-4));
  const double expected_phase = std::arg(std::polar(1.0, -2.0 * kPi / lambda));
  CHECK(std::arg(a.value()) == doctest::Approx(expected_phase).epsilon(1e-9));
}

TEST_CASE("energy falls monotonically with distance and LOS is reciprocal") {
  ad::set_active_parameter_count(0);
  EmConfig cfg;
  double previous = 1e9;
  for (double d : {1.0, 2.0, 5.0, 17.0}) {
    const Scene s = two_antenna_scene({0, 0, 0}, {0, 0, d}, {{2.0, 0.0, 0.0}});
    const double amp =
        std::abs(path_coefficient(los_path(), s, constant_materials(s.materials), cfg).value());
    CHECK(amp < previous);
    previous = amp;
  }

  const Scene fwd = two_antenna_scene({0.3, -1.2, 0.5}, {2.0, 0.7, 1.9}, {{2.0, 0.0, 0.0}});
  const Scene rev = two_antenna_scene({2.0, 0.7, 1.9}, {0.3, -1.2, 0.5}, {{2.0, 0.0, 0.0}});
  const double a_fwd =
      std::abs(path_coefficient(los_path(), fwd, constant_materials(fwd.materials), cfg).value());
  const double a_rev =
      std::abs(path_coefficient(los_path(), rev, constant_materials(rev.materials), cfg).value());
  CHECK(a_fwd == doctest::Approx(a_rev).epsilon(1e-12));
}

TEST_CASE("one-bounce normal-incidence specular composes Fresnel with spreading") {
  ad::set_active_parameter_count(0);
  // Wall at x=2 with normal -x; straight out-and-back path.
  const Scene s = two_antenna_scene({0, 0, 0}, {0, 0, 0}, {{4.0, 0.0, 0.0}});
  const auto path = one_bounce({2, 0, 0}, {-1, 0, 0});
  EmConfig cfg;
  const auto a = path_coefficient(path, s, constant_materials(s.materials), cfg);
  const double lambda = kSpeedOfLight / cfg.center_frequency;
  CHECK(std::abs(a.value()) ==
        doctest::Approx((lambda / (4.0 * kPi * 4.0)) * (1.0 / 3.0)).epsilon(1e-9));
}

TEST_CASE("specular split keeps the energy budget per bounce") {
  ad::set_active_parameter_count(0);
  for (double scat : {0.0, 0.3, 0.8}) {
    const Scene s = two_antenna_scene({0, 0, 1}, {2, 0, 1}, {{4.0, 0.02, scat}});
    const auto path = one_bounce({1, 0, 0}, {0, 0, 1});
    EmConfig cfg;
    const auto a = path_coefficient(path, s, constant_materials(s.materials), cfg);

    // Reference amplitude with S = 0: same geometry, full specular energy.
    const Scene s0 = two_antenna_scene({0, 0, 1}, {2, 0, 1}, {{4.0, 0.02, 0.0}});
    const auto a0 = path_coefficient(path, s0, constant_materials(s0.materials), cfg);
    const double specular_energy = std::norm(a.value());
    const double full_energy = std::norm(a0.value());
    const double diffuse_fraction = scat * scat * full_energy;
    CHECK(specular_energy + diffuse_fraction <= full_energy + 1e-9);
    CHECK(specular_energy == doctest::Approx(full_energy * (1.0 - scat * scat)).epsilon(1e-9));
  }
}

TEST_CASE("scatter coefficient follows the Lambertian geometry factors") {
  ad::set_active_parameter_count(0);
  const Scene s = two_antenna_scene({0, 0, 1}, {1, 0, 1}, {{4.0, 0.0, 0.5}});
  EmConfig cfg;
  cfg.scatter_cell_area = 0.0625 * 0.0625;
  const auto path = one_bounce({0.5, 0, 0}, {0, 0, 1}, InteractionKind::Scatter);
  const auto a = path_coefficient(path, s, constant_materials(s.materials), cfg);

  const double lambda = kSpeedOfLight / cfg.center_frequency;
  const double d1 = distance({0, 0, 1}, {0.5, 0, 0});
  const double d2 = distance({0.5, 0, 0}, {1, 0, 1});
  const double cos_i = 1.0 / d1; // height 1 over slant d1
  const double cos_s = 1.0 / d2;
  const DiffComplex eta = complex_permittivity(constant_material(4.0, 0.0, 0.5), 8e9);
  const double g_te = std::abs(fresnel_reflection(eta, cos_i, Polarization::TE).value());
  const double g_tm = std::abs(fresnel_reflection(eta, cos_i, Polarization::TM).value());
  const double gamma_eff = std::sqrt(0.5 * (g_te * g_te + g_tm * g_tm));
  const double expected = 0.5 * gamma_eff *
                          std::sqrt(cfg.scatter_cell_area * cos_i * cos_s / kPi) *
                          (lambda / (4.0 * kPi * d1 * d2));
  CHECK(std::abs(a.value()) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("diffraction paths carry zero coefficient") {
  ad::set_active_parameter_count(0);
  const Scene s = two_antenna_scene({0, 0, 1}, {1, 0, 1}, {{4.0, 0.0, 0.5}});
  auto path = one_bounce({0.5, 0, 0}, {0, 0, 1}, InteractionKind::Diffraction);
  path.interactions[0].edge_index = 0;
  CHECK(std::abs(path_coefficient(path, s, constant_materials(s.materials), EmConfig{}).value()) ==
        0.0);
}

TEST_CASE("unknown material label raises") {
  ad::set_active_parameter_count(0);
  const Scene s = two_antenna_scene({0, 0, 1}, {1, 0, 1}, {{4.0, 0.0, 0.5}});
  const auto path = one_bounce({0.5, 0, 0}, {0, 0, 1}, InteractionKind::Specular, 9);
  CHECK_THROWS_AS(path_coefficient(path, s, constant_materials(s.materials), EmConfig{}),
                  std::out_of_range);
}

TEST_CASE("CFR of a unit tap") {
  ad::set_active_parameter_count(0);
  EmConfig cfg;

  SUBCASE("zero delay gives a flat unit CFR") {
    const auto cir = cir_from_taps({0.0}, {DiffComplex(1.0)}, cfg);
    REQUIRE(cir.cfr.size() == 129);
    for (const auto& z : cir.cfr) {
      CHECK(z.value().real() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(z.value().imag() == doctest::Approx(0.0));
    }
  }

  SUBCASE("delayed tap: constant magnitude, linear phase slope") {
    const double tau = 10e-9;
    const auto cir = cir_from_taps({tau}, {DiffComplex(1.0)}, cfg);
    const double df = cfg.bandwidth / (cfg.num_freq_samples - 1);
    for (std::size_t m = 0; m < cir.cfr.size(); ++m)
      CHECK(std::abs(cir.cfr[m].value()) == doctest::Approx(1.0).epsilon(1e-12));
    for (std::size_t m = 1; m < cir.cfr.size(); ++m) {
      const std::complex<double> step = cir.cfr[m].value() / cir.cfr[m - 1].value();
      CHECK(std::arg(step) ==
            doctest::Approx(std::remainder(-2.0 * kPi * df * tau, 2.0 * kPi)).epsilon(1e-9));
    }
  }
}

TEST_CASE("two-tap comb against a direct DFT oracle, plus linearity") {
  ad::set_active_parameter_count(0);
  EmConfig cfg;
  const double df = cfg.bandwidth / (cfg.num_freq_samples - 1);
  const double tau0 = 5e-9;
  const double delta = 1.0 / (2.0 * df * (cfg.num_freq_samples - 1)); // half-bin comb
  const auto cir = cir_from_taps({tau0, tau0 + delta}, {DiffComplex(1.0), DiffComplex(1.0)}, cfg);

  // Oracle: naive double loop over taps and frequencies, then a naive IDFT.
  const int m_count = cfg.num_freq_samples;
  std::vector<std::complex<double>> cfr(m_count);
  for (int m = 0; m < m_count; ++m) {
    const double f = cfg.center_frequency - 0.5 * cfg.bandwidth + m * df;
    cfr[m] = std::polar(1.0, -2.0 * kPi * f * tau0) +
             std::polar(1.0, -2.0 * kPi * f * (tau0 + delta));
  }
  for (int m = 0; m < m_count; ++m)
    CHECK(std::abs(cir.cfr[m].value() - cfr[m]) < 1e-9);

  for (int k = 0; k < m_count; ++k) {
    std::complex<double> acc = 0.0;
    for (int m = 0; m < m_count; ++m)
      acc += cfr[m] * std::polar(1.0, 2.0 * kPi * m * k / static_cast<double>(m_count));
    CHECK(std::abs(cir.impulse[k].value() - acc / static_cast<double>(m_count)) < 1e-9);
  }

  // Linearity: the two-tap response is the sum of the single-tap responses.
  const auto cir_a = cir_from_taps({tau0}, {DiffComplex(1.0)}, cfg);
  const auto cir_b = cir_from_taps({tau0 + delta}, {DiffComplex(1.0)}, cfg);
  for (int k = 0; k < m_count; ++k)
    CHECK(std::abs(cir.impulse[k].value() -
                   (cir_a.impulse[k].value() + cir_b.impulse[k].value())) < 1e-12);
}

TEST_CASE("synthesize_cir handles an empty path list as zero energy") {
  ad::set_active_parameter_count(0);
  const Scene s = two_antenna_scene({0, 0, 0}, {0, 0, 1}, {{2.0, 0.0, 0.0}});
  const auto cir = synthesize_cir({}, s, constant_materials(s.materials), EmConfig{});
  REQUIRE(cir.cfr.size() == 129);
  for (const auto& z : cir.cfr) CHECK(std::abs(z.value()) == 0.0);
  for (const auto& z : cir.impulse) CHECK(std::abs(z.value()) == 0.0);
  CHECK(cir.tap_delays.empty());
}

TEST_CASE("tap delays equal path length over c") {
  ad::set_active_parameter_count(0);
  const Scene s = two_antenna_scene({0, 0, 1}, {2, 0, 1}, {{4.0, 0.1, 0.3}});
  std::vector<PropagationPath> paths = {los_path(), one_bounce({1, 0, 0}, {0, 0, 1})};
  const auto cir = synthesize_cir(paths, s, constant_materials(s.materials), EmConfig{});
  REQUIRE(cir.tap_delays.size() == 2);
  CHECK(cir.tap_delays[0] == doctest::Approx(2.0 / kSpeedOfLight).epsilon(1e-12));
  const double bounce_len = 2.0 * std::sqrt(2.0);
  CHECK(cir.tap_delays[1] == doctest::Approx(bounce_len / kSpeedOfLight).epsilon(1e-12));
}

TEST_CASE("gradient of |a|^2 w.r.t. material parameters matches finite differences") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.1, 0.9);
  std::uniform_real_distribution<double> eps_dist(1.5, 8.0);
  std::uniform_real_distribution<double> sig_dist(0.01, 1.0);
  EmConfig cfg;

  for (int trial = 0; trial < 60; ++trial) {
    const double eps_r = eps_dist(rng), sigma = sig_dist(rng), scat = u(rng);
    const bool scatter_path = trial % 2 == 1;
    const Vec3 bounce{u(rng) * 2.0, u(rng), 0.0};
    const Scene scene =
        two_antenna_scene({0, 0, 1 + u(rng)}, {2, u(rng), 1 + u(rng)}, {{eps_r, sigma, scat}});
    const auto path = one_bounce(bounce, {0, 0, 1},
                                 scatter_path ? InteractionKind::Scatter
                                              : InteractionKind::Specular);

    auto eval = [&](double e, double s_, double sc) {
      ad::set_active_parameter_count(0);
      MaterialSet mats = {constant_material(e, s_, sc)};
      return ad::norm(path_coefficient(path, scene, mats, cfg)).v;
    };

    ad::set_active_parameter_count(3);
    MaterialSet mats = {{DiffScalar::parameter(eps_r, 0), DiffScalar::parameter(sigma, 1),
                         DiffScalar::parameter(scat, 2)}};
    const DiffScalar power = ad::norm(path_coefficient(path, scene, mats, cfg));

    const double h_eps = 1e-5 * eps_r, h_sig = 1e-5 * sigma, h_scat = 1e-6;
    const double fd_eps = (eval(eps_r + h_eps, sigma, scat) - eval(eps_r - h_eps, sigma, scat)) /
                          (2 * h_eps);
    const double fd_sig = (eval(eps_r, sigma + h_sig, scat) - eval(eps_r, sigma - h_sig, scat)) /
                          (2 * h_sig);
    const double fd_scat = (eval(eps_r, sigma, scat + h_scat) - eval(eps_r, sigma, scat - h_scat)) /
                           (2 * h_scat);

    const double scale = std::abs(power.v) + 1e-18;
    CHECK(std::abs(power.partial(0) - fd_eps) <= 1e-4 * std::max(scale, std::abs(fd_eps)));
    CHECK(std::abs(power.partial(1) - fd_sig) <= 1e-4 * std::max(scale, std::abs(fd_sig)));
    CHECK(std::abs(power.partial(2) - fd_scat) <= 1e-4 * std::max(scale, std::abs(fd_scat)));
  }
  ad::set_active_parameter_count(0);
}

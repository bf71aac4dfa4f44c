#include <catch_amalgamated.hpp>

#include <random>

#include "opo_noise/phonon.hpp"

using namespace opo;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace
{
CavityConfig uniform_cavity(double n)
{
    CavityConfig c = reference_opo_cavity();
    for (int j = 0; j < kModes; ++j) {
        c.modes[j].refractive_index = n;
        c.waists[j] = waist_from_rayleigh(c.rayleigh_length, n, c.modes[j].wavelength);
    }
    return c;
}

CrystalModel isotropic_crystal()
{
    CrystalModel k;
    const Voigt p{0.1, 0.1, 0.2, 0.0, 0.0, 0.0};
    k.photoelastic = {p, p, p};
    k.strain_rms = {1e-9, 1e-9, 1e-9, 0.0, 0.0, 0.0};
    k.coherence_length = 20e-6;
    k.density = 3000.0;
    k.sound_speed = 4000.0;
    k.temperature = 296.0;
    return k;
}
} // namespace

TEST_CASE("measured couplings are positive definite")
{
    const NoiseCouplings m = NoiseCouplings::measured();
    CHECK_THAT(m.eta.determinant(), WithinRel(4.653e-3, 1e-3));
    CHECK(m.min_eigenvalue() > 0.0);
    CHECK(m.is_psd());
}

TEST_CASE("scaled couplings follow the eta_00 ratios")
{
    const NoiseCouplings s = NoiseCouplings::scaled_from_pump(0.64);
    CHECK_THAT(s(1, 1), WithinRel(0.16, 1e-14));
    CHECK_THAT(s(0, 1), WithinRel(0.27 * 0.64, 1e-14));
    CHECK_THAT(s(1, 2), WithinRel(0.16 * 0.64, 1e-14));
    CHECK(s.is_psd());
}

TEST_CASE("build_vq places eta sqrt(PjPk) on the phase block")
{
    const NoiseCouplings m = NoiseCouplings::measured();
    const std::array<double, kModes> p{0.5, 0.02, 0.03};
    const QuadratureCovariance v = build_vq(m, p);
    CHECK_THAT(v(q_index(0), q_index(0)), WithinRel(0.53 * 0.5, 1e-14));
    CHECK_THAT(v(q_index(1), q_index(2)), WithinRel(0.087 * std::sqrt(0.02 * 0.03), 1e-14));
    for (int j = 0; j < kModes; ++j)
        for (int i = 0; i < kDim; ++i)
            CHECK(v(p_index(j), i) == 0.0);
    CHECK(v.is_symmetric());
}

TEST_CASE("build_vq is PSD for random PSD couplings and powers")
{
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> pw(0.0, 2.0);
    for (int trial = 0; trial < 200; ++trial) {
        Mat3 a;
        for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k)
                a(i, k) = u(rng);
        NoiseCouplings c{a * a.transpose()};
        c.eta = 0.5 * (c.eta + c.eta.transpose());
        const std::array<double, kModes> p{pw(rng), pw(rng), pw(rng)};
        CHECK(build_vq(c, p).is_psd());
    }
}

TEST_CASE("build_vq rejects bad input with a diagnostic")
{
    NoiseCouplings bad;
    bad.eta << 0.1, 0.5, 0.0,
               0.5, 0.1, 0.0,
               0.0, 0.0, 0.1;
    CHECK_THROWS_WITH(build_vq(bad, {1.0, 1.0, 1.0}), ContainsSubstring("not positive semidefinite"));

    NoiseCouplings asym = NoiseCouplings::measured();
    asym.eta(0, 1) += 0.01;
    CHECK_THROWS_WITH(build_vq(asym, {1.0, 1.0, 1.0}), ContainsSubstring("symmetric"));

    CHECK_THROWS_AS(build_vq(NoiseCouplings::measured(), {1.0, -0.1, 1.0}), ValidationError);
}

TEST_CASE("profile at the focus for the geometry study")
{
    const CavityConfig c = geometry_study_cavity();
    CHECK_THAT(waist_position_profile(c, 0.0), WithinAbs(2.2731, 1e-3));
    for (double z : {0.004, 0.011, 0.025})
        CHECK_THAT(waist_position_profile(c, z), WithinRel(waist_position_profile(c, -z), 1e-14));
    CHECK(waist_position_profile(c, 0.01) < waist_position_profile(c, 0.0));
}

TEST_CASE("quadrature matches the closed-form profile")
{
    for (double l : {4e-3, 12e-3, 30e-3})
        for (double z0 : {3e-3, 8.13e-3, 20e-3}) {
            CavityConfig c = geometry_study_cavity();
            c.crystal_length = l;
            c.rayleigh_length = z0;
            for (int j = 0; j < kModes; ++j)
                c.waists[j] = waist_from_rayleigh(z0, c.modes[j].refractive_index, c.modes[j].wavelength);
            for (int i = 0; i < 11; ++i) {
                const double z = -0.03 + 0.006 * i;
                CHECK_THAT(geometry_factor(c, 0, 0, z), WithinRel(waist_position_profile(c, z), 1e-6));
            }
        }
}

TEST_CASE("thin-crystal limit of the profile")
{
    CavityConfig c = geometry_study_cavity();
    c.crystal_length = 1e-7;
    const double n = c.mode(0).refractive_index;
    const double z0 = c.rayleigh_length;
    for (double z : {0.0, 0.005, 0.02}) {
        const double expect = n * c.crystal_length / z0 / (1.0 + (z / z0) * (z / z0));
        CHECK_THAT(waist_position_profile(c, z), WithinRel(expect, 1e-6));
    }
}

TEST_CASE("effective waist of one mode at the focus")
{
    CavityConfig c = geometry_study_cavity();
    c.crystal_length = 1e-7;
    CHECK_THAT(effective_waist(c, 0, 0), WithinRel(c.waists[0], 1e-6));
}

TEST_CASE("microscopic coupling scales as the inverse squared wavelength")
{
    const CavityConfig c = uniform_cavity(1.8);
    const CrystalModel k = isotropic_crystal();
    const double ratio = eta_microscopic(c, k, 0, 0) / eta_microscopic(c, k, 1, 1);
    CHECK_THAT(ratio, WithinAbs(4.0, 1e-6));
    CHECK(std::abs(ratio - 3.7) <= 0.5);
}

TEST_CASE("microscopic couplings obey Cauchy-Schwarz")
{
    CrystalModel k = isotropic_crystal();
    k.photoelastic[1] = {0.05, 0.2, 0.1, 0.0, 0.0, 0.0};
    k.photoelastic[2] = {0.3, 0.0, 0.1, 0.0, 0.0, 0.0};
    const NoiseCouplings e = eta_microscopic_matrix(reference_opo_cavity(), k);
    for (int j = 0; j < kModes; ++j)
        for (int m = 0; m < kModes; ++m)
            CHECK(std::abs(e(j, m)) <= std::sqrt(e(j, j) * e(m, m)) * (1.0 + 1e-12));
    CHECK(e.is_psd());
}

TEST_CASE("photoelastic coupling and strain helpers")
{
    const CrystalModel k = isotropic_crystal();
    CHECK_THAT(photoelastic_coupling(k, 0, 1), WithinRel(0.01e-18 * 2 + 0.04e-18, 1e-12));
    const double s = strain_rms_from_energy_density(2.0, 3000.0, 4000.0);
    CHECK_THAT(0.5 * 3000.0 * 4000.0 * 4000.0 * s * s, WithinRel(2.0, 1e-14));
    CrystalModel cold = k;
    cold.temperature = 0.0;
    CHECK_THROWS_AS(eta_microscopic(reference_opo_cavity(), cold, 0, 0), ValidationError);
}

TEST_CASE("thermal phonon energy")
{
    const std::vector<double> w{2.0 * std::numbers::pi * 21e6};
    const double kT = constants::boltzmann * 296.0;
    // high-temperature limit: kT, with the -hw/2 + hw/2 terms cancelling to O(hw^2/kT)
    CHECK_THAT(thermal_phonon_energy(296.0, w), WithinRel(kT, 1e-9));
    const std::vector<double> hot{2.0 * std::numbers::pi * 1e14};
    CHECK_THAT(thermal_phonon_energy(1.0, hot), WithinRel(0.5 * constants::hbar * hot[0], 1e-12));
    CHECK_THROWS_AS(thermal_phonon_energy(-1.0, w), ValidationError);
}

TEST_CASE("temperature law")
{
    CHECK_THAT(temperature_law(383.0), WithinAbs(0.887, 1e-3));
    CHECK_THAT(temperature_law(1.38 / 5.92e-3), WithinAbs(0.0, 1e-12));
    CHECK_THAT(1.38 / 5.92e-3, WithinAbs(233.1, 0.05));
    CHECK(temperature_law(200.0) == 0.0);
    CHECK(temperature_law(100.0, 0.0, 0.4) == 0.4);
    CHECK(temperature_law(500.0, 0.0, 0.4) == 0.4);
}

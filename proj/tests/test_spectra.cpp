#include <catch_amalgamated.hpp>

#include "opo_noise/spectra.hpp"

using namespace opo;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace
{
const double kOmega = 0.025872;

CavityConfig lossless(CavityConfig c)
{
    for (auto& m : c.modes)
        m.mu = 0.0;
    return c;
}

double max_abs(const Mat6& m) { return m.cwiseAbs().maxCoeff(); }

Vec6 combo(std::initializer_list<std::pair<int, double>> terms)
{
    Vec6 w = Vec6::Zero();
    for (auto [i, c] : terms)
        w(i) = c;
    return w;
}
} // namespace

TEST_CASE("free cavity transfer is a scalar inversion")
{
    const CavityConfig c = reference_opo_cavity();
    const CMat6 t = intracavity_transfer(free_cavity_drift(c), 0.3);
    for (int j = 0; j < kModes; ++j) {
        const std::complex<double> expect = 1.0 / std::complex<double>(c.mode(j).total_loss(), 0.3);
        CHECK(std::abs(t(p_index(j), p_index(j)) - expect) < 1e-14);
    }
    CHECK(std::abs(t(0, 1)) == 0.0);
    CHECK_NOTHROW(intracavity_transfer(free_cavity_drift(c), 0.0));
}

TEST_CASE("OPO transfer is singular at dc and finite elsewhere")
{
    const CavityConfig c = reference_opo_cavity();
    const DriftMatrix d = opo_drift(c, operating_point(c, 1.5, 0.07));
    CHECK_THROWS_AS(intracavity_transfer(d, 0.0), NumericalError);
    const CMat6 t = intracavity_transfer(d, 0.0259);
    const CMat6 a = std::complex<double>(0.0, 0.0259) * CMat6::Identity() - d.matrix.cast<std::complex<double>>();
    CHECK((a * t - CMat6::Identity()).cwiseAbs().maxCoeff() < 1e-10);
    const CMat6 direct = a.partialPivLu().solve(CMat6::Identity());
    CHECK((direct - t).cwiseAbs().maxCoeff() < 1e-10 * t.cwiseAbs().maxCoeff());
}

TEST_CASE("coherent in, coherent out for an empty cavity")
{
    const CavityConfig c0 = lossless(reference_opo_cavity());
    for (double w : {0.0, 0.01, 0.3, 2.0}) {
        const SpectrumResult r = output_covariance(c0, free_cavity_drift(c0), QuadratureCovariance::zero(), w);
        CHECK(max_abs(r.v_total.matrix - Mat6::Identity()) < 1e-12);
    }
    const CavityConfig c = reference_opo_cavity();
    const SpectrumResult r = output_covariance(c, free_cavity_drift(c), QuadratureCovariance::zero(), kOmega);
    CHECK(max_abs(r.v_total.matrix - Mat6::Identity()) < 1e-12);
    CHECK(max_abs(r.v_pure.matrix) > 1e-3);
    CHECK(max_abs(r.v_loss.matrix) > 1e-3);
    CHECK(max_abs(r.v_pure.matrix + r.v_loss.matrix) < 1e-12);
}

TEST_CASE("empty cavity phase noise transfer")
{
    const CavityConfig c = reference_opo_cavity();
    QuadratureCovariance vq = QuadratureCovariance::zero();
    vq(q_index(0), q_index(0)) = 0.2;
    const SpectrumResult r = output_covariance(c, free_cavity_drift(c), vq, kOmega);
    const double g = c.mode(0).gamma;
    const double gp = c.mode(0).total_loss();
    CHECK_THAT(r.v_total(q_index(0), q_index(0)), WithinRel(1.0 + 2.0 * g * 0.2 / (kOmega * kOmega + gp * gp), 1e-12));
    CHECK_THAT(r.v_total(p_index(0), p_index(0)), WithinAbs(1.0, 1e-14));
}

TEST_CASE("component identity and PSD along a sweep")
{
    const CavityConfig c = reference_opo_cavity();
    for (double s : {1.0, 1.1, 1.5, 1.7})
        for (double w : {0.003, kOmega, 0.2}) {
            const SpectrumResult r = opo_spectrum(c, s, w, 0.07, NoiseCouplings::measured());
            const Mat6 sum = Mat6::Identity() + r.v_pure.matrix + r.v_loss.matrix + r.v_phase.matrix;
            CHECK(max_abs(r.v_total.matrix - sum) < 1e-10);
            CHECK(r.v_total.is_symmetric());
            CHECK(r.v_total.is_psd());
        }
}

TEST_CASE("state is pure without spurious losses")
{
    const CavityConfig c = lossless(reference_opo_cavity());
    for (double s : {1.05, 1.3, 1.7})
        for (double w : {0.005, 0.05, 0.5}) {
            const SpectrumResult r = opo_spectrum(c, s, w, 0.07, NoiseCouplings::zero());
            CHECK_THAT(purity_determinant(r), WithinAbs(1.0, 1e-9));
        }
}

TEST_CASE("amplitude sector ignores phonon noise")
{
    const CavityConfig c = reference_opo_cavity();
    for (double s : {1.05, 1.3, 1.7}) {
        const SpectrumResult a = opo_spectrum(c, s, kOmega, 0.07, NoiseCouplings::zero());
        const SpectrumResult b = opo_spectrum(c, s, kOmega, 0.07, NoiseCouplings::measured());
        for (int j = 0; j < kModes; ++j)
            for (int k = 0; k < kModes; ++k)
                CHECK(a.v_total(p_index(j), p_index(k)) == b.v_total(p_index(j), p_index(k)));
        CHECK(a.v_total(q_index(0), q_index(0)) != b.v_total(q_index(0), q_index(0)));
    }
}

TEST_CASE("phase difference diverges as 1/omega^2")
{
    const CavityConfig c = reference_opo_cavity();
    const Vec6 w = combo({{q_index(1), 1.0}, {q_index(2), -1.0}});
    const double lo = combination_variance(opo_spectrum(c, 1.5, 1e-3, 0.07, NoiseCouplings::measured()).v_total, w);
    const double hi = combination_variance(opo_spectrum(c, 1.5, 1e-2, 0.07, NoiseCouplings::measured()).v_total, w);
    CHECK_THAT(std::log(hi / lo) / std::log(10.0), WithinAbs(-2.0, 0.05));
}

TEST_CASE("detection model")
{
    QuadratureCovariance v = QuadratureCovariance::identity();
    v(q_index(0), q_index(0)) = 2.0;
    v(q_index(0), q_index(1)) = v(q_index(1), q_index(0)) = 0.4;
    const QuadratureCovariance d = apply_detection(v, {0.65, 0.87, 0.87});
    CHECK_THAT(d(q_index(0), q_index(0)), WithinRel(1.65, 1e-14));
    CHECK_THAT(d(q_index(0), q_index(1)), WithinRel(0.4 * std::sqrt(0.65 * 0.87), 1e-14));
    CHECK(apply_detection(v, {1.0, 1.0, 1.0}).matrix == v.matrix);
    const QuadratureCovariance id = apply_detection(QuadratureCovariance::identity(), {0.3, 0.6, 0.9});
    CHECK(max_abs(id.matrix - Mat6::Identity()) < 1e-15);
}

TEST_CASE("Duan criterion")
{
    const DuanResult vac = duan_criterion(QuadratureCovariance::identity());
    CHECK_THAT(vac.value, WithinAbs(2.0, 1e-14));
    CHECK_FALSE(vac.entangled);

    QuadratureCovariance v = QuadratureCovariance::identity();
    v(p_index(1), p_index(2)) = v(p_index(2), p_index(1)) = 0.5;
    v(q_index(1), q_index(2)) = v(q_index(2), q_index(1)) = -0.5;
    const DuanResult e = duan_criterion(v);
    CHECK_THAT(e.value, WithinAbs(1.0, 1e-14));
    CHECK(e.entangled);

    QuadratureCovariance thermal = QuadratureCovariance::identity();
    thermal.matrix *= 1.7;
    CHECK_FALSE(duan_criterion(thermal).entangled);
}

TEST_CASE("tripartite combinations")
{
    const VlfResult vac = vlf_tripartite(QuadratureCovariance::identity());
    for (double x : vac.values)
        CHECK_THAT(x, WithinAbs(2.5, 1e-14));
    CHECK_FALSE(vac.tripartite);

    const CavityConfig c = reference_opo_cavity();
    const SpectrumResult clean = opo_spectrum(c, 1.2, 0.0259, 0.07, NoiseCouplings::zero());
    const VlfResult a = vlf_tripartite(clean.v_total);
    CHECK(*std::min_element(a.values.begin(), a.values.end()) < kVlfBound);
    CHECK(duan_criterion(clean.v_total).entangled);

    const SpectrumResult noisy = opo_spectrum(c, 1.2, 0.0259, 0.07, NoiseCouplings::measured());
    const VlfResult b = vlf_tripartite(noisy.v_total);
    CHECK_FALSE(b.tripartite);
    CHECK(b.values[1] > kVlfBound);
    CHECK(b.values[2] > kVlfBound);
}

TEST_CASE("sweeps")
{
    const CavityConfig c = reference_opo_cavity();
    SweepParams p;
    p.couplings = NoiseCouplings::measured();

    const auto rows = sweep(c, SweepAxis::pump_ratio, linear_grid(1.0, 1.7, 8), p);
    REQUIRE(rows.size() == 8);
    for (const auto& r : rows)
        CHECK(r.ok());
    CHECK_THAT(rows.back().axis_value, WithinRel(1.7, 1e-14));

    CHECK(sweep(c, SweepAxis::pump_ratio, linear_grid(1.0, 1.7, 0), p).empty());

    const auto z = sweep(c, SweepAxis::crystal_z, linear_grid(-0.03, 0.03, 25), p);
    for (std::size_t i = 0; i < z.size(); ++i)
        CHECK_THAT(z[i].v_total(q_index(0), q_index(0)),
                   WithinRel(z[z.size() - 1 - i].v_total(q_index(0), q_index(0)), 1e-10));

    // temperature enters only through eta, so the pump phase excess is linear in T
    const auto t = sweep(c, SweepAxis::temperature, linear_grid(257.0, 383.0, 10), p);
    const double d1 = t[1].v_total(q_index(0), q_index(0)) - t[0].v_total(q_index(0), q_index(0));
    const double d9 = t[9].v_total(q_index(0), q_index(0)) - t[8].v_total(q_index(0), q_index(0));
    CHECK_THAT(d9, WithinRel(d1, 1e-8));

    const auto bad = sweep(c, SweepAxis::frequency, std::vector<double>{0.0, 21e6}, p);
    CHECK_FALSE(bad[0].ok());
    CHECK(bad[1].ok());

    CHECK_THROWS_AS(parse_sweep_axis("detuning"), ValidationError);
    CHECK(parse_sweep_axis("crystal_z") == SweepAxis::crystal_z);
}

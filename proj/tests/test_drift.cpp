#include <catch_amalgamated.hpp>

#include "opo_noise/drift.hpp"

using namespace opo;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("free cavity drift is diagonal with total losses")
{
    const CavityConfig c = reference_opo_cavity();
    const DriftMatrix d = free_cavity_drift(c);
    CHECK(d.regime == Regime::free_cavity);
    for (int i = 0; i < kDim; ++i)
        for (int k = 0; k < kDim; ++k) {
            if (i != k)
                CHECK(d.matrix(i, k) == 0.0);
        }
    for (int j = 0; j < kModes; ++j) {
        CHECK(d.matrix(p_index(j), p_index(j)) == -c.mode(j).total_loss());
        CHECK(d.matrix(q_index(j), q_index(j)) == -c.mode(j).total_loss());
    }
}

TEST_CASE("free drift equals -(Mg^2 + Mm^2)/2")
{
    const CavityConfig c = reference_opo_cavity();
    const CouplingMatrices m = coupling_matrices(c);
    const Mat6 expect = -0.5 * (m.m_gamma * m.m_gamma + m.m_mu * m.m_mu);
    CHECK((free_cavity_drift(c).matrix - expect).cwiseAbs().maxCoeff() < 1e-15);
    CHECK_THAT(m.m_gamma(0, 0), WithinRel(std::sqrt(0.3), 1e-15));
    CHECK(m.m_gamma(0, 1) == 0.0);
}

TEST_CASE("OPO drift structure")
{
    const CavityConfig c = reference_opo_cavity();
    const OperatingPoint op = operating_point(c, 1.5, 0.07);
    const DriftMatrix d = opo_drift(c, op);
    CHECK(d.regime == Regime::opo_above_threshold);
    const Mat6& m = d.matrix;

    SECTION("amplitude and phase blocks decouple")
    {
        for (int a = 0; a < kModes; ++a)
            for (int b = 0; b < kModes; ++b) {
                CHECK(m(p_index(a), q_index(b)) == 0.0);
                CHECK(m(q_index(a), p_index(b)) == 0.0);
            }
    }
    SECTION("signal and idler phase rows coincide")
    {
        CHECK((m.row(q_index(1)) - m.row(q_index(2))).cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("phase difference is a null mode")
    {
        Vec6 v = Vec6::Zero();
        v(q_index(1)) = 1.0;
        v(q_index(2)) = -1.0;
        CHECK((m * v).cwiseAbs().maxCoeff() < 1e-15);
    }
    SECTION("all other modes decay")
    {
        Eigen::EigenSolver<Mat6> es(m);
        int zero = 0;
        for (int i = 0; i < kDim; ++i) {
            const double re = es.eigenvalues()(i).real();
            CHECK(re < 1e-12);
            if (std::abs(es.eigenvalues()(i)) < 1e-12)
                ++zero;
        }
        CHECK(zero == 1);
    }
    SECTION("pump couples through beta")
    {
        const double gb = c.mode(1).total_loss() * op.beta;
        CHECK_THAT(m(p_index(0), p_index(1)), WithinRel(-gb, 1e-15));
        CHECK_THAT(m(p_index(1), p_index(0)), WithinRel(gb, 1e-15));
        CHECK(m(p_index(0), p_index(0)) == -c.mode(0).total_loss());
    }
}

TEST_CASE("at threshold the OPO drift reduces to the free cavity plus signal-idler coupling")
{
    const CavityConfig c = reference_opo_cavity();
    const DriftMatrix d = opo_drift(c, operating_point(c, 1.0, 0.07));
    CHECK(d.matrix(p_index(0), p_index(1)) == 0.0);
    CHECK(d.matrix(q_index(1), q_index(0)) == 0.0);
    CHECK(d.matrix(p_index(1), p_index(2)) == c.mode(1).total_loss());
}

TEST_CASE("unbalanced signal and idler are rejected")
{
    CavityConfig c = reference_opo_cavity();
    c.modes[2].gamma = 0.021;
    const OperatingPoint op = operating_point(reference_opo_cavity(), 1.5, 0.07);
    CHECK_THROWS_AS(opo_drift(c, op), ValidationError);
    c = reference_opo_cavity();
    c.modes[2].mu += 1e-4;
    CHECK_THROWS_WITH(opo_drift(c, op), Catch::Matchers::ContainsSubstring("balanced"));
}

#ifndef OPO_NOISE_DRIFT_HPP
#define OPO_NOISE_DRIFT_HPP

#include <cmath>
#include <string>

#include "opo_noise/model.hpp"

namespace opo
{
enum class Regime
{
    free_cavity,
    opo_above_threshold,
};

inline const char* to_string(Regime r)
{
    return r == Regime::free_cavity ? "free_cavity" : "opo_above_threshold";
}

struct DriftMatrix
{
    Mat6 matrix = Mat6::Zero();
    Regime regime = Regime::free_cavity;
};

// Diagonal input couplings through the coupler (m_gamma) and the spurious
// loss channel (m_mu).
struct CouplingMatrices
{
    Mat6 m_gamma = Mat6::Zero();
    Mat6 m_mu = Mat6::Zero();
};

inline CouplingMatrices coupling_matrices(const CavityConfig& config)
{
    CouplingMatrices c;
    for (int j = 0; j < kModes; ++j) {
        const double g = std::sqrt(2.0 * config.mode(j).gamma);
        const double m = std::sqrt(2.0 * config.mode(j).mu);
        c.m_gamma(p_index(j), p_index(j)) = g;
        c.m_gamma(q_index(j), q_index(j)) = g;
        c.m_mu(p_index(j), p_index(j)) = m;
        c.m_mu(q_index(j), q_index(j)) = m;
    }
    return c;
}

// Empty cavity: M_A = -(M_gamma^2 + M_mu^2) / 2.
inline DriftMatrix free_cavity_drift(const CavityConfig& config)
{
    DriftMatrix d;
    d.regime = Regime::free_cavity;
    for (int j = 0; j < kModes; ++j) {
        const double loss = config.mode(j).total_loss();
        d.matrix(p_index(j), p_index(j)) = -loss;
        d.matrix(q_index(j), q_index(j)) = -loss;
    }
    return d;
}

inline void require_balanced(const CavityConfig& config)
{
    const ModeParams& s = config.mode(1);
    const ModeParams& i = config.mode(2);
    auto close = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), std::abs(b)); };
    if (!close(s.gamma, i.gamma) || !close(s.mu, i.mu))
        throw ValidationError("OPO drift requires balanced signal/idler losses (gamma1 = gamma2, mu1 = mu2); got gamma = " +
                              std::to_string(s.gamma) + "/" + std::to_string(i.gamma) +
                              ", mu = " + std::to_string(s.mu) + "/" + std::to_string(i.mu));
}

// Non-degenerate OPO above threshold at exact resonance. Amplitude and phase
// quadratures decouple; the q1 and q2 rows coincide, which leaves the
// signal-idler phase difference undamped (phase diffusion).
inline DriftMatrix opo_drift(const CavityConfig& config, const OperatingPoint& op)
{
    require_balanced(config);
    if (!(op.beta >= 0.0))
        throw ValidationError("beta must be non-negative");

    const double g0 = config.mode(0).total_loss();
    const double g = config.mode(1).total_loss();
    const double gb = g * op.beta;

    DriftMatrix d;
    d.regime = Regime::opo_above_threshold;
    Mat6& m = d.matrix;
    m.setZero();

    // amplitude block (p0, p1, p2)
    m(0, 0) = -g0;
    m(0, 2) = -gb;
    m(0, 4) = -gb;
    m(2, 0) = gb;
    m(2, 2) = -g;
    m(2, 4) = g;
    m(4, 0) = gb;
    m(4, 2) = g;
    m(4, 4) = -g;

    // phase block (q0, q1, q2)
    m(1, 1) = -g0;
    m(1, 3) = -gb;
    m(1, 5) = -gb;
    m(3, 1) = gb;
    m(3, 3) = -g;
    m(3, 5) = -g;
    m(5, 1) = gb;
    m(5, 3) = -g;
    m(5, 5) = -g;
    return d;
}

} // namespace opo

#endif // OPO_NOISE_DRIFT_HPP

#ifndef OPO_NOISE_SPECTRA_HPP
#define OPO_NOISE_SPECTRA_HPP

#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "opo_noise/drift.hpp"
#include "opo_noise/model.hpp"
#include "opo_noise/phonon.hpp"

namespace opo
{
inline constexpr double kMaxTransferCondition = 1e12;

// [i omega I - M_A]^-1
inline CMat6 intracavity_transfer(const DriftMatrix& drift, double omega)
{
    using cd = std::complex<double>;
    if (drift.regime == Regime::opo_above_threshold && omega == 0.0)
        throw NumericalError("transfer matrix is singular at omega = 0 in the OPO regime (undamped phase-difference mode)");

    const CMat6 a = cd(0.0, omega) * CMat6::Identity() - drift.matrix.cast<cd>();
    Eigen::JacobiSVD<CMat6> svd(a);
    const auto& sv = svd.singularValues();
    const double cond = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : INFINITY;
    if (!(cond <= kMaxTransferCondition)) {
        std::ostringstream msg;
        msg << "ill-conditioned system i*omega*I - M_A at omega = " << omega << " (condition number " << cond << ")";
        throw NumericalError(msg.str());
    }

    Eigen::FullPivLU<CMat6> lu(a);
    CMat6 t = lu.inverse();
    const double residual = (a * t - CMat6::Identity()).cwiseAbs().maxCoeff();
    if (!(residual < 1e-10)) {
        std::ostringstream msg;
        msg << "transfer matrix inversion residual " << residual << " at omega = " << omega;
        throw NumericalError(msg.str());
    }
    return t;
}

struct SpectrumResult
{
    double omega = 0.0;
    QuadratureCovariance v_total;
    QuadratureCovariance v_pure = QuadratureCovariance::zero();
    QuadratureCovariance v_loss = QuadratureCovariance::zero();
    QuadratureCovariance v_phase = QuadratureCovariance::zero();
    // I + V_pure before symmetrisation (Hermitian spectral matrix).
    CMat6 pure_spectral = CMat6::Identity();
    std::optional<QuadratureCovariance> detected;
};

namespace detail
{
inline Mat6 symmetric_real_part(const CMat6& h)
{
    const CMat6 herm = 0.5 * (h + h.adjoint());
    const Mat6 re = herm.real();
    return 0.5 * (re + re.transpose());
}
} // namespace detail

// Output covariance V = I + V_pure + V_loss + V_phase for vacuum/coherent inputs.
// Spectral matrices are Hermitian; the reported covariances are their real parts.
inline SpectrumResult output_covariance(const CavityConfig& config, const DriftMatrix& drift,
                                        const QuadratureCovariance& v_q, double omega)
{
    using cd = std::complex<double>;
    const CouplingMatrices cm = coupling_matrices(config);
    const CMat6 t = intracavity_transfer(drift, omega);
    const CMat6 td = t.adjoint();
    const CMat6 mg = cm.m_gamma.cast<cd>();
    const CMat6 mg2 = (cm.m_gamma * cm.m_gamma).cast<cd>();
    const CMat6 mu2 = (cm.m_mu * cm.m_mu).cast<cd>();
    const CMat6 vq = v_q.matrix.cast<cd>();

    const CMat6 left = mg * t;
    const CMat6 right = td * mg;
    const CMat6 pure = left * mg2 * right - mg * (t + td) * mg;
    const CMat6 loss = left * mu2 * right;
    const CMat6 phase = left * vq * right;

    SpectrumResult r;
    r.omega = omega;
    r.v_pure.matrix = detail::symmetric_real_part(pure);
    r.v_loss.matrix = detail::symmetric_real_part(loss);
    r.v_phase.matrix = detail::symmetric_real_part(phase);
    r.v_total.matrix = Mat6::Identity() + r.v_pure.matrix + r.v_loss.matrix + r.v_phase.matrix;
    r.pure_spectral = CMat6::Identity() + pure;
    return r;
}

// Det[I + V_pure]; equals 1 for a lossless, noiseless cavity (pure output state).
inline double purity_determinant(const SpectrumResult& r)
{
    return r.pure_spectral.determinant().real();
}

// Beam-splitter loss model: V -> D V D + (I - D^2), D = diag(sqrt(eff_j)) per quadrature.
inline QuadratureCovariance apply_detection(const QuadratureCovariance& v, const std::array<double, kModes>& efficiencies)
{
    Vec6 d;
    for (int j = 0; j < kModes; ++j) {
        const double e = efficiencies[static_cast<std::size_t>(j)];
        if (!(e >= 0.0 && e <= 1.0))
            throw ValidationError("detection efficiency of mode " + std::to_string(j) + " must lie in [0, 1]");
        d(p_index(j)) = std::sqrt(e);
        d(q_index(j)) = std::sqrt(e);
    }
    QuadratureCovariance out;
    out.matrix = d.asDiagonal() * v.matrix * d.asDiagonal();
    for (int i = 0; i < kDim; ++i)
        out.matrix(i, i) += 1.0 - d(i) * d(i);
    return out;
}

inline std::array<double, kModes> detection_efficiencies(const CavityConfig& config)
{
    return {config.mode(0).detection_efficiency, config.mode(1).detection_efficiency,
            config.mode(2).detection_efficiency};
}

// Variance of the linear combination w . X.
inline double combination_variance(const QuadratureCovariance& v, const Vec6& w)
{
    return w.dot(v.matrix * w);
}

struct DuanResult
{
    double value = 0.0;
    bool entangled = false;
};

// values within rounding of a bound are not counted as violations
inline constexpr double kBoundaryTolerance = 1e-12;

// Var[(p1 - p2)/sqrt2] + Var[(q1 + q2)/sqrt2] < 2 certifies signal-idler entanglement.
inline DuanResult duan_criterion(const QuadratureCovariance& v)
{
    const double s = 1.0 / std::sqrt(2.0);
    Vec6 u = Vec6::Zero();
    u(p_index(1)) = s;
    u(p_index(2)) = -s;
    Vec6 w = Vec6::Zero();
    w(q_index(1)) = s;
    w(q_index(2)) = s;
    DuanResult r;
    r.value = combination_variance(v, u) + combination_variance(v, w);
    r.entangled = r.value < 2.0 * (1.0 - kBoundaryTolerance);
    return r;
}

struct VlfResult
{
    std::array<double, 3> values{};
    int violations = 0;
    bool tripartite = false;
};

inline constexpr double kVlfBound = 2.0;

// Three van Loock-Furusawa combinations with unit gains:
//   V0 = Var[(p1 - p2)/sqrt2] + Var[(q1 + q2 - q0)/sqrt2]
//   V1 = Var[(p0 + p1)/sqrt2] + Var[(q0 - q1 - q2)/sqrt2]
//   V2 = Var[(p0 + p2)/sqrt2] + Var[(q0 - q1 - q2)/sqrt2]
// Each separable bipartition it addresses bounds it by 2; violating any two
// excludes every bipartition.
inline VlfResult vlf_tripartite(const QuadratureCovariance& v)
{
    const double s = 1.0 / std::sqrt(2.0);
    auto combo = [](std::initializer_list<std::pair<int, double>> terms) {
        Vec6 w = Vec6::Zero();
        for (auto [i, c] : terms)
            w(i) = c;
        return w;
    };
    const Vec6 q_phase = combo({{q_index(0), s}, {q_index(1), -s}, {q_index(2), -s}});

    VlfResult r;
    r.values[0] = combination_variance(v, combo({{p_index(1), s}, {p_index(2), -s}})) +
                  combination_variance(v, combo({{q_index(1), s}, {q_index(2), s}, {q_index(0), -s}}));
    r.values[1] = combination_variance(v, combo({{p_index(0), s}, {p_index(1), s}})) + combination_variance(v, q_phase);
    r.values[2] = combination_variance(v, combo({{p_index(0), s}, {p_index(2), s}})) + combination_variance(v, q_phase);
    for (double x : r.values)
        if (x < kVlfBound * (1.0 - kBoundaryTolerance))
            ++r.violations;
    r.tripartite = r.violations >= 2;
    return r;
}

// ---------------------------------------------------------------------------
// Sweeps

enum class SweepAxis
{
    pump_ratio,
    frequency,
    temperature,
    crystal_z,
};

inline const char* to_string(SweepAxis a)
{
    switch (a) {
    case SweepAxis::pump_ratio: return "pump_ratio";
    case SweepAxis::frequency: return "frequency_hz";
    case SweepAxis::temperature: return "temperature_k";
    case SweepAxis::crystal_z: return "crystal_z_m";
    }
    return "?";
}

inline SweepAxis parse_sweep_axis(const std::string& name)
{
    if (name == "pump_ratio" || name == "sigma")
        return SweepAxis::pump_ratio;
    if (name == "frequency" || name == "frequency_hz")
        return SweepAxis::frequency;
    if (name == "temperature" || name == "temperature_k")
        return SweepAxis::temperature;
    if (name == "crystal_z" || name == "crystal_z_m")
        return SweepAxis::crystal_z;
    throw ValidationError("unknown sweep axis '" + name + "' (expected pump_ratio, frequency, temperature, crystal_z)");
}

// Evenly spaced grid; count 0 gives an empty grid, count 1 gives {start}.
inline std::vector<double> linear_grid(double start, double stop, std::size_t count)
{
    std::vector<double> g;
    g.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        g.push_back(count == 1 ? start : start + (stop - start) * static_cast<double>(i) / static_cast<double>(count - 1));
    return g;
}

// Parameters held fixed while one axis varies.
struct SweepParams
{
    double pump_ratio = 1.5;
    double frequency_hz = kReferenceAnalysisFrequency;
    double threshold_power = kReferenceThresholdPower;
    NoiseCouplings couplings;      // reference couplings (room temperature, crystal centred)
    bool apply_detection = false;
};

struct SweepRow
{
    double axis_value = 0.0;
    double omega = 0.0;
    double pump_ratio = 0.0;
    QuadratureCovariance v_total;
    DuanResult duan;
    VlfResult vlf;
    std::string error;  // empty when the point evaluated successfully

    bool ok() const { return error.empty(); }
};

// OPO covariance at one (pump ratio, omega, couplings) point.
inline SpectrumResult opo_spectrum(const CavityConfig& config, double pump_ratio, double omega,
                                   double threshold_power, const NoiseCouplings& couplings)
{
    const OperatingPoint op = operating_point(config, pump_ratio, threshold_power);
    const DriftMatrix drift = opo_drift(config, op);
    const QuadratureCovariance vq = build_vq(couplings, op.intracavity_powers);
    return output_covariance(config, drift, vq, omega);
}

inline SweepRow evaluate_sweep_point(const CavityConfig& config, SweepAxis axis, double value,
                                     const SweepParams& params)
{
    SweepRow row;
    row.axis_value = value;
    row.pump_ratio = params.pump_ratio;
    try {
        double f = params.frequency_hz;
        NoiseCouplings eta = params.couplings;
        switch (axis) {
        case SweepAxis::pump_ratio:
            row.pump_ratio = value;
            break;
        case SweepAxis::frequency:
            f = value;
            break;
        case SweepAxis::temperature: {
            const double target = temperature_law(value);
            const double ref = params.couplings.eta(0, 0);
            eta = ref > 0.0 ? params.couplings.scaled(target / ref) : NoiseCouplings::scaled_from_pump(target);
            break;
        }
        case SweepAxis::crystal_z:
            eta = params.couplings.scaled(waist_position_profile(config, value) / waist_position_profile(config, 0.0));
            break;
        }
        row.omega = normalize_frequency(f, config);
        const SpectrumResult s = opo_spectrum(config, row.pump_ratio, row.omega, params.threshold_power, eta);
        row.v_total = params.apply_detection ? apply_detection(s.v_total, detection_efficiencies(config)) : s.v_total;
        row.duan = duan_criterion(row.v_total);
        row.vlf = vlf_tripartite(row.v_total);
    } catch (const std::exception& e) {
        row.error = e.what();
    }
    return row;
}

inline std::vector<SweepRow> sweep(const CavityConfig& config, SweepAxis axis, const std::vector<double>& grid,
                                   const SweepParams& params)
{
    require_valid(config);
    std::vector<SweepRow> rows;
    rows.reserve(grid.size());
    for (double v : grid)
        rows.push_back(evaluate_sweep_point(config, axis, v, params));
    return rows;
}

} // namespace opo

#endif // OPO_NOISE_SPECTRA_HPP

#ifndef OPO_NOISE_MODEL_HPP
#define OPO_NOISE_MODEL_HPP

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace opo
{
// Quadrature ordering used throughout: [p0, q0, p1, q1, p2, q2].
inline constexpr int kModes = 3;
inline constexpr int kDim = 2 * kModes;

using Vec3 = Eigen::Matrix<double, 3, 1>;
using Mat3 = Eigen::Matrix<double, 3, 3>;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using CMat6 = Eigen::Matrix<std::complex<double>, 6, 6>;

constexpr int p_index(int mode) { return 2 * mode; }
constexpr int q_index(int mode) { return 2 * mode + 1; }

namespace constants
{
inline constexpr double speed_of_light = 299792458.0;   // m/s
inline constexpr double planck = 6.62607015e-34;        // J s
inline constexpr double hbar = planck / (2.0 * std::numbers::pi);
inline constexpr double boltzmann = 1.380649e-23;       // J/K
} // namespace constants

// Bad input: configuration, ranges, model validity limits.
class ValidationError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

// Singular systems, failed factorizations, diverging trajectories.
class NumericalError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct ModeParams
{
    int index = 0;                    // 0 pump, 1 signal, 2 idler
    double wavelength = 0.0;          // m (vacuum)
    double gamma = 0.0;               // half coupler transmission per round trip, T = 2 gamma
    double mu = 0.0;                  // half spurious loss per round trip
    double refractive_index = 1.0;
    double detection_efficiency = 1.0;

    double total_loss() const { return gamma + mu; }  // gamma' = gamma + mu
    double wavenumber() const { return 2.0 * std::numbers::pi / wavelength; }
    double photon_energy() const { return constants::planck * constants::speed_of_light / wavelength; }
};

struct CavityConfig
{
    std::array<ModeParams, kModes> modes{};
    double free_spectral_range = 0.0;  // Hz
    double crystal_length = 0.0;       // m
    double rayleigh_length = 0.0;      // m, inside the crystal
    std::array<double, kModes> waists{};  // m, at the cavity focus

    double round_trip_time() const { return 1.0 / free_spectral_range; }
    const ModeParams& mode(int j) const { return modes.at(static_cast<std::size_t>(j)); }
};

struct OperatingPoint
{
    double pump_ratio = 1.0;       // P_in / P_th
    double threshold_power = 0.0;  // W
    double beta = 0.0;             // signal (idler) to pump amplitude ratio
    std::array<double, kModes> intracavity_powers{};  // W
};

// Real symmetric 6x6 quadrature covariance, SQL normalised (coherent state = identity).
struct QuadratureCovariance
{
    Mat6 matrix = Mat6::Identity();

    static QuadratureCovariance identity() { return {}; }
    static QuadratureCovariance zero() { return {Mat6::Zero()}; }

    double operator()(int i, int k) const { return matrix(i, k); }
    double& operator()(int i, int k) { return matrix(i, k); }

    bool is_symmetric(double rel_tol = 1e-12) const
    {
        const double scale = std::max(1.0, matrix.cwiseAbs().maxCoeff());
        return (matrix - matrix.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
    }

    // Eigenvalue floor >= -rel_tol * largest eigenvalue.
    bool is_psd(double rel_tol = 1e-10) const
    {
        Eigen::SelfAdjointEigenSolver<Mat6> es(0.5 * (matrix + matrix.transpose()), Eigen::EigenvaluesOnly);
        const auto& ev = es.eigenvalues();
        const double largest = std::max(ev.maxCoeff(), 0.0);
        return ev.minCoeff() >= -rel_tol * std::max(largest, 1e-300);
    }
};

struct Violation
{
    std::string field;
    std::string rule;
};

inline std::vector<Violation> validate_config(const CavityConfig& config)
{
    std::vector<Violation> out;
    auto add = [&out](std::string field, std::string rule) { out.push_back({std::move(field), std::move(rule)}); };

    for (int j = 0; j < kModes; ++j) {
        const ModeParams& m = config.mode(j);
        const std::string prefix = "mode" + std::to_string(j) + ".";
        if (m.index != j)
            add(prefix + "index", "mode index must match its position (0 pump, 1 signal, 2 idler)");
        if (!(m.wavelength > 0.0))
            add(prefix + "wavelength_m", "wavelength must be positive");
        if (!(m.gamma > 0.0))
            add(prefix + "gamma", "gamma must be positive");
        else if (!(m.gamma < 1.0))
            add(prefix + "gamma", "gamma must be below 1");
        if (!(m.mu >= 0.0 && m.mu < 1.0))
            add(prefix + "mu", "mu must lie in [0, 1)");
        if (m.gamma > 0.0 && m.mu >= 0.0 && !(m.gamma + m.mu < 1.0))
            add(prefix + "gamma", "gamma + mu must be below 1 (small-loss regime)");
        if (!(m.refractive_index > 0.0))
            add(prefix + "refractive_index", "refractive index must be positive");
        if (!(m.detection_efficiency >= 0.0 && m.detection_efficiency <= 1.0))
            add(prefix + "detection_efficiency", "detection efficiency must lie in [0, 1]");
        if (!(config.waists[static_cast<std::size_t>(j)] > 0.0))
            add(prefix + "waist_m", "waist must be positive");
    }

    const double l0 = config.mode(0).wavelength;
    for (int j = 1; j < kModes; ++j) {
        const double lj = config.mode(j).wavelength;
        if (l0 > 0.0 && lj > 0.0 && std::abs(2.0 * l0 / lj - 1.0) > 0.01)
            add("mode" + std::to_string(j) + ".wavelength_m",
                "energy conservation: pump wavelength must be half of this wavelength within 1%");
    }

    if (!(config.free_spectral_range > 0.0))
        add("cavity.fsr_hz", "free spectral range must be positive");
    if (!(config.crystal_length > 0.0))
        add("cavity.crystal_length_m", "crystal length must be positive");
    if (!(config.rayleigh_length > 0.0))
        add("cavity.rayleigh_length_m", "Rayleigh length must be positive");
    return out;
}

inline void require_valid(const CavityConfig& config)
{
    const auto violations = validate_config(config);
    if (violations.empty())
        return;
    std::string msg = "invalid cavity configuration:";
    for (const auto& v : violations)
        msg += "\n  " + v.field + ": " + v.rule;
    throw ValidationError(msg);
}

// Dimensionless analysis frequency omega = 2 pi f tau (tau = 1/FSR), so loss
// rates per round trip and omega share units.
inline double normalize_frequency(double f_hz, const CavityConfig& config)
{
    if (!(f_hz >= 0.0))
        throw ValidationError("analysis frequency must be non-negative, got " + std::to_string(f_hz));
    if (!(config.free_spectral_range > 0.0))
        throw ValidationError("free spectral range must be positive");
    return 2.0 * std::numbers::pi * f_hz / config.free_spectral_range;
}

// Above-threshold steady state. Pump clamps at its threshold intracavity
// value; signal and idler carry beta^2 times the pump photon flux.
inline OperatingPoint operating_point(const CavityConfig& config, double pump_ratio, double threshold_power)
{
    if (!(pump_ratio >= 1.0))
        throw ValidationError("pump ratio must be >= 1 (below-threshold operation is not modelled), got " +
                              std::to_string(pump_ratio));
    if (!(threshold_power > 0.0))
        throw ValidationError("threshold power must be positive");

    const ModeParams& pump = config.mode(0);
    const double gamma = 0.5 * (config.mode(1).gamma + config.mode(2).gamma);

    OperatingPoint op;
    op.pump_ratio = pump_ratio;
    op.threshold_power = threshold_power;
    op.beta = std::sqrt(pump.gamma / gamma) * std::sqrt(std::sqrt(pump_ratio) - 1.0);

    const double buildup = 2.0 * pump.gamma / (pump.total_loss() * pump.total_loss());
    op.intracavity_powers[0] = buildup * threshold_power;
    for (int j = 1; j < kModes; ++j)
        op.intracavity_powers[static_cast<std::size_t>(j)] =
            op.beta * op.beta * op.intracavity_powers[0] * (pump.wavelength / config.mode(j).wavelength);
    return op;
}

// Waist of a Gaussian mode with Rayleigh length z0 inside a medium of index n.
inline double waist_from_rayleigh(double rayleigh_length, double refractive_index, double wavelength)
{
    return std::sqrt(rayleigh_length * wavelength / (refractive_index * std::numbers::pi));
}

// Triply resonant KTP OPO characterised in the noise study: 70% / 96% couplers,
// finesses 16 / 135 / 115, FSR 5.1 GHz, 12 mm crystal. Signal and idler share
// the mean of their two measured total losses (balanced model).
inline CavityConfig reference_opo_cavity()
{
    constexpr double pi = std::numbers::pi;
    CavityConfig c;
    const double gamma_p = 0.15;
    const double gamma_ir = 0.02;
    const double loss_ir = 0.5 * (pi / 135.0 + pi / 115.0);
    c.modes[0] = {0, 532e-9, gamma_p, pi / 16.0 - gamma_p, 1.788, 0.65};
    c.modes[1] = {1, 1064e-9, gamma_ir, loss_ir - gamma_ir, 1.830, 0.87};
    c.modes[2] = {2, 1064e-9, gamma_ir, loss_ir - gamma_ir, 1.740, 0.87};
    c.free_spectral_range = 5.1e9;
    c.crystal_length = 12e-3;
    c.rayleigh_length = 8.13e-3;
    for (int j = 0; j < kModes; ++j)
        c.waists[static_cast<std::size_t>(j)] =
            waist_from_rayleigh(c.rayleigh_length, c.modes[j].refractive_index, c.modes[j].wavelength);
    return c;
}

inline constexpr double kReferenceThresholdPower = 0.070;  // W
inline constexpr double kReferenceAnalysisFrequency = 21e6; // Hz

// Nearly concentric test cavity used for the crystal-position study.
inline CavityConfig geometry_study_cavity()
{
    CavityConfig c = reference_opo_cavity();
    c.modes[0].gamma = 0.060;
    c.modes[0].mu = 0.0165;
    c.rayleigh_length = 8.13e-3;
    for (int j = 0; j < kModes; ++j)
        c.waists[static_cast<std::size_t>(j)] =
            waist_from_rayleigh(c.rayleigh_length, c.modes[j].refractive_index, c.modes[j].wavelength);
    return c;
}

} // namespace opo

#endif // OPO_NOISE_MODEL_HPP

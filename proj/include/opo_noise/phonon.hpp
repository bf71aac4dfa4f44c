#ifndef OPO_NOISE_PHONON_HPP
#define OPO_NOISE_PHONON_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <sstream>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "opo_noise/model.hpp"

namespace opo
{
// Phase-noise coupling constants eta_jk (1/W): <dQ_j dQ_k> = eta_jk sqrt(P_j P_k).
struct NoiseCouplings
{
    Mat3 eta = Mat3::Zero();

    double operator()(int j, int k) const { return eta(j, k); }

    static NoiseCouplings zero() { return {}; }

    // Values characterised on the KTP cavity by coherent injection.
    static NoiseCouplings measured()
    {
        NoiseCouplings c;
        c.eta << 0.53, 0.14, 0.15,
                 0.14, 0.15, 0.087,
                 0.15, 0.087, 0.14;
        return c;
    }

    // All couplings tied to eta_00 with the measured ratios:
    // eta11 = eta22 = eta00/4, eta01 = eta02 = 0.27 eta00, eta12 = 0.16 eta00.
    static NoiseCouplings scaled_from_pump(double eta00)
    {
        NoiseCouplings c;
        c.eta << 1.0, 0.27, 0.27,
                 0.27, 0.25, 0.16,
                 0.27, 0.16, 0.25;
        c.eta *= eta00;
        return c;
    }

    NoiseCouplings scaled(double factor) const { return {eta * factor}; }

    double min_eigenvalue() const
    {
        Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (eta + eta.transpose()), Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    }

    bool is_psd(double rel_tol = 1e-12) const
    {
        const double scale = std::max(eta.cwiseAbs().maxCoeff(), 1e-300);
        return min_eigenvalue() >= -rel_tol * scale;
    }
};

// Phase-only covariance of the phonon noise: entry (q_j, q_k) = eta_jk sqrt(P_j P_k).
inline QuadratureCovariance build_vq(const NoiseCouplings& couplings, const std::array<double, kModes>& powers)
{
    const Mat3& eta = couplings.eta;
    if ((eta - eta.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, eta.cwiseAbs().maxCoeff()))
        throw ValidationError("noise coupling matrix eta must be symmetric");
    if (!couplings.is_psd()) {
        std::ostringstream msg;
        msg << "noise coupling matrix eta is not positive semidefinite (eigenvalue " << couplings.min_eigenvalue()
            << " /W)";
        throw ValidationError(msg.str());
    }
    for (int j = 0; j < kModes; ++j)
        if (!(powers[static_cast<std::size_t>(j)] >= 0.0))
            throw ValidationError("intracavity power of mode " + std::to_string(j) + " must be non-negative");

    QuadratureCovariance v = QuadratureCovariance::zero();
    for (int j = 0; j < kModes; ++j)
        for (int k = 0; k < kModes; ++k)
            v(q_index(j), q_index(k)) =
                eta(j, k) * std::sqrt(powers[static_cast<std::size_t>(j)] * powers[static_cast<std::size_t>(k)]);
    return v;
}

// Six-component strain/photoelastic vectors use the Voigt order xx, yy, zz, yz, xz, xy.
using Voigt = std::array<double, 6>;

struct CrystalModel
{
    std::array<Voigt, kModes> photoelastic{};  // p_jj,(lm) per mode
    Voigt strain_rms{};                         // S_lm at the analysis frequency
    double coherence_length = 0.0;              // m
    double density = 0.0;                       // kg/m^3
    double sound_speed = 0.0;                   // m/s
    double temperature = 0.0;                   // K
};

inline void require_valid(const CrystalModel& crystal)
{
    if (!(crystal.coherence_length > 0.0))
        throw ValidationError("crystal.lc_m must be positive");
    if (!(crystal.temperature > 0.0))
        throw ValidationError("crystal.temperature_k must be positive");
    if (!(crystal.density > 0.0))
        throw ValidationError("crystal.density_kg_m3 must be positive");
    if (!(crystal.sound_speed > 0.0))
        throw ValidationError("crystal.sound_speed_m_s must be positive");
}

// c_jk = sum_lm p_jj,lm p_kk,lm S_lm^2
inline double photoelastic_coupling(const CrystalModel& crystal, int j, int k)
{
    const Voigt& pj = crystal.photoelastic.at(static_cast<std::size_t>(j));
    const Voigt& pk = crystal.photoelastic.at(static_cast<std::size_t>(k));
    double c = 0.0;
    for (std::size_t l = 0; l < 6; ++l)
        c += pj[l] * pk[l] * crystal.strain_rms[l] * crystal.strain_rms[l];
    return c;
}

// rms strain from an acoustic energy density, E/V = rho v^2 S^2 / 2.
inline double strain_rms_from_energy_density(double energy_density, double density, double sound_speed)
{
    return std::sqrt(2.0 * energy_density / (density * sound_speed * sound_speed));
}

// Beam radius squared of mode j at distance z from the focus.
inline double beam_radius_sq(const CavityConfig& config, int j, double z)
{
    const double w0 = config.waists.at(static_cast<std::size_t>(j));
    const double u = z / config.rayleigh_length;
    return w0 * w0 * (1.0 + u * u);
}

// Overlap integral over the crystal, int (2/pi) / (w_j^2 + w_k^2) dz, for a
// crystal centred at crystal_center_z relative to the focus.
inline double overlap_integral(const CavityConfig& config, int j, int k, double crystal_center_z)
{
    const double half = 0.5 * config.crystal_length;
    auto integrand = [&](double z) {
        return (2.0 / std::numbers::pi) / (beam_radius_sq(config, j, z) + beam_radius_sq(config, k, z));
    };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        integrand, crystal_center_z - half, crystal_center_z + half, 15, 1e-13);
}

// Effective waist w_jk defined by l / (pi w_jk^2) = overlap integral.
inline double effective_waist(const CavityConfig& config, int j, int k, double crystal_center_z = 0.0)
{
    const double integral = overlap_integral(config, j, k, crystal_center_z);
    return std::sqrt(config.crystal_length / (std::numbers::pi * integral));
}

// l sqrt(lambda_j lambda_k) / (pi w_jk^2), evaluated by quadrature.
inline double geometry_factor(const CavityConfig& config, int j, int k, double crystal_center_z = 0.0)
{
    const double lj = config.mode(j).wavelength;
    const double lk = config.mode(k).wavelength;
    return std::sqrt(lj * lk) * overlap_integral(config, j, k, crystal_center_z);
}

// Closed form of l lambda / (pi w_00^2) versus crystal centre offset z.
inline double waist_position_profile(const CavityConfig& config, double z)
{
    if (!(config.rayleigh_length > 0.0))
        throw ValidationError("Rayleigh length must be positive");
    const double l = config.crystal_length;
    const double z0 = config.rayleigh_length;
    return config.mode(0).refractive_index *
           (std::atan((2.0 * z + l) / (2.0 * z0)) - std::atan((2.0 * z - l) / (2.0 * z0)));
}

// Mean energy of a set of thermally populated acoustic modes (J), zero-point included.
inline double thermal_phonon_energy(double temperature, std::span<const double> mode_frequencies)
{
    if (!(temperature > 0.0))
        throw ValidationError("temperature must be positive");
    double e = 0.0;
    for (double w : mode_frequencies) {
        const double quantum = constants::hbar * w;
        const double x = quantum / (constants::boltzmann * temperature);
        e += quantum * (1.0 / std::expm1(x) + 0.5);
    }
    return e;
}

// Microscopic coupling in the delta-correlated strain limit:
// eta_jk = k_j k_k n_j^3 n_k^3 / (4 h c) * l_c^3 * c_jk * l sqrt(lambda_j lambda_k) / (pi w_jk^2)
inline double eta_microscopic(const CavityConfig& config, const CrystalModel& crystal, int j, int k,
                              double crystal_center_z = 0.0)
{
    require_valid(crystal);
    const ModeParams& mj = config.mode(j);
    const ModeParams& mk = config.mode(k);
    const double c_jk = photoelastic_coupling(crystal, j, k);
    if (c_jk == 0.0)
        return 0.0;
    const double nj3 = std::pow(mj.refractive_index, 3);
    const double nk3 = std::pow(mk.refractive_index, 3);
    const double lc3 = std::pow(crystal.coherence_length, 3);
    return mj.wavenumber() * mk.wavenumber() * nj3 * nk3 /
           (4.0 * constants::planck * constants::speed_of_light) * lc3 * c_jk *
           geometry_factor(config, j, k, crystal_center_z);
}

inline NoiseCouplings eta_microscopic_matrix(const CavityConfig& config, const CrystalModel& crystal,
                                             double crystal_center_z = 0.0)
{
    NoiseCouplings out;
    for (int j = 0; j < kModes; ++j)
        for (int k = j; k < kModes; ++k) {
            const double e = eta_microscopic(config, crystal, j, k, crystal_center_z);
            out.eta(j, k) = e;
            out.eta(k, j) = e;
        }
    return out;
}

// Linear temperature dependence of eta_00 measured between 257 and 383 K.
inline constexpr double kReferenceTemperatureSlope = 5.92e-3;       // 1/(W K)
inline constexpr double kReferenceTemperatureSlopeSigma = 0.46e-3;
inline constexpr double kReferenceTemperatureIntercept = -1.38;     // 1/W
inline constexpr double kReferenceTemperatureInterceptSigma = 0.13;

// Clamped at zero: a negative variance is unphysical.
inline double temperature_law(double temperature, double slope = kReferenceTemperatureSlope,
                              double intercept = kReferenceTemperatureIntercept)
{
    return std::max(0.0, slope * temperature + intercept);
}

} // namespace opo

#endif // OPO_NOISE_PHONON_HPP

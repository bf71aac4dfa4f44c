#ifndef OPO_NOISE_FIT_HPP
#define OPO_NOISE_FIT_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "opo_noise/drift.hpp"
#include "opo_noise/model.hpp"
#include "opo_noise/phonon.hpp"
#include "opo_noise/spectra.hpp"

namespace opo
{
struct FitParameter
{
    std::string name;
    double value = 0.0;
    double sigma = 0.0;
};

struct FitResult
{
    std::vector<FitParameter> parameters;
    double rss = 0.0;                  // weighted when uncertainties were supplied
    int dof = 0;
    std::vector<double> residuals;     // y - model, per point
    std::vector<std::string> warnings;
    std::vector<std::string> notes;    // systematic caveats, not folded into sigmas
    std::optional<double> zero_crossing;        // temperature fits only
    std::optional<double> zero_crossing_sigma;

    const FitParameter& operator[](const std::string& name) const
    {
        for (const auto& p : parameters)
            if (p.name == name)
                return p;
        throw std::out_of_range("no fit parameter named " + name);
    }
};

// ---------------------------------------------------------------------------
// Least squares primitives. With per-point sigmas the parameter errors come
// from the weights; without, from the residual scatter.

namespace detail
{
inline void require_points(std::size_t n, std::size_t n_params, const char* what)
{
    if (n < 3 || n < n_params + 1)
        throw ValidationError(std::string(what) + " needs at least 3 data points, got " + std::to_string(n));
}

inline std::vector<double> weights_for(std::size_t n, const std::vector<double>& sigma)
{
    if (sigma.empty())
        return std::vector<double>(n, 1.0);
    if (sigma.size() != n)
        throw ValidationError("uncertainty column length does not match the data");
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(sigma[i] > 0.0))
            throw ValidationError("uncertainties must be positive");
        w[i] = 1.0 / (sigma[i] * sigma[i]);
    }
    return w;
}
} // namespace detail

// y = a x
inline FitResult fit_proportional(const std::vector<double>& x, const std::vector<double>& y,
                                  const std::vector<double>& sigma, const std::string& name)
{
    const std::size_t n = x.size();
    if (y.size() != n)
        throw ValidationError("x and y lengths differ");
    detail::require_points(n, 1, "proportional fit");
    const auto w = detail::weights_for(n, sigma);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += w[i] * x[i] * x[i];
        sxy += w[i] * x[i] * y[i];
    }
    if (!(sxx > 0.0))
        throw ValidationError("degenerate abscissa: all x are zero");
    const double a = sxy / sxx;

    FitResult r;
    r.dof = static_cast<int>(n) - 1;
    for (std::size_t i = 0; i < n; ++i) {
        const double res = y[i] - a * x[i];
        r.residuals.push_back(res);
        r.rss += w[i] * res * res;
    }
    const double var = sigma.empty() ? r.rss / r.dof / sxx : 1.0 / sxx;
    r.parameters.push_back({name, a, std::sqrt(var)});
    return r;
}

// y = slope x + intercept
inline FitResult fit_line(const std::vector<double>& x, const std::vector<double>& y, const std::vector<double>& sigma,
                          double* covariance = nullptr)
{
    const std::size_t n = x.size();
    if (y.size() != n)
        throw ValidationError("x and y lengths differ");
    detail::require_points(n, 2, "linear fit");
    const auto w = detail::weights_for(n, sigma);
    double s = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s += w[i];
        sx += w[i] * x[i];
        sy += w[i] * y[i];
        sxx += w[i] * x[i] * x[i];
        sxy += w[i] * x[i] * y[i];
    }
    const double det = s * sxx - sx * sx;
    if (!(det > 0.0))
        throw ValidationError("degenerate abscissa: all x are equal");
    const double slope = (s * sxy - sx * sy) / det;
    const double intercept = (sxx * sy - sx * sxy) / det;

    FitResult r;
    r.dof = static_cast<int>(n) - 2;
    for (std::size_t i = 0; i < n; ++i) {
        const double res = y[i] - (slope * x[i] + intercept);
        r.residuals.push_back(res);
        r.rss += w[i] * res * res;
    }
    const double scale = sigma.empty() ? r.rss / r.dof : 1.0;
    r.parameters.push_back({"slope", slope, std::sqrt(scale * s / det)});
    r.parameters.push_back({"intercept", intercept, std::sqrt(scale * sxx / det)});
    if (covariance)
        *covariance = -scale * sx / det;
    return r;
}

// ---------------------------------------------------------------------------
// Power references

enum class PowerReference
{
    intracavity,
    reflected_output,
    transmitted_output,
};

inline const char* to_string(PowerReference r)
{
    switch (r) {
    case PowerReference::intracavity: return "intracavity";
    case PowerReference::reflected_output: return "reflected_output";
    case PowerReference::transmitted_output: return "transmitted_output";
    }
    return "?";
}

inline PowerReference parse_power_reference(const std::string& s)
{
    if (s == "intracavity")
        return PowerReference::intracavity;
    if (s == "reflected_output" || s == "reflected")
        return PowerReference::reflected_output;
    if (s == "transmitted_output" || s == "transmitted")
        return PowerReference::transmitted_output;
    throw ValidationError("unknown power reference '" + s + "' (intracavity, reflected_output, transmitted_output)");
}

// Resonant buildup of an impedance-mismatched cavity on resonance:
// P_c = 2 gamma / gamma'^2 P_in, P_refl = ((gamma - mu)/(gamma + mu))^2 P_in, P_trans = 2 gamma P_c.
inline double intracavity_power(double power, PowerReference ref, const ModeParams& mode)
{
    switch (ref) {
    case PowerReference::intracavity:
        return power;
    case PowerReference::transmitted_output:
        return power / (2.0 * mode.gamma);
    case PowerReference::reflected_output: {
        const double d = mode.gamma - mode.mu;
        if (d == 0.0)
            throw ValidationError("reflected power carries no intracavity information at critical coupling");
        return power * 2.0 * mode.gamma / (d * d);
    }
    }
    return power;
}

inline double output_power(double intracavity, PowerReference ref, const ModeParams& mode)
{
    return intracavity / intracavity_power(1.0, ref, mode);
}

struct PowerVarianceRecord
{
    double power = 0.0;
    PowerReference power_reference = PowerReference::intracavity;
    double variance_p = 1.0;
    double variance_q = 1.0;
    std::optional<double> sigma;   // common uncertainty of both variances
};

struct CrossRecord
{
    double power_j = 0.0;          // intracavity W
    double power_k = 0.0;
    double covariance_q = 0.0;
    std::optional<double> sigma;
};

struct EtaFitOptions
{
    bool free_intercept = false;     // diagnostics only
    bool undo_detection = true;      // data are detected variances
};

// Output (q_j, q_k) covariance per unit internal phase-noise covariance, empty cavity.
inline double free_cavity_phase_gain(const CavityConfig& config, int j, int k, double omega)
{
    QuadratureCovariance unit = QuadratureCovariance::zero();
    unit(q_index(j), q_index(k)) = 1.0;
    unit(q_index(k), q_index(j)) = 1.0;
    const SpectrumResult s = output_covariance(config, free_cavity_drift(config), unit, omega);
    return s.v_phase(q_index(j), q_index(k));
}

namespace detail
{
inline FitResult fit_through_origin_or_line(const std::vector<double>& x, const std::vector<double>& y,
                                            const std::vector<double>& sigma, const std::string& name,
                                            bool free_intercept)
{
    if (!free_intercept)
        return fit_proportional(x, y, sigma, name);
    FitResult r = fit_line(x, y, sigma);
    r.parameters[0].name = name;
    return r;
}
} // namespace detail

// eta_jj from phase-variance-versus-power data of an empty, injected cavity.
inline FitResult fit_eta_diagonal(const std::vector<PowerVarianceRecord>& records, const CavityConfig& config, int mode,
                                  double omega, const EtaFitOptions& options = {})
{
    detail::require_points(records.size(), options.free_intercept ? 2 : 1, "eta diagonal fit");
    const PowerReference ref = records.front().power_reference;
    for (const auto& r : records)
        if (r.power_reference != ref)
            throw ValidationError("mixed power references in eta diagonal fit data");
    const bool weighted = records.front().sigma.has_value();
    for (const auto& r : records) {
        if (r.sigma.has_value() != weighted)
            throw ValidationError("uncertainties must be given for all records or none");
        if (!(r.power >= 0.0))
            throw ValidationError("powers must be non-negative");
        if (!(r.variance_p > 0.0 && r.variance_q > 0.0))
            throw ValidationError("variances must be positive");
    }

    const ModeParams& m = config.mode(mode);
    const double eff = options.undo_detection ? m.detection_efficiency : 1.0;
    if (!(eff > 0.0))
        throw ValidationError("detection efficiency must be positive to undo detection");
    const double gain = free_cavity_phase_gain(config, mode, mode, omega);

    std::vector<double> x, y, s;
    for (const auto& r : records) {
        x.push_back(intracavity_power(r.power, ref, m));
        // detected -> output -> internal excess phase variance
        y.push_back((r.variance_q - 1.0) / (eff * gain));
        if (weighted)
            s.push_back(*r.sigma / (eff * gain));
    }
    const std::string name = "eta_" + std::to_string(mode) + std::to_string(mode);
    FitResult fit = detail::fit_through_origin_or_line(x, y, s, name, options.free_intercept);

    if (fit.parameters[0].value < 0.0)
        fit.warnings.push_back("negative fitted slope for " + name);
    fit.notes.push_back("crystal-position systematic (about 20% on eta) is not included in sigma");

    // amplitude quadrature should sit at the SQL
    if (weighted) {
        for (const auto& r : records)
            if (std::abs(r.variance_p - 1.0) > 3.0 * *r.sigma) {
                fit.warnings.push_back("model violation: amplitude variance deviates from SQL by more than 3 sigma at P = " +
                                       std::to_string(r.power) + " W");
                break;
            }
    } else {
        double mean = 0.0;
        for (const auto& r : records)
            mean += r.variance_p;
        mean /= static_cast<double>(records.size());
        double var = 0.0;
        for (const auto& r : records)
            var += (r.variance_p - mean) * (r.variance_p - mean);
        var /= static_cast<double>(records.size() - 1);
        const double se = std::sqrt(var / static_cast<double>(records.size()));
        if (std::abs(mean - 1.0) > 3.0 * se && std::abs(mean - 1.0) > 1e-12)
            fit.warnings.push_back("model violation: mean amplitude variance deviates from SQL by more than 3 sigma");
    }
    return fit;
}

// eta_jk from phase-covariance data against sqrt(P_j P_k).
inline FitResult fit_eta_cross(const std::vector<CrossRecord>& records, const CavityConfig& config, int j, int k,
                               double omega, const EtaFitOptions& options = {})
{
    if (j == k)
        throw ValidationError("cross fit needs two distinct modes");
    detail::require_points(records.size(), options.free_intercept ? 2 : 1, "eta cross fit");
    const bool weighted = records.front().sigma.has_value();
    const double eff = options.undo_detection
                           ? std::sqrt(config.mode(j).detection_efficiency * config.mode(k).detection_efficiency)
                           : 1.0;
    const double gain = free_cavity_phase_gain(config, j, k, omega);
    std::vector<double> x, y, s;
    for (const auto& r : records) {
        if (r.sigma.has_value() != weighted)
            throw ValidationError("uncertainties must be given for all records or none");
        if (!(r.power_j >= 0.0 && r.power_k >= 0.0))
            throw ValidationError("powers must be non-negative");
        x.push_back(std::sqrt(r.power_j * r.power_k));
        y.push_back(r.covariance_q / (eff * gain));
        if (weighted)
            s.push_back(*r.sigma / (eff * gain));
    }
    const std::string name = "eta_" + std::to_string(std::min(j, k)) + std::to_string(std::max(j, k));
    FitResult fit = detail::fit_through_origin_or_line(x, y, s, name, options.free_intercept);
    if (fit.parameters[0].value < 0.0)
        fit.warnings.push_back("negative fitted slope for " + name);
    fit.notes.push_back("crystal-position systematic (about 20% on eta) is not included in sigma");
    return fit;
}

struct ProfilePoint
{
    double x = 0.0;   // crystal offset z (m) or temperature (K)
    double eta = 0.0; // 1/W
    std::optional<double> sigma;
};

namespace detail
{
inline std::vector<double> sigmas_of(const std::vector<ProfilePoint>& data)
{
    std::vector<double> s;
    const bool weighted = !data.empty() && data.front().sigma.has_value();
    for (const auto& p : data) {
        if (p.sigma.has_value() != weighted)
            throw ValidationError("uncertainties must be given for all points or none");
        if (weighted)
            s.push_back(*p.sigma);
    }
    return s;
}
} // namespace detail

// Single multiplicative factor on the crystal-position profile.
inline FitResult fit_waist_profile(const std::vector<ProfilePoint>& data, const CavityConfig& config)
{
    std::vector<double> x, y;
    for (const auto& p : data) {
        x.push_back(waist_position_profile(config, p.x));
        y.push_back(p.eta);
    }
    return fit_proportional(x, y, detail::sigmas_of(data), "factor");
}

inline FitResult fit_temperature(const std::vector<ProfilePoint>& data)
{
    std::vector<double> x, y;
    for (const auto& p : data) {
        x.push_back(p.x);
        y.push_back(p.eta);
    }
    double cov = 0.0;
    FitResult r = fit_line(x, y, detail::sigmas_of(data), &cov);
    const double a = r.parameters[0].value;
    const double b = r.parameters[1].value;
    const auto [xmin, xmax] = std::minmax_element(x.begin(), x.end());
    double ymax = 0.0;
    for (double v : y)
        ymax = std::max(ymax, std::abs(v));
    // a slope that is rounding noise over the data range has no meaningful crossing
    if (std::abs(a) * (*xmax - *xmin) > 1e-12 * ymax) {
        const double t0 = -b / a;
        r.zero_crossing = t0;
        // first-order propagation of (slope, intercept) covariance
        const double sa = r.parameters[0].sigma;
        const double sb = r.parameters[1].sigma;
        const double var = (sb * sb + t0 * t0 * sa * sa + 2.0 * t0 * cov) / (a * a);
        r.zero_crossing_sigma = std::sqrt(std::max(var, 0.0));
    }
    return r;
}

// ---------------------------------------------------------------------------
// Inverse inference of eta_00 for another experiment

// Observable = sum_i w_i^T V w_i over the listed combinations.
struct Observable
{
    std::string name;
    std::vector<Vec6> combinations;

    double evaluate(const QuadratureCovariance& v) const
    {
        double s = 0.0;
        for (const auto& w : combinations)
            s += combination_variance(v, w);
        return s;
    }

    static Observable quadrature(int index, std::string name)
    {
        Vec6 w = Vec6::Zero();
        w(index) = 1.0;
        return {std::move(name), {w}};
    }
    static Observable pump_phase() { return quadrature(q_index(0), "pump_phase"); }
    static Observable duan()
    {
        const double s = 1.0 / std::sqrt(2.0);
        Vec6 u = Vec6::Zero();
        u(p_index(1)) = s;
        u(p_index(2)) = -s;
        Vec6 w = Vec6::Zero();
        w(q_index(1)) = s;
        w(q_index(2)) = s;
        return {"duan", {u, w}};
    }
    // Var[(q1 + q2)/sqrt2], the signal-idler phase-sum correlation
    static Observable phase_sum()
    {
        const double s = 1.0 / std::sqrt(2.0);
        Vec6 w = Vec6::Zero();
        w(q_index(1)) = s;
        w(q_index(2)) = s;
        return {"phase_sum", {w}};
    }
};

inline Observable parse_observable(const std::string& s)
{
    if (s == "pump_phase")
        return Observable::pump_phase();
    if (s == "duan")
        return Observable::duan();
    if (s == "phase_sum")
        return Observable::phase_sum();
    throw ValidationError("unknown observable '" + s + "' (pump_phase, duan, phase_sum)");
}

struct ForeignExperiment
{
    CavityConfig config;
    double pump_ratio = 1.5;
    double threshold_power = kReferenceThresholdPower;
    double omega = 0.0;
    Observable observable = Observable::pump_phase();
    bool apply_detection = true;
};

// Model value of the observable with every coupling tied to eta_00.
inline double observable_model(const ForeignExperiment& e, double eta00)
{
    const SpectrumResult s =
        opo_spectrum(e.config, e.pump_ratio, e.omega, e.threshold_power, NoiseCouplings::scaled_from_pump(eta00));
    const QuadratureCovariance v = e.apply_detection ? apply_detection(s.v_total, detection_efficiencies(e.config)) : s.v_total;
    return e.observable.evaluate(v);
}

struct InferenceResult
{
    bool found = false;
    double eta00 = 0.0;
    double bracket_low = 0.0;
    double bracket_high = 0.0;
    double tolerance = 0.0;
    std::uintmax_t iterations = 0;
    std::string message;
};

inline InferenceResult infer_eta00(const ForeignExperiment& e, double observed, double bracket_low = 0.0,
                                   double bracket_high = 5.0, double tolerance = 1e-9)
{
    InferenceResult r;
    r.bracket_low = bracket_low;
    r.bracket_high = bracket_high;
    r.tolerance = tolerance;
    auto f = [&](double eta) { return observable_model(e, eta) - observed; };
    const double flo = f(bracket_low);
    const double fhi = f(bracket_high);
    if (flo == 0.0) {
        r.found = true;
        r.eta00 = bracket_low;
        r.message = "exact at lower bracket";
        return r;
    }
    if (fhi == 0.0) {
        r.found = true;
        r.eta00 = bracket_high;
        r.message = "exact at upper bracket";
        return r;
    }
    if ((flo < 0.0) == (fhi < 0.0)) {
        r.message = "no sign change of model - observed on [" + std::to_string(bracket_low) + ", " +
                    std::to_string(bracket_high) + "] /W";
        return r;
    }
    std::uintmax_t iters = 200;
    auto tol = [tolerance](double a, double b) { return std::abs(b - a) <= tolerance; };
    const auto [a, b] = boost::math::tools::toms748_solve(f, bracket_low, bracket_high, flo, fhi, tol, iters);
    r.found = true;
    r.eta00 = 0.5 * (a + b);
    r.iterations = iters;
    r.message = "converged";
    return r;
}

// ---------------------------------------------------------------------------
// Synthetic measurement-style data (forward model + optional relative noise)

struct NoiseSpec
{
    double relative = 0.0;     // Gaussian noise, fraction of the excess above SQL (or of the value)
    std::uint64_t seed = 1;
};

// Empty-cavity phase/amplitude variances versus output power for mode j.
inline std::vector<PowerVarianceRecord> synthetic_diagonal_records(const CavityConfig& config, int mode, double eta,
                                                                   const std::vector<double>& powers,
                                                                   PowerReference ref, double omega,
                                                                   const NoiseSpec& noise = {})
{
    std::mt19937_64 rng(noise.seed);
    std::normal_distribution<double> normal;
    const ModeParams& m = config.mode(mode);
    std::vector<PowerVarianceRecord> out;
    for (double p : powers) {
        std::array<double, kModes> pc{};
        pc[static_cast<std::size_t>(mode)] = intracavity_power(p, ref, m);
        NoiseCouplings c;
        c.eta(mode, mode) = eta;
        const SpectrumResult s = output_covariance(config, free_cavity_drift(config), build_vq(c, pc), omega);
        const QuadratureCovariance det = apply_detection(s.v_total, detection_efficiencies(config));
        PowerVarianceRecord r;
        r.power = p;
        r.power_reference = ref;
        r.variance_p = det(p_index(mode), p_index(mode));
        r.variance_q = det(q_index(mode), q_index(mode));
        if (noise.relative > 0.0) {
            const double sd = noise.relative * r.variance_q;
            r.variance_q += sd * normal(rng);
            r.variance_p += sd * normal(rng);
            r.sigma = sd;
        }
        out.push_back(r);
    }
    return out;
}

inline std::vector<CrossRecord> synthetic_cross_records(const CavityConfig& config, int j, int k, double eta,
                                                        const std::vector<std::pair<double, double>>& powers,
                                                        double omega, const NoiseSpec& noise = {})
{
    std::mt19937_64 rng(noise.seed);
    std::normal_distribution<double> normal;
    std::vector<CrossRecord> out;
    for (auto [pj, pk] : powers) {
        std::array<double, kModes> pc{};
        pc[static_cast<std::size_t>(j)] = pj;
        pc[static_cast<std::size_t>(k)] = pk;
        NoiseCouplings c;
        c.eta(j, k) = c.eta(k, j) = eta;
        // diagonal entries large enough to keep eta PSD; they do not enter the (q_j, q_k) entry
        c.eta(j, j) = c.eta(k, k) = std::abs(eta);
        const SpectrumResult s = output_covariance(config, free_cavity_drift(config), build_vq(c, pc), omega);
        const QuadratureCovariance det = apply_detection(s.v_total, detection_efficiencies(config));
        CrossRecord r;
        r.power_j = pj;
        r.power_k = pk;
        r.covariance_q = det(q_index(j), q_index(k));
        if (noise.relative > 0.0) {
            const double sd = noise.relative * std::abs(r.covariance_q);
            r.covariance_q += sd * normal(rng);
            r.sigma = sd;
        }
        out.push_back(r);
    }
    return out;
}

inline std::vector<ProfilePoint> synthetic_profile(const std::vector<double>& xs, const std::function<double(double)>& law,
                                                   const NoiseSpec& noise = {}, double absolute_sigma = 0.0)
{
    std::mt19937_64 rng(noise.seed);
    std::normal_distribution<double> normal;
    std::vector<ProfilePoint> out;
    for (double x : xs) {
        ProfilePoint p;
        p.x = x;
        p.eta = law(x);
        const double sd = absolute_sigma > 0.0 ? absolute_sigma : noise.relative * std::abs(p.eta);
        if (sd > 0.0) {
            p.eta += sd * normal(rng);
            p.sigma = sd;
        }
        out.push_back(p);
    }
    return out;
}

} // namespace opo

#endif // OPO_NOISE_FIT_HPP

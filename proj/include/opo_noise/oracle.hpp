#ifndef OPO_NOISE_ORACLE_HPP
#define OPO_NOISE_ORACLE_HPP

// Time-domain Monte-Carlo check of the analytic spectra: Euler-Maruyama
// integration of the linearised Langevin equation (round-trip time units) and
// Welch-style cross-spectral estimation of the output field.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <exception>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Eigenvalues>
#include <boost/random/normal_distribution.hpp>

#include "opo_noise/drift.hpp"
#include "opo_noise/model.hpp"
#include "opo_noise/spectra.hpp"

namespace opo
{
struct SimulationPlan
{
    double time_step = 0.25;            // round trips
    std::size_t n_steps = 0;            // recorded steps per trajectory, after burn-in
    std::size_t n_trajectories = 1;
    std::uint64_t master_seed = 0;
    std::size_t burn_in = 0;            // steps discarded at the start of each trajectory
    std::size_t segment_steps = 0;      // periodogram segment length; segments overlap by half
    std::size_t batch_segments = 32;    // segments per batch mean for standard errors
    unsigned threads = 0;               // 0 = hardware concurrency
};

inline constexpr std::size_t kMinSegments = 16;
inline constexpr double kDivergenceLimit = 1e6;

// Largest stable step: 0.1 / max(|eigenvalue of M_A|, largest round-trip loss 2 gamma'_j).
inline double max_time_step(const DriftMatrix& drift, const CavityConfig& config)
{
    Eigen::EigenSolver<Mat6> es(drift.matrix, false);
    double rate = es.eigenvalues().cwiseAbs().maxCoeff();
    for (int j = 0; j < kModes; ++j)
        rate = std::max(rate, 2.0 * config.mode(j).total_loss());
    return 0.1 / rate;
}

// Slowest non-zero relaxation rate of the drift (the phase-diffusion null mode is skipped).
inline double slowest_decay_rate(const DriftMatrix& drift)
{
    Eigen::EigenSolver<Mat6> es(drift.matrix, false);
    const auto ev = es.eigenvalues();
    const double scale = ev.cwiseAbs().maxCoeff();
    double slowest = INFINITY;
    for (int i = 0; i < ev.size(); ++i) {
        const double rate = -ev(i).real();
        if (rate > 1e-9 * scale)
            slowest = std::min(slowest, rate);
    }
    return slowest;
}

inline std::size_t min_segment_steps(double time_step, double omega_min)
{
    return static_cast<std::size_t>(std::ceil(20.0 / (omega_min * time_step)));
}

inline void validate_plan(const SimulationPlan& plan, const DriftMatrix& drift, const CavityConfig& config,
                          const std::vector<double>& omegas)
{
    if (omegas.empty())
        throw ValidationError("at least one target omega is required");
    const double omega_min = *std::min_element(omegas.begin(), omegas.end());
    if (!(omega_min > 0.0))
        throw ValidationError("target omegas must be positive");
    if (!(plan.time_step > 0.0))
        throw ValidationError("oracle.dt must be positive");
    const double dt_max = max_time_step(drift, config);
    if (plan.time_step > dt_max * (1.0 + 1e-12)) {
        std::ostringstream msg;
        msg << "oracle.dt = " << plan.time_step << " exceeds the stability bound " << dt_max;
        throw ValidationError(msg.str());
    }
    if (plan.n_trajectories == 0)
        throw ValidationError("oracle.n_traj must be positive");
    const double periods = static_cast<double>(plan.n_steps) * plan.time_step * omega_min / (2.0 * std::numbers::pi);
    if (periods < 50.0)
        throw ValidationError("trajectory must cover at least 50 periods of the smallest target omega");
    if (plan.segment_steps < min_segment_steps(plan.time_step, omega_min))
        throw ValidationError("segment length must be at least 20/omega at the smallest target omega");
    if (plan.segment_steps % 2 != 0)
        throw ValidationError("segment length must be even (half-overlapping segments)");
    if (plan.batch_segments == 0)
        throw ValidationError("oracle.batch_segments must be positive");
}

// ---------------------------------------------------------------------------
// Noise

// Input channels of the Langevin equation: coupler vacuum, spurious-loss
// vacuum and the phonon phase noise with covariance v_q = L L^T.
struct NoiseSources
{
    Vec6 coupler = Vec6::Zero();   // diagonal of M_gamma
    Vec6 loss = Vec6::Zero();      // diagonal of M_mu
    Mat6 phonon = Mat6::Zero();    // factor L, first phonon_rank columns used
    int phonon_rank = 0;
};

// Pivoted LDL^T factor of a PSD matrix, v = L L^T with rank(v) columns.
inline Mat6 psd_factor(const Mat6& v, int* rank_out = nullptr)
{
    const double scale = v.cwiseAbs().maxCoeff();
    Mat6 factor = Mat6::Zero();
    int rank = 0;
    if (scale > 0.0) {
        Eigen::LDLT<Mat6> ldlt(0.5 * (v + v.transpose()));
        if (ldlt.info() != Eigen::Success)
            throw NumericalError("factorisation of the phonon covariance failed");
        const Vec6 d = ldlt.vectorD();
        if (d.minCoeff() < -1e-10 * scale) {
            std::ostringstream msg;
            msg << "phonon covariance is not positive semidefinite (pivot " << d.minCoeff() << ")";
            throw NumericalError(msg.str());
        }
        const Mat6 l = ldlt.matrixL();
        const Mat6 pl = ldlt.transpositionsP().transpose() * l;
        for (int i = 0; i < kDim; ++i) {
            if (d(i) > 1e-14 * scale)
                factor.col(rank++) = pl.col(i) * std::sqrt(d(i));
        }
    }
    if (rank_out)
        *rank_out = rank;
    return factor;
}

inline NoiseSources make_noise_sources(const CouplingMatrices& coupling, const QuadratureCovariance& v_q)
{
    NoiseSources n;
    n.coupler = coupling.m_gamma.diagonal();
    n.loss = coupling.m_mu.diagonal();
    n.phonon = psd_factor(v_q.matrix, &n.phonon_rank);
    return n;
}

struct NoiseIncrement
{
    Vec6 total;   // M_gamma dW1 + M_mu dW2 + L dWq
    Vec6 input;   // coupler input stream dW1
};

// Deterministic per-trajectory generator derived from (master seed, index).
inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

using Engine = std::mt19937_64;

inline Engine trajectory_engine(std::uint64_t master_seed, std::size_t index)
{
    return Engine(splitmix64(master_seed ^ splitmix64(static_cast<std::uint64_t>(index) + 1)));
}

class NoiseGenerator
{
public:
    explicit NoiseGenerator(const NoiseSources& sources) : sources_(sources)
    {
        has_loss_ = sources_.loss.cwiseAbs().maxCoeff() > 0.0;
    }

    NoiseIncrement operator()(double time_step, Engine& rng)
    {
        const double sdt = std::sqrt(time_step);
        NoiseIncrement inc;
        for (int i = 0; i < kDim; ++i)
            inc.input(i) = sdt * normal_(rng);
        inc.total = sources_.coupler.cwiseProduct(inc.input);
        if (has_loss_)
            for (int i = 0; i < kDim; ++i)
                inc.total(i) += sources_.loss(i) * sdt * normal_(rng);
        for (int c = 0; c < sources_.phonon_rank; ++c)
            inc.total += sources_.phonon.col(c) * (sdt * normal_(rng));
        return inc;
    }

private:
    NoiseSources sources_;
    bool has_loss_ = false;
    boost::random::normal_distribution<double> normal_;
};

inline NoiseIncrement generate_noise_increments(const NoiseSources& sources, double time_step, Engine& rng)
{
    NoiseGenerator gen(sources);
    return gen(time_step, rng);
}

// ---------------------------------------------------------------------------
// Integration

// Euler-Maruyama: X_{n+1} = X_n + dt M_A X_n + increment. The sink receives
// (step, X_n, X_{n+1}, coupler input increment) for every post-burn-in step.
template <class Sink>
void integrate_trajectory(const DriftMatrix& drift, const NoiseSources& noise, const SimulationPlan& plan,
                          std::size_t index, const Vec6& x0, Sink& sink)
{
    Engine rng = trajectory_engine(plan.master_seed, index);
    NoiseGenerator gen(noise);
    const Mat6 step_matrix = Mat6::Identity() + plan.time_step * drift.matrix;
    const std::size_t total = plan.burn_in + plan.n_steps;
    Vec6 x = x0;
    for (std::size_t n = 0; n < total; ++n) {
        const NoiseIncrement inc = gen(plan.time_step, rng);
        const Vec6 next = step_matrix * x + inc.total;
        if ((n & 63u) == 0 && !(next.cwiseAbs().maxCoeff() < kDivergenceLimit)) {
            std::ostringstream msg;
            msg << "trajectory " << index << " diverged at step " << n << " (|X| > " << kDivergenceLimit << ")";
            throw NumericalError(msg.str());
        }
        if (n >= plan.burn_in)
            sink(n - plan.burn_in, x, next, inc.input);
        x = next;
    }
}

// Runs fn(index) for every trajectory on a small thread pool. Results must be
// stored by index so aggregation is independent of completion order.
template <class Fn>
void for_each_trajectory(std::size_t n, unsigned threads, Fn&& fn)
{
    unsigned workers = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error)
                        error = std::current_exception();
                }
            }
        });
    for (auto& t : pool)
        t.join();
    if (error)
        std::rethrow_exception(error);
}

struct Trajectory
{
    std::vector<Vec6> states;  // X_0 .. X_n (post burn-in), every stride-th step
    std::vector<Vec6> inputs;  // coupler input increments for the recorded steps
};

struct TrajectorySet
{
    std::vector<Trajectory> trajectories;
    double time_step = 0.0;
    std::size_t stride = 1;
};

inline TrajectorySet integrate(const DriftMatrix& drift, const SimulationPlan& plan, const NoiseSources& noise,
                               const Vec6& x0 = Vec6::Zero(), std::size_t stride = 1)
{
    if (stride == 0)
        throw ValidationError("stride must be positive");
    TrajectorySet set;
    set.time_step = plan.time_step;
    set.stride = stride;
    set.trajectories.resize(plan.n_trajectories);
    for_each_trajectory(plan.n_trajectories, plan.threads, [&](std::size_t i) {
        Trajectory& t = set.trajectories[i];
        t.states.reserve(plan.n_steps / stride + 2);
        auto sink = [&](std::size_t n, const Vec6& x, const Vec6& next, const Vec6& input) {
            if (n % stride == 0) {
                t.states.push_back(x);
                t.inputs.push_back(input);
            }
            if (n + 1 == plan.n_steps)
                t.states.push_back(next);
        };
        integrate_trajectory(drift, noise, plan, i, x0, sink);
    });
    return set;
}

// ---------------------------------------------------------------------------
// Spectral estimation

struct PsdEstimate
{
    std::vector<double> omegas;
    std::vector<QuadratureCovariance> estimate;
    std::vector<Mat6> standard_error;
    std::size_t n_segments = 0;
    double effective_segments = 0.0;
    std::size_t n_batches = 0;
};

namespace detail
{
inline constexpr int kUpper = kDim * (kDim + 1) / 2;
using Upper = Eigen::Matrix<double, kUpper, 1>;

// Per-trajectory running state for one target omega.
struct OmegaChannel
{
    std::vector<std::complex<double>> table;   // w_n exp(-i omega n dt)
    double scale = 0.0;                         // 1 / (dt sum w^2 |1 - e^{-i omega dt}|^2)
};
} // namespace detail

// Welch estimator of the output-field cross spectrum. Each step forms the
// output sample y_n = dt M_gamma (X_n + X_{n+1})/2 - dW1_n; the series is
// first-differenced (prewhitening against the phase-diffusion 1/omega^2
// component), Hann tapered in half-overlapping segments, Fourier evaluated
// at each target omega, and recoloured by the exact difference-filter gain.
class PsdAccumulator
{
public:
    PsdAccumulator(const Vec6& coupler, double time_step, std::size_t segment_steps, const std::vector<double>& omegas,
                   std::size_t batch_segments)
        : coupler_(coupler), dt_(time_step), length_(segment_steps), hop_(segment_steps / 2),
          batch_segments_(batch_segments), omegas_(omegas)
    {
        std::vector<double> window(length_);
        double sum_sq = 0.0;
        for (std::size_t n = 0; n < length_; ++n) {
            const double s = std::sin(std::numbers::pi * (static_cast<double>(n) + 0.5) / static_cast<double>(length_));
            window[n] = s * s;
            sum_sq += window[n] * window[n];
        }
        channels_.resize(omegas_.size());
        for (std::size_t k = 0; k < omegas_.size(); ++k) {
            const double w = omegas_[k];
            auto& ch = channels_[k];
            ch.table.resize(length_);
            for (std::size_t n = 0; n < length_; ++n)
                ch.table[n] = window[n] * std::polar(1.0, -w * dt_ * static_cast<double>(n));
            const double gain = std::norm(1.0 - std::polar(1.0, -w * dt_));
            ch.scale = 1.0 / (dt_ * sum_sq * gain);
        }
        for (auto& slot : slots_)
            slot.acc.assign(omegas_.size() * kDim, {0.0, 0.0});
        segment_sum_.assign(omegas_.size(), detail::Upper::Zero());
        batch_sum_.assign(omegas_.size(), detail::Upper::Zero());
        batch_means_.resize(omegas_.size());
    }

    void operator()(std::size_t n, const Vec6& x, const Vec6& next, const Vec6& input)
    {
        const Vec6 y = (0.5 * dt_) * coupler_.cwiseProduct(x + next) - input;
        if (n == 0) {
            previous_ = y;
            return;
        }
        const Vec6 d = y - previous_;
        previous_ = y;
        const std::size_t i = n - 1;  // index of the differenced sample

        if (i % hop_ == 0) {
            // open a new segment in the free slot
            Slot& s = slots_[(i / hop_) % 2];
            s.start = i;
            s.active = true;
            std::fill(s.acc.begin(), s.acc.end(), std::complex<double>{0.0, 0.0});
        }
        for (Slot& s : slots_) {
            if (!s.active)
                continue;
            const std::size_t pos = i - s.start;
            for (std::size_t k = 0; k < channels_.size(); ++k) {
                const std::complex<double> t = channels_[k].table[pos];
                std::complex<double>* a = &s.acc[k * kDim];
                for (int c = 0; c < kDim; ++c)
                    a[c] += t * d(c);
            }
            if (pos + 1 == length_) {
                finish_segment(s);
                s.active = false;
            }
        }
    }

    std::size_t segments() const { return n_segments_; }

private:
    friend class PsdMerger;

    struct Slot
    {
        std::size_t start = 0;
        bool active = false;
        std::vector<std::complex<double>> acc;
    };

    void finish_segment(const Slot& s)
    {
        for (std::size_t k = 0; k < channels_.size(); ++k) {
            const std::complex<double>* a = &s.acc[k * kDim];
            detail::Upper u;
            int idx = 0;
            for (int r = 0; r < kDim; ++r)
                for (int c = r; c < kDim; ++c)
                    u(idx++) = (a[r] * std::conj(a[c])).real() * channels_[k].scale;
            segment_sum_[k] += u;
            batch_sum_[k] += u;
        }
        ++n_segments_;
        if (++in_batch_ == batch_segments_) {
            for (std::size_t k = 0; k < channels_.size(); ++k) {
                batch_means_[k].push_back(batch_sum_[k] / static_cast<double>(batch_segments_));
                batch_sum_[k].setZero();
            }
            in_batch_ = 0;
        }
    }

    Vec6 coupler_;
    double dt_;
    std::size_t length_;
    std::size_t hop_;
    std::size_t batch_segments_;
    std::vector<double> omegas_;
    std::vector<detail::OmegaChannel> channels_;
    Slot slots_[2];
    Vec6 previous_ = Vec6::Zero();
    std::vector<detail::Upper> segment_sum_;
    std::vector<detail::Upper> batch_sum_;
    std::vector<std::vector<detail::Upper>> batch_means_;
    std::size_t n_segments_ = 0;
    std::size_t in_batch_ = 0;
};

// Variance inflation of half-overlapping Hann segments, 1 + 2 rho^2.
inline double overlap_variance_factor(std::size_t segment_steps)
{
    const std::size_t hop = segment_steps / 2;
    double num = 0.0;
    double den = 0.0;
    for (std::size_t n = 0; n < segment_steps; ++n) {
        const double s = std::sin(std::numbers::pi * (static_cast<double>(n) + 0.5) / static_cast<double>(segment_steps));
        const double w = s * s;
        den += w * w;
        if (n + hop < segment_steps) {
            const double s2 = std::sin(std::numbers::pi * (static_cast<double>(n + hop) + 0.5) /
                                       static_cast<double>(segment_steps));
            num += w * s2 * s2;
        }
    }
    const double rho = num / den;
    return 1.0 + 2.0 * rho * rho;
}

// Combines per-trajectory accumulators in index order.
class PsdMerger
{
public:
    static PsdEstimate merge(const std::vector<PsdAccumulator>& parts, const std::vector<double>& omegas,
                             std::size_t segment_steps)
    {
        PsdEstimate est;
        est.omegas = omegas;
        for (const auto& p : parts)
            est.n_segments += p.n_segments_;
        if (est.n_segments < kMinSegments)
            throw ValidationError("insufficient segments for spectral estimation: " + std::to_string(est.n_segments) +
                                  " < " + std::to_string(kMinSegments));
        est.effective_segments = static_cast<double>(est.n_segments) / overlap_variance_factor(segment_steps);

        for (std::size_t k = 0; k < omegas.size(); ++k) {
            detail::Upper sum = detail::Upper::Zero();
            std::vector<detail::Upper> batches;
            for (const auto& p : parts) {
                sum += p.segment_sum_[k];
                batches.insert(batches.end(), p.batch_means_[k].begin(), p.batch_means_[k].end());
            }
            const detail::Upper mean = sum / static_cast<double>(est.n_segments);
            detail::Upper se = detail::Upper::Constant(INFINITY);
            const std::size_t nb = batches.size();
            if (nb >= 2) {
                detail::Upper bmean = detail::Upper::Zero();
                for (const auto& b : batches)
                    bmean += b;
                bmean /= static_cast<double>(nb);
                detail::Upper var = detail::Upper::Zero();
                for (const auto& b : batches)
                    var += (b - bmean).cwiseAbs2();
                var /= static_cast<double>(nb - 1);
                // batch-mean scatter, rescaled to the full segment count
                const double batch_size = static_cast<double>(parts.front().batch_segments_);
                se = (var * batch_size / static_cast<double>(est.n_segments)).cwiseSqrt();
            }
            est.n_batches = nb;

            QuadratureCovariance v = QuadratureCovariance::zero();
            Mat6 e = Mat6::Zero();
            int idx = 0;
            for (int r = 0; r < kDim; ++r)
                for (int c = r; c < kDim; ++c, ++idx) {
                    v(r, c) = v(c, r) = mean(idx);
                    e(r, c) = e(c, r) = se(idx);
                }
            est.estimate.push_back(v);
            est.standard_error.push_back(e);
        }
        return est;
    }
};

inline void check_psd_request(const SimulationPlan& plan, const std::vector<double>& omegas)
{
    if (omegas.empty())
        throw ValidationError("at least one target omega is required");
    const double omega_min = *std::min_element(omegas.begin(), omegas.end());
    if (!(omega_min > 0.0))
        throw ValidationError("target omegas must be positive");
    if (plan.segment_steps < min_segment_steps(plan.time_step, omega_min))
        throw ValidationError("segment length must be at least 20/omega at the smallest target omega");
    if (plan.segment_steps < 2 || plan.segment_steps % 2 != 0)
        throw ValidationError("segment length must be even (half-overlapping segments)");
}

// Spectral estimate from stored trajectories (burn-in already removed, stride 1).
inline PsdEstimate estimate_psd(const TrajectorySet& set, const SimulationPlan& plan, const CouplingMatrices& coupling,
                                const std::vector<double>& omegas)
{
    check_psd_request(plan, omegas);
    if (set.stride != 1)
        throw ValidationError("spectral estimation needs every step recorded (stride 1)");
    const Vec6 g = coupling.m_gamma.diagonal();
    std::vector<PsdAccumulator> parts;
    parts.reserve(set.trajectories.size());
    for (const auto& t : set.trajectories) {
        PsdAccumulator acc(g, set.time_step, plan.segment_steps, omegas, plan.batch_segments);
        for (std::size_t n = 0; n < t.inputs.size(); ++n)
            acc(n, t.states[n], t.states[n + 1], t.inputs[n]);
        parts.push_back(std::move(acc));
    }
    return PsdMerger::merge(parts, omegas, plan.segment_steps);
}

// Streaming variant: integrates and estimates without storing trajectories.
inline PsdEstimate simulate_psd(const CavityConfig& config, const DriftMatrix& drift, const QuadratureCovariance& v_q,
                                const SimulationPlan& plan, const std::vector<double>& omegas)
{
    validate_plan(plan, drift, config, omegas);
    const CouplingMatrices coupling = coupling_matrices(config);
    const NoiseSources noise = make_noise_sources(coupling, v_q);
    const Vec6 g = coupling.m_gamma.diagonal();

    std::vector<PsdAccumulator> parts;
    parts.reserve(plan.n_trajectories);
    for (std::size_t i = 0; i < plan.n_trajectories; ++i)
        parts.emplace_back(g, plan.time_step, plan.segment_steps, omegas, plan.batch_segments);
    for_each_trajectory(plan.n_trajectories, plan.threads, [&](std::size_t i) {
        integrate_trajectory(drift, noise, plan, i, Vec6::Zero(), parts[i]);
    });
    return PsdMerger::merge(parts, omegas, plan.segment_steps);
}

// Plan that reaches the requested number of effective segments at omega_min,
// with segments of segment_periods / omega_min round trips. time_step 0 picks
// the stability-limited default.
inline SimulationPlan default_plan(const CavityConfig& config, const DriftMatrix& drift, double omega_min,
                                   double effective_segments, std::uint64_t seed, std::size_t n_trajectories = 16,
                                   double segment_periods = 50.0, double time_step = 0.0)
{
    SimulationPlan plan;
    plan.master_seed = seed;
    plan.n_trajectories = n_trajectories;
    plan.time_step = time_step > 0.0 ? time_step : std::min(0.25, max_time_step(drift, config));
    std::size_t seg = static_cast<std::size_t>(std::ceil(segment_periods / (omega_min * plan.time_step)));
    seg += seg % 2;
    seg = std::max(seg, min_segment_steps(plan.time_step, omega_min) + 1);
    seg += seg % 2;
    plan.segment_steps = seg;
    const double raw_segments = effective_segments * overlap_variance_factor(seg);
    const std::size_t per_traj = static_cast<std::size_t>(
        std::ceil(raw_segments / static_cast<double>(n_trajectories)));
    plan.n_steps = (per_traj + 1) * (seg / 2) + 2;
    const double periods = static_cast<double>(plan.n_steps) * plan.time_step * omega_min / (2.0 * std::numbers::pi);
    if (periods < 50.0)
        plan.n_steps = static_cast<std::size_t>(std::ceil(50.0 * 2.0 * std::numbers::pi / (omega_min * plan.time_step)));
    const double slowest = slowest_decay_rate(drift);
    plan.burn_in = static_cast<std::size_t>(std::ceil(std::min(10.0 / slowest, 1e6) / plan.time_step));
    plan.batch_segments = std::max<std::size_t>(1, std::min<std::size_t>(32, per_traj / 8));
    return plan;
}

// ---------------------------------------------------------------------------
// Photon-flux balance

struct ManleyRoweReport
{
    std::array<double, kModes> photons{};     // mean intracavity photons per round trip
    double signal_flux = 0.0;                 // photons generated per round trip
    double idler_flux = 0.0;
    double signal_flux_se = 0.0;
    double idler_flux_se = 0.0;
    double pump_depletion = 0.0;              // pump photons converted per round trip
    double signal_idler_z = 0.0;
    double balance_rel_error = 0.0;
    bool signal_idler_equal = true;
    bool balanced = true;
};

// Mean-flux bookkeeping: N_j = alpha_j^2 + alpha_j <dp_j> (SQL-normalised dp),
// generated flux 2 gamma'_j N_j against the pump depletion 2 gamma'_0 N_0 (sqrt(sigma) - 1).
// rel_tolerance absorbs the unprimed-loss form of the amplitude ratio.
inline ManleyRoweReport manley_rowe_check(const TrajectorySet& set, const CavityConfig& config,
                                          const OperatingPoint& op, double rel_tolerance = 0.05)
{
    ManleyRoweReport r;
    const double tau = config.round_trip_time();
    std::array<double, kModes> alpha{};
    for (int j = 0; j < kModes; ++j) {
        const double photons = op.intracavity_powers[static_cast<std::size_t>(j)] * tau / config.mode(j).photon_energy();
        r.photons[static_cast<std::size_t>(j)] = photons;
        alpha[static_cast<std::size_t>(j)] = std::sqrt(photons);
    }

    // per-trajectory time averages of dp_j, then mean and standard error across trajectories
    const std::size_t nt = set.trajectories.size();
    std::array<std::vector<double>, kModes> means;
    for (const auto& t : set.trajectories) {
        Vec6 s = Vec6::Zero();
        for (const auto& x : t.states)
            s += x;
        s /= std::max<std::size_t>(1, t.states.size());
        for (int j = 0; j < kModes; ++j)
            means[static_cast<std::size_t>(j)].push_back(s(p_index(j)));
    }
    auto stats = [nt](const std::vector<double>& v) {
        double m = 0.0;
        for (double x : v)
            m += x;
        m /= std::max<std::size_t>(1, nt);
        double var = 0.0;
        for (double x : v)
            var += (x - m) * (x - m);
        var = nt > 1 ? var / static_cast<double>(nt - 1) : 0.0;
        return std::pair{m, std::sqrt(var / std::max<std::size_t>(1, nt))};
    };

    std::array<double, kModes> flux{};
    std::array<double, kModes> flux_se{};
    for (int j = 0; j < kModes; ++j) {
        const auto [m, se] = stats(means[static_cast<std::size_t>(j)]);
        const double a = alpha[static_cast<std::size_t>(j)];
        const double loss = 2.0 * config.mode(j).total_loss();
        flux[static_cast<std::size_t>(j)] = loss * (a * a + a * m);
        flux_se[static_cast<std::size_t>(j)] = loss * a * se;
    }
    r.signal_flux = flux[1];
    r.idler_flux = flux[2];
    r.signal_flux_se = flux_se[1];
    r.idler_flux_se = flux_se[2];
    r.pump_depletion = 2.0 * config.mode(0).total_loss() * r.photons[0] * (std::sqrt(op.pump_ratio) - 1.0);

    const double diff_se = std::hypot(flux_se[1], flux_se[2]);
    const double diff = r.signal_flux - r.idler_flux;
    r.signal_idler_z = diff_se > 0.0 ? diff / diff_se : (diff == 0.0 ? 0.0 : INFINITY);
    r.signal_idler_equal = std::abs(diff) <= 3.0 * diff_se + 1e-12 * std::max(r.signal_flux, r.idler_flux);

    const double generated = 0.5 * (r.signal_flux + r.idler_flux);
    const double scale = std::max(generated, r.pump_depletion);
    r.balance_rel_error = scale > 0.0 ? (generated - r.pump_depletion) / scale : 0.0;
    r.balanced = r.signal_idler_equal &&
                 std::abs(generated - r.pump_depletion) <= 3.0 * 0.5 * diff_se + rel_tolerance * scale;
    return r;
}

} // namespace opo

#endif // OPO_NOISE_ORACLE_HPP

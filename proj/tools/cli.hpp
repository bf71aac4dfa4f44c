#ifndef OPO_NOISE_TOOLS_CLI_HPP
#define OPO_NOISE_TOOLS_CLI_HPP

// The opo_noise command line. run() takes argv without the program name so
// replay and the tests can drive it in-process.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "opo_noise/config.hpp"
#include "opo_noise/csv.hpp"
#include "opo_noise/data.hpp"
#include "opo_noise/fit.hpp"
#include "opo_noise/manifest.hpp"
#include "opo_noise/oracle.hpp"
#include "opo_noise/spectra.hpp"

#ifndef OPO_NOISE_VERSION
#define OPO_NOISE_VERSION "dev"
#endif

namespace opo::cli
{
namespace fs = std::filesystem;

enum ExitCode : int
{
    exit_ok = 0,
    exit_validation = 1,
    exit_numerical = 2,
    exit_comparison = 3,
};

struct Range
{
    double start = 0.0;
    double stop = 0.0;
    std::size_t count = 0;

    std::vector<double> grid() const { return linear_grid(start, stop, count); }
};

inline std::vector<std::string> split_colon(const std::string& s)
{
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (true) {
        const auto c = s.find(':', pos);
        parts.push_back(s.substr(pos, c - pos));
        if (c == std::string::npos)
            break;
        pos = c + 1;
    }
    return parts;
}

// start:stop:count
inline Range parse_range(const std::string& spec, const std::string& what)
{
    const auto p = split_colon(spec);
    if (p.size() != 3)
        throw ValidationError(what + ": expected start:stop:count, got '" + spec + "'");
    return {parse_number(p[0], what), parse_number(p[1], what),
            static_cast<std::size_t>(parse_unsigned(p[2], what))};
}

struct AxisSpec
{
    SweepAxis axis = SweepAxis::pump_ratio;
    Range range;
};

// name:start:stop:count
inline AxisSpec parse_axis_spec(const std::string& spec)
{
    const auto c = spec.find(':');
    if (c == std::string::npos)
        throw ValidationError("--axis: expected name:start:stop:count, got '" + spec + "'");
    return {parse_sweep_axis(spec.substr(0, c)), parse_range(spec.substr(c + 1), "--axis")};
}

// Collects output files and the manifest of one command.
class Run
{
public:
    Run(std::string command, const std::vector<std::string>& arguments, const std::string& out_dir)
        : out_dir_(out_dir.empty() ? "." : out_dir)
    {
        manifest_.command = std::move(command);
        manifest_.arguments = arguments;
        manifest_.tool_version = OPO_NOISE_VERSION;
        fs::create_directories(out_dir_);
    }

    void input(const std::string& path)
    {
        manifest_.inputs.push_back({fs::absolute(path).lexically_normal().string(), file_sha256(path)});
    }
    void config(const KeyValues& kv) { manifest_.config = config_snapshot(kv); }
    void seed(std::uint64_t s) { manifest_.master_seed = s; }

    std::ofstream open(const std::string& name)
    {
        manifest_.outputs.push_back({name, ""});
        std::ofstream os(out_dir_ / name, std::ios::binary);
        if (!os)
            throw ValidationError("cannot write " + (out_dir_ / name).string());
        return os;
    }

    // also writes plain text files (presets) without a manifest
    fs::path path(const std::string& name) const { return out_dir_ / name; }

    void finish() { write_manifests(manifest_, out_dir_); }

private:
    fs::path out_dir_;
    RunManifest manifest_;
};

// argv as recorded in a manifest: path options made absolute, --out dropped.
inline std::vector<std::string> recorded_arguments(const std::vector<std::string>& args)
{
    static const std::vector<std::string> path_opts{"--config", "--eta-file", "--data", "--manifest"};
    auto is_path_opt = [](const std::string& a) {
        return std::find(path_opts.begin(), path_opts.end(), a) != path_opts.end();
    };
    std::vector<std::string> out;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& a = args[i];
        if (a == "--out") {
            ++i;
            continue;
        }
        if (a.rfind("--out=", 0) == 0)
            continue;
        const auto eq = a.find('=');
        if (a.rfind("--", 0) == 0 && eq != std::string::npos && is_path_opt(a.substr(0, eq))) {
            out.push_back(a.substr(0, eq));
            out.push_back(fs::absolute(a.substr(eq + 1)).lexically_normal().string());
            continue;
        }
        out.push_back(a);
        if (is_path_opt(a) && i + 1 < args.size()) {
            out.push_back(fs::absolute(args[i + 1]).lexically_normal().string());
            ++i;
        }
    }
    return out;
}

struct Options
{
    std::string config;
    std::string out = ".";
    std::string eta_file;
    std::uint64_t seed = 1;
    bool seed_given = false;
    double sigma = 1.5;
    double freq_hz = kReferenceAnalysisFrequency;
    std::string axis;
    double tolerance = 3.0;

    // command specific
    double rel_tolerance = 0.02;
    std::string regime = "opo";
    std::string target = "model";
    double effective_segments = 0.0;
    std::vector<double> powers;
    bool detected = false;
    std::string data;
    int mode = 0;
    std::vector<int> modes{1, 2};
    bool free_intercept = false;
    bool raw = false;
    std::string observable = "pump_phase";
    double observed = 0.0;
    std::string bracket = "0:5";
    double eta = 0.0;
    std::string power_ref = "intracavity";
    std::string power_range;
    double power_ratio = 1.0;
    double noise = 0.0;
    double factor = 1.0;
    std::string z_range;
    double slope = kReferenceTemperatureSlope;
    double intercept = kReferenceTemperatureIntercept;
    std::string temp_range;
    double sigma_eta = 0.0;
    std::string preset;
    std::string manifest;
};

struct Context
{
    std::vector<std::string> arguments;
    std::ostream& out;
    std::ostream& err;
};

inline RunConfig load_config_checked(const Options& o, Run& run)
{
    if (o.config.empty())
        throw ValidationError("--config is required");
    RunConfig rc = load_run_config(o.config);
    require_valid(rc.cavity);
    run.input(o.config);
    run.config(rc.raw);
    return rc;
}

inline NoiseCouplings resolve_couplings(const Options& o, const RunConfig& rc, Run& run, std::ostream& err)
{
    if (!o.eta_file.empty()) {
        run.input(o.eta_file);
        return load_couplings(o.eta_file);
    }
    if (rc.couplings)
        return *rc.couplings;
    err << "note: no eta couplings given, phonon noise is off\n";
    return NoiseCouplings::zero();
}

inline std::array<double, kModes> free_powers(const Options& o)
{
    std::array<double, kModes> p{};
    if (o.powers.empty())
        return p;
    if (o.powers.size() != kModes)
        throw ValidationError("--powers needs three values P0,P1,P2 in W");
    std::copy(o.powers.begin(), o.powers.end(), p.begin());
    return p;
}

inline void write_diagnostics_header(CsvWriter& w)
{
    w.cells(std::vector<std::string>{"duan_value", "vlf_1", "vlf_2", "vlf_3"});
}

inline void write_diagnostics(CsvWriter& w, const QuadratureCovariance& v)
{
    const DuanResult d = duan_criterion(v);
    const VlfResult t = vlf_tripartite(v);
    w.cell(d.value).cell(t.values[0]).cell(t.values[1]).cell(t.values[2]);
}

// ---------------------------------------------------------------------------

inline int cmd_spectrum(const Options& o, Context& ctx)
{
    Run run("spectrum", ctx.arguments, o.out);
    const RunConfig rc = load_config_checked(o, run);
    const NoiseCouplings eta = resolve_couplings(o, rc, run, ctx.err);
    const double omega = normalize_frequency(o.freq_hz, rc.cavity);

    SpectrumResult s;
    double pump_ratio = 0.0;
    if (o.regime == "opo") {
        pump_ratio = o.sigma;
        if (o.sigma == 1.0)
            ctx.err << "warning: pump ratio 1 gives beta = 0, signal and idler are empty (degenerate output)\n";
        s = opo_spectrum(rc.cavity, o.sigma, omega, rc.require_threshold(), eta);
    } else if (o.regime == "free") {
        s = output_covariance(rc.cavity, free_cavity_drift(rc.cavity), build_vq(eta, free_powers(o)), omega);
    } else {
        throw ValidationError("--regime must be opo or free");
    }
    const QuadratureCovariance det = apply_detection(s.v_total, detection_efficiencies(rc.cavity));

    auto os = run.open("spectrum.csv");
    CsvWriter w(os);
    w.cells(std::vector<std::string>{"component", "regime", "pump_ratio", "omega"}).cells(covariance_columns());
    write_diagnostics_header(w);
    w.end_row();
    const std::pair<const char*, const QuadratureCovariance*> rows[] = {
        {"total", &s.v_total}, {"pure", &s.v_pure}, {"loss", &s.v_loss}, {"phase", &s.v_phase}, {"detected", &det}};
    for (const auto& [name, v] : rows) {
        w.cell(name).cell(o.regime).cell(pump_ratio).cell(omega).cells(upper_triangle(v->matrix));
        if (v == &s.v_total || v == &det)
            write_diagnostics(w, *v);
        else
            w.cell("").cell("").cell("").cell("");
        w.end_row();
    }
    os.close();
    run.finish();

    const DuanResult d = duan_criterion(s.v_total);
    const VlfResult t = vlf_tripartite(s.v_total);
    ctx.out << "omega " << format_number(omega) << "  purity det " << format_number(purity_determinant(s))
            << "  duan " << format_number(d.value) << (d.entangled ? " (entangled)" : "") << "  vlf "
            << format_number(t.values[0]) << ' ' << format_number(t.values[1]) << ' ' << format_number(t.values[2])
            << (t.tripartite ? " (tripartite)" : "") << '\n';
    return exit_ok;
}

inline int cmd_sweep(const Options& o, Context& ctx)
{
    if (o.axis.empty())
        throw ValidationError("--axis is required (name:start:stop:count)");
    const AxisSpec spec = parse_axis_spec(o.axis);
    Run run("sweep", ctx.arguments, o.out);
    const RunConfig rc = load_config_checked(o, run);

    SweepParams params;
    params.pump_ratio = o.sigma;
    params.frequency_hz = o.freq_hz;
    params.threshold_power = rc.require_threshold();
    params.couplings = resolve_couplings(o, rc, run, ctx.err);
    params.apply_detection = o.detected;
    const auto rows = sweep(rc.cavity, spec.axis, spec.range.grid(), params);

    const std::string name = std::string("sweep_") + to_string(spec.axis) + ".csv";
    auto os = run.open(name);
    CsvWriter w(os);
    w.cell(to_string(spec.axis)).cell("omega").cells(covariance_columns());
    write_diagnostics_header(w);
    w.cell("error");
    w.end_row();
    std::size_t failed = 0;
    for (const auto& r : rows) {
        w.cell(r.axis_value);
        if (r.ok()) {
            w.cell(r.omega).cells(upper_triangle(r.v_total.matrix));
            w.cell(r.duan.value).cell(r.vlf.values[0]).cell(r.vlf.values[1]).cell(r.vlf.values[2]).cell("");
        } else {
            ++failed;
            for (int i = 0; i < 1 + detail::kUpper + 4; ++i)
                w.cell("nan");
            w.cell(r.error);
        }
        w.end_row();
    }
    os.close();
    run.finish();
    ctx.out << name << ": " << rows.size() << " rows";
    if (failed)
        ctx.out << ", " << failed << " failed (see error column)";
    ctx.out << '\n';
    return exit_ok;
}

inline int cmd_oracle(const Options& o, Context& ctx)
{
    Run run("oracle", ctx.arguments, o.out);
    const RunConfig rc = load_config_checked(o, run);
    const NoiseCouplings eta = resolve_couplings(o, rc, run, ctx.err);
    const double omega = normalize_frequency(o.freq_hz, rc.cavity);

    DriftMatrix drift;
    QuadratureCovariance vq;
    if (o.regime == "opo") {
        const OperatingPoint op = operating_point(rc.cavity, o.sigma, rc.require_threshold());
        drift = opo_drift(rc.cavity, op);
        vq = build_vq(eta, op.intracavity_powers);
    } else if (o.regime == "free") {
        drift = free_cavity_drift(rc.cavity);
        vq = build_vq(eta, free_powers(o));
    } else {
        throw ValidationError("--regime must be opo or free");
    }
    if (o.target != "model" && o.target != "zero")
        throw ValidationError("--target must be model or zero");

    const OracleSettings& st = rc.oracle;
    const std::uint64_t seed = o.seed_given ? o.seed : st.seed;
    run.seed(seed);
    const double eff = o.effective_segments > 0.0 ? o.effective_segments : st.effective_segments;
    SimulationPlan plan = default_plan(rc.cavity, drift, omega, eff, seed, st.n_trajectories, st.segment_periods,
                                       st.time_step.value_or(0.0));
    if (st.batch_segments)
        plan.batch_segments = *st.batch_segments;
    plan.threads = st.threads;
    ctx.err << "plan: dt " << format_number(plan.time_step) << ", " << plan.n_trajectories << " x " << plan.n_steps
            << " steps, burn-in " << plan.burn_in << ", segment " << plan.segment_steps << '\n';

    const PsdEstimate est = simulate_psd(rc.cavity, drift, vq, plan, {omega});
    const QuadratureCovariance target_vq = o.target == "zero" ? QuadratureCovariance::zero() : vq;
    const SpectrumResult analytic = output_covariance(rc.cavity, drift, target_vq, omega);

    {
        auto os = run.open("oracle.csv");
        CsvWriter w(os);
        w.cell("omega").cells(covariance_columns()).cells(covariance_columns("_stderr"));
        write_diagnostics_header(w);
        w.cell("n_segments").cell("effective_segments");
        w.end_row();
        w.cell(omega).cells(upper_triangle(est.estimate[0].matrix)).cells(upper_triangle(est.standard_error[0]));
        write_diagnostics(w, est.estimate[0]);
        w.cell(est.n_segments).cell(est.effective_segments);
        w.end_row();
    }

    int failures = 0;
    double worst = 0.0;
    {
        auto os = run.open("oracle_compare.csv");
        CsvWriter w(os);
        w.cells(std::vector<std::string>{"entry", "analytic", "estimate", "stderr", "z", "rel_diff", "pass"});
        w.end_row();
        const auto names = covariance_columns();
        int idx = 0;
        for (int i = 0; i < kDim; ++i)
            for (int k = i; k < kDim; ++k, ++idx) {
                const double a = analytic.v_total(i, k);
                const double e = est.estimate[0](i, k);
                const double se = est.standard_error[0](i, k);
                const double z = (e - a) / se;
                const double rel = a != 0.0 ? (e - a) / std::abs(a) : 0.0;
                const bool pass = std::abs(e - a) <= std::max(o.tolerance * se, o.rel_tolerance * std::abs(a));
                failures += pass ? 0 : 1;
                worst = std::max(worst, std::abs(z));
                w.cell(names[static_cast<std::size_t>(idx)]).cell(a).cell(e).cell(se).cell(z).cell(rel).cell(pass);
                w.end_row();
            }
    }
    run.finish();
    ctx.out << "oracle: " << (detail::kUpper - failures) << "/" << detail::kUpper
            << " entries within max(" << format_number(o.tolerance) << " SE, " << format_number(o.rel_tolerance * 100)
            << "% rel), worst |z| " << format_number(worst) << ", effective segments "
            << format_number(std::round(est.effective_segments)) << '\n';
    return failures == 0 ? exit_ok : exit_comparison;
}

inline void report_fit(const FitResult& fit, std::ostream& out, std::ostream& err)
{
    for (const auto& p : fit.parameters)
        out << p.name << " = " << format_number(p.value) << " +/- " << format_number(p.sigma) << '\n';
    if (fit.zero_crossing)
        out << "zero_crossing = " << format_number(*fit.zero_crossing) << " +/- "
            << format_number(fit.zero_crossing_sigma.value_or(0.0)) << '\n';
    out << "rss = " << format_number(fit.rss) << ", dof = " << fit.dof << '\n';
    for (const auto& w : fit.warnings)
        err << "warning: " << w << '\n';
    for (const auto& n : fit.notes)
        err << "note: " << n << '\n';
}

inline int cmd_fit(const std::string& kind, const Options& o, Context& ctx)
{
    Run run("fit " + kind, ctx.arguments, o.out);
    FitResult fit;
    if (kind == "infer") {
        const RunConfig rc = load_config_checked(o, run);
        ForeignExperiment e;
        e.config = rc.cavity;
        e.pump_ratio = o.sigma;
        e.threshold_power = rc.require_threshold();
        e.omega = normalize_frequency(o.freq_hz, rc.cavity);
        e.observable = parse_observable(o.observable);
        e.apply_detection = !o.raw;
        const auto b = split_colon(o.bracket);
        if (b.size() != 2)
            throw ValidationError("--bracket: expected lo:hi");
        const InferenceResult r =
            infer_eta00(e, o.observed, parse_number(b[0], "--bracket"), parse_number(b[1], "--bracket"));
        auto os = run.open("fit_infer.csv");
        CsvWriter w(os);
        w.cell("quantity").cell("value").end_row();
        w.cell("eta_00").cell(r.found ? format_number(r.eta00) : std::string("nan")).end_row();
        w.cell("found").cell(r.found).end_row();
        w.cell("bracket_low").cell(r.bracket_low).end_row();
        w.cell("bracket_high").cell(r.bracket_high).end_row();
        w.cell("tolerance").cell(r.tolerance).end_row();
        w.cell("iterations").cell(static_cast<std::size_t>(r.iterations)).end_row();
        os.close();
        run.finish();
        if (!r.found) {
            ctx.err << "no solution: " << r.message << '\n';
            return exit_numerical;
        }
        ctx.out << "eta_00 = " << format_number(r.eta00) << " /W (" << o.observable << ", bracket "
                << format_number(r.bracket_low) << ":" << format_number(r.bracket_high) << ", "
                << r.iterations << " iterations)\n";
        return exit_ok;
    }

    if (o.data.empty())
        throw ValidationError("--data is required");
    const CsvTable table = load_csv(o.data);
    run.input(o.data);
    EtaFitOptions fo;
    fo.free_intercept = o.free_intercept;
    fo.undo_detection = !o.raw;

    if (kind == "eta-diag") {
        const RunConfig rc = load_config_checked(o, run);
        fit = fit_eta_diagonal(diagonal_records_from(table), rc.cavity, o.mode,
                               normalize_frequency(o.freq_hz, rc.cavity), fo);
    } else if (kind == "eta-cross") {
        const RunConfig rc = load_config_checked(o, run);
        if (o.modes.size() != 2)
            throw ValidationError("--modes needs two mode indices");
        fit = fit_eta_cross(cross_records_from(table), rc.cavity, o.modes[0], o.modes[1],
                            normalize_frequency(o.freq_hz, rc.cavity), fo);
    } else if (kind == "waist") {
        const RunConfig rc = load_config_checked(o, run);
        fit = fit_waist_profile(profile_points_from(table, "z_m"), rc.cavity);
    } else if (kind == "temp") {
        fit = fit_temperature(profile_points_from(table, "temp_k"));
    } else {
        throw ValidationError("unknown fit kind " + kind);
    }

    std::string name = "fit_" + kind + ".csv";
    std::replace(name.begin(), name.end(), '-', '_');
    auto os = run.open(name);
    write_fit_result(os, fit);
    os.close();
    run.finish();
    report_fit(fit, ctx.out, ctx.err);
    return exit_ok;
}

inline int cmd_synth(const std::string& kind, const Options& o, Context& ctx)
{
    Run run("synth " + kind, ctx.arguments, o.out);
    run.seed(o.seed);
    const NoiseSpec noise{o.noise, o.seed};
    std::string name = "synth_" + kind + ".csv";
    std::replace(name.begin(), name.end(), '-', '_');

    if (kind == "eta-diag") {
        const RunConfig rc = load_config_checked(o, run);
        const auto recs = synthetic_diagonal_records(
            rc.cavity, o.mode, o.eta, parse_range(o.power_range, "--powers").grid(),
            parse_power_reference(o.power_ref), normalize_frequency(o.freq_hz, rc.cavity), noise);
        auto os = run.open(name);
        write_diagonal_records(os, recs);
    } else if (kind == "eta-cross") {
        const RunConfig rc = load_config_checked(o, run);
        if (o.modes.size() != 2)
            throw ValidationError("--modes needs two mode indices");
        std::vector<std::pair<double, double>> p;
        for (double pj : parse_range(o.power_range, "--powers").grid())
            p.emplace_back(pj, o.power_ratio * pj);
        const auto recs = synthetic_cross_records(rc.cavity, o.modes[0], o.modes[1], o.eta, p,
                                                  normalize_frequency(o.freq_hz, rc.cavity), noise);
        auto os = run.open(name);
        write_cross_records(os, recs);
    } else if (kind == "waist") {
        const RunConfig rc = load_config_checked(o, run);
        const CavityConfig cav = rc.cavity;
        const double f = o.factor;
        const auto pts = synthetic_profile(parse_range(o.z_range, "--z").grid(),
                                           [&cav, f](double z) { return f * waist_position_profile(cav, z); }, noise);
        auto os = run.open(name);
        write_profile_points(os, pts, "z_m");
    } else if (kind == "temp") {
        const double a = o.slope, b = o.intercept;
        const auto pts = synthetic_profile(parse_range(o.temp_range, "--temps").grid(),
                                           [a, b](double t) { return a * t + b; }, noise, o.sigma_eta);
        auto os = run.open(name);
        write_profile_points(os, pts, "temp_k");
    } else {
        throw ValidationError("unknown synth kind " + kind);
    }
    run.finish();
    ctx.out << "wrote " << name << '\n';
    return exit_ok;
}

inline int cmd_preset(const Options& o, Context& ctx)
{
    fs::create_directories(o.out);
    std::string name;
    std::string text;
    if (o.preset == "reference") {
        name = "reference_cavity.cfg";
        text = to_key_values(reference_opo_cavity(), kReferenceThresholdPower);
    } else if (o.preset == "geometry") {
        name = "geometry_cavity.cfg";
        text = to_key_values(geometry_study_cavity(), kReferenceThresholdPower);
    } else if (o.preset == "eta-measured") {
        name = "eta_measured.cfg";
        const Mat3& e = NoiseCouplings::measured().eta;
        std::ostringstream ss;
        for (int j = 0; j < kModes; ++j)
            for (int k = j; k < kModes; ++k)
                ss << "eta." << j << k << " = " << format_number(e(j, k)) << '\n';
        text = ss.str();
    } else {
        throw ValidationError("unknown preset '" + o.preset + "' (reference, geometry, eta-measured)");
    }
    const fs::path path = fs::path(o.out) / name;
    std::ofstream(path, std::ios::binary) << text;
    ctx.out << "wrote " << path.string() << '\n';
    return exit_ok;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

inline int cmd_replay(const Options& o, Context& ctx)
{
    if (o.manifest.empty())
        throw ValidationError("--manifest is required");
    const RunManifest m = load_manifest(o.manifest);
    for (const auto& in : m.inputs) {
        if (!fs::exists(in.path))
            throw ValidationError("replay: input " + in.path + " is missing");
        if (file_sha256(in.path) != in.sha256)
            throw ValidationError("replay: input " + in.path + " changed since the recorded run");
    }
    std::vector<std::string> args = m.arguments;
    args.push_back("--out");
    args.push_back(o.out);
    const int code = run(args, ctx.out, ctx.err);
    if (code != exit_ok && code != exit_comparison)
        return code;
    int mismatches = 0;
    for (const auto& f : m.outputs) {
        const fs::path p = fs::path(o.out) / f.path;
        const bool same = fs::exists(p) && file_sha256(p.string()) == f.sha256;
        ctx.out << (same ? "identical " : "DIFFERS   ") << f.path << '\n';
        mismatches += same ? 0 : 1;
    }
    return mismatches == 0 ? exit_ok : exit_comparison;
}

// ---------------------------------------------------------------------------

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Quantum noise covariance of a triply resonant OPO with phonon phase noise", "opo_noise"};
    app.set_version_flag("--version", std::string(OPO_NOISE_VERSION));
    app.require_subcommand(1);
    Options o;

    auto common = [&o](CLI::App* c, bool config_required) {
        auto* opt = c->add_option("--config", o.config, "cavity configuration (key = value)");
        if (config_required)
            opt->required();
        c->add_option("--out", o.out, "output directory")->capture_default_str();
    };
    auto model_opts = [&o](CLI::App* c) {
        c->add_option("--eta-file", o.eta_file, "eta coupling file (eta.00 ... eta.22)");
        c->add_option("--sigma", o.sigma, "pump ratio P_in / P_th")->capture_default_str();
        c->add_option("--freq-hz", o.freq_hz, "analysis frequency (Hz)")->capture_default_str();
    };
    auto seed_opt = [&o](CLI::App* c) {
        c->add_option("--seed", o.seed, "master seed")->capture_default_str();
    };

    auto* spectrum = app.add_subcommand("spectrum", "output covariance at one frequency");
    common(spectrum, true);
    model_opts(spectrum);
    spectrum->add_option("--regime", o.regime, "opo or free")->capture_default_str();
    spectrum->add_option("--powers", o.powers, "free regime intracavity powers P0,P1,P2 (W)")->delimiter(',');

    auto* sweep_cmd = app.add_subcommand("sweep", "covariance table along one axis");
    common(sweep_cmd, true);
    model_opts(sweep_cmd);
    sweep_cmd->add_option("--axis", o.axis, "name:start:stop:count (pump_ratio, frequency, temperature, crystal_z)")
        ->required();
    sweep_cmd->add_flag("--detected", o.detected, "apply detection efficiencies");

    auto* oracle = app.add_subcommand("oracle", "Monte-Carlo check of the analytic covariance");
    common(oracle, true);
    model_opts(oracle);
    seed_opt(oracle);
    oracle->add_option("--tolerance", o.tolerance, "allowed |z| per entry")->capture_default_str();
    oracle->add_option("--rel-tolerance", o.rel_tolerance, "relative floor of the tolerance")->capture_default_str();
    oracle->add_option("--effective-segments", o.effective_segments, "overrides oracle.effective_segments");
    oracle->add_option("--regime", o.regime, "opo or free")->capture_default_str();
    oracle->add_option("--powers", o.powers, "free regime intracavity powers P0,P1,P2 (W)")->delimiter(',');
    oracle->add_option("--target", o.target, "model or zero (compare against eta = 0)")->capture_default_str();

    auto* fit = app.add_subcommand("fit", "parameter fits");
    fit->require_subcommand(1);
    std::vector<std::pair<std::string, CLI::App*>> fits;
    for (const char* k : {"eta-diag", "eta-cross", "waist", "temp"}) {
        auto* c = fit->add_subcommand(k);
        common(c, std::string(k) != "temp");
        c->add_option("--data", o.data, "input CSV")->required();
        fits.emplace_back(k, c);
    }
    for (auto* c : {fits[0].second, fits[1].second}) {
        c->add_option("--freq-hz", o.freq_hz, "analysis frequency (Hz)")->capture_default_str();
        c->add_flag("--free-intercept", o.free_intercept, "diagnostic fit with a free intercept");
        c->add_flag("--raw", o.raw, "data are not detection-limited (skip efficiency correction)");
    }
    fits[0].second->add_option("--mode", o.mode, "mode index")->capture_default_str();
    fits[1].second->add_option("--modes", o.modes, "mode pair j,k")->delimiter(',')->expected(2);
    {
        auto* c = fit->add_subcommand("infer", "eta_00 from one observed value");
        common(c, true);
        model_opts(c);
        c->add_option("--observable", o.observable, "pump_phase, duan or phase_sum")->capture_default_str();
        c->add_option("--observed", o.observed, "observed value (SQL units)")->required();
        c->add_option("--bracket", o.bracket, "search bracket lo:hi (1/W)")->capture_default_str();
        c->add_flag("--raw", o.raw, "observable is not detection-limited");
        fits.emplace_back("infer", c);
    }

    auto* synth = app.add_subcommand("synth", "synthetic measurement-style data");
    synth->require_subcommand(1);
    std::vector<std::pair<std::string, CLI::App*>> synths;
    for (const char* k : {"eta-diag", "eta-cross", "waist", "temp"}) {
        auto* c = synth->add_subcommand(k);
        common(c, std::string(k) != "temp");
        seed_opt(c);
        c->add_option("--noise", o.noise, "relative Gaussian noise")->capture_default_str();
        synths.emplace_back(k, c);
    }
    for (auto* c : {synths[0].second, synths[1].second}) {
        c->add_option("--eta", o.eta, "coupling (1/W)")->required();
        c->add_option("--powers", o.power_range, "start:stop:count (W)")->required();
        c->add_option("--freq-hz", o.freq_hz, "analysis frequency (Hz)")->capture_default_str();
    }
    synths[0].second->add_option("--mode", o.mode, "mode index")->capture_default_str();
    synths[0].second->add_option("--power-ref", o.power_ref, "intracavity, reflected_output or transmitted_output")
        ->capture_default_str();
    synths[1].second->add_option("--modes", o.modes, "mode pair j,k")->delimiter(',')->expected(2);
    synths[1].second->add_option("--power-ratio", o.power_ratio, "P_k / P_j")->capture_default_str();
    synths[2].second->add_option("--factor", o.factor, "profile scale factor")->capture_default_str();
    synths[2].second->add_option("--z", o.z_range, "start:stop:count (m)")->required();
    synths[3].second->add_option("--slope", o.slope, "1/(W K)")->capture_default_str();
    synths[3].second->add_option("--intercept", o.intercept, "1/W")->capture_default_str();
    synths[3].second->add_option("--temps", o.temp_range, "start:stop:count (K)")->required();
    synths[3].second->add_option("--sigma-eta", o.sigma_eta, "absolute noise on eta (1/W)")->capture_default_str();

    auto* preset = app.add_subcommand("preset", "write a built-in configuration");
    preset->add_option("name", o.preset, "reference, geometry or eta-measured")->required();
    preset->add_option("--out", o.out, "output directory")->capture_default_str();

    auto* replay = app.add_subcommand("replay", "rerun a manifest and compare outputs");
    replay->add_option("--manifest", o.manifest, "manifest JSON")->required();
    replay->add_option("--out", o.out, "output directory for the rerun")->required();

    Context ctx{recorded_arguments(args), out, err};
    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? exit_ok : exit_validation;
    }

    for (auto* c : {oracle, synths[0].second, synths[1].second, synths[2].second, synths[3].second})
        if (c->parsed() && c->get_option_no_throw("--seed") && c->get_option("--seed")->count() > 0)
            o.seed_given = true;

    try {
        if (spectrum->parsed())
            return cmd_spectrum(o, ctx);
        if (sweep_cmd->parsed())
            return cmd_sweep(o, ctx);
        if (oracle->parsed())
            return cmd_oracle(o, ctx);
        for (const auto& [k, c] : fits)
            if (c->parsed())
                return cmd_fit(k, o, ctx);
        for (const auto& [k, c] : synths)
            if (c->parsed())
                return cmd_synth(k, o, ctx);
        if (preset->parsed())
            return cmd_preset(o, ctx);
        if (replay->parsed())
            return cmd_replay(o, ctx);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return exit_validation;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return exit_numerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_numerical;
    }
    return exit_validation;
}

} // namespace opo::cli

#endif // OPO_NOISE_TOOLS_CLI_HPP

#ifndef OPO_NOISE_CONFIG_HPP
#define OPO_NOISE_CONFIG_HPP

// Flat "key = value" configuration files. '#' starts a comment. Unknown and
// duplicate keys are errors; there are no defaults except
// modeN.detection_efficiency = 1.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "opo_noise/model.hpp"
#include "opo_noise/oracle.hpp"
#include "opo_noise/phonon.hpp"

namespace opo
{
struct KeyValues
{
    struct Entry
    {
        std::string value;
        int line = 0;
    };
    std::map<std::string, Entry> entries;
    std::string origin;

    bool has(const std::string& key) const { return entries.count(key) != 0; }

    const std::string& raw(const std::string& key) const
    {
        auto it = entries.find(key);
        if (it == entries.end())
            throw ValidationError(origin + ": missing key '" + key + "'");
        return it->second.value;
    }
};

namespace detail
{
inline std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}
} // namespace detail

inline double parse_number(std::string_view text, const std::string& what)
{
    text = detail::trim(text);
    if (!text.empty() && text.front() == '+')
        text.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
        throw ValidationError(what + ": '" + std::string(text) + "' is not a number");
    return v;
}

inline std::uint64_t parse_unsigned(std::string_view text, const std::string& what)
{
    text = detail::trim(text);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
        throw ValidationError(what + ": '" + std::string(text) + "' is not a non-negative integer");
    return v;
}

inline std::vector<double> parse_number_list(std::string_view text, const std::string& what)
{
    std::vector<double> out;
    while (true) {
        const auto comma = text.find(',');
        out.push_back(parse_number(text.substr(0, comma), what));
        if (comma == std::string_view::npos)
            break;
        text.remove_prefix(comma + 1);
    }
    return out;
}

inline KeyValues parse_key_values(std::string_view text, std::string origin = "config")
{
    KeyValues kv;
    kv.origin = std::move(origin);
    int line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ValidationError(kv.origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key(detail::trim(line.substr(0, eq)));
        const std::string value(detail::trim(line.substr(eq + 1)));
        if (key.empty() || value.empty())
            throw ValidationError(kv.origin + ":" + std::to_string(line_no) + ": empty key or value");
        if (kv.has(key))
            throw ValidationError(kv.origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
        kv.entries[key] = {value, line_no};
    }
    return kv;
}

inline std::string read_text_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ValidationError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline KeyValues load_key_values(const std::string& path)
{
    return parse_key_values(read_text_file(path), path);
}

// ---------------------------------------------------------------------------
// Known keys

inline const std::vector<std::string>& mode_keys()
{
    static const std::vector<std::string> k{"wavelength_m", "gamma", "mu", "refractive_index",
                                            "detection_efficiency", "waist_m"};
    return k;
}

inline const std::vector<std::string>& eta_keys()
{
    static const std::vector<std::string> k{"eta.00", "eta.01", "eta.02", "eta.11", "eta.12", "eta.22"};
    return k;
}

inline const std::vector<std::string>& crystal_keys()
{
    static const std::vector<std::string> k{"crystal.lc_m",          "crystal.p0",          "crystal.p1",
                                            "crystal.p2",            "crystal.strain_rms",  "crystal.density_kg_m3",
                                            "crystal.sound_speed_m_s", "crystal.temperature_k"};
    return k;
}

inline const std::vector<std::string>& oracle_keys()
{
    static const std::vector<std::string> k{"oracle.dt",           "oracle.n_traj",         "oracle.seed",
                                            "oracle.effective_segments", "oracle.segment_periods", "oracle.threads",
                                            "oracle.batch_segments"};
    return k;
}

inline std::set<std::string> known_keys()
{
    std::set<std::string> s;
    for (int j = 0; j < kModes; ++j)
        for (const auto& k : mode_keys())
            s.insert("mode" + std::to_string(j) + "." + k);
    for (const char* k : {"cavity.fsr_hz", "cavity.crystal_length_m", "cavity.rayleigh_length_m", "opo.threshold_w"})
        s.insert(k);
    for (const auto* group : {&eta_keys(), &crystal_keys(), &oracle_keys()})
        s.insert(group->begin(), group->end());
    return s;
}

inline void reject_unknown_keys(const KeyValues& kv, const std::set<std::string>& allowed)
{
    for (const auto& [key, entry] : kv.entries)
        if (!allowed.count(key))
            throw ValidationError(kv.origin + ":" + std::to_string(entry.line) + ": unknown key '" + key + "'");
}

// ---------------------------------------------------------------------------
// Typed views

inline double get_number(const KeyValues& kv, const std::string& key)
{
    return parse_number(kv.raw(key), kv.origin + ": " + key);
}

inline std::optional<double> find_number(const KeyValues& kv, const std::string& key)
{
    if (!kv.has(key))
        return std::nullopt;
    return get_number(kv, key);
}

inline CavityConfig cavity_from(const KeyValues& kv)
{
    CavityConfig c;
    for (int j = 0; j < kModes; ++j) {
        const std::string p = "mode" + std::to_string(j) + ".";
        ModeParams& m = c.modes[static_cast<std::size_t>(j)];
        m.index = j;
        m.wavelength = get_number(kv, p + "wavelength_m");
        m.gamma = get_number(kv, p + "gamma");
        m.mu = get_number(kv, p + "mu");
        m.refractive_index = get_number(kv, p + "refractive_index");
        m.detection_efficiency = find_number(kv, p + "detection_efficiency").value_or(1.0);
        c.waists[static_cast<std::size_t>(j)] = get_number(kv, p + "waist_m");
    }
    c.free_spectral_range = get_number(kv, "cavity.fsr_hz");
    c.crystal_length = get_number(kv, "cavity.crystal_length_m");
    c.rayleigh_length = get_number(kv, "cavity.rayleigh_length_m");
    return c;
}

inline bool has_couplings(const KeyValues& kv)
{
    for (const auto& k : eta_keys())
        if (kv.has(k))
            return true;
    return false;
}

// All six upper-triangle entries are required once any is present.
inline NoiseCouplings couplings_from(const KeyValues& kv)
{
    NoiseCouplings c;
    for (int j = 0; j < kModes; ++j)
        for (int k = j; k < kModes; ++k) {
            const double v = get_number(kv, "eta." + std::to_string(j) + std::to_string(k));
            c.eta(j, k) = v;
            c.eta(k, j) = v;
        }
    return c;
}

inline NoiseCouplings load_couplings(const std::string& path)
{
    const KeyValues kv = load_key_values(path);
    reject_unknown_keys(kv, {eta_keys().begin(), eta_keys().end()});
    return couplings_from(kv);
}

inline bool has_crystal(const KeyValues& kv)
{
    for (const auto& k : crystal_keys())
        if (kv.has(k))
            return true;
    return false;
}

inline CrystalModel crystal_from(const KeyValues& kv)
{
    auto voigt = [&kv](const std::string& key) {
        const auto v = parse_number_list(kv.raw(key), kv.origin + ": " + key);
        if (v.size() != 6)
            throw ValidationError(kv.origin + ": " + key + " needs six comma-separated numbers (xx, yy, zz, yz, xz, xy)");
        Voigt out{};
        std::copy(v.begin(), v.end(), out.begin());
        return out;
    };
    CrystalModel c;
    c.coherence_length = get_number(kv, "crystal.lc_m");
    for (int j = 0; j < kModes; ++j)
        c.photoelastic[static_cast<std::size_t>(j)] = voigt("crystal.p" + std::to_string(j));
    c.strain_rms = voigt("crystal.strain_rms");
    c.density = get_number(kv, "crystal.density_kg_m3");
    c.sound_speed = get_number(kv, "crystal.sound_speed_m_s");
    c.temperature = get_number(kv, "crystal.temperature_k");
    require_valid(c);
    return c;
}

struct OracleSettings
{
    double effective_segments = 1e5;
    double segment_periods = 50.0;
    std::size_t n_trajectories = 16;
    std::uint64_t seed = 1;
    std::optional<double> time_step;
    std::optional<std::size_t> batch_segments;
    unsigned threads = 0;
};

inline OracleSettings oracle_settings_from(const KeyValues& kv)
{
    OracleSettings s;
    auto count = [&kv](const std::string& key) { return parse_unsigned(kv.raw(key), kv.origin + ": " + key); };
    if (kv.has("oracle.effective_segments"))
        s.effective_segments = get_number(kv, "oracle.effective_segments");
    if (kv.has("oracle.segment_periods"))
        s.segment_periods = get_number(kv, "oracle.segment_periods");
    if (kv.has("oracle.n_traj"))
        s.n_trajectories = count("oracle.n_traj");
    if (kv.has("oracle.seed"))
        s.seed = count("oracle.seed");
    if (kv.has("oracle.dt"))
        s.time_step = get_number(kv, "oracle.dt");
    if (kv.has("oracle.batch_segments"))
        s.batch_segments = count("oracle.batch_segments");
    if (kv.has("oracle.threads"))
        s.threads = static_cast<unsigned>(count("oracle.threads"));
    if (!(s.effective_segments > 0.0) || !(s.segment_periods > 0.0) || s.n_trajectories == 0)
        throw ValidationError(kv.origin + ": oracle.effective_segments, oracle.segment_periods and oracle.n_traj must be positive");
    return s;
}

// Everything a run can take from one file.
struct RunConfig
{
    KeyValues raw;
    CavityConfig cavity;
    std::optional<double> threshold_power;
    std::optional<NoiseCouplings> couplings;
    std::optional<CrystalModel> crystal;
    OracleSettings oracle;

    double require_threshold() const
    {
        if (!threshold_power)
            throw ValidationError(raw.origin + ": missing key 'opo.threshold_w'");
        return *threshold_power;
    }
};

inline RunConfig run_config_from(KeyValues kv)
{
    reject_unknown_keys(kv, known_keys());
    RunConfig rc;
    rc.cavity = cavity_from(kv);
    rc.threshold_power = find_number(kv, "opo.threshold_w");
    if (has_couplings(kv))
        rc.couplings = couplings_from(kv);
    if (has_crystal(kv))
        rc.crystal = crystal_from(kv);
    rc.oracle = oracle_settings_from(kv);
    rc.raw = std::move(kv);
    return rc;
}

inline RunConfig load_run_config(const std::string& path)
{
    return run_config_from(load_key_values(path));
}

// ---------------------------------------------------------------------------
// Writing

inline std::string format_number(double v)
{
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

inline std::string to_key_values(const CavityConfig& c, std::optional<double> threshold_power = std::nullopt,
                                 const std::optional<NoiseCouplings>& couplings = std::nullopt)
{
    std::ostringstream out;
    for (int j = 0; j < kModes; ++j) {
        const ModeParams& m = c.mode(j);
        const std::string p = "mode" + std::to_string(j) + ".";
        out << p << "wavelength_m = " << format_number(m.wavelength) << '\n'
            << p << "gamma = " << format_number(m.gamma) << '\n'
            << p << "mu = " << format_number(m.mu) << '\n'
            << p << "refractive_index = " << format_number(m.refractive_index) << '\n'
            << p << "detection_efficiency = " << format_number(m.detection_efficiency) << '\n'
            << p << "waist_m = " << format_number(c.waists[static_cast<std::size_t>(j)]) << '\n';
    }
    out << "cavity.fsr_hz = " << format_number(c.free_spectral_range) << '\n'
        << "cavity.crystal_length_m = " << format_number(c.crystal_length) << '\n'
        << "cavity.rayleigh_length_m = " << format_number(c.rayleigh_length) << '\n';
    if (threshold_power)
        out << "opo.threshold_w = " << format_number(*threshold_power) << '\n';
    if (couplings)
        for (int j = 0; j < kModes; ++j)
            for (int k = j; k < kModes; ++k)
                out << "eta." << j << k << " = " << format_number(couplings->eta(j, k)) << '\n';
    return out.str();
}

} // namespace opo

#endif // OPO_NOISE_CONFIG_HPP

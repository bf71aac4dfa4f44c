#include <catch_amalgamated.hpp>

#include <sstream>

#include "cli.hpp"

using namespace opo;
namespace fs = std::filesystem;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace
{
struct Scratch
{
    fs::path dir;
    Scratch()
    {
        dir = fs::temp_directory_path() / ("opo_cli_" + std::to_string(::getpid()) + "_" +
                                           std::to_string(counter()++));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }
    static int& counter()
    {
        static int n = 0;
        return n;
    }
    std::string operator/(const std::string& name) const { return (dir / name).string(); }
};

struct Result
{
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args)
{
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

void write(const std::string& path, const std::string& text) { std::ofstream(path) << text; }

std::string reference_config(const Scratch& s)
{
    const std::string path = s / "reference.cfg";
    write(path, to_key_values(reference_opo_cavity(), kReferenceThresholdPower, NoiseCouplings::measured()));
    return path;
}
} // namespace

TEST_CASE("config parser")
{
    const KeyValues kv = parse_key_values("# comment\n a = 1 \nb=2,3 # tail\n\n", "t");
    CHECK(kv.raw("a") == "1");
    CHECK(kv.raw("b") == "2,3");
    CHECK_THROWS_WITH(kv.raw("c"), ContainsSubstring("missing key 'c'"));
    CHECK_THROWS_WITH(parse_key_values("a = 1\na = 2\n"), ContainsSubstring("duplicate key 'a'"));
    CHECK_THROWS_AS(parse_key_values("just text\n"), ValidationError);
    CHECK(parse_number_list("1, 2.5,-3e2", "x") == std::vector<double>{1.0, 2.5, -300.0});
    CHECK_THROWS_AS(parse_number("1.5x", "x"), ValidationError);
}

TEST_CASE("config round trip and strictness")
{
    const CavityConfig c = reference_opo_cavity();
    const RunConfig rc = run_config_from(parse_key_values(to_key_values(c, 0.07, NoiseCouplings::measured())));
    for (int j = 0; j < kModes; ++j) {
        CHECK(rc.cavity.mode(j).gamma == c.mode(j).gamma);
        CHECK(rc.cavity.mode(j).mu == c.mode(j).mu);
        CHECK(rc.cavity.waists[j] == c.waists[j]);
    }
    CHECK(rc.threshold_power == 0.07);
    REQUIRE(rc.couplings);
    CHECK(rc.couplings->eta == NoiseCouplings::measured().eta);

    std::string text = to_key_values(c);
    CHECK_THROWS_WITH(run_config_from(parse_key_values(text + "mode0.colour = green\n")),
                      ContainsSubstring("unknown key 'mode0.colour'"));
    std::string missing = text;
    missing.erase(missing.find("mode1.mu"), missing.find('\n', missing.find("mode1.mu")) - missing.find("mode1.mu") + 1);
    CHECK_THROWS_WITH(run_config_from(parse_key_values(missing)), ContainsSubstring("missing key 'mode1.mu'"));

    std::string no_eff = text;
    const auto p = no_eff.find("mode2.detection_efficiency");
    no_eff.erase(p, no_eff.find('\n', p) - p + 1);
    CHECK(run_config_from(parse_key_values(no_eff)).cavity.mode(2).detection_efficiency == 1.0);

    CHECK_THROWS_WITH(run_config_from(parse_key_values(text + "eta.00 = 0.5\n")), ContainsSubstring("eta.01"));
}

TEST_CASE("crystal keys")
{
    const std::string text = to_key_values(reference_opo_cavity()) +
                             "crystal.lc_m = 2e-5\ncrystal.p0 = 0.1,0.1,0.2,0,0,0\ncrystal.p1 = 0.1,0.1,0.2,0,0,0\n"
                             "crystal.p2 = 0.1,0.1,0.2,0,0,0\ncrystal.strain_rms = 1e-9,1e-9,1e-9,0,0,0\n"
                             "crystal.density_kg_m3 = 3000\ncrystal.sound_speed_m_s = 4000\ncrystal.temperature_k = 296\n";
    const RunConfig rc = run_config_from(parse_key_values(text));
    REQUIRE(rc.crystal);
    CHECK(rc.crystal->photoelastic[2][2] == 0.2);
    std::string bad = text;
    bad.replace(bad.find("0.1,0.1,0.2,0,0,0"), 17, "0.1,0.2");
    CHECK_THROWS_WITH(run_config_from(parse_key_values(bad)), ContainsSubstring("six"));
}

TEST_CASE("csv formatting is locale free and round-trips")
{
    std::ostringstream os;
    CsvWriter w(os);
    w.cell("a,b").cell(0.1).cell(-2.5e-12).cell(3).end_row();
    CHECK(os.str() == "\"a,b\",0.1,-2.5e-12,3\n");
    CHECK(parse_number(format_number(0.1 + 0.2), "x") == 0.1 + 0.2);
    const auto cols = covariance_columns();
    REQUIRE(cols.size() == 21);
    CHECK(cols.front() == "V_p0p0");
    CHECK(cols[1] == "V_p0q0");
    CHECK(cols.back() == "V_q2q2");
    const CsvTable t = parse_csv("# c\nx,y\n1,2\n\n3,4\n");
    CHECK(t.rows.size() == 2);
    CHECK(t.number(1, t.require_column("y")) == 4.0);
    CHECK_THROWS_AS(parse_csv("x,y\n1\n"), ValidationError);
}

TEST_CASE("argument recording for replay")
{
    const auto rec = cli::recorded_arguments({"sweep", "--config", "a.cfg", "--out", "o", "--axis", "x", "--data=d.csv"});
    CHECK(std::find(rec.begin(), rec.end(), "--out") == rec.end());
    CHECK(std::find(rec.begin(), rec.end(), "o") == rec.end());
    CHECK(fs::path(rec[2]).is_absolute());
    CHECK(rec[rec.size() - 2] == "--data");
    CHECK(fs::path(rec.back()).is_absolute());
    CHECK(cli::parse_axis_spec("crystal_z:-0.03:0.03:25").range.count == 25);
    CHECK_THROWS_AS(cli::parse_axis_spec("crystal_z:-0.03:0.03"), ValidationError);
}

TEST_CASE("spectrum command")
{
    Scratch s;
    const std::string cfg = reference_config(s);
    const Result r = run({"spectrum", "--config", cfg, "--sigma", "1.5", "--freq-hz", "21e6", "--out", s.dir.string()});
    REQUIRE(r.code == 0);
    const CsvTable t = load_csv(s / "spectrum.csv");
    REQUIRE(t.rows.size() == 5);
    CHECK(t.rows[0][0] == "total");
    const SpectrumResult expect = opo_spectrum(reference_opo_cavity(), 1.5, normalize_frequency(21e6, reference_opo_cavity()),
                                               kReferenceThresholdPower, NoiseCouplings::measured());
    CHECK(t.number(0, t.require_column("V_q0q0")) == expect.v_total(q_index(0), q_index(0)));
    CHECK(t.number(0, t.require_column("V_p1p2")) == expect.v_total(p_index(1), p_index(2)));
    CHECK(fs::exists(s / "spectrum.csv.manifest.json"));

    const Result edge = run({"spectrum", "--config", cfg, "--sigma", "1", "--out", s.dir.string()});
    CHECK(edge.code == 0);
    CHECK_THAT(edge.err, ContainsSubstring("degenerate"));
}

TEST_CASE("validation errors exit with 1 and name the field")
{
    Scratch s;
    CavityConfig c = reference_opo_cavity();
    c.modes[1].gamma = 0.0;
    write(s / "bad.cfg", to_key_values(c, 0.07));
    const Result bad = run({"spectrum", "--config", s / "bad.cfg", "--out", s.dir.string()});
    CHECK(bad.code == 1);
    CHECK_THAT(bad.err, ContainsSubstring("mode1.gamma"));

    std::string text = to_key_values(reference_opo_cavity());
    write(s / "nothreshold.cfg", text);
    const Result miss = run({"spectrum", "--config", s / "nothreshold.cfg", "--out", s.dir.string()});
    CHECK(miss.code == 1);
    CHECK_THAT(miss.err, ContainsSubstring("opo.threshold_w"));

    CHECK(run({"spectrum"}).code == 1);
    CHECK(run({"sweep", "--config", s / "nothreshold.cfg", "--axis", "bogus:0:1:3", "--out", s.dir.string()}).code == 1);
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("sweep command and replay")
{
    Scratch s;
    const std::string cfg = reference_config(s);
    const Result r = run({"sweep", "--config", cfg, "--axis", "pump_ratio:1.0:1.7:8", "--out", s.dir.string()});
    REQUIRE(r.code == 0);
    const CsvTable t = load_csv(s / "sweep_pump_ratio.csv");
    CHECK(t.rows.size() == 8);
    CHECK(t.header.front() == "pump_ratio");
    CHECK(t.header[1] == "omega");
    CHECK(t.header[2] == "V_p0p0");
    CHECK(t.column("duan_value") == 23);
    CHECK(t.column("vlf_3") == 26);

    const std::string replay_dir = s / "replay";
    const Result rp = run({"replay", "--manifest", s / "sweep_pump_ratio.csv.manifest.json", "--out", replay_dir});
    CHECK(rp.code == 0);
    CHECK_THAT(rp.out, ContainsSubstring("identical sweep_pump_ratio.csv"));
    CHECK(read_text_file(s / "sweep_pump_ratio.csv") == read_text_file(replay_dir + "/sweep_pump_ratio.csv"));
    CHECK(read_text_file(s / "sweep_pump_ratio.csv.manifest.json") ==
          read_text_file(replay_dir + "/sweep_pump_ratio.csv.manifest.json"));

    // a changed input is refused
    write(cfg, read_text_file(cfg) + "# edited\n");
    CHECK(run({"replay", "--manifest", s / "sweep_pump_ratio.csv.manifest.json", "--out", replay_dir}).code == 1);
}

TEST_CASE("other sweep axes")
{
    Scratch s;
    const std::string cfg = reference_config(s);
    REQUIRE(run({"sweep", "--config", cfg, "--axis", "crystal_z:-0.03:0.03:25", "--out", s.dir.string()}).code == 0);
    const CsvTable z = load_csv(s / "sweep_crystal_z_m.csv");
    REQUIRE(z.rows.size() == 25);
    const int q0 = z.require_column("V_q0q0");
    CHECK_THAT(z.number(0, q0), WithinRel(z.number(24, q0), 1e-10));
    REQUIRE(run({"sweep", "--config", cfg, "--axis", "temperature:257:383:10", "--out", s.dir.string()}).code == 0);
    CHECK(load_csv(s / "sweep_temperature_k.csv").rows.size() == 10);
    REQUIRE(run({"sweep", "--config", cfg, "--axis", "frequency:0:1e8:3", "--out", s.dir.string()}).code == 0);
    const CsvTable f = load_csv(s / "sweep_frequency_hz.csv");
    CHECK_FALSE(f.rows[0].back().empty());
    CHECK(f.rows[1].back().empty());
}

TEST_CASE("oracle command")
{
    Scratch s;
    CavityConfig c = reference_opo_cavity();
    for (auto& m : c.modes)
        m.mu = 0.0;
    write(s / "lossless.cfg", to_key_values(c, 0.07) + "oracle.effective_segments = 600\noracle.n_traj = 2\n");
    const Result free = run({"oracle", "--config", s / "lossless.cfg", "--regime", "free", "--out", s.dir.string()});
    CHECK(free.code == 0);
    CHECK_THAT(free.out, ContainsSubstring("21/21"));
    const CsvTable t = load_csv(s / "oracle.csv");
    CHECK(t.column("V_q2q2_stderr") > 0);
    const std::string first = read_text_file(s / "oracle.csv");

    const Result again = run({"replay", "--manifest", s / "oracle.csv.manifest.json", "--out", s / "again"});
    CHECK(again.code == 0);
    CHECK(read_text_file(s / "again/oracle.csv") == first);

    const std::string cfg = reference_config(s);
    write(cfg, read_text_file(cfg) + "oracle.effective_segments = 600\noracle.n_traj = 2\n");
    const Result wrong = run({"oracle", "--config", cfg, "--sigma", "1.5", "--target", "zero", "--out", s / "w"});
    CHECK(wrong.code == 3);
    const CsvTable cmp = load_csv(s / "w/oracle_compare.csv");
    const int pass = cmp.require_column("pass");
    for (std::size_t i = 0; i < cmp.rows.size(); ++i)
        if (cmp.rows[i][0] == "V_q0q0")
            CHECK(cmp.rows[i][static_cast<std::size_t>(pass)] == "0");
}

TEST_CASE("synthetic data and fits through the command line")
{
    Scratch s;
    const std::string cfg = reference_config(s);
    const std::string out = s.dir.string();

    REQUIRE(run({"synth", "eta-diag", "--config", cfg, "--eta", "0.53", "--mode", "0", "--power-ref", "reflected_output",
                 "--powers", "0.002:0.02:10", "--out", out}).code == 0);
    const Result diag = run({"fit", "eta-diag", "--config", cfg, "--data", s / "synth_eta_diag.csv", "--mode", "0", "--out", out});
    REQUIRE(diag.code == 0);
    const CsvTable d = load_csv(s / "fit_eta_diag.csv");
    CHECK_THAT(d.number(0, 1), WithinRel(0.53, 1e-3));
    CHECK_THAT(diag.err, ContainsSubstring("systematic"));

    REQUIRE(run({"synth", "eta-cross", "--config", cfg, "--eta", "0.087", "--modes", "1,2", "--powers", "0.001:0.01:6",
                 "--out", out}).code == 0);
    REQUIRE(run({"fit", "eta-cross", "--config", cfg, "--data", s / "synth_eta_cross.csv", "--modes", "1,2", "--out", out}).code == 0);
    CHECK_THAT(load_csv(s / "fit_eta_cross.csv").number(0, 1), WithinRel(0.087, 1e-3));

    REQUIRE(run({"synth", "waist", "--config", cfg, "--factor", "0.2", "--z", "-0.03:0.03:15", "--out", out}).code == 0);
    REQUIRE(run({"fit", "waist", "--config", cfg, "--data", s / "synth_waist.csv", "--out", out}).code == 0);
    CHECK_THAT(load_csv(s / "fit_waist.csv").number(0, 1), WithinRel(0.2, 1e-9));

    REQUIRE(run({"synth", "temp", "--temps", "257:383:10", "--sigma-eta", "0.02", "--seed", "5", "--out", out}).code == 0);
    const Result temp = run({"fit", "temp", "--data", s / "synth_temp.csv", "--out", out});
    REQUIRE(temp.code == 0);
    CHECK_THAT(temp.out, ContainsSubstring("zero_crossing"));

    const double observed = observable_model(
        ForeignExperiment{reference_opo_cavity(), 1.5, kReferenceThresholdPower, normalize_frequency(21e6, reference_opo_cavity()),
                          Observable::pump_phase(), true},
        0.64);
    const Result inf = run({"fit", "infer", "--config", cfg, "--observed", format_number(observed), "--out", out});
    REQUIRE(inf.code == 0);
    CHECK_THAT(load_csv(s / "fit_infer.csv").number(0, 1), WithinAbs(0.64, 1e-6));
    CHECK(run({"fit", "infer", "--config", cfg, "--observed", "0.01", "--out", out}).code == 2);

    CHECK(run({"fit", "eta-diag", "--config", cfg, "--data", s / "nope.csv", "--out", out}).code == 1);
}

TEST_CASE("presets")
{
    Scratch s;
    REQUIRE(run({"preset", "reference", "--out", s.dir.string()}).code == 0);
    REQUIRE(run({"preset", "eta-measured", "--out", s.dir.string()}).code == 0);
    const RunConfig rc = load_run_config(s / "reference_cavity.cfg");
    CHECK(validate_config(rc.cavity).empty());
    CHECK(load_couplings(s / "eta_measured.cfg").eta == NoiseCouplings::measured().eta);
    CHECK(run({"preset", "nonsense", "--out", s.dir.string()}).code == 1);
}

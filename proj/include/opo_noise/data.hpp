#ifndef OPO_NOISE_DATA_HPP
#define OPO_NOISE_DATA_HPP

// Fit input files:
//   diagonal   power_w, power_ref, var_p, var_q[, sigma_var]
//   cross      power_j_w, power_k_w, cov_q[, sigma]
//   waist      z_m, eta_00[, sigma]
//   temp       temp_k, eta_00[, sigma]

#include <ostream>
#include <string>
#include <vector>

#include "opo_noise/csv.hpp"
#include "opo_noise/fit.hpp"

namespace opo
{
inline std::vector<PowerVarianceRecord> diagonal_records_from(const CsvTable& t)
{
    const int cp = t.require_column("power_w");
    const int cr = t.require_column("power_ref");
    const int cv_p = t.require_column("var_p");
    const int cv_q = t.require_column("var_q");
    const int cs = t.column("sigma_var");
    std::vector<PowerVarianceRecord> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        PowerVarianceRecord r;
        r.power = t.number(i, cp);
        r.power_reference = parse_power_reference(t.rows[i][static_cast<std::size_t>(cr)]);
        r.variance_p = t.number(i, cv_p);
        r.variance_q = t.number(i, cv_q);
        if (cs >= 0)
            r.sigma = t.number(i, cs);
        out.push_back(r);
    }
    return out;
}

inline std::vector<CrossRecord> cross_records_from(const CsvTable& t)
{
    const int cj = t.require_column("power_j_w");
    const int ck = t.require_column("power_k_w");
    const int cc = t.require_column("cov_q");
    const int cs = t.column("sigma");
    std::vector<CrossRecord> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        CrossRecord r;
        r.power_j = t.number(i, cj);
        r.power_k = t.number(i, ck);
        r.covariance_q = t.number(i, cc);
        if (cs >= 0)
            r.sigma = t.number(i, cs);
        out.push_back(r);
    }
    return out;
}

inline std::vector<ProfilePoint> profile_points_from(const CsvTable& t, const std::string& x_column)
{
    const int cx = t.require_column(x_column);
    const int ce = t.require_column("eta_00");
    const int cs = t.column("sigma");
    std::vector<ProfilePoint> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        ProfilePoint p;
        p.x = t.number(i, cx);
        p.eta = t.number(i, ce);
        if (cs >= 0)
            p.sigma = t.number(i, cs);
        out.push_back(p);
    }
    return out;
}

inline void write_diagonal_records(std::ostream& os, const std::vector<PowerVarianceRecord>& records)
{
    CsvWriter w(os);
    const bool sig = !records.empty() && records.front().sigma.has_value();
    w.cells(std::vector<std::string>{"power_w", "power_ref", "var_p", "var_q"});
    if (sig)
        w.cell("sigma_var");
    w.end_row();
    for (const auto& r : records) {
        w.cell(r.power).cell(to_string(r.power_reference)).cell(r.variance_p).cell(r.variance_q);
        if (sig)
            w.cell(*r.sigma);
        w.end_row();
    }
}

inline void write_cross_records(std::ostream& os, const std::vector<CrossRecord>& records)
{
    CsvWriter w(os);
    const bool sig = !records.empty() && records.front().sigma.has_value();
    w.cells(std::vector<std::string>{"power_j_w", "power_k_w", "cov_q"});
    if (sig)
        w.cell("sigma");
    w.end_row();
    for (const auto& r : records) {
        w.cell(r.power_j).cell(r.power_k).cell(r.covariance_q);
        if (sig)
            w.cell(*r.sigma);
        w.end_row();
    }
}

inline void write_profile_points(std::ostream& os, const std::vector<ProfilePoint>& points, const std::string& x_column)
{
    CsvWriter w(os);
    const bool sig = !points.empty() && points.front().sigma.has_value();
    w.cell(x_column).cell("eta_00");
    if (sig)
        w.cell("sigma");
    w.end_row();
    for (const auto& p : points) {
        w.cell(p.x).cell(p.eta);
        if (sig)
            w.cell(*p.sigma);
        w.end_row();
    }
}

inline void write_fit_result(std::ostream& os, const FitResult& fit)
{
    CsvWriter w(os);
    w.cells(std::vector<std::string>{"quantity", "value", "sigma"});
    w.end_row();
    for (const auto& p : fit.parameters) {
        w.cell(p.name).cell(p.value).cell(p.sigma);
        w.end_row();
    }
    if (fit.zero_crossing) {
        w.cell("zero_crossing").cell(*fit.zero_crossing).cell(fit.zero_crossing_sigma.value_or(0.0));
        w.end_row();
    }
    w.cell("rss").cell(fit.rss).cell(0.0);
    w.end_row();
    w.cell("dof").cell(fit.dof).cell(0.0);
    w.end_row();
}

} // namespace opo

#endif // OPO_NOISE_DATA_HPP

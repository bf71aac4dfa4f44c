#ifndef OPO_NOISE_CSV_HPP
#define OPO_NOISE_CSV_HPP

// Headered, comma-separated, '.' decimal. Numbers use shortest round-trip
// formatting, so output never depends on the locale.

#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "opo_noise/config.hpp"
#include "opo_noise/model.hpp"

namespace opo
{
inline const char* quadrature_name(int i)
{
    static const char* names[kDim] = {"p0", "q0", "p1", "q1", "p2", "q2"};
    return names[i];
}

// V_p0p0, V_p0q0, ..., V_q2q2 in row-major upper-triangle order.
inline std::vector<std::string> covariance_columns(const std::string& suffix = "")
{
    std::vector<std::string> cols;
    for (int i = 0; i < kDim; ++i)
        for (int k = i; k < kDim; ++k)
            cols.push_back(std::string("V_") + quadrature_name(i) + quadrature_name(k) + suffix);
    return cols;
}

inline std::vector<double> upper_triangle(const Mat6& m)
{
    std::vector<double> v;
    for (int i = 0; i < kDim; ++i)
        for (int k = i; k < kDim; ++k)
            v.push_back(m(i, k));
    return v;
}

class CsvWriter
{
public:
    explicit CsvWriter(std::ostream& out) : out_(out) {}

    CsvWriter& cell(std::string_view s)
    {
        sep();
        if (s.find_first_of(",\"\n") == std::string_view::npos) {
            out_ << s;
        } else {
            out_ << '"';
            for (char c : s) {
                if (c == '"')
                    out_ << '"';
                out_ << (c == '\n' ? ' ' : c);
            }
            out_ << '"';
        }
        return *this;
    }
    CsvWriter& cell(const std::string& s) { return cell(std::string_view(s)); }
    CsvWriter& cell(const char* s) { return cell(std::string_view(s)); }
    CsvWriter& cell(double v) { return cell(format_number(v)); }
    CsvWriter& cell(int v) { return cell(std::to_string(v)); }
    CsvWriter& cell(std::size_t v) { return cell(std::to_string(v)); }
    CsvWriter& cell(bool v) { return cell(v ? "1" : "0"); }

    CsvWriter& cells(const std::vector<std::string>& v)
    {
        for (const auto& s : v)
            cell(s);
        return *this;
    }
    CsvWriter& cells(const std::vector<double>& v)
    {
        for (double x : v)
            cell(x);
        return *this;
    }

    void end_row()
    {
        out_ << '\n';
        first_ = true;
    }

private:
    void sep()
    {
        if (!first_)
            out_ << ',';
        first_ = false;
    }

    std::ostream& out_;
    bool first_ = true;
};

struct CsvTable
{
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::string origin;

    int column(const std::string& name) const
    {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name)
                return static_cast<int>(i);
        return -1;
    }

    int require_column(const std::string& name) const
    {
        const int c = column(name);
        if (c < 0)
            throw ValidationError(origin + ": missing column '" + name + "'");
        return c;
    }

    double number(std::size_t row, int col) const
    {
        return parse_number(rows.at(row).at(static_cast<std::size_t>(col)),
                            origin + " row " + std::to_string(row + 2) + " column '" + header[static_cast<std::size_t>(col)] + "'");
    }
};

// Minimal reader: no embedded commas or quotes in data files. Blank lines and
// '#' comment lines are skipped.
inline CsvTable parse_csv(std::string_view text, std::string origin = "csv")
{
    CsvTable t;
    t.origin = std::move(origin);
    auto split = [](std::string_view line) {
        std::vector<std::string> cells;
        while (true) {
            const auto comma = line.find(',');
            cells.emplace_back(detail::trim(line.substr(0, comma)));
            if (comma == std::string_view::npos)
                break;
            line.remove_prefix(comma + 1);
        }
        return cells;
    };
    bool have_header = false;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = detail::trim(text.substr(0, nl));
        text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
        if (line.empty() || line.front() == '#')
            continue;
        auto cells = split(line);
        if (!have_header) {
            t.header = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != t.header.size())
            throw ValidationError(t.origin + ": row " + std::to_string(t.rows.size() + 2) + " has " +
                                  std::to_string(cells.size()) + " cells, header has " + std::to_string(t.header.size()));
        t.rows.push_back(std::move(cells));
    }
    if (!have_header)
        throw ValidationError(t.origin + ": empty CSV");
    return t;
}

inline CsvTable load_csv(const std::string& path)
{
    return parse_csv(read_text_file(path), path);
}

} // namespace opo

#endif // OPO_NOISE_CSV_HPP

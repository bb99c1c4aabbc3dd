#include "hinf/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace hinf {

namespace {

bool is_missing(const std::string& cell) {
    return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "null" ||
           cell == "NULL" || cell == ".";
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// Minimal CSV line splitter with double-quote support ("" escapes a quote).
std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(trim(cur));
    return out;
}

bool parse_number(const std::string& cell, double* out) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(cell, &pos);
        if (pos != cell.size()) return false;
        *out = v;
        return true;
    } catch (const std::exception&) {
        return false;
    }
}

}  // namespace

Dataset ingest_csv_text(const std::string& content, const ColumnMapping& mapping) {
    std::istringstream in(content);
    std::string line;
    // Skip comment lines ('#'), e.g. the schema marker our own writers emit.
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!trim(line).empty() && trim(line)[0] != '#') {
            have_header = true;
            break;
        }
    }
    require(have_header, errc::data, "EmptyAfterDrop", "CSV has no header row");
    const std::vector<std::string> header = split_csv_line(line);

    std::map<std::string, std::size_t> col_of;
    for (std::size_t c = 0; c < header.size(); ++c) col_of[header[c]] = c;
    auto index_of = [&](const std::string& name) {
        auto it = col_of.find(name);
        require(it != col_of.end(), errc::data, "MissingColumn",
                "column '" + name + "' not found in CSV header");
        return it->second;
    };
    for (const std::string& name : mapping.one_hot)
        require(std::find(mapping.x.begin(), mapping.x.end(), name) != mapping.x.end(),
                errc::config, "MissingColumn", "one_hot column '" + name + "' must be an x column");

    std::vector<std::size_t> y_idx, t_idx, x_idx;
    for (const auto& n : mapping.y) y_idx.push_back(index_of(n));
    for (const auto& n : mapping.t) t_idx.push_back(index_of(n));
    for (const auto& n : mapping.x) x_idx.push_back(index_of(n));
    std::set<std::string> one_hot_set(mapping.one_hot.begin(), mapping.one_hot.end());

    // First pass: keep complete rows as raw cells.
    std::vector<std::vector<std::string>> rows;
    std::size_t dropped = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty() || trim(line)[0] == '#') continue;
        std::vector<std::string> cells = split_csv_line(line);
        require(cells.size() == header.size(), errc::data, "NonNumericCell",
                "row " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                    " cells, header has " + std::to_string(header.size()));
        bool missing = false;
        for (std::size_t c : y_idx) missing = missing || is_missing(cells[c]);
        for (std::size_t c : t_idx) missing = missing || is_missing(cells[c]);
        for (std::size_t c : x_idx) missing = missing || is_missing(cells[c]);
        if (missing) {
            ++dropped;
            continue;
        }
        rows.push_back(std::move(cells));
    }
    require(!rows.empty(), errc::data, "EmptyAfterDrop",
            "no complete rows left after dropping " + std::to_string(dropped));

    const std::size_t n = rows.size();
    Dataset d;
    d.n = n;
    d.dropped_rows = dropped;

    auto numeric_at = [&](const std::vector<std::string>& cells, std::size_t c,
                          const std::string& col) {
        double v = 0.0;
        require(parse_number(cells[c], &v), errc::data, "NonNumericCell",
                "non-numeric cell '" + cells[c] + "' in numeric column '" + col + "'");
        return v;
    };

    d.y = Mat(n, y_idx.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < y_idx.size(); ++k)
            d.y(i, k) = numeric_at(rows[i], y_idx[k], mapping.y[k]);
    d.y_names = mapping.y;

    const std::size_t dt = t_idx.size() + (mapping.prepend_intercept ? 1 : 0);
    d.t = Mat(n, dt);
    if (mapping.prepend_intercept) {
        d.t_names.push_back("(intercept)");
        for (std::size_t i = 0; i < n; ++i) d.t(i, 0) = 1.0;
    }
    for (std::size_t k = 0; k < t_idx.size(); ++k) {
        d.t_names.push_back(mapping.t[k]);
        const std::size_t col = k + (mapping.prepend_intercept ? 1 : 0);
        for (std::size_t i = 0; i < n; ++i)
            d.t(i, col) = numeric_at(rows[i], t_idx[k], mapping.t[k]);
    }

    // Expand x: numeric columns in mapping order, one-hot columns inline.
    std::vector<std::vector<double>> x_cols;
    for (std::size_t k = 0; k < x_idx.size(); ++k) {
        const std::string& col = mapping.x[k];
        if (one_hot_set.count(col)) {
            std::set<std::string> levels;
            for (std::size_t i = 0; i < n; ++i) levels.insert(rows[i][x_idx[k]]);
            std::vector<std::string> sorted(levels.begin(), levels.end());
            Dataset::OneHot oh;
            oh.column = col;
            oh.levels = sorted;
            d.one_hots.push_back(oh);
            // First level dropped: k-1 indicators.
            for (std::size_t lv = 1; lv < sorted.size(); ++lv) {
                std::vector<double> ind(n, 0.0);
                for (std::size_t i = 0; i < n; ++i)
                    if (rows[i][x_idx[k]] == sorted[lv]) ind[i] = 1.0;
                x_cols.push_back(std::move(ind));
                d.x_names.push_back(col + "=" + sorted[lv]);
            }
        } else {
            std::vector<double> vals(n);
            for (std::size_t i = 0; i < n; ++i) vals[i] = numeric_at(rows[i], x_idx[k], col);
            double lo = vals[0], hi = vals[0];
            bool binary01 = true;
            for (double v : vals) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
                binary01 = binary01 && (v == 0.0 || v == 1.0);
            }
            Dataset::Rescale rs;
            rs.column = col;
            rs.lo = lo;
            rs.hi = hi;
            if (mapping.rescale_x && !binary01) {
                if (hi == lo) {
                    rs.constant = true;
                    std::fill(vals.begin(), vals.end(), 0.0);
                } else {
                    for (double& v : vals) v = 2.0 * (v - lo) / (hi - lo) - 1.0;
                }
            }
            d.x_rescales.push_back(rs);
            x_cols.push_back(std::move(vals));
            d.x_names.push_back(col);
        }
    }
    require(!x_cols.empty(), errc::data, "MissingColumn", "no x columns mapped");
    d.x = Mat(n, x_cols.size());
    for (std::size_t c = 0; c < x_cols.size(); ++c)
        for (std::size_t i = 0; i < n; ++i) d.x(i, c) = x_cols[c][i];
    return d;
}

Dataset ingest_csv(const std::string& path, const ColumnMapping& mapping) {
    std::ifstream f(path);
    require(f.good(), errc::data, "FileIO", "cannot open CSV file: " + path);
    std::string content((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return ingest_csv_text(content, mapping);
}

}  // namespace hinf

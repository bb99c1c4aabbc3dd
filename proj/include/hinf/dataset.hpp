#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hinf/linalg.hpp"

namespace hinf {

// Column-typed observations w_i = (y_i, t_i, x_i). The ingestion layer
// guarantees no missing values (rows with missing cells are dropped and
// counted) and records the one-hot expansion and covariate rescaling it
// applied so they can round-trip into output metadata.
struct Dataset {
    Mat y;  // n x dy
    Mat t;  // n x dt, intercept column already prepended when the loss wants one
    Mat x;  // n x dx
    std::vector<std::string> y_names, t_names, x_names;
    std::size_t n = 0;

    std::size_t dy() const { return y.cols(); }
    std::size_t dt() const { return t.cols(); }
    std::size_t dx() const { return x.cols(); }

    cspan y_row(std::size_t i) const { return {y.row(i), y.cols()}; }
    cspan t_row(std::size_t i) const { return {t.row(i), t.cols()}; }
    cspan x_row(std::size_t i) const { return {x.row(i), x.cols()}; }

    /// Materialize the subset given by row indices, preserving order.
    Dataset subset(const std::vector<std::size_t>& idx) const;

    // Ingestion metadata (empty when constructed synthetically).
    struct Rescale {
        std::string column;
        double lo = 0.0, hi = 0.0;  // original range mapped onto [-1, 1]
        bool constant = false;      // degenerate column passed through as 0
    };
    struct OneHot {
        std::string column;
        std::vector<std::string> levels;  // sorted; first level dropped
    };
    std::vector<Rescale> x_rescales;
    std::vector<OneHot> one_hots;
    std::size_t dropped_rows = 0;
};

inline Dataset Dataset::subset(const std::vector<std::size_t>& idx) const {
    require(!idx.empty(), errc::internal, "EmptySubset", "Dataset::subset needs indices");
    Dataset out;
    out.y = Mat(idx.size(), y.cols());
    out.t = Mat(idx.size(), t.cols());
    out.x = Mat(idx.size(), x.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        for (std::size_t c = 0; c < y.cols(); ++c) out.y(r, c) = y(idx[r], c);
        for (std::size_t c = 0; c < t.cols(); ++c) out.t(r, c) = t(idx[r], c);
        for (std::size_t c = 0; c < x.cols(); ++c) out.x(r, c) = x(idx[r], c);
    }
    out.y_names = y_names;
    out.t_names = t_names;
    out.x_names = x_names;
    out.n = idx.size();
    return out;
}

}  // namespace hinf

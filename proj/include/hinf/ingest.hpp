#pragma once

#include <string>
#include <vector>

#include "hinf/dataset.hpp"

namespace hinf {

// CSV ingestion: UTF-8 with a header row. Cells equal to "", "NA", "NaN",
// "nan", "null", "NULL" or "." are missing; rows containing any missing cell
// are dropped and counted. Categorical x columns listed under one_hot expand
// to k-1 indicators (levels sorted lexicographically, first level dropped).
// Continuous x columns are affinely rescaled onto [-1, 1] with the transform
// recorded; columns already coded {0,1} pass through, and constant columns
// are flagged and passed through as 0.

struct ColumnMapping {
    std::vector<std::string> y;
    std::vector<std::string> t;
    std::vector<std::string> x;
    std::vector<std::string> one_hot;  // subset of x
    bool rescale_x = true;
    bool prepend_intercept = false;  // set when the loss expects one
};

Dataset ingest_csv_text(const std::string& content, const ColumnMapping& mapping);
Dataset ingest_csv(const std::string& path, const ColumnMapping& mapping);

}  // namespace hinf

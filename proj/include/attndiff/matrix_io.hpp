#pragma once

#include <string>

#include "attndiff/types.hpp"

namespace attndiff {

// Value matrices travel as CSV: a header line with the two dimensions
// ("n,d"), then one row per line. Doubles are written in shortest
// round-trip form so rewrites are byte-identical.
void save_matrix_csv(const MatrixView& m, const std::string& path);
Matrix load_matrix_csv(const std::string& path);

// Shortest round-trip decimal form of a double.
std::string format_double(double v);

} // namespace attndiff

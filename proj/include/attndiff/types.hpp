#pragma once

#include <Eigen/Dense>

namespace attndiff {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Read-only view type used by free functions so callers can pass blocks
// and expressions without copies.
using MatrixView = Eigen::Ref<const Matrix>;
using VectorView = Eigen::Ref<const Vector>;

} // namespace attndiff

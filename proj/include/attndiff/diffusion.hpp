#pragma once

#include <vector>

#include "attndiff/graph.hpp"
#include "attndiff/types.hpp"

namespace attndiff {

// Teleport probability and diffusion step count. alpha = 0 is accepted as a
// degenerate mode: the recursion becomes a plain walk (steps = 1 then
// reproduces one-hop attention exactly); PPR-specific operations that need
// the geometric series (exact operator, coefficients) require alpha > 0.
struct DiffusionConfig {
    double alpha = 0.1;
    int steps = 5;
};

void validate(const DiffusionConfig& cfg);

// Per-edge attention weights aligned with the graph's col_indices. Softmax
// rows sum to 1; the graph must outlive this object.
class EdgeAttention {
  public:
    EdgeAttention(const AttentionGraph& graph, Vector weights);

    // 1/degree on every edge.
    static EdgeAttention uniform(const AttentionGraph& graph);

    const AttentionGraph& graph() const { return *graph_; }
    const Vector& weights() const { return weights_; }
    Vector& weights() { return weights_; }
    double weight(Index edge) const { return weights_[edge]; }

    double max_row_sum_deviation() const;

  private:
    const AttentionGraph* graph_;
    Vector weights_;
};

// out[i] = sum_{j in Ne(i)} A(i,j) * Z[j]. Per-row accumulation runs in
// ascending column order so results do not depend on scheduling.
Matrix sparse_row_matvec(const EdgeAttention& attention, const MatrixView& z);

// K steps of Z <- (1-alpha) A Z + alpha V starting from Z = V. Rejects
// attention whose row sums deviate from 1 by more than 1e-9.
Matrix diffuse(const EdgeAttention& attention, const MatrixView& v,
               const DiffusionConfig& cfg);

// Exact resolvent alpha * (I - (1-alpha) A)^{-1} for a dense row-stochastic
// A. Ground truth for diffuse; n is capped at 1024.
Matrix exact_diffusion_operator(const MatrixView& a_dense, double alpha);

struct DiffusionCoefficients {
    std::vector<double> theta; // theta_k = alpha (1-alpha)^k, k = 0..K
    double residual = 0.0;     // (1-alpha)^{K+1}
};

DiffusionCoefficients diffusion_coefficients(double alpha, int steps);

// Upper bound 2 (1-alpha)^K * vmax on the sup-norm gap between the K-step
// iterate and the exact diffusion output.
double truncation_error_bound(double alpha, int steps, double vmax);

// Dense copy of the weighted attention matrix.
Matrix to_dense(const EdgeAttention& attention);

} // namespace attndiff

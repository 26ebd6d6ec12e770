#include "attndiff/diffusion.hpp"

#include <cmath>
#include <stdexcept>

namespace attndiff {

void validate(const DiffusionConfig& cfg) {
    if (!(cfg.alpha >= 0.0 && cfg.alpha <= 1.0))
        throw std::invalid_argument("DiffusionConfig: alpha must be in [0, 1]");
    if (cfg.steps < 0)
        throw std::invalid_argument("DiffusionConfig: steps must be >= 0");
}

EdgeAttention::EdgeAttention(const AttentionGraph& graph, Vector weights)
    : graph_(&graph), weights_(std::move(weights)) {
    if (weights_.size() != graph.nnz())
        throw std::invalid_argument("EdgeAttention: weight count must equal nnz");
    if (!weights_.allFinite())
        throw std::invalid_argument("EdgeAttention: weights must be finite");
}

EdgeAttention EdgeAttention::uniform(const AttentionGraph& graph) {
    Vector w(graph.nnz());
    for (Index i = 0; i < graph.n(); ++i) {
        const Index deg = graph.degree(i);
        if (deg == 0)
            throw std::invalid_argument("EdgeAttention::uniform: empty row " +
                                        std::to_string(i));
        for (Index k = graph.row_offsets()[i]; k < graph.row_offsets()[i + 1]; ++k)
            w[k] = 1.0 / static_cast<double>(deg);
    }
    return EdgeAttention(graph, std::move(w));
}

double EdgeAttention::max_row_sum_deviation() const {
    const AttentionGraph& g = *graph_;
    double worst = 0.0;
    for (Index i = 0; i < g.n(); ++i) {
        double sum = 0.0;
        for (Index k = g.row_offsets()[i]; k < g.row_offsets()[i + 1]; ++k)
            sum += weights_[k];
        worst = std::max(worst, std::abs(sum - 1.0));
    }
    return worst;
}

Matrix sparse_row_matvec(const EdgeAttention& attention, const MatrixView& z) {
    const AttentionGraph& g = attention.graph();
    if (z.rows() != g.n())
        throw std::invalid_argument("sparse_row_matvec: row count mismatch");
    // Token-major buffers keep each axpy contiguous; the per-entry operation
    // sequence (ascending column order) is unchanged.
    const Matrix zt = z.transpose();
    Matrix out_t = Matrix::Zero(z.cols(), z.rows());
    const Vector& w = attention.weights();
    for (Index i = 0; i < g.n(); ++i) {
        for (Index k = g.row_offsets()[i]; k < g.row_offsets()[i + 1]; ++k)
            out_t.col(i) += w[k] * zt.col(g.col_indices()[k]);
    }
    return out_t.transpose();
}

Matrix diffuse(const EdgeAttention& attention, const MatrixView& v,
               const DiffusionConfig& cfg) {
    validate(cfg);
    if (v.rows() != attention.graph().n())
        throw std::invalid_argument("diffuse: value rows must equal graph n");
    const double dev = attention.max_row_sum_deviation();
    if (dev > 1e-9)
        throw std::invalid_argument("diffuse: attention is not row-stochastic (max "
                                    "row-sum deviation " +
                                    std::to_string(dev) + ")");
    Matrix z = v;
    for (int k = 0; k < cfg.steps; ++k)
        z = (1.0 - cfg.alpha) * sparse_row_matvec(attention, z) + cfg.alpha * v;
    return z;
}

Matrix exact_diffusion_operator(const MatrixView& a_dense, double alpha) {
    const Index n = a_dense.rows();
    if (a_dense.cols() != n)
        throw std::invalid_argument("exact_diffusion_operator: matrix must be square");
    if (n > 1024)
        throw std::invalid_argument("exact_diffusion_operator: dense oracle capped at n = 1024");
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw std::invalid_argument("exact_diffusion_operator: alpha must be in (0, 1]");
    const Matrix system = Matrix::Identity(n, n) - (1.0 - alpha) * a_dense;
    return system.partialPivLu().solve(alpha * Matrix::Identity(n, n));
}

DiffusionCoefficients diffusion_coefficients(double alpha, int steps) {
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw std::invalid_argument("diffusion_coefficients: alpha must be in (0, 1]");
    if (steps < 0) throw std::invalid_argument("diffusion_coefficients: steps must be >= 0");
    DiffusionCoefficients out;
    out.theta.reserve(static_cast<std::size_t>(steps) + 1);
    double base = 1.0; // (1-alpha)^k
    for (int k = 0; k <= steps; ++k) {
        out.theta.push_back(alpha * base);
        base *= (1.0 - alpha);
    }
    out.residual = base;
    return out;
}

double truncation_error_bound(double alpha, int steps, double vmax) {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw std::invalid_argument("truncation_error_bound: alpha must be in [0, 1]");
    if (steps < 0) throw std::invalid_argument("truncation_error_bound: steps must be >= 0");
    return 2.0 * std::pow(1.0 - alpha, steps) * vmax;
}

Matrix to_dense(const EdgeAttention& attention) {
    const AttentionGraph& g = attention.graph();
    Matrix a = Matrix::Zero(g.n(), g.n());
    for (Index i = 0; i < g.n(); ++i)
        for (Index k = g.row_offsets()[i]; k < g.row_offsets()[i + 1]; ++k)
            a(i, g.col_indices()[k]) = attention.weights()[k];
    return a;
}

} // namespace attndiff

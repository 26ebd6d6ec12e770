#include "attndiff/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "attndiff/diffusion.hpp"

namespace attndiff {

namespace {

constexpr Index kDenseEigenCap = 4096;

void check_cap(const AttentionGraph& g, Index cap) {
    if (g.n() > cap)
        throw std::invalid_argument("spectral: dense eigensolver capped at n = " +
                                    std::to_string(cap));
}

struct SymmetricView {
    AttentionGraph graph; // A or A^T view collapsed to undirected
    std::vector<Index> degrees;
};

SymmetricView make_symmetric(const AttentionGraph& g) {
    SymmetricView sv{symmetrized(g), {}};
    sv.degrees.resize(static_cast<std::size_t>(sv.graph.n()));
    for (Index i = 0; i < sv.graph.n(); ++i)
        sv.degrees[static_cast<std::size_t>(i)] = sv.graph.degree(i);
    return sv;
}

Vector sorted_eigenvalues(const Matrix& sym) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("spectral: eigensolver failed to converge");
    return solver.eigenvalues(); // ascending
}

} // namespace

Matrix symmetric_transition_dense(const AttentionGraph& g) {
    const SymmetricView sv = make_symmetric(g);
    const Index n = sv.graph.n();
    Vector inv_sqrt_deg(n);
    for (Index i = 0; i < n; ++i) {
        const Index deg = sv.degrees[static_cast<std::size_t>(i)];
        if (deg == 0)
            throw std::invalid_argument("spectral: isolated node " + std::to_string(i));
        inv_sqrt_deg[i] = 1.0 / std::sqrt(static_cast<double>(deg));
    }
    Matrix t = Matrix::Zero(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j : sv.graph.row(i)) t(i, j) = inv_sqrt_deg[i] * inv_sqrt_deg[j];
    return t;
}

Spectrum normalized_laplacian_spectrum(const AttentionGraph& g) {
    check_cap(g, kDenseEigenCap);
    const Matrix t = symmetric_transition_dense(g);
    const Matrix lap = Matrix::Identity(t.rows(), t.rows()) - t;
    return {sorted_eigenvalues(lap), OperatorKind::NormalizedLaplacian};
}

Spectrum adjacency_spectrum(const AttentionGraph& g) {
    check_cap(g, kDenseEigenCap);
    const SymmetricView sv = make_symmetric(g);
    return {sorted_eigenvalues(adjacency_dense(sv.graph)), OperatorKind::Adjacency};
}

Spectrum transition_spectrum(const AttentionGraph& g) {
    check_cap(g, kDenseEigenCap);
    return {sorted_eigenvalues(symmetric_transition_dense(g)), OperatorKind::Transition};
}

Vector unnormalized_laplacian_eigenvalues(const AttentionGraph& g) {
    check_cap(g, kDenseEigenCap);
    const SymmetricView sv = make_symmetric(g);
    Matrix lap = -adjacency_dense(sv.graph);
    for (Index i = 0; i < sv.graph.n(); ++i) {
        // A self loop contributes to both the degree and the diagonal of A,
        // so it cancels out of D - A.
        const double deg = static_cast<double>(sv.degrees[static_cast<std::size_t>(i)]);
        lap(i, i) += deg;
    }
    return sorted_eigenvalues(lap);
}

ExpanderReport expander_report(const AttentionGraph& g) {
    check_cap(g, kDenseEigenCap);
    const SymmetricView sv = make_symmetric(g);
    const Index n = sv.graph.n();
    ExpanderReport rep;
    rep.n = n;
    rep.d_min = *std::min_element(sv.degrees.begin(), sv.degrees.end());
    rep.d_max = *std::max_element(sv.degrees.begin(), sv.degrees.end());
    rep.regular = (rep.d_min == rep.d_max);

    const Vector mu = sorted_eigenvalues(adjacency_dense(sv.graph)); // ascending
    rep.mu1 = mu[n - 1];
    rep.mu2 = n >= 2 ? mu[n - 2] : mu[n - 1];
    rep.mu_n = mu[0];

    const double mean_degree =
        static_cast<double>(sv.graph.nnz()) / static_cast<double>(n);
    const double d_for_eps = rep.regular ? static_cast<double>(rep.d_max) : mean_degree;
    rep.sigma = std::max(std::abs(rep.mu2), std::abs(rep.mu_n));
    rep.epsilon = rep.sigma / d_for_eps;
    rep.epsilon_approximate = !rep.regular;
    rep.beta = rep.sigma / d_for_eps;

    const Spectrum norm_lap = normalized_laplacian_spectrum(g);
    rep.lambda2 = n >= 2 ? norm_lap.eigenvalues[1] : 0.0;
    if (rep.regular) {
        // For d-regular graphs the D - A eigenvalues are d - mu, so reuse the
        // adjacency spectrum instead of a second decomposition.
        rep.lambda2_unnormalized = static_cast<double>(rep.d_max) - rep.mu2;
    } else {
        const Vector un = unnormalized_laplacian_eigenvalues(g);
        rep.lambda2_unnormalized = n >= 2 ? un[1] : 0.0;
    }
    rep.cheeger_lower = rep.lambda2_unnormalized / 2.0;
    rep.cheeger_upper = std::sqrt(2.0 * static_cast<double>(rep.d_max) *
                                  std::max(0.0, rep.lambda2_unnormalized));
    return rep;
}

double diffusion_eigenvalue_map(double lambda, double alpha) {
    if (lambda < 0.0 || lambda > 2.0)
        throw std::invalid_argument("diffusion_eigenvalue_map: lambda must be in [0, 2]");
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw std::invalid_argument("diffusion_eigenvalue_map: alpha must be in (0, 1]");
    return 1.0 - alpha / (1.0 - (1.0 - alpha) * (1.0 - lambda));
}

double heat_eigenvalue_map(double lambda, double t) {
    if (lambda < 0.0 || lambda > 2.0)
        throw std::invalid_argument("heat_eigenvalue_map: lambda must be in [0, 2]");
    if (!(t >= 0.0)) throw std::invalid_argument("heat_eigenvalue_map: t must be >= 0");
    return 1.0 - std::exp(-lambda * t);
}

double verify_eigen_transform(const AttentionGraph& g, double alpha) {
    check_cap(g, 256);
    const Matrix t = symmetric_transition_dense(g);
    const Index n = t.rows();

    // One-hop Laplacian spectrum, mapped through the closed form.
    const Vector lambda = sorted_eigenvalues(Matrix::Identity(n, n) - t);
    std::vector<double> mapped(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        const double l = std::clamp(lambda[i], 0.0, 2.0);
        mapped[static_cast<std::size_t>(i)] = diffusion_eigenvalue_map(l, alpha);
    }
    std::sort(mapped.begin(), mapped.end());

    // Numeric spectrum of the exact diffusion operator's Laplacian.
    const Matrix diffused = exact_diffusion_operator(t, alpha);
    const Matrix lap = Matrix::Identity(n, n) - 0.5 * (diffused + diffused.transpose());
    const Vector numeric = sorted_eigenvalues(lap);

    double worst = 0.0;
    for (Index i = 0; i < n; ++i)
        worst = std::max(worst, std::abs(numeric[i] - mapped[static_cast<std::size_t>(i)]));
    return worst;
}

std::vector<MixingPoint> mixing_tv_curve(const AttentionGraph& g, const VectorView& v0,
                                         int t_max) {
    const SymmetricView sv = make_symmetric(g);
    const Index n = sv.graph.n();
    if (!sv.degrees.empty() &&
        *std::min_element(sv.degrees.begin(), sv.degrees.end()) !=
            *std::max_element(sv.degrees.begin(), sv.degrees.end()))
        throw std::invalid_argument("mixing_tv_curve: graph must be d-regular");
    if (v0.size() != n)
        throw std::invalid_argument("mixing_tv_curve: v0 size mismatch");
    const double mass = v0.sum();
    if (v0.minCoeff() < -1e-12 || std::abs(mass - 1.0) > 1e-9)
        throw std::invalid_argument("mixing_tv_curve: v0 must be a probability vector");
    if (t_max < 0) throw std::invalid_argument("mixing_tv_curve: t_max must be >= 0");

    const double d = static_cast<double>(sv.degrees.front());
    const ExpanderReport rep = expander_report(g);
    const double beta = rep.beta;
    const double sqrt_n = std::sqrt(static_cast<double>(n));
    const Vector u = Vector::Constant(n, 1.0 / static_cast<double>(n));

    std::vector<MixingPoint> curve;
    curve.reserve(static_cast<std::size_t>(t_max) + 1);
    Vector v = v0;
    double bound = sqrt_n; // beta^0
    for (int t = 0; t <= t_max; ++t) {
        const double dist = (v - u).lpNorm<1>();
        curve.push_back({t, dist, bound});
        if (dist > bound + 1e-9)
            throw std::runtime_error("mixing_tv_curve: bound violated at t = " +
                                     std::to_string(t));
        // walk step: v <- A_hat v with A_hat = A / d (A symmetric)
        Vector next = Vector::Zero(n);
        for (Index i = 0; i < n; ++i)
            for (Index j : sv.graph.row(i)) next[i] += v[j] / d;
        v = std::move(next);
        bound *= beta;
    }
    return curve;
}

double cheeger_bruteforce(const AttentionGraph& g) {
    const SymmetricView sv = make_symmetric(g);
    const Index n = sv.graph.n();
    if (n > 14)
        throw std::invalid_argument("cheeger_bruteforce: enumeration capped at n = 14");
    if (n < 2) throw std::invalid_argument("cheeger_bruteforce: need n >= 2");

    // Undirected crossing edges: count ordered pairs (u in S, v not in S);
    // each undirected edge crosses once in each direction, so count ordered
    // pairs with u in S only.
    double best = std::numeric_limits<double>::infinity();
    const std::uint32_t limit = 1u << static_cast<unsigned>(n);
    for (std::uint32_t mask = 1; mask < limit; ++mask) {
        const int size = __builtin_popcount(mask);
        if (size > n / 2) continue;
        Index crossing = 0;
        for (Index u = 0; u < n; ++u) {
            if (!(mask & (1u << static_cast<unsigned>(u)))) continue;
            for (Index v : sv.graph.row(u)) {
                if (v == u) continue; // self loops never cross a cut
                if (!(mask & (1u << static_cast<unsigned>(v)))) ++crossing;
            }
        }
        best = std::min(best, static_cast<double>(crossing) / static_cast<double>(size));
    }
    return best;
}

double complete_graph_approx_epsilon(const AttentionGraph& g) {
    check_cap(g, kDenseEigenCap);
    const SymmetricView sv = make_symmetric(g);
    if (*std::min_element(sv.degrees.begin(), sv.degrees.end()) !=
        *std::max_element(sv.degrees.begin(), sv.degrees.end()))
        throw std::invalid_argument("complete_graph_approx_epsilon: graph must be d-regular");
    const double d = static_cast<double>(sv.degrees.front());
    const Vector lambda = unnormalized_laplacian_eigenvalues(g); // ascending
    double worst = 0.0;
    for (Index i = 1; i < lambda.size(); ++i)
        worst = std::max(worst, std::abs(d - lambda[i]) / d);
    return worst;
}

Matrix truncated_diffusion_operator_dense(const AttentionGraph& g, double alpha,
                                          int steps) {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw std::invalid_argument("truncated_diffusion_operator_dense: bad alpha");
    if (steps < 0)
        throw std::invalid_argument("truncated_diffusion_operator_dense: bad steps");
    const Matrix t = symmetric_transition_dense(g);
    const Index n = t.rows();
    Matrix m = Matrix::Identity(n, n);
    for (int k = 0; k < steps; ++k)
        m = (1.0 - alpha) * (t * m) + alpha * Matrix::Identity(n, n);
    return m;
}

} // namespace attndiff

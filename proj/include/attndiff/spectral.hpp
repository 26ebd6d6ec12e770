#pragma once

#include <vector>

#include "attndiff/graph.hpp"
#include "attndiff/types.hpp"

namespace attndiff {

enum class OperatorKind { NormalizedLaplacian, Adjacency, Transition };

struct Spectrum {
    Vector eigenvalues; // sorted ascending
    OperatorKind op = OperatorKind::NormalizedLaplacian;
};

// All spectral operations treat the pattern as an undirected, unweighted
// graph: an edge {i, j} exists iff either direction exists. Dense symmetric
// eigensolver, capped at n = 4096.

// I - D^{-1/2} A D^{-1/2}; eigenvalues in [0, 2]. Rejects isolated nodes.
Spectrum normalized_laplacian_spectrum(const AttentionGraph& g);

// Plain 0/1 adjacency spectrum.
Spectrum adjacency_spectrum(const AttentionGraph& g);

// D^{-1/2} A D^{-1/2}; the symmetric sibling of the random-walk matrix.
Spectrum transition_spectrum(const AttentionGraph& g);

// D - A eigenvalues, ascending (self loops cancel out of this operator).
Vector unnormalized_laplacian_eigenvalues(const AttentionGraph& g);

struct ExpanderReport {
    Index n = 0;
    Index d_min = 0;
    Index d_max = 0;
    bool regular = false;
    // Adjacency eigenvalues sorted descending; mu1 is the Perron value.
    double mu1 = 0.0;
    double mu2 = 0.0;
    double mu_n = 0.0;
    // max_{i>=2} |mu_i| / d. Exact for regular graphs; for irregular ones d
    // is replaced by the mean degree and the value is only indicative.
    double epsilon = 0.0;
    bool epsilon_approximate = false;
    double sigma = 0.0; // max(|mu2|, |mu_n|)
    double beta = 0.0;  // sigma / d
    double lambda2 = 0.0;               // normalized Laplacian
    double lambda2_unnormalized = 0.0;  // D - A
    // Edge-expansion bounds lambda2_un/2 <= h(G) <= sqrt(2 d lambda2_un),
    // stated for d-regular graphs (d_max is used when irregular).
    double cheeger_lower = 0.0;
    double cheeger_upper = 0.0;
};

ExpanderReport expander_report(const AttentionGraph& g);

// PPR spectral transform: lambda in [0, 2] of the one-hop normalized
// Laplacian maps to 1 - alpha / (1 - (1-alpha)(1-lambda)). Monotone, fixes 0.
double diffusion_eigenvalue_map(double lambda, double alpha);

// Heat-kernel variant: 1 - exp(-lambda * t).
double heat_eigenvalue_map(double lambda, double t);

// Builds the exact diffusion operator from the symmetric uniform transition,
// takes its Laplacian spectrum numerically, and compares against
// diffusion_eigenvalue_map applied to the one-hop spectrum. Returns the max
// absolute deviation over all eigenvalues. n capped at 256.
double verify_eigen_transform(const AttentionGraph& g, double alpha);

struct MixingPoint {
    int t = 0;
    double tv_distance = 0.0; // || A_hat^t v0 - u ||_1
    double bound = 0.0;       // sqrt(n) * beta^t
};

// Random walk A_hat = A/d on a connected d-regular graph against the uniform
// stationary distribution. Throws if the distance ever exceeds the bound.
std::vector<MixingPoint> mixing_tv_curve(const AttentionGraph& g, const VectorView& v0,
                                         int t_max);

// Exact edge expansion ratio h(G) by enumeration of all 2^n subsets;
// rejected above n = 14.
double cheeger_bruteforce(const AttentionGraph& g);

// Tightest epsilon such that the d-regular graph epsilon-approximates
// (d/n) K_n: max_{i>=2} |d - lambda_i| / d over the unnormalized Laplacian
// spectrum. Computed via the Laplacian route, independently of
// expander_report's adjacency route.
double complete_graph_approx_epsilon(const AttentionGraph& g);

// Dense D^{-1/2} A D^{-1/2} of the symmetrized pattern.
Matrix symmetric_transition_dense(const AttentionGraph& g);

// K-step truncated diffusion operator built from the symmetric uniform
// transition: M_0 = I, M_{k+1} = (1-alpha) T M_k + alpha I.
Matrix truncated_diffusion_operator_dense(const AttentionGraph& g, double alpha,
                                          int steps);

} // namespace attndiff

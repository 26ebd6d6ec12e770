#pragma once

#include <cstdint>
#include <vector>

#include "attndiff/diffusion.hpp"
#include "attndiff/graph.hpp"
#include "attndiff/types.hpp"

namespace attndiff {

struct HeadParams {
    Matrix w_q; // d x m
    Matrix w_k; // d x m
    Matrix w_v; // d x m
};

// All layer weights. Biases are omitted throughout; no normalization layers
// (a pre-norm variant would insert ahead of the projections and the
// feed-forward block).
struct LayerParams {
    std::vector<HeadParams> heads;
    Matrix w_o;   // (h*m) x d
    Matrix w_ff1; // d x r_ff
    Matrix w_ff2; // r_ff x d

    Index embed_dim() const { return w_o.cols(); }
    Index head_dim() const { return heads.empty() ? 0 : heads.front().w_q.cols(); }
    Index head_count() const { return static_cast<Index>(heads.size()); }
    Index ffn_dim() const { return w_ff1.cols(); }

    void validate() const;

    static LayerParams random(Index d, Index h, Index m, Index r_ff,
                              std::uint64_t seed);
};

struct Qkv {
    Matrix q, k, v; // each n x m
};

// Q = X W_Q, K = X W_K, V = X W_V.
Qkv project_qkv(const MatrixView& x, const HeadParams& head);

// Per-row softmax of Q_i . K_j / scale over the neighbors j of i, computed
// with max-subtraction. Requires a finalized graph so no row is empty.
EdgeAttention sparse_attention_scores(const MatrixView& q, const MatrixView& k,
                                      const AttentionGraph& graph, double scale);

// scores = sparse_attention_scores, output = diffuse(scores, V, cfg).
Matrix head_forward(const MatrixView& x, const HeadParams& head,
                    const AttentionGraph& graph, const DiffusionConfig& cfg);

// Full layer: U = X + cat(head_1..head_h) W_O; out = U + ReLU(U W_1) W_2.
Matrix layer_forward(const MatrixView& x, const LayerParams& params,
                     const AttentionGraph& graph, const DiffusionConfig& cfg);

// Forward intermediates retained for the backward pass.
struct HeadCache {
    Matrix q, k, v;
    Vector scores;          // per-edge softmax weights
    std::vector<Matrix> z;  // Z_0 .. Z_K
};

struct LayerCache {
    std::vector<HeadCache> heads;
    Matrix concat;  // n x (h*m)
    Matrix u;       // residual + merged heads
    Matrix pre_act; // U W_1 before ReLU
    Matrix output;
};

Matrix layer_forward(const MatrixView& x, const LayerParams& params,
                     const AttentionGraph& graph, const DiffusionConfig& cfg,
                     LayerCache& cache);

enum class ReferencePropagation { Truncated, ExactResolvent };

// Dense oracle: full n x n masked softmax, diffusion either by the identical
// K-step recursion or by the exact resolvent, then the same merge and
// feed-forward. Differs from the sparse path only in storage.
Matrix dense_reference_forward(
    const MatrixView& x, const LayerParams& params,
    const Eigen::Ref<const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>>& mask,
    const DiffusionConfig& cfg,
    ReferencePropagation propagation = ReferencePropagation::Truncated);

struct LayerGradients {
    Matrix x;
    std::vector<HeadParams> heads;
    Matrix w_o, w_ff1, w_ff2;
};

// Exact reverse-mode derivatives; the diffusion backward unrolls all K steps
// through the cached Z_k.
LayerGradients layer_backward(const MatrixView& x, const LayerParams& params,
                              const AttentionGraph& graph, const DiffusionConfig& cfg,
                              const MatrixView& upstream, const LayerCache& cache);

// Central finite differences of loss = sum(layer_forward) against the
// analytic gradients. Returns the max relative error over every parameter
// entry and every input entry. Cost is O(#params) forwards; n is capped.
double grad_check(const MatrixView& x, const LayerParams& params,
                  const AttentionGraph& graph, const DiffusionConfig& cfg,
                  double eps);

// --- Checkpoint I/O ---------------------------------------------------------

// Single binary blob with a JSON manifest line {h, m, d, r_ff, seed}.
void save_layer_params(const LayerParams& params, std::uint64_t seed,
                       const std::string& path);
LayerParams load_layer_params(const std::string& path);

} // namespace attndiff

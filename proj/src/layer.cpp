#include "attndiff/layer.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "attndiff/rng.hpp"

namespace attndiff {

void LayerParams::validate() const {
    if (heads.empty()) throw std::invalid_argument("LayerParams: need at least one head");
    const Index d = heads.front().w_q.rows();
    const Index m = heads.front().w_q.cols();
    for (const HeadParams& h : heads) {
        if (h.w_q.rows() != d || h.w_k.rows() != d || h.w_v.rows() != d ||
            h.w_q.cols() != m || h.w_k.cols() != m || h.w_v.cols() != m)
            throw std::invalid_argument("LayerParams: inconsistent head shapes");
        if (!h.w_q.allFinite() || !h.w_k.allFinite() || !h.w_v.allFinite())
            throw std::invalid_argument("LayerParams: non-finite head weights");
    }
    if (w_o.rows() != static_cast<Index>(heads.size()) * m || w_o.cols() != d)
        throw std::invalid_argument("LayerParams: w_o must be (h*m) x d");
    if (w_ff1.rows() != d || w_ff2.cols() != d || w_ff1.cols() != w_ff2.rows())
        throw std::invalid_argument("LayerParams: feed-forward shapes inconsistent");
    if (!w_o.allFinite() || !w_ff1.allFinite() || !w_ff2.allFinite())
        throw std::invalid_argument("LayerParams: non-finite weights");
}

namespace {

Matrix random_matrix(Rng& rng, Index rows, Index cols, double scale) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
    return m;
}

} // namespace

LayerParams LayerParams::random(Index d, Index h, Index m, Index r_ff,
                                std::uint64_t seed) {
    if (d <= 0 || h <= 0 || m <= 0 || r_ff <= 0)
        throw std::invalid_argument("LayerParams::random: dims must be positive");
    LayerParams p;
    const double proj_scale = 1.0 / std::sqrt(static_cast<double>(d));
    Rng rng(derive_seed(seed, "layer-params"));
    for (Index i = 0; i < h; ++i) {
        HeadParams head;
        head.w_q = random_matrix(rng, d, m, proj_scale);
        head.w_k = random_matrix(rng, d, m, proj_scale);
        head.w_v = random_matrix(rng, d, m, proj_scale);
        p.heads.push_back(std::move(head));
    }
    p.w_o = random_matrix(rng, h * m, d, 1.0 / std::sqrt(static_cast<double>(h * m)));
    p.w_ff1 = random_matrix(rng, d, r_ff, proj_scale);
    p.w_ff2 = random_matrix(rng, r_ff, d, 1.0 / std::sqrt(static_cast<double>(r_ff)));
    return p;
}

Qkv project_qkv(const MatrixView& x, const HeadParams& head) {
    if (x.cols() != head.w_q.rows())
        throw std::invalid_argument("project_qkv: X width must match projection rows");
    return {x * head.w_q, x * head.w_k, x * head.w_v};
}

EdgeAttention sparse_attention_scores(const MatrixView& q, const MatrixView& k,
                                      const AttentionGraph& graph, double scale) {
    if (q.rows() != graph.n() || k.rows() != graph.n() || q.cols() != k.cols())
        throw std::invalid_argument("sparse_attention_scores: shape mismatch");
    if (!(scale > 0.0))
        throw std::invalid_argument("sparse_attention_scores: scale must be positive");
    Vector weights(graph.nnz());
    for (Index i = 0; i < graph.n(); ++i) {
        const Index begin = graph.row_offsets()[i];
        const Index end = graph.row_offsets()[i + 1];
        if (begin == end)
            throw std::invalid_argument("sparse_attention_scores: empty row " +
                                        std::to_string(i) + " (graph not finalized?)");
        double row_max = -std::numeric_limits<double>::infinity();
        for (Index e = begin; e < end; ++e) {
            const double logit = q.row(i).dot(k.row(graph.col_indices()[e])) / scale;
            weights[e] = logit;
            row_max = std::max(row_max, logit);
        }
        double denom = 0.0;
        for (Index e = begin; e < end; ++e) {
            weights[e] = std::exp(weights[e] - row_max);
            denom += weights[e];
        }
        for (Index e = begin; e < end; ++e) weights[e] /= denom;
    }
    return EdgeAttention(graph, std::move(weights));
}

namespace {

double default_scale(const MatrixView& q) {
    return std::sqrt(static_cast<double>(q.cols()));
}

void head_forward_cached(const MatrixView& x, const HeadParams& head,
                         const AttentionGraph& graph, const DiffusionConfig& cfg,
                         HeadCache& cache) {
    Qkv qkv = project_qkv(x, head);
    EdgeAttention scores =
        sparse_attention_scores(qkv.q, qkv.k, graph, default_scale(qkv.q));
    cache.z.clear();
    cache.z.push_back(qkv.v);
    for (int k = 0; k < cfg.steps; ++k)
        cache.z.push_back((1.0 - cfg.alpha) * sparse_row_matvec(scores, cache.z.back()) +
                          cfg.alpha * qkv.v);
    cache.q = std::move(qkv.q);
    cache.k = std::move(qkv.k);
    cache.v = std::move(qkv.v);
    cache.scores = scores.weights();
}

} // namespace

Matrix head_forward(const MatrixView& x, const HeadParams& head,
                    const AttentionGraph& graph, const DiffusionConfig& cfg) {
    validate(cfg);
    HeadCache cache;
    head_forward_cached(x, head, graph, cfg, cache);
    return cache.z.back();
}

Matrix layer_forward(const MatrixView& x, const LayerParams& params,
                     const AttentionGraph& graph, const DiffusionConfig& cfg,
                     LayerCache& cache) {
    params.validate();
    validate(cfg);
    if (x.rows() != graph.n())
        throw std::invalid_argument("layer_forward: X rows must equal graph n");
    if (x.cols() != params.embed_dim())
        throw std::invalid_argument("layer_forward: X width must equal embed dim");
    const Index h = params.head_count();
    const Index m = params.head_dim();
    cache.heads.assign(static_cast<std::size_t>(h), HeadCache{});
    cache.concat.resize(x.rows(), h * m);
    for (Index i = 0; i < h; ++i) {
        head_forward_cached(x, params.heads[static_cast<std::size_t>(i)], graph, cfg,
                            cache.heads[static_cast<std::size_t>(i)]);
        cache.concat.middleCols(i * m, m) = cache.heads[static_cast<std::size_t>(i)].z.back();
    }
    cache.u = x + cache.concat * params.w_o;
    cache.pre_act = cache.u * params.w_ff1;
    cache.output = cache.u + cache.pre_act.cwiseMax(0.0) * params.w_ff2;
    return cache.output;
}

Matrix layer_forward(const MatrixView& x, const LayerParams& params,
                     const AttentionGraph& graph, const DiffusionConfig& cfg) {
    LayerCache cache;
    return layer_forward(x, params, graph, cfg, cache);
}

Matrix dense_reference_forward(
    const MatrixView& x, const LayerParams& params,
    const Eigen::Ref<const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>>& mask,
    const DiffusionConfig& cfg, ReferencePropagation propagation) {
    params.validate();
    validate(cfg);
    const Index n = x.rows();
    if (n > 512)
        throw std::invalid_argument("dense_reference_forward: oracle capped at n = 512");
    if (mask.rows() != n || mask.cols() != n)
        throw std::invalid_argument("dense_reference_forward: mask shape mismatch");
    const Index h = params.head_count();
    const Index m = params.head_dim();
    Matrix concat(n, h * m);
    for (Index hi = 0; hi < h; ++hi) {
        const Qkv qkv = project_qkv(x, params.heads[static_cast<std::size_t>(hi)]);
        const double scale = std::sqrt(static_cast<double>(qkv.q.cols()));
        // Masked row softmax with max-subtraction over admitted entries.
        Matrix attn = Matrix::Zero(n, n);
        for (Index i = 0; i < n; ++i) {
            double row_max = -std::numeric_limits<double>::infinity();
            for (Index j = 0; j < n; ++j) {
                if (!mask(i, j)) continue;
                attn(i, j) = qkv.q.row(i).dot(qkv.k.row(j)) / scale;
                row_max = std::max(row_max, attn(i, j));
            }
            if (row_max == -std::numeric_limits<double>::infinity())
                throw std::invalid_argument("dense_reference_forward: empty mask row " +
                                            std::to_string(i));
            double denom = 0.0;
            for (Index j = 0; j < n; ++j) {
                if (!mask(i, j)) continue;
                attn(i, j) = std::exp(attn(i, j) - row_max);
                denom += attn(i, j);
            }
            for (Index j = 0; j < n; ++j)
                if (mask(i, j)) attn(i, j) /= denom;
        }
        Matrix out;
        if (propagation == ReferencePropagation::ExactResolvent) {
            out = exact_diffusion_operator(attn, cfg.alpha) * qkv.v;
        } else {
            out = qkv.v;
            for (int k = 0; k < cfg.steps; ++k)
                out = (1.0 - cfg.alpha) * (attn * out) + cfg.alpha * qkv.v;
        }
        concat.middleCols(hi * m, m) = out;
    }
    const Matrix u = x + concat * params.w_o;
    return u + (u * params.w_ff1).cwiseMax(0.0) * params.w_ff2;
}

LayerGradients layer_backward(const MatrixView& x, const LayerParams& params,
                              const AttentionGraph& graph, const DiffusionConfig& cfg,
                              const MatrixView& upstream, const LayerCache& cache) {
    params.validate();
    validate(cfg);
    if (cache.heads.size() != static_cast<std::size_t>(params.head_count()))
        throw std::invalid_argument("layer_backward: cache does not match params");
    const Index n = x.rows();
    const Index h = params.head_count();
    const Index m = params.head_dim();

    LayerGradients grads;
    grads.x = Matrix::Zero(n, params.embed_dim());
    grads.heads.resize(static_cast<std::size_t>(h));

    // Feed-forward and residual tail.
    const Matrix relu_mask =
        (cache.pre_act.array() > 0.0).cast<double>().matrix();
    const Matrix f = cache.pre_act.cwiseMax(0.0);
    grads.w_ff2 = f.transpose() * upstream;
    const Matrix d_pre = (upstream * params.w_ff2.transpose()).cwiseProduct(relu_mask);
    grads.w_ff1 = cache.u.transpose() * d_pre;
    const Matrix d_u = upstream + d_pre * params.w_ff1.transpose();

    grads.w_o = cache.concat.transpose() * d_u;
    const Matrix d_concat = d_u * params.w_o.transpose();
    grads.x += d_u; // residual branch

    for (Index hi = 0; hi < h; ++hi) {
        const HeadCache& hc = cache.heads[static_cast<std::size_t>(hi)];
        const HeadParams& hp = params.heads[static_cast<std::size_t>(hi)];
        const double scale = std::sqrt(static_cast<double>(hc.q.cols()));
        const int steps = static_cast<int>(hc.z.size()) - 1;

        Matrix d_z = d_concat.middleCols(hi * m, m); // dL/dZ_K
        Matrix d_v = Matrix::Zero(n, m);
        Vector d_scores = Vector::Zero(graph.nnz());

        // Unroll Z_{k+1} = (1-alpha) A Z_k + alpha V backwards.
        for (int k = steps - 1; k >= 0; --k) {
            const Matrix& z_k = hc.z[static_cast<std::size_t>(k)];
            d_v += cfg.alpha * d_z;
            Matrix d_z_prev = Matrix::Zero(n, m);
            for (Index i = 0; i < n; ++i) {
                for (Index e = graph.row_offsets()[i]; e < graph.row_offsets()[i + 1]; ++e) {
                    const Index j = graph.col_indices()[e];
                    d_scores[e] += (1.0 - cfg.alpha) * d_z.row(i).dot(z_k.row(j));
                    d_z_prev.row(j) += (1.0 - cfg.alpha) * hc.scores[e] * d_z.row(i);
                }
            }
            d_z = std::move(d_z_prev);
        }
        d_v += d_z; // Z_0 = V

        // Softmax rows: ds = a .* (dA - sum_j a_j dA_j).
        Matrix d_q = Matrix::Zero(n, m);
        Matrix d_k = Matrix::Zero(n, m);
        for (Index i = 0; i < n; ++i) {
            const Index begin = graph.row_offsets()[i];
            const Index end = graph.row_offsets()[i + 1];
            double dot = 0.0;
            for (Index e = begin; e < end; ++e) dot += hc.scores[e] * d_scores[e];
            for (Index e = begin; e < end; ++e) {
                const double d_logit = hc.scores[e] * (d_scores[e] - dot);
                const Index j = graph.col_indices()[e];
                d_q.row(i) += d_logit / scale * hc.k.row(j);
                d_k.row(j) += d_logit / scale * hc.q.row(i);
            }
        }

        HeadParams& hg = grads.heads[static_cast<std::size_t>(hi)];
        hg.w_q = x.transpose() * d_q;
        hg.w_k = x.transpose() * d_k;
        hg.w_v = x.transpose() * d_v;
        grads.x += d_q * hp.w_q.transpose() + d_k * hp.w_k.transpose() +
                   d_v * hp.w_v.transpose();
    }
    return grads;
}

namespace {

double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

} // namespace

double grad_check(const MatrixView& x, const LayerParams& params,
                  const AttentionGraph& graph, const DiffusionConfig& cfg,
                  double eps) {
    if (x.rows() > 64)
        throw std::invalid_argument("grad_check: capped at n = 64");
    if (!(eps > 0.0)) throw std::invalid_argument("grad_check: eps must be positive");

    LayerCache cache;
    layer_forward(x, params, graph, cfg, cache);
    const Matrix ones = Matrix::Ones(cache.output.rows(), cache.output.cols());
    const LayerGradients analytic = layer_backward(x, params, graph, cfg, ones, cache);

    Matrix x_mut = x;
    LayerParams p_mut = params;
    const auto loss = [&]() { return layer_forward(x_mut, p_mut, graph, cfg).sum(); };

    double worst = 0.0;
    const auto probe = [&](Matrix& target, const Matrix& grad) {
        for (Index i = 0; i < target.rows(); ++i) {
            for (Index j = 0; j < target.cols(); ++j) {
                const double saved = target(i, j);
                target(i, j) = saved + eps;
                const double up = loss();
                target(i, j) = saved - eps;
                const double down = loss();
                target(i, j) = saved;
                const double numeric = (up - down) / (2.0 * eps);
                worst = std::max(worst, relative_error(grad(i, j), numeric));
            }
        }
    };

    probe(x_mut, analytic.x);
    for (Index hi = 0; hi < params.head_count(); ++hi) {
        probe(p_mut.heads[static_cast<std::size_t>(hi)].w_q,
              analytic.heads[static_cast<std::size_t>(hi)].w_q);
        probe(p_mut.heads[static_cast<std::size_t>(hi)].w_k,
              analytic.heads[static_cast<std::size_t>(hi)].w_k);
        probe(p_mut.heads[static_cast<std::size_t>(hi)].w_v,
              analytic.heads[static_cast<std::size_t>(hi)].w_v);
    }
    probe(p_mut.w_o, analytic.w_o);
    probe(p_mut.w_ff1, analytic.w_ff1);
    probe(p_mut.w_ff2, analytic.w_ff2);
    return worst;
}

// --- Checkpoint I/O ---------------------------------------------------------

namespace {

void write_matrix(std::ostream& os, const Matrix& m) {
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            const double v = m(i, j);
            char buf[8];
            std::memcpy(buf, &v, 8);
            os.write(buf, 8);
        }
    }
}

Matrix read_matrix(std::istream& is, Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        for (Index j = 0; j < cols; ++j) {
            char buf[8];
            is.read(buf, 8);
            if (!is) throw std::runtime_error("checkpoint: truncated blob");
            double v;
            std::memcpy(&v, buf, 8);
            m(i, j) = v;
        }
    }
    return m;
}

} // namespace

void save_layer_params(const LayerParams& params, std::uint64_t seed,
                       const std::string& path) {
    params.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    nlohmann::json manifest{{"h", params.head_count()},
                            {"m", params.head_dim()},
                            {"d", params.embed_dim()},
                            {"r_ff", params.ffn_dim()},
                            {"seed", seed}};
    os << manifest.dump() << '\n';
    for (const HeadParams& head : params.heads) {
        write_matrix(os, head.w_q);
        write_matrix(os, head.w_k);
        write_matrix(os, head.w_v);
    }
    write_matrix(os, params.w_o);
    write_matrix(os, params.w_ff1);
    write_matrix(os, params.w_ff2);
    if (!os) throw std::runtime_error("write failed: " + path);
}

LayerParams load_layer_params(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("checkpoint: missing manifest");
    const nlohmann::json manifest = nlohmann::json::parse(line);
    const Index h = manifest.at("h").get<Index>();
    const Index m = manifest.at("m").get<Index>();
    const Index d = manifest.at("d").get<Index>();
    const Index r_ff = manifest.at("r_ff").get<Index>();
    LayerParams p;
    for (Index i = 0; i < h; ++i) {
        HeadParams head;
        head.w_q = read_matrix(is, d, m);
        head.w_k = read_matrix(is, d, m);
        head.w_v = read_matrix(is, d, m);
        p.heads.push_back(std::move(head));
    }
    p.w_o = read_matrix(is, h * m, d);
    p.w_ff1 = read_matrix(is, d, r_ff);
    p.w_ff2 = read_matrix(is, r_ff, d);
    p.validate();
    return p;
}

} // namespace attndiff

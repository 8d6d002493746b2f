#include "fgcl/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "fgcl/binio.hpp"
#include "fgcl/rng.hpp"

namespace fgcl {

EncoderParams init_encoder(const std::vector<uint32_t>& dims, uint32_t edge_dim, uint64_t seed) {
    if (dims.size() < 2) throw DimensionMismatchError("encoder needs at least one layer");
    EncoderParams p;
    p.edge_dim = edge_dim;
    Rng rng(seed);
    auto glorot = [&rng](Matrix& m) {
        const double limit = std::sqrt(6.0 / static_cast<double>(m.rows + m.cols));
        for (double& x : m.data) x = rng.uniform(-limit, limit);
    };
    for (std::size_t l = 1; l < dims.size(); ++l) {
        EncoderLayer layer;
        layer.w_self = Matrix(dims[l], dims[l - 1]);
        layer.w_nbr = Matrix(dims[l], dims[l - 1]);
        layer.w_edge = Matrix(dims[l], edge_dim);
        layer.bias = Vec(dims[l], 0.0);
        glorot(layer.w_self);
        glorot(layer.w_nbr);
        glorot(layer.w_edge);
        p.layers.push_back(std::move(layer));
    }
    return p;
}

namespace {

struct Adjacency {
    // Per node: incident edge indices (both directions) and the neighbor on
    // the other end. deg = incident edge count.
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> inc;  // (edge idx, neighbor)

    explicit Adjacency(const MathGraph& g) : inc(g.nodes.size()) {
        for (std::size_t j = 0; j < g.edges.size(); ++j) {
            inc[g.edges[j].src].emplace_back(j, g.edges[j].dst);
            inc[g.edges[j].dst].emplace_back(j, g.edges[j].src);
        }
    }
};

struct ForwardCache {
    std::vector<Matrix> h;         // h[0] = inputs, h[l] = post-ReLU states
    std::vector<Matrix> nbr_mean;  // per layer: V x d_{l-1}
    Matrix edge_mean;              // V x d_e (constant across layers)
    Vec readout;                   // pre-normalization mean of h[L]
    Vec z;                         // normalized embedding
    double norm = 0.0;
};

constexpr double kNormFloor = 1e-12;

void check_dims(const EncoderParams& p, const FeaturedGraph& fg) {
    if (fg.node_features.cols != p.input_dim())
        throw DimensionMismatchError("node feature dim " +
                                     std::to_string(fg.node_features.cols) + " != encoder input " +
                                     std::to_string(p.input_dim()));
    if (fg.edge_features.cols != p.edge_dim)
        throw DimensionMismatchError("edge feature dim " +
                                     std::to_string(fg.edge_features.cols) + " != encoder edge dim " +
                                     std::to_string(p.edge_dim));
}

ForwardCache forward(const EncoderParams& p, const FeaturedGraph& fg, const Adjacency& adj) {
    check_dims(p, fg);
    const std::size_t nv = fg.graph.nodes.size();
    const std::size_t de = p.edge_dim;
    ForwardCache c;
    c.h.resize(p.layers.size() + 1);
    c.nbr_mean.resize(p.layers.size());
    c.h[0] = fg.node_features;

    c.edge_mean = Matrix(nv, de);
    for (std::size_t v = 0; v < nv; ++v) {
        const auto& inc = adj.inc[v];
        if (inc.empty()) continue;
        double* row = c.edge_mean.row(v);
        for (const auto& [ei, u] : inc) {
            const double* er = fg.edge_features.row(ei);
            for (std::size_t k = 0; k < de; ++k) row[k] += er[k];
        }
        const double inv = 1.0 / static_cast<double>(inc.size());
        for (std::size_t k = 0; k < de; ++k) row[k] *= inv;
    }

    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        const EncoderLayer& layer = p.layers[l];
        const std::size_t din = layer.w_self.cols;
        const std::size_t dout = layer.w_self.rows;
        Matrix& prev = c.h[l];

        Matrix& nbr = c.nbr_mean[l];
        nbr = Matrix(nv, din);
        for (std::size_t v = 0; v < nv; ++v) {
            const auto& inc = adj.inc[v];
            if (inc.empty()) continue;
            double* row = nbr.row(v);
            for (const auto& [ei, u] : inc) {
                const double* hr = prev.row(u);
                for (std::size_t k = 0; k < din; ++k) row[k] += hr[k];
            }
            const double inv = 1.0 / static_cast<double>(inc.size());
            for (std::size_t k = 0; k < din; ++k) row[k] *= inv;
        }

        Matrix& next = c.h[l + 1];
        next = Matrix(nv, dout);
        for (std::size_t v = 0; v < nv; ++v) {
            double* out = next.row(v);
            std::copy(layer.bias.begin(), layer.bias.end(), out);
            matvec_add(layer.w_self, prev.row(v), out);
            if (!adj.inc[v].empty()) {
                matvec_add(layer.w_nbr, nbr.row(v), out);
                matvec_add(layer.w_edge, c.edge_mean.row(v), out);
            }
            for (std::size_t k = 0; k < dout; ++k)
                if (out[k] < 0.0) out[k] = 0.0;
        }
    }

    const std::size_t dl = p.output_dim();
    c.readout.assign(dl, 0.0);
    const Matrix& last = c.h.back();
    for (std::size_t v = 0; v < nv; ++v) {
        const double* row = last.row(v);
        for (std::size_t k = 0; k < dl; ++k) c.readout[k] += row[k];
    }
    if (nv > 0)
        for (double& x : c.readout) x /= static_cast<double>(nv);

    c.norm = l2_norm(c.readout.data(), dl);
    c.z.assign(dl, 0.0);
    if (c.norm > kNormFloor) {
        for (std::size_t k = 0; k < dl; ++k) c.z[k] = c.readout[k] / c.norm;
    } else {
        c.z[0] = 1.0;  // degenerate readout: fixed unit vector, zero gradient
    }
    return c;
}

// Backward through one graph given dL/dz; accumulates parameter gradients.
void backward(const EncoderParams& p, const FeaturedGraph& fg, const Adjacency& adj,
              const ForwardCache& c, const Vec& dz, EncoderGrads& grads) {
    const std::size_t nv = fg.graph.nodes.size();
    const std::size_t dl = p.output_dim();
    if (nv == 0 || c.norm <= kNormFloor) return;

    // z = r/|r|  =>  dr = (dz - (dz.z) z)/|r|
    Vec dr(dl);
    const double zdot = dot(dz.data(), c.z.data(), dl);
    for (std::size_t k = 0; k < dl; ++k) dr[k] = (dz[k] - zdot * c.z[k]) / c.norm;

    Matrix dh(nv, dl);
    const double inv_nv = 1.0 / static_cast<double>(nv);
    for (std::size_t v = 0; v < nv; ++v) {
        double* row = dh.row(v);
        for (std::size_t k = 0; k < dl; ++k) row[k] = dr[k] * inv_nv;
    }

    Vec da;
    for (std::size_t li = p.layers.size(); li-- > 0;) {
        const EncoderLayer& layer = p.layers[li];
        EncoderLayer& g = grads[li];
        const std::size_t din = layer.w_self.cols;
        const std::size_t dout = layer.w_self.rows;
        const Matrix& prev = c.h[li];
        const Matrix& act = c.h[li + 1];
        Matrix dprev(nv, din);
        Matrix q(nv, din);  // W_nbr^T da / deg, scattered to neighbors

        for (std::size_t v = 0; v < nv; ++v) {
            da.assign(dout, 0.0);
            const double* dhrow = dh.row(v);
            const double* arow = act.row(v);
            bool any = false;
            for (std::size_t k = 0; k < dout; ++k) {
                if (arow[k] > 0.0) {
                    da[k] = dhrow[k];
                    any = any || da[k] != 0.0;
                }
            }
            if (!any) continue;

            outer_add(g.w_self, 1.0, da.data(), prev.row(v));
            for (std::size_t k = 0; k < dout; ++k) g.bias[k] += da[k];
            matvec_t_add(layer.w_self, da.data(), dprev.row(v));

            const auto& inc = adj.inc[v];
            if (!inc.empty()) {
                outer_add(g.w_nbr, 1.0, da.data(), c.nbr_mean[li].row(v));
                outer_add(g.w_edge, 1.0, da.data(), c.edge_mean.row(v));
                const double inv_deg = 1.0 / static_cast<double>(inc.size());
                double* qrow = q.row(v);
                matvec_t_add(layer.w_nbr, da.data(), qrow);
                for (std::size_t k = 0; k < din; ++k) qrow[k] *= inv_deg;
            }
        }

        // Scatter the neighbor-mean term: each incident edge sends q[v] to u.
        for (std::size_t v = 0; v < nv; ++v) {
            const double* qrow = q.row(v);
            bool nonzero = false;
            for (std::size_t k = 0; k < din; ++k)
                if (qrow[k] != 0.0) {
                    nonzero = true;
                    break;
                }
            if (!nonzero) continue;
            for (const auto& [ei, u] : adj.inc[v]) {
                double* drow = dprev.row(u);
                for (std::size_t k = 0; k < din; ++k) drow[k] += qrow[k];
            }
        }
        dh = std::move(dprev);
    }
}

}  // namespace

Vec encode(const EncoderParams& params, const FeaturedGraph& fg) {
    Adjacency adj(fg.graph);
    return forward(params, fg, adj).z;
}

Vec baseline_embed(const FeaturedGraph& fg) {
    const std::size_t d = fg.node_features.cols;
    Vec v(d, 0.0);
    const std::size_t nv = fg.graph.nodes.size();
    for (std::size_t i = 0; i < nv; ++i) {
        const double* row = fg.node_features.row(i);
        for (std::size_t k = 0; k < d; ++k) v[k] += row[k];
    }
    if (nv > 0)
        for (double& x : v) x /= static_cast<double>(nv);
    const double norm = l2_norm(v.data(), d);
    if (norm > kNormFloor) {
        for (double& x : v) x /= norm;
    } else {
        std::fill(v.begin(), v.end(), 0.0);
        v[0] = 1.0;
    }
    return v;
}

namespace {

// Per-anchor softmax gradients for NT-Xent. Returns loss; fills dL/dz rows.
double ntxent_core(const std::vector<const Vec*>& z, double tau, std::vector<Vec>* dz) {
    const std::size_t m = z.size();  // 2N
    const std::size_t n = m / 2;
    const std::size_t d = z[0]->size();
    if (dz) dz->assign(m, Vec(d, 0.0));

    // s[i][j] = z_i . z_j / tau
    std::vector<Vec> s(m, Vec(m, 0.0));
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) {
            const double v = dot(z[i]->data(), z[j]->data(), d) / tau;
            s[i][j] = v;
            s[j][i] = v;
        }

    double loss = 0.0;
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t pos = i < n ? i + n : i - n;
        double mx = -1e300;
        for (std::size_t j = 0; j < m; ++j)
            if (j != i) mx = std::max(mx, s[i][j]);
        double zsum = 0.0;
        for (std::size_t j = 0; j < m; ++j)
            if (j != i) zsum += std::exp(s[i][j] - mx);
        loss += -(s[i][pos] - mx) + std::log(zsum);

        if (dz) {
            for (std::size_t j = 0; j < m; ++j) {
                if (j == i) continue;
                const double softmax = std::exp(s[i][j] - mx) / zsum;
                const double gs = inv_m * (softmax - (j == pos ? 1.0 : 0.0)) / tau;
                if (gs == 0.0) continue;
                for (std::size_t k = 0; k < d; ++k) {
                    (*dz)[i][k] += gs * (*z[j])[k];
                    (*dz)[j][k] += gs * (*z[i])[k];
                }
            }
        }
    }
    return loss * inv_m;
}

std::vector<const Vec*> gather(const std::vector<Vec>& a, const std::vector<Vec>& b) {
    std::vector<const Vec*> z;
    z.reserve(a.size() + b.size());
    for (const Vec& v : a) z.push_back(&v);
    for (const Vec& v : b) z.push_back(&v);
    return z;
}

}  // namespace

double ntxent_loss(const std::vector<Vec>& view_a, const std::vector<Vec>& view_b, double tau) {
    if (view_a.size() != view_b.size())
        throw DimensionMismatchError("views of different batch size");
    if (view_a.size() < 2) throw BatchTooSmallError("NT-Xent needs batch size >= 2");
    if (tau <= 0.0) throw Error("temperature must be positive");
    return ntxent_core(gather(view_a, view_b), tau, nullptr);
}

EncoderGrads zero_grads(const EncoderParams& params) {
    EncoderGrads g;
    for (const EncoderLayer& l : params.layers) {
        EncoderLayer z;
        z.w_self = Matrix(l.w_self.rows, l.w_self.cols);
        z.w_nbr = Matrix(l.w_nbr.rows, l.w_nbr.cols);
        z.w_edge = Matrix(l.w_edge.rows, l.w_edge.cols);
        z.bias = Vec(l.bias.size(), 0.0);
        g.push_back(std::move(z));
    }
    return g;
}

double loss_gradients(const EncoderParams& params, const std::vector<FeaturedGraph>& batch_a,
                      const std::vector<FeaturedGraph>& batch_b, double tau, EncoderGrads& grads) {
    if (batch_a.size() != batch_b.size())
        throw DimensionMismatchError("views of different batch size");
    if (batch_a.size() < 2) throw BatchTooSmallError("NT-Xent needs batch size >= 2");
    const std::size_t n = batch_a.size();

    std::vector<Adjacency> adj;
    std::vector<ForwardCache> caches;
    adj.reserve(2 * n);
    caches.reserve(2 * n);
    std::vector<Vec> zs(2 * n);
    for (std::size_t i = 0; i < 2 * n; ++i) {
        const FeaturedGraph& fg = i < n ? batch_a[i] : batch_b[i - n];
        adj.emplace_back(fg.graph);
        caches.push_back(forward(params, fg, adj.back()));
        zs[i] = caches.back().z;
    }

    std::vector<const Vec*> zp;
    zp.reserve(2 * n);
    for (const Vec& v : zs) zp.push_back(&v);
    std::vector<Vec> dz;
    const double loss = ntxent_core(zp, tau, &dz);

    for (std::size_t i = 0; i < 2 * n; ++i) {
        const FeaturedGraph& fg = i < n ? batch_a[i] : batch_b[i - n];
        backward(params, fg, adj[i], caches[i], dz[i], grads);
    }
    return loss;
}

TrainResult train_gcl(const std::vector<MathGraph>& graphs, const LabelFeatures& feats,
                      const TrainConfig& cfg, uint32_t edge_dim) {
    const std::size_t n = cfg.batch_size;
    if (n < 2) throw BatchTooSmallError("batch size must be >= 2");
    if (graphs.size() < n)
        throw CorpusTooSmallError("corpus of " + std::to_string(graphs.size()) +
                                  " is smaller than one batch of " + std::to_string(n));

    std::vector<uint32_t> dims;
    dims.push_back(feats.dim());
    for (uint32_t d : cfg.hidden_dims) dims.push_back(d);

    TrainResult result;
    result.params = init_encoder(dims, edge_dim, cfg.seed);

    std::vector<FeaturedGraph> featured;
    featured.reserve(graphs.size());
    for (const MathGraph& g : graphs) featured.push_back(featurize_cached(g, feats, edge_dim));

    std::vector<std::size_t> order(graphs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<FeaturedGraph> batch_a(n), batch_b(n);
    for (uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng shuffle_rng(Rng::mix(cfg.seed, 0xe0 + epoch));
        shuffle_rng.shuffle(order);
        const uint64_t epoch_salt = Rng::mix(cfg.seed, 0xa0 + epoch);

        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start + n <= order.size(); start += n) {
            for (std::size_t j = 0; j < n; ++j) {
                const std::size_t gi = order[start + j];
                batch_a[j] = featured[gi];
                Rng aug_rng(epoch_salt ^ static_cast<uint64_t>(gi));
                batch_b[j] = augment(featured[gi], cfg.augment, feats, aug_rng);
            }
            EncoderGrads grads = zero_grads(result.params);
            loss_sum += loss_gradients(result.params, batch_a, batch_b, cfg.temperature, grads);
            ++batches;
            for (std::size_t l = 0; l < result.params.layers.size(); ++l) {
                EncoderLayer& layer = result.params.layers[l];
                const EncoderLayer& g = grads[l];
                for (std::size_t k = 0; k < layer.w_self.data.size(); ++k)
                    layer.w_self.data[k] -= cfg.lr * g.w_self.data[k];
                for (std::size_t k = 0; k < layer.w_nbr.data.size(); ++k)
                    layer.w_nbr.data[k] -= cfg.lr * g.w_nbr.data[k];
                for (std::size_t k = 0; k < layer.w_edge.data.size(); ++k)
                    layer.w_edge.data[k] -= cfg.lr * g.w_edge.data[k];
                for (std::size_t k = 0; k < layer.bias.size(); ++k)
                    layer.bias[k] -= cfg.lr * g.bias[k];
            }
        }
        result.epoch_loss.push_back(batches ? loss_sum / static_cast<double>(batches) : 0.0);
    }
    return result;
}

TrainResult train_gcl(const std::vector<MathGraph>& graphs, const EmbeddingTable& table,
                      const TrainConfig& cfg, uint32_t edge_dim) {
    LabelFeatures feats;
    std::vector<std::string> labels;
    for (const MathGraph& g : graphs) {
        std::vector<std::string> ls = graph_labels(g);
        labels.insert(labels.end(), ls.begin(), ls.end());
    }
    for (const std::string& v : cfg.augment.var_pool) labels.push_back("V!" + v);
    for (const std::string& num : cfg.augment.num_pool) labels.push_back("N!" + num);
    feats.warm(table, labels);
    return train_gcl(graphs, feats, cfg, edge_dim);
}

namespace {

constexpr char kCkptMagic[4] = {'F', 'G', 'C', 'L'};
constexpr uint32_t kCkptVersion = 1;

void serialize_params_f32(ByteWriter& w, const EncoderParams& p) {
    w.u32(static_cast<uint32_t>(p.layers.size()));
    w.u32(static_cast<uint32_t>(p.input_dim()));
    for (const EncoderLayer& l : p.layers) w.u32(static_cast<uint32_t>(l.w_self.rows));
    w.u32(p.edge_dim);
    for (const EncoderLayer& l : p.layers) {
        for (double x : l.w_self.data) w.f32(static_cast<float>(x));
        for (double x : l.w_nbr.data) w.f32(static_cast<float>(x));
        for (double x : l.w_edge.data) w.f32(static_cast<float>(x));
        for (double x : l.bias) w.f32(static_cast<float>(x));
    }
}

}  // namespace

std::string checkpoint_id(const EncoderParams& params) {
    ByteWriter w;
    serialize_params_f32(w, params);
    const uint32_t crc = crc32(w.bytes().data(), w.bytes().size());
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", crc);
    return std::string(buf);
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    ByteWriter w;
    w.raw(kCkptMagic, 4);
    w.u32(kCkptVersion);
    // Config echo.
    w.u32(ckpt.config.batch_size);
    w.f64(ckpt.config.temperature);
    w.u32(ckpt.config.epochs);
    w.f64(ckpt.config.lr);
    w.u64(ckpt.config.seed);
    w.u8(static_cast<uint8_t>(ckpt.config.augment.strategy));
    w.f64(ckpt.config.augment.ratio);
    w.u8(static_cast<uint8_t>(ckpt.config.augment.mode));
    w.u32(static_cast<uint32_t>(ckpt.config.augment.var_pool.size()));
    for (const std::string& s : ckpt.config.augment.var_pool) w.str(s);
    w.u32(static_cast<uint32_t>(ckpt.config.augment.num_pool.size()));
    for (const std::string& s : ckpt.config.augment.num_pool) w.str(s);
    // Loss history.
    w.u32(static_cast<uint32_t>(ckpt.loss_history.size()));
    for (double x : ckpt.loss_history) w.f64(x);
    // Parameters.
    serialize_params_f32(w, ckpt.params);
    const uint32_t crc = crc32(w.bytes().data(), w.bytes().size());
    w.u32(crc);
    write_file_bytes(path, w.bytes());
}

Checkpoint load_checkpoint(const std::string& path) {
    const std::vector<uint8_t> bytes = read_file_bytes(path);
    if (bytes.size() < 12) throw CorruptFileError("checkpoint truncated: " + path);
    const std::size_t payload = bytes.size() - 4;
    ByteReader tail(bytes.data() + payload, 4);
    if (tail.u32() != crc32(bytes.data(), payload))
        throw CorruptFileError("checkpoint checksum mismatch: " + path);

    ByteReader r(bytes.data(), payload);
    char magic[4];
    for (char& c : magic) c = static_cast<char>(r.u8());
    if (std::string(magic, 4) != std::string(kCkptMagic, 4))
        throw CorruptFileError("not a checkpoint file: " + path);
    if (r.u32() != kCkptVersion)
        throw VersionMismatchError("unsupported checkpoint version: " + path);

    Checkpoint c;
    c.config.batch_size = r.u32();
    c.config.temperature = r.f64();
    c.config.epochs = r.u32();
    c.config.lr = r.f64();
    c.config.seed = r.u64();
    c.config.augment.strategy = static_cast<AugmentStrategy>(r.u8());
    c.config.augment.ratio = r.f64();
    c.config.augment.mode = static_cast<SubstitutionMode>(r.u8());
    c.config.augment.var_pool.clear();
    for (uint32_t i = 0, n = r.u32(); i < n; ++i) c.config.augment.var_pool.push_back(r.str());
    c.config.augment.num_pool.clear();
    for (uint32_t i = 0, n = r.u32(); i < n; ++i) c.config.augment.num_pool.push_back(r.str());
    c.loss_history.clear();
    for (uint32_t i = 0, n = r.u32(); i < n; ++i) c.loss_history.push_back(r.f64());

    const uint32_t nlayers = r.u32();
    std::vector<uint32_t> dims;
    dims.push_back(r.u32());
    for (uint32_t l = 0; l < nlayers; ++l) dims.push_back(r.u32());
    c.params.edge_dim = r.u32();
    c.config.hidden_dims.assign(dims.begin() + 1, dims.end());
    for (uint32_t l = 0; l < nlayers; ++l) {
        EncoderLayer layer;
        layer.w_self = Matrix(dims[l + 1], dims[l]);
        layer.w_nbr = Matrix(dims[l + 1], dims[l]);
        layer.w_edge = Matrix(dims[l + 1], c.params.edge_dim);
        layer.bias = Vec(dims[l + 1], 0.0);
        for (double& x : layer.w_self.data) x = r.f32();
        for (double& x : layer.w_nbr.data) x = r.f32();
        for (double& x : layer.w_edge.data) x = r.f32();
        for (double& x : layer.bias) x = r.f32();
        c.params.layers.push_back(std::move(layer));
    }
    return c;
}

}  // namespace fgcl

#include "fgcl/token_embed.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "fgcl/binio.hpp"

namespace fgcl {

std::vector<Walk> sample_walks(const MathGraph& g, uint32_t walks_per_node, uint32_t max_len,
                               Rng& rng) {
    std::vector<std::vector<std::size_t>> out_edges(g.nodes.size());
    for (std::size_t i = 0; i < g.edges.size(); ++i) out_edges[g.edges[i].src].push_back(i);

    std::vector<Walk> walks;
    walks.reserve(g.nodes.size() * walks_per_node);
    for (std::size_t start = 0; start < g.nodes.size(); ++start) {
        for (uint32_t w = 0; w < walks_per_node; ++w) {
            Walk walk;
            std::size_t cur = start;
            walk.push_back(g.nodes[cur].label);
            for (uint32_t visits = 1; visits < max_len; ++visits) {
                const auto& outs = out_edges[cur];
                if (outs.empty()) break;
                const std::size_t ei = outs[rng.below(outs.size())];
                walk.push_back(g.edges[ei].label);
                cur = g.edges[ei].dst;
                walk.push_back(g.nodes[cur].label);
            }
            walks.push_back(std::move(walk));
        }
    }
    return walks;
}

Vocabulary build_vocab(const std::vector<Walk>& walks, uint64_t min_count) {
    std::map<std::string, uint64_t> counts;
    for (const Walk& w : walks)
        for (const std::string& t : w) ++counts[t];

    std::vector<std::pair<std::string, uint64_t>> kept;
    for (const auto& [tok, c] : counts)
        if (c >= min_count) kept.emplace_back(tok, c);
    if (kept.empty()) throw EmptyVocabularyError("no token meets min_count");

    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocabulary v;
    for (const auto& [tok, c] : kept) {
        v.index[tok] = static_cast<uint32_t>(v.tokens.size());
        v.tokens.push_back(tok);
        v.counts.push_back(c);
        v.total += c;
    }
    return v;
}

Vec unigram_distribution(const Vocabulary& vocab, double power) {
    if (vocab.size() == 0) throw EmptyVocabularyError("empty vocabulary");
    Vec p(vocab.size());
    double z = 0.0;
    for (std::size_t i = 0; i < vocab.size(); ++i) {
        p[i] = std::pow(static_cast<double>(vocab.counts[i]), power);
        z += p[i];
    }
    for (double& x : p) x /= z;
    return p;
}

std::vector<uint32_t> subword_buckets(const std::string& token, uint32_t n_min, uint32_t n_max,
                                      uint32_t buckets) {
    std::vector<uint32_t> ids;
    if (token.size() < n_min || buckets == 0) return ids;
    const std::string padded = "<" + token + ">";
    for (uint32_t n = n_min; n <= n_max && n <= padded.size(); ++n) {
        for (std::size_t i = 0; i + n <= padded.size(); ++i) {
            uint64_t h = 14695981039346656037ULL;
            for (std::size_t j = 0; j < n; ++j) {
                h ^= static_cast<unsigned char>(padded[i + j]);
                h *= 1099511628211ULL;
            }
            ids.push_back(static_cast<uint32_t>(h % buckets));
        }
    }
    return ids;
}

EmbeddingTable init_table(const Vocabulary& vocab, const EmbedConfig& cfg, uint64_t seed) {
    EmbeddingTable t;
    t.dim = cfg.dim;
    t.ngram_min = cfg.ngram_min;
    t.ngram_max = cfg.ngram_max;
    t.buckets = cfg.buckets;
    t.vocab = vocab;
    t.input = Matrix(vocab.size(), cfg.dim);
    t.output = Matrix(vocab.size(), cfg.dim);
    t.bucket_vecs = Matrix(cfg.buckets, cfg.dim);
    Rng rng(seed);
    const double half = 0.5 / static_cast<double>(cfg.dim);
    for (double& x : t.input.data) x = rng.uniform(-half, half);
    for (double& x : t.bucket_vecs.data) x = rng.uniform(-half, half);
    return t;
}

namespace {

double log_sigmoid(double x) {
    // -log(1 + exp(-x)) evaluated stably for both signs
    if (x >= 0.0) return -std::log1p(std::exp(-x));
    return x - std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

double skipgram_pair_loss(const Vec& v_in, const Vec& u_ctx, const std::vector<Vec>& u_negs) {
    double loss = -log_sigmoid(dot(u_ctx.data(), v_in.data(), v_in.size()));
    for (const Vec& u : u_negs) loss -= log_sigmoid(-dot(u.data(), v_in.data(), v_in.size()));
    return loss;
}

double skipgram_pair_grads(const Vec& v_in, const Vec& u_ctx, const std::vector<Vec>& u_negs,
                           Vec& g_in, Vec& g_ctx, std::vector<Vec>& g_negs) {
    const std::size_t d = v_in.size();
    g_in.assign(d, 0.0);
    g_ctx.assign(d, 0.0);
    g_negs.assign(u_negs.size(), Vec(d, 0.0));

    double loss = 0.0;
    {
        const double s = dot(u_ctx.data(), v_in.data(), d);
        loss -= log_sigmoid(s);
        const double coef = sigmoid(s) - 1.0;  // d(-log sigma(s))/ds
        for (std::size_t i = 0; i < d; ++i) {
            g_in[i] += coef * u_ctx[i];
            g_ctx[i] += coef * v_in[i];
        }
    }
    for (std::size_t k = 0; k < u_negs.size(); ++k) {
        const double s = dot(u_negs[k].data(), v_in.data(), d);
        loss -= log_sigmoid(-s);
        const double coef = sigmoid(s);  // d(-log sigma(-s))/ds
        for (std::size_t i = 0; i < d; ++i) {
            g_in[i] += coef * u_negs[k][i];
            g_negs[k][i] += coef * v_in[i];
        }
    }
    return loss;
}

EmbeddingTable train_token_embeddings(const std::vector<Walk>& walks, const Vocabulary& vocab,
                                      const EmbedConfig& cfg, uint64_t seed,
                                      std::vector<double>* epoch_loss) {
    EmbeddingTable table = init_table(vocab, cfg, seed);
    if (epoch_loss) epoch_loss->clear();
    if (cfg.epochs == 0) return table;

    // Walks as id sequences, out-of-vocabulary tokens removed.
    std::vector<std::vector<uint32_t>> seqs;
    seqs.reserve(walks.size());
    for (const Walk& w : walks) {
        std::vector<uint32_t> s;
        for (const std::string& t : w)
            if (auto id = vocab.id_of(t)) s.push_back(*id);
        if (!s.empty()) seqs.push_back(std::move(s));
    }

    // Precomputed subword buckets per vocab id.
    std::vector<std::vector<uint32_t>> subwords(vocab.size());
    for (std::size_t i = 0; i < vocab.size(); ++i)
        subwords[i] = subword_buckets(vocab.tokens[i], cfg.ngram_min, cfg.ngram_max, cfg.buckets);

    // Cumulative negative-sampling distribution.
    const Vec probs = unigram_distribution(vocab, 0.75);
    Vec cum(probs.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        cum[i] = acc;
    }
    cum.back() = 1.0;

    uint64_t pairs_per_epoch = 0;
    const int64_t window = cfg.window;
    for (const auto& s : seqs) {
        const int64_t n = static_cast<int64_t>(s.size());
        for (int64_t i = 0; i < n; ++i) {
            const int64_t lo = std::max<int64_t>(0, i - window);
            const int64_t hi = std::min<int64_t>(n - 1, i + window);
            pairs_per_epoch += static_cast<uint64_t>(hi - lo);
        }
    }
    const double total_pairs =
        static_cast<double>(pairs_per_epoch) * static_cast<double>(cfg.epochs);

    Rng rng(Rng::mix(seed, 0x5916));
    const std::size_t d = cfg.dim;
    Vec v_in(d), g_in(d);
    uint64_t processed = 0;

    for (uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        double loss_sum = 0.0;
        uint64_t loss_n = 0;
        for (const auto& s : seqs) {
            const int64_t n = static_cast<int64_t>(s.size());
            for (int64_t i = 0; i < n; ++i) {
                const uint32_t center = s[i];
                const auto& sub = subwords[center];
                const double inv_g = sub.empty() ? 0.0 : 1.0 / static_cast<double>(sub.size());

                const int64_t lo = std::max<int64_t>(0, i - window);
                const int64_t hi = std::min<int64_t>(n - 1, i + window);
                for (int64_t j = lo; j <= hi; ++j) {
                    if (j == i) continue;
                    const uint32_t context = s[j];
                    const double lr =
                        cfg.lr * std::max(1e-4, 1.0 - static_cast<double>(processed) / total_pairs);
                    ++processed;

                    // Compose the center input vector: token row + bucket mean.
                    const double* vrow = table.input.row(center);
                    std::copy(vrow, vrow + d, v_in.begin());
                    for (uint32_t b : sub) {
                        const double* brow = table.bucket_vecs.row(b);
                        for (std::size_t k = 0; k < d; ++k) v_in[k] += inv_g * brow[k];
                    }

                    std::fill(g_in.begin(), g_in.end(), 0.0);
                    double pair_loss = 0.0;

                    auto update_output = [&](uint32_t id, bool positive) {
                        double* urow = table.output.row(id);
                        const double s_uv = dot(urow, v_in.data(), d);
                        const double coef =
                            positive ? (sigmoid(s_uv) - 1.0) : sigmoid(s_uv);
                        pair_loss -= positive ? log_sigmoid(s_uv) : log_sigmoid(-s_uv);
                        for (std::size_t k = 0; k < d; ++k) {
                            g_in[k] += coef * urow[k];
                            urow[k] -= lr * coef * v_in[k];
                        }
                    };

                    update_output(context, true);
                    for (uint32_t neg = 0; neg < cfg.negatives; ++neg) {
                        const double r = rng.next_double();
                        const auto it = std::lower_bound(cum.begin(), cum.end(), r);
                        const uint32_t id =
                            static_cast<uint32_t>(std::distance(cum.begin(), it));
                        if (id == context) continue;
                        update_output(id, false);
                    }

                    double* vout = table.input.row(center);
                    for (std::size_t k = 0; k < d; ++k) vout[k] -= lr * g_in[k];
                    for (uint32_t b : sub) {
                        double* brow = table.bucket_vecs.row(b);
                        for (std::size_t k = 0; k < d; ++k) brow[k] -= lr * inv_g * g_in[k];
                    }

                    loss_sum += pair_loss;
                    ++loss_n;
                }
            }
        }
        if (epoch_loss) epoch_loss->push_back(loss_n ? loss_sum / loss_n : 0.0);
    }
    return table;
}

Vec token_vector(const EmbeddingTable& table, const std::string& token) {
    const std::size_t d = table.dim;
    Vec v(d, 0.0);
    const auto sub = subword_buckets(token, table.ngram_min, table.ngram_max, table.buckets);
    if (!sub.empty()) {
        const double inv_g = 1.0 / static_cast<double>(sub.size());
        for (uint32_t b : sub) {
            const double* row = table.bucket_vecs.row(b);
            for (std::size_t k = 0; k < d; ++k) v[k] += inv_g * row[k];
        }
    }
    if (auto id = table.vocab.id_of(token)) {
        const double* row = table.input.row(*id);
        for (std::size_t k = 0; k < d; ++k) v[k] += row[k];
    }
    return v;
}

FeaturedGraph featurize(const MathGraph& g, const EmbeddingTable& table, uint32_t edge_dim) {
    if (edge_dim > table.dim) throw DimensionMismatchError("edge_dim exceeds embedding dim");
    FeaturedGraph fg;
    fg.graph = g;
    fg.node_features = Matrix(g.nodes.size(), table.dim);
    fg.edge_features = Matrix(g.edges.size(), edge_dim);
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const Vec v = token_vector(table, g.nodes[i].label);
        std::copy(v.begin(), v.end(), fg.node_features.row(i));
    }
    for (std::size_t j = 0; j < g.edges.size(); ++j) {
        const Vec v = token_vector(table, g.edges[j].label);
        std::copy(v.begin(), v.begin() + edge_dim, fg.edge_features.row(j));
    }
    return fg;
}

void LabelFeatures::warm(const EmbeddingTable& table, const std::vector<std::string>& labels) {
    dim_ = table.dim;
    for (const std::string& l : labels)
        if (!map_.count(l)) map_[l] = token_vector(table, l);
}

const Vec& LabelFeatures::get(const std::string& label) const {
    auto it = map_.find(label);
    if (it == map_.end())
        throw std::logic_error("label not warmed in LabelFeatures: " + label);
    return it->second;
}

FeaturedGraph featurize_cached(const MathGraph& g, const LabelFeatures& feats, uint32_t edge_dim) {
    FeaturedGraph fg;
    fg.graph = g;
    fg.node_features = Matrix(g.nodes.size(), feats.dim());
    fg.edge_features = Matrix(g.edges.size(), edge_dim);
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const Vec& v = feats.get(g.nodes[i].label);
        std::copy(v.begin(), v.end(), fg.node_features.row(i));
    }
    for (std::size_t j = 0; j < g.edges.size(); ++j) {
        const Vec& v = feats.get(g.edges[j].label);
        std::copy(v.begin(), v.begin() + edge_dim, fg.edge_features.row(j));
    }
    return fg;
}

std::vector<std::string> graph_labels(const MathGraph& g) {
    std::vector<std::string> labels;
    labels.reserve(g.nodes.size() + g.edges.size());
    for (const auto& n : g.nodes) labels.push_back(n.label);
    for (const auto& e : g.edges) labels.push_back(e.label);
    return labels;
}

namespace {
constexpr char kTableMagic[4] = {'T', 'E', 'M', 'B'};
constexpr uint32_t kTableVersion = 1;

void write_matrix_f32(ByteWriter& w, const Matrix& m) {
    for (double x : m.data) w.f32(static_cast<float>(x));
}

void read_matrix_f32(ByteReader& r, Matrix& m) {
    for (double& x : m.data) x = r.f32();
}
}  // namespace

void save_table(const EmbeddingTable& table, const std::string& path) {
    ByteWriter w;
    w.raw(kTableMagic, 4);
    w.u32(kTableVersion);
    w.u32(table.dim);
    w.u64(table.vocab.size());
    w.u32(table.buckets);
    w.u32(table.ngram_min);
    w.u32(table.ngram_max);
    for (std::size_t i = 0; i < table.vocab.size(); ++i) {
        w.str(table.vocab.tokens[i]);
        w.u64(table.vocab.counts[i]);
    }
    write_matrix_f32(w, table.input);
    write_matrix_f32(w, table.output);
    write_matrix_f32(w, table.bucket_vecs);
    const uint32_t crc = crc32(w.bytes().data(), w.bytes().size());
    w.u32(crc);
    write_file_bytes(path, w.bytes());
}

EmbeddingTable load_table(const std::string& path) {
    const std::vector<uint8_t> bytes = read_file_bytes(path);
    if (bytes.size() < 8) throw CorruptFileError("table file truncated: " + path);
    const std::size_t payload = bytes.size() - 4;
    ByteReader tail(bytes.data() + payload, 4);
    if (tail.u32() != crc32(bytes.data(), payload))
        throw CorruptFileError("table checksum mismatch: " + path);

    ByteReader r(bytes.data(), payload);
    char magic[4];
    for (char& c : magic) c = static_cast<char>(r.u8());
    if (std::string(magic, 4) != std::string(kTableMagic, 4))
        throw CorruptFileError("not a token table file: " + path);
    if (r.u32() != kTableVersion) throw VersionMismatchError("unsupported table version: " + path);

    EmbeddingTable t;
    t.dim = r.u32();
    const uint64_t vsize = r.u64();
    t.buckets = r.u32();
    t.ngram_min = r.u32();
    t.ngram_max = r.u32();
    for (uint64_t i = 0; i < vsize; ++i) {
        const std::string tok = r.str();
        const uint64_t count = r.u64();
        t.vocab.index[tok] = static_cast<uint32_t>(t.vocab.tokens.size());
        t.vocab.tokens.push_back(tok);
        t.vocab.counts.push_back(count);
        t.vocab.total += count;
    }
    t.input = Matrix(vsize, t.dim);
    t.output = Matrix(vsize, t.dim);
    t.bucket_vecs = Matrix(t.buckets, t.dim);
    read_matrix_f32(r, t.input);
    read_matrix_f32(r, t.output);
    read_matrix_f32(r, t.bucket_vecs);
    return t;
}

}  // namespace fgcl

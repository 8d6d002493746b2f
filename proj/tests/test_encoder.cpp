#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <set>

#include "fgcl/augment.hpp"
#include "fgcl/binio.hpp"
#include "fgcl/encoder.hpp"
#include "fgcl/evalbench.hpp"
#include "fgcl/formula.hpp"
#include "fgcl/retrieval.hpp"

using namespace fgcl;

namespace {

FeaturedGraph random_featured(Rng& rng, std::size_t dim, std::size_t edge_dim,
                              uint32_t max_depth = 3) {
    const FormulaAst ast = random_formula(rng, max_depth);
    FeaturedGraph fg;
    fg.graph = build_graph(parse_formula(unparse(ast)), rng.below(2) ? GraphKind::Slt : GraphKind::Opt);
    fg.node_features = Matrix(fg.graph.nodes.size(), dim);
    for (double& x : fg.node_features.data) x = rng.uniform(-1.0, 1.0);
    fg.edge_features = Matrix(fg.graph.edges.size(), edge_dim);
    for (double& x : fg.edge_features.data) x = rng.uniform(-1.0, 1.0);
    return fg;
}

FeaturedGraph small_featured(Rng& rng, std::size_t dim, std::size_t edge_dim,
                             std::size_t max_nodes) {
    for (;;) {
        FeaturedGraph fg = random_featured(rng, dim, edge_dim, 2);
        if (fg.graph.nodes.size() <= max_nodes) return fg;
    }
}

Vec unit(std::initializer_list<double> xs) {
    Vec v(xs);
    const double n = l2_norm(v.data(), v.size());
    for (double& x : v) x /= n;
    return v;
}

double max_abs_grad(const EncoderGrads& grads) {
    double m = 0.0;
    for (const EncoderLayer& g : grads) {
        for (double x : g.w_self.data) m = std::max(m, std::abs(x));
        for (double x : g.w_nbr.data) m = std::max(m, std::abs(x));
        for (double x : g.w_edge.data) m = std::max(m, std::abs(x));
        for (double x : g.bias) m = std::max(m, std::abs(x));
    }
    return m;
}

}  // namespace

TEST_CASE("encode: single-node identity layer example") {
    EncoderParams p;
    p.edge_dim = 2;
    EncoderLayer layer;
    layer.w_self = Matrix(4, 4);
    for (int i = 0; i < 4; ++i) layer.w_self.at(i, i) = 1.0;
    layer.w_nbr = Matrix(4, 4);
    layer.w_edge = Matrix(4, 2);
    layer.bias = Vec(4, 0.0);
    p.layers.push_back(layer);

    FeaturedGraph fg;
    fg.graph.nodes = {{NodeKind::Variable, "V!x"}};
    fg.graph.root = 0;
    fg.node_features = Matrix(1, 4);
    fg.node_features.at(0, 0) = 0.5;
    fg.node_features.at(0, 1) = -0.2;
    fg.edge_features = Matrix(0, 2);

    const Vec z = encode(p, fg);
    // ReLU keeps (0.5, 0, 0, 0); normalization gives e_0
    CHECK(z[0] == doctest::Approx(1.0).epsilon(1e-12));
    for (int k = 1; k < 4; ++k) CHECK(z[k] == 0.0);
}

TEST_CASE("encode: always unit norm and finite, even for degenerate graphs") {
    Rng rng(31);
    const EncoderParams p = init_encoder({6, 8, 8}, 3, 17);
    for (int i = 0; i < 60; ++i) {
        FeaturedGraph fg = random_featured(rng, 6, 3);
        // sometimes knock the graph apart first
        if (i % 3 == 1) {
            Rng drop(rng.next_u64());
            AugmentConfig cfg;
            cfg.strategy = AugmentStrategy::NodeDrop;
            cfg.ratio = 0.5;
            LabelFeatures feats;
            fg = augment(fg, cfg, feats, drop);
        }
        if (i % 3 == 2) {
            Rng drop(rng.next_u64());
            AugmentConfig cfg;
            cfg.strategy = AugmentStrategy::EdgeDrop;
            cfg.ratio = 1.0;
            LabelFeatures feats;
            fg = augment(fg, cfg, feats, drop);
        }
        const Vec z = encode(p, fg);
        for (double x : z) CHECK(std::isfinite(x));
        CHECK(std::abs(l2_norm(z.data(), z.size()) - 1.0) <= 1e-9);
    }
    // all-zero features with zero bias: degenerate readout maps to e_0
    FeaturedGraph zero;
    zero.graph.nodes = {{NodeKind::Variable, "V!x"}};
    zero.graph.root = 0;
    zero.node_features = Matrix(1, 6);
    zero.edge_features = Matrix(0, 3);
    const Vec z = encode(p, zero);
    CHECK(z[0] == 1.0);
    CHECK(std::abs(l2_norm(z.data(), z.size()) - 1.0) <= 1e-9);
}

TEST_CASE("encode: invariant to node order (mean aggregation)") {
    Rng rng(37);
    const EncoderParams p = init_encoder({5, 7}, 2, 23);
    for (int trial = 0; trial < 20; ++trial) {
        const FeaturedGraph fg = random_featured(rng, 5, 2);
        const std::size_t n = fg.graph.nodes.size();
        // reverse permutation
        std::vector<uint32_t> perm(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<uint32_t>(n - 1 - i);
        FeaturedGraph pg;
        pg.graph.kind = fg.graph.kind;
        pg.graph.nodes.resize(n);
        pg.node_features = Matrix(n, 5);
        for (std::size_t i = 0; i < n; ++i) {
            pg.graph.nodes[perm[i]] = fg.graph.nodes[i];
            for (std::size_t k = 0; k < 5; ++k)
                pg.node_features.at(perm[i], k) = fg.node_features.at(i, k);
        }
        pg.graph.edges = fg.graph.edges;
        for (GraphEdge& e : pg.graph.edges) {
            e.src = perm[e.src];
            e.dst = perm[e.dst];
        }
        pg.graph.root = perm[fg.graph.root];
        pg.edge_features = fg.edge_features;

        const Vec a = encode(p, fg);
        const Vec b = encode(p, pg);
        for (std::size_t k = 0; k < a.size(); ++k)
            CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-12));
    }
}

TEST_CASE("encode: dimension mismatches are rejected") {
    const EncoderParams p = init_encoder({5, 7}, 2, 23);
    FeaturedGraph fg;
    fg.graph.nodes = {{NodeKind::Variable, "V!x"}};
    fg.graph.root = 0;
    fg.node_features = Matrix(1, 4);  // wrong input dim
    fg.edge_features = Matrix(0, 2);
    CHECK_THROWS_AS(encode(p, fg), DimensionMismatchError);
    fg.node_features = Matrix(1, 5);
    fg.edge_features = Matrix(0, 3);  // wrong edge dim
    CHECK_THROWS_AS(encode(p, fg), DimensionMismatchError);
}

TEST_CASE("ntxent_loss: hand-computed value for orthogonal pairs") {
    const std::vector<Vec> a = {unit({1, 0}), unit({0, 1})};
    const std::vector<Vec> b = {unit({1, 0}), unit({0, 1})};
    const double loss = ntxent_loss(a, b, 1.0);
    // every anchor: -log(e / (e + 2))
    const double expected = std::log1p(2.0 / std::exp(1.0));
    CHECK(std::abs(loss - expected) < 1e-12);
    CHECK(std::abs(loss - 0.5514) < 1e-4);
}

TEST_CASE("ntxent_loss: identity point equals log(2N-1)") {
    for (std::size_t n : {2u, 8u, 32u}) {
        const Vec z = unit({0.3, -0.4, 0.5, 0.1});
        const std::vector<Vec> a(n, z), b(n, z);
        for (double tau : {0.5, 1.0}) {
            const double loss = ntxent_loss(a, b, tau);
            CHECK(std::abs(loss - std::log(2.0 * n - 1.0)) <= 1e-9);
        }
    }
}

TEST_CASE("ntxent_loss: invariant under joint permutation of pair indices") {
    Rng rng(41);
    const std::size_t n = 5, d = 6;
    std::vector<Vec> a, b;
    for (std::size_t i = 0; i < n; ++i) {
        Vec va(d), vb(d);
        for (double& x : va) x = rng.uniform(-1, 1);
        for (double& x : vb) x = rng.uniform(-1, 1);
        const double na = l2_norm(va.data(), d), nb = l2_norm(vb.data(), d);
        for (double& x : va) x /= na;
        for (double& x : vb) x /= nb;
        a.push_back(va);
        b.push_back(vb);
    }
    const double base = ntxent_loss(a, b, 0.5);
    std::vector<std::size_t> perm = {3, 0, 4, 1, 2};
    std::vector<Vec> pa(n), pb(n);
    for (std::size_t i = 0; i < n; ++i) {
        pa[perm[i]] = a[i];
        pb[perm[i]] = b[i];
    }
    CHECK(std::abs(ntxent_loss(pa, pb, 0.5) - base) < 1e-12);
}

TEST_CASE("ntxent_loss: batch too small") {
    const std::vector<Vec> one = {unit({1, 0})};
    CHECK_THROWS_AS(ntxent_loss(one, one, 0.5), BatchTooSmallError);
}

TEST_CASE("loss_gradients match central finite differences on 20 random batches") {
    Rng rng(43);
    const double h = 1e-5;
    int skipped = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t d0 = 4, de = 3;
        const std::vector<uint32_t> dims = {4, 5, 4};
        EncoderParams p = init_encoder(dims, de, rng.next_u64());
        const std::size_t n = 2 + rng.below(3);
        std::vector<FeaturedGraph> batch_a, batch_b;
        for (std::size_t i = 0; i < n; ++i) {
            batch_a.push_back(small_featured(rng, d0, de, 6));
            batch_b.push_back(small_featured(rng, d0, de, 6));
        }
        const double tau = 0.5 + rng.next_double();

        EncoderGrads grads = zero_grads(p);
        loss_gradients(p, batch_a, batch_b, tau, grads);

        auto loss_at = [&]() {
            EncoderGrads g2 = zero_grads(p);
            return loss_gradients(p, batch_a, batch_b, tau, g2);
        };
        auto check_slot = [&](double* slot, double analytic) {
            const double keep = *slot;
            *slot = keep + h;
            const double up = loss_at();
            *slot = keep - h;
            const double down = loss_at();
            *slot = keep;
            const double fd = (up - down) / (2 * h);
            if (std::abs(fd) + std::abs(analytic) < 1e-7) {
                ++skipped;
                return;
            }
            const double rel =
                std::abs(fd - analytic) / std::max(std::abs(fd), std::abs(analytic));
            CHECK(rel < 1e-4);
        };

        for (std::size_t l = 0; l < p.layers.size(); ++l) {
            for (std::size_t k = 0; k < p.layers[l].w_self.data.size(); ++k)
                check_slot(&p.layers[l].w_self.data[k], grads[l].w_self.data[k]);
            for (std::size_t k = 0; k < p.layers[l].w_nbr.data.size(); ++k)
                check_slot(&p.layers[l].w_nbr.data[k], grads[l].w_nbr.data[k]);
            for (std::size_t k = 0; k < p.layers[l].w_edge.data.size(); ++k)
                check_slot(&p.layers[l].w_edge.data[k], grads[l].w_edge.data[k]);
            for (std::size_t k = 0; k < p.layers[l].bias.size(); ++k)
                check_slot(&p.layers[l].bias[k], grads[l].bias[k]);
        }
    }
    // dead-ReLU slots legitimately produce zero on both sides; they must not
    // dominate the comparison
    CHECK(skipped < 20 * 400);
}

TEST_CASE("gradients vanish when every embedding is identical") {
    Rng rng(47);
    const EncoderParams p = init_encoder({4, 5}, 2, 51);
    const FeaturedGraph fg = small_featured(rng, 4, 2, 5);
    const std::vector<FeaturedGraph> batch(3, fg);
    EncoderGrads grads = zero_grads(p);
    loss_gradients(p, batch, batch, 5.0, grads);
    CHECK(max_abs_grad(grads) < 1e-12);
}

TEST_CASE("gradients stay finite on disconnected graphs") {
    Rng rng(53);
    const EncoderParams p = init_encoder({4, 5}, 2, 57);
    std::vector<FeaturedGraph> batch_a, batch_b;
    for (int i = 0; i < 3; ++i) {
        FeaturedGraph fg = small_featured(rng, 4, 2, 8);
        AugmentConfig cfg;
        cfg.strategy = AugmentStrategy::NodeDrop;
        cfg.ratio = 0.5;
        LabelFeatures feats;
        Rng drop(rng.next_u64());
        batch_a.push_back(fg);
        batch_b.push_back(augment(fg, cfg, feats, drop));
    }
    EncoderGrads grads = zero_grads(p);
    const double loss = loss_gradients(p, batch_a, batch_b, 0.5, grads);
    CHECK(std::isfinite(loss));
    for (const EncoderLayer& g : grads)
        for (double x : g.w_self.data) CHECK(std::isfinite(x));
}

namespace {

// Shared tiny pipeline for the training tests: small table, small encoder.
struct TinyPipeline {
    std::vector<MathGraph> graphs;
    LabelFeatures feats;
    EmbedConfig ecfg;

    TinyPipeline(std::size_t count, uint64_t seed, GraphKind kind = GraphKind::Slt) {
        Rng rng(seed);
        while (graphs.size() < count) {
            const FormulaAst ast = random_formula(rng, 3);
            const MathGraph g = build_graph(parse_formula(unparse(ast)), kind);
            std::set<std::string> vars;
            for (const GraphNode& node : g.nodes)
                if (node.kind == NodeKind::Variable) vars.insert(label_lexeme(node.label));
            if (vars.size() > 20 || g.nodes.size() > 30) continue;
            graphs.push_back(g);
        }
        ecfg.dim = 20;
        ecfg.buckets = 2048;
        ecfg.epochs = 2;
        Rng wrng(Rng::mix(seed, 1));
        std::vector<Walk> walks;
        for (const MathGraph& g : graphs) {
            auto w = sample_walks(g, 4, 4, wrng);
            walks.insert(walks.end(), w.begin(), w.end());
        }
        const Vocabulary vocab = build_vocab(walks, 1);
        const EmbeddingTable table =
            train_token_embeddings(walks, vocab, ecfg, Rng::mix(seed, 2));
        std::vector<std::string> labels;
        for (const MathGraph& g : graphs) {
            auto ls = graph_labels(g);
            labels.insert(labels.end(), ls.begin(), ls.end());
        }
        for (const std::string& v : AugmentConfig::default_var_pool()) labels.push_back("V!" + v);
        for (const std::string& n : AugmentConfig::default_num_pool()) labels.push_back("N!" + n);
        feats.warm(table, labels);
    }
};

}  // namespace

TEST_CASE("train_gcl: zero epochs returns the seeded initialization") {
    TinyPipeline pipe(8, 61);
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.epochs = 0;
    cfg.hidden_dims = {12, 12};
    cfg.seed = 77;
    const TrainResult r = train_gcl(pipe.graphs, pipe.feats, cfg, 16);
    CHECK(r.params == init_encoder({20, 12, 12}, 16, 77));
    CHECK(r.epoch_loss.empty());
}

TEST_CASE("train_gcl: loss decreases with identity augmentation (three seeds)") {
    TinyPipeline pipe(64, 67);
    for (uint64_t seed : {1ull, 2ull, 3ull}) {
        TrainConfig cfg;
        cfg.batch_size = 16;
        cfg.epochs = 50;
        cfg.lr = 0.05;
        cfg.hidden_dims = {16, 16};
        cfg.seed = seed;
        cfg.augment.strategy = AugmentStrategy::Identity;
        const TrainResult r = train_gcl(pipe.graphs, pipe.feats, cfg, 16);
        REQUIRE(r.epoch_loss.size() == 50);
        CHECK(r.epoch_loss.back() < r.epoch_loss.front());
    }
}

TEST_CASE("train_gcl: deterministic, and errors on bad sizes") {
    TinyPipeline pipe(10, 71);
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.epochs = 2;
    cfg.hidden_dims = {10, 10};
    cfg.seed = 5;
    const TrainResult a = train_gcl(pipe.graphs, pipe.feats, cfg, 16);
    const TrainResult b = train_gcl(pipe.graphs, pipe.feats, cfg, 16);
    CHECK(a.params == b.params);
    CHECK(a.epoch_loss == b.epoch_loss);

    cfg.batch_size = 1;
    CHECK_THROWS_AS(train_gcl(pipe.graphs, pipe.feats, cfg, 16), BatchTooSmallError);
    cfg.batch_size = 11;
    CHECK_THROWS_AS(train_gcl(pipe.graphs, pipe.feats, cfg, 16), CorpusTooSmallError);
}

TEST_CASE("baseline_embed: examples") {
    FeaturedGraph fg;
    fg.graph.nodes = {{NodeKind::Variable, "V!x"}};
    fg.graph.root = 0;
    fg.node_features = Matrix(1, 3);
    fg.node_features.at(0, 0) = 3.0;
    fg.node_features.at(0, 1) = 4.0;
    fg.edge_features = Matrix(0, 2);
    const Vec z = baseline_embed(fg);
    CHECK(z[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(z[1] == doctest::Approx(0.8).epsilon(1e-12));

    // two nodes with equal features: same normalized vector
    FeaturedGraph fg2 = fg;
    fg2.graph.nodes.push_back({NodeKind::Variable, "V!y"});
    fg2.node_features = Matrix(2, 3);
    for (int i = 0; i < 2; ++i) {
        fg2.node_features.at(i, 0) = 3.0;
        fg2.node_features.at(i, 1) = 4.0;
    }
    const Vec z2 = baseline_embed(fg2);
    for (std::size_t k = 0; k < 3; ++k) CHECK(z2[k] == doctest::Approx(z[k]).epsilon(1e-12));

    // node-order invariance
    FeaturedGraph fg3 = fg2;
    fg3.node_features.at(0, 0) = 1.0;
    FeaturedGraph fg4 = fg3;
    std::swap(fg4.graph.nodes[0], fg4.graph.nodes[1]);
    for (std::size_t k = 0; k < 3; ++k)
        std::swap(fg4.node_features.at(0, k), fg4.node_features.at(1, k));
    const Vec z3 = baseline_embed(fg3), z4 = baseline_embed(fg4);
    for (std::size_t k = 0; k < 3; ++k) CHECK(z3[k] == doctest::Approx(z4[k]).epsilon(1e-12));
}

TEST_CASE("checkpoint: round trip, identity, corruption, version") {
    TinyPipeline pipe(8, 73);
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.epochs = 1;
    cfg.hidden_dims = {10, 10};
    cfg.seed = 9;
    const TrainResult r = train_gcl(pipe.graphs, pipe.feats, cfg, 16);

    const std::string p1 = "tmp_ckpt1.fgcl", p2 = "tmp_ckpt2.fgcl";
    const Checkpoint ckpt{r.params, cfg, r.epoch_loss};
    save_checkpoint(ckpt, p1);
    const Checkpoint loaded = load_checkpoint(p1);
    save_checkpoint(loaded, p2);
    CHECK(read_file_bytes(p1) == read_file_bytes(p2));
    CHECK(loaded.config.batch_size == cfg.batch_size);
    CHECK(loaded.config.seed == cfg.seed);
    CHECK(loaded.loss_history.size() == r.epoch_loss.size());
    // parameters persist at f32 precision; the id is computed on that grid
    CHECK(checkpoint_id(loaded.params) == checkpoint_id(r.params));

    auto bytes = read_file_bytes(p1);
    bytes.resize(bytes.size() - 10);
    write_file_bytes(p2, bytes);
    CHECK_THROWS_AS(load_checkpoint(p2), CorruptFileError);

    bytes = read_file_bytes(p1);
    bytes[4] = 0x6e;  // version field
    const uint32_t crc = crc32(bytes.data(), bytes.size() - 4);
    for (int i = 0; i < 4; ++i) bytes[bytes.size() - 4 + i] = static_cast<uint8_t>(crc >> (8 * i));
    write_file_bytes(p2, bytes);
    CHECK_THROWS_AS(load_checkpoint(p2), VersionMismatchError);

    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("alpha-invariance: VarSub training pulls renamings together (three seeds)") {
    TinyPipeline pipe(150, 79);
    const auto var_pool = AugmentConfig::default_var_pool();
    const auto num_pool = AugmentConfig::default_num_pool();

    for (uint64_t seed : {1ull, 2ull, 3ull}) {
        TrainConfig cfg;
        cfg.batch_size = 32;
        cfg.epochs = 4;
        cfg.lr = 0.05;
        cfg.hidden_dims = {24, 24};
        cfg.seed = seed;
        cfg.augment.strategy = AugmentStrategy::VarSub;
        const TrainResult r = train_gcl(pipe.graphs, pipe.feats, cfg, 16);

        Rng rng(Rng::mix(seed, 0xabc));
        double same_sum = 0.0, other_sum = 0.0;
        int pairs = 0;
        for (int i = 0; i < 100; ++i) {
            const MathGraph& f = pipe.graphs[rng.below(pipe.graphs.size())];
            AugmentConfig acfg;
            SubstitutionMap m = sample_substitution(f, acfg, rng);
            const MathGraph renamed = apply_substitution(f, m);
            const MathGraph& g = pipe.graphs[rng.below(pipe.graphs.size())];
            if (graph_signature(g) == graph_signature(f)) continue;

            const Vec zf = encode(r.params, featurize_cached(f, pipe.feats, 16));
            const Vec zr = encode(r.params, featurize_cached(renamed, pipe.feats, 16));
            const Vec zg = encode(r.params, featurize_cached(g, pipe.feats, 16));
            same_sum += dot(zf.data(), zr.data(), zf.size());
            other_sum += dot(zf.data(), zg.data(), zf.size());
            ++pairs;
        }
        REQUIRE(pairs > 50);
        const double margin = same_sum / pairs - other_sum / pairs;
        CAPTURE(seed);
        CAPTURE(margin);
        CHECK(margin >= 0.1);
    }
}

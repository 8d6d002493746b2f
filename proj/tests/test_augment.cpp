#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <map>
#include <set>

#include "fgcl/augment.hpp"
#include "fgcl/evalbench.hpp"
#include "fgcl/formula.hpp"

using namespace fgcl;

namespace {

MathGraph graph_of(const std::string& text, GraphKind kind = GraphKind::Slt) {
    return build_graph(parse_formula(text), kind);
}

AugmentConfig cfg_with_pool(std::vector<std::string> vars, std::vector<std::string> nums = {"7"}) {
    AugmentConfig cfg;
    cfg.var_pool = std::move(vars);
    cfg.num_pool = std::move(nums);
    return cfg;
}

// A featured graph with recognizable rows so masking is easy to observe.
FeaturedGraph featured_of(const MathGraph& g, std::size_t dim = 8, std::size_t edge_dim = 4) {
    FeaturedGraph fg;
    fg.graph = g;
    fg.node_features = Matrix(g.nodes.size(), dim);
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        for (std::size_t k = 0; k < dim; ++k) fg.node_features.at(i, k) = 1.0 + i + 0.01 * k;
    fg.edge_features = Matrix(g.edges.size(), edge_dim);
    for (std::size_t j = 0; j < g.edges.size(); ++j)
        for (std::size_t k = 0; k < edge_dim; ++k) fg.edge_features.at(j, k) = 1.0 + j + 0.01 * k;
    return fg;
}

std::size_t zero_rows(const Matrix& m) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < m.rows; ++i) {
        bool all_zero = true;
        for (std::size_t k = 0; k < m.cols; ++k) all_zero = all_zero && m.at(i, k) == 0.0;
        if (all_zero) ++n;
    }
    return n;
}

struct KindSeq {
    std::vector<NodeKind> kinds;
    explicit KindSeq(const MathGraph& g) {
        for (const auto& n : g.nodes) kinds.push_back(n.kind);
    }
    bool operator==(const KindSeq&) const = default;
};

}  // namespace

TEST_CASE("sample_substitution: forced and impossible cases") {
    const MathGraph g = graph_of("x+x");  // vars {x}
    Rng rng(1);
    const SubstitutionMap m = sample_substitution(g, cfg_with_pool({"x", "y"}), rng);
    REQUIRE(m.vars.size() == 1);
    CHECK(m.vars.at("x") == "y");  // identity forbidden when the pool allows

    const MathGraph g2 = graph_of("x+y");
    Rng rng2(1);
    CHECK_THROWS_AS(sample_substitution(g2, cfg_with_pool({"z"}), rng2), PoolTooSmallError);
}

TEST_CASE("sample_substitution: injective over 1000 seeds") {
    const MathGraph g = graph_of("x+y");
    const AugmentConfig cfg = cfg_with_pool({"a", "b", "c"});
    for (uint64_t seed = 0; seed < 1000; ++seed) {
        Rng rng(seed);
        const SubstitutionMap m = sample_substitution(g, cfg, rng);
        REQUIRE(m.vars.size() == 2);
        std::set<std::string> images;
        for (const auto& [from, to] : m.vars) {
            CHECK((to == "a" || to == "b" || to == "c"));
            CHECK(to != from);
            images.insert(to);
        }
        CHECK(images.size() == 2);  // injective
    }
}

TEST_CASE("apply_substitution: spec examples") {
    // nodes [V!x, O!add, V!x ... ]: use x+x*y to get repeated x
    const MathGraph g = graph_of("x+x*y", GraphKind::Opt);
    SubstitutionMap m;
    m.vars = {{"x", "a"}, {"y", "b"}};
    const MathGraph out = apply_substitution(g, m);
    CHECK(out.edges == g.edges);
    CHECK(out.root == g.root);
    REQUIRE(out.nodes.size() == g.nodes.size());
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        CHECK(out.nodes[i].kind == g.nodes[i].kind);
        if (g.nodes[i].label == "V!x") CHECK(out.nodes[i].label == "V!a");
        if (g.nodes[i].label == "V!y") CHECK(out.nodes[i].label == "V!b");
        if (g.nodes[i].kind == NodeKind::Operator) CHECK(out.nodes[i].label == g.nodes[i].label);
    }

    // number rewriting
    const MathGraph gn = graph_of("2");
    SubstitutionMap mn;
    mn.nums = {{"2", "7"}};
    CHECK(apply_substitution(gn, mn).nodes[0].label == "N!7");

    // empty map on an operator-only graph: untouched
    MathGraph ops;
    ops.kind = GraphKind::Slt;
    ops.nodes = {{NodeKind::Operator, "O!add"}, {NodeKind::Operator, "O!mul"}};
    ops.edges = {{0, 1, "NEXT"}};
    SubstitutionMap empty;
    CHECK(apply_substitution(ops, empty) == ops);

    // missing variable mapping in Consistent mode
    SubstitutionMap incomplete;
    incomplete.vars = {{"x", "a"}};
    CHECK_THROWS_AS(apply_substitution(g, incomplete), IncompleteMapError);
}

TEST_CASE("node_drop: exact counts and root protection") {
    const MathGraph g = graph_of("x+y*z");  // SLT chain of 5 nodes
    REQUIRE(g.nodes.size() == 5);
    Rng rng(3);
    const MathGraph dropped = node_drop(g, 0.2, rng);
    CHECK(dropped.nodes.size() == 4);  // exactly one non-root removed
    bool root_label_kept = dropped.nodes[dropped.root].label == g.nodes[g.root].label;
    CHECK(root_label_kept);

    MathGraph single;
    single.nodes = {{NodeKind::Variable, "V!x"}};
    single.root = 0;
    Rng rng2(4);
    CHECK(node_drop(single, 0.9, rng2) == single);

    Rng rng3(5);
    CHECK(node_drop(g, 0.0, rng3) == g);

    // ratio 1 keeps the root
    Rng rng4(6);
    CHECK(node_drop(g, 1.0, rng4).nodes.size() == 1);
}

TEST_CASE("edge_drop: exact counts") {
    const MathGraph g = graph_of("x+y*z");  // 4 edges
    REQUIRE(g.edges.size() == 4);
    Rng rng(3);
    const MathGraph dropped = edge_drop(g, 0.25, rng);
    CHECK(dropped.edges.size() == 3);
    CHECK(dropped.nodes == g.nodes);

    Rng rng2(4);
    const MathGraph all_gone = edge_drop(g, 1.0, rng2);
    CHECK(all_gone.edges.empty());
    CHECK(all_gone.nodes == g.nodes);

    Rng rng3(5);
    CHECK(edge_drop(g, 0.0, rng3) == g);
}

TEST_CASE("node_feature_mask: exact rows zeroed, rest untouched") {
    MathGraph g;
    for (int i = 0; i < 10; ++i) g.nodes.push_back({NodeKind::Variable, "V!x"});
    for (uint32_t i = 1; i < 10; ++i) g.edges.push_back({0, i, "NEXT"});
    const FeaturedGraph fg = featured_of(g, 100, 4);

    Rng rng(9);
    const FeaturedGraph masked = node_feature_mask(fg, 0.2, rng);
    CHECK(masked.graph == fg.graph);
    CHECK(zero_rows(masked.node_features) == 2);
    // unmasked rows bit-identical
    std::size_t unchanged = 0;
    for (std::size_t i = 0; i < 10; ++i) {
        bool same = true;
        for (std::size_t k = 0; k < 100; ++k)
            same = same && masked.node_features.at(i, k) == fg.node_features.at(i, k);
        if (same) ++unchanged;
    }
    CHECK(unchanged == 8);

    Rng rng2(10);
    CHECK(node_feature_mask(fg, 0.0, rng2) == fg);
}

TEST_CASE("edge_feature_mask mirrors node_feature_mask on edges") {
    const MathGraph g = graph_of("x+y*z+w");
    const FeaturedGraph fg = featured_of(g, 8, 16);
    REQUIRE(fg.graph.edges.size() == 6);

    Rng rng(11);
    const FeaturedGraph masked = edge_feature_mask(fg, 0.5, rng);
    CHECK(masked.graph == fg.graph);
    CHECK(masked.node_features == fg.node_features);
    CHECK(zero_rows(masked.edge_features) == 3);

    Rng rng2(12);
    CHECK(edge_feature_mask(fg, 0.0, rng2) == fg);
}

TEST_CASE("augment: identity and random dispatch frequencies") {
    const MathGraph g = graph_of("x+y*z");
    const FeaturedGraph fg = featured_of(g);
    LabelFeatures feats;  // not needed for the generic strategies

    AugmentConfig cfg;
    cfg.strategy = AugmentStrategy::Identity;
    Rng rng(1);
    CHECK(augment(fg, cfg, feats, rng) == fg);

    // Random picks each generic strategy with frequency 0.25 +- 0.02.
    // ratio 0.25 makes every strategy visibly change this 5-node/4-edge graph.
    cfg.strategy = AugmentStrategy::Random;
    cfg.ratio = 0.25;
    std::map<std::string, int> counts;
    for (uint64_t seed = 0; seed < 10000; ++seed) {
        Rng r(seed);
        const FeaturedGraph out = augment(fg, cfg, feats, r);
        std::string which;
        if (out.graph.nodes.size() < fg.graph.nodes.size())
            which = "nodedrop";
        else if (out.graph.edges.size() < fg.graph.edges.size())
            which = "edgedrop";
        else if (zero_rows(out.node_features) > 0)
            which = "nodefeaturemask";
        else if (zero_rows(out.edge_features) > 0)
            which = "edgefeaturemask";
        else
            which = "unknown";
        ++counts[which];
    }
    CHECK(counts["unknown"] == 0);
    for (const char* name : {"nodedrop", "edgedrop", "nodefeaturemask", "edgefeaturemask"}) {
        const double freq = counts[name] / 10000.0;
        CAPTURE(name);
        CHECK(freq > 0.23);
        CHECK(freq < 0.27);
    }
}

TEST_CASE("property: VarSub preserves topology; inverse map recovers the graph") {
    Rng gen_rng(21);
    AugmentConfig cfg;
    // Unbounded random formulas can exceed the default 26-letter pool once OPT
    // subscript folds multiply lexemes; a synthetic pool keeps the map total.
    cfg.var_pool.clear();
    for (int i = 0; i < 200; ++i) cfg.var_pool.push_back("v" + std::to_string(i));
    for (int i = 0; i < 1000; ++i) {
        const FormulaAst ast = random_formula(gen_rng, 1 + gen_rng.below(4));
        const GraphKind kind = i % 2 ? GraphKind::Slt : GraphKind::Opt;
        const MathGraph g = build_graph(parse_formula(unparse(ast)), kind);
        Rng rng(1000 + i);
        const SubstitutionMap m = sample_substitution(g, cfg, rng);
        const MathGraph out = apply_substitution(g, m);

        CHECK(out.nodes.size() == g.nodes.size());
        CHECK(out.edges == g.edges);  // edge multiset incl. labels, ids untouched
        CHECK(out.root == g.root);
        CHECK(KindSeq(out) == KindSeq(g));
        CHECK(topology_signature(out) == topology_signature(g));
        for (std::size_t v = 0; v < g.nodes.size(); ++v) {
            const NodeKind k = g.nodes[v].kind;
            if (k != NodeKind::Variable && k != NodeKind::Number)
                CHECK(out.nodes[v].label == g.nodes[v].label);
        }

        // alpha-renaming: the inverse map restores the original exactly
        SubstitutionMap inverse;
        inverse.mode = SubstitutionMode::Consistent;
        for (const auto& [from, to] : m.vars) inverse.vars[to] = from;
        for (const auto& [from, to] : m.nums) inverse.nums[to] = from;
        // Consistent variable maps are injective, so inversion is well-defined;
        // number maps need not be, in which case recovery is not guaranteed.
        if (inverse.nums.size() == m.nums.size() && inverse.vars.size() == m.vars.size())
            CHECK(apply_substitution(out, inverse) == g);
    }
}

TEST_CASE("property: determinism of every strategy given (input, config, seed)") {
    const MathGraph g = graph_of("\\frac{x+y}{z^{2}}");
    const FeaturedGraph fg = featured_of(g);
    LabelFeatures feats;
    EmbedConfig ecfg;
    ecfg.buckets = 64;
    Vocabulary vocab;  // tiny table to featurize substituted labels
    vocab.index["V!x"] = 0;
    vocab.tokens = {"V!x"};
    vocab.counts = {1};
    vocab.total = 1;
    const EmbeddingTable table = init_table(vocab, ecfg, 5);
    std::vector<std::string> labels;
    for (const std::string& v : AugmentConfig::default_var_pool()) labels.push_back("V!" + v);
    for (const std::string& n : AugmentConfig::default_num_pool()) labels.push_back("N!" + n);
    LabelFeatures warm;
    warm.warm(table, labels);

    for (AugmentStrategy s : {AugmentStrategy::VarSub, AugmentStrategy::NodeDrop,
                              AugmentStrategy::EdgeDrop, AugmentStrategy::NodeFeatureMask,
                              AugmentStrategy::EdgeFeatureMask, AugmentStrategy::Random}) {
        AugmentConfig cfg;
        cfg.strategy = s;
        FeaturedGraph base = fg;
        if (s == AugmentStrategy::VarSub) {
            // features must carry the table's dimension for re-featurization
            base = featurize(g, table, 16);
        }
        Rng r1(99), r2(99);
        const FeaturedGraph a = augment(base, cfg, warm, r1);
        const FeaturedGraph b = augment(base, cfg, warm, r2);
        CHECK(a == b);
    }
}

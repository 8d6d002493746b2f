#include "fgcl/augment.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace fgcl {

std::vector<std::string> AugmentConfig::default_var_pool() {
    std::vector<std::string> pool;
    for (char c = 'a'; c <= 'z'; ++c) pool.emplace_back(1, c);
    return pool;
}

std::vector<std::string> AugmentConfig::default_num_pool() {
    std::vector<std::string> pool;
    for (char c = '0'; c <= '9'; ++c) pool.emplace_back(1, c);
    return pool;
}

namespace {

// First k entries of a partial Fisher-Yates draw over [0, n).
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < k && i + 1 < n; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(std::min(k, n));
    return idx;
}

std::size_t drop_count(double ratio, std::size_t n) {
    return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n)));
}

std::vector<std::size_t> sorted(std::vector<std::size_t> v) {
    std::sort(v.begin(), v.end());
    return v;
}

}  // namespace

std::map<std::string, std::string> sample_injective_replacements(
    const std::vector<std::string>& domain, const std::vector<std::string>& pool, Rng& rng) {
    if (pool.empty()) throw PoolTooSmallError("replacement pool is empty");
    if (pool.size() < domain.size())
        throw PoolTooSmallError("pool of " + std::to_string(pool.size()) +
                                " cannot cover " + std::to_string(domain.size()) +
                                " distinct lexemes injectively");
    if (domain.empty()) return {};

    const std::size_t n = domain.size();
    std::vector<std::size_t> picks;
    const bool identity_allowed = pool.size() == 1;
    for (int attempt = 0; attempt < 1000; ++attempt) {
        picks = sample_indices(pool.size(), n, rng);
        bool ok = true;
        if (!identity_allowed) {
            for (std::size_t i = 0; i < n; ++i)
                if (pool[picks[i]] == domain[i]) {
                    ok = false;
                    break;
                }
        }
        if (ok) break;
        if (attempt == 999) {
            // Deterministic repair: swap each fixed point with an assignment
            // that removes it. For a singleton domain, take any other pool item.
            for (std::size_t i = 0; i < n; ++i) {
                if (pool[picks[i]] != domain[i]) continue;
                if (n == 1) {
                    for (std::size_t p = 0; p < pool.size(); ++p)
                        if (pool[p] != domain[i]) {
                            picks[i] = p;
                            break;
                        }
                    continue;
                }
                for (std::size_t j = 0; j < n; ++j) {
                    if (j == i || pool[picks[j]] == domain[i]) continue;
                    std::swap(picks[i], picks[j]);
                    break;
                }
            }
        }
    }

    std::map<std::string, std::string> m;
    for (std::size_t i = 0; i < n; ++i) m[domain[i]] = pool[picks[i]];
    return m;
}

SubstitutionMap sample_substitution(const MathGraph& g, const AugmentConfig& cfg, Rng& rng) {
    std::set<std::string> var_set, num_set;
    for (const auto& node : g.nodes) {
        if (node.kind == NodeKind::Variable) var_set.insert(label_lexeme(node.label));
        if (node.kind == NodeKind::Number) num_set.insert(label_lexeme(node.label));
    }

    SubstitutionMap m;
    m.mode = cfg.mode;
    const std::vector<std::string> vars(var_set.begin(), var_set.end());
    m.vars = sample_injective_replacements(vars, cfg.var_pool, rng);

    // Numbers: independent uniform draw per distinct lexeme, avoiding the
    // identity when the pool has an alternative.
    if (!num_set.empty() && cfg.num_pool.empty())
        throw PoolTooSmallError("number pool is empty");
    for (const std::string& lex : num_set) {
        std::vector<std::string> candidates;
        for (const std::string& p : cfg.num_pool)
            if (p != lex) candidates.push_back(p);
        if (candidates.empty())
            m.nums[lex] = cfg.num_pool[0];
        else
            m.nums[lex] = candidates[rng.below(candidates.size())];
    }
    return m;
}

MathGraph apply_substitution(const MathGraph& g, const SubstitutionMap& m) {
    MathGraph out = g;
    for (auto& node : out.nodes) {
        if (node.kind == NodeKind::Variable) {
            const std::string lex = label_lexeme(node.label);
            const auto it = m.vars.find(lex);
            if (it == m.vars.end()) {
                if (m.mode == SubstitutionMode::Consistent)
                    throw IncompleteMapError("variable '" + lex + "' has no mapping");
                continue;
            }
            node.label = std::string(node_kind_prefix(node.kind)) + it->second;
        } else if (node.kind == NodeKind::Number) {
            const auto it = m.nums.find(label_lexeme(node.label));
            if (it != m.nums.end())
                node.label = std::string(node_kind_prefix(node.kind)) + it->second;
        }
    }
    return out;
}

MathGraph per_node_substitute(const MathGraph& g, const AugmentConfig& cfg, Rng& rng) {
    MathGraph out = g;
    auto draw = [&rng](const std::vector<std::string>& pool, const std::string& lex) {
        std::vector<std::string> candidates;
        for (const std::string& p : pool)
            if (p != lex) candidates.push_back(p);
        if (candidates.empty()) return pool.empty() ? lex : pool[0];
        return candidates[rng.below(candidates.size())];
    };
    for (auto& node : out.nodes) {
        if (node.kind == NodeKind::Variable) {
            if (cfg.var_pool.empty()) throw PoolTooSmallError("variable pool is empty");
            node.label = std::string(node_kind_prefix(node.kind)) +
                         draw(cfg.var_pool, label_lexeme(node.label));
        } else if (node.kind == NodeKind::Number) {
            if (cfg.num_pool.empty()) throw PoolTooSmallError("number pool is empty");
            node.label = std::string(node_kind_prefix(node.kind)) +
                         draw(cfg.num_pool, label_lexeme(node.label));
        }
    }
    return out;
}

namespace {

// Uniform sample of k non-root node ids to remove, k = min(floor(ratio|V|), |V|-1).
std::vector<std::size_t> sample_node_removals(const MathGraph& g, double ratio, Rng& rng) {
    if (g.nodes.size() <= 1) return {};
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        if (i != g.root) candidates.push_back(i);
    const std::size_t k =
        std::min(drop_count(ratio, g.nodes.size()), g.nodes.size() - 1);
    std::vector<std::size_t> picked;
    for (std::size_t pos : sample_indices(candidates.size(), k, rng))
        picked.push_back(candidates[pos]);
    return sorted(std::move(picked));
}

std::vector<std::size_t> sample_edge_removals(const MathGraph& g, double ratio, Rng& rng) {
    const std::size_t k = drop_count(ratio, g.edges.size());
    return sorted(sample_indices(g.edges.size(), k, rng));
}

struct NodeDropPlan {
    std::vector<bool> remove_node;
    std::vector<bool> remove_edge;
    std::vector<uint32_t> new_id;  // old -> new for survivors
};

NodeDropPlan plan_node_drop(const MathGraph& g, const std::vector<std::size_t>& removals) {
    NodeDropPlan plan;
    plan.remove_node.assign(g.nodes.size(), false);
    for (std::size_t i : removals) plan.remove_node[i] = true;
    plan.remove_edge.assign(g.edges.size(), false);
    for (std::size_t j = 0; j < g.edges.size(); ++j)
        if (plan.remove_node[g.edges[j].src] || plan.remove_node[g.edges[j].dst])
            plan.remove_edge[j] = true;
    plan.new_id.assign(g.nodes.size(), 0);
    uint32_t next = 0;
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        if (!plan.remove_node[i]) plan.new_id[i] = next++;
    return plan;
}

MathGraph apply_node_drop(const MathGraph& g, const NodeDropPlan& plan) {
    MathGraph out;
    out.kind = g.kind;
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        if (!plan.remove_node[i]) out.nodes.push_back(g.nodes[i]);
    for (std::size_t j = 0; j < g.edges.size(); ++j)
        if (!plan.remove_edge[j])
            out.edges.push_back(
                {plan.new_id[g.edges[j].src], plan.new_id[g.edges[j].dst], g.edges[j].label});
    out.root = plan.new_id[g.root];
    return out;
}

MathGraph apply_edge_drop(const MathGraph& g, const std::vector<std::size_t>& removals) {
    std::vector<bool> remove(g.edges.size(), false);
    for (std::size_t j : removals) remove[j] = true;
    MathGraph out;
    out.kind = g.kind;
    out.nodes = g.nodes;
    out.root = g.root;
    for (std::size_t j = 0; j < g.edges.size(); ++j)
        if (!remove[j]) out.edges.push_back(g.edges[j]);
    return out;
}

}  // namespace

MathGraph node_drop(const MathGraph& g, double ratio, Rng& rng) {
    return apply_node_drop(g, plan_node_drop(g, sample_node_removals(g, ratio, rng)));
}

MathGraph edge_drop(const MathGraph& g, double ratio, Rng& rng) {
    return apply_edge_drop(g, sample_edge_removals(g, ratio, rng));
}

FeaturedGraph node_feature_mask(const FeaturedGraph& fg, double ratio, Rng& rng) {
    FeaturedGraph out = fg;
    const std::size_t k = drop_count(ratio, fg.graph.nodes.size());
    for (std::size_t i : sample_indices(fg.graph.nodes.size(), k, rng)) {
        double* row = out.node_features.row(i);
        std::fill(row, row + out.node_features.cols, 0.0);
    }
    return out;
}

FeaturedGraph edge_feature_mask(const FeaturedGraph& fg, double ratio, Rng& rng) {
    FeaturedGraph out = fg;
    const std::size_t k = drop_count(ratio, fg.graph.edges.size());
    for (std::size_t j : sample_indices(fg.graph.edges.size(), k, rng)) {
        double* row = out.edge_features.row(j);
        std::fill(row, row + out.edge_features.cols, 0.0);
    }
    return out;
}

namespace {

FeaturedGraph featured_node_drop(const FeaturedGraph& fg, double ratio, Rng& rng) {
    const NodeDropPlan plan = plan_node_drop(fg.graph, sample_node_removals(fg.graph, ratio, rng));
    FeaturedGraph out;
    out.graph = apply_node_drop(fg.graph, plan);
    out.node_features = Matrix(out.graph.nodes.size(), fg.node_features.cols);
    std::size_t next = 0;
    for (std::size_t i = 0; i < fg.graph.nodes.size(); ++i)
        if (!plan.remove_node[i])
            std::copy(fg.node_features.row(i), fg.node_features.row(i) + fg.node_features.cols,
                      out.node_features.row(next++));
    out.edge_features = Matrix(out.graph.edges.size(), fg.edge_features.cols);
    next = 0;
    for (std::size_t j = 0; j < fg.graph.edges.size(); ++j)
        if (!plan.remove_edge[j])
            std::copy(fg.edge_features.row(j), fg.edge_features.row(j) + fg.edge_features.cols,
                      out.edge_features.row(next++));
    return out;
}

FeaturedGraph featured_edge_drop(const FeaturedGraph& fg, double ratio, Rng& rng) {
    const auto removals = sample_edge_removals(fg.graph, ratio, rng);
    std::vector<bool> remove(fg.graph.edges.size(), false);
    for (std::size_t j : removals) remove[j] = true;
    FeaturedGraph out;
    out.graph = apply_edge_drop(fg.graph, removals);
    out.node_features = fg.node_features;
    out.edge_features = Matrix(out.graph.edges.size(), fg.edge_features.cols);
    std::size_t next = 0;
    for (std::size_t j = 0; j < fg.graph.edges.size(); ++j)
        if (!remove[j])
            std::copy(fg.edge_features.row(j), fg.edge_features.row(j) + fg.edge_features.cols,
                      out.edge_features.row(next++));
    return out;
}

FeaturedGraph featured_var_sub(const FeaturedGraph& fg, const AugmentConfig& cfg,
                               const LabelFeatures& feats, Rng& rng) {
    FeaturedGraph out = fg;
    if (cfg.mode == SubstitutionMode::Consistent) {
        const SubstitutionMap m = sample_substitution(fg.graph, cfg, rng);
        out.graph = apply_substitution(fg.graph, m);
    } else {
        out.graph = per_node_substitute(fg.graph, cfg, rng);
    }
    for (std::size_t i = 0; i < out.graph.nodes.size(); ++i) {
        if (out.graph.nodes[i].label == fg.graph.nodes[i].label) continue;
        const Vec& v = feats.get(out.graph.nodes[i].label);
        std::copy(v.begin(), v.end(), out.node_features.row(i));
    }
    return out;
}

}  // namespace

FeaturedGraph augment(const FeaturedGraph& fg, const AugmentConfig& cfg,
                      const LabelFeatures& feats, Rng& rng) {
    switch (cfg.strategy) {
        case AugmentStrategy::Identity: return fg;
        case AugmentStrategy::VarSub: return featured_var_sub(fg, cfg, feats, rng);
        case AugmentStrategy::NodeDrop: return featured_node_drop(fg, cfg.ratio, rng);
        case AugmentStrategy::EdgeDrop: return featured_edge_drop(fg, cfg.ratio, rng);
        case AugmentStrategy::NodeFeatureMask: return node_feature_mask(fg, cfg.ratio, rng);
        case AugmentStrategy::EdgeFeatureMask: return edge_feature_mask(fg, cfg.ratio, rng);
        case AugmentStrategy::Random: {
            static constexpr AugmentStrategy kGeneric[4] = {
                AugmentStrategy::NodeDrop, AugmentStrategy::EdgeDrop,
                AugmentStrategy::NodeFeatureMask, AugmentStrategy::EdgeFeatureMask};
            AugmentConfig picked = cfg;
            picked.strategy = kGeneric[rng.below(4)];
            return augment(fg, picked, feats, rng);
        }
    }
    throw Error("unknown augmentation strategy");
}

const char* strategy_name(AugmentStrategy s) {
    switch (s) {
        case AugmentStrategy::VarSub: return "varsub";
        case AugmentStrategy::NodeDrop: return "nodedrop";
        case AugmentStrategy::EdgeDrop: return "edgedrop";
        case AugmentStrategy::NodeFeatureMask: return "nodefeaturemask";
        case AugmentStrategy::EdgeFeatureMask: return "edgefeaturemask";
        case AugmentStrategy::Random: return "random";
        case AugmentStrategy::Identity: return "identity";
    }
    return "?";
}

AugmentStrategy strategy_from_name(const std::string& name) {
    for (AugmentStrategy s :
         {AugmentStrategy::VarSub, AugmentStrategy::NodeDrop, AugmentStrategy::EdgeDrop,
          AugmentStrategy::NodeFeatureMask, AugmentStrategy::EdgeFeatureMask,
          AugmentStrategy::Random, AugmentStrategy::Identity})
        if (name == strategy_name(s)) return s;
    throw ConfigError("unknown augmentation strategy: " + name);
}

}  // namespace fgcl

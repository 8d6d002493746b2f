#pragma once

#include <map>
#include <string>
#include <vector>

#include "fgcl/formula.hpp"
#include "fgcl/rng.hpp"
#include "fgcl/token_embed.hpp"

namespace fgcl {

enum class AugmentStrategy : uint8_t {
    VarSub,
    NodeDrop,
    EdgeDrop,
    NodeFeatureMask,
    EdgeFeatureMask,
    Random,
    Identity
};

enum class SubstitutionMode : uint8_t { Consistent, PerNode };

struct AugmentConfig {
    AugmentStrategy strategy = AugmentStrategy::VarSub;
    double ratio = 0.2;  // drop/mask strategies
    std::vector<std::string> var_pool = default_var_pool();
    std::vector<std::string> num_pool = default_num_pool();
    SubstitutionMode mode = SubstitutionMode::Consistent;

    static std::vector<std::string> default_var_pool();  // a..z
    static std::vector<std::string> default_num_pool();  // 0..9
};

struct SubstitutionMap {
    std::map<std::string, std::string> vars;  // original lexeme -> replacement
    std::map<std::string, std::string> nums;
    SubstitutionMode mode = SubstitutionMode::Consistent;
};

// Injective map from `domain` into `pool`, avoiding fixed points whenever the
// pool allows (pool size > 1). Throws PoolTooSmallError when |pool| < |domain|.
// Shared by graph substitution and the synthetic benchmark's alpha-renamer.
std::map<std::string, std::string> sample_injective_replacements(
    const std::vector<std::string>& domain, const std::vector<std::string>& pool, Rng& rng);

// Consistent-mode map over the graph's distinct variable lexemes; numbers are
// mapped independently per distinct lexeme.
SubstitutionMap sample_substitution(const MathGraph& g, const AugmentConfig& cfg, Rng& rng);

// Rewrites Variable/Number lexemes only; ids, kinds, edges and root are
// untouched. Consistent mode requires every variable lexeme to be mapped.
MathGraph apply_substitution(const MathGraph& g, const SubstitutionMap& m);

// Per-node independent substitution (ablation mode): each Variable/Number node
// gets its own draw, so repeated occurrences of one lexeme may diverge.
MathGraph per_node_substitute(const MathGraph& g, const AugmentConfig& cfg, Rng& rng);

// Removes min(floor(ratio*|V|), |V|-1) uniformly sampled non-root nodes with
// their incident edges; surviving nodes are re-indexed densely in order.
MathGraph node_drop(const MathGraph& g, double ratio, Rng& rng);

// Removes floor(ratio*|E|) uniformly sampled edges; nodes untouched.
MathGraph edge_drop(const MathGraph& g, double ratio, Rng& rng);

// Zeroes the feature rows of floor(ratio*|V|) sampled nodes.
FeaturedGraph node_feature_mask(const FeaturedGraph& fg, double ratio, Rng& rng);

// Zeroes the feature rows of floor(ratio*|E|) sampled edges.
FeaturedGraph edge_feature_mask(const FeaturedGraph& fg, double ratio, Rng& rng);

// Strategy dispatcher. Random picks uniformly among the four generic
// strategies (VarSub excluded) per call. VarSub re-featurizes substituted
// nodes from `feats`, which must cover the replacement pools.
FeaturedGraph augment(const FeaturedGraph& fg, const AugmentConfig& cfg,
                      const LabelFeatures& feats, Rng& rng);

const char* strategy_name(AugmentStrategy s);
AugmentStrategy strategy_from_name(const std::string& name);

}  // namespace fgcl

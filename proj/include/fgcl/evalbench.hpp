#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "fgcl/encoder.hpp"
#include "fgcl/formula.hpp"
#include "fgcl/retrieval.hpp"
#include "fgcl/rng.hpp"

namespace fgcl {

// ---------------------------------------------------------------------------
// Graded judgments and bpref.
// ---------------------------------------------------------------------------

struct QRels {
    // qid -> docid -> score in {0..4}
    std::map<std::string, std::map<std::string, int>> judgments;
};

// TREC qrels format: "qid 0 docid score".
QRels load_qrels(const std::string& path);
void write_qrels(const QRels& qrels, const std::string& path);

enum class RelevanceSetting : uint8_t { Full, Partial };
const char* setting_name(RelevanceSetting s);

struct BinaryJudgments {
    std::set<std::string> relevant;
    std::set<std::string> nonrelevant;  // judged non-relevant; unjudged in neither
};

// Full: score >= 3 relevant; Partial: score >= 1 relevant, 0 non-relevant.
std::map<std::string, BinaryJudgments> binarize(const QRels& qrels, RelevanceSetting setting);

// TREC bpref. Relevant documents missing from the ranking contribute 0;
// unjudged documents are ignored; with no judged non-relevant documents every
// retrieved relevant one contributes 1. Throws NoRelevantJudgmentsError when
// `relevant` is empty.
double bpref(const RankedList& ranking, const std::set<std::string>& relevant,
             const std::set<std::string>& nonrelevant);

struct EvalSummary {
    double mean_bpref = 0.0;  // macro average over evaluated queries
    std::size_t evaluated = 0;
    std::size_t skipped = 0;  // queries with no relevant judgments
};

EvalSummary evaluate_run(const std::vector<RankedList>& runs, const QRels& qrels,
                         RelevanceSetting setting);

// ---------------------------------------------------------------------------
// Synthetic benchmark.
// ---------------------------------------------------------------------------

// Grammar-shaped random AST whose unparse re-parses to the same tree.
FormulaAst random_formula(Rng& rng, uint32_t max_depth);

// Consistent alpha-renaming at the AST level: fresh injective variable choices
// plus per-lexeme number swaps.
FormulaAst alpha_rename(const FormulaAst& ast, const std::vector<std::string>& var_pool,
                        const std::vector<std::string>& num_pool, Rng& rng);

// Changes exactly one operator (binary op or function name). The input must
// contain at least one.
FormulaAst perturb_operator(const FormulaAst& ast, Rng& rng);

struct SynthConfig {
    uint32_t bases = 200;
    uint32_t variants_per_base = 4;  // alpha-renamings, score 3
    uint32_t total = 1000;           // corpus size incl. near-misses and distractors
    uint32_t max_depth = 4;
    uint32_t zeros_per_query = 3;    // score-0 judgments per query
};

// Writes corpus, queries and qrels files. Per base: variants_per_base
// renamings at score 3, one operator-perturbed near-miss at score 1, plus
// zeros_per_query score-0 judgments on other bases' documents; random
// distractors fill the corpus up to `total`.
void generate_synthetic_benchmark(const SynthConfig& cfg, uint64_t seed,
                                  const std::string& corpus_path,
                                  const std::string& queries_path,
                                  const std::string& qrels_path);

// ---------------------------------------------------------------------------
// Experiment grid (strategies x batch sizes x seeds, per layout).
// ---------------------------------------------------------------------------

enum class GridStrategy : uint8_t {
    VarSub,
    NodeDrop,
    EdgeDrop,
    NodeFeatureMask,
    EdgeFeatureMask,
    Random,
    Baseline
};

const char* grid_strategy_name(GridStrategy s);
GridStrategy grid_strategy_from_name(const std::string& name);

struct ExperimentGrid {
    std::vector<GraphKind> layouts = {GraphKind::Slt, GraphKind::Opt};
    std::vector<GridStrategy> strategies = {
        GridStrategy::VarSub,          GridStrategy::NodeDrop,
        GridStrategy::EdgeDrop,        GridStrategy::NodeFeatureMask,
        GridStrategy::EdgeFeatureMask, GridStrategy::Random,
        GridStrategy::Baseline};
    std::vector<uint32_t> batch_sizes = {16, 32, 64, 128};
    uint32_t num_seeds = 5;
    uint64_t seed = 42;
    TrainConfig train;  // shared template; batch size and seed set per cell
    EmbedConfig embed;
    uint32_t threads = 0;  // 0 = hardware concurrency
};

struct ResultRow {
    GraphKind layout;
    RelevanceSetting setting;
    GridStrategy strategy;
    uint32_t batch_size;
    uint32_t seed;  // seed index within the grid
    double bpref;
};

struct ResultsTable {
    std::vector<ResultRow> rows;
};

// Trains (except Baseline), indexes and evaluates every grid cell under both
// relevance settings. Cell seeds derive from (grid seed, coordinates), so a
// rerun of any single cell reproduces its rows exactly.
ResultsTable run_experiment(const ExperimentGrid& grid, const std::vector<CorpusEntry>& corpus,
                            const std::vector<CorpusEntry>& queries, const QRels& qrels);

struct CellStats {
    double mean = 0.0;
    double stddev = 0.0;  // sample std over seeds (0 for a single seed)
    std::size_t count = 0;
};

using CellKey = std::tuple<GraphKind, RelevanceSetting, GridStrategy, uint32_t>;
std::map<CellKey, CellStats> summarize(const ResultsTable& results);

struct Heatmap {
    std::string text;  // strategies x batch sizes grid of mean bpref, 3 decimals
    std::string csv;
};

// Throws MissingCellError (naming the coordinates) when the strategy/batch
// axes present in the results are not fully covered.
Heatmap render_heatmap(const ResultsTable& results, GraphKind layout, RelevanceSetting setting);

// CSV with header layout,setting,augmentation,batch_size,seed,bpref.
void write_results_csv(const ResultsTable& results, const std::string& path);
std::string results_csv_string(const ResultsTable& results);

// CSV with header layout,setting,augmentation,batch_size,mean_bpref,std_bpref.
void write_summary_csv(const ResultsTable& results, const std::string& path);

const char* layout_name(GraphKind kind);
GraphKind layout_from_name(const std::string& name);

}  // namespace fgcl

#pragma once

#include <string>
#include <vector>

#include "fgcl/encoder.hpp"
#include "fgcl/evalbench.hpp"
#include "fgcl/token_embed.hpp"

namespace fgcl {

// One config file drives every pipeline stage; each key also exists as a
// --key=value command-line override.
struct RunConfig {
    std::string corpus;
    std::string queries;
    std::string qrels;
    std::string workdir = ".";
    GraphKind layout = GraphKind::Slt;
    uint64_t seed = 42;
    uint32_t threads = 0;

    EmbedConfig embed;
    TrainConfig train;

    std::vector<GraphKind> grid_layouts = {GraphKind::Slt, GraphKind::Opt};
    std::vector<GridStrategy> grid_strategies = {
        GridStrategy::VarSub,          GridStrategy::NodeDrop,
        GridStrategy::EdgeDrop,        GridStrategy::NodeFeatureMask,
        GridStrategy::EdgeFeatureMask, GridStrategy::Random,
        GridStrategy::Baseline};
    std::vector<uint32_t> grid_batch_sizes = {16, 32, 64, 128};
    uint32_t grid_seeds = 5;

    SynthConfig synth;

    bool baseline = false;  // `index`/`query` use the untrained baseline embedder
    std::string run_tag = "fgcl";

    // Artifact paths; empty means a workdir default.
    std::string table_file;
    std::string checkpoint_file;
    std::string index_file;
    std::string run_file;
    std::string results_csv;
    std::string loss_csv;

    std::string corpus_path() const { return ordefault(corpus, "corpus.jsonl"); }
    std::string queries_path() const { return ordefault(queries, "queries.jsonl"); }
    std::string qrels_path() const { return ordefault(qrels, "qrels.txt"); }
    std::string table_path() const { return ordefault(table_file, "tokens.temb"); }
    std::string checkpoint_path() const { return ordefault(checkpoint_file, "encoder.fgcl"); }
    std::string index_path() const { return ordefault(index_file, "formulas.fidx"); }
    std::string run_path() const { return ordefault(run_file, "results.run"); }
    std::string results_csv_path() const { return ordefault(results_csv, "results.csv"); }
    std::string loss_csv_path() const { return ordefault(loss_csv, "loss_history.csv"); }

  private:
    std::string ordefault(const std::string& value, const char* name) const {
        return value.empty() ? workdir + "/" + name : value;
    }
};

// All recognized keys, in declaration order (used to register CLI overrides).
const std::vector<std::string>& config_keys();

// Applies one key=value pair; throws ConfigError on unknown keys or bad values.
void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value);

// Plain-text key = value file; '#' comments and blank lines skipped.
RunConfig load_config_file(const std::string& path);

ExperimentGrid grid_from_config(const RunConfig& cfg);

}  // namespace fgcl

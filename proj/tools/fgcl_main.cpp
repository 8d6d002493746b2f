// Command-line driver for the formula retrieval pipeline: offline stages
// (synth, train-tokens, train-gcl, index), the online query path, and the
// evaluation/benchmark commands.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "fgcl/config.hpp"
#include "fgcl/errors.hpp"
#include "fgcl/evalbench.hpp"
#include "fgcl/retrieval.hpp"

namespace fs = std::filesystem;
using namespace fgcl;

namespace {

int cmd_parse(const RunConfig& cfg, const std::string& formula) {
    const FormulaAst ast = parse_formula(formula);
    const MathGraph g = build_graph(ast, cfg.layout);
    std::cout << "layout " << layout_name(cfg.layout) << "\n";
    std::cout << "signature " << graph_signature(g) << "\n";
    std::cout << "nodes " << g.nodes.size() << "\n";
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        std::cout << "  " << i << " " << g.nodes[i].label << "\n";
    std::cout << "edges " << g.edges.size() << "\n";
    for (const GraphEdge& e : g.edges)
        std::cout << "  " << e.src << " -> " << e.dst << " " << e.label << "\n";
    std::cout << "root " << g.root << "\n";
    return 0;
}

int cmd_synth(const RunConfig& cfg) {
    fs::create_directories(cfg.workdir);
    generate_synthetic_benchmark(cfg.synth, cfg.seed, cfg.corpus_path(), cfg.queries_path(),
                                 cfg.qrels_path());
    std::cout << "corpus " << cfg.corpus_path() << " (" << cfg.synth.total << " formulas)\n";
    std::cout << "queries " << cfg.queries_path() << " (" << cfg.synth.bases << ")\n";
    std::cout << "qrels " << cfg.qrels_path() << "\n";
    return 0;
}

std::vector<MathGraph> corpus_graphs(const std::vector<CorpusEntry>& corpus, GraphKind layout) {
    std::vector<MathGraph> graphs;
    graphs.reserve(corpus.size());
    for (const CorpusEntry& e : corpus) graphs.push_back(build_graph(e.ast, layout));
    return graphs;
}

int cmd_train_tokens(const RunConfig& cfg) {
    const auto corpus = load_corpus(cfg.corpus_path());
    const auto graphs = corpus_graphs(corpus, cfg.layout);
    Rng walk_rng(Rng::mix(cfg.seed, 1));
    std::vector<Walk> walks;
    for (const MathGraph& g : graphs) {
        auto w = sample_walks(g, cfg.embed.walks_per_node, cfg.embed.walk_max_len, walk_rng);
        walks.insert(walks.end(), std::make_move_iterator(w.begin()),
                     std::make_move_iterator(w.end()));
    }
    const Vocabulary vocab = build_vocab(walks, cfg.embed.min_count);
    std::vector<double> losses;
    const EmbeddingTable table =
        train_token_embeddings(walks, vocab, cfg.embed, Rng::mix(cfg.seed, 2), &losses);
    fs::create_directories(fs::path(cfg.table_path()).parent_path().empty()
                               ? "."
                               : fs::path(cfg.table_path()).parent_path().string());
    save_table(table, cfg.table_path());
    std::cout << "vocab " << vocab.size() << "\n";
    std::cout << "walks " << walks.size() << "\n";
    if (losses.empty())
        std::cout << "final_loss n/a (0 epochs)\n";
    else
        std::cout << "final_loss " << losses.back() << "\n";
    std::cout << "table " << cfg.table_path() << "\n";
    return 0;
}

int cmd_train_gcl(const RunConfig& cfg) {
    const auto corpus = load_corpus(cfg.corpus_path());
    const auto graphs = corpus_graphs(corpus, cfg.layout);
    const EmbeddingTable table = load_table(cfg.table_path());
    TrainConfig train = cfg.train;
    train.seed = cfg.seed;
    const TrainResult result = train_gcl(graphs, table, train, cfg.embed.edge_dim);

    Checkpoint ckpt{result.params, train, result.epoch_loss};
    save_checkpoint(ckpt, cfg.checkpoint_path());

    std::ofstream loss_out(cfg.loss_csv_path(), std::ios::trunc);
    if (!loss_out) throw IoError("cannot open for writing: " + cfg.loss_csv_path());
    loss_out << "epoch,loss\n";
    char buf[32];
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
        std::snprintf(buf, sizeof buf, "%.6f", result.epoch_loss[e]);
        loss_out << e << "," << buf << "\n";
    }

    std::cout << "checkpoint " << cfg.checkpoint_path() << " (id " << checkpoint_id(result.params)
              << ")\n";
    if (!result.epoch_loss.empty())
        std::cout << "final_loss " << result.epoch_loss.back() << "\n";
    std::cout << "loss_history " << cfg.loss_csv_path() << "\n";
    return 0;
}

int cmd_index(const RunConfig& cfg) {
    const auto corpus = load_corpus(cfg.corpus_path());
    const EmbeddingTable table = load_table(cfg.table_path());
    Embedder emb;
    emb.table = &table;
    emb.layout = cfg.layout;
    emb.edge_dim = cfg.embed.edge_dim;
    Checkpoint ckpt;
    if (!cfg.baseline) {
        ckpt = load_checkpoint(cfg.checkpoint_path());
        emb.params = &ckpt.params;
    }
    const FormulaIndex index = build_index(corpus, emb);
    save_index(index, cfg.index_path());
    std::cout << "index " << cfg.index_path() << " (" << index.ids.size() << " rows, dim "
              << index.dim << ", checkpoint " << index.provenance.checkpoint_id << ")\n";
    return 0;
}

int cmd_query(const RunConfig& cfg, const std::string& formula, std::size_t k) {
    const FormulaIndex index = load_index(cfg.index_path());
    const EmbeddingTable table = load_table(cfg.table_path());
    Embedder emb;
    emb.table = &table;
    emb.layout = index.provenance.layout;
    emb.edge_dim = cfg.embed.edge_dim;
    Checkpoint ckpt;
    if (!cfg.baseline) {
        ckpt = load_checkpoint(cfg.checkpoint_path());
        emb.params = &ckpt.params;
    }
    const RankedList rl = query(index, emb, "query", formula, k);
    char buf[32];
    for (std::size_t r = 0; r < rl.results.size(); ++r) {
        std::snprintf(buf, sizeof buf, "%.6f", rl.results[r].score);
        std::cout << (r + 1) << " " << rl.results[r].doc_id << " " << buf << "\n";
    }
    return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& setting_str) {
    RelevanceSetting setting;
    if (setting_str == "full")
        setting = RelevanceSetting::Full;
    else if (setting_str == "partial")
        setting = RelevanceSetting::Partial;
    else
        throw ConfigError("setting must be 'full' or 'partial', got '" + setting_str + "'");
    const auto runs = read_run(cfg.run_path());
    const QRels qrels = load_qrels(cfg.qrels_path());
    const EvalSummary s = evaluate_run(runs, qrels, setting);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", s.mean_bpref);
    std::cout << "bpref " << buf << "\n";
    std::cout << "queries " << s.evaluated << " evaluated, " << s.skipped
              << " skipped (no relevant judgments)\n";
    return 0;
}

int cmd_bench(const RunConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto corpus = load_corpus(cfg.corpus_path());
    const auto queries = load_corpus(cfg.queries_path());
    const QRels qrels = load_qrels(cfg.qrels_path());
    const ExperimentGrid grid = grid_from_config(cfg);
    const ResultsTable results = run_experiment(grid, corpus, queries, qrels);

    fs::create_directories(cfg.workdir);
    write_results_csv(results, cfg.results_csv_path());
    write_summary_csv(results, cfg.workdir + "/summary.csv");
    for (GraphKind layout : grid.layouts) {
        for (RelevanceSetting setting : {RelevanceSetting::Full, RelevanceSetting::Partial}) {
            const Heatmap hm = render_heatmap(results, layout, setting);
            const std::string stem = cfg.workdir + "/heatmap_" + layout_name(layout) + "_" +
                                     setting_name(setting);
            std::ofstream(stem + ".txt", std::ios::trunc) << hm.text;
            std::ofstream(stem + ".csv", std::ios::trunc) << hm.csv;
            std::cout << hm.text << "\n";
        }
    }
    const auto elapsed =
        std::chrono::duration_cast<std::chrono::seconds>(std::chrono::steady_clock::now() - t0);
    std::cout << "rows " << results.rows.size() << "\n";
    std::cout << "results " << cfg.results_csv_path() << "\n";
    std::cout << "elapsed " << elapsed.count() << "s\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"math formula retrieval with graph contrastive learning"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    app.add_option("--config", config_path, "config file (key = value lines)");

    // Every config key is also a flag: --key value.
    std::map<std::string, std::string> overrides;
    for (const std::string& key : config_keys()) {
        app.add_option_function<std::string>(
            "--" + key, [&overrides, key](const std::string& v) { overrides[key] = v; });
    }

    auto* sub_parse = app.add_subcommand("parse", "parse a formula and print its graph");
    std::string formula;
    sub_parse->add_option("formula", formula, "LaTeX-subset formula")->required();

    auto* sub_synth = app.add_subcommand("synth", "generate the synthetic benchmark");
    auto* sub_tokens = app.add_subcommand("train-tokens", "train token embeddings");
    auto* sub_gcl = app.add_subcommand("train-gcl", "train the contrastive encoder");
    auto* sub_index = app.add_subcommand("index", "embed the corpus into an index");

    auto* sub_query = app.add_subcommand("query", "rank the corpus against a formula");
    std::string query_formula;
    std::size_t top_k = 10;
    sub_query->add_option("formula", query_formula, "query formula")->required();
    sub_query->add_option("-k", top_k, "result count")->capture_default_str();

    auto* sub_eval = app.add_subcommand("eval", "bpref of a run file against qrels");
    std::string setting = "full";
    sub_eval->add_option("--setting", setting, "full | partial")->capture_default_str();

    auto* sub_bench = app.add_subcommand("bench", "augmentation x batch-size experiment grid");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) cfg = load_config_file(config_path);
        for (const auto& [key, value] : overrides) apply_config_kv(cfg, key, value);
        cfg.train.seed = cfg.seed;

        if (sub_parse->parsed()) return cmd_parse(cfg, formula);
        if (sub_synth->parsed()) return cmd_synth(cfg);
        if (sub_tokens->parsed()) return cmd_train_tokens(cfg);
        if (sub_gcl->parsed()) return cmd_train_gcl(cfg);
        if (sub_index->parsed()) return cmd_index(cfg);
        if (sub_query->parsed()) return cmd_query(cfg, query_formula, top_k);
        if (sub_eval->parsed()) return cmd_eval(cfg, setting);
        if (sub_bench->parsed()) return cmd_bench(cfg);
        return 2;
    } catch (const ProvenanceMismatchError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const VersionMismatchError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const CorruptFileError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

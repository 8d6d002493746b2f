#include "fgcl/evalbench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "fgcl/augment.hpp"

namespace fgcl {

QRels load_qrels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open qrels: " + path);
    QRels q;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string qid, iter, docid;
        long score;
        if (!(ss >> qid >> iter >> docid >> score))
            throw QrelsError("line " + std::to_string(lineno) + ": malformed qrels line");
        if (score < 0 || score > 4)
            throw QrelsError("line " + std::to_string(lineno) + ": score " +
                             std::to_string(score) + " out of range [0,4]");
        auto& per_query = q.judgments[qid];
        if (per_query.count(docid))
            throw DuplicateJudgmentError("duplicate judgment for (" + qid + ", " + docid + ")");
        per_query[docid] = static_cast<int>(score);
    }
    return q;
}

void write_qrels(const QRels& qrels, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    for (const auto& [qid, docs] : qrels.judgments)
        for (const auto& [docid, score] : docs)
            out << qid << " 0 " << docid << " " << score << "\n";
    if (!out) throw IoError("write failed: " + path);
}

const char* setting_name(RelevanceSetting s) {
    return s == RelevanceSetting::Full ? "full" : "partial";
}

std::map<std::string, BinaryJudgments> binarize(const QRels& qrels, RelevanceSetting setting) {
    std::map<std::string, BinaryJudgments> out;
    const int threshold = setting == RelevanceSetting::Full ? 3 : 1;
    for (const auto& [qid, docs] : qrels.judgments) {
        BinaryJudgments& b = out[qid];
        for (const auto& [docid, score] : docs) {
            if (score >= threshold)
                b.relevant.insert(docid);
            else
                b.nonrelevant.insert(docid);
        }
    }
    return out;
}

double bpref(const RankedList& ranking, const std::set<std::string>& relevant,
             const std::set<std::string>& nonrelevant) {
    if (relevant.empty())
        throw NoRelevantJudgmentsError("query '" + ranking.query_id +
                                       "' has no relevant judgments");
    const double r_count = static_cast<double>(relevant.size());
    const double n_count = static_cast<double>(nonrelevant.size());
    const double denom = std::min(r_count, n_count);

    double sum = 0.0;
    std::size_t nonrel_above = 0;
    for (const RankedResult& res : ranking.results) {
        if (relevant.count(res.doc_id)) {
            if (nonrelevant.empty()) {
                sum += 1.0;
            } else {
                const double capped =
                    std::min(static_cast<double>(nonrel_above), denom);
                sum += 1.0 - capped / denom;
            }
        } else if (nonrelevant.count(res.doc_id)) {
            ++nonrel_above;
        }
        // unjudged documents are ignored
    }
    return sum / r_count;
}

EvalSummary evaluate_run(const std::vector<RankedList>& runs, const QRels& qrels,
                         RelevanceSetting setting) {
    const auto binarized = binarize(qrels, setting);
    EvalSummary s;
    double sum = 0.0;
    for (const RankedList& rl : runs) {
        const auto it = binarized.find(rl.query_id);
        if (it == binarized.end() || it->second.relevant.empty()) {
            ++s.skipped;
            continue;
        }
        sum += bpref(rl, it->second.relevant, it->second.nonrelevant);
        ++s.evaluated;
    }
    s.mean_bpref = s.evaluated ? sum / static_cast<double>(s.evaluated) : 0.0;
    return s;
}

// ---------------------------------------------------------------------------
// Synthetic benchmark.
// ---------------------------------------------------------------------------

namespace {

std::string random_var(Rng& rng) {
    static const char* greek[] = {"alpha", "beta", "gamma", "lambda", "mu", "omega", "phi", "theta"};
    if (rng.below(100) < 15) return greek[rng.below(8)];
    return std::string(1, static_cast<char>('a' + rng.below(26)));
}

std::string random_num(Rng& rng) { return std::string(1, static_cast<char>('0' + rng.below(10))); }

FormulaAst gen_expr(Rng& rng, uint32_t depth);

FormulaAst gen_base(Rng& rng, uint32_t depth) {
    if (depth == 0) {
        if (rng.below(100) < 70) return {AstKind::Variable, random_var(rng), {}};
        return {AstKind::Number, random_num(rng), {}};
    }
    const uint64_t roll = rng.below(100);
    if (roll < 55) {
        if (rng.below(100) < 70) return {AstKind::Variable, random_var(rng), {}};
        return {AstKind::Number, random_num(rng), {}};
    }
    if (roll < 67) return {AstKind::Group, "", {gen_expr(rng, depth - 1)}};
    if (roll < 79)
        return {AstKind::Fraction, "", {gen_expr(rng, depth - 1), gen_expr(rng, depth - 1)}};
    if (roll < 88) return {AstKind::Sqrt, "", {gen_expr(rng, depth - 1)}};
    static const char* funcs[] = {"sin", "cos", "tan", "log", "exp"};
    return {AstKind::UnaryFunc, funcs[rng.below(5)], {gen_expr(rng, depth - 1)}};
}

FormulaAst gen_factor(Rng& rng, uint32_t depth) {
    FormulaAst b = gen_base(rng, depth);
    const bool sup = depth > 0 && rng.below(100) < 15;
    const bool sub = depth > 0 && rng.below(100) < 6;
    if (!sup && !sub) return b;
    FormulaAst script{AstKind::Script, "", {std::move(b)}};
    script.has_sup = sup;
    script.has_sub = sub;
    if (sup) script.children.push_back(gen_expr(rng, depth == 0 ? 0 : depth - 1));
    if (sub) script.children.push_back(gen_expr(rng, 0));
    return script;
}

FormulaAst gen_term(Rng& rng, uint32_t depth) {
    FormulaAst lhs = gen_factor(rng, depth);
    const uint64_t extra = depth == 0 ? 0 : rng.below(2);
    for (uint64_t i = 0; i < extra; ++i) {
        const bool explicit_star = rng.below(100) < 50;
        FormulaAst rhs = gen_factor(rng, depth);
        lhs = FormulaAst{AstKind::BinaryOp, explicit_star ? "*" : "",
                         {std::move(lhs), std::move(rhs)}};
    }
    return lhs;
}

FormulaAst gen_expr(Rng& rng, uint32_t depth) {
    FormulaAst lhs = gen_term(rng, depth);
    const uint64_t extra = depth == 0 ? 0 : rng.below(3);
    for (uint64_t i = 0; i < extra; ++i) {
        const std::string op = rng.below(2) ? "+" : "-";
        FormulaAst rhs = gen_term(rng, depth);
        lhs = FormulaAst{AstKind::BinaryOp, op, {std::move(lhs), std::move(rhs)}};
    }
    return lhs;
}

void collect_lexemes(const FormulaAst& ast, std::set<std::string>& vars,
                     std::set<std::string>& nums) {
    if (ast.kind == AstKind::Variable) vars.insert(ast.lexeme);
    if (ast.kind == AstKind::Number) nums.insert(ast.lexeme);
    for (const FormulaAst& c : ast.children) collect_lexemes(c, vars, nums);
}

void apply_rename(FormulaAst& ast, const std::map<std::string, std::string>& vars,
                  const std::map<std::string, std::string>& nums) {
    if (ast.kind == AstKind::Variable) {
        const auto it = vars.find(ast.lexeme);
        if (it != vars.end()) ast.lexeme = it->second;
    } else if (ast.kind == AstKind::Number) {
        const auto it = nums.find(ast.lexeme);
        if (it != nums.end()) ast.lexeme = it->second;
    }
    for (FormulaAst& c : ast.children) apply_rename(c, vars, nums);
}

bool is_mutatable(const FormulaAst& ast) {
    return ast.kind == AstKind::BinaryOp || ast.kind == AstKind::UnaryFunc;
}

void collect_mutatable(FormulaAst& ast, std::vector<FormulaAst*>& out) {
    if (is_mutatable(ast)) out.push_back(&ast);
    for (FormulaAst& c : ast.children) collect_mutatable(c, out);
}

bool contains_operator(const FormulaAst& ast) {
    if (is_mutatable(ast)) return true;
    for (const FormulaAst& c : ast.children)
        if (contains_operator(c)) return true;
    return false;
}

// Benchmark formulas are kept small enough that the default a..z variable pool
// always covers their distinct lexemes (OPT subscript folds included) and the
// training cost per graph stays bounded.
bool benchmark_sized(const FormulaAst& ast) {
    const MathGraph slt = build_slt(ast);
    if (slt.nodes.size() > 36) return false;
    const MathGraph opt = build_opt(ast);
    for (const MathGraph* g : {&slt, &opt}) {
        std::set<std::string> vars;
        for (const GraphNode& n : g->nodes)
            if (n.kind == NodeKind::Variable) vars.insert(label_lexeme(n.label));
        if (vars.size() > 20) return false;
    }
    return true;
}

}  // namespace

FormulaAst random_formula(Rng& rng, uint32_t max_depth) {
    return gen_expr(rng, max_depth == 0 ? 0 : max_depth - 1);
}

FormulaAst alpha_rename(const FormulaAst& ast, const std::vector<std::string>& var_pool,
                        const std::vector<std::string>& num_pool, Rng& rng) {
    std::set<std::string> var_set, num_set;
    collect_lexemes(ast, var_set, num_set);
    const std::vector<std::string> vars(var_set.begin(), var_set.end());
    const auto var_map = sample_injective_replacements(vars, var_pool, rng);
    std::map<std::string, std::string> num_map;
    for (const std::string& lex : num_set) {
        std::vector<std::string> candidates;
        for (const std::string& p : num_pool)
            if (p != lex) candidates.push_back(p);
        num_map[lex] = candidates.empty() ? lex : candidates[rng.below(candidates.size())];
    }
    FormulaAst out = ast;
    apply_rename(out, var_map, num_map);
    return out;
}

FormulaAst perturb_operator(const FormulaAst& ast, Rng& rng) {
    FormulaAst out = ast;
    std::vector<FormulaAst*> nodes;
    collect_mutatable(out, nodes);
    if (nodes.empty()) throw Error("formula has no operator to perturb");
    FormulaAst* target = nodes[rng.below(nodes.size())];
    if (target->kind == AstKind::BinaryOp) {
        if (target->lexeme == "+") {
            target->lexeme = "-";
        } else if (target->lexeme == "-") {
            target->lexeme = "+";
        } else {
            target->lexeme = rng.below(2) ? "+" : "-";
        }
    } else {
        static const char* funcs[] = {"sin", "cos", "tan", "log", "exp"};
        std::vector<std::string> others;
        for (const char* f : funcs)
            if (target->lexeme != f) others.push_back(f);
        target->lexeme = others[rng.below(others.size())];
    }
    return out;
}

void generate_synthetic_benchmark(const SynthConfig& cfg, uint64_t seed,
                                  const std::string& corpus_path,
                                  const std::string& queries_path,
                                  const std::string& qrels_path) {
    if (cfg.bases < 1 || cfg.variants_per_base < 1 || cfg.total < 1)
        throw ConfigError("synthetic benchmark counts must be >= 1");
    const uint64_t per_base = static_cast<uint64_t>(cfg.variants_per_base) + 1;  // + near-miss
    if (static_cast<uint64_t>(cfg.bases) * per_base > cfg.total)
        throw ConfigError("total corpus size too small for bases * (variants + 1)");

    Rng rng(seed);
    const auto var_pool = AugmentConfig::default_var_pool();
    const auto num_pool = AugmentConfig::default_num_pool();

    std::vector<std::pair<std::string, std::string>> corpus;   // (docid, latex)
    std::vector<std::pair<std::string, std::string>> queries;  // (qid, latex)
    std::vector<int> owner;                                    // doc -> base index, -1 distractor
    QRels qrels;

    auto doc_id = [](std::size_t i) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "d%04zu", i + 1);
        return std::string(buf);
    };

    for (uint32_t b = 0; b < cfg.bases; ++b) {
        FormulaAst base;
        do {
            base = random_formula(rng, cfg.max_depth);
        } while (!contains_operator(base) || !benchmark_sized(base));

        char qbuf[16];
        std::snprintf(qbuf, sizeof qbuf, "q%03u", b + 1);
        const std::string qid(qbuf);
        queries.emplace_back(qid, unparse(base));

        std::set<std::string> seen;
        for (uint32_t v = 0; v < cfg.variants_per_base; ++v) {
            std::string latex;
            for (int attempt = 0; attempt < 10; ++attempt) {
                latex = unparse(alpha_rename(base, var_pool, num_pool, rng));
                if (!seen.count(latex)) break;
            }
            seen.insert(latex);
            const std::string id = doc_id(corpus.size());
            corpus.emplace_back(id, latex);
            owner.push_back(static_cast<int>(b));
            qrels.judgments[qid][id] = 3;
        }
        {
            const std::string id = doc_id(corpus.size());
            corpus.emplace_back(id, unparse(perturb_operator(base, rng)));
            owner.push_back(static_cast<int>(b));
            qrels.judgments[qid][id] = 1;
        }
    }

    while (corpus.size() < cfg.total) {
        FormulaAst distractor;
        do {
            distractor = random_formula(rng, cfg.max_depth);
        } while (!benchmark_sized(distractor));
        corpus.emplace_back(doc_id(corpus.size()), unparse(distractor));
        owner.push_back(-1);
    }

    // Score-0 judgments: documents belonging to other bases (or distractors).
    for (uint32_t b = 0; b < cfg.bases; ++b) {
        char qbuf[16];
        std::snprintf(qbuf, sizeof qbuf, "q%03u", b + 1);
        const std::string qid(qbuf);
        std::vector<std::size_t> candidates;
        for (std::size_t i = 0; i < corpus.size(); ++i)
            if (owner[i] != static_cast<int>(b)) candidates.push_back(i);
        const std::size_t want = std::min<std::size_t>(cfg.zeros_per_query, candidates.size());
        std::vector<std::size_t> chosen;
        for (std::size_t pick = 0; pick < want; ++pick) {
            const std::size_t j = pick + static_cast<std::size_t>(rng.below(candidates.size() - pick));
            std::swap(candidates[pick], candidates[j]);
            chosen.push_back(candidates[pick]);
        }
        std::sort(chosen.begin(), chosen.end());
        for (std::size_t i : chosen) qrels.judgments[qid][corpus[i].first] = 0;
    }

    write_corpus(corpus, corpus_path);
    write_corpus(queries, queries_path);
    write_qrels(qrels, qrels_path);
}

// ---------------------------------------------------------------------------
// Experiment grid.
// ---------------------------------------------------------------------------

const char* grid_strategy_name(GridStrategy s) {
    switch (s) {
        case GridStrategy::VarSub: return "varsub";
        case GridStrategy::NodeDrop: return "nodedrop";
        case GridStrategy::EdgeDrop: return "edgedrop";
        case GridStrategy::NodeFeatureMask: return "nodefeaturemask";
        case GridStrategy::EdgeFeatureMask: return "edgefeaturemask";
        case GridStrategy::Random: return "random";
        case GridStrategy::Baseline: return "baseline";
    }
    return "?";
}

GridStrategy grid_strategy_from_name(const std::string& name) {
    for (GridStrategy s : {GridStrategy::VarSub, GridStrategy::NodeDrop, GridStrategy::EdgeDrop,
                           GridStrategy::NodeFeatureMask, GridStrategy::EdgeFeatureMask,
                           GridStrategy::Random, GridStrategy::Baseline})
        if (name == grid_strategy_name(s)) return s;
    throw ConfigError("unknown grid strategy: " + name);
}

const char* layout_name(GraphKind kind) { return kind == GraphKind::Slt ? "slt" : "opt"; }

GraphKind layout_from_name(const std::string& name) {
    if (name == "slt") return GraphKind::Slt;
    if (name == "opt") return GraphKind::Opt;
    throw ConfigError("unknown layout: " + name);
}

namespace {

AugmentStrategy to_augment(GridStrategy s) {
    switch (s) {
        case GridStrategy::VarSub: return AugmentStrategy::VarSub;
        case GridStrategy::NodeDrop: return AugmentStrategy::NodeDrop;
        case GridStrategy::EdgeDrop: return AugmentStrategy::EdgeDrop;
        case GridStrategy::NodeFeatureMask: return AugmentStrategy::NodeFeatureMask;
        case GridStrategy::EdgeFeatureMask: return AugmentStrategy::EdgeFeatureMask;
        case GridStrategy::Random: return AugmentStrategy::Random;
        case GridStrategy::Baseline: break;
    }
    throw Error("baseline has no augmentation strategy");
}

// Shared per-layout state: token embeddings trained once per layout, then
// label features frozen and the table freed.
struct LayoutData {
    std::vector<MathGraph> corpus_graphs;
    std::vector<FeaturedGraph> corpus_featured;
    std::vector<MathGraph> query_graphs;
    std::vector<FeaturedGraph> query_featured;
    LabelFeatures feats;
};

LayoutData prepare_layout(GraphKind layout, const ExperimentGrid& grid,
                          const std::vector<CorpusEntry>& corpus,
                          const std::vector<CorpusEntry>& queries) {
    LayoutData data;
    data.corpus_graphs.reserve(corpus.size());
    for (const CorpusEntry& e : corpus) data.corpus_graphs.push_back(build_graph(e.ast, layout));
    data.query_graphs.reserve(queries.size());
    for (const CorpusEntry& e : queries) data.query_graphs.push_back(build_graph(e.ast, layout));

    const uint64_t layout_seed = Rng::mix(grid.seed, 0x10 + static_cast<uint64_t>(layout));
    Rng walk_rng(Rng::mix(layout_seed, 1));
    std::vector<Walk> walks;
    for (const MathGraph& g : data.corpus_graphs) {
        auto w = sample_walks(g, grid.embed.walks_per_node, grid.embed.walk_max_len, walk_rng);
        walks.insert(walks.end(), std::make_move_iterator(w.begin()),
                     std::make_move_iterator(w.end()));
    }
    const Vocabulary vocab = build_vocab(walks, grid.embed.min_count);
    {
        const EmbeddingTable table =
            train_token_embeddings(walks, vocab, grid.embed, Rng::mix(layout_seed, 2));
        std::vector<std::string> labels;
        for (const MathGraph& g : data.corpus_graphs) {
            auto ls = graph_labels(g);
            labels.insert(labels.end(), ls.begin(), ls.end());
        }
        for (const MathGraph& g : data.query_graphs) {
            auto ls = graph_labels(g);
            labels.insert(labels.end(), ls.begin(), ls.end());
        }
        for (const std::string& v : grid.train.augment.var_pool) labels.push_back("V!" + v);
        for (const std::string& n : grid.train.augment.num_pool) labels.push_back("N!" + n);
        data.feats.warm(table, labels);
    }

    data.corpus_featured.reserve(data.corpus_graphs.size());
    for (const MathGraph& g : data.corpus_graphs)
        data.corpus_featured.push_back(featurize_cached(g, data.feats, grid.embed.edge_dim));
    data.query_featured.reserve(data.query_graphs.size());
    for (const MathGraph& g : data.query_graphs)
        data.query_featured.push_back(featurize_cached(g, data.feats, grid.embed.edge_dim));
    return data;
}

// Index + rank + bpref for one parameter set (or the baseline when null).
std::pair<double, double> evaluate_cell(const EncoderParams* params, const LayoutData& data,
                                        const std::vector<CorpusEntry>& corpus,
                                        const std::vector<CorpusEntry>& queries,
                                        const QRels& qrels) {
    FormulaIndex index;
    index.provenance = {params ? checkpoint_id(*params) : "baseline", data.corpus_graphs.empty()
                                                                          ? GraphKind::Slt
                                                                          : data.corpus_graphs[0].kind};
    std::size_t dim = 0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const Vec v =
            params ? encode(*params, data.corpus_featured[i]) : baseline_embed(data.corpus_featured[i]);
        if (i == 0) {
            dim = v.size();
            index.dim = static_cast<uint32_t>(dim);
            index.rows = Matrix(0, index.dim);
        }
        index.ids.push_back(corpus[i].id);
        index.rows.data.insert(index.rows.data.end(), v.begin(), v.end());
        ++index.rows.rows;
    }

    std::vector<RankedList> runs;
    runs.reserve(queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const Vec q =
            params ? encode(*params, data.query_featured[i]) : baseline_embed(data.query_featured[i]);
        runs.push_back(rank_embedding(index, queries[i].id, q, corpus.size()));
    }

    const EvalSummary full = evaluate_run(runs, qrels, RelevanceSetting::Full);
    const EvalSummary partial = evaluate_run(runs, qrels, RelevanceSetting::Partial);
    return {full.mean_bpref, partial.mean_bpref};
}

}  // namespace

ResultsTable run_experiment(const ExperimentGrid& grid, const std::vector<CorpusEntry>& corpus,
                            const std::vector<CorpusEntry>& queries, const QRels& qrels) {
    if (grid.layouts.empty() || grid.strategies.empty() || grid.batch_sizes.empty() ||
        grid.num_seeds < 1)
        throw ConfigError("experiment grid has an empty axis");

    std::vector<LayoutData> layout_data;
    layout_data.reserve(grid.layouts.size());
    for (GraphKind layout : grid.layouts)
        layout_data.push_back(prepare_layout(layout, grid, corpus, queries));

    struct Cell {
        std::size_t layout_idx;
        GridStrategy strategy;
        uint32_t batch_size;
        uint32_t seed_idx;
    };
    std::vector<Cell> cells;
    for (std::size_t li = 0; li < grid.layouts.size(); ++li)
        for (GridStrategy s : grid.strategies)
            for (uint32_t b : grid.batch_sizes)
                for (uint32_t si = 0; si < grid.num_seeds; ++si) cells.push_back({li, s, b, si});

    // Two rows (full, partial) per cell, written into fixed slots so the
    // output order does not depend on thread scheduling.
    std::vector<std::pair<double, double>> scores(cells.size());

    auto run_cell = [&](std::size_t ci) {
        const Cell& cell = cells[ci];
        const GraphKind layout = grid.layouts[cell.layout_idx];
        const LayoutData& data = layout_data[cell.layout_idx];
        if (cell.strategy == GridStrategy::Baseline) {
            scores[ci] = evaluate_cell(nullptr, data, corpus, queries, qrels);
            return;
        }
        TrainConfig cfg = grid.train;
        cfg.batch_size = cell.batch_size;
        cfg.augment.strategy = to_augment(cell.strategy);
        uint64_t s = Rng::mix(grid.seed, 0x100 + static_cast<uint64_t>(layout));
        s = Rng::mix(s, static_cast<uint64_t>(cell.strategy));
        s = Rng::mix(s, cell.batch_size);
        cfg.seed = Rng::mix(s, cell.seed_idx);
        const TrainResult trained =
            train_gcl(data.corpus_graphs, data.feats, cfg, grid.embed.edge_dim);
        scores[ci] = evaluate_cell(&trained.params, data, corpus, queries, qrels);
    };

    unsigned workers = grid.threads ? grid.threads : std::thread::hardware_concurrency();
    if (workers < 1) workers = 1;
    workers = std::min<unsigned>(workers, cells.size());
    if (workers <= 1) {
        for (std::size_t ci = 0; ci < cells.size(); ++ci) run_cell(ci);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (;;) {
                    const std::size_t ci = next.fetch_add(1);
                    if (ci >= cells.size()) return;
                    run_cell(ci);
                }
            });
        for (std::thread& t : pool) t.join();
    }

    ResultsTable results;
    results.rows.reserve(cells.size() * 2);
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
        const Cell& cell = cells[ci];
        const GraphKind layout = grid.layouts[cell.layout_idx];
        results.rows.push_back({layout, RelevanceSetting::Full, cell.strategy, cell.batch_size,
                                cell.seed_idx, scores[ci].first});
        results.rows.push_back({layout, RelevanceSetting::Partial, cell.strategy, cell.batch_size,
                                cell.seed_idx, scores[ci].second});
    }
    return results;
}

std::map<CellKey, CellStats> summarize(const ResultsTable& results) {
    std::map<CellKey, std::vector<double>> values;
    for (const ResultRow& r : results.rows)
        values[{r.layout, r.setting, r.strategy, r.batch_size}].push_back(r.bpref);
    std::map<CellKey, CellStats> out;
    for (const auto& [key, vals] : values) {
        CellStats s;
        s.count = vals.size();
        for (double v : vals) s.mean += v;
        s.mean /= static_cast<double>(vals.size());
        if (vals.size() > 1) {
            double sq = 0.0;
            for (double v : vals) sq += (v - s.mean) * (v - s.mean);
            s.stddev = std::sqrt(sq / static_cast<double>(vals.size() - 1));
        }
        out[key] = s;
    }
    return out;
}

Heatmap render_heatmap(const ResultsTable& results, GraphKind layout, RelevanceSetting setting) {
    const auto stats = summarize(results);

    std::vector<GridStrategy> strategies;
    for (GridStrategy s : {GridStrategy::VarSub, GridStrategy::NodeDrop, GridStrategy::EdgeDrop,
                           GridStrategy::NodeFeatureMask, GridStrategy::EdgeFeatureMask,
                           GridStrategy::Random, GridStrategy::Baseline}) {
        for (const auto& [key, st] : stats)
            if (std::get<0>(key) == layout && std::get<1>(key) == setting &&
                std::get<2>(key) == s) {
                strategies.push_back(s);
                break;
            }
    }
    std::set<uint32_t> batch_set;
    for (const auto& [key, st] : stats)
        if (std::get<0>(key) == layout && std::get<1>(key) == setting)
            batch_set.insert(std::get<3>(key));

    if (strategies.empty() || batch_set.empty())
        throw MissingCellError(std::string("no results for ") + layout_name(layout) + "/" +
                               setting_name(setting));

    std::ostringstream text, csv;
    text << "bpref (" << layout_name(layout) << ", " << setting_name(setting) << " relevance)\n";
    text << std::left;
    csv << "augmentation";
    text << "                 ";
    for (uint32_t b : batch_set) {
        char head[16];
        std::snprintf(head, sizeof head, "%8u", b);
        text << head;
        csv << "," << b;
    }
    text << "\n";
    csv << "\n";

    for (GridStrategy s : strategies) {
        char label[32];
        std::snprintf(label, sizeof label, "%-17s", grid_strategy_name(s));
        text << label;
        csv << grid_strategy_name(s);
        for (uint32_t b : batch_set) {
            const auto it = stats.find({layout, setting, s, b});
            if (it == stats.end())
                throw MissingCellError(std::string("missing cell ") + layout_name(layout) + "/" +
                                       setting_name(setting) + "/" + grid_strategy_name(s) + "@" +
                                       std::to_string(b));
            char cellbuf[16];
            std::snprintf(cellbuf, sizeof cellbuf, "%8.3f", it->second.mean);
            text << cellbuf;
            std::snprintf(cellbuf, sizeof cellbuf, "%.3f", it->second.mean);
            csv << "," << cellbuf;
        }
        text << "\n";
        csv << "\n";
    }
    return {text.str(), csv.str()};
}

std::string results_csv_string(const ResultsTable& results) {
    std::ostringstream out;
    out << "layout,setting,augmentation,batch_size,seed,bpref\n";
    char buf[32];
    for (const ResultRow& r : results.rows) {
        std::snprintf(buf, sizeof buf, "%.6f", r.bpref);
        out << layout_name(r.layout) << "," << setting_name(r.setting) << ","
            << grid_strategy_name(r.strategy) << "," << r.batch_size << "," << r.seed << "," << buf
            << "\n";
    }
    return out.str();
}

void write_results_csv(const ResultsTable& results, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << results_csv_string(results);
    if (!out) throw IoError("write failed: " + path);
}

void write_summary_csv(const ResultsTable& results, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "layout,setting,augmentation,batch_size,mean_bpref,std_bpref\n";
    char buf[64];
    for (const auto& [key, st] : summarize(results)) {
        std::snprintf(buf, sizeof buf, "%.6f,%.6f", st.mean, st.stddev);
        out << layout_name(std::get<0>(key)) << "," << setting_name(std::get<1>(key)) << ","
            << grid_strategy_name(std::get<2>(key)) << "," << std::get<3>(key) << "," << buf
            << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace fgcl

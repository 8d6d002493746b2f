#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "fgcl/formula.hpp"
#include "fgcl/matrix.hpp"
#include "fgcl/rng.hpp"

namespace fgcl {

// A sampled path: node label, edge label, node label, ... (odd length).
using Walk = std::vector<std::string>;

struct Vocabulary {
    std::vector<std::string> tokens;  // id -> token, ids dense by descending count
    std::vector<uint64_t> counts;     // id -> count
    std::unordered_map<std::string, uint32_t> index;
    uint64_t total = 0;

    std::size_t size() const { return tokens.size(); }
    std::optional<uint32_t> id_of(const std::string& token) const {
        auto it = index.find(token);
        if (it == index.end()) return std::nullopt;
        return it->second;
    }
};

struct EmbedConfig {
    uint32_t dim = 100;
    uint32_t window = 2;
    uint32_t negatives = 5;
    uint32_t epochs = 5;
    double lr = 0.025;
    uint32_t ngram_min = 3;
    uint32_t ngram_max = 5;
    uint32_t buckets = 1u << 18;
    uint64_t min_count = 1;
    uint32_t walks_per_node = 10;
    uint32_t walk_max_len = 5;  // node visits per walk
    uint32_t edge_dim = 16;
};

struct EmbeddingTable {
    uint32_t dim = 100;
    uint32_t ngram_min = 3;
    uint32_t ngram_max = 5;
    uint32_t buckets = 1u << 18;
    Vocabulary vocab;
    Matrix input;       // |V| x dim
    Matrix output;      // |V| x dim (context vectors)
    Matrix bucket_vecs; // buckets x dim
};

// walks_per_node walks from every node; each step follows a uniformly random
// outgoing edge, emitting the edge label then the next node label. A walk
// stops after max_len node visits or at a node with no outgoing edges.
std::vector<Walk> sample_walks(const MathGraph& g, uint32_t walks_per_node, uint32_t max_len,
                               Rng& rng);

// Tokens below min_count are dropped; ids by descending count, ties broken
// lexicographically. Throws EmptyVocabularyError when nothing survives.
Vocabulary build_vocab(const std::vector<Walk>& walks, uint64_t min_count);

// p(t) = count(t)^power / sum_u count(u)^power.
Vec unigram_distribution(const Vocabulary& vocab, double power = 0.75);

// Subword n-gram bucket ids for a token: n-grams of "<token>" for n in
// [n_min, n_max], FNV-1a hashed modulo `buckets`. Tokens shorter than n_min
// have no n-grams.
std::vector<uint32_t> subword_buckets(const std::string& token, uint32_t n_min, uint32_t n_max,
                                      uint32_t buckets);

// Seeded initialization: input and bucket rows uniform in [-0.5/d, 0.5/d],
// output rows zero. train_token_embeddings with zero epochs returns exactly this.
EmbeddingTable init_table(const Vocabulary& vocab, const EmbedConfig& cfg, uint64_t seed);

// Skip-gram pair objective with negative sampling:
//   L = -log sigma(u_ctx . v_in) - sum_neg log sigma(-u_neg . v_in)
double skipgram_pair_loss(const Vec& v_in, const Vec& u_ctx, const std::vector<Vec>& u_negs);
// Also fills d L / d v_in, d L / d u_ctx, d L / d u_neg[i].
double skipgram_pair_grads(const Vec& v_in, const Vec& u_ctx, const std::vector<Vec>& u_negs,
                           Vec& g_in, Vec& g_ctx, std::vector<Vec>& g_negs);

EmbeddingTable train_token_embeddings(const std::vector<Walk>& walks, const Vocabulary& vocab,
                                      const EmbedConfig& cfg, uint64_t seed,
                                      std::vector<double>* epoch_loss = nullptr);

// In-vocab: token row + mean of its bucket rows. OOV: mean of bucket rows
// alone; no n-grams at all -> zero vector. Total and finite for any input.
Vec token_vector(const EmbeddingTable& table, const std::string& token);

struct FeaturedGraph {
    MathGraph graph;
    Matrix node_features;  // |V| x dim
    Matrix edge_features;  // |E| x edge_dim

    bool operator==(const FeaturedGraph&) const = default;
};

FeaturedGraph featurize(const MathGraph& g, const EmbeddingTable& table, uint32_t edge_dim = 16);

// Precomputed label -> vector map. featurize() hashes subwords per node; the
// training/benchmark paths go through this instead and the table can be freed
// once every reachable label has been warmed.
class LabelFeatures {
  public:
    LabelFeatures() = default;
    void warm(const EmbeddingTable& table, const std::vector<std::string>& labels);
    const Vec& get(const std::string& label) const;
    uint32_t dim() const { return dim_; }

  private:
    std::unordered_map<std::string, Vec> map_;
    uint32_t dim_ = 0;
};

FeaturedGraph featurize_cached(const MathGraph& g, const LabelFeatures& feats, uint32_t edge_dim);

// Every node and edge label of a graph, plus pool labels, for LabelFeatures::warm.
std::vector<std::string> graph_labels(const MathGraph& g);

void save_table(const EmbeddingTable& table, const std::string& path);
EmbeddingTable load_table(const std::string& path);

}  // namespace fgcl

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fgcl/encoder.hpp"
#include "fgcl/formula.hpp"
#include "fgcl/matrix.hpp"
#include "fgcl/token_embed.hpp"

namespace fgcl {

double cosine(const Vec& u, const Vec& v);

// Embeds graphs the same way the index was built: trained encoder when params
// is set, the untrained token-mean baseline otherwise.
struct Embedder {
    const EncoderParams* params = nullptr;  // nullptr -> baseline
    const EmbeddingTable* table = nullptr;
    const LabelFeatures* feats = nullptr;   // optional fast path
    GraphKind layout = GraphKind::Slt;
    uint32_t edge_dim = 16;

    std::string id() const { return params ? checkpoint_id(*params) : "baseline"; }
    Vec embed_graph(const MathGraph& g) const;
    Vec embed_text(const std::string& formula) const;
};

struct IndexProvenance {
    std::string checkpoint_id;
    GraphKind layout = GraphKind::Slt;
    bool operator==(const IndexProvenance&) const = default;
};

struct FormulaIndex {
    uint32_t dim = 0;
    IndexProvenance provenance;
    std::vector<std::string> ids;  // corpus order
    Matrix rows;                   // count x dim, unit-normalized
};

FormulaIndex build_index(const std::vector<CorpusEntry>& corpus, const Embedder& emb);

struct RankedResult {
    std::string doc_id;
    double score;
    bool operator==(const RankedResult&) const = default;
};

struct RankedList {
    std::string query_id;
    std::vector<RankedResult> results;  // descending score, ties by ascending id
    bool operator==(const RankedList&) const = default;
};

// Scores every index row against an already-embedded query.
RankedList rank_embedding(const FormulaIndex& index, const std::string& query_id, const Vec& q,
                          std::size_t k);

// Parses, embeds with `emb` and ranks. Throws ProvenanceMismatchError when the
// embedder does not match the index provenance.
RankedList query(const FormulaIndex& index, const Embedder& emb, const std::string& query_id,
                 const std::string& formula, std::size_t k);

// TREC run format: "qid Q0 docid rank score tag".
void write_run(const std::vector<RankedList>& rankings, const std::string& tag,
               const std::string& path);
std::vector<RankedList> read_run(const std::string& path);

void save_index(const FormulaIndex& index, const std::string& path);
FormulaIndex load_index(const std::string& path);

}  // namespace fgcl

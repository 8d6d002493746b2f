#include "fgcl/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fgcl/binio.hpp"

namespace fgcl {

double cosine(const Vec& u, const Vec& v) {
    if (u.size() != v.size()) throw DimensionMismatchError("cosine of unequal dims");
    const double nu = l2_norm(u.data(), u.size());
    const double nv = l2_norm(v.data(), v.size());
    if (nu == 0.0 || nv == 0.0) throw ZeroVectorError("cosine of a zero vector");
    return dot(u.data(), v.data(), u.size()) / (nu * nv);
}

Vec Embedder::embed_graph(const MathGraph& g) const {
    FeaturedGraph fg;
    if (feats) {
        fg = featurize_cached(g, *feats, edge_dim);
    } else if (table) {
        fg = featurize(g, *table, edge_dim);
    } else {
        throw Error("embedder has neither a token table nor a feature cache");
    }
    return params ? encode(*params, fg) : baseline_embed(fg);
}

Vec Embedder::embed_text(const std::string& formula) const {
    return embed_graph(build_graph(parse_formula(formula), layout));
}

FormulaIndex build_index(const std::vector<CorpusEntry>& corpus, const Embedder& emb) {
    FormulaIndex index;
    index.provenance = {emb.id(), emb.layout};
    for (const CorpusEntry& entry : corpus) {
        Vec v;
        try {
            v = emb.embed_graph(build_graph(entry.ast, emb.layout));
        } catch (const Error& e) {
            throw Error("formula '" + entry.id + "': " + e.what());
        }
        if (index.ids.empty()) {
            index.dim = static_cast<uint32_t>(v.size());
            index.rows = Matrix(0, index.dim);
        }
        index.ids.push_back(entry.id);
        index.rows.data.insert(index.rows.data.end(), v.begin(), v.end());
        ++index.rows.rows;
    }
    return index;
}

RankedList rank_embedding(const FormulaIndex& index, const std::string& query_id, const Vec& q,
                          std::size_t k) {
    if (q.size() != index.dim) throw DimensionMismatchError("query dim != index dim");
    std::vector<std::size_t> order(index.ids.size());
    Vec scores(index.ids.size());
    for (std::size_t i = 0; i < index.ids.size(); ++i) {
        order[i] = i;
        scores[i] = dot(index.rows.row(i), q.data(), index.dim);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return index.ids[a] < index.ids[b];
    });
    RankedList out;
    out.query_id = query_id;
    const std::size_t top = std::min(k, order.size());
    out.results.reserve(top);
    for (std::size_t r = 0; r < top; ++r)
        out.results.push_back({index.ids[order[r]], scores[order[r]]});
    return out;
}

RankedList query(const FormulaIndex& index, const Embedder& emb, const std::string& query_id,
                 const std::string& formula, std::size_t k) {
    if (k < 1) throw Error("k must be >= 1");
    if (emb.id() != index.provenance.checkpoint_id || emb.layout != index.provenance.layout)
        throw ProvenanceMismatchError("index built under checkpoint '" +
                                      index.provenance.checkpoint_id +
                                      "' but query embedder is '" + emb.id() + "'");
    return rank_embedding(index, query_id, emb.embed_text(formula), k);
}

void write_run(const std::vector<RankedList>& rankings, const std::string& tag,
               const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    char score[32];
    for (const RankedList& rl : rankings) {
        for (std::size_t r = 0; r < rl.results.size(); ++r) {
            std::snprintf(score, sizeof score, "%.6f", rl.results[r].score);
            out << rl.query_id << " Q0 " << rl.results[r].doc_id << " " << (r + 1) << " " << score
                << " " << tag << "\n";
        }
    }
    if (!out) throw IoError("write failed: " + path);
}

std::vector<RankedList> read_run(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open run file: " + path);
    std::vector<RankedList> runs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string qid, q0, docid, tag;
        std::size_t rank;
        double score;
        if (!(ss >> qid >> q0 >> docid >> rank >> score >> tag) || q0 != "Q0")
            throw CorpusError("malformed run line", lineno);
        if (runs.empty() || runs.back().query_id != qid) runs.push_back({qid, {}});
        if (rank != runs.back().results.size() + 1)
            throw CorpusError("rank column out of sequence", lineno);
        runs.back().results.push_back({docid, score});
    }
    return runs;
}

namespace {
constexpr char kIndexMagic[4] = {'F', 'I', 'D', 'X'};
constexpr uint32_t kIndexVersion = 1;
}  // namespace

void save_index(const FormulaIndex& index, const std::string& path) {
    ByteWriter w;
    w.raw(kIndexMagic, 4);
    w.u32(kIndexVersion);
    w.u32(index.dim);
    w.u64(index.ids.size());
    w.str(index.provenance.checkpoint_id);
    w.u8(static_cast<uint8_t>(index.provenance.layout));
    for (const std::string& id : index.ids) w.str(id);
    for (double x : index.rows.data) w.f32(static_cast<float>(x));
    const uint32_t crc = crc32(w.bytes().data(), w.bytes().size());
    w.u32(crc);
    write_file_bytes(path, w.bytes());
}

FormulaIndex load_index(const std::string& path) {
    const std::vector<uint8_t> bytes = read_file_bytes(path);
    if (bytes.size() < 12) throw CorruptFileError("index truncated: " + path);
    const std::size_t payload = bytes.size() - 4;
    ByteReader tail(bytes.data() + payload, 4);
    if (tail.u32() != crc32(bytes.data(), payload))
        throw CorruptFileError("index checksum mismatch: " + path);

    ByteReader r(bytes.data(), payload);
    char magic[4];
    for (char& c : magic) c = static_cast<char>(r.u8());
    if (std::string(magic, 4) != std::string(kIndexMagic, 4))
        throw CorruptFileError("not an index file: " + path);
    if (r.u32() != kIndexVersion) throw VersionMismatchError("unsupported index version: " + path);

    FormulaIndex index;
    index.dim = r.u32();
    const uint64_t count = r.u64();
    index.provenance.checkpoint_id = r.str();
    index.provenance.layout = static_cast<GraphKind>(r.u8());
    for (uint64_t i = 0; i < count; ++i) index.ids.push_back(r.str());
    index.rows = Matrix(count, index.dim);
    for (double& x : index.rows.data) x = r.f32();
    return index;
}

}  // namespace fgcl

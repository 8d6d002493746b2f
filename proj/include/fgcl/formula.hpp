#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fgcl/errors.hpp"

namespace fgcl {

// ---------------------------------------------------------------------------
// AST for the LaTeX subset:
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*' | juxtaposition) factor)*
//   factor := base ('^{expr}')? ('_{expr}')?
//   base   := var | number | '(' expr ')' | '\frac{expr}{expr}'
//           | '\sqrt{expr}' | func '(' expr ')'
// func: \sin \cos \tan \log \exp; var: a..z A..Z and the Greek commands.
// ---------------------------------------------------------------------------

enum class AstKind { Variable, Number, BinaryOp, UnaryFunc, Fraction, Sqrt, Group, Script };

struct FormulaAst {
    AstKind kind;
    // Variable: letter or Greek name without backslash ("x", "alpha").
    // Number: literal. BinaryOp: "+", "-", "*" or "" for juxtaposition.
    // UnaryFunc: "sin" etc. Others: empty.
    std::string lexeme;
    std::vector<FormulaAst> children;
    // Script only; children are [base, sup?, sub?] in that order.
    bool has_sup = false;
    bool has_sub = false;

    bool operator==(const FormulaAst&) const = default;
};

// Throws SyntaxError (with byte offset) on anything outside the grammar.
FormulaAst parse_formula(const std::string& text);

// Deterministic pretty-printer; parse(unparse(parse(s))) == parse(s).
std::string unparse(const FormulaAst& ast);

// Number of lexical tokens in a formula string (whitespace skipped).
std::size_t token_count(const std::string& text);

// ---------------------------------------------------------------------------
// Graph representations.
// ---------------------------------------------------------------------------

enum class GraphKind : uint8_t { Slt = 0, Opt = 1 };

enum class NodeKind : uint8_t { Variable, Number, Operator, Function, Structure };

struct GraphNode {
    NodeKind kind;
    std::string label;  // typed, e.g. "V!x", "N!2", "O!add", "F!sin", "S!frac"
    bool operator==(const GraphNode&) const = default;
};

struct GraphEdge {
    uint32_t src;
    uint32_t dst;
    std::string label;  // SLT: NEXT/SUP/SUB/OVER/UNDER/WITHIN; OPT: ARG0..ARGk
    bool operator==(const GraphEdge&) const = default;
};

struct MathGraph {
    GraphKind kind = GraphKind::Slt;
    std::vector<GraphNode> nodes;
    std::vector<GraphEdge> edges;
    uint32_t root = 0;

    bool operator==(const MathGraph&) const = default;
};

// Prefix for a node kind: "V!", "N!", "O!", "F!", "S!".
const char* node_kind_prefix(NodeKind kind);
// Lexeme part of a typed label ("V!x" -> "x").
std::string label_lexeme(const std::string& label);

MathGraph build_slt(const FormulaAst& ast);
MathGraph build_opt(const FormulaAst& ast);
MathGraph build_graph(const FormulaAst& ast, GraphKind kind);

// Canonical serialization: depth-first from the root, children ordered by
// edge label then child label. Disconnected remainders (possible only after
// augmentation) are appended by ascending node id.
std::string graph_signature(const MathGraph& g);
// Same but with node labels reduced to their kind prefix, so two graphs that
// differ only in variable/number identities compare equal.
std::string topology_signature(const MathGraph& g);

// ---------------------------------------------------------------------------
// Corpus files: one JSON object per line with fields "id" and "latex";
// '#' comment lines and blank lines are skipped.
// ---------------------------------------------------------------------------

struct CorpusEntry {
    std::string id;
    std::string latex;
    FormulaAst ast;
};

std::vector<CorpusEntry> load_corpus(const std::string& path);
void write_corpus(const std::vector<std::pair<std::string, std::string>>& entries,
                  const std::string& path);

}  // namespace fgcl

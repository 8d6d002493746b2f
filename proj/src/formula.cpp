#include "fgcl/formula.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace fgcl {

namespace {

const std::array<const char*, 24> kGreekNames = {
    "alpha", "beta",    "gamma", "delta", "epsilon", "zeta", "eta", "theta",
    "iota",  "kappa",   "lambda", "mu",   "nu",      "xi",   "omicron", "pi",
    "rho",   "sigma",   "tau",   "upsilon", "phi",   "chi",  "psi", "omega"};

const std::array<const char*, 5> kFuncNames = {"sin", "cos", "tan", "log", "exp"};

bool is_greek(const std::string& s) {
    return std::find(kGreekNames.begin(), kGreekNames.end(), s) != kGreekNames.end();
}

bool is_func(const std::string& s) {
    return std::find(kFuncNames.begin(), kFuncNames.end(), s) != kFuncNames.end();
}

enum class Tok {
    Var, Number, Plus, Minus, Star, Caret, Underscore,
    LParen, RParen, LBrace, RBrace, Frac, Sqrt, Func, End
};

struct Token {
    Tok kind;
    std::string text;
    std::size_t offset;
};

std::vector<Token> tokenize(const std::string& text) {
    std::vector<Token> toks;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        const char c = text[i];
        if (c == ' ' || c == '\t') {
            ++i;
            continue;
        }
        const std::size_t at = i;
        if (std::isalpha(static_cast<unsigned char>(c))) {
            toks.push_back({Tok::Var, std::string(1, c), at});
            ++i;
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t j = i;
            while (j < n && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
            if (j < n && text[j] == '.' && j + 1 < n &&
                std::isdigit(static_cast<unsigned char>(text[j + 1]))) {
                ++j;
                while (j < n && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
            }
            toks.push_back({Tok::Number, text.substr(i, j - i), at});
            i = j;
        } else if (c == '\\') {
            std::size_t j = i + 1;
            while (j < n && std::isalpha(static_cast<unsigned char>(text[j]))) ++j;
            const std::string name = text.substr(i + 1, j - i - 1);
            if (name == "frac") {
                toks.push_back({Tok::Frac, name, at});
            } else if (name == "sqrt") {
                toks.push_back({Tok::Sqrt, name, at});
            } else if (is_func(name)) {
                toks.push_back({Tok::Func, name, at});
            } else if (is_greek(name)) {
                toks.push_back({Tok::Var, name, at});
            } else {
                throw SyntaxError("unknown command \\" + name, at);
            }
            i = j;
        } else {
            switch (c) {
                case '+': toks.push_back({Tok::Plus, "+", at}); break;
                case '-': toks.push_back({Tok::Minus, "-", at}); break;
                case '*': toks.push_back({Tok::Star, "*", at}); break;
                case '^': toks.push_back({Tok::Caret, "^", at}); break;
                case '_': toks.push_back({Tok::Underscore, "_", at}); break;
                case '(': toks.push_back({Tok::LParen, "(", at}); break;
                case ')': toks.push_back({Tok::RParen, ")", at}); break;
                case '{': toks.push_back({Tok::LBrace, "{", at}); break;
                case '}': toks.push_back({Tok::RBrace, "}", at}); break;
                default: throw SyntaxError(std::string("unexpected character '") + c + "'", at);
            }
            ++i;
        }
    }
    toks.push_back({Tok::End, "", n});
    return toks;
}

class Parser {
  public:
    explicit Parser(const std::string& text) : toks_(tokenize(text)) {}

    FormulaAst parse() {
        FormulaAst ast = expr();
        if (peek().kind != Tok::End) throw SyntaxError("unexpected token '" + peek().text + "'", peek().offset);
        return ast;
    }

  private:
    const Token& peek() const { return toks_[pos_]; }
    Token next() { return toks_[pos_++]; }

    Token expect(Tok kind, const char* what) {
        if (peek().kind != kind) throw SyntaxError(std::string("expected ") + what, peek().offset);
        return next();
    }

    static bool starts_factor(Tok k) {
        return k == Tok::Var || k == Tok::Number || k == Tok::LParen || k == Tok::Frac ||
               k == Tok::Sqrt || k == Tok::Func;
    }

    FormulaAst expr() {
        FormulaAst lhs = term();
        while (peek().kind == Tok::Plus || peek().kind == Tok::Minus) {
            const Token op = next();
            FormulaAst rhs = term();
            lhs = FormulaAst{AstKind::BinaryOp, op.text, {std::move(lhs), std::move(rhs)}};
        }
        return lhs;
    }

    FormulaAst term() {
        FormulaAst lhs = factor();
        for (;;) {
            if (peek().kind == Tok::Star) {
                next();
                FormulaAst rhs = factor();
                lhs = FormulaAst{AstKind::BinaryOp, "*", {std::move(lhs), std::move(rhs)}};
            } else if (starts_factor(peek().kind)) {
                FormulaAst rhs = factor();
                lhs = FormulaAst{AstKind::BinaryOp, "", {std::move(lhs), std::move(rhs)}};
            } else {
                break;
            }
        }
        return lhs;
    }

    FormulaAst braced_expr() {
        expect(Tok::LBrace, "'{'");
        FormulaAst e = expr();
        expect(Tok::RBrace, "'}'");
        return e;
    }

    FormulaAst factor() {
        FormulaAst b = base();
        FormulaAst sup, sub;
        bool has_sup = false, has_sub = false;
        if (peek().kind == Tok::Caret) {
            next();
            sup = braced_expr();
            has_sup = true;
        }
        if (peek().kind == Tok::Underscore) {
            next();
            sub = braced_expr();
            has_sub = true;
        }
        if (!has_sup && !has_sub) return b;
        FormulaAst script{AstKind::Script, "", {std::move(b)}};
        script.has_sup = has_sup;
        script.has_sub = has_sub;
        if (has_sup) script.children.push_back(std::move(sup));
        if (has_sub) script.children.push_back(std::move(sub));
        return script;
    }

    FormulaAst base() {
        const Token t = peek();
        switch (t.kind) {
            case Tok::Var:
                next();
                return FormulaAst{AstKind::Variable, t.text, {}};
            case Tok::Number:
                next();
                return FormulaAst{AstKind::Number, t.text, {}};
            case Tok::LParen: {
                next();
                FormulaAst e = expr();
                expect(Tok::RParen, "')'");
                return FormulaAst{AstKind::Group, "", {std::move(e)}};
            }
            case Tok::Frac: {
                next();
                FormulaAst num = braced_expr();
                FormulaAst den = braced_expr();
                return FormulaAst{AstKind::Fraction, "", {std::move(num), std::move(den)}};
            }
            case Tok::Sqrt: {
                next();
                FormulaAst c = braced_expr();
                return FormulaAst{AstKind::Sqrt, "", {std::move(c)}};
            }
            case Tok::Func: {
                next();
                expect(Tok::LParen, "'('");
                FormulaAst arg = expr();
                expect(Tok::RParen, "')'");
                return FormulaAst{AstKind::UnaryFunc, t.text, {std::move(arg)}};
            }
            default:
                throw SyntaxError("expected a variable, number, '(', \\frac, \\sqrt or function",
                                  t.offset);
        }
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

std::string emit_var(const std::string& lexeme) {
    return lexeme.size() == 1 ? lexeme : "\\" + lexeme;
}

// True if gluing a/b would change tokenization: digit runs merge, and a
// trailing Greek command swallows a following letter.
bool needs_separator(const std::string& a, const std::string& b) {
    if (a.empty() || b.empty()) return false;
    const char last = a.back();
    const char first = b.front();
    if (std::isdigit(static_cast<unsigned char>(last)) &&
        std::isdigit(static_cast<unsigned char>(first)))
        return true;
    if (std::isalpha(static_cast<unsigned char>(first))) {
        std::size_t i = a.size();
        while (i > 0 && std::isalpha(static_cast<unsigned char>(a[i - 1]))) --i;
        if (i > 0 && a[i - 1] == '\\' && a.size() - i > 1) return true;
    }
    return false;
}

std::string op_name(const std::string& lexeme) {
    if (lexeme == "+") return "add";
    if (lexeme == "-") return "sub";
    return "mul";  // "*" and juxtaposition
}

}  // namespace

FormulaAst parse_formula(const std::string& text) {
    if (text.empty()) throw SyntaxError("empty formula", 0);
    return Parser(text).parse();
}

std::size_t token_count(const std::string& text) {
    return tokenize(text).size() - 1;  // minus End
}

std::string unparse(const FormulaAst& ast) {
    switch (ast.kind) {
        case AstKind::Variable: return emit_var(ast.lexeme);
        case AstKind::Number: return ast.lexeme;
        case AstKind::BinaryOp: {
            const std::string l = unparse(ast.children[0]);
            const std::string r = unparse(ast.children[1]);
            if (!ast.lexeme.empty()) return l + ast.lexeme + r;
            return needs_separator(l, r) ? l + " " + r : l + r;
        }
        case AstKind::UnaryFunc: return "\\" + ast.lexeme + "(" + unparse(ast.children[0]) + ")";
        case AstKind::Fraction:
            return "\\frac{" + unparse(ast.children[0]) + "}{" + unparse(ast.children[1]) + "}";
        case AstKind::Sqrt: return "\\sqrt{" + unparse(ast.children[0]) + "}";
        case AstKind::Group: return "(" + unparse(ast.children[0]) + ")";
        case AstKind::Script: {
            std::string out = unparse(ast.children[0]);
            std::size_t i = 1;
            if (ast.has_sup) out += "^{" + unparse(ast.children[i++]) + "}";
            if (ast.has_sub) out += "_{" + unparse(ast.children[i]) + "}";
            return out;
        }
    }
    return {};
}

const char* node_kind_prefix(NodeKind kind) {
    switch (kind) {
        case NodeKind::Variable: return "V!";
        case NodeKind::Number: return "N!";
        case NodeKind::Operator: return "O!";
        case NodeKind::Function: return "F!";
        case NodeKind::Structure: return "S!";
    }
    return "";
}

std::string label_lexeme(const std::string& label) {
    const std::size_t p = label.find('!');
    return p == std::string::npos ? label : label.substr(p + 1);
}

namespace {

class SltBuilder {
  public:
    MathGraph build(const FormulaAst& ast) {
        g_.kind = GraphKind::Slt;
        auto [first, last] = baseline(ast);
        (void)last;
        g_.root = first;
        return std::move(g_);
    }

  private:
    uint32_t add_node(NodeKind kind, const std::string& lexeme) {
        g_.nodes.push_back({kind, node_kind_prefix(kind) + lexeme});
        return static_cast<uint32_t>(g_.nodes.size() - 1);
    }

    void add_edge(uint32_t src, uint32_t dst, const char* label) {
        g_.edges.push_back({src, dst, label});
    }

    // Emits the baseline chain for `ast` and returns its (first, last) node.
    std::pair<uint32_t, uint32_t> baseline(const FormulaAst& ast) {
        switch (ast.kind) {
            case AstKind::Variable: {
                const uint32_t v = add_node(NodeKind::Variable, ast.lexeme);
                return {v, v};
            }
            case AstKind::Number: {
                const uint32_t v = add_node(NodeKind::Number, ast.lexeme);
                return {v, v};
            }
            case AstKind::BinaryOp: {
                auto [lf, ll] = baseline(ast.children[0]);
                uint32_t tail = ll;
                if (!ast.lexeme.empty()) {
                    const uint32_t op = add_node(NodeKind::Operator, op_name(ast.lexeme));
                    add_edge(tail, op, "NEXT");
                    tail = op;
                }
                auto [rf, rl] = baseline(ast.children[1]);
                add_edge(tail, rf, "NEXT");
                return {lf, rl};
            }
            case AstKind::UnaryFunc: {
                const uint32_t fn = add_node(NodeKind::Function, ast.lexeme);
                const uint32_t lp = add_node(NodeKind::Structure, "lparen");
                add_edge(fn, lp, "NEXT");
                auto [cf, cl] = baseline(ast.children[0]);
                add_edge(lp, cf, "NEXT");
                const uint32_t rp = add_node(NodeKind::Structure, "rparen");
                add_edge(cl, rp, "NEXT");
                return {fn, rp};
            }
            case AstKind::Fraction: {
                const uint32_t fr = add_node(NodeKind::Structure, "frac");
                auto [nf, nl] = baseline(ast.children[0]);
                (void)nl;
                add_edge(fr, nf, "OVER");
                auto [df, dl] = baseline(ast.children[1]);
                (void)dl;
                add_edge(fr, df, "UNDER");
                return {fr, fr};
            }
            case AstKind::Sqrt: {
                const uint32_t sq = add_node(NodeKind::Structure, "sqrt");
                auto [cf, cl] = baseline(ast.children[0]);
                (void)cl;
                add_edge(sq, cf, "WITHIN");
                return {sq, sq};
            }
            case AstKind::Group: {
                const uint32_t lp = add_node(NodeKind::Structure, "lparen");
                auto [cf, cl] = baseline(ast.children[0]);
                add_edge(lp, cf, "NEXT");
                const uint32_t rp = add_node(NodeKind::Structure, "rparen");
                add_edge(cl, rp, "NEXT");
                return {lp, rp};
            }
            case AstKind::Script: {
                // Scripts hang off the last symbol of the base's baseline;
                // the enclosing chain continues from that same symbol.
                auto [bf, bl] = baseline(ast.children[0]);
                std::size_t i = 1;
                if (ast.has_sup) {
                    auto [sf, sl] = baseline(ast.children[i++]);
                    (void)sl;
                    add_edge(bl, sf, "SUP");
                }
                if (ast.has_sub) {
                    auto [sf, sl] = baseline(ast.children[i]);
                    (void)sl;
                    add_edge(bl, sf, "SUB");
                }
                return {bf, bl};
            }
        }
        return {0, 0};
    }

    MathGraph g_;
};

class OptBuilder {
  public:
    MathGraph build(const FormulaAst& ast) {
        g_.kind = GraphKind::Opt;
        g_.root = subtree(ast);
        return std::move(g_);
    }

  private:
    uint32_t add_node(NodeKind kind, const std::string& lexeme) {
        g_.nodes.push_back({kind, node_kind_prefix(kind) + lexeme});
        return static_cast<uint32_t>(g_.nodes.size() - 1);
    }

    void add_arg(uint32_t parent, uint32_t child, int i) {
        g_.edges.push_back({parent, child, "ARG" + std::to_string(i)});
    }

    uint32_t subtree(const FormulaAst& ast) {
        switch (ast.kind) {
            case AstKind::Variable: return add_node(NodeKind::Variable, ast.lexeme);
            case AstKind::Number: return add_node(NodeKind::Number, ast.lexeme);
            case AstKind::BinaryOp: {
                const uint32_t op = add_node(NodeKind::Operator, op_name(ast.lexeme));
                add_arg(op, subtree(ast.children[0]), 0);
                add_arg(op, subtree(ast.children[1]), 1);
                return op;
            }
            case AstKind::UnaryFunc: {
                const uint32_t fn = add_node(NodeKind::Function, ast.lexeme);
                add_arg(fn, subtree(ast.children[0]), 0);
                return fn;
            }
            case AstKind::Fraction: {
                const uint32_t fr = add_node(NodeKind::Structure, "frac");
                add_arg(fr, subtree(ast.children[0]), 0);
                add_arg(fr, subtree(ast.children[1]), 1);
                return fr;
            }
            case AstKind::Sqrt: {
                const uint32_t sq = add_node(NodeKind::Structure, "sqrt");
                add_arg(sq, subtree(ast.children[0]), 0);
                return sq;
            }
            case AstKind::Group: return subtree(ast.children[0]);  // transparent
            case AstKind::Script: {
                const uint32_t base = subtree(ast.children[0]);
                std::size_t i = 1;
                uint32_t result = base;
                const FormulaAst* sup = ast.has_sup ? &ast.children[i++] : nullptr;
                if (ast.has_sub) {
                    // Subscripts are atomic in OPT: fold into the base label.
                    g_.nodes[base].label += "_" + unparse(ast.children[i]);
                }
                if (sup) {
                    const uint32_t pw = add_node(NodeKind::Operator, "pow");
                    add_arg(pw, base, 0);
                    add_arg(pw, subtree(*sup), 1);
                    result = pw;
                }
                return result;
            }
        }
        return 0;
    }

    MathGraph g_;
};

void signature_visit(const MathGraph& g, const std::vector<std::vector<std::size_t>>& out_edges,
                     uint32_t node, bool topology_only, std::vector<bool>& visited,
                     std::string& out) {
    visited[node] = true;
    out += topology_only ? node_kind_prefix(g.nodes[node].kind) : g.nodes[node].label.c_str();
    if (out_edges[node].empty()) return;
    std::vector<std::pair<std::string, std::string>> parts;  // (edge label, child sig)
    for (std::size_t ei : out_edges[node]) {
        std::string child;
        signature_visit(g, out_edges, g.edges[ei].dst, topology_only, visited, child);
        parts.emplace_back(g.edges[ei].label, std::move(child));
    }
    std::sort(parts.begin(), parts.end());
    out += '(';
    for (const auto& [el, cs] : parts) {
        out += el;
        out += ':';
        out += cs;
        out += ';';
    }
    out += ')';
}

std::string signature_impl(const MathGraph& g, bool topology_only) {
    if (g.nodes.empty()) return "{}";
    std::vector<std::vector<std::size_t>> out_edges(g.nodes.size());
    for (std::size_t i = 0; i < g.edges.size(); ++i) out_edges[g.edges[i].src].push_back(i);
    std::vector<bool> visited(g.nodes.size(), false);
    std::string out;
    signature_visit(g, out_edges, g.root, topology_only, visited, out);
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        if (visited[i]) continue;
        out += '|';
        signature_visit(g, out_edges, static_cast<uint32_t>(i), topology_only, visited, out);
    }
    return out;
}

}  // namespace

MathGraph build_slt(const FormulaAst& ast) { return SltBuilder().build(ast); }

MathGraph build_opt(const FormulaAst& ast) { return OptBuilder().build(ast); }

MathGraph build_graph(const FormulaAst& ast, GraphKind kind) {
    return kind == GraphKind::Slt ? build_slt(ast) : build_opt(ast);
}

std::string graph_signature(const MathGraph& g) { return signature_impl(g, false); }

std::string topology_signature(const MathGraph& g) { return signature_impl(g, true); }

std::vector<CorpusEntry> load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus: " + path);
    std::vector<CorpusEntry> entries;
    std::map<std::string, bool> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw CorpusError(std::string("bad record: ") + e.what(), lineno);
        }
        if (!obj.is_object() || !obj.contains("id") || !obj.contains("latex"))
            throw CorpusError("record must be an object with 'id' and 'latex'", lineno);
        const std::string id = obj["id"].get<std::string>();
        const std::string latex = obj["latex"].get<std::string>();
        if (seen.count(id)) throw DuplicateIdError(id);
        seen[id] = true;
        try {
            entries.push_back({id, latex, parse_formula(latex)});
        } catch (const SyntaxError& e) {
            throw CorpusError("formula '" + id + "': " + e.what(), lineno);
        }
    }
    return entries;
}

void write_corpus(const std::vector<std::pair<std::string, std::string>>& entries,
                  const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    for (const auto& [id, latex] : entries) {
        nlohmann::ordered_json obj;
        obj["id"] = id;
        obj["latex"] = latex;
        out << obj.dump() << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace fgcl

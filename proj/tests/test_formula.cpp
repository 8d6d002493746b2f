#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>
#include <set>

#include "fgcl/evalbench.hpp"
#include "fgcl/formula.hpp"
#include "fgcl/rng.hpp"

using namespace fgcl;

namespace {

FormulaAst var(const std::string& v) { return {AstKind::Variable, v, {}}; }
FormulaAst num(const std::string& n) { return {AstKind::Number, n, {}}; }

// Independent tree-property oracle: connected, |E| = |V|-1, one parent per
// non-root node, reachability from the root.
void check_rooted_tree(const MathGraph& g) {
    REQUIRE(!g.nodes.empty());
    CHECK(g.edges.size() == g.nodes.size() - 1);
    std::vector<int> indegree(g.nodes.size(), 0);
    for (const GraphEdge& e : g.edges) {
        REQUIRE(e.src < g.nodes.size());
        REQUIRE(e.dst < g.nodes.size());
        ++indegree[e.dst];
    }
    CHECK(indegree[g.root] == 0);
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        if (i != g.root) CHECK(indegree[i] == 1);
    // reachability
    std::vector<std::vector<uint32_t>> children(g.nodes.size());
    for (const GraphEdge& e : g.edges) children[e.src].push_back(e.dst);
    std::vector<bool> seen(g.nodes.size(), false);
    std::vector<uint32_t> stack{g.root};
    seen[g.root] = true;
    std::size_t count = 0;
    while (!stack.empty()) {
        const uint32_t v = stack.back();
        stack.pop_back();
        ++count;
        for (uint32_t c : children[v])
            if (!seen[c]) {
                seen[c] = true;
                stack.push_back(c);
            }
    }
    CHECK(count == g.nodes.size());
}

void check_label_prefixes(const MathGraph& g) {
    for (const GraphNode& n : g.nodes) {
        const std::string prefix = n.label.substr(0, 2);
        CHECK(prefix == node_kind_prefix(n.kind));
    }
}

}  // namespace

TEST_CASE("parse: spec examples") {
    // "x+y" -> Plus(Var x, Var y)
    FormulaAst expected{AstKind::BinaryOp, "+", {var("x"), var("y")}};
    CHECK(parse_formula("x+y") == expected);

    // "x^{2}+1" -> Plus(Script(base=x, sup=2), Num 1)
    FormulaAst script{AstKind::Script, "", {var("x"), num("2")}};
    script.has_sup = true;
    FormulaAst expected2{AstKind::BinaryOp, "+", {script, num("1")}};
    CHECK(parse_formula("x^{2}+1") == expected2);

    // "\frac{a}{b+c}" -> Fraction(a, Plus(b, c))
    FormulaAst expected3{
        AstKind::Fraction, "", {var("a"), {AstKind::BinaryOp, "+", {var("b"), var("c")}}}};
    CHECK(parse_formula("\\frac{a}{b+c}") == expected3);
}

TEST_CASE("parse: precedence and associativity") {
    // left associative: x+y+z = (x+y)+z
    FormulaAst left{AstKind::BinaryOp, "+", {var("x"), var("y")}};
    FormulaAst expected{AstKind::BinaryOp, "+", {left, var("z")}};
    CHECK(parse_formula("x+y+z") == expected);

    // multiplication binds tighter: x+y*z
    FormulaAst prod{AstKind::BinaryOp, "*", {var("y"), var("z")}};
    FormulaAst expected2{AstKind::BinaryOp, "+", {var("x"), prod}};
    CHECK(parse_formula("x+y*z") == expected2);

    // juxtaposition is multiplication with an empty lexeme
    FormulaAst jux{AstKind::BinaryOp, "", {var("x"), var("y")}};
    CHECK(parse_formula("xy") == jux);

    // greek variables
    CHECK(parse_formula("\\alpha") == var("alpha"));
    CHECK(parse_formula("\\sin(x)") == FormulaAst{AstKind::UnaryFunc, "sin", {var("x")}});
}

TEST_CASE("parse: syntax errors carry byte offsets") {
    CHECK_THROWS_AS(parse_formula(""), SyntaxError);
    try {
        parse_formula("x+?");
        FAIL("expected SyntaxError");
    } catch (const SyntaxError& e) {
        CHECK(e.offset == 2);
    }
    try {
        parse_formula("x^{2");
        FAIL("expected SyntaxError");
    } catch (const SyntaxError& e) {
        CHECK(e.offset == 4);  // missing brace reported at end of input
    }
    CHECK_THROWS_AS(parse_formula("(x+y"), SyntaxError);
    CHECK_THROWS_AS(parse_formula("x+"), SyntaxError);
    CHECK_THROWS_AS(parse_formula("\\frac{a}"), SyntaxError);
    CHECK_THROWS_AS(parse_formula("\\foo"), SyntaxError);
    CHECK_THROWS_AS(parse_formula("3."), SyntaxError);
    CHECK_THROWS_AS(parse_formula("x^2"), SyntaxError);  // scripts need braces
}

TEST_CASE("build_slt: spec examples") {
    // Script(x, sup=2): V!x -SUP-> N!2, root V!x
    const MathGraph g1 = build_slt(parse_formula("x^{2}"));
    REQUIRE(g1.nodes.size() == 2);
    CHECK(g1.nodes[0].label == "V!x");
    CHECK(g1.nodes[1].label == "N!2");
    REQUIRE(g1.edges.size() == 1);
    CHECK(g1.edges[0] == GraphEdge{0, 1, "SUP"});
    CHECK(g1.root == 0);

    // Plus(x, y): V!x -NEXT-> O!add -NEXT-> V!y
    const MathGraph g2 = build_slt(parse_formula("x+y"));
    REQUIRE(g2.nodes.size() == 3);
    CHECK(g2.nodes[0].label == "V!x");
    CHECK(g2.nodes[1].label == "O!add");
    CHECK(g2.nodes[2].label == "V!y");
    CHECK(g2.edges == std::vector<GraphEdge>{{0, 1, "NEXT"}, {1, 2, "NEXT"}});
    CHECK(g2.root == 0);

    // Fraction(a, b): S!frac -OVER-> V!a, -UNDER-> V!b, root S!frac
    const MathGraph g3 = build_slt(parse_formula("\\frac{a}{b}"));
    REQUIRE(g3.nodes.size() == 3);
    CHECK(g3.nodes[0].label == "S!frac");
    CHECK(g3.root == 0);
    std::set<std::string> edge_labels;
    for (const auto& e : g3.edges) edge_labels.insert(e.label);
    CHECK(edge_labels == std::set<std::string>{"OVER", "UNDER"});
}

TEST_CASE("build_opt: spec examples") {
    // Plus(x, y): O!add -ARG0-> V!x, -ARG1-> V!y
    const MathGraph g1 = build_opt(parse_formula("x+y"));
    REQUIRE(g1.nodes.size() == 3);
    CHECK(g1.nodes[0].label == "O!add");
    CHECK(g1.root == 0);
    CHECK(g1.edges == std::vector<GraphEdge>{{0, 1, "ARG0"}, {0, 2, "ARG1"}});

    // parentheses are transparent in OPT
    CHECK(graph_signature(build_opt(parse_formula("(x+y)"))) ==
          graph_signature(build_opt(parse_formula("x+y"))));

    // \frac{a}{b}: S!frac -ARG0-> V!a, -ARG1-> V!b
    const MathGraph g3 = build_opt(parse_formula("\\frac{a}{b}"));
    REQUIRE(g3.nodes.size() == 3);
    CHECK(g3.nodes[0].label == "S!frac");
    CHECK(g3.edges == std::vector<GraphEdge>{{0, 1, "ARG0"}, {0, 2, "ARG1"}});
}

TEST_CASE("build_opt: scripts") {
    // sup becomes O!pow
    const MathGraph g = build_opt(parse_formula("x^{2}"));
    REQUIRE(g.nodes.size() == 3);
    CHECK(g.nodes[g.root].label == "O!pow");

    // sub folds into the variable label
    const MathGraph g2 = build_opt(parse_formula("x_{i}"));
    REQUIRE(g2.nodes.size() == 1);
    CHECK(g2.nodes[0].label == "V!x_i");

    // both: pow over the folded label
    const MathGraph g3 = build_opt(parse_formula("x^{2}_{i}"));
    CHECK(g3.nodes[g3.root].label == "O!pow");
    bool found = false;
    for (const auto& n : g3.nodes) found = found || n.label == "V!x_i";
    CHECK(found);
}

TEST_CASE("SLT parens stay, scripts attach to the last base symbol") {
    const MathGraph g = build_slt(parse_formula("(x+y)^{2}"));
    // chain: S!lparen V!x O!add V!y S!rparen, SUP off the rparen
    std::size_t rparen = 0;
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        if (g.nodes[i].label == "S!rparen") rparen = i;
    bool sup_from_rparen = false;
    for (const auto& e : g.edges)
        if (e.label == "SUP" && e.src == rparen) sup_from_rparen = true;
    CHECK(sup_from_rparen);
    check_rooted_tree(g);
}

TEST_CASE("graph_signature: determinism and order sensitivity") {
    CHECK(graph_signature(build_opt(parse_formula("x+y"))) ==
          graph_signature(build_opt(parse_formula("x+y"))));
    CHECK(graph_signature(build_opt(parse_formula("x+y"))) !=
          graph_signature(build_opt(parse_formula("y+x"))));
    // stable across runs: frozen literal
    CHECK(graph_signature(build_opt(parse_formula("x+y"))) ==
          "O!add(ARG0:V!x;ARG1:V!y;)");
    CHECK(graph_signature(build_slt(parse_formula("x+y"))) ==
          "V!x(NEXT:O!add(NEXT:V!y;);)");
}

TEST_CASE("topology_signature ignores lexemes but keeps structure") {
    CHECK(topology_signature(build_opt(parse_formula("x+y"))) ==
          topology_signature(build_opt(parse_formula("a+b"))));
    // operator lexemes are excluded too; only kinds and shape remain
    CHECK(topology_signature(build_opt(parse_formula("x+y"))) ==
          topology_signature(build_opt(parse_formula("x*y"))));
    CHECK(topology_signature(build_opt(parse_formula("x+y"))) !=
          topology_signature(build_opt(parse_formula("\\sin(x)"))));
    CHECK(topology_signature(build_slt(parse_formula("x^{2}"))) !=
          topology_signature(build_slt(parse_formula("x_{2}"))));
}

TEST_CASE("corpus loading") {
    const std::string path = "test_corpus_tmp.jsonl";
    {
        std::ofstream out(path, std::ios::trunc);
        out << "# comment line\n";
        out << R"({"id":"f1","latex":"x+y"})" << "\n";
        out << "\n";
        out << R"({"id":"f2","latex":"\\frac{a}{b}"})" << "\n";
    }
    const auto corpus = load_corpus(path);
    REQUIRE(corpus.size() == 2);
    CHECK(corpus[0].id == "f1");
    CHECK(corpus[1].id == "f2");

    {
        std::ofstream out(path, std::ios::trunc);
        out << R"({"id":"f1","latex":"x"})" << "\n";
        out << R"({"id":"f1","latex":"y"})" << "\n";
    }
    CHECK_THROWS_AS(load_corpus(path), DuplicateIdError);

    {
        std::ofstream out(path, std::ios::trunc);
        out << R"({"id":"f1","latex":"x"})" << "\n";
        out << R"({"id":"f2","latex":"x+?"})" << "\n";
    }
    try {
        load_corpus(path);
        FAIL("expected CorpusError");
    } catch (const CorpusError& e) {
        CHECK(e.line == 2);
        CHECK(std::string(e.what()).find("f2") != std::string::npos);
    }

    CHECK_THROWS_AS(load_corpus("does_not_exist.jsonl"), IoError);
    std::remove(path.c_str());
}

TEST_CASE("property: grammar-generated formulas build trees on both layouts") {
    Rng rng(7);
    for (int i = 0; i < 300; ++i) {
        const FormulaAst ast = random_formula(rng, 1 + rng.below(6));
        const std::string text = unparse(ast);
        CAPTURE(text);
        const FormulaAst reparsed = parse_formula(text);
        const MathGraph slt = build_slt(reparsed);
        const MathGraph opt = build_opt(reparsed);
        check_rooted_tree(slt);
        check_rooted_tree(opt);
        check_label_prefixes(slt);
        check_label_prefixes(opt);
    }
}

TEST_CASE("property: parse-unparse-parse is a fixpoint") {
    Rng rng(11);
    for (int i = 0; i < 300; ++i) {
        const FormulaAst gen = random_formula(rng, 1 + rng.below(6));
        const std::string text = unparse(gen);
        CAPTURE(text);
        const FormulaAst first = parse_formula(text);
        const FormulaAst second = parse_formula(unparse(first));
        CHECK(first == second);
    }
}

TEST_CASE("property: script/fraction/root-free formulas make pure NEXT-chains") {
    Rng rng(13);
    int checked = 0;
    for (int i = 0; i < 2000 && checked < 200; ++i) {
        const FormulaAst ast = random_formula(rng, 1 + rng.below(4));
        const std::string text = unparse(ast);
        if (text.find('^') != std::string::npos || text.find('_') != std::string::npos ||
            text.find("frac") != std::string::npos || text.find("sqrt") != std::string::npos)
            continue;
        ++checked;
        CAPTURE(text);
        const MathGraph slt = build_slt(parse_formula(text));
        CHECK(slt.nodes.size() == token_count(text));
        for (const GraphEdge& e : slt.edges) CHECK(e.label == "NEXT");
        CHECK(slt.edges.size() + 1 == slt.nodes.size());
    }
    CHECK(checked == 200);
}

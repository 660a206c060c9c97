// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "kbsynth/error.hpp"
#include "kbsynth/facts.hpp"

using namespace kbsynth;

namespace {

constexpr const char* kScatter = R"(
% size-encoded scatterplot
entity(view,root,v0).
entity(mark,v0,m0).
attribute((mark,type),m0,point).
entity(encoding,m0,e0).
attribute((encoding,channel),e0,x).
attribute((encoding,field),e0,"temp max").
entity(encoding,m0,e1).
attribute((encoding,channel),e1,size).
attribute((encoding,binning),e1,10).
entity(scale,v0,s0).
attribute((scale,channel),s0,size).
attribute((scale,type),s0,linear).
attribute(number_rows,root,100).
)";

ErrorKind kind_of(const std::string& text) {
  try {
    parse_design(text);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::IoError;
}

}  // namespace

TEST_CASE("fact program parses entities, attributes, comments and typed values") {
  auto r = parse_fact_program(kScatter);
  CHECK(r.facts.size() == 13);
  CHECK(r.unknownStatements.empty());
  const auto& field = r.facts[5];
  CHECK(field.kind == FactKind::Attribute);
  CHECK(field.entityType == "encoding");
  CHECK(field.attrName == "field");
  CHECK(field.value->text == "\"temp max\"");
  CHECK(r.facts[8].value->kind == ValueKind::Integer);
  CHECK(r.facts.back().entityType.empty());
  CHECK(r.facts.back().attrName == "number_rows");
}

TEST_CASE("decimal and negative values keep their lexical form") {
  auto r = parse_fact_program("entity(mark,root,m).\nattribute((mark,opacity),m,0.5).\nattribute((mark,dx),m,-3).\n");
  CHECK(r.facts[1].value->kind == ValueKind::Decimal);
  CHECK(r.facts[1].value->number() == doctest::Approx(0.5));
  CHECK(r.facts[2].value->kind == ValueKind::Integer);
  CHECK(r.facts[2].value->number() == -3);
}

TEST_CASE("unknown statements are collected, not fatal") {
  auto r = parse_fact_program("entity(view,root,v).\nhelper(v,1).\n");
  CHECK(r.facts.size() == 1);
  REQUIRE(r.unknownStatements.size() == 1);
}

TEST_CASE("AST mirrors the entity tree with per-type ordinals") {
  auto ast = parse_design(kScatter);
  REQUIRE(ast.root.children.size() == 1);
  const auto& view = ast.root.children[0];
  CHECK(view.entityType == "view");
  REQUIRE(view.children.size() == 2);
  const auto& mark = view.children[0];
  CHECK(mark.find("type")->text == "point");
  REQUIRE(mark.children.size() == 2);
  CHECK(mark.children[0].ordinal == 0);
  CHECK(mark.children[1].ordinal == 1);
  CHECK(mark.children[1].has("channel", "size"));
  CHECK(view.children[1].entityType == "scale");
  CHECK(view.children[1].ordinal == 0);
  CHECK(ast.root.find("number_rows")->text == "100");
}

TEST_CASE("malformed programs raise the documented error kinds") {
  CHECK(kind_of("entity(view,root,v") == ErrorKind::SyntaxError);
  CHECK(kind_of("attribute((mark,type),m9,bar).") == ErrorKind::DanglingReference);
  CHECK(kind_of("entity(mark,v9,m).") == ErrorKind::DanglingReference);
  CHECK(kind_of("entity(a,b,x).\nentity(b,x,y).\nentity(c,y,b).") == ErrorKind::CycleError);
  CHECK(kind_of("entity(root,root,root).\nentity(root,root,root).") == ErrorKind::MultipleRoots);
  CHECK(kind_of("entity(view,root,root).") == ErrorKind::MultipleRoots);
  CHECK(kind_of("entity(view,root,v).\nentity(mark,root,v).") == ErrorKind::SyntaxError);
}

TEST_CASE("dummy parents attach to the root and survive emission") {
  auto ast = parse_design("entity(scale,_,s).\nattribute((scale,type),s,log).\n");
  REQUIRE(ast.root.children.size() == 1);
  CHECK(ast.root.children[0].dummyParent);
  auto again = parse_design(emit_facts(ast));
  CHECK(again == ast);
}

TEST_CASE("emit then parse reproduces the tree") {
  auto ast = parse_design(kScatter);
  auto text = emit_facts(ast);
  auto back = parse_design(text);
  CHECK(back.root.children.size() == ast.root.children.size());
  CHECK(emit_facts(back) == text);
}

TEST_CASE("derived rules add counts, existence flags and mappings") {
  auto ast = parse_design(kScatter);
  std::vector<DerivedRule> rules{
      derived_rule_from_json({{"kind", "CountChildren"}, {"scope", "mark"}, {"child", "encoding"}}),
      derived_rule_from_json({{"kind", "ExistsChild"}, {"scope", "view"}, {"child", "scale"}}),
      derived_rule_from_json({{"kind", "MapValue"},
                              {"scope", "encoding"},
                              {"source", "channel"},
                              {"mapping", {{"x", "position"}, {"size", "magnitude"}}}})};
  auto out = apply_derived_rules(ast, rules);
  const auto& view = out.root.children[0];
  CHECK(view.find("has_scale")->text == "true");
  CHECK(view.children[0].find("n_encoding")->text == "2");
  CHECK(view.children[0].children[0].find("channel_mapped")->text == "position");
  CHECK(view.children[0].children[1].find("channel_mapped")->text == "magnitude");
  CHECK(apply_derived_rules(out, rules) == out);
}

TEST_CASE("derived rule clashing with an existing attribute is a name collision") {
  auto ast = parse_design("entity(mark,root,m).\nattribute((mark,n_encoding),m,7).\n");
  auto rule = derived_rule_from_json({{"kind", "CountChildren"}, {"scope", "mark"}, {"child", "encoding"}});
  try {
    apply_derived_rules(ast, {rule});
    FAIL("expected NameCollision");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NameCollision);
  }
}

TEST_CASE("corpus lines carry designs, source tags and fold hints") {
  const std::string text =
      R"({"positive": ["entity(view,root,v).", "entity(mark,v,m).", "attribute((mark,type),m,bar)."], "negative": ["entity(view,root,v)."], "source": "kim", "fold": 3})"
      "\n\n"
      R"({"positive": ["entity(view,root,v)."], "negative": ["entity(view,root,v)."], "fold": -1})"
      "\n";
  auto c = parse_corpus_jsonl(text);
  REQUIRE(c.size() == 2);
  CHECK(c.pairs[0].sourceTag == "kim");
  CHECK(c.pairs[0].foldHint == 3);
  CHECK(c.pairs[1].foldHint == -1);
  CHECK(c.design(0).root.children[0].children.size() == 1);
  CHECK(c.design(1).root.children[0].children.empty());
  CHECK_THROWS_AS(parse_corpus_jsonl("\n"), Error);
}

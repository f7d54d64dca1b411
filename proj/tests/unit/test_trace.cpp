#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "groundcheck/trace.hpp"
#include "helpers.hpp"

using namespace groundcheck;
using gc_test::line_with;

TEST_CASE("in-range record passes through unchanged") {
  ParseStats stats;
  auto t = parse_sequence(line_with({}), 1, stats);
  REQUIRE(t.tokens.size() == 1);
  CHECK(t.tokens[0].p_vid == 0.8);
  CHECK(t.tokens[0].cos_hid == 0.3);
  CHECK(stats.clamped == 0);
  CHECK(t.id == "s1");
}

TEST_CASE("zero probability is clamped and counted") {
  ParseStats stats;
  auto t = parse_sequence(line_with({{"p_null", 0.0}}), 1, stats);
  CHECK(t.tokens[0].p_null == doctest::Approx(1e-12).epsilon(1e-15));
  CHECK(t.tokens[0].p_null > 0.0);
  CHECK(stats.clamped == 1);

  ParseStats s2;
  auto t2 = parse_sequence(line_with({{"p_vid", 1.0}}), 1, s2);
  CHECK(t2.tokens[0].p_vid < 1.0);
  CHECK(s2.clamped == 1);
}

TEST_CASE("cosine outside [-1,1] is a validation error naming field and id") {
  try {
    parse_sequence(line_with({{"cos_hid", 1.5}}, "abc"), 4);
    FAIL("expected validation error");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "cos_hid");
    CHECK(e.id() == "abc");
    CHECK(std::string(e.what()).find("cos_hid out of [-1,1]") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_sequence(line_with({{"cos_hid", 2.0}})), ValidationError);
  auto t = parse_sequence(line_with({{"cos_hid", 1.0 + 5e-7}}));
  CHECK(t.tokens[0].cos_hid == 1.0);
}

TEST_CASE("probabilities outside [0,1] are rejected") {
  CHECK_THROWS_AS(parse_sequence(line_with({{"p_vid", 1.2}})), ValidationError);
  CHECK_THROWS_AS(parse_sequence(line_with({{"p_mis", -0.1}})), ValidationError);
  CHECK_THROWS_AS(parse_sequence(line_with({{"entropy", -1.0}})), ValidationError);
}

TEST_CASE("malformed records raise parse errors carrying the line number") {
  try {
    parse_sequence("{not json", 17);
    FAIL("expected parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 17);
  }
  CHECK_THROWS_AS(parse_sequence(line_with({{"p_vid", nullptr}}), 3), ParseError);
  CHECK_THROWS_AS(parse_sequence("[1,2,3]", 3), ParseError);
  CHECK_THROWS_AS(parse_sequence(line_with({{"p_vid", "high"}}), 3), ParseError);
}

TEST_CASE("unknown fields are ignored") {
  auto j = nlohmann::json::parse(line_with({{"extra_token_field", 1}}));
  j["something_else"] = {{"a", 1}};
  auto t = parse_sequence(j.dump());
  CHECK(t.tokens.size() == 1);
}

TEST_CASE("raw hidden vectors are audited against the stored cosine") {
  auto j = nlohmann::json::parse(line_with({{"cos_hid", 0.0}}));
  j["tokens"][0]["h_vid"] = {1.0, 0.0};
  j["tokens"][0]["h_null"] = {0.0, 2.0};
  CHECK_NOTHROW(parse_sequence(j.dump()));
  j["tokens"][0]["cos_hid"] = 0.5;
  CHECK_THROWS_AS(parse_sequence(j.dump()), ValidationError);
}

TEST_CASE("round trip preserves every field") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<TokenRecord> toks;
    const int n = 1 + rep % 7;
    for (int i = 0; i < n; ++i) {
      auto t = gc_test::token(std::max(u(rng), 1e-12), std::max(u(rng), 1e-12), std::max(u(rng), 1e-12),
                              2 * u(rng) - 1, u(rng), u(rng), 5 * u(rng));
      t.text = "tok\"" + std::to_string(i) + " ü";
      toks.push_back(t);
    }
    auto s = gc_test::trace("id" + std::to_string(rep), toks, "hyp é", "ref\nline");
    auto back = parse_sequence(serialize_sequence(s));
    REQUIRE(back.tokens.size() == s.tokens.size());
    CHECK(back.id == s.id);
    CHECK(back.hypothesis == s.hypothesis);
    CHECK(back.reference == s.reference);
    for (int i = 0; i < n; ++i) {
      CHECK(back.tokens[i].text == s.tokens[i].text);
      CHECK(std::abs(back.tokens[i].p_vid - s.tokens[i].p_vid) <= 1e-12);
      CHECK(std::abs(back.tokens[i].p_null - s.tokens[i].p_null) <= 1e-12);
      CHECK(std::abs(back.tokens[i].p_mis - s.tokens[i].p_mis) <= 1e-12);
      CHECK(std::abs(back.tokens[i].cos_hid - s.tokens[i].cos_hid) <= 1e-12);
      CHECK(std::abs(back.tokens[i].attn_vid - s.tokens[i].attn_vid) <= 1e-12);
      CHECK(std::abs(back.tokens[i].entropy - s.tokens[i].entropy) <= 1e-12);
    }
  }
}

TEST_CASE("validation is total over arbitrary lines") {
  std::vector<std::string> lines = {"", "{}", "null", "{\"id\":1}", line_with({}), line_with({{"cos_hid", 9}}),
                                    line_with({{"p_vid", 0}}), "{\"tokens\":[]}", "\xff\xfe", "[[[["};
  std::mt19937_64 rng(9);
  const std::string good = line_with({});
  for (int i = 0; i < 300; ++i) {
    std::string s = good;
    s.erase(rng() % s.size(), 1 + rng() % 5);
    lines.push_back(s);
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    ParseStats stats;
    LineResult r;
    CHECK_NOTHROW(r = validate_line(lines[i], i + 1, stats));
    if (auto* e = std::get_if<LineError>(&r)) {
      CHECK((e->kind == "parse" || e->kind == "validation"));
      CHECK(e->line == i + 1);
      CHECK(!e->message.empty());
    }
  }
}

TEST_CASE("reading a stream rejects duplicate ids and skips blank lines") {
  std::stringstream ok(line_with({}, "a") + "\n\n" + line_with({}, "b") + "\n");
  CHECK(read_traces(ok).size() == 2);
  std::stringstream dup(line_with({}, "a") + "\n" + line_with({}, "a") + "\n");
  CHECK_THROWS_AS(read_traces(dup), ValidationError);
}

TEST_CASE("split: single trace with (1,0,0) goes to train") {
  SplitSpec spec{1.0, 0.0, 0.0, "s0"};
  auto p = split_dataset({gc_test::trace("only", {gc_test::token(0.5, 0.5, 0.5)})}, spec);
  CHECK(p.train.size() == 1);
  CHECK(p.val.empty());
  CHECK(p.test.empty());
}

TEST_CASE("split: deterministic, exhaustive and disjoint") {
  std::vector<SequenceTrace> traces;
  for (int i = 0; i < 100; ++i) traces.push_back(gc_test::trace("seq-" + std::to_string(i), {}));
  SplitSpec spec;
  auto a = split_dataset(traces, spec);
  auto b = split_dataset(traces, spec);
  CHECK(a.train == b.train);
  CHECK(a.val == b.val);
  CHECK(a.test == b.test);
  std::set<std::string> seen;
  for (auto* part : {&a.train, &a.val, &a.test})
    for (auto& t : *part) CHECK(seen.insert(t.id).second);
  CHECK(seen.size() == 100);
}

TEST_CASE("split: 10k ids at (0.7,0.15,0.15) give train fraction in [0.68,0.72]") {
  SplitSpec spec{0.7, 0.15, 0.15, "s0"};
  std::size_t counts[3] = {0, 0, 0};
  const int n = 10000;
  for (int i = 0; i < n; ++i) counts[static_cast<int>(assign_split("id-" + std::to_string(i), spec))]++;
  const double train = counts[0] / double(n);
  CHECK(train >= 0.68);
  CHECK(train <= 0.72);
  const double tol = 2.0 / std::sqrt(double(n));
  CHECK(std::abs(counts[1] / double(n) - 0.15) <= tol);
  CHECK(std::abs(counts[2] / double(n) - 0.15) <= tol);
}

TEST_CASE("split: salt changes assignment, bad fractions rejected") {
  int moved = 0;
  for (int i = 0; i < 200; ++i) {
    auto id = "x" + std::to_string(i);
    moved += assign_split(id, SplitSpec{0.5, 0.0, 0.5, "a"}) != assign_split(id, SplitSpec{0.5, 0.0, 0.5, "b"});
  }
  CHECK(moved > 50);
  CHECK_THROWS(SplitSpec{0.5, 0.5, 0.5, "s"}.validate());
  CHECK_THROWS(parse_split_fractions("0.5,0.5", "s"));
  auto s = parse_split_fractions("0.7,0.15,0.15", "q");
  CHECK(s.train == 0.7);
  CHECK(s.salt == "q");
  std::vector<SequenceTrace> dup = {gc_test::trace("d", {}), gc_test::trace("d", {})};
  CHECK_THROWS_AS(split_dataset(dup, SplitSpec{}), ValidationError);
}

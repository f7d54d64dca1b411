#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <unistd.h>

#include "groundcheck/cli.hpp"

namespace fs = std::filesystem;
using groundcheck::run_cli;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).string()] = slurp(e.path());
  return files;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("groundcheck-cli-" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

void run_all(const TempDir& d) {
  REQUIRE(run({"synth", "-o", d / "t.jsonl", "--n", "300", "--seed", "5"}).code == 0);
  REQUIRE(run({"validate", d / "t.jsonl"}).code == 0);
  REQUIRE(run({"score", d / "t.jsonl", "-o", d / "s.jsonl"}).code == 0);
  REQUIRE(run({"fit", d / "s.jsonl", "-o", d / "m.json"}).code == 0);
  REQUIRE(run({"fit", d / "s.jsonl", "-o", d / "r.json", "--task", "regress"}).code == 0);
  REQUIRE(run({"eval", d / "m.json", d / "s.jsonl", "-o", d / "e.csv"}).code == 0);
  REQUIRE(run({"degrade", d / "t.jsonl", "-o", d / "d.jsonl", "--level", "0.2"}).code == 0);
  REQUIRE(run({"score", d / "d.jsonl", "-o", d / "ds.jsonl"}).code == 0);
  REQUIRE(run({"transfer", "--model", d / "r.json", "--data", d / "s.jsonl", "--name", "a", "-o", d / "tr.csv"})
              .code == 0);
  REQUIRE(run({"report", d / "r.json", d / "s.jsonl", "--out-dir", d / "rep", "--sweep", "0=" + (d / "s.jsonl"),
               "--sweep", "0.2=" + (d / "ds.jsonl")})
              .code == 0);
}

}  // namespace

TEST_CASE("every command is byte-identical on re-run") {
  TempDir d;
  run_all(d);
  auto first = snapshot(d.path);
  CHECK(first.count("m.json.manifest.json") == 1);
  CHECK(first.count("rep/reliability_chair.svg") == 1);
  CHECK(first.count("rep/degradation.csv") == 1);
  run_all(d);
  auto second = snapshot(d.path);
  CHECK(first.size() == second.size());
  for (const auto& [name, bytes] : first) {
    INFO(name);
    CHECK(second[name] == bytes);
  }
}

TEST_CASE("inputs are never modified") {
  TempDir d;
  REQUIRE(run({"synth", "-o", d / "t.jsonl", "--n", "50"}).code == 0);
  const auto before = slurp(d / "t.jsonl");
  CHECK(run({"score", d / "t.jsonl", "-o", d / "t.jsonl"}).code != 0);
  REQUIRE(run({"score", d / "t.jsonl", "-o", d / "s.jsonl"}).code == 0);
  REQUIRE(run({"degrade", d / "t.jsonl", "-o", d / "x.jsonl", "--level", "0.4", "--mode", "frame-drop"}).code == 0);
  CHECK(slurp(d / "t.jsonl") == before);
}

TEST_CASE("exit codes and error lines") {
  TempDir d;
  auto usage = run({"frobnicate"});
  CHECK(usage.code == 1);
  CHECK(run({"score"}).code == 1);
  CHECK(run({"fit", d / "missing.jsonl", "-o", d / "m.json"}).code == 2);

  {
    std::ofstream bad(d / "bad.jsonl");
    bad << R"({"id":"q","dataset":"d","model":"m","reference":"r","hypothesis":"h","tokens":[{"text":"w","p_vid":0.5,"p_null":0.5,"p_mis":0.5,"entropy":1,"cos_hid":2,"attn_vid":0.1,"attn_null":0.1}]})"
        << "\n";
  }
  auto v = run({"validate", d / "bad.jsonl"});
  CHECK(v.code == 2);
  CHECK(v.err.find("groundcheck: error kind=validation") != std::string::npos);
  CHECK(v.err.find("field=cos_hid") != std::string::npos);
  CHECK(v.err.find("id=q") != std::string::npos);

  {
    std::ofstream junk(d / "junk.jsonl");
    junk << "{\"id\": \n";
  }
  auto p = run({"validate", d / "junk.jsonl"});
  CHECK(p.code == 2);
  CHECK(p.err.find("invalid line=1 kind=parse msg=") != std::string::npos);

  // all sequences hallucination-free: single-class fit is a numeric failure
  REQUIRE(run({"synth", "-o", d / "clean.jsonl", "--n", "40", "--config", d / "cfg.json"}).code == 2);
  {
    std::ofstream cfg(d / "cfg.json");
    cfg << R"({"profile": "gf-like", "grounded_rate": 1.0})";
  }
  REQUIRE(run({"synth", "-o", d / "clean.jsonl", "--n", "40", "--config", d / "cfg.json"}).code == 0);
  REQUIRE(run({"score", d / "clean.jsonl", "-o", d / "clean_s.jsonl"}).code == 0);
  auto n = run({"fit", d / "clean_s.jsonl", "-o", d / "m.json"});
  CHECK(n.code == 3);
  CHECK(n.err.find("kind=numeric") != std::string::npos);
}

TEST_CASE("mediation and defaults") {
  auto m = run({"mediation"});
  CHECK(m.code == 0);
  CHECK(m.out.find("exact 0.160000") != std::string::npos);
  CHECK(m.out.find("mc_within_tolerance true") != std::string::npos);
  auto defaults = run({"--show-defaults"});
  CHECK(defaults.code == 0);
  CHECK(defaults.out.find("gc-grounding-v1") != std::string::npos);
  CHECK(run({"--version"}).code == 0);
}

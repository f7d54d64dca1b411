#include "groundcheck/scoring.hpp"

#include <fstream>
#include <istream>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace groundcheck {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

const char* const kTokenSignalFields[] = {"s_hid", "s_attn", "s_log", "s_logit", "s_prob",
                                          "delta_clean", "delta_mis", "conf", "ent", "ppl"};

double signal_field(const json& sig, const char* name, const std::string& id, std::size_t line_no) {
  auto it = sig.find(name);
  if (it == sig.end()) throw ValidationError(name, id, std::string("missing signal '") + name + "'");
  if (!it->is_number()) throw ParseError(line_no, std::string("signal '") + name + "' must be a number");
  return it->get<double>();
}

}  // namespace

ScoredSequence score_sequence(const SequenceTrace& trace, const ScoreOptions& options) {
  if (options.weights.include_raw_probs() != options.signals.include_raw_probs) {
    throw ValidationError("feature_order", trace.id,
                          "fusion weights and raw-probability flag disagree on the feature layout");
  }
  ScoredSequence s;
  s.trace = trace;
  s.include_raw_probs = options.signals.include_raw_probs;
  s.signals = signal_matrix(trace, options.signals);
  const auto r = fuse_sequence(s.signals, options.weights);
  s.reliability = pool(r, options.pooling);
  return s;
}

std::vector<ScoredSequence> score_all(const std::vector<SequenceTrace>& traces,
                                      const ScoreOptions& options) {
  std::vector<ScoredSequence> out;
  out.reserve(traces.size());
  for (const auto& t : traces) out.push_back(score_sequence(t, options));
  return out;
}

std::string serialize_scored(const ScoredSequence& scored) {
  ordered_json j = ordered_json::parse(serialize_sequence(scored.trace));
  auto& tokens = j["tokens"];
  for (std::size_t t = 0; t < scored.signals.size(); ++t) {
    const auto& v = scored.signals[t];
    ordered_json sig;
    sig["s_hid"] = v.s_hid;
    sig["s_attn"] = v.s_attn;
    sig["s_log"] = v.s_log;
    sig["s_logit"] = v.s_logit;
    sig["s_prob"] = v.s_prob;
    sig["delta_clean"] = v.delta_clean;
    sig["delta_mis"] = v.delta_mis;
    if (v.has_raw_probs()) {
      sig["p_vid_raw"] = *v.p_vid_raw;
      sig["p_null_raw"] = *v.p_null_raw;
    }
    sig["conf"] = v.conf;
    sig["ent"] = v.ent;
    sig["ppl"] = v.ppl;
    sig["r"] = scored.reliability.r_tokens.at(t);
    tokens[t]["signals"] = std::move(sig);
  }
  const auto& rel = scored.reliability;
  ordered_json pooled;
  pooled["r_mean"] = rel.mean;
  pooled["r_tail_q"] = rel.tail;
  pooled["r_harm"] = rel.harm;
  pooled["r_min"] = rel.min;
  pooled["r_ema"] = rel.ema;
  pooled["q"] = rel.params.q;
  pooled["alpha"] = rel.params.alpha;
  pooled["epsilon"] = rel.params.epsilon;
  pooled["ema_direction"] = "forward-final";
  j["pooled"] = std::move(pooled);
  j["feature_order"] = std::string(kFeatureOrderTag);
  j["include_raw_probs"] = scored.include_raw_probs;
  return j.dump();
}

ScoredSequence parse_scored(std::string_view line, std::size_t line_no) {
  ScoredSequence s;
  s.trace = parse_sequence(line, line_no);
  const json j = json::parse(line.begin(), line.end());
  const std::string& id = s.trace.id;

  const std::string order = j.value("feature_order", std::string());
  if (order != kFeatureOrderTag) {
    throw ValidationError("feature_order", id, "unsupported feature order '" + order + "'");
  }
  s.include_raw_probs = j.value("include_raw_probs", false);

  std::vector<double> r;
  const auto& tokens = j.at("tokens");
  for (const auto& tok : tokens) {
    auto it = tok.find("signals");
    if (it == tok.end() || !it->is_object()) throw ValidationError("signals", id, "token has no signals record");
    const json& sig = *it;
    TokenSignalVector v;
    double* dst[] = {&v.s_hid, &v.s_attn, &v.s_log, &v.s_logit, &v.s_prob,
                     &v.delta_clean, &v.delta_mis, &v.conf, &v.ent, &v.ppl};
    for (std::size_t k = 0; k < std::size(kTokenSignalFields); ++k) {
      *dst[k] = signal_field(sig, kTokenSignalFields[k], id, line_no);
    }
    if (s.include_raw_probs) {
      v.p_vid_raw = signal_field(sig, "p_vid_raw", id, line_no);
      v.p_null_raw = signal_field(sig, "p_null_raw", id, line_no);
    }
    r.push_back(signal_field(sig, "r", id, line_no));
    s.signals.push_back(std::move(v));
  }

  auto pit = j.find("pooled");
  if (pit == j.end()) throw ValidationError("pooled", id, "missing pooled record");
  PoolingParams params;
  params.q = pit->value("q", params.q);
  params.alpha = pit->value("alpha", params.alpha);
  params.epsilon = pit->value("epsilon", params.epsilon);
  s.reliability = pool(r, params);
  return s;
}

std::vector<ScoredSequence> read_scored(std::istream& in) {
  std::vector<ScoredSequence> out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto s = parse_scored(line, line_no);
    if (!seen.insert(s.trace.id).second) throw ValidationError("id", s.trace.id, "duplicate id");
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<ScoredSequence> read_scored_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open scored trace file: " + path);
  return read_scored(in);
}

void write_scored_file(const std::string& path, const std::vector<ScoredSequence>& scored) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write scored trace file: " + path);
  for (const auto& s : scored) out << serialize_scored(s) << '\n';
}

}  // namespace groundcheck

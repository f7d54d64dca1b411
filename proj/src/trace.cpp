#include "groundcheck/trace.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "groundcheck/hashing.hpp"

namespace groundcheck {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

const json& require(const json& obj, const char* key, std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(line_no, std::string("missing field '") + key + "'");
  return *it;
}

std::string get_string(const json& obj, const char* key, std::size_t line_no) {
  const json& v = require(obj, key, line_no);
  if (!v.is_string()) throw ParseError(line_no, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

double get_number(const json& obj, const char* key, std::size_t line_no) {
  const json& v = require(obj, key, line_no);
  if (!v.is_number()) throw ParseError(line_no, std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

std::optional<std::vector<double>> get_vector(const json& obj, const char* key,
                                              std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_array()) throw ParseError(line_no, std::string("field '") + key + "' must be an array");
  std::vector<double> out;
  out.reserve(it->size());
  for (const auto& x : *it) {
    if (!x.is_number()) throw ParseError(line_no, std::string("field '") + key + "' must hold numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

// Probabilities in [0,1] are clamped; anything else is a validation error.
double clamp_probability(double p, const char* field, const std::string& id, ParseStats& stats) {
  if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
    throw ValidationError(field, id, std::string(field) + " out of [0,1]");
  }
  if (p < kProbEpsilon) {
    ++stats.clamped;
    return kProbEpsilon;
  }
  if (p > 1.0 - kProbEpsilon) {
    ++stats.clamped;
    return 1.0 - kProbEpsilon;
  }
  return p;
}

double vector_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  long double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<long double>(a[i]) * b[i];
    na += static_cast<long double>(a[i]) * a[i];
    nb += static_cast<long double>(b[i]) * b[i];
  }
  return static_cast<double>(dot / std::sqrt(na * nb));
}

void check_token(const TokenRecord& t, const std::string& id) {
  auto in_prob_range = [](double p) {
    return std::isfinite(p) && p >= kProbEpsilon && p <= 1.0 - kProbEpsilon;
  };
  if (!in_prob_range(t.p_vid)) throw ValidationError("p_vid", id, "p_vid out of [eps,1-eps]");
  if (!in_prob_range(t.p_null)) throw ValidationError("p_null", id, "p_null out of [eps,1-eps]");
  if (!in_prob_range(t.p_mis)) throw ValidationError("p_mis", id, "p_mis out of [eps,1-eps]");
  if (!std::isfinite(t.cos_hid) || t.cos_hid < -1.0 || t.cos_hid > 1.0) {
    throw ValidationError("cos_hid", id, "cos_hid out of [-1,1]");
  }
  if (!std::isfinite(t.entropy) || t.entropy < 0.0) {
    throw ValidationError("entropy", id, "entropy must be finite and >= 0");
  }
  if (!std::isfinite(t.attn_vid) || t.attn_vid < 0.0) {
    throw ValidationError("attn_vid", id, "attn_vid must be finite and >= 0");
  }
  if (!std::isfinite(t.attn_null) || t.attn_null < 0.0) {
    throw ValidationError("attn_null", id, "attn_null must be finite and >= 0");
  }
  if (t.h_vid.has_value() != t.h_null.has_value()) {
    throw ValidationError("h_vid", id, "h_vid and h_null must be given together");
  }
  if (t.h_vid) {
    if (t.h_vid->empty() || t.h_vid->size() != t.h_null->size()) {
      throw ValidationError("h_vid", id, "h_vid and h_null must be nonempty with equal dimension");
    }
    const double c = vector_cosine(*t.h_vid, *t.h_null);
    if (!std::isfinite(c)) throw ValidationError("h_vid", id, "hidden vectors have zero norm");
    if (std::abs(c - t.cos_hid) > kCosineAuditTolerance) {
      throw ValidationError("cos_hid", id, "cos_hid disagrees with raw hidden vectors");
    }
  }
}

TokenRecord decode_token(const json& j, const std::string& id, std::size_t line_no,
                         ParseStats& stats) {
  if (!j.is_object()) throw ParseError(line_no, "token entries must be objects");
  TokenRecord t;
  t.text = get_string(j, "text", line_no);
  t.p_vid = clamp_probability(get_number(j, "p_vid", line_no), "p_vid", id, stats);
  t.p_null = clamp_probability(get_number(j, "p_null", line_no), "p_null", id, stats);
  t.p_mis = clamp_probability(get_number(j, "p_mis", line_no), "p_mis", id, stats);
  t.entropy = get_number(j, "entropy", line_no);
  t.cos_hid = get_number(j, "cos_hid", line_no);
  // Extractors in reduced precision can overshoot +/-1 by roundoff.
  if (std::isfinite(t.cos_hid) && std::abs(t.cos_hid) > 1.0 &&
      std::abs(t.cos_hid) <= 1.0 + kCosineAuditTolerance) {
    t.cos_hid = std::copysign(1.0, t.cos_hid);
  }
  t.attn_vid = get_number(j, "attn_vid", line_no);
  t.attn_null = get_number(j, "attn_null", line_no);
  t.h_vid = get_vector(j, "h_vid", line_no);
  t.h_null = get_vector(j, "h_null", line_no);
  check_token(t, id);
  return t;
}

}  // namespace

SequenceTrace parse_sequence(std::string_view line, std::size_t line_no, ParseStats& stats) {
  json j;
  try {
    j = json::parse(line.begin(), line.end());
  } catch (const json::parse_error& e) {
    throw ParseError(line_no, std::string("malformed record: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(line_no, "record must be an object");

  SequenceTrace trace;
  trace.id = get_string(j, "id", line_no);
  if (trace.id.empty()) throw ValidationError("id", "", "id must be nonempty");
  trace.dataset = get_string(j, "dataset", line_no);
  trace.model = get_string(j, "model", line_no);
  trace.reference = get_string(j, "reference", line_no);
  trace.hypothesis = get_string(j, "hypothesis", line_no);
  const json& tokens = require(j, "tokens", line_no);
  if (!tokens.is_array()) throw ParseError(line_no, "field 'tokens' must be an array");
  if (tokens.empty()) throw ValidationError("tokens", trace.id, "tokens must hold at least one record");
  trace.tokens.reserve(tokens.size());
  ParseStats local;
  for (const auto& t : tokens) trace.tokens.push_back(decode_token(t, trace.id, line_no, local));
  stats.clamped += local.clamped;
  return trace;
}

SequenceTrace parse_sequence(std::string_view line, std::size_t line_no) {
  ParseStats stats;
  return parse_sequence(line, line_no, stats);
}

void validate_sequence(const SequenceTrace& trace) {
  if (trace.id.empty()) throw ValidationError("id", "", "id must be nonempty");
  if (trace.tokens.empty()) throw ValidationError("tokens", trace.id, "tokens must hold at least one record");
  for (const auto& t : trace.tokens) check_token(t, trace.id);
}

std::string serialize_sequence(const SequenceTrace& trace) {
  ordered_json j;
  j["id"] = trace.id;
  j["dataset"] = trace.dataset;
  j["model"] = trace.model;
  j["reference"] = trace.reference;
  j["hypothesis"] = trace.hypothesis;
  ordered_json tokens = ordered_json::array();
  for (const auto& t : trace.tokens) {
    ordered_json o;
    o["text"] = t.text;
    o["p_vid"] = t.p_vid;
    o["p_null"] = t.p_null;
    o["p_mis"] = t.p_mis;
    o["entropy"] = t.entropy;
    o["cos_hid"] = t.cos_hid;
    o["attn_vid"] = t.attn_vid;
    o["attn_null"] = t.attn_null;
    if (t.h_vid) o["h_vid"] = *t.h_vid;
    if (t.h_null) o["h_null"] = *t.h_null;
    tokens.push_back(std::move(o));
  }
  j["tokens"] = std::move(tokens);
  return j.dump();
}

LineResult validate_line(std::string_view line, std::size_t line_no, ParseStats& stats) {
  try {
    return parse_sequence(line, line_no, stats);
  } catch (const ParseError& e) {
    return LineError{line_no, "parse", "", "", e.what()};
  } catch (const ValidationError& e) {
    return LineError{line_no, "validation", e.field(), e.id(), e.what()};
  }
}

std::vector<SequenceTrace> read_traces(std::istream& in, ParseStats* stats) {
  ParseStats local;
  std::vector<SequenceTrace> out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    SequenceTrace t = parse_sequence(line, line_no, local);
    if (!seen.insert(t.id).second) throw ValidationError("id", t.id, "duplicate id");
    out.push_back(std::move(t));
  }
  if (stats) stats->clamped += local.clamped;
  return out;
}

std::vector<SequenceTrace> read_trace_file(const std::string& path, ParseStats* stats) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trace file: " + path);
  return read_traces(in, stats);
}

void write_traces(std::ostream& out, const std::vector<SequenceTrace>& traces) {
  for (const auto& t : traces) out << serialize_sequence(t) << '\n';
}

void write_trace_file(const std::string& path, const std::vector<SequenceTrace>& traces) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write trace file: " + path);
  write_traces(out, traces);
}

void SplitSpec::validate() const {
  for (double f : {train, val, test}) {
    if (!(f >= 0.0 && f <= 1.0)) throw ValidationError("split", "", "split fractions must lie in [0,1]");
  }
  if (std::abs(train + val + test - 1.0) > 1e-9) {
    throw ValidationError("split", "", "split fractions must sum to 1");
  }
}

double split_key(std::string_view id, std::string_view salt) {
  std::uint64_t h = fnv1a64(salt);
  h = fnv1a64("\x1f", h);
  h = fnv1a64(id, h);
  return to_unit_interval(splitmix64(h));
}

SplitPart assign_split(std::string_view id, const SplitSpec& spec) {
  const double u = split_key(id, spec.salt);
  if (u < spec.train) return SplitPart::Train;
  if (u < spec.train + spec.val) return SplitPart::Val;
  return SplitPart::Test;
}

Partition<SequenceTrace> split_dataset(const std::vector<SequenceTrace>& traces,
                                       const SplitSpec& spec) {
  spec.validate();
  std::unordered_set<std::string> seen;
  Partition<SequenceTrace> out;
  for (const auto& t : traces) {
    if (!seen.insert(t.id).second) throw ValidationError("id", t.id, "duplicate id");
    switch (assign_split(t.id, spec)) {
      case SplitPart::Train: out.train.push_back(t); break;
      case SplitPart::Val: out.val.push_back(t); break;
      case SplitPart::Test: out.test.push_back(t); break;
    }
  }
  return out;
}

SplitSpec parse_split_fractions(std::string_view csv, std::string salt) {
  std::vector<double> parts;
  std::stringstream ss{std::string(csv)};
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      parts.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ValidationError("split", "", "bad split fraction '" + item + "'");
    }
  }
  if (parts.size() != 3) throw ValidationError("split", "", "split needs three fractions train,val,test");
  SplitSpec spec{parts[0], parts[1], parts[2], std::move(salt)};
  spec.validate();
  return spec;
}

std::string_view to_string(SplitPart part) {
  switch (part) {
    case SplitPart::Train: return "train";
    case SplitPart::Val: return "val";
    case SplitPart::Test: return "test";
  }
  return "test";
}

SplitPart parse_split_part(std::string_view name) {
  if (name == "train") return SplitPart::Train;
  if (name == "val") return SplitPart::Val;
  if (name == "test") return SplitPart::Test;
  throw ValidationError("split", "", "unknown split part '" + std::string(name) + "'");
}

}  // namespace groundcheck

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "groundcheck/trace.hpp"

namespace gc_test {

inline groundcheck::TokenRecord token(double p_vid, double p_null, double p_mis, double cos = 1.0,
                                      double attn_vid = 0.3, double attn_null = 0.3,
                                      double entropy = 1.0) {
  groundcheck::TokenRecord t;
  t.text = "w";
  t.p_vid = p_vid;
  t.p_null = p_null;
  t.p_mis = p_mis;
  t.cos_hid = cos;
  t.attn_vid = attn_vid;
  t.attn_null = attn_null;
  t.entropy = entropy;
  return t;
}

inline groundcheck::SequenceTrace trace(std::string id, std::vector<groundcheck::TokenRecord> tokens,
                                        std::string hypothesis = "a b", std::string reference = "a b") {
  groundcheck::SequenceTrace s;
  s.id = std::move(id);
  s.dataset = "unit";
  s.model = "unit";
  s.reference = std::move(reference);
  s.hypothesis = std::move(hypothesis);
  s.tokens = std::move(tokens);
  return s;
}

/// Wire-format line with one token whose fields can be overridden.
inline std::string line_with(const nlohmann::json& token_overrides, const std::string& id = "s1") {
  nlohmann::json tok = {{"text", "w"},     {"p_vid", 0.8},    {"p_null", 0.1},     {"p_mis", 0.2},
                        {"entropy", 1.0},  {"cos_hid", 0.3},  {"attn_vid", 0.4},   {"attn_null", 0.2}};
  for (auto it = token_overrides.begin(); it != token_overrides.end(); ++it) {
    if (it->is_null()) tok.erase(it.key());
    else tok[it.key()] = *it;
  }
  nlohmann::json j = {{"id", id}, {"dataset", "d"}, {"model", "m"}, {"reference", "r"}, {"hypothesis", "h"},
                      {"tokens", {tok}}};
  return j.dump();
}

}  // namespace gc_test

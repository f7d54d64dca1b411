#pragma once

// Decoder-trace records and their newline-delimited JSON wire format.
//
// One line holds one SequenceTrace. Each token carries the probability of the
// clean-pass token under the clean, no-video and mismatched-video passes plus
// the hidden-state cosine and aggregated cross-attention masses. Files may be
// concatenated; unknown fields are ignored.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "groundcheck/errors.hpp"

namespace groundcheck {

/// Guard used for every probability that is later logged.
inline constexpr double kProbEpsilon = 1e-12;

/// Tolerance between a stored cosine and one recomputed from raw vectors.
inline constexpr double kCosineAuditTolerance = 1e-6;

struct TokenRecord {
  std::string text;
  double p_vid = 0.5;
  double p_null = 0.5;
  double p_mis = 0.5;
  double entropy = 0.0;    ///< nats, clean pass, full vocabulary
  double cos_hid = 1.0;    ///< clean vs. no-video final hidden state
  double attn_vid = 0.0;   ///< mean cross-attention mass, clean pass
  double attn_null = 0.0;  ///< same, no-video pass
  std::optional<std::vector<double>> h_vid;
  std::optional<std::vector<double>> h_null;

  bool operator==(const TokenRecord&) const = default;
};

struct SequenceTrace {
  std::string id;
  std::string dataset;
  std::string model;
  std::string reference;
  std::string hypothesis;
  std::vector<TokenRecord> tokens;

  bool operator==(const SequenceTrace&) const = default;
};

struct ParseStats {
  std::size_t clamped = 0;  ///< probabilities pulled into [eps, 1-eps]
};

/// Decodes and validates one wire-format line. Probabilities inside [0,1]
/// are clamped into [eps, 1-eps] and counted in `stats`; anything
/// structurally impossible raises ParseError or ValidationError.
SequenceTrace parse_sequence(std::string_view line, std::size_t line_no, ParseStats& stats);
SequenceTrace parse_sequence(std::string_view line, std::size_t line_no = 0);

/// Checks every invariant of an in-memory trace (no clamping).
void validate_sequence(const SequenceTrace& trace);

std::string serialize_sequence(const SequenceTrace& trace);

/// Outcome of validating one line: a record or a structured error.
struct LineError {
  std::size_t line = 0;
  std::string kind;   ///< "parse" or "validation"
  std::string field;  ///< empty for parse errors
  std::string id;
  std::string message;
};
using LineResult = std::variant<SequenceTrace, LineError>;

LineResult validate_line(std::string_view line, std::size_t line_no, ParseStats& stats);

/// Reads every record; blank lines are skipped. Throws on the first bad line
/// or on a duplicate id.
std::vector<SequenceTrace> read_traces(std::istream& in, ParseStats* stats = nullptr);
std::vector<SequenceTrace> read_trace_file(const std::string& path, ParseStats* stats = nullptr);
void write_traces(std::ostream& out, const std::vector<SequenceTrace>& traces);
void write_trace_file(const std::string& path, const std::vector<SequenceTrace>& traces);

struct SplitSpec {
  double train = 0.6;
  double val = 0.1;
  double test = 0.3;
  std::string salt = "s0";

  void validate() const;
};

enum class SplitPart { Train, Val, Test };

/// Pure function of (id, salt): uniform draw in [0,1) used for assignment.
double split_key(std::string_view id, std::string_view salt);
SplitPart assign_split(std::string_view id, const SplitSpec& spec);

template <typename T>
struct Partition {
  std::vector<T> train;
  std::vector<T> val;
  std::vector<T> test;

  const std::vector<T>& part(SplitPart p) const {
    return p == SplitPart::Train ? train : (p == SplitPart::Val ? val : test);
  }
  std::vector<T>& part(SplitPart p) {
    return p == SplitPart::Train ? train : (p == SplitPart::Val ? val : test);
  }
};

Partition<SequenceTrace> split_dataset(const std::vector<SequenceTrace>& traces,
                                       const SplitSpec& spec);

SplitSpec parse_split_fractions(std::string_view csv, std::string salt);
std::string_view to_string(SplitPart part);
SplitPart parse_split_part(std::string_view name);

}  // namespace groundcheck

#pragma once

// Instance-level CHAIR between a hypothesis and its reference.
//
// Content tokens are extracted with a configurable pipeline
// (normalize -> tokenize -> lowercase -> drop stopwords -> stem -> drop
// empties); CHAIR is the fraction of predicted content instances that are
// absent from, or over-predicted relative to, the reference.

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "groundcheck/errors.hpp"

namespace groundcheck {

enum class Tokenizer { Whitespace, LexiconLongestMatch };
enum class Stemmer { None, SuffixStrip };
enum class ChairSemantics { Instance, Set };

struct SuffixRule {
  std::string suffix;
  std::string replacement;
};

struct ContentExtractorConfig {
  Tokenizer tokenizer = Tokenizer::Whitespace;
  std::vector<std::string> lexicon;  ///< required for LexiconLongestMatch
  std::vector<std::string> stopwords;
  Stemmer stemmer = Stemmer::None;
  std::vector<SuffixRule> stem_rules;
  std::size_t min_stem_length = 2;   ///< code points left after stripping
  bool lowercase = true;
  std::string unicode_normalization = "NFC";  ///< NFC, NFKC, NFD, NFKD or none

  void validate() const;

  /// Whitespace tokenizer, NFC, lowercase, the built-in function-word list.
  static ContentExtractorConfig defaults();
};

/// Function words used by the default config and by the synthetic generator.
const std::vector<std::string>& default_stopwords();

/// Loads a JSON config. `stopwords_file` / `lexicon_file` entries are
/// resolved relative to the config's directory (one entry per line, UTF-8).
ContentExtractorConfig load_extractor_config(const std::string& path);
ContentExtractorConfig extractor_config_from_json(std::string_view json_text,
                                                  const std::string& base_dir = ".");

/// Multiset of normalized content tokens.
struct ContentBag {
  std::map<std::string, int> counts;

  void add(const std::string& token, int n = 1) { counts[token] += n; }
  int count(const std::string& token) const {
    auto it = counts.find(token);
    return it == counts.end() ? 0 : it->second;
  }
  std::size_t total() const;
  bool empty() const { return counts.empty(); }
  bool operator==(const ContentBag&) const = default;
};

/// Precompiled extractor; immutable and safe to share across threads.
class ContentExtractor {
 public:
  explicit ContentExtractor(ContentExtractorConfig config);
  ~ContentExtractor();
  ContentExtractor(ContentExtractor&&) noexcept;
  ContentExtractor& operator=(ContentExtractor&&) noexcept;

  ContentBag extract(std::string_view text) const;
  /// Content tokens in order of appearance.
  std::vector<std::string> tokens(std::string_view text) const;
  const ContentExtractorConfig& config() const { return config_; }

 private:
  struct Impl;
  ContentExtractorConfig config_;
  std::unique_ptr<Impl> impl_;
};

ContentBag extract_content(std::string_view text, const ContentExtractorConfig& config);

/// Over-predicted instances divided by the predicted instance count; 0 for an
/// empty prediction. Set semantics compares distinct tokens instead.
double chair_instance(const ContentBag& pred, const ContentBag& ref,
                      ChairSemantics semantics = ChairSemantics::Instance);

/// Number of hallucinated instances: sum over tokens of max(0, pred - ref).
std::size_t hallucinated_instances(const ContentBag& pred, const ContentBag& ref);

/// 1 iff chair > theta.
int hallucination_label(double chair, double theta = 0.0);

}  // namespace groundcheck

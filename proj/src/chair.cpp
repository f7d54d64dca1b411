#include "groundcheck/chair.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>
#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

namespace groundcheck {
namespace {

using json = nlohmann::json;

const icu::Normalizer2* normalizer_for(const std::string& form) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = nullptr;
  if (form == "NFC") n = icu::Normalizer2::getNFCInstance(status);
  else if (form == "NFKC") n = icu::Normalizer2::getNFKCInstance(status);
  else if (form == "NFD") n = icu::Normalizer2::getNFDInstance(status);
  else if (form == "NFKD") n = icu::Normalizer2::getNFKDInstance(status);
  else if (form == "none") return nullptr;
  else throw ValidationError("unicode_normalization", "", "unknown normalization form '" + form + "'");
  if (U_FAILURE(status)) throw Error(std::string("ICU normalizer unavailable: ") + u_errorName(status));
  return n;
}

icu::UnicodeString normalize(const icu::Normalizer2* n, const icu::UnicodeString& s) {
  if (!n) return s;
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString out = n->normalize(s, status);
  if (U_FAILURE(status)) throw Error(std::string("unicode normalization failed: ") + u_errorName(status));
  return out;
}

std::string to_utf8(const icu::UnicodeString& s) {
  std::string out;
  s.toUTF8String(out);
  return out;
}

std::u32string to_u32(const icu::UnicodeString& s) {
  std::u32string out;
  for (int32_t i = 0; i < s.length();) {
    const UChar32 c = s.char32At(i);
    out.push_back(static_cast<char32_t>(c));
    i += U16_LENGTH(c);
  }
  return out;
}

icu::UnicodeString from_u32(std::u32string_view s) {
  icu::UnicodeString out;
  for (char32_t c : s) out.append(static_cast<UChar32>(c));
  return out;
}

bool is_separator(UChar32 c) { return u_isUWhiteSpace(c) || u_ispunct(c); }

std::size_t code_points(std::string_view utf8) {
  std::size_t n = 0;
  for (unsigned char c : utf8) n += (c & 0xC0) != 0x80;
  return n;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open word list: " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto b = line.find_first_not_of(" \t");
    if (b == std::string::npos || line[b] == '#') continue;
    const auto e = line.find_last_not_of(" \t");
    out.push_back(line.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace

const std::vector<std::string>& default_stopwords() {
  static const std::vector<std::string> words = {
      "der", "die", "das", "und", "im", "in", "ist", "es", "zu", "den", "mit", "auch",
      "von", "am", "auf", "dem", "ein", "eine", "sich", "nicht", "wird", "bis", "aus",
      "an", "des", "noch", "dann", "aber", "oder", "so"};
  return words;
}

void ContentExtractorConfig::validate() const {
  if ((tokenizer == Tokenizer::LexiconLongestMatch) != !lexicon.empty()) {
    throw ValidationError("lexicon", "", "a lexicon is required iff tokenizer is lexicon-longest-match");
  }
  if (stemmer == Stemmer::None && !stem_rules.empty()) {
    throw ValidationError("stem_rules", "", "stem rules given but stemmer is none");
  }
  for (const auto& r : stem_rules) {
    if (r.suffix.empty()) throw ValidationError("stem_rules", "", "stem rule with empty suffix");
  }
  normalizer_for(unicode_normalization);
}

ContentExtractorConfig ContentExtractorConfig::defaults() {
  ContentExtractorConfig c;
  c.stopwords = default_stopwords();
  return c;
}

ContentExtractorConfig extractor_config_from_json(std::string_view json_text,
                                                  const std::string& base_dir) {
  json j;
  try {
    j = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(0, std::string("malformed extractor config: ") + e.what());
  }
  namespace fs = std::filesystem;
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path.string() : (fs::path(base_dir) / path).string();
  };

  ContentExtractorConfig c;
  c.stopwords.clear();
  try {
    const std::string tok = j.value("tokenizer", "whitespace");
    if (tok == "whitespace") c.tokenizer = Tokenizer::Whitespace;
    else if (tok == "lexicon-longest-match") c.tokenizer = Tokenizer::LexiconLongestMatch;
    else throw ValidationError("tokenizer", "", "unknown tokenizer '" + tok + "'");

    if (j.contains("lexicon")) c.lexicon = j.at("lexicon").get<std::vector<std::string>>();
    if (j.contains("lexicon_file")) {
      auto extra = read_lines(resolve(j.at("lexicon_file").get<std::string>()));
      c.lexicon.insert(c.lexicon.end(), extra.begin(), extra.end());
    }
    if (j.contains("stopwords")) c.stopwords = j.at("stopwords").get<std::vector<std::string>>();
    if (j.contains("stopwords_file")) {
      auto extra = read_lines(resolve(j.at("stopwords_file").get<std::string>()));
      c.stopwords.insert(c.stopwords.end(), extra.begin(), extra.end());
    }
    const std::string stem = j.value("stemmer", "none");
    if (stem == "none") c.stemmer = Stemmer::None;
    else if (stem == "suffix-strip") c.stemmer = Stemmer::SuffixStrip;
    else throw ValidationError("stemmer", "", "unknown stemmer '" + stem + "'");
    if (j.contains("stem_rules")) {
      for (const auto& r : j.at("stem_rules")) {
        c.stem_rules.push_back({r.at(0).get<std::string>(), r.at(1).get<std::string>()});
      }
    }
    c.min_stem_length = j.value("min_stem_length", std::size_t{2});
    c.lowercase = j.value("lowercase", true);
    c.unicode_normalization = j.value("unicode_normalization", std::string("NFC"));
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("bad extractor config field: ") + e.what());
  }
  c.validate();
  return c;
}

ContentExtractorConfig load_extractor_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open extractor config: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const auto dir = std::filesystem::path(path).parent_path();
  return extractor_config_from_json(ss.str(), dir.empty() ? "." : dir.string());
}

std::size_t ContentBag::total() const {
  std::size_t n = 0;
  for (const auto& [_, c] : counts) n += static_cast<std::size_t>(c);
  return n;
}

struct ContentExtractor::Impl {
  const icu::Normalizer2* normalizer = nullptr;
  std::unordered_set<std::string> stopwords;
  std::unordered_set<std::u32string> lexicon;
  std::size_t max_lexicon_len = 0;
  std::vector<SuffixRule> rules;  // longest suffix first

  std::string prepare(const std::string& word, bool lowercase) const {
    icu::UnicodeString s = normalize(normalizer, icu::UnicodeString::fromUTF8(word));
    if (lowercase) s.toLower(icu::Locale::getRoot());
    return to_utf8(s);
  }
};

ContentExtractor::ContentExtractor(ContentExtractorConfig config)
    : config_(std::move(config)), impl_(std::make_unique<Impl>()) {
  config_.validate();
  impl_->normalizer = normalizer_for(config_.unicode_normalization);
  for (const auto& w : config_.stopwords) impl_->stopwords.insert(impl_->prepare(w, config_.lowercase));
  for (const auto& w : config_.lexicon) {
    auto u = to_u32(normalize(impl_->normalizer, icu::UnicodeString::fromUTF8(w)));
    impl_->max_lexicon_len = std::max(impl_->max_lexicon_len, u.size());
    impl_->lexicon.insert(std::move(u));
  }
  impl_->rules = config_.stem_rules;
  std::stable_sort(impl_->rules.begin(), impl_->rules.end(), [](const auto& a, const auto& b) {
    return code_points(a.suffix) > code_points(b.suffix);
  });
}

ContentExtractor::~ContentExtractor() = default;
ContentExtractor::ContentExtractor(ContentExtractor&&) noexcept = default;
ContentExtractor& ContentExtractor::operator=(ContentExtractor&&) noexcept = default;

std::vector<std::string> ContentExtractor::tokens(std::string_view text) const {
  const icu::UnicodeString normalized =
      normalize(impl_->normalizer, icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size()))));

  // Split on whitespace and punctuation.
  std::vector<std::u32string> chunks;
  std::u32string cur;
  for (int32_t i = 0; i < normalized.length();) {
    const UChar32 c = normalized.char32At(i);
    i += U16_LENGTH(c);
    if (is_separator(c)) {
      if (!cur.empty()) chunks.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char32_t>(c));
    }
  }
  if (!cur.empty()) chunks.push_back(std::move(cur));

  std::vector<std::u32string> raw;
  if (config_.tokenizer == Tokenizer::Whitespace) {
    raw = std::move(chunks);
  } else {
    // Greedy forward maximum matching; unmatched code points stand alone.
    for (const auto& chunk : chunks) {
      std::size_t pos = 0;
      while (pos < chunk.size()) {
        std::size_t len = std::min(impl_->max_lexicon_len, chunk.size() - pos);
        for (; len > 1; --len) {
          if (impl_->lexicon.count(chunk.substr(pos, len))) break;
        }
        raw.push_back(chunk.substr(pos, std::max<std::size_t>(len, 1)));
        pos += std::max<std::size_t>(len, 1);
      }
    }
  }

  std::vector<std::string> out;
  for (const auto& r : raw) {
    icu::UnicodeString u = from_u32(r);
    if (config_.lowercase) u.toLower(icu::Locale::getRoot());
    std::string word = to_utf8(u);
    if (impl_->stopwords.count(word)) continue;
    if (config_.stemmer == Stemmer::SuffixStrip) {
      // Strip to a fixed point so that stems are stable under re-extraction.
      for (int guard = 0; guard < 16; ++guard) {
        bool applied = false;
        for (const auto& rule : impl_->rules) {
          if (word.size() < rule.suffix.size() ||
              word.compare(word.size() - rule.suffix.size(), rule.suffix.size(), rule.suffix) != 0) {
            continue;
          }
          std::string stem = word.substr(0, word.size() - rule.suffix.size()) + rule.replacement;
          if (code_points(stem) < config_.min_stem_length || stem == word) continue;
          word = std::move(stem);
          applied = true;
          break;
        }
        if (!applied) break;
      }
    }
    if (!word.empty()) out.push_back(std::move(word));
  }
  return out;
}

ContentBag ContentExtractor::extract(std::string_view text) const {
  ContentBag bag;
  for (auto& t : tokens(text)) bag.add(t);
  return bag;
}

ContentBag extract_content(std::string_view text, const ContentExtractorConfig& config) {
  return ContentExtractor(config).extract(text);
}

std::size_t hallucinated_instances(const ContentBag& pred, const ContentBag& ref) {
  std::size_t h = 0;
  for (const auto& [w, c] : pred.counts) {
    const int over = c - ref.count(w);
    if (over > 0) h += static_cast<std::size_t>(over);
  }
  return h;
}

double chair_instance(const ContentBag& pred, const ContentBag& ref, ChairSemantics semantics) {
  if (semantics == ChairSemantics::Set) {
    if (pred.counts.empty()) return 0.0;
    std::size_t missing = 0;
    for (const auto& [w, _] : pred.counts) missing += ref.count(w) == 0;
    return static_cast<double>(missing) / static_cast<double>(pred.counts.size());
  }
  const std::size_t total = pred.total();
  if (total == 0) return 0.0;
  return static_cast<double>(hallucinated_instances(pred, ref)) / static_cast<double>(total);
}

int hallucination_label(double chair, double theta) { return chair > theta ? 1 : 0; }

}  // namespace groundcheck

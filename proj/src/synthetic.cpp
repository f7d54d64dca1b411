#include "groundcheck/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <unordered_set>

#include <boost/random/beta_distribution.hpp>
#include <boost/random/lognormal_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <nlohmann/json.hpp>

#include "groundcheck/chair.hpp"
#include "groundcheck/hashing.hpp"
#include "groundcheck/signals.hpp"

namespace groundcheck {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
using Engine = std::mt19937_64;

double uniform01(Engine& rng) { return to_unit_interval(rng()); }
double uniform(Engine& rng, const Range& r) { return r.lo + (r.hi - r.lo) * uniform01(rng); }

double normal(Engine& rng, double mean, double sd) {
  if (sd == 0.0) return mean;
  return boost::random::normal_distribution<double>(mean, sd)(rng);
}

double lognormal(Engine& rng, double mu, double sigma) {
  if (sigma == 0.0) return std::exp(mu);
  return boost::random::lognormal_distribution<double>(mu, sigma)(rng);
}

double beta(Engine& rng, const BetaParams& p) {
  return boost::random::beta_distribution<double>(p.a, p.b)(rng);
}

std::size_t uniform_index(Engine& rng, std::size_t n) {
  return boost::random::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

double clamp_prob(double p) { return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon); }

// Entropy of a distribution with mass p on the chosen token and the rest
// spread evenly over k alternatives.
double token_entropy(double p, double k) {
  const double rest = 1.0 - p;
  return -p * std::log(p) - rest * std::log(rest / k);
}

double hit_probability(double p_vid, double gamma) { return gamma > 0.0 ? std::pow(p_vid, gamma) : 0.0; }

void check_range(const Range& r, double lo, double hi, const char* field) {
  if (!(r.lo >= lo && r.hi <= hi && r.lo <= r.hi)) {
    throw ValidationError(field, "", std::string(field) + " must satisfy lo <= hi within bounds");
  }
}

void check_beta(const BetaParams& p, const char* field) {
  if (!(p.a > 0.0 && p.b > 0.0)) throw ValidationError(field, "", std::string(field) + " needs positive parameters");
}

void check_unit(double v, const char* field) {
  if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(field, "", std::string(field) + " must be in [0,1]");
}

std::string join_with_stopwords(const std::vector<std::string>& words, double rate, Engine& rng) {
  const auto& stop = default_stopwords();
  std::string out;
  for (const auto& w : words) {
    const double u = uniform01(rng);
    const std::size_t k = uniform_index(rng, stop.size());
    if (u < rate) {
      if (!out.empty()) out += ' ';
      out += stop[k];
    }
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::size_t over_predicted(const std::vector<std::string>& pred, const std::vector<std::string>& ref) {
  std::map<std::string, long> counts;
  for (const auto& w : pred) ++counts[w];
  for (const auto& w : ref) --counts[w];
  std::size_t n = 0;
  for (const auto& [w, c] : counts) n += c > 0 ? static_cast<std::size_t>(c) : 0;
  return n;
}

std::string sequence_id(const std::string& dataset, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "-%06zu", i);
  return dataset + buf;
}

template <class T>
void read_key(const json& j, const char* key, T& dst) {
  auto it = j.find(key);
  if (it != j.end()) dst = it->get<T>();
}

void read_range(const json& j, const char* key, Range& dst) {
  auto it = j.find(key);
  if (it == j.end()) return;
  const auto v = it->get<std::vector<double>>();
  if (v.size() != 2) throw ValidationError(key, "", std::string(key) + " must be [lo, hi]");
  dst = {v[0], v[1]};
}

void read_beta(const json& j, const char* key, BetaParams& dst) {
  auto it = j.find(key);
  if (it == j.end()) return;
  const auto v = it->get<std::vector<double>>();
  if (v.size() != 2) throw ValidationError(key, "", std::string(key) + " must be [a, b]");
  dst = {v[0], v[1]};
}

}  // namespace

void GeneratorConfig::validate() const {
  if (n_sequences == 0) throw ValidationError("n_sequences", "", "n_sequences must be positive");
  if (t_min < 1) throw ValidationError("t_min", "", "t_min must be >= 1");
  if (t_min > t_max) throw ValidationError("t_max", "", "t_min exceeds t_max");
  check_unit(grounded_rate, "grounded_rate");
  check_unit(stopword_rate, "stopword_rate");
  if (!(grounding_dispersion >= 0.0)) throw ValidationError("grounding_dispersion", "", "grounding_dispersion must be >= 0");
  if (!(grounded_margin_sigma >= 0.0 && guessed_margin_sigma >= 0.0)) {
    throw ValidationError("margin_sigma", "", "margin spreads must be >= 0");
  }
  check_beta(grounded_base, "grounded_base");
  check_beta(guessed_base, "guessed_base");
  check_range(counterfactual_shrink, 0.0, 1.0, "counterfactual_shrink");
  check_range(grounded_cosine, -1.0, 1.0, "grounded_cosine");
  check_range(guessed_cosine, -1.0, 1.0, "guessed_cosine");
  check_range(attention_null, 0.0, 1.0, "attention_null");
  if (!(grounded_attention_sd >= 0.0 && guessed_attention_sd >= 0.0)) {
    throw ValidationError("attention_sd", "", "attention spreads must be >= 0");
  }
  if (!(entropy_support_sigma >= 0.0)) throw ValidationError("entropy_support_sigma", "", "entropy_support_sigma must be >= 0");
  if (vocab_size < 2) throw ValidationError("vocab_size", "", "vocab_size must be >= 2");
  if (!(guess_hit_exponent >= 0.0)) throw ValidationError("guess_hit_exponent", "", "guess_hit_exponent must be >= 0");
  if (dataset.empty()) throw ValidationError("dataset", "", "dataset name must be nonempty");
}

GeneratorConfig GeneratorConfig::gf_like() { return GeneratorConfig{}; }

GeneratorConfig GeneratorConfig::gb_like() {
  GeneratorConfig c;
  c.profile = "gb-like";
  c.model = "gb-like";
  c.grounded_rate = 0.8;
  c.grounded_cosine = {0.2, 0.7};
  c.guessed_cosine = {0.85, 1.0};
  return c;
}

GeneratorConfig GeneratorConfig::inverted_margin() {
  GeneratorConfig c;
  c.profile = "inverted-margin";
  c.model = "inverted-margin";
  c.grounded_margin_mu = -1.0;
  c.guessed_margin_mean = 1.5;
  return c;
}

GeneratorConfig GeneratorConfig::named(std::string_view profile) {
  if (profile == "gf-like") return gf_like();
  if (profile == "gb-like") return gb_like();
  if (profile == "inverted-margin") return inverted_margin();
  throw ValidationError("profile", "", "unknown generator profile '" + std::string(profile) + "'");
}

std::string GeneratorConfig::to_json() const {
  ordered_json j;
  j["profile"] = profile;
  j["dataset"] = dataset;
  j["model"] = model;
  j["n_sequences"] = n_sequences;
  j["t_min"] = t_min;
  j["t_max"] = t_max;
  j["grounded_rate"] = grounded_rate;
  j["grounding_dispersion"] = grounding_dispersion;
  j["grounded_margin_mu"] = grounded_margin_mu;
  j["grounded_margin_sigma"] = grounded_margin_sigma;
  j["guessed_margin_mean"] = guessed_margin_mean;
  j["guessed_margin_sigma"] = guessed_margin_sigma;
  j["grounded_base"] = {grounded_base.a, grounded_base.b};
  j["guessed_base"] = {guessed_base.a, guessed_base.b};
  j["counterfactual_shrink"] = {counterfactual_shrink.lo, counterfactual_shrink.hi};
  j["grounded_cosine"] = {grounded_cosine.lo, grounded_cosine.hi};
  j["guessed_cosine"] = {guessed_cosine.lo, guessed_cosine.hi};
  j["attention_null"] = {attention_null.lo, attention_null.hi};
  j["grounded_attention_gap"] = grounded_attention_gap;
  j["grounded_attention_sd"] = grounded_attention_sd;
  j["guessed_attention_sd"] = guessed_attention_sd;
  j["entropy_support_mu"] = entropy_support_mu;
  j["entropy_support_sigma"] = entropy_support_sigma;
  j["vocab_size"] = vocab_size;
  j["stopword_rate"] = stopword_rate;
  j["guess_hit_exponent"] = guess_hit_exponent;
  j["seed"] = seed;
  return j.dump(2) + "\n";
}

GeneratorConfig GeneratorConfig::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(0, std::string("malformed generator config: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(0, "generator config must be a JSON object");
  static const std::unordered_set<std::string> known = {
      "profile", "dataset", "model", "n_sequences", "t_min", "t_max", "grounded_rate",
      "grounding_dispersion", "grounded_margin_mu", "grounded_margin_sigma", "guessed_margin_mean",
      "guessed_margin_sigma", "grounded_base", "guessed_base", "counterfactual_shrink",
      "grounded_cosine", "guessed_cosine", "attention_null", "grounded_attention_gap",
      "grounded_attention_sd", "guessed_attention_sd", "entropy_support_mu", "entropy_support_sigma",
      "vocab_size", "stopword_rate", "guess_hit_exponent", "seed"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ValidationError(key, "", "unknown generator config key '" + key + "'");
  }
  GeneratorConfig c = named(j.value("profile", std::string("gf-like")));
  try {
    read_key(j, "dataset", c.dataset);
    read_key(j, "model", c.model);
    read_key(j, "n_sequences", c.n_sequences);
    read_key(j, "t_min", c.t_min);
    read_key(j, "t_max", c.t_max);
    read_key(j, "grounded_rate", c.grounded_rate);
    read_key(j, "grounding_dispersion", c.grounding_dispersion);
    read_key(j, "grounded_margin_mu", c.grounded_margin_mu);
    read_key(j, "grounded_margin_sigma", c.grounded_margin_sigma);
    read_key(j, "guessed_margin_mean", c.guessed_margin_mean);
    read_key(j, "guessed_margin_sigma", c.guessed_margin_sigma);
    read_beta(j, "grounded_base", c.grounded_base);
    read_beta(j, "guessed_base", c.guessed_base);
    read_range(j, "counterfactual_shrink", c.counterfactual_shrink);
    read_range(j, "grounded_cosine", c.grounded_cosine);
    read_range(j, "guessed_cosine", c.guessed_cosine);
    read_range(j, "attention_null", c.attention_null);
    read_key(j, "grounded_attention_gap", c.grounded_attention_gap);
    read_key(j, "grounded_attention_sd", c.grounded_attention_sd);
    read_key(j, "guessed_attention_sd", c.guessed_attention_sd);
    read_key(j, "entropy_support_mu", c.entropy_support_mu);
    read_key(j, "entropy_support_sigma", c.entropy_support_sigma);
    read_key(j, "vocab_size", c.vocab_size);
    read_key(j, "stopword_rate", c.stopword_rate);
    read_key(j, "guess_hit_exponent", c.guess_hit_exponent);
    read_key(j, "seed", c.seed);
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("bad generator config value: ") + e.what());
  }
  c.validate();
  return c;
}

std::string content_word(std::size_t index) {
  static constexpr char kConsonants[] = "bdfgklmnprstvwxz";
  static constexpr char kVowels[] = "aeiou";
  constexpr std::size_t nc = sizeof kConsonants - 1, nv = sizeof kVowels - 1;
  std::string w;
  std::size_t i = index;
  for (int s = 0; s < 3; ++s) {
    w += kConsonants[i % nc];
    i /= nc;
    w += kVowels[i % nv];
    i /= nv;
  }
  // Indices past the three-syllable range get a numeric tail.
  if (i > 0) w += std::to_string(i);
  return w;
}

SyntheticDataset generate(const GeneratorConfig& c) {
  c.validate();
  SyntheticDataset out;
  out.traces.resize(c.n_sequences);
  out.sidecar.resize(c.n_sequences);

  for (std::size_t i = 0; i < c.n_sequences; ++i) {
    Engine rng(derive_seed(c.seed, i));
    const std::size_t len = c.t_min + uniform_index(rng, c.t_max - c.t_min + 1);
    double rate = c.grounded_rate;
    if (rate > 0.0 && rate < 1.0 && c.grounding_dispersion > 0.0) {
      rate = beta(rng, {c.grounding_dispersion * rate, c.grounding_dispersion * (1.0 - rate)});
    }

    SequenceTrace& tr = out.traces[i];
    SidecarRecord& sc = out.sidecar[i];
    tr.id = sequence_id(c.dataset, i);
    tr.dataset = c.dataset;
    tr.model = c.model;
    sc.id = tr.id;
    sc.profile = c.profile;

    std::vector<std::string> ref_words, hyp_words;
    for (std::size_t t = 0; t < len; ++t) {
      const bool grounded = uniform01(rng) < rate;
      const std::size_t ref_index = uniform_index(rng, c.vocab_size);
      const double p_base = clamp_prob(beta(rng, grounded ? c.grounded_base : c.guessed_base));
      const double margin = grounded ? lognormal(rng, c.grounded_margin_mu, c.grounded_margin_sigma)
                                     : normal(rng, c.guessed_margin_mean, c.guessed_margin_sigma);
      const double other = p_base * uniform(rng, c.counterfactual_shrink);
      const bool null_is_base = uniform01(rng) < 0.5;
      const double cosine = uniform(rng, grounded ? c.grounded_cosine : c.guessed_cosine);
      const double attn_null = uniform(rng, c.attention_null);
      const double gap = grounded ? normal(rng, c.grounded_attention_gap, c.grounded_attention_sd)
                                  : normal(rng, 0.0, c.guessed_attention_sd);
      const double support = 1.0 + std::floor(lognormal(rng, c.entropy_support_mu, c.entropy_support_sigma));
      const double u_hit = uniform01(rng);
      const std::size_t guess_index = uniform_index(rng, c.vocab_size);

      TokenRecord tok;
      tok.p_vid = clamp_prob(sigmoid(logit(p_base) + margin));
      tok.p_null = clamp_prob(null_is_base ? p_base : other);
      tok.p_mis = clamp_prob(null_is_base ? other : p_base);
      tok.cos_hid = cosine;
      tok.attn_null = attn_null;
      tok.attn_vid = std::max(attn_null + gap, 0.0);
      tok.entropy = token_entropy(tok.p_vid, support);

      const bool hit = grounded || u_hit < hit_probability(tok.p_vid, c.guess_hit_exponent);
      ref_words.push_back(content_word(ref_index));
      hyp_words.push_back(content_word(hit ? ref_index : guess_index));
      tok.text = hyp_words.back();
      tr.tokens.push_back(std::move(tok));
      sc.z.push_back(grounded ? 1 : 0);
    }
    tr.reference = join_with_stopwords(ref_words, c.stopword_rate, rng);
    tr.hypothesis = join_with_stopwords(hyp_words, c.stopword_rate, rng);
    sc.content_count = hyp_words.size();
    sc.hallucinated = over_predicted(hyp_words, ref_words);
  }
  return out;
}

std::string serialize_sidecar(const SidecarRecord& r) {
  ordered_json j;
  j["id"] = r.id;
  j["profile"] = r.profile;
  j["z"] = r.z;
  j["hallucinated"] = r.hallucinated;
  j["content_count"] = r.content_count;
  return j.dump();
}

SidecarRecord parse_sidecar(std::string_view line) {
  try {
    const json j = json::parse(line.begin(), line.end());
    SidecarRecord r;
    r.id = j.at("id").get<std::string>();
    r.profile = j.at("profile").get<std::string>();
    r.z = j.at("z").get<std::vector<int>>();
    r.hallucinated = j.at("hallucinated").get<std::size_t>();
    r.content_count = j.at("content_count").get<std::size_t>();
    return r;
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("bad sidecar record: ") + e.what());
  }
}

void write_sidecar_file(const std::string& path, const std::vector<SidecarRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write sidecar: " + path);
  for (const auto& r : records) out << serialize_sidecar(r) << '\n';
}

std::vector<SidecarRecord> read_sidecar_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open sidecar: " + path);
  std::vector<SidecarRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_sidecar(line));
  }
  return out;
}

DegradationMode parse_degradation_mode(std::string_view name) {
  if (name == "feature-noise") return DegradationMode::FeatureNoise;
  if (name == "frame-drop" || name == "frame-drop-proxy") return DegradationMode::FrameDrop;
  throw ValidationError("mode", "", "unknown degradation mode '" + std::string(name) + "'");
}

std::string_view degradation_mode_name(DegradationMode mode) {
  return mode == DegradationMode::FeatureNoise ? "feature-noise" : "frame-drop";
}

void DegradationSpec::validate() const {
  for (std::size_t i = 0; i < levels.size(); ++i) {
    check_unit(levels[i], "levels");
    if (i > 0 && levels[i] < levels[i - 1]) throw ValidationError("levels", "", "levels must be sorted ascending");
  }
  regime.validate();
}

SequenceTrace degrade(const SequenceTrace& trace, const DegradationSpec& spec, double level) {
  check_unit(level, "level");
  if (level == 0.0) return trace;

  static const ContentExtractor extractor(ContentExtractorConfig::defaults());
  const auto ref_words = extractor.tokens(trace.reference);
  const std::size_t len = trace.tokens.size();
  if (ref_words.size() != len) {
    throw ValidationError("reference", trace.id, "degrade needs one reference content word per token");
  }

  const GeneratorConfig& g = spec.regime;
  SequenceTrace out = trace;
  const std::uint64_t base = derive_seed(spec.seed, fnv1a64(trace.id));
  for (std::size_t t = 0; t < len; ++t) {
    Engine rng(derive_seed(base, t));
    const double u_select = uniform01(rng);
    const double u_damage = uniform01(rng);
    const std::size_t replacement = uniform_index(rng, g.vocab_size);
    const double margin = normal(rng, g.guessed_margin_mean, g.guessed_margin_sigma);
    const double cosine = uniform(rng, g.guessed_cosine);
    const double gap = normal(rng, 0.0, g.guessed_attention_sd);
    const double support = 1.0 + std::floor(lognormal(rng, g.entropy_support_mu, g.entropy_support_sigma));

    TokenRecord& tok = out.tokens[t];
    const double p_cf = std::max(tok.p_null, tok.p_mis);
    bool damaged = false;
    if (spec.mode == DegradationMode::FeatureNoise) {
      tok.p_vid = clamp_prob((1.0 - level) * tok.p_vid + level * p_cf);
      tok.cos_hid = tok.cos_hid + level * (1.0 - tok.cos_hid);
      tok.attn_vid = std::max(tok.attn_null + (1.0 - level) * (tok.attn_vid - tok.attn_null), 0.0);
      damaged = u_damage < level * (1.0 - hit_probability(tok.p_vid, g.guess_hit_exponent));
    } else if (u_select < level) {
      tok.p_vid = clamp_prob(sigmoid(logit(p_cf) + margin));
      tok.cos_hid = cosine;
      tok.attn_vid = std::max(tok.attn_null + gap, 0.0);
      tok.entropy = token_entropy(tok.p_vid, support);
      damaged = u_damage >= hit_probability(tok.p_vid, g.guess_hit_exponent);
    }
    // Drop cached raw vectors; they no longer match the cosine.
    tok.h_vid.reset();
    tok.h_null.reset();
    if (damaged && tok.text == ref_words[t]) {
      std::string word = content_word(replacement);
      if (word == ref_words[t]) word = content_word((replacement + 1) % g.vocab_size);
      tok.text = std::move(word);
    }
  }

  // Rewrite the hypothesis: the k-th content word becomes token k's text.
  std::istringstream words(trace.hypothesis);
  const auto& stop = default_stopwords();
  std::string word, hypothesis;
  std::size_t k = 0;
  while (words >> word) {
    const bool is_stop = std::find(stop.begin(), stop.end(), word) != stop.end();
    if (!is_stop) {
      if (k >= len) throw ValidationError("hypothesis", trace.id, "degrade needs one hypothesis content word per token");
      word = out.tokens[k++].text;
    }
    if (!hypothesis.empty()) hypothesis += ' ';
    hypothesis += word;
  }
  if (k != len) throw ValidationError("hypothesis", trace.id, "degrade needs one hypothesis content word per token");
  out.hypothesis = std::move(hypothesis);
  return out;
}

std::vector<SequenceTrace> degrade_all(const std::vector<SequenceTrace>& traces,
                                       const DegradationSpec& spec, double level) {
  spec.validate();
  std::vector<SequenceTrace> out;
  out.reserve(traces.size());
  for (const auto& t : traces) out.push_back(degrade(t, spec, level));
  return out;
}

void MediationParams::validate() const {
  check_unit(h_given_w1, "h_given_w1");
  check_unit(h_given_w0, "h_given_w0");
  check_unit(w_given_gf1, "w_given_gf1");
  check_unit(w_given_gf0, "w_given_gf0");
}

bool MediationParams::assumptions_hold() const {
  return h_given_w1 > h_given_w0 && w_given_gf1 > w_given_gf0;
}

MediationGap mediation_gap_exact(const MediationParams& p) {
  p.validate();
  MediationGap g;
  g.product = (p.h_given_w1 - p.h_given_w0) * (p.w_given_gf1 - p.w_given_gf0);
  const double h_gf1 = p.h_given_w1 * p.w_given_gf1 + p.h_given_w0 * (1.0 - p.w_given_gf1);
  const double h_gf0 = p.h_given_w1 * p.w_given_gf0 + p.h_given_w0 * (1.0 - p.w_given_gf0);
  g.total_probability = h_gf1 - h_gf0;
  return g;
}

double mediation_gap_mc(const MediationParams& p, std::uint64_t n_samples, std::uint64_t seed) {
  p.validate();
  if (n_samples == 0) throw ValidationError("n_samples", "", "n_samples must be >= 1");
  Engine rng(derive_seed(seed, 0));
  std::uint64_t n[2] = {0, 0}, h[2] = {0, 0};
  for (std::uint64_t i = 0; i < n_samples; ++i) {
    const int gf = uniform01(rng) < 0.5 ? 1 : 0;
    const bool w = uniform01(rng) < (gf ? p.w_given_gf1 : p.w_given_gf0);
    const bool hall = uniform01(rng) < (w ? p.h_given_w1 : p.h_given_w0);
    ++n[gf];
    h[gf] += hall;
  }
  auto rate = [&](int g) { return n[g] == 0 ? 0.0 : static_cast<double>(h[g]) / static_cast<double>(n[g]); };
  return rate(1) - rate(0);
}

LogisticSample sample_logistic_dataset(const std::vector<double>& w, double b, std::size_t n,
                                       std::uint64_t seed) {
  Engine rng(derive_seed(seed, 0));
  boost::random::normal_distribution<double> gauss(0.0, 1.0);
  LogisticSample s;
  s.x.reserve(n);
  s.y.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> x(w.size());
    double z = b;
    for (std::size_t k = 0; k < w.size(); ++k) {
      x[k] = gauss(rng);
      z += w[k] * x[k];
    }
    s.y.push_back(uniform01(rng) < sigmoid(z) ? 1 : 0);
    s.x.push_back(std::move(x));
  }
  return s;
}

}  // namespace groundcheck

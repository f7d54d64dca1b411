#include "groundcheck/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "groundcheck/pipeline.hpp"
#include "groundcheck/report.hpp"
#include "groundcheck/synthetic.hpp"

namespace groundcheck {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

class UsageError : public Error {
 public:
  using Error::Error;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

void ensure_not_input(const std::string& output, const std::vector<std::string>& inputs) {
  std::error_code ec;
  for (const auto& in : inputs) {
    if (output == in || (fs::exists(output, ec) && fs::equivalent(output, in, ec))) {
      throw UsageError("output " + output + " would overwrite an input file");
    }
  }
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << v;
  return os.str();
}

std::vector<double> parse_list(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("not a number list: '" + csv + "'");
    }
  }
  return out;
}

ordered_json pooling_json(const PoolingParams& p) {
  return {{"q", p.q}, {"alpha", p.alpha}, {"epsilon", p.epsilon}, {"ema_direction", "forward-final"}};
}

ordered_json split_json(const SplitSpec& s) {
  return {{"train", s.train}, {"val", s.val}, {"test", s.test}, {"salt", s.salt}};
}

ordered_json defaults_json() {
  ordered_json j;
  j["tool_version"] = kToolVersion;
  j["pooling"] = pooling_json(PoolingParams{});
  j["pool"] = "tail10";
  j["attention_mode"] = "scale-then-subtract";
  j["include_raw_probs"] = false;
  j["fusion"] = ordered_json::parse(FusionWeights::defaults(false).to_json());
  j["fit"] = {{"task", "detect"},
              {"features", "grounding"},
              {"l2", LogisticOptions{}.l2},
              {"max_iterations", LogisticOptions{}.max_iterations},
              {"tolerance", LogisticOptions{}.tolerance},
              {"theta", 0.0},
              {"split", split_json(SplitSpec{})},
              {"orient_baselines", true}};
  j["chair"] = {{"tokenizer", "whitespace"},
                {"unicode_normalization", "NFC"},
                {"lowercase", true},
                {"stemmer", "none"},
                {"stopwords", default_stopwords()},
                {"semantics", "instance"}};
  j["eval"] = {{"split", "test"}, {"threshold", 0.5}};
  j["synth"] = ordered_json::parse(GeneratorConfig::gf_like().to_json());
  const DegradationSpec d;
  j["degrade"] = {{"mode", "feature-noise"}, {"levels", d.levels}, {"seed", d.seed}};
  const MediationParams m;
  j["mediation"] = {{"h_given_w1", m.h_given_w1},
                    {"h_given_w0", m.h_given_w0},
                    {"w_given_gf1", m.w_given_gf1},
                    {"w_given_gf0", m.w_given_gf0},
                    {"samples", 1000000},
                    {"seed", 3}};
  return j;
}

struct Context {
  std::vector<std::string> args;
  bool record_wall_time = false;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  std::ostream* out = nullptr;
};

void write_manifest(const Context& ctx, const std::string& path, const std::string& command,
                    ordered_json config, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs, std::uint64_t seed) {
  ordered_json j;
  j["command"] = command;
  j["args"] = ctx.args;
  j["config"] = std::move(config);
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["seed"] = seed;
  j["tool_version"] = kToolVersion;
  j["defaults"] = defaults_json();
  if (ctx.record_wall_time) {
    const auto dt = std::chrono::steady_clock::now() - ctx.start;
    j["wall_time_s"] = std::chrono::duration<double>(dt).count();
  }
  write_text(path, j.dump(2) + "\n");
}

std::string manifest_path(const std::string& output) { return output + ".manifest.json"; }

// ---- shared option groups -------------------------------------------------

struct PoolingOpts {
  PoolingParams params;
  void add(CLI::App* cmd) {
    cmd->add_option("--q", params.q, "tail fraction for tail pooling")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--alpha", params.alpha, "EMA decay")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--epsilon", params.epsilon, "harmonic-mean guard");
  }
};

struct ChairOpts {
  std::string config_path;
  std::string semantics = "instance";
  void add(CLI::App* cmd) {
    cmd->add_option("--chair-config", config_path, "content extractor JSON config");
    cmd->add_option("--chair-semantics", semantics, "instance or set")
        ->check(CLI::IsMember({"instance", "set"}));
  }
  LabelOptions label_options(double theta) const {
    LabelOptions o;
    if (!config_path.empty()) o.extractor = load_extractor_config(config_path);
    o.semantics = semantics == "set" ? ChairSemantics::Set : ChairSemantics::Instance;
    o.theta = theta;
    return o;
  }
  ordered_json json() const {
    return {{"config", config_path.empty() ? "default" : config_path}, {"semantics", semantics}};
  }
};

LabeledSet subset_for(const LabeledSet& data, const SplitSpec& split, const std::string& part) {
  if (part == "all") return data;
  const auto rows = split_rows(data, split);
  return data.subset(rows.part(parse_split_part(part)));
}

// ---- commands -------------------------------------------------------------

struct ValidateCmd {
  std::string input, manifest;
  CLI::App* cmd = nullptr;

  void add(CLI::App& app) {
    cmd = app.add_subcommand("validate", "check a trace file against the wire format");
    cmd->add_option("input", input, "trace file (JSON lines)")->required();
    cmd->add_option("--manifest", manifest, "also write a run manifest here");
  }

  int run(Context& ctx, std::ostream& err) {
    std::ifstream in(input);
    if (!in) throw Error("cannot open " + input);
    ParseStats stats;
    std::unordered_set<std::string> seen;
    std::size_t n = 0, bad = 0, line_no = 0;
    std::string line;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      auto result = validate_line(line, line_no, stats);
      if (auto* e = std::get_if<LineError>(&result)) {
        ++bad;
        err << "invalid line=" << e->line << " kind=" << e->kind;
        if (!e->field.empty()) err << " field=" << e->field;
        if (!e->id.empty()) err << " id=" << e->id;
        err << " msg=\"" << e->message << "\"\n";
        continue;
      }
      const auto& trace = std::get<SequenceTrace>(result);
      if (!seen.insert(trace.id).second) {
        ++bad;
        err << "invalid line=" << line_no << " kind=validation field=id id=" << trace.id
            << " msg=\"duplicate id\"\n";
        continue;
      }
      ++n;
    }
    if (!manifest.empty()) {
      write_manifest(ctx, manifest, "validate", {{"valid", n}, {"invalid", bad}, {"clamped", stats.clamped}},
                     {input}, {manifest}, 0);
    }
    if (bad > 0) {
      throw ValidationError("records", "", std::to_string(bad) + " invalid record(s) out of " +
                                               std::to_string(n + bad));
    }
    *ctx.out << "ok N=" << n << " clamped=" << stats.clamped << "\n";
    return kExitOk;
  }
};

FusionWeights load_fusion_weights(const std::string& path) {
  const std::string text = read_text(path);
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (!j.is_discarded() && j.is_object() && j.contains("format")) {
    const auto model = FittedModel::from_json(text);
    auto w = model.token_fusion_weights();
    if (!w) throw ValidationError("weights", "", "model artifact has no token-level grounding weights");
    return *w;
  }
  return FusionWeights::from_json(text);
}

struct ScoreCmd {
  std::string input, output, weights, attention = "scale-then-subtract";
  bool include_raw = false;
  PoolingOpts pooling;
  CLI::App* cmd = nullptr;

  void add(CLI::App& app) {
    cmd = app.add_subcommand("score", "compute token signals, fused reliability and pooled scores");
    cmd->add_option("input", input, "trace file")->required();
    cmd->add_option("-o,--output", output, "scored trace file")->required();
    cmd->add_flag("--include-raw-probs", include_raw, "append p_vid and p_null to the grounding vector");
    cmd->add_option("--attention-mode", attention, "scale-then-subtract or subtract-then-scale")
        ->check(CLI::IsMember({"scale-then-subtract", "subtract-then-scale"}));
    cmd->add_option("--weights", weights, "fusion weights JSON or detection model artifact");
    pooling.add(cmd);
  }

  int run(Context& ctx, std::ostream&) {
    ensure_not_input(output, {input});
    ScoreOptions o;
    o.signals.include_raw_probs = include_raw;
    o.signals.attention_mode =
        attention == "subtract-then-scale" ? AttentionMode::SubtractThenScale : AttentionMode::ScaleThenSubtract;
    o.weights = weights.empty() ? FusionWeights::defaults(include_raw) : load_fusion_weights(weights);
    o.pooling = pooling.params;
    const auto traces = read_trace_file(input);
    const auto scored = score_all(traces, o);
    write_scored_file(output, scored);
    ordered_json config = {{"include_raw_probs", include_raw},
                           {"attention_mode", attention},
                           {"weights", weights.empty() ? "default" : weights},
                           {"fusion", ordered_json::parse(o.weights.to_json())},
                           {"pooling", pooling_json(o.pooling)},
                           {"n", scored.size()}};
    std::vector<std::string> inputs{input};
    if (!weights.empty()) inputs.push_back(weights);
    write_manifest(ctx, manifest_path(output), "score", std::move(config), inputs,
                   {output, manifest_path(output)}, 0);
    *ctx.out << "scored N=" << scored.size() << " -> " << output << "\n";
    return kExitOk;
  }
};

struct FitCmd {
  std::string input, output, task = "detect", features = "grounding", pool = "tail10";
  std::string split = "0.6,0.1,0.3", salt = "s0";
  double l2 = 1e-6, theta = 0.0;
  bool include_raw = false, raw_baselines = false;
  std::uint64_t seed = 0;
  PoolingOpts pooling;
  ChairOpts chair;
  CLI::App* cmd = nullptr;

  void add(CLI::App& app) {
    cmd = app.add_subcommand("fit", "train a detection or regression head on scored traces");
    cmd->add_option("input", input, "scored trace file")->required();
    cmd->add_option("-o,--output", output, "model artifact (JSON)")->required();
    cmd->add_option("--task", task, "detect or regress")->check(CLI::IsMember({"detect", "regress"}));
    cmd->add_option("--features", features, "grounding, baselines or meta")
        ->check(CLI::IsMember({"grounding", "baselines", "meta"}));
    cmd->add_option("--pool", pool, "mean, tail10, harm, min or ema");
    cmd->add_option("--l2", l2, "ridge strength on weights (bias unpenalized)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--theta", theta, "label = 1 iff CHAIR > theta");
    cmd->add_option("--split", split, "train,val,test fractions");
    cmd->add_option("--salt", salt, "split hash salt");
    cmd->add_flag("--include-raw-probs", include_raw, "use the 9-signal grounding layout");
    cmd->add_flag("--raw-baselines", raw_baselines, "pool entropy and log-perplexity unoriented");
    cmd->add_option("--seed", seed, "recorded in the artifact");
    pooling.add(cmd);
    chair.add(cmd);
  }

  int run(Context& ctx, std::ostream&) {
    ensure_not_input(output, {input});
    TrainOptions o;
    o.task = parse_task(task);
    o.features.set = parse_feature_set(features);
    o.features.pooling = parse_pooling(pool);
    o.features.params = pooling.params;
    o.features.include_raw_probs = include_raw;
    o.features.orient_baselines = !raw_baselines;
    o.l2 = l2;
    o.split = parse_split_fractions(split, salt);
    o.seed = seed;
    auto data = label_sequences(read_scored_file(input), chair.label_options(theta));
    const FittedModel model = train_model(data, o, theta);
    model.save(output);
    ordered_json config = {{"task", task},
                           {"features", features},
                           {"pool", pooling_name(o.features.pooling, o.features.params)},
                           {"pooling", pooling_json(o.features.params)},
                           {"include_raw_probs", include_raw},
                           {"orient_baselines", !raw_baselines},
                           {"l2", l2},
                           {"theta", theta},
                           {"split", split_json(o.split)},
                           {"chair", chair.json()},
                           {"n", data.size()},
                           {"n_train", model.meta.n_train}};
    write_manifest(ctx, manifest_path(output), "fit", std::move(config), {input},
                   {output, manifest_path(output)}, seed);
    *ctx.out << "fit task=" << task << " features=" << features << " n_train=" << model.meta.n_train << " -> "
             << output << "\n";
    return kExitOk;
  }
};

struct EvalCmd {
  std::string model_path, input, output, part = "test";
  double theta = std::numeric_limits<double>::quiet_NaN();
  ChairOpts chair;
  CLI::App* cmd = nullptr;

  void add(CLI::App& app) {
    cmd = app.add_subcommand("eval", "apply a fitted model and write metric CSV");
    cmd->add_option("model", model_path, "model artifact")->required();
    cmd->add_option("input", input, "scored trace file")->required();
    cmd->add_option("-o,--output", output, "metrics CSV")->required();
    cmd->add_option("--split", part, "train, val, test or all")
        ->check(CLI::IsMember({"train", "val", "test", "all"}));
    cmd->add_option("--theta", theta, "override the model's label threshold");
    chair.add(cmd);
  }

  int run(Context& ctx, std::ostream&) {
    ensure_not_input(output, {input, model_path});
    const FittedModel model = FittedModel::load(model_path);
    const double t = std::isnan(theta) ? model.meta.theta : theta;
    auto data = label_sequences(read_scored_file(input), chair.label_options(t));
    const LabeledSet held_out = subset_for(data, model.meta.split, part);
    if (held_out.size() == 0) throw NumericError("split '" + part + "' is empty");
    const Evaluation e = evaluate_model(model, held_out);
    const std::string target = held_out.scored.front().trace.dataset;
    write_csv_file(output, evaluation_rows(e, part, model.meta.dataset, target));
    ordered_json config = {{"split", part}, {"theta", t}, {"chair", chair.json()}, {"n", held_out.size()}};
    write_manifest(ctx, manifest_path(output), "eval", std::move(config), {model_path, input},
                   {output, manifest_path(output)}, model.meta.seed);
    *ctx.out << "eval split=" << part << " n=" << held_out.size();
    if (e.detection) *ctx.out << " auc=" << format_double(e.detection->auc);
    if (e.regression) *ctx.out << " spearman=" << format_double(e.regression->spearman);
    *ctx.out << " -> " << output << "\n";
    return kExitOk;
  }
};

struct TransferCmd {
  std::vector<std::string> models, inputs, names;
  std::string output, part = "test";
  ChairOpts chair;
  CLI::App* cmd = nullptr;

  void add(CLI::App& app) {
    cmd = app.add_subcommand("transfer", "source x target matrix; model i is in-domain for data i");
    cmd->add_option("--model", models, "model artifacts, one per domain")->required();
    cmd->add_option("--data", inputs, "scored trace files, one per domain")->required();
    cmd->add_option("--name", names, "domain names (default: dataset/model of each file)");
    cmd->add_option("-o,--output", output, "matrix CSV")->required();
    cmd->add_option("--split", part, "train, val, test or all")
        ->check(CLI::IsMember({"train", "val", "test", "all"}));
    chair.add(cmd);
  }

  int run(Context& ctx, std::ostream&) {
    if (models.size() != inputs.size()) throw UsageError("--model and --data counts differ");
    if (!names.empty() && names.size() != models.size()) throw UsageError("--name count differs from --model");
    std::vector<std::string> all_inputs = models;
    all_inputs.insert(all_inputs.end(), inputs.begin(), inputs.end());
    ensure_not_input(output, all_inputs);
    std::vector<TransferDomain> domains;
    for (std::size_t i = 0; i < models.size(); ++i) {
      TransferDomain d;
      d.model = FittedModel::load(models[i]);
      auto data = label_sequences(read_scored_file(inputs[i]), chair.label_options(d.model.meta.theta));
      d.held_out = subset_for(data, d.model.meta.split, part);
      if (d.held_out.size() == 0) throw NumericError("split '" + part + "' of " + inputs[i] + " is empty");
      const auto& first = d.held_out.scored.front().trace;
      d.name = names.empty() ? first.dataset + "/" + first.model : names[i];
      domains.push_back(std::move(d));
    }
    const auto cells = transfer_matrix(domains);
    write_csv_file(output, transfer_rows(cells, part));
    ordered_json config = {{"split", part}, {"chair", chair.json()}};
    for (const auto& d : domains) config["domains"].push_back(d.name);
    write_manifest(ctx, manifest_path(output), "transfer", std::move(config), all_inputs,
                   {output, manifest_path(output)}, 0);
    *ctx.out << "transfer cells=" << cells.size() << " -> " << output << "\n";
    return kExitOk;
  }
};

struct SynthCmd {
  std::string output, sidecar, profile = "gf-like", config_path, dataset;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  CLI::App* cmd = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* n_opt = nullptr;

  void add(CLI::App& app) {
    cmd = app.add_subcommand("synth", "generate synthetic traces with a ground-truth sidecar");
    cmd->add_option("-o,--output", output, "trace file")->required();
    cmd->add_option("--sidecar", sidecar, "sidecar file (default: <output>.sidecar.jsonl)");
    cmd->add_option("--profile", profile, "gf-like, gb-like or inverted-margin")
        ->check(CLI::IsMember({"gf-like", "gb-like", "inverted-margin"}));
    cmd->add_option("--config", config_path, "generator JSON config (overrides the profile)");
    cmd->add_option("--dataset", dataset, "dataset name written into traces");
    n_opt = cmd->add_option("--n", n, "number of sequences");
    seed_opt = cmd->add_option("--seed", seed, "generator seed");
  }

  int run(Context& ctx, std::ostream&) {
    GeneratorConfig c = config_path.empty() ? GeneratorConfig::named(profile)
                                            : GeneratorConfig::from_json(read_text(config_path));
    if (!dataset.empty()) c.dataset = dataset;
    if (n_opt->count()) c.n_sequences = n;
    if (seed_opt->count()) c.seed = seed;
    const std::string side = sidecar.empty() ? output + ".sidecar.jsonl" : sidecar;
    std::vector<std::string> inputs;
    if (!config_path.empty()) inputs.push_back(config_path);
    ensure_not_input(output, inputs);
    const auto data = generate(c);
    write_trace_file(output, data.traces);
    write_sidecar_file(side, data.sidecar);
    write_manifest(ctx, manifest_path(output), "synth", ordered_json::parse(c.to_json()), inputs,
                   {output, side, manifest_path(output)}, c.seed);
    *ctx.out << "synth profile=" << c.profile << " N=" << data.traces.size() << " seed=" << c.seed << " -> "
             << output << "\n";
    return kExitOk;
  }
};

struct DegradeCmd {
  std::string input, output, mode = "feature-noise", profile = "gf-like";
  double level = 0.0;
  std::uint64_t seed = 11;
  CLI::App* cmd = nullptr;

  void add(CLI::App& app) {
    cmd = app.add_subcommand("degrade", "apply a controlled visual degradation to traces");
    cmd->add_option("input", input, "trace file")->required();
    cmd->add_option("-o,--output", output, "degraded trace file")->required();
    cmd->add_option("--mode", mode, "feature-noise or frame-drop")
        ->check(CLI::IsMember({"feature-noise", "frame-drop", "frame-drop-proxy"}));
    cmd->add_option("--level", level, "intensity in [0,1]")->required()->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--seed", seed, "degradation seed");
    cmd->add_option("--profile", profile, "generator profile for guessed-regime draws")
        ->check(CLI::IsMember({"gf-like", "gb-like", "inverted-margin"}));
  }

  int run(Context& ctx, std::ostream&) {
    ensure_not_input(output, {input});
    DegradationSpec spec;
    spec.mode = parse_degradation_mode(mode);
    spec.seed = seed;
    spec.levels = {level};
    spec.regime = GeneratorConfig::named(profile);
    const auto traces = read_trace_file(input);
    write_trace_file(output, degrade_all(traces, spec, level));
    ordered_json config = {{"mode", std::string(degradation_mode_name(spec.mode))},
                           {"level", level},
                           {"profile", profile},
                           {"n", traces.size()}};
    write_manifest(ctx, manifest_path(output), "degrade", std::move(config), {input},
                   {output, manifest_path(output)}, seed);
    *ctx.out << "degrade mode=" << degradation_mode_name(spec.mode) << " level=" << format_double(level)
             << " N=" << traces.size() << " -> " << output << "\n";
    return kExitOk;
  }
};

struct MediationCmd {
  MediationParams params;
  std::uint64_t samples = 1000000, seed = 3;
  std::string manifest;
  CLI::App* cmd = nullptr;

  void add(CLI::App& app) {
    cmd = app.add_subcommand("mediation", "exact and Monte Carlo mediation gap");
    cmd->add_option("--h-w1", params.h_given_w1, "P(H=1|W=1)")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--h-w0", params.h_given_w0, "P(H=1|W=0)")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--w-gf1", params.w_given_gf1, "P(W=1|GF=1)")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--w-gf0", params.w_given_gf0, "P(W=1|GF=0)")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--samples", samples, "Monte Carlo samples (0 skips the estimate)");
    cmd->add_option("--seed", seed, "Monte Carlo seed");
    cmd->add_option("--manifest", manifest, "also write a run manifest here");
  }

  int run(Context& ctx, std::ostream&) {
    const MediationGap g = mediation_gap_exact(params);
    std::ostream& out = *ctx.out;
    out << "exact " << format_double(g.product) << "\n";
    out << "exact_total_probability " << format_double(g.total_probability) << "\n";
    out << "assumptions_hold " << (params.assumptions_hold() ? "true" : "false") << "\n";
    ordered_json config = {{"h_given_w1", params.h_given_w1},
                           {"h_given_w0", params.h_given_w0},
                           {"w_given_gf1", params.w_given_gf1},
                           {"w_given_gf0", params.w_given_gf0},
                           {"samples", samples},
                           {"exact", g.product}};
    if (samples > 0) {
      const double mc = mediation_gap_mc(params, samples, seed);
      const double tol = 4.0 * std::sqrt(1.0 / static_cast<double>(samples));
      out << "mc " << format_double(mc) << "\n";
      out << "mc_tolerance " << format_double(tol) << "\n";
      out << "mc_within_tolerance " << (std::abs(mc - g.product) <= tol ? "true" : "false") << "\n";
      config["mc"] = mc;
    }
    if (!manifest.empty()) write_manifest(ctx, manifest, "mediation", std::move(config), {}, {manifest}, seed);
    return kExitOk;
  }
};

struct ReportCmd {
  std::string model_path, input, out_dir, part = "test";
  std::vector<std::string> sweep;
  ChairOpts chair;
  CLI::App* cmd = nullptr;

  void add(CLI::App& app) {
    cmd = app.add_subcommand("report", "reliability-vs-CHAIR scatter and degradation chart (SVG + CSV)");
    cmd->add_option("model", model_path, "model artifact")->required();
    cmd->add_option("input", input, "scored trace file")->required();
    cmd->add_option("--out-dir", out_dir, "output directory")->required();
    cmd->add_option("--split", part, "train, val, test or all")
        ->check(CLI::IsMember({"train", "val", "test", "all"}));
    cmd->add_option("--sweep", sweep, "LEVEL=scored_file entries of a degradation sweep");
    chair.add(cmd);
  }

  int run(Context& ctx, std::ostream&) {
    const FittedModel model = FittedModel::load(model_path);
    const LabelOptions labels = chair.label_options(model.meta.theta);
    fs::create_directories(out_dir);
    std::vector<std::string> inputs{model_path, input};
    std::vector<std::string> outputs;
    auto out_file = [&](const std::string& name) {
      const std::string p = (fs::path(out_dir) / name).string();
      ensure_not_input(p, inputs);
      outputs.push_back(p);
      return p;
    };

    const auto data = subset_for(label_sequences(read_scored_file(input), labels), model.meta.split, part);
    const auto r = model_reliability(model, data);
    std::ostringstream csv;
    csv << "id,reliability,chair,iso_chair\n";
    std::vector<ScatterPoint> points;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double iso = model.isotonic ? model.isotonic->predict(1.0 - r[i]) : std::nan("");
      csv << data.scored[i].trace.id << ',' << format_metric_value(r[i]) << ',' << format_metric_value(data.chair[i])
          << ',' << format_metric_value(iso) << '\n';
      points.push_back({r[i], data.chair[i]});
    }
    write_text(out_file("reliability_chair.csv"), csv.str());
    write_text(out_file("reliability_chair.svg"),
               render_scatter_svg(points, model.isotonic ? &*model.isotonic : nullptr,
                                  "Reliability vs. CHAIR (" + part + ", n=" + std::to_string(data.size()) + ")"));

    if (!sweep.empty()) {
      std::vector<std::pair<double, std::string>> entries;
      for (const auto& s : sweep) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw UsageError("--sweep entries must be LEVEL=path, got '" + s + "'");
        entries.emplace_back(parse_list(s.substr(0, eq)).at(0), s.substr(eq + 1));
        inputs.push_back(entries.back().second);
      }
      std::sort(entries.begin(), entries.end());
      std::vector<double> levels, mean_chair, mean_r;
      std::ostringstream dcsv;
      dcsv << "level,mean_chair,mean_reliability,n\n";
      for (const auto& [level, path] : entries) {
        const auto d = subset_for(label_sequences(read_scored_file(path), labels), model.meta.split, part);
        if (d.size() == 0) throw NumericError("sweep file " + path + " has an empty split");
        const auto rr = model_reliability(model, d);
        double c = 0, m = 0;
        for (std::size_t i = 0; i < d.size(); ++i) {
          c += d.chair[i];
          m += rr[i];
        }
        levels.push_back(level);
        mean_chair.push_back(c / static_cast<double>(d.size()));
        mean_r.push_back(m / static_cast<double>(d.size()));
        dcsv << format_metric_value(level) << ',' << format_metric_value(mean_chair.back()) << ','
             << format_metric_value(mean_r.back()) << ',' << d.size() << '\n';
      }
      write_text(out_file("degradation.csv"), dcsv.str());
      write_text(out_file("degradation.svg"),
                 render_line_chart_svg(levels, {{"mean CHAIR", mean_chair}, {"mean reliability", mean_r}},
                                       "degradation level", "Degradation sweep"));
    }
    const std::string manifest = out_file("report.manifest.json");
    ordered_json config = {{"split", part}, {"chair", chair.json()}, {"sweep", sweep}};
    write_manifest(ctx, manifest, "report", std::move(config), inputs, outputs, model.meta.seed);
    *ctx.out << "report n=" << data.size() << " -> " << out_dir << "\n";
    return kExitOk;
  }
};

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\\\"";
    else if (c == '\n' || c == '\r') out += ' ';
    else out += c;
  }
  return out + "\"";
}

int fail(std::ostream& err, int code, const std::string& kind, const std::string& extra, const std::string& msg) {
  err << "groundcheck: error kind=" << kind << extra << " msg=" << quote(msg) << "\n";
  return code;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"groundcheck: visual-grounding reliability for sequence decoders", "groundcheck"};
  app.set_version_flag("--version", kToolVersion);
  bool show_defaults = false;
  Context ctx;
  ctx.args = args;
  ctx.out = &out;
  app.add_flag("--show-defaults", show_defaults, "print every default as JSON and exit");
  app.add_flag("--record-wall-time", ctx.record_wall_time, "add wall time to manifests (breaks byte identity)");
  app.require_subcommand(0, 1);

  ValidateCmd validate;
  ScoreCmd score;
  FitCmd fit;
  EvalCmd eval;
  TransferCmd transfer;
  SynthCmd synth;
  DegradeCmd degrade;
  MediationCmd mediation;
  ReportCmd report;
  validate.add(app);
  score.add(app);
  fit.add(app);
  eval.add(app);
  transfer.add(app);
  synth.add(app);
  degrade.add(app);
  mediation.add(app);
  report.add(app);

  std::vector<std::string> argv_store{"groundcheck"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    return fail(err, kExitUsage, "usage", "", e.what());
  }

  if (show_defaults) {
    out << defaults_json().dump(2) << "\n";
    return kExitOk;
  }

  try {
    if (*validate.cmd) return validate.run(ctx, err);
    if (*score.cmd) return score.run(ctx, err);
    if (*fit.cmd) return fit.run(ctx, err);
    if (*eval.cmd) return eval.run(ctx, err);
    if (*transfer.cmd) return transfer.run(ctx, err);
    if (*synth.cmd) return synth.run(ctx, err);
    if (*degrade.cmd) return degrade.run(ctx, err);
    if (*mediation.cmd) return mediation.run(ctx, err);
    if (*report.cmd) return report.run(ctx, err);
    return fail(err, kExitUsage, "usage", "", "no command given; see --help");
  } catch (const UsageError& e) {
    return fail(err, kExitUsage, "usage", "", e.what());
  } catch (const ParseError& e) {
    return fail(err, kExitValidation, "parse", " line=" + std::to_string(e.line()), e.what());
  } catch (const ValidationError& e) {
    std::string extra;
    if (!e.field().empty()) extra += " field=" + e.field();
    if (!e.id().empty()) extra += " id=" + e.id();
    return fail(err, kExitValidation, "validation", extra, e.what());
  } catch (const ConvergenceError& e) {
    return fail(err, kExitNumeric, "convergence", "", e.what());
  } catch (const NumericError& e) {
    return fail(err, kExitNumeric, "numeric", "", e.what());
  } catch (const Error& e) {
    return fail(err, kExitValidation, "io", "", e.what());
  } catch (const std::exception& e) {
    return fail(err, kExitValidation, "internal", "", e.what());
  }
}

}  // namespace groundcheck

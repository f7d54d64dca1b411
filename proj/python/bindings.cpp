#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "groundcheck/cli.hpp"
#include "groundcheck/pipeline.hpp"
#include "groundcheck/synthetic.hpp"

namespace py = pybind11;
using namespace groundcheck;

namespace {

py::dict signals_dict(const TokenSignalVector& v) {
  py::dict d;
  d["s_hid"] = v.s_hid;
  d["s_attn"] = v.s_attn;
  d["s_log"] = v.s_log;
  d["s_logit"] = v.s_logit;
  d["s_prob"] = v.s_prob;
  d["delta_clean"] = v.delta_clean;
  d["delta_mis"] = v.delta_mis;
  if (v.has_raw_probs()) {
    d["p_vid_raw"] = *v.p_vid_raw;
    d["p_null_raw"] = *v.p_null_raw;
  }
  d["conf"] = v.conf;
  d["ent"] = v.ent;
  d["ppl"] = v.ppl;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "groundcheck core: token grounding signals, pooling, CHAIR, heads and metrics";
  m.attr("__version__") = kToolVersion;

  // Translators are tried newest first, so the base class goes in first.
  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  auto with = [&](PyObject* builtin) { return py::make_tuple(base, py::handle(builtin)); };
  py::register_exception<NumericError>(m, "NumericError", with(PyExc_ArithmeticError));
  py::register_exception<ConvergenceError>(m, "ConvergenceError", m.attr("NumericError"));
  py::register_exception<ValidationError>(m, "ValidationError", with(PyExc_ValueError));
  py::register_exception<ParseError>(m, "ParseError", with(PyExc_ValueError));

  m.def("validate_trace_line", [](const std::string& line) {
    return serialize_sequence(parse_sequence(line, 1));
  }, "Parse and validate one wire-format line; returns it re-serialized.");

  m.def("hidden_angle", &hidden_angle);
  m.def("quantile_scale", [](const std::vector<double>& v) { return quantile_scale(v); });
  m.def("attention_usage", [](const std::vector<double>& vid, const std::vector<double>& null,
                              bool subtract_first) {
    return attention_usage(vid, null,
                           subtract_first ? AttentionMode::SubtractThenScale : AttentionMode::ScaleThenSubtract);
  }, py::arg("attn_vid"), py::arg("attn_null"), py::arg("subtract_then_scale") = false);
  m.def("counterfactual_signals", [](double p_vid, double p_null, double p_mis) {
    const auto s = counterfactual_signals(p_vid, p_null, p_mis);
    py::dict d;
    d["p_cf"] = s.p_cf;
    d["s_log"] = s.s_log;
    d["s_logit"] = s.s_logit;
    d["s_prob"] = s.s_prob;
    d["delta_clean"] = s.delta_clean;
    d["delta_mis"] = s.delta_mis;
    return d;
  });

  m.def("score_trace_line", [](const std::string& line, bool include_raw_probs) {
    ScoreOptions o;
    o.signals.include_raw_probs = include_raw_probs;
    o.weights = FusionWeights::defaults(include_raw_probs);
    const auto s = score_sequence(parse_sequence(line, 1), o);
    py::list tokens;
    for (const auto& v : s.signals) tokens.append(signals_dict(v));
    py::dict pooled;
    pooled["mean"] = s.reliability.mean;
    pooled["tail"] = s.reliability.tail;
    pooled["harm"] = s.reliability.harm;
    pooled["min"] = s.reliability.min;
    pooled["ema"] = s.reliability.ema;
    py::dict out;
    out["tokens"] = tokens;
    out["r"] = s.reliability.r_tokens;
    out["pooled"] = pooled;
    return out;
  }, py::arg("line"), py::arg("include_raw_probs") = false);

  m.def("pool", [](const std::vector<double>& r, double q, double alpha, double epsilon) {
    const auto p = pool(r, PoolingParams{q, alpha, epsilon});
    py::dict d;
    d["mean"] = p.mean;
    d["tail"] = p.tail;
    d["harm"] = p.harm;
    d["min"] = p.min;
    d["ema"] = p.ema;
    return d;
  }, py::arg("r"), py::arg("q") = 0.1, py::arg("alpha") = 0.9, py::arg("epsilon") = 1e-12);

  m.def("chair", [](const std::string& hypothesis, const std::string& reference, bool set_semantics) {
    static const ContentExtractor extractor(ContentExtractorConfig::defaults());
    return chair_instance(extractor.extract(hypothesis), extractor.extract(reference),
                          set_semantics ? ChairSemantics::Set : ChairSemantics::Instance);
  }, py::arg("hypothesis"), py::arg("reference"), py::arg("set_semantics") = false);

  m.def("auroc", [](const std::vector<double>& s, const std::vector<int>& y) { return auroc(s, y); });
  m.def("average_precision",
        [](const std::vector<double>& s, const std::vector<int>& y) { return average_precision(s, y); });
  m.def("pearson", [](const std::vector<double>& x, const std::vector<double>& y) { return pearson(x, y); });
  m.def("spearman", [](const std::vector<double>& x, const std::vector<double>& y) { return spearman(x, y); });

  m.def("fit_logistic", [](const std::vector<std::vector<double>>& x, const std::vector<int>& y, double l2) {
    LogisticOptions o;
    o.l2 = l2;
    const auto f = fit_logistic(x, y, o);
    return py::make_tuple(f.weights, f.bias);
  }, py::arg("x"), py::arg("y"), py::arg("l2") = 1e-6);

  py::class_<IsotonicModel>(m, "IsotonicModel")
      .def_readonly("x", &IsotonicModel::x)
      .def_readonly("y", &IsotonicModel::y)
      .def("predict", py::overload_cast<double>(&IsotonicModel::predict, py::const_))
      .def("predict_many",
           [](const IsotonicModel& iso, const std::vector<double>& v) { return iso.predict(v); });
  m.def("fit_isotonic", [](const std::vector<double>& x, const std::vector<double>& y, bool increasing) {
    return fit_isotonic(x, y, increasing ? IsoDirection::Nondecreasing : IsoDirection::Nonincreasing);
  }, py::arg("x"), py::arg("y"), py::arg("increasing") = true);

  m.def("mediation_gap_exact", [](double hw1, double hw0, double wg1, double wg0) {
    const auto g = mediation_gap_exact({hw1, hw0, wg1, wg0});
    return py::make_tuple(g.product, g.total_probability);
  });
  m.def("mediation_gap_mc", [](double hw1, double hw0, double wg1, double wg0, std::uint64_t n, std::uint64_t seed) {
    return mediation_gap_mc({hw1, hw0, wg1, wg0}, n, seed);
  });

  m.def("generate", [](const std::string& profile, std::size_t n, std::uint64_t seed) {
    auto c = GeneratorConfig::named(profile);
    c.n_sequences = n;
    c.seed = seed;
    const auto d = generate(c);
    std::vector<std::string> traces, sidecar;
    for (const auto& t : d.traces) traces.push_back(serialize_sequence(t));
    for (const auto& s : d.sidecar) sidecar.push_back(serialize_sidecar(s));
    return py::make_tuple(traces, sidecar);
  }, py::arg("profile") = "gf-like", py::arg("n") = 100, py::arg("seed") = 11,
     "Synthetic traces and sidecar records as JSON lines.");

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code;
    {
      py::gil_scoped_release release;
      code = run_cli(args, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
  }, "Run one groundcheck command; returns (exit_code, stdout, stderr).");
}

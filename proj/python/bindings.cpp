#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <json.hpp>

#include "newsvec/eval.hpp"
#include "newsvec/pipeline.hpp"

namespace py = pybind11;
using namespace newsvec;

namespace {

py::object json_to_py(const std::string& text) {
  return py::module_::import("json").attr("loads")(text);
}

SwarchParams params_from_dict(const py::dict& d) {
  SwarchParams p;
  auto take = [&](const char* key, double& field) {
    if (d.contains(key)) field = d[key].cast<double>();
  };
  take("mean", p.mean);
  take("ar", p.ar);
  take("alpha0", p.alpha0);
  take("alpha1", p.alpha1);
  take("gamma_ratio", p.gamma_ratio);
  take("p11", p.p11);
  take("p22", p.p22);
  return p;
}

py::dict params_to_dict(const SwarchParams& p) {
  py::dict d;
  d["mean"] = p.mean;
  d["ar"] = p.ar;
  d["alpha0"] = p.alpha0;
  d["alpha1"] = p.alpha1;
  d["gamma_ratio"] = p.gamma_ratio;
  d["p11"] = p.p11;
  d["p22"] = p.p22;
  return d;
}

NodeKind kind_from(const std::string& s) {
  if (s == "news") return NodeKind::News;
  if (s == "element") return NodeKind::Element;
  fail(ErrorKind::InvalidArgument, "node kind must be 'news' or 'element', got '" + s + "'");
}

}  // namespace

PYBIND11_MODULE(_newsvec, m) {
  m.doc() = "Bindings for the newsvec library";

  py::exception<Error>(m, "NewsvecError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      // The instance carries the category so callers can branch on it.
      const auto cls = py::module_::import("newsvec._newsvec").attr("NewsvecError");
      py::object instance = cls(e.what());
      instance.attr("kind") = to_string(e.kind());
      PyErr_SetObject(cls.ptr(), instance.ptr());
    }
  });

  // corpus
  m.def(
      "tokenize",
      [](const std::string& text, bool lowercase, bool strip_punctuation) {
        TokenizerConfig c;
        c.lowercase = lowercase;
        c.strip_punctuation = strip_punctuation;
        return tokenize_text(text, c);
      },
      py::arg("text"), py::arg("lowercase") = true, py::arg("strip_punctuation") = true);
  m.def(
      "tfidf", [](const std::vector<TokenList>& docs) { return compute_tfidf(docs).full; }, py::arg("docs"),
      "Per-document tf-idf scores with natural-log idf.");
  m.def(
      "select_elements",
      [](const std::vector<TokenList>& docs, double quantile) {
        return select_element_vocabulary(compute_tfidf(docs), quantile);
      },
      py::arg("docs"), py::arg("quantile"));

  // graph and walks
  py::class_<AttributedGraph>(m, "Graph")
      .def(py::init<>())
      .def(
          "add_node",
          [](AttributedGraph& g, const std::string& name, const std::string& kind, const FeatureBag& features) {
            return g.add_node(name, kind_from(kind), features);
          },
          py::arg("name"), py::arg("kind"), py::arg("features") = FeatureBag{})
      .def("add_edge", &AttributedGraph::add_edge, py::arg("a"), py::arg("b"), py::arg("weight"))
      .def("finalize", &AttributedGraph::finalize)
      .def("__len__", &AttributedGraph::size)
      .def("num_edges", &AttributedGraph::num_edges)
      .def("name", &AttributedGraph::name)
      .def("find", &AttributedGraph::find)
      .def("weight", &AttributedGraph::weight)
      .def("neighbors", [](const AttributedGraph& g, NodeId v) {
        std::vector<std::pair<NodeId, double>> out;
        for (const auto& n : g.neighbors(v)) out.emplace_back(n.node, n.weight);
        return out;
      });
  m.def("prune", &prune, py::arg("graph"));
  m.def(
      "transition_distribution",
      [](const AttributedGraph& g, NodeId prev, NodeId cur, double p, double q) {
        WalkConfig c;
        c.p = p;
        c.q = q;
        return transition_distribution(prev, cur, g, c);
      },
      py::arg("graph"), py::arg("prev"), py::arg("cur"), py::arg("p") = 1.0, py::arg("q") = 1.0);
  m.def(
      "sample_walks",
      [](const AttributedGraph& g, std::size_t length, std::size_t walks_per_node, double p, double q,
         std::uint64_t seed, bool use_alias, std::size_t threads) {
        WalkConfig c;
        c.length = length;
        c.walks_per_node = walks_per_node;
        c.p = p;
        c.q = q;
        c.seed = seed;
        c.use_alias = use_alias;
        c.threads = threads;
        py::gil_scoped_release release;
        return sample_walks(g, c);
      },
      py::arg("graph"), py::arg("length") = 100, py::arg("walks_per_node") = 10, py::arg("p") = 1.0,
      py::arg("q") = 1.0, py::arg("seed") = 1, py::arg("use_alias") = false, py::arg("threads") = 1);

  // regimes
  m.def(
      "hamilton_filter",
      [](const std::vector<double>& returns, const py::dict& params) {
        const auto r = hamilton_filter(returns, params_from_dict(params));
        return py::make_tuple(r.prob_high, r.prob_low, r.log_likelihood);
      },
      py::arg("returns"), py::arg("params"), "Returns (prob_high, prob_low, log_likelihood).");
  m.def(
      "fit_swarch",
      [](const std::vector<double>& returns, std::size_t starts, std::uint64_t seed) {
        FitConfig c;
        c.starts = starts;
        c.seed = seed;
        FitResult r;
        {
          py::gil_scoped_release release;
          r = fit_swarch(returns, c);
        }
        auto d = params_to_dict(r.params);
        d["log_likelihood"] = r.log_likelihood;
        return d;
      },
      py::arg("returns"), py::arg("starts") = 8, py::arg("seed") = 1);
  m.def(
      "simulate_swarch",
      [](const py::dict& params, std::size_t length, std::uint64_t seed) {
        const auto path = simulate_swarch(params_from_dict(params), length, seed);
        return py::make_tuple(path.returns, path.regimes);
      },
      py::arg("params"), py::arg("length"), py::arg("seed") = 1);
  m.def("label_crises", &label_crises, py::arg("prob_high"), py::arg("threshold") = 0.5);

  // evaluation
  m.def(
      "accuracy", [](const std::vector<std::vector<long>>& counts) { return accuracy(ConfusionMatrix(counts)); },
      py::arg("confusion"), "Confusion matrix indexed [predicted][actual].");
  m.def(
      "mcc", [](const std::vector<std::vector<long>>& counts) { return mcc(ConfusionMatrix(counts)); },
      py::arg("confusion"));
  m.def(
      "onset_metrics",
      [](const std::vector<int>& actual, const std::vector<int>& predicted, std::size_t lookahead) {
        const auto r = onset_metrics(actual, predicted, lookahead);
        py::dict d;
        d["total"] = r.total;
        d["forewarned"] = r.forewarned;
        d["percent_forewarned"] = r.percent_forewarned;
        d["avg_days_ahead"] = r.avg_days_ahead;
        return d;
      },
      py::arg("actual"), py::arg("predicted"), py::arg("lookahead") = 5);
  m.def("binomial_interval", &binomial_interval, py::arg("successes"), py::arg("trials"),
        py::arg("confidence") = 0.95);

  // pipeline
  py::class_<PipelineConfig>(m, "Config")
      .def(py::init<>())
      .def("load_ini", &PipelineConfig::load_ini)
      .def("set", &PipelineConfig::set)
      .def("get", &PipelineConfig::get)
      .def("values", &PipelineConfig::values)
      .def("hash", &PipelineConfig::hash)
      .def("validate", &PipelineConfig::validate)
      .def("artifact", &PipelineConfig::artifact);
  m.def("stage_names", &stage_names);
  m.def(
      "run_stage",
      [](const std::string& stage, const PipelineConfig& config, bool force) {
        StageReport r;
        {
          py::gil_scoped_release release;
          r = run_stage(stage, config, {force});
        }
        py::dict d;
        d["stage"] = r.stage;
        d["seconds"] = r.seconds;
        d["inputs"] = r.inputs;
        d["outputs"] = r.outputs;
        d["info"] = json_to_py(r.info_json);
        return d;
      },
      py::arg("stage"), py::arg("config"), py::arg("force") = false);
}

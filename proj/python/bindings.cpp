#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "udm/error.hpp"
#include "udm/metrics.hpp"
#include "udm/report.hpp"
#include "udm/synth.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace udm;

namespace {

AudioBuffer to_buffer(py::array_t<double, py::array::c_style | py::array::forcecast> samples, int sample_rate) {
  if (samples.ndim() != 1) throw Error(ErrorCode::ChannelMismatch, "expected a 1-D sample array");
  AudioBuffer a;
  a.samples.assign(samples.data(), samples.data() + samples.size());
  a.sample_rate = sample_rate;
  return a;
}

PhonemeInventory inventory_of(const std::string& j) {
  return j.empty() ? demo_inventory() : inventory_from_json(json::parse(j));
}

// Holds the inventory and encoder so templates are built once.
class Analyzer {
 public:
  Analyzer(const std::string& inventory, const std::string& thresholds, const std::string& templates,
           bool attribution)
      : inv_(inventory_of(inventory)) {
    if (!thresholds.empty()) opts_.thresholds = classify::thresholds_from_json(json::parse(thresholds));
    opts_.encoder = templates.empty() ? synth::build_templates(inv_, opts_.frontend)
                                      : align::templates_from_json(json::parse(templates));
    opts_.attribution = attribution;
  }

  std::string analyze(py::array_t<double, py::array::c_style | py::array::forcecast> samples, int sample_rate,
                      const std::string& transcript) const {
    auto audio = to_buffer(samples, sample_rate);
    py::gil_scoped_release release;
    return report::serialize(report::analyze(audio, transcript, inv_, opts_));
  }

  std::string analyze_file(const std::string& path, const std::string& transcript) const {
    py::gil_scoped_release release;
    return report::serialize(report::analyze_file(path, transcript, inv_, opts_));
  }

  std::string inventory_json() const { return to_json(inv_).dump(); }

 private:
  PhonemeInventory inv_;
  report::PipelineOptions opts_;
};

}  // namespace

PYBIND11_MODULE(_udm, m) {
  m.doc() = "Dysfluency analysis engine";

  static py::handle error_type = py::exception<Error>(m, "Error").release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      if (auto* pe = dynamic_cast<const PipelineError*>(&e)) exc.attr("stage") = pe->stage();
      PyErr_SetObject(error_type.ptr(), exc.ptr());
    } catch (const json::exception& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  py::class_<Analyzer>(m, "Analyzer")
      .def(py::init<const std::string&, const std::string&, const std::string&, bool>(), py::arg("inventory") = "",
           py::arg("thresholds") = "", py::arg("templates") = "", py::arg("attribution") = true)
      .def("analyze", &Analyzer::analyze, py::arg("samples"), py::arg("sample_rate"), py::arg("transcript"))
      .def("analyze_file", &Analyzer::analyze_file, py::arg("path"), py::arg("transcript"))
      .def("inventory", &Analyzer::inventory_json);

  m.def(
      "features",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> samples, int sample_rate) {
        const auto f = frontend::extract_features(to_buffer(samples, sample_rate), frontend::FrontendConfig{});
        return py::make_tuple(Matrix(f.data), f.channel_labels);
      },
      py::arg("samples"), py::arg("sample_rate"), "Combined feature matrix and its channel labels.");

  m.def(
      "synthesize",
      [](std::uint64_t seed, const std::string& spec, const std::string& inventory) {
        auto s = spec.empty() ? synth::corpus_spec(seed) : synth::spec_from_json(json::parse(spec));
        s.seed = seed;
        const auto c = synth::generate_synthetic_case(s, inventory_of(inventory));
        py::array_t<double> samples(static_cast<py::ssize_t>(c.audio.samples.size()), c.audio.samples.data());
        return py::make_tuple(samples, c.audio.sample_rate, format_transcript(c.transcript),
                              synth::to_json(c.gold).dump());
      },
      py::arg("seed"), py::arg("spec") = "", py::arg("inventory") = "");

  m.def(
      "rescore",
      [](const std::string& report_json, const std::string& thresholds) {
        const auto r = report::parse_report(report_json);
        return report::serialize(report::rescore(r, classify::thresholds_from_json(json::parse(thresholds))));
      },
      py::arg("report"), py::arg("thresholds"));

  m.def(
      "render_svg",
      [](const std::string& report_json, double px_per_s) {
        return report::render_alignment_svg(report::parse_report(report_json), px_per_s);
      },
      py::arg("report"), py::arg("px_per_s") = 100.0);

  m.def(
      "evaluate",
      [](const std::string& report_json, const std::string& gold_json) {
        const auto r = report::parse_report(report_json);
        const auto g = synth::gold_from_json(json::parse(gold_json));
        return metrics::to_json(metrics::evaluate_detection(metrics::as_gold_events(r.events), g.events)).dump();
      },
      py::arg("report"), py::arg("gold"), "Detection scores of one report against gold events.");

  m.def("temporal_iou", &metrics::temporal_iou);
  m.def(
      "cohens_kappa",
      [](const std::vector<std::string>& a, const std::vector<std::string>& b) { return metrics::cohens_kappa(a, b); },
      py::arg("a"), py::arg("b"));
  m.def(
      "alignment_error_rate",
      [](const std::vector<std::string>& pred, const std::vector<std::string>& gold) {
        return metrics::alignment_error_rate(pred, gold);
      },
      py::arg("pred"), py::arg("gold"));
  m.def("real_time_factor", &metrics::real_time_factor, py::arg("processing_s"), py::arg("audio_s"));
}

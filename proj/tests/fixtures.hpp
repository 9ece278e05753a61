#pragma once

// Pipeline fixtures shared by the unit and acceptance tests. Unlike
// support.hpp these call into the library.

#include "udm/report.hpp"
#include "udm/synth.hpp"

namespace fixture {

/// Default pipeline options with the template encoder built once per process.
inline const udm::report::PipelineOptions& options() {
  static const udm::report::PipelineOptions opts = [] {
    udm::report::PipelineOptions o;
    o.encoder = udm::synth::build_templates(udm::demo_inventory(), o.frontend);
    return o;
  }();
  return opts;
}

struct Analyzed {
  udm::synth::SyntheticCase input;
  udm::report::AnalysisReport report;
};

inline Analyzed analyze_case(const udm::synth::SynthesisSpec& spec, bool attribution = false) {
  const auto inv = udm::demo_inventory();
  auto opts = options();
  opts.attribution = attribution;
  Analyzed a{udm::synth::generate_synthetic_case(spec, inv, opts.frontend), {}};
  a.report = udm::report::analyze(a.input.audio, udm::format_transcript(a.input.transcript), inv, opts);
  return a;
}

inline Analyzed analyze_seed(std::uint64_t seed, bool attribution = false) {
  return analyze_case(udm::synth::corpus_spec(seed), attribution);
}

}  // namespace fixture

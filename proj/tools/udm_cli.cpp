#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "udm/error.hpp"
#include "udm/metrics.hpp"
#include "udm/report.hpp"
#include "udm/service.hpp"
#include "udm/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace udm;

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& p) {
  try {
    return json::parse(read_text(p));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, p.string() + ": " + e.what());
  }
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + p.string());
  out << text;
}

// To a file, or stdout for "" and "-".
void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text << '\n';
  } else {
    write_text(out, text + "\n");
  }
}

// Transcript given inline, or as @path.
std::string transcript_arg(const std::string& s) {
  if (s.size() > 1 && s.front() == '@') {
    auto text = read_text(s.substr(1));
    while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
    return text;
  }
  return s;
}

struct ModelArgs {
  std::string inventory, thresholds, templates, weights, calibration, posteriors;
};

void add_model_options(CLI::App* cmd, ModelArgs& m) {
  cmd->add_option("--inventory", m.inventory, "Phoneme inventory JSON (default: built-in demo)")->check(CLI::ExistingFile);
  cmd->add_option("--thresholds", m.thresholds, "Thresholds JSON")->check(CLI::ExistingFile);
  cmd->add_option("--templates", m.templates, "Phone templates JSON")->check(CLI::ExistingFile);
  cmd->add_option("--weights", m.weights, "Temporal weight bundle")->check(CLI::ExistingFile);
  cmd->add_option("--calibration", m.calibration, "Calibration JSON {\"temperature\": T}")->check(CLI::ExistingFile);
  cmd->add_option("--posteriors", m.posteriors, "External posteriorgram instead of templates")
      ->check(CLI::ExistingFile);
}

service::ServiceConfig to_service_config(const ModelArgs& m) {
  service::ServiceConfig cfg;
  auto opt = [](const std::string& s) { return s.empty() ? std::optional<fs::path>{} : fs::path(s); };
  cfg.inventory_path = opt(m.inventory);
  cfg.thresholds_path = opt(m.thresholds);
  cfg.templates_path = opt(m.templates);
  cfg.weights_path = opt(m.weights);
  cfg.calibration_path = opt(m.calibration);
  return cfg;
}

int run_analyze(const ModelArgs& m, const std::string& audio, const std::string& transcript, const std::string& out,
                const std::string& svg, bool persist) {
  PhonemeInventory inv;
  auto cfg = to_service_config(m);
  if (!m.posteriors.empty()) cfg.templates_path.reset();
  auto opts = service::pipeline_options(cfg, inv);
  if (!m.posteriors.empty()) opts.encoder = align::read_posteriorgram(fs::path(m.posteriors));

  auto r = report::analyze_file(audio, transcript_arg(transcript), inv, opts);
  if (persist) r = report::ReportStore(report::resolve_store_dir("reports")).create(std::move(r));
  const auto text = report::serialize(r);
  emit(out, text);
  if (!svg.empty()) write_text(svg, report::render_alignment_svg(r));
  std::cerr << "report " << (r.report_id.empty() ? "(not stored)" : r.report_id) << ": " << r.events.size()
            << " event(s)\n";
  return 0;
}

int run_reanalyze(const std::string& id, const std::string& thresholds, const std::string& out,
                  std::optional<int> expected_version) {
  report::ReportStore store(report::resolve_store_dir("reports"));
  const auto th = classify::thresholds_from_json(read_json(thresholds));
  const auto r = store.reanalyze(id, th, expected_version);
  const auto text = report::serialize(r);
  emit(out, text);
  std::cerr << "report " << r.report_id << " v" << r.version << ": " << r.events.size() << " event(s)\n";
  return 0;
}

int run_synth(const std::string& inventory, std::uint64_t seed, const std::string& spec_path, const fs::path& dir,
              int count) {
  const auto inv = inventory.empty() ? demo_inventory() : load_inventory(inventory);
  std::optional<synth::SynthesisSpec> base;
  if (!spec_path.empty()) base = synth::spec_from_json(read_json(spec_path));
  fs::create_directories(dir);
  std::ofstream manifest(dir / "manifest.jsonl");
  if (!manifest) throw Error(ErrorCode::Io, "cannot write manifest in " + dir.string());
  for (int k = 0; k < count; ++k) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(k);
    synth::SynthesisSpec spec = base ? *base : synth::corpus_spec(s);
    spec.seed = s;
    const auto c = synth::generate_synthetic_case(spec, inv);
    char stem[32];
    std::snprintf(stem, sizeof stem, "case_%06llu", static_cast<unsigned long long>(s));
    manifest << synth::write_case(c, spec, dir, stem).dump() << '\n';
  }
  std::cerr << "wrote " << count << " case(s) to " << dir.string() << "\n";
  return 0;
}

std::vector<std::string> report_frame_labels(const report::AnalysisReport& r, std::size_t frames) {
  std::vector<std::string> labels(frames);
  for (const auto& s : r.alignment) {
    for (std::size_t f = s.start_frame; f < std::min(s.end_frame, frames); ++f) labels[f] = s.symbol;
  }
  return labels;
}

int run_eval(const std::vector<std::string>& preds, const std::vector<std::string>& golds, const std::string& out) {
  if (preds.size() != golds.size()) {
    throw Error(ErrorCode::LengthMismatch, "--pred and --gold must be given the same number of times");
  }
  metrics::DetectionCounts counts;
  std::size_t wrong = 0, frames = 0;
  std::vector<std::string> all_pred, all_gold;
  double processing = 0.0, duration = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto r = report::parse_report(read_text(preds[i]));
    const auto g = synth::gold_from_json(read_json(golds[i]));
    const auto pe = metrics::as_gold_events(r.events);
    counts += metrics::match_events(pe, g.events);
    if (!g.frame_labels.empty()) {
      const auto p = metrics::fill_blanks(report_frame_labels(r, g.frame_labels.size()));
      const auto gl = metrics::fill_blanks(g.frame_labels);
      const auto [w, n] = metrics::alignment_mismatches(p, gl);
      wrong += w;
      frames += n;
      all_pred.insert(all_pred.end(), p.begin(), p.end());
      all_gold.insert(all_gold.end(), gl.begin(), gl.end());
    }
    processing += r.processing_s;
    duration += r.audio.duration_s;
  }
  metrics::MetricsReport m;
  m.detection = metrics::scores_from_counts(counts);
  m.aer_percent = frames ? 100.0 * static_cast<double>(wrong) / static_cast<double>(frames) : 0.0;
  m.kappa = metrics::cohens_kappa(all_pred, all_gold);
  m.rtf = duration > 0.0 ? metrics::real_time_factor(processing, duration) : 0.0;
  auto j = metrics::to_json(m);
  j["counts"] = {{"tp", counts.tp}, {"fp", counts.fp}, {"fn", counts.fn}};
  const auto text = j.dump(2);
  emit(out, text);
  return 0;
}

service::Service* g_service = nullptr;

int run_serve(const std::string& config, const std::string& listen) {
  json j = config.empty() ? json::object() : read_json(config);
  if (!listen.empty()) j["listen"] = listen;
  const auto cfg =
      service::service_config_from_json(j, config.empty() ? fs::current_path() : fs::path(config).parent_path());
  PhonemeInventory inv;
  auto opts = service::pipeline_options(cfg, inv);
  service::Service svc(cfg, std::move(inv), std::move(opts));
  g_service = &svc;
  std::signal(SIGINT, [](int) {
    if (g_service) g_service->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_service) g_service->stop();
  });
  std::cerr << "listening on " << cfg.host << ":" << cfg.port << ", store " << svc.store().dir().string() << "\n";
  const bool ok = svc.listen();
  g_service = nullptr;
  return ok ? 0 : 1;
}

int run_templates(const std::string& inventory, const std::string& out) {
  const auto inv = inventory.empty() ? demo_inventory() : load_inventory(inventory);
  const auto tpl = synth::build_templates(inv, frontend::FrontendConfig{});
  write_text(out, align::to_json(tpl).dump() + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dysfluency analysis engine"};
  app.require_subcommand(1);

  ModelArgs model;
  std::string audio, transcript, out, svg;
  bool no_store = false;
  auto* analyze = app.add_subcommand("analyze", "Analyze one recording against its transcript");
  analyze->add_option("--audio", audio, "16-bit PCM WAV")->required()->check(CLI::ExistingFile);
  analyze->add_option("--transcript", transcript, "Expected transcript, or @file")->required();
  add_model_options(analyze, model);
  analyze->add_option("--out", out, "Report JSON path (default: stdout)");
  analyze->add_option("--svg", svg, "Also write the alignment map here");
  analyze->add_flag("--no-store", no_store, "Do not persist the report in the store");

  std::string report_id, re_thresholds;
  std::optional<int> expected_version;
  auto* reanalyze = app.add_subcommand("reanalyze", "Rescore a stored report under new thresholds");
  reanalyze->add_option("--report", report_id, "Report id")->required();
  reanalyze->add_option("--thresholds", re_thresholds, "Thresholds JSON")->required()->check(CLI::ExistingFile);
  reanalyze->add_option("--expected-version", expected_version, "Fail unless the newest version matches");
  reanalyze->add_option("--out", out, "Report JSON path (default: stdout)");

  std::uint64_t seed = 0;
  int count = 1;
  std::string spec_path, out_dir, synth_inventory;
  auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic cases with gold annotations");
  synth_cmd->add_option("--seed", seed, "First seed")->required();
  synth_cmd->add_option("--spec", spec_path, "Synthesis spec JSON (default: corpus spec per seed)")
      ->check(CLI::ExistingFile);
  synth_cmd->add_option("--out-dir", out_dir, "Output directory")->required();
  synth_cmd->add_option("--count", count, "Number of consecutive seeds")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--inventory", synth_inventory, "Phoneme inventory JSON")->check(CLI::ExistingFile);

  std::vector<std::string> preds, golds;
  auto* eval = app.add_subcommand("eval", "Score reports against gold annotations");
  eval->add_option("--pred", preds, "Report JSON (repeatable)")->required()->check(CLI::ExistingFile);
  eval->add_option("--gold", golds, "Gold JSON (repeatable, paired with --pred)")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--out", out, "Metrics JSON path (default: stdout)");

  std::string config, listen;
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--config", config, "Service config JSON")->check(CLI::ExistingFile);
  serve->add_option("--listen", listen, "host:port, overrides the config");

  std::string tpl_inventory;
  auto* templates = app.add_subcommand("templates", "Build phone templates for an inventory");
  templates->add_option("--inventory", tpl_inventory, "Phoneme inventory JSON")->check(CLI::ExistingFile);
  templates->add_option("--out", out, "Templates JSON path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*analyze) return run_analyze(model, audio, transcript, out, svg, !no_store);
    if (*reanalyze) return run_reanalyze(report_id, re_thresholds, out, expected_version);
    if (*synth_cmd) return run_synth(synth_inventory, seed, spec_path, out_dir, count);
    if (*eval) return run_eval(preds, golds, out);
    if (*serve) return run_serve(config, listen);
    if (*templates) return run_templates(tpl_inventory, out);
  } catch (const PipelineError& e) {
    std::cerr << "error [" << e.stage() << "]: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

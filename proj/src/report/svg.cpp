#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "udm/report.hpp"

namespace udm::report {

namespace {

std::string esc(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", std::abs(v) < 1e-9 ? 0.0 : v);
  return buf;
}

const char* category_color(classify::Category c) {
  switch (c) {
    case classify::Category::SoundRepetition: return "#d95f02";
    case classify::Category::SyllableRepetition: return "#7570b3";
    case classify::Category::WordRepetition: return "#e7298a";
    case classify::Category::Prolongation: return "#66a61e";
    case classify::Category::BlockSilent: return "#444444";
    case classify::Category::BlockAudible: return "#a6761d";
    case classify::Category::Atypical: return "#e6ab02";
  }
  return "#999999";
}

const char* edit_color(align::EditKind k) {
  switch (k) {
    case align::EditKind::Insertion: return "#1b9e77";
    case align::EditKind::Deletion: return "#d95f02";
    case align::EditKind::Substitution: return "#7570b3";
    case align::EditKind::Prolongation: return "#66a61e";
  }
  return "#999999";
}

}  // namespace

std::string render_alignment_svg(const AnalysisReport& r, double px_per_s) {
  if (!(px_per_s > 0.0)) px_per_s = 100.0;
  const double left = 130.0, top = 10.0, lane_h = 22.0, seg_h = 34.0;
  const double duration = std::max(r.audio.duration_s, r.alignment.empty() ? 0.0 : r.alignment.back().end_s);
  const double plot_w = duration * px_per_s;
  constexpr std::size_t n_lanes = classify::kCanonicalCount + 1;
  const double seg_y = top + 24.0;
  const double ops_y = seg_y + seg_h + 8.0;
  const double lanes_y = ops_y + lane_h + 8.0;
  const double height = lanes_y + n_lanes * lane_h + 10.0;
  const double width = left + plot_w + 20.0;
  auto x_of = [&](double t) { return left + t * px_per_s; };

  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
       "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s += "<title>" + esc(r.report_id) + " alignment</title>\n";

  // Time axis.
  s += "<g class=\"axis\">\n";
  s += "<line x1=\"" + num(x_of(0)) + "\" y1=\"" + num(top + 14) + "\" x2=\"" + num(x_of(duration)) + "\" y2=\"" +
       num(top + 14) + "\" stroke=\"#000\"/>\n";
  const double step = duration > 20 ? 5.0 : duration > 5 ? 1.0 : 0.5;
  for (double t = 0.0; t <= duration + 1e-9; t += step) {
    s += "<line class=\"tick\" x1=\"" + num(x_of(t)) + "\" y1=\"" + num(top + 10) + "\" x2=\"" + num(x_of(t)) +
         "\" y2=\"" + num(top + 18) + "\" stroke=\"#000\"/>";
    s += "<text class=\"tick-label\" x=\"" + num(x_of(t)) + "\" y=\"" + num(top + 8) + "\" text-anchor=\"middle\">" +
         num(t) + " s</text>\n";
  }
  s += "</g>\n";

  // Aligned phones.
  s += "<g class=\"segments\">\n";
  for (std::size_t i = 0; i < r.alignment.size(); ++i) {
    const auto& g = r.alignment[i];
    const double x = x_of(g.start_s), w = (g.end_s - g.start_s) * px_per_s;
    const int shade = static_cast<int>(std::lround(255 - 120 * std::clamp(g.mean_posterior, 0.0, 1.0)));
    char fill[16];
    std::snprintf(fill, sizeof fill, "#%02x%02xff", shade, shade);
    s += "<rect class=\"segment\" data-index=\"" + std::to_string(i) + "\" data-symbol=\"" + esc(g.symbol) +
         "\" x=\"" + num(x) + "\" y=\"" + num(seg_y) + "\" width=\"" + num(w) + "\" height=\"" + num(seg_h) +
         "\" fill=\"" + fill + "\" stroke=\"#335\"><title>" + esc(g.symbol) + " " + num(g.start_s) + "-" +
         num(g.end_s) + " s, p=" + num(g.mean_posterior) + "</title></rect>";
    s += "<text class=\"segment-label\" x=\"" + num(x + w / 2) + "\" y=\"" + num(seg_y + seg_h / 2 + 4) +
         "\" text-anchor=\"middle\">" + esc(g.symbol) + "</text>\n";
  }
  s += "</g>\n";

  // Edit operations.
  s += "<g class=\"edit-ops\">\n";
  s += "<text class=\"lane-label\" x=\"4\" y=\"" + num(ops_y + 15) + "\">edit ops</text>\n";
  for (std::size_t i = 0; i < r.edit_ops.size(); ++i) {
    const auto& op = r.edit_ops[i];
    double t0 = 0.0, t1 = 0.0;
    if (op.realized_index && *op.realized_index < r.alignment.size()) {
      t0 = r.alignment[*op.realized_index].start_s;
      t1 = r.alignment[*op.realized_index].end_s;
    } else {
      // Deletions are anchored at the end of the preceding realized phone.
      for (const auto& g : r.alignment) {
        if (g.end_frame <= op.start_frame) t0 = t1 = g.end_s;
      }
    }
    const double w = std::max(2.0, (t1 - t0) * px_per_s);
    const std::string kind(align::to_string(op.kind));
    s += "<rect class=\"edit-op\" data-kind=\"" + kind + "\" x=\"" + num(x_of(t0)) + "\" y=\"" + num(ops_y) +
         "\" width=\"" + num(w) + "\" height=\"" + num(lane_h - 4) + "\" fill=\"" + edit_color(op.kind) +
         "\" fill-opacity=\"0.8\"><title>" + kind + " " + esc(op.expected_symbol.value_or("-")) + " / " +
         esc(op.realized_symbol.value_or("-")) + "</title></rect>\n";
  }
  s += "</g>\n";

  // One lane per category.
  s += "<g class=\"event-lanes\">\n";
  for (std::size_t lane = 0; lane < n_lanes; ++lane) {
    const auto cat = static_cast<classify::Category>(lane);
    const double y = lanes_y + lane * lane_h;
    s += "<g class=\"lane\" data-category=\"" + std::string(classify::to_string(cat)) + "\">";
    s += "<text class=\"lane-label\" x=\"4\" y=\"" + num(y + 15) + "\">" +
         std::string(classify::to_string(cat)) + "</text>";
    s += "<line x1=\"" + num(x_of(0)) + "\" y1=\"" + num(y + lane_h - 2) + "\" x2=\"" + num(x_of(duration)) +
         "\" y2=\"" + num(y + lane_h - 2) + "\" stroke=\"#ddd\"/>\n";
    for (const auto& e : r.events) {
      if (e.category != cat) continue;
      s += "<rect class=\"event\" id=\"" + esc(e.id) + "\" data-event-id=\"" + esc(e.id) + "\" data-category=\"" +
           std::string(classify::to_string(cat)) + "\" x=\"" + num(x_of(e.start_s)) + "\" y=\"" + num(y + 2) +
           "\" width=\"" + num(std::max(1.0, (e.end_s - e.start_s) * px_per_s)) + "\" height=\"" +
           num(lane_h - 6) + "\" fill=\"" + category_color(cat) + "\"><title>" + esc(e.id) + " confidence " +
           num(e.calibrated_confidence) + "</title></rect>\n";
    }
    s += "</g>\n";
  }
  s += "</g>\n";
  s += "</svg>\n";
  return s;
}

}  // namespace udm::report

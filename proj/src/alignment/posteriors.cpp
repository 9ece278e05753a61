#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "udm/alignment.hpp"
#include "udm/error.hpp"

namespace udm::align {

double Posteriorgram::max_row_error() const {
  double worst = 0.0;
  for (Eigen::Index t = 0; t < probs.rows(); ++t) worst = std::max(worst, std::abs(probs.row(t).sum() - 1.0));
  return worst;
}

namespace {

nlohmann::json rows_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(m.row(i).begin(), m.row(i).end());
    rows.push_back(row);
  }
  return rows;
}

Matrix rows_from(const std::vector<std::vector<double>>& rows, std::size_t dim) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != dim) throw Error(ErrorCode::InvalidConfig, "ragged template matrix");
    for (std::size_t k = 0; k < dim; ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  }
  return m;
}

}  // namespace

nlohmann::json to_json(const PhoneTemplates& t) {
  return {{"symbols", t.symbols},
          {"centroids", rows_json(t.centroids)},
          {"bank", rows_json(t.bank)},
          {"bank_owner", t.bank_owner},
          {"temperature", t.temperature},
          {"blank_prior", t.blank_prior}};
}

PhoneTemplates templates_from_json(const nlohmann::json& j) {
  PhoneTemplates t;
  try {
    t.symbols = j.at("symbols").get<std::vector<std::string>>();
    const auto rows = j.at("centroids").get<std::vector<std::vector<double>>>();
    t.temperature = j.value("temperature", 1.0);
    t.blank_prior = j.value("blank_prior", 0.2);
    if (rows.size() != t.symbols.size()) {
      throw Error(ErrorCode::TemplateInventoryMismatch, "one centroid per symbol required");
    }
    const std::size_t dim = rows.empty() ? 0 : rows.front().size();
    t.centroids = rows_from(rows, dim);
    t.bank = rows_from(j.value("bank", std::vector<std::vector<double>>{}), dim);
    t.bank_owner = j.value("bank_owner", std::vector<std::size_t>{});
    if (t.bank_owner.size() != static_cast<std::size_t>(t.bank.rows())) {
      throw Error(ErrorCode::InvalidConfig, "bank_owner must name one owner per bank row");
    }
    for (std::size_t o : t.bank_owner) {
      if (o >= t.symbols.size()) throw Error(ErrorCode::InvalidConfig, "bank owner out of range");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("templates: ") + e.what());
  }
  return t;
}

namespace {

Posteriorgram encode_with_templates(const frontend::FeatureMatrix& features, const PhonemeInventory& inv,
                                    const PhoneTemplates& tpl) {
  if (tpl.symbols != inv.symbols) {
    throw Error(ErrorCode::TemplateInventoryMismatch, "template symbols differ from inventory '" + inv.name + "'");
  }
  if (!(tpl.temperature > 0) || tpl.blank_prior < 0 || tpl.blank_prior >= 1) {
    throw Error(ErrorCode::InvalidConfig, "template temperature must be > 0 and blank_prior in [0, 1)");
  }
  const auto n_coef = tpl.centroids.cols();
  if (tpl.bank.rows() > 0 && tpl.bank.cols() != n_coef) {
    throw Error(ErrorCode::ShapeMismatch, "template bank width differs from centroid width");
  }
  if (tpl.bank_owner.size() != static_cast<std::size_t>(tpl.bank.rows())) {
    throw Error(ErrorCode::ShapeMismatch, "one bank owner per bank row required");
  }
  for (std::size_t o : tpl.bank_owner) {
    if (o >= inv.size()) throw Error(ErrorCode::TemplateInventoryMismatch, "bank owner outside the inventory");
  }
  std::vector<int> cols;
  for (Eigen::Index k = 0; k < n_coef; ++k) {
    const int c = features.channel_index("mfcc_" + std::to_string(k));
    if (c < 0) throw Error(ErrorCode::MissingChannels, "features lack channel mfcc_" + std::to_string(k));
    cols.push_back(c);
  }

  const auto frames = static_cast<Eigen::Index>(features.frames());
  const auto n_sym = static_cast<Eigen::Index>(inv.size());
  Posteriorgram post;
  post.frame_rate = features.frame_rate;
  post.probs = Matrix::Zero(frames, static_cast<Eigen::Index>(inv.columns()));

  Vector frame(n_coef);
  Vector logits(n_sym);
  Vector dist(n_sym);
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (Eigen::Index k = 0; k < n_coef; ++k) frame[k] = features.data(t, cols[static_cast<std::size_t>(k)]);
    for (Eigen::Index s = 0; s < n_sym; ++s) dist[s] = (frame - tpl.centroids.row(s).transpose()).norm();
    for (Eigen::Index b = 0; b < tpl.bank.rows(); ++b) {
      const auto owner = static_cast<Eigen::Index>(tpl.bank_owner[static_cast<std::size_t>(b)]);
      dist[owner] = std::min(dist[owner], (frame - tpl.bank.row(b).transpose()).norm());
    }
    logits = -dist / tpl.temperature;
    const double top = logits.maxCoeff();
    const Vector w = (logits.array() - top).exp().matrix();
    const double mass = 1.0 - tpl.blank_prior;
    const double z = w.sum();
    for (Eigen::Index s = 0; s < n_sym; ++s) {
      post.probs(t, static_cast<Eigen::Index>(inv.column_of(static_cast<std::size_t>(s)))) = mass * w[s] / z;
    }
    post.probs(t, static_cast<Eigen::Index>(inv.blank_index)) = tpl.blank_prior;
  }
  return post;
}

void check_external(const Posteriorgram& post, const PhonemeInventory& inv, std::size_t frames) {
  if (static_cast<std::size_t>(post.probs.cols()) != inv.columns()) {
    throw Error(ErrorCode::BadExternalFile, "expected " + std::to_string(inv.columns()) + " channels, got " +
                                                std::to_string(post.probs.cols()));
  }
  if (post.frames() != frames) {
    throw Error(ErrorCode::FrameCountMismatch,
                "posteriorgram has " + std::to_string(post.frames()) + " frames, features " + std::to_string(frames));
  }
  if ((post.probs.array() < 0).any() || (post.probs.array() > 1).any() || !post.probs.allFinite()) {
    throw Error(ErrorCode::BadExternalFile, "entries must lie in [0, 1]");
  }
  if (post.max_row_error() > 1e-3) throw Error(ErrorCode::BadExternalFile, "rows are not stochastic within 1e-3");
}

}  // namespace

Posteriorgram phoneme_posteriors(const frontend::FeatureMatrix& features, const PhonemeInventory& inv,
                                 const EncoderSource& model) {
  if (const auto* tpl = std::get_if<PhoneTemplates>(&model)) return encode_with_templates(features, inv, *tpl);
  const auto& external = std::get<Posteriorgram>(model);
  check_external(external, inv, features.frames());
  return external;
}

Posteriorgram gate_silence(const Posteriorgram& post, const frontend::FeatureMatrix& energy,
                           const PhonemeInventory& inv, double floor_db) {
  const int col = energy.channel_index("energy_db");
  if (col < 0) throw Error(ErrorCode::MissingChannels, "no energy_db channel");
  if (energy.frames() != post.frames()) throw Error(ErrorCode::FrameCountMismatch, "energy/posterior frames differ");
  Posteriorgram out = post;
  for (Eigen::Index t = 0; t < out.probs.rows(); ++t) {
    if (energy.data(t, col) < floor_db) {
      out.probs.row(t).setZero();
      out.probs(t, static_cast<Eigen::Index>(inv.blank_index)) = 1.0;
    }
  }
  return out;
}

Posteriorgram read_posteriorgram(std::istream& in) {
  std::size_t frames = 0, channels = 0;
  double rate = 0.0;
  std::string header;
  if (!std::getline(in, header)) throw Error(ErrorCode::BadExternalFile, "missing header line");
  std::istringstream hs(header);
  if (!(hs >> frames >> channels >> rate) || channels == 0 || !(rate > 0)) {
    throw Error(ErrorCode::BadExternalFile, "header must be 'frames channels frame_rate'");
  }
  Posteriorgram post;
  post.frame_rate = rate;
  post.probs.resize(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(channels));
  for (std::size_t i = 0; i < frames * channels; ++i) {
    double v = 0.0;
    if (!(in >> v)) throw Error(ErrorCode::BadExternalFile, "expected " + std::to_string(frames * channels) + " values");
    post.probs.data()[i] = v;
  }
  double extra = 0.0;
  if (in >> extra) throw Error(ErrorCode::BadExternalFile, "trailing values after matrix");
  return post;
}

Posteriorgram read_posteriorgram(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return read_posteriorgram(in);
}

void write_posteriorgram(std::ostream& out, const Posteriorgram& post) {
  out << post.probs.rows() << ' ' << post.probs.cols() << ' ' << post.frame_rate << '\n';
  out.precision(17);
  for (Eigen::Index t = 0; t < post.probs.rows(); ++t) {
    for (Eigen::Index c = 0; c < post.probs.cols(); ++c) out << (c ? " " : "") << post.probs(t, c);
    out << '\n';
  }
}

}  // namespace udm::align

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "udm/error.hpp"
#include "udm/temporal.hpp"

namespace udm::temporal {
namespace {

constexpr char kMagic[4] = {'U', 'D', 'M', 'W'};
constexpr std::uint32_t kVersion = 1;

const char* const kConfigKeys[] = {"config.input_dim", "config.hidden", "config.model_dim", "config.heads",
                                   "config.layers",    "config.ff_mult", "config.fused_dim"};

int* config_field(TemporalConfig& c, std::size_t i) {
  int* fields[] = {&c.input_dim, &c.hidden, &c.model_dim, &c.heads, &c.layers, &c.ff_mult, &c.fused_dim};
  return fields[i];
}

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error(ErrorCode::CorruptFile, "weight file truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f32(std::ostream& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  write_u32(out, bits);
}

float read_f32(std::istream& in) {
  const std::uint32_t bits = read_u32(in);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace

void TemporalConfig::validate() const {
  if (input_dim <= 0 || hidden <= 0 || model_dim <= 0 || heads <= 0 || layers < 0 || ff_mult <= 0 ||
      fused_dim <= 0) {
    throw Error(ErrorCode::ShapeMismatch, "temporal config dimensions must be positive");
  }
  if (model_dim % heads != 0) throw Error(ErrorCode::ShapeMismatch, "model_dim must be divisible by heads");
}

std::map<std::string, std::pair<int, int>> declared_shapes(const TemporalConfig& c) {
  std::map<std::string, std::pair<int, int>> s;
  const int h4 = 4 * c.hidden, d = c.model_dim, ff = c.ff_mult * c.model_dim;
  s["lstm.w_ih"] = {h4, c.input_dim};
  s["lstm.w_hh"] = {h4, c.hidden};
  s["lstm.b"] = {h4, 1};
  s["attn.in.w"] = {d, c.input_dim};
  s["attn.in.b"] = {d, 1};
  for (int l = 0; l < c.layers; ++l) {
    const std::string p = "attn." + std::to_string(l) + ".";
    for (const char* n : {"ln1.g", "ln1.b", "ln2.g", "ln2.b", "q.b", "k.b", "v.b", "o.b", "ff2.b"}) s[p + n] = {d, 1};
    for (const char* n : {"q.w", "k.w", "v.w", "o.w"}) s[p + n] = {d, d};
    s[p + "ff1.w"] = {ff, d};
    s[p + "ff1.b"] = {ff, 1};
    s[p + "ff2.w"] = {d, ff};
  }
  s["attn.final.g"] = {d, 1};
  s["attn.final.b"] = {d, 1};
  s["fuse.w"] = {c.fused_dim, c.hidden + d};
  s["fuse.b"] = {c.fused_dim, 1};
  return s;
}

const Matrix& WeightBundle::matrix(const std::string& name) const {
  const auto it = params_.find(name);
  if (it == params_.end()) throw Error(ErrorCode::ShapeMismatch, "missing parameter " + name);
  return it->second;
}

Vector WeightBundle::vector(const std::string& name) const {
  const Matrix& m = matrix(name);
  if (m.cols() != 1) throw Error(ErrorCode::ShapeMismatch, name + " is not a vector");
  return m.col(0);
}

void WeightBundle::set(const std::string& name, Matrix value) { params_[name] = std::move(value); }

void WeightBundle::validate() const {
  config_.validate();
  for (const auto& [name, shape] : declared_shapes(config_)) {
    const Matrix& m = matrix(name);
    if (m.rows() != shape.first || m.cols() != shape.second) {
      throw Error(ErrorCode::ShapeMismatch, name + " has shape " + std::to_string(m.rows()) + "x" +
                                                std::to_string(m.cols()) + ", expected " +
                                                std::to_string(shape.first) + "x" + std::to_string(shape.second));
    }
    if (!m.allFinite()) throw Error(ErrorCode::ShapeMismatch, name + " has non-finite values");
  }
  if (contains("open_set.centroid") && matrix("open_set.centroid").rows() != config_.fused_dim) {
    throw Error(ErrorCode::ShapeMismatch, "open_set.centroid must have fused_dim rows");
  }
}

WeightBundle WeightBundle::zeros(const TemporalConfig& cfg) {
  cfg.validate();
  WeightBundle w(cfg);
  for (const auto& [name, shape] : declared_shapes(cfg)) w.set(name, Matrix::Zero(shape.first, shape.second));
  return w;
}

WeightBundle WeightBundle::random(const TemporalConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  WeightBundle w(cfg);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const auto& [name, shape] : declared_shapes(cfg)) {
    Matrix m(shape.first, shape.second);
    const bool is_gain = name.ends_with(".g");
    const double scale = shape.second > 1 ? 1.0 / std::sqrt(static_cast<double>(shape.second)) : 0.1;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double v = is_gain ? 1.0 + 0.1 * normal(rng) : scale * normal(rng);
      m.data()[i] = static_cast<double>(static_cast<float>(v));
    }
    w.set(name, std::move(m));
  }
  return w;
}

void WeightBundle::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  std::map<std::string, Matrix> records = params_;
  TemporalConfig cfg = config_;
  for (std::size_t i = 0; i < std::size(kConfigKeys); ++i) {
    records[kConfigKeys[i]] = Matrix::Constant(1, 1, *config_field(cfg, i));
  }
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(records.size()));
  for (const auto& [name, m] : records) {
    write_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    const bool vec = m.cols() == 1;
    write_u32(out, vec ? 1u : 2u);
    write_u32(out, static_cast<std::uint32_t>(m.rows()));
    if (!vec) write_u32(out, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) write_f32(out, static_cast<float>(m.data()[i]));
  }
}

WeightBundle WeightBundle::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw Error(ErrorCode::UnsupportedFormat, "not a weight file (bad magic)");
  }
  const std::uint32_t version = read_u32(in);
  if (version != kVersion) throw Error(ErrorCode::UnsupportedFormat, "weight file version " + std::to_string(version));
  const std::uint32_t count = read_u32(in);
  std::map<std::string, Matrix> records;
  for (std::uint32_t r = 0; r < count; ++r) {
    const std::uint32_t len = read_u32(in);
    if (len > 4096) throw Error(ErrorCode::CorruptFile, "implausible parameter name length");
    std::string name(len, '\0');
    if (!in.read(name.data(), len)) throw Error(ErrorCode::CorruptFile, "weight file truncated");
    const std::uint32_t ndim = read_u32(in);
    if (ndim < 1 || ndim > 2) throw Error(ErrorCode::CorruptFile, name + ": only 1-D and 2-D tensors supported");
    const std::uint32_t rows = read_u32(in);
    const std::uint32_t cols = ndim == 2 ? read_u32(in) : 1;
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = read_f32(in);
    records[name] = std::move(m);
  }
  TemporalConfig cfg;
  for (std::size_t i = 0; i < std::size(kConfigKeys); ++i) {
    const auto it = records.find(kConfigKeys[i]);
    if (it == records.end()) throw Error(ErrorCode::CorruptFile, std::string("missing ") + kConfigKeys[i]);
    *config_field(cfg, i) = static_cast<int>(it->second(0, 0));
    records.erase(it);
  }
  WeightBundle w(cfg);
  for (auto& [name, m] : records) w.set(name, std::move(m));
  w.validate();
  return w;
}

}  // namespace udm::temporal

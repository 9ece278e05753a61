#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "udm/matrix.hpp"

namespace udm::temporal {

struct TemporalConfig {
  int input_dim = 14;
  int hidden = 256;      // recurrent pass width
  int model_dim = 256;   // attention stack width
  int heads = 8;
  int layers = 6;
  int ff_mult = 4;
  int fused_dim = 256;

  void validate() const;
};

/// Named parameter tensors. Vectors are stored as n x 1 matrices.
///
/// Parameter names:
///   lstm.w_ih [4H x in], lstm.w_hh [4H x H], lstm.b [4H]   (gate order i, f, g, o)
///   attn.in.w [D x in], attn.in.b [D]
///   attn.{l}.ln1.g/.b [D], attn.{l}.q.w/k.w/v.w/o.w [D x D], attn.{l}.q.b/k.b/v.b/o.b [D]
///   attn.{l}.ln2.g/.b [D], attn.{l}.ff1.w [mD x D], attn.{l}.ff1.b [mD], attn.{l}.ff2.w [D x mD], attn.{l}.ff2.b [D]
///   attn.final.g/.b [D]
///   fuse.w [F x (H + D)], fuse.b [F]
///   open_set.centroid [F], open_set.scale [1]   (optional)
class WeightBundle {
 public:
  WeightBundle() = default;
  explicit WeightBundle(TemporalConfig cfg) : config_(cfg) {}

  const TemporalConfig& config() const { return config_; }
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  const Matrix& matrix(const std::string& name) const;
  Vector vector(const std::string& name) const;
  void set(const std::string& name, Matrix value);
  const std::map<std::string, Matrix>& params() const { return params_; }

  /// Every declared parameter present with the declared shape and finite.
  void validate() const;

  /// All declared parameters filled with zeros.
  static WeightBundle zeros(const TemporalConfig& cfg);
  /// Seeded demo weights, N(0, 1/fan_in), rounded to float32 so they survive
  /// a save/load round trip unchanged.
  static WeightBundle random(const TemporalConfig& cfg, std::uint64_t seed);

  void save(const std::filesystem::path& path) const;
  static WeightBundle load(const std::filesystem::path& path);

 private:
  TemporalConfig config_;
  std::map<std::string, Matrix> params_;
};

/// Declared shape of every required parameter.
std::map<std::string, std::pair<int, int>> declared_shapes(const TemporalConfig& cfg);

enum class Origin { Local, Global, Fused };

struct HiddenSeq {
  Matrix data;
  Origin origin = Origin::Local;
  std::size_t frames() const { return static_cast<std::size_t>(data.rows()); }
};

/// Attention probabilities per layer and head (index layer * heads + head).
struct AttentionTrace {
  std::vector<Matrix> probs;
};

/// Gated recurrent cell run left to right from a zero state; one hidden
/// state per frame.
HiddenSeq local_recurrent_pass(const Matrix& input, const WeightBundle& w);

/// Input projection plus sinusoidal positions, then pre-norm self-attention
/// blocks with residual connections and a final layer norm.
HiddenSeq global_attention_pass(const Matrix& input, const WeightBundle& w, AttentionTrace* trace = nullptr);

/// Per-frame concatenation followed by an affine projection.
HiddenSeq fuse(const HiddenSeq& local, const HiddenSeq& global, const WeightBundle& w);

/// local, global and fused passes in sequence.
HiddenSeq temporal_stack(const Matrix& input, const WeightBundle& w);

Matrix sinusoidal_positions(int frames, int dim);

}  // namespace udm::temporal

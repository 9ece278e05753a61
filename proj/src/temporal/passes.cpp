#include <cmath>

#include "udm/error.hpp"
#include "udm/temporal.hpp"

namespace udm::temporal {
namespace {

Matrix sigmoid(const Matrix& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

// Affine map applied to every row: x W^T + b.
Matrix affine(const Matrix& x, const Matrix& w, const Vector& b) {
  Matrix y = x * w.transpose();
  y.rowwise() += b.transpose();
  return y;
}

Matrix layer_norm(const Matrix& x, const Vector& gain, const Vector& bias) {
  constexpr double kEps = 1e-5;
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    const double mean = x.row(t).mean();
    const double var = (x.row(t).array() - mean).square().mean();
    y.row(t) = ((x.row(t).array() - mean) / std::sqrt(var + kEps)).matrix();
    y.row(t) = (y.row(t).array() * gain.transpose().array() + bias.transpose().array()).matrix();
  }
  return y;
}

void softmax_rows(Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double top = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - top).exp().matrix();
    m.row(r) /= m.row(r).sum();
  }
}

void check_input(const Matrix& input, const WeightBundle& w) {
  if (input.cols() != w.config().input_dim) {
    throw Error(ErrorCode::ShapeMismatch, "input width " + std::to_string(input.cols()) + ", weights expect " +
                                              std::to_string(w.config().input_dim));
  }
}

}  // namespace

Matrix sinusoidal_positions(int frames, int dim) {
  Matrix pe(frames, dim);
  for (int pos = 0; pos < frames; ++pos) {
    for (int i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / dim);
      pe(pos, i) = i % 2 == 0 ? std::sin(pos * rate) : std::cos(pos * rate);
    }
  }
  return pe;
}

HiddenSeq local_recurrent_pass(const Matrix& input, const WeightBundle& w) {
  w.validate();
  check_input(input, w);
  const int h = w.config().hidden;
  const Matrix& w_hh = w.matrix("lstm.w_hh");
  const Matrix x_proj = affine(input, w.matrix("lstm.w_ih"), w.vector("lstm.b"));

  HiddenSeq out;
  out.origin = Origin::Local;
  out.data.resize(input.rows(), h);
  Vector hidden = Vector::Zero(h);
  Vector cell = Vector::Zero(h);
  for (Eigen::Index t = 0; t < input.rows(); ++t) {
    const Vector z = x_proj.row(t).transpose() + w_hh * hidden;
    const Vector in_gate = sigmoid(z.segment(0, h));
    const Vector forget = sigmoid(z.segment(h, h));
    const Vector cand = z.segment(2 * h, h).array().tanh().matrix();
    const Vector out_gate = sigmoid(z.segment(3 * h, h));
    cell = (forget.array() * cell.array() + in_gate.array() * cand.array()).matrix();
    hidden = (out_gate.array() * cell.array().tanh()).matrix();
    out.data.row(t) = hidden.transpose();
  }
  return out;
}

HiddenSeq global_attention_pass(const Matrix& input, const WeightBundle& w, AttentionTrace* trace) {
  w.validate();
  check_input(input, w);
  const auto& cfg = w.config();
  const int d = cfg.model_dim;
  const int dh = d / cfg.heads;
  const auto frames = static_cast<int>(input.rows());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix x = affine(input, w.matrix("attn.in.w"), w.vector("attn.in.b")) + sinusoidal_positions(frames, d);
  if (trace) trace->probs.clear();

  for (int l = 0; l < cfg.layers; ++l) {
    const std::string p = "attn." + std::to_string(l) + ".";
    const Matrix y = layer_norm(x, w.vector(p + "ln1.g"), w.vector(p + "ln1.b"));
    const Matrix q = affine(y, w.matrix(p + "q.w"), w.vector(p + "q.b"));
    const Matrix k = affine(y, w.matrix(p + "k.w"), w.vector(p + "k.b"));
    const Matrix v = affine(y, w.matrix(p + "v.w"), w.vector(p + "v.b"));
    Matrix heads(frames, d);
    for (int hd = 0; hd < cfg.heads; ++hd) {
      Matrix scores = q.middleCols(hd * dh, dh) * k.middleCols(hd * dh, dh).transpose() * scale;
      softmax_rows(scores);
      heads.middleCols(hd * dh, dh) = scores * v.middleCols(hd * dh, dh);
      if (trace) trace->probs.push_back(std::move(scores));
    }
    x += affine(heads, w.matrix(p + "o.w"), w.vector(p + "o.b"));

    const Matrix y2 = layer_norm(x, w.vector(p + "ln2.g"), w.vector(p + "ln2.b"));
    const Matrix hidden = affine(y2, w.matrix(p + "ff1.w"), w.vector(p + "ff1.b")).cwiseMax(0.0);
    x += affine(hidden, w.matrix(p + "ff2.w"), w.vector(p + "ff2.b"));
  }

  HiddenSeq out;
  out.origin = Origin::Global;
  out.data = layer_norm(x, w.vector("attn.final.g"), w.vector("attn.final.b"));
  return out;
}

HiddenSeq fuse(const HiddenSeq& local, const HiddenSeq& global, const WeightBundle& w) {
  if (local.frames() != global.frames()) {
    throw Error(ErrorCode::FrameCountMismatch, std::to_string(local.frames()) + " local frames vs " +
                                                   std::to_string(global.frames()) + " global frames");
  }
  const Matrix& proj = w.matrix("fuse.w");
  if (proj.cols() != local.data.cols() + global.data.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "fuse.w width does not match concatenated input");
  }
  Matrix cat(local.data.rows(), proj.cols());
  cat << local.data, global.data;
  HiddenSeq out;
  out.origin = Origin::Fused;
  out.data = affine(cat, proj, w.vector("fuse.b"));
  return out;
}

HiddenSeq temporal_stack(const Matrix& input, const WeightBundle& w) {
  return fuse(local_recurrent_pass(input, w), global_attention_pass(input, w), w);
}

}  // namespace udm::temporal

#pragma once

// Independent oracles and helpers shared by the unit and acceptance tests.
// Nothing here calls into the library code it checks.

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "udm/alignment.hpp"
#include "udm/inventory.hpp"
#include "udm/temporal.hpp"

namespace oracle {

inline std::vector<double> hann(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i / n));
  return w;
}

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

/// Direct O(n^2) DFT power spectrum, bins 0..n/2.
inline std::vector<double> dft_power(const std::vector<double>& x) {
  const std::size_t n = x.size();
  // Twiddles indexed by k*t mod n keep the phase exact.
  std::vector<std::complex<double>> tw(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double ph = -2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
    tw[j] = {std::cos(ph), std::sin(ph)};
  }
  std::vector<double> p(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0.0;
    std::size_t j = 0;
    for (std::size_t t = 0; t < n; ++t, j = (j + k) % n) acc += x[t] * tw[j];
    p[k] = std::norm(acc);
  }
  return p;
}

/// Log-mel frames via direct DFT and explicit triangular HTK filters.
inline std::vector<std::vector<double>> log_mel(const std::vector<double>& x, int sr, int n_fft, int hop, int n_mels,
                                                double log_floor) {
  const auto w = hann(n_fft);
  const double top = hz_to_mel(sr / 2.0);
  std::vector<double> edge(static_cast<std::size_t>(n_mels + 2));
  for (int i = 0; i < n_mels + 2; ++i) edge[static_cast<std::size_t>(i)] = mel_to_hz(top * i / (n_mels + 1));
  std::vector<std::vector<double>> out;
  for (std::size_t start = 0; start + static_cast<std::size_t>(n_fft) <= x.size(); start += static_cast<std::size_t>(hop)) {
    std::vector<double> frame(static_cast<std::size_t>(n_fft));
    for (int i = 0; i < n_fft; ++i) frame[static_cast<std::size_t>(i)] = x[start + static_cast<std::size_t>(i)] * w[static_cast<std::size_t>(i)];
    const auto p = dft_power(frame);
    std::vector<double> row(static_cast<std::size_t>(n_mels));
    for (int m = 0; m < n_mels; ++m) {
      const double lo = edge[static_cast<std::size_t>(m)], c = edge[static_cast<std::size_t>(m + 1)],
                   hi = edge[static_cast<std::size_t>(m + 2)];
      double e = 0.0;
      for (std::size_t k = 0; k < p.size(); ++k) {
        const double f = static_cast<double>(k) * sr / n_fft;
        double g = 0.0;
        if (f > lo && f <= c) g = (f - lo) / (c - lo);
        else if (f > c && f < hi) g = (hi - f) / (hi - c);
        e += g * p[k];
      }
      row[static_cast<std::size_t>(m)] = std::log(std::max(e, std::exp(log_floor)));
    }
    out.push_back(row);
  }
  return out;
}

/// Orthonormal DCT-II by direct summation.
inline std::vector<double> dct2(const std::vector<double>& v, int n_coef) {
  const double n = static_cast<double>(v.size());
  std::vector<double> c(static_cast<std::size_t>(n_coef));
  for (int k = 0; k < n_coef; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * std::cos(std::numbers::pi / n * (static_cast<double>(i) + 0.5) * k);
    c[static_cast<std::size_t>(k)] = s * (k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n));
  }
  return c;
}

/// Best CTC log-score by enumerating every labeling of `frames` frames over
/// `columns` posteriorgram columns; -inf when none collapses to `target`.
/// Labels are posteriorgram columns; `blank` is the blank column.
struct CtcBest {
  double score = -INFINITY;
  std::vector<std::size_t> labels;
};

inline CtcBest ctc_brute_force(const udm::Matrix& probs, std::size_t blank, const std::vector<std::size_t>& target) {
  const std::size_t T = static_cast<std::size_t>(probs.rows()), C = static_cast<std::size_t>(probs.cols());
  CtcBest best;
  std::vector<std::size_t> lab(T, 0);
  std::size_t total = 1;
  for (std::size_t t = 0; t < T; ++t) total *= C;
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (std::size_t t = 0; t < T; ++t) {
      lab[t] = c % C;
      c /= C;
    }
    std::vector<std::size_t> collapsed;
    std::size_t prev = blank;
    for (std::size_t l : lab) {
      if (l != blank && l != prev) collapsed.push_back(l);
      prev = l;
    }
    if (collapsed != target) continue;
    double s = 0.0;
    for (std::size_t t = 0; t < T; ++t) s += std::log(probs(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(lab[t])));
    if (s > best.score) {
      best.score = s;
      best.labels = lab;
    }
  }
  return best;
}

/// Edit distance by plain recursion over the three moves, memoized on the
/// suffix pair.
inline std::size_t edit_distance(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  std::function<std::size_t(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i == a.size()) return b.size() - j;
    if (j == b.size()) return a.size() - i;
    auto key = std::make_pair(i, j);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    std::size_t r = go(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1);
    r = std::min(r, go(i + 1, j) + 1);
    r = std::min(r, go(i, j + 1) + 1);
    return memo[key] = r;
  };
  return go(0, 0);
}

/// Minimal XML well-formedness check: balanced, properly nested tags,
/// quoted attributes, known entities only.
inline bool well_formed_xml(const std::string& s, std::string* why = nullptr) {
  auto fail = [&](const std::string& m) {
    if (why) *why = m;
    return false;
  };
  std::vector<std::string> stack;
  std::size_t i = 0;
  bool root_seen = false;
  auto name_char = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == ':' || c == '.'; };
  while (i < s.size()) {
    if (s[i] == '<') {
      if (s.compare(i, 4, "<!--") == 0) {
        const auto e = s.find("-->", i + 4);
        if (e == std::string::npos) return fail("unterminated comment");
        i = e + 3;
        continue;
      }
      if (s.compare(i, 2, "<?") == 0) {
        const auto e = s.find("?>", i + 2);
        if (e == std::string::npos) return fail("unterminated declaration");
        i = e + 2;
        continue;
      }
      const bool closing = i + 1 < s.size() && s[i + 1] == '/';
      std::size_t j = i + (closing ? 2 : 1);
      const std::size_t name_start = j;
      while (j < s.size() && name_char(s[j])) ++j;
      const std::string name = s.substr(name_start, j - name_start);
      if (name.empty()) return fail("empty tag name at " + std::to_string(i));
      if (closing) {
        while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        if (j >= s.size() || s[j] != '>') return fail("bad closing tag " + name);
        if (stack.empty() || stack.back() != name) return fail("mismatched </" + name + ">");
        stack.pop_back();
        i = j + 1;
        continue;
      }
      if (stack.empty()) {
        if (root_seen) return fail("second root element");
        root_seen = true;
      }
      // Attributes.
      std::vector<std::string> seen;
      while (true) {
        while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
        if (j >= s.size()) return fail("unterminated tag " + name);
        if (s[j] == '>') {
          stack.push_back(name);
          ++j;
          break;
        }
        if (s[j] == '/' && j + 1 < s.size() && s[j + 1] == '>') {
          j += 2;
          break;
        }
        const std::size_t a0 = j;
        while (j < s.size() && name_char(s[j])) ++j;
        const std::string attr = s.substr(a0, j - a0);
        if (attr.empty() || j >= s.size() || s[j] != '=') return fail("bad attribute in " + name);
        for (const auto& a : seen) {
          if (a == attr) return fail("duplicate attribute " + attr);
        }
        seen.push_back(attr);
        ++j;
        if (j >= s.size() || (s[j] != '"' && s[j] != '\'')) return fail("unquoted attribute " + attr);
        const char q = s[j];
        const auto e = s.find(q, j + 1);
        if (e == std::string::npos) return fail("unterminated attribute " + attr);
        if (s.substr(j + 1, e - j - 1).find('<') != std::string::npos) return fail("'<' in attribute " + attr);
        j = e + 1;
      }
      i = j;
      continue;
    }
    if (s[i] == '&') {
      const auto e = s.find(';', i);
      if (e == std::string::npos) return fail("bare '&'");
      const std::string ent = s.substr(i + 1, e - i - 1);
      const bool ok = ent == "amp" || ent == "lt" || ent == "gt" || ent == "quot" || ent == "apos" ||
                      (!ent.empty() && ent[0] == '#');
      if (!ok) return fail("unknown entity &" + ent + ";");
      i = e + 1;
      continue;
    }
    if (stack.empty() && !std::isspace(static_cast<unsigned char>(s[i]))) return fail("text outside root");
    ++i;
  }
  if (!stack.empty()) return fail("unclosed <" + stack.back() + ">");
  if (!root_seen) return fail("no root element");
  return true;
}

inline std::size_t count_substr(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + needle.size())) ++n;
  return n;
}

using Rows = std::vector<std::vector<double>>;

inline Rows to_rows(const udm::Matrix& m) {
  Rows r(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  return r;
}

/// y = W x + b with W read element by element.
inline std::vector<double> apply(const udm::temporal::WeightBundle& w, const std::string& name,
                                 const std::vector<double>& x) {
  const auto& m = w.matrix(name);
  const auto& b = w.matrix(name.substr(0, name.size() - 1) + "b");
  std::vector<double> y(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    double s = b(i, 0);
    for (Eigen::Index j = 0; j < m.cols(); ++j) s += m(i, j) * x[static_cast<std::size_t>(j)];
    y[static_cast<std::size_t>(i)] = s;
  }
  return y;
}

inline double sigm(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Scalar-loop LSTM, gate order i, f, g, o.
inline Rows lstm(const Rows& x, const udm::temporal::WeightBundle& w) {
  const auto H = static_cast<std::size_t>(w.config().hidden);
  const auto& wih = w.matrix("lstm.w_ih");
  const auto& whh = w.matrix("lstm.w_hh");
  const auto& b = w.matrix("lstm.b");
  std::vector<double> h(H, 0.0), c(H, 0.0);
  Rows out;
  for (const auto& xt : x) {
    std::vector<double> z(4 * H);
    for (std::size_t r = 0; r < 4 * H; ++r) {
      double s = b(static_cast<Eigen::Index>(r), 0);
      for (std::size_t j = 0; j < xt.size(); ++j) s += wih(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) * xt[j];
      for (std::size_t j = 0; j < H; ++j) s += whh(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) * h[j];
      z[r] = s;
    }
    for (std::size_t k = 0; k < H; ++k) {
      c[k] = sigm(z[H + k]) * c[k] + sigm(z[k]) * std::tanh(z[2 * H + k]);
      h[k] = sigm(z[3 * H + k]) * std::tanh(c[k]);
    }
    out.push_back(h);
  }
  return out;
}

inline std::vector<double> norm(const std::vector<double>& x, const udm::temporal::WeightBundle& w,
                                const std::string& p) {
  double mean = 0.0, var = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(x.size());
  const auto& g = w.matrix(p + "g");
  const auto& b = w.matrix(p + "b");
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] = (x[i] - mean) / std::sqrt(var + 1e-5) * g(static_cast<Eigen::Index>(i), 0) + b(static_cast<Eigen::Index>(i), 0);
  return y;
}

/// Scalar-loop pre-norm attention stack with sinusoidal positions.
inline Rows attention(const Rows& input, const udm::temporal::WeightBundle& w) {
  const auto& cfg = w.config();
  const auto D = static_cast<std::size_t>(cfg.model_dim);
  const auto heads = static_cast<std::size_t>(cfg.heads);
  const std::size_t dh = D / heads, T = input.size();
  Rows x(T);
  for (std::size_t t = 0; t < T; ++t) {
    x[t] = apply(w, "attn.in.w", input[t]);
    for (std::size_t i = 0; i < D; ++i) {
      const double angle = static_cast<double>(t) / std::pow(10000.0, static_cast<double>(i - i % 2) / static_cast<double>(D));
      x[t][i] += i % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string p = "attn." + std::to_string(l) + ".";
    Rows q(T), k(T), v(T);
    for (std::size_t t = 0; t < T; ++t) {
      const auto y = norm(x[t], w, p + "ln1.");
      q[t] = apply(w, p + "q.w", y);
      k[t] = apply(w, p + "k.w", y);
      v[t] = apply(w, p + "v.w", y);
    }
    Rows mixed(T, std::vector<double>(D, 0.0));
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t t = 0; t < T; ++t) {
        std::vector<double> s(T);
        double top = -INFINITY;
        for (std::size_t u = 0; u < T; ++u) {
          double dot = 0.0;
          for (std::size_t i = h * dh; i < (h + 1) * dh; ++i) dot += q[t][i] * k[u][i];
          s[u] = dot / std::sqrt(static_cast<double>(dh));
          top = std::max(top, s[u]);
        }
        double z = 0.0;
        for (auto& e : s) z += (e = std::exp(e - top));
        for (std::size_t u = 0; u < T; ++u)
          for (std::size_t i = h * dh; i < (h + 1) * dh; ++i) mixed[t][i] += s[u] / z * v[u][i];
      }
    }
    for (std::size_t t = 0; t < T; ++t) {
      const auto o = apply(w, p + "o.w", mixed[t]);
      for (std::size_t i = 0; i < D; ++i) x[t][i] += o[i];
      auto hid = apply(w, p + "ff1.w", norm(x[t], w, p + "ln2."));
      for (auto& e : hid) e = std::max(e, 0.0);
      const auto f = apply(w, p + "ff2.w", hid);
      for (std::size_t i = 0; i < D; ++i) x[t][i] += f[i];
    }
  }
  for (auto& row : x) row = norm(row, w, "attn.final.");
  return x;
}

inline double max_rel_diff(const udm::Matrix& got, const Rows& want) {
  double worst = 0.0;
  for (std::size_t i = 0; i < want.size(); ++i)
    for (std::size_t j = 0; j < want[i].size(); ++j) {
      const double a = got(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), b = want[i][j];
      worst = std::max(worst, std::abs(a - b) / std::max(1.0, std::abs(b)));
    }
  return worst;
}

/// Two-symbol inventory {a, b} with the blank in column 0.
inline udm::PhonemeInventory ab_inventory() {
  udm::PhonemeInventory inv;
  inv.name = "ab";
  inv.symbols = {"a", "b"};
  inv.blank_index = 0;
  inv.durations = {{100.0, 30.0}, {100.0, 30.0}};
  inv.classes = {udm::PhoneClass::Vowel, udm::PhoneClass::Consonant};
  inv.tones = {{150.0, {800.0}}, {200.0, {1500.0}}};
  return inv;
}

/// Random row-stochastic matrix with entries bounded away from zero.
inline udm::Matrix random_stochastic(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  udm::Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = u(rng);
    m.row(r) /= m.row(r).sum();
  }
  return m;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  auto p = std::filesystem::temp_directory_path() / ("udm-" + tag + "-" + std::to_string(rng()));
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace oracle

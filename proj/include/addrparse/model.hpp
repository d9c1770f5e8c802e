#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "addrparse/encoding.hpp"
#include "addrparse/error.hpp"
#include "addrparse/rng.hpp"
#include "addrparse/schema.hpp"

namespace addrparse {

using Matrix = Eigen::MatrixXd;

struct EncoderConfig {
  std::string variant_name = "base";
  int d_model = 64;
  int n_layers = 4;
  int n_heads = 4;
  int d_ff = 128;
  int max_len = static_cast<int>(kMaxSequenceLength);

  void validate() const {
    if (d_model < 1 || n_layers < 1 || n_heads < 1 || d_ff < 1) {
      throw ConfigError("encoder dimensions must be positive");
    }
    if (d_model % n_heads != 0) throw ConfigError("d_model must be divisible by n_heads");
    if (max_len != static_cast<int>(kMaxSequenceLength)) throw ConfigError("max_len must be 256");
    if (variant_name.empty()) throw ConfigError("variant name is empty");
  }

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

enum class HeadKind { kLinear, kMlp };

inline std::string to_string(HeadKind k) { return k == HeadKind::kLinear ? "LINEAR" : "MLP"; }

inline HeadKind parse_head_kind(std::string_view s) {
  if (s == "LINEAR" || s == "linear") return HeadKind::kLinear;
  if (s == "MLP" || s == "mlp") return HeadKind::kMlp;
  throw ConfigError("unknown head kind '" + std::string(s) + "'");
}

struct HeadConfig {
  HeadKind kind = HeadKind::kLinear;
  int hidden_dim = 0;  // 0 means d_model
  double dropout_p = 0.4;

  int hidden(const EncoderConfig& ec) const { return hidden_dim > 0 ? hidden_dim : ec.d_model; }

  void validate() const {
    if (hidden_dim < 0) throw ConfigError("hidden_dim must be positive");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("dropout_p must be in [0, 1)");
  }

  friend bool operator==(const HeadConfig&, const HeadConfig&) = default;
};

// Stand-ins for the pretrained encoders, differing only in depth.
inline EncoderConfig variant(std::string_view name) {
  EncoderConfig ec;
  ec.variant_name = std::string(name);
  if (name == "base") {
    ec.n_layers = 4;
  } else if (name == "distil") {
    ec.n_layers = 2;
  } else if (name == "small") {
    ec.n_layers = 1;
  } else {
    throw ConfigError("unknown variant '" + std::string(name) + "'");
  }
  return ec;
}

inline const std::vector<std::string>& variant_names() {
  static const std::vector<std::string> names = {"small", "distil", "base"};
  return names;
}

inline constexpr int kParamsPerLayer = 16;

// Offsets into a layer's block of parameters.
enum LayerParam : int {
  kLn1Gain, kLn1Bias, kWq, kBq, kWk, kBk, kWv, kBv, kWo, kBo,
  kLn2Gain, kLn2Bias, kW1, kB1, kW2, kB2,
};

struct ParamShape {
  std::string name;
  Eigen::Index rows;
  Eigen::Index cols;
};

inline std::vector<ParamShape> parameter_shapes(const EncoderConfig& ec, const HeadConfig& hc,
                                                std::size_t vocab_size, std::size_t num_tags) {
  const Eigen::Index d = ec.d_model, ff = ec.d_ff, v = static_cast<Eigen::Index>(vocab_size),
                     t = static_cast<Eigen::Index>(num_tags);
  std::vector<ParamShape> s;
  s.push_back({"tok_emb", v, d});
  s.push_back({"pos_emb", ec.max_len, d});
  for (int l = 0; l < ec.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    s.push_back({p + "ln1.gain", 1, d});
    s.push_back({p + "ln1.bias", 1, d});
    s.push_back({p + "attn.wq", d, d});
    s.push_back({p + "attn.bq", 1, d});
    s.push_back({p + "attn.wk", d, d});
    s.push_back({p + "attn.bk", 1, d});
    s.push_back({p + "attn.wv", d, d});
    s.push_back({p + "attn.bv", 1, d});
    s.push_back({p + "attn.wo", d, d});
    s.push_back({p + "attn.bo", 1, d});
    s.push_back({p + "ln2.gain", 1, d});
    s.push_back({p + "ln2.bias", 1, d});
    s.push_back({p + "ffn.w1", d, ff});
    s.push_back({p + "ffn.b1", 1, ff});
    s.push_back({p + "ffn.w2", ff, d});
    s.push_back({p + "ffn.b2", 1, d});
  }
  s.push_back({"lnf.gain", 1, d});
  s.push_back({"lnf.bias", 1, d});
  if (hc.kind == HeadKind::kLinear) {
    s.push_back({"head.w", d, t});
    s.push_back({"head.b", 1, t});
  } else {
    const Eigen::Index h = hc.hidden(ec);
    s.push_back({"head.w1", d, h});
    s.push_back({"head.b1", 1, h});
    s.push_back({"head.w2", h, h});
    s.push_back({"head.b2", 1, h});
    s.push_back({"head.w3", h, t});
    s.push_back({"head.b3", 1, t});
  }
  return s;
}

inline std::size_t head_parameter_count(const EncoderConfig& ec, const HeadConfig& hc, std::size_t num_tags) {
  const std::size_t d = static_cast<std::size_t>(ec.d_model);
  if (hc.kind == HeadKind::kLinear) return d * num_tags + num_tags;
  const std::size_t h = static_cast<std::size_t>(hc.hidden(ec));
  return (d * h + h) + (h * h + h) + (h * num_tags + num_tags);
}

inline std::size_t encoder_parameter_count(const EncoderConfig& ec, std::size_t vocab_size) {
  const std::size_t d = static_cast<std::size_t>(ec.d_model), ff = static_cast<std::size_t>(ec.d_ff);
  const std::size_t per_layer = 4 * (d * d + d) + 4 * d + (d * ff + ff) + (ff * d + d);
  return vocab_size * d + static_cast<std::size_t>(ec.max_len) * d +
         static_cast<std::size_t>(ec.n_layers) * per_layer + 2 * d;
}

inline std::size_t parameter_count(const EncoderConfig& ec, const HeadConfig& hc, std::size_t vocab_size,
                                   std::size_t num_tags) {
  return encoder_parameter_count(ec, vocab_size) + head_parameter_count(ec, hc, num_tags);
}

struct ModelBundle {
  EncoderConfig encoder;
  HeadConfig head;
  std::size_t vocab_size = 0;
  std::size_t num_tags = 0;
  std::vector<Matrix> params;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params) n += static_cast<std::size_t>(p.size());
    return n;
  }

  std::size_t head_offset() const { return 2 + static_cast<std::size_t>(encoder.n_layers) * kParamsPerLayer + 2; }

  const Matrix& layer(int l, LayerParam which) const {
    return params[2 + static_cast<std::size_t>(l) * kParamsPerLayer + which];
  }

  bool all_finite() const {
    for (const auto& p : params) {
      if (!p.allFinite()) return false;
    }
    return true;
  }

  friend bool operator==(const ModelBundle& a, const ModelBundle& b) {
    if (!(a.encoder == b.encoder && a.head == b.head && a.vocab_size == b.vocab_size &&
          a.num_tags == b.num_tags && a.params.size() == b.params.size())) {
      return false;
    }
    for (std::size_t i = 0; i < a.params.size(); ++i) {
      if (a.params[i].rows() != b.params[i].rows() || a.params[i].cols() != b.params[i].cols() ||
          a.params[i] != b.params[i]) {
        return false;
      }
    }
    return true;
  }
};

// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), embeddings ~ U(-1/sqrt(d), 1/sqrt(d)),
// biases 0, layer-norm gains 1.
inline ModelBundle init_model(const EncoderConfig& ec, const HeadConfig& hc, std::size_t vocab_size,
                              std::size_t num_tags, std::uint64_t seed) {
  ec.validate();
  hc.validate();
  if (vocab_size < 2) throw ConfigError("vocabulary must contain PAD and UNK");
  if (num_tags < 2) throw ConfigError("need at least two tags");
  ModelBundle m{ec, hc, vocab_size, num_tags, {}};
  Rng rng(seed);
  for (const auto& shape : parameter_shapes(ec, hc, vocab_size, num_tags)) {
    Matrix p = Matrix::Zero(shape.rows, shape.cols);
    const bool is_gain = shape.name.ends_with(".gain");
    const bool is_bias = shape.rows == 1 && !is_gain;
    if (is_gain) {
      p.setOnes();
    } else if (!is_bias) {
      const bool embedding = shape.name.ends_with("_emb");
      const double bound = 1.0 / std::sqrt(static_cast<double>(embedding ? shape.cols : shape.rows));
      for (Eigen::Index r = 0; r < p.rows(); ++r) {
        for (Eigen::Index c = 0; c < p.cols(); ++c) p(r, c) = rng.uniform(-bound, bound);
      }
    }
    m.params.push_back(std::move(p));
  }
  return m;
}

inline ModelBundle init_model(const EncoderConfig& ec, const HeadConfig& hc, const TagSchema& schema,
                              const Vocabulary& vocab, std::uint64_t seed) {
  return init_model(ec, hc, vocab.size(), schema.num_tags(), seed);
}

enum class Mode { kTrain, kEval };

// Inverted dropout: kept entries are scaled by 1/(1-p). Returns the scale mask.
inline Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng& rng) {
  Matrix mask(rows, cols);
  const double keep_scale = 1.0 / (1.0 - p);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) mask(r, c) = rng.uniform() < p ? 0.0 : keep_scale;
  }
  return mask;
}

namespace detail {

inline constexpr double kLayerNormEps = 1e-5;

struct LayerNormCache {
  Matrix xhat;
  Eigen::VectorXd rstd;
};

inline Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, LayerNormCache& cache) {
  const Eigen::Index d = x.cols();
  const Eigen::VectorXd mean = x.rowwise().mean();
  Matrix centered = x.colwise() - mean;
  const Eigen::VectorXd var = centered.array().square().rowwise().sum() / static_cast<double>(d);
  cache.rstd = (var.array() + kLayerNormEps).rsqrt();
  cache.xhat = centered.array().colwise() * cache.rstd.array();
  Matrix y = cache.xhat.array().rowwise() * gain.row(0).array();
  y.rowwise() += bias.row(0);
  return y;
}

inline Matrix layer_norm_backward(const Matrix& dy, const Matrix& gain, const LayerNormCache& cache,
                                  Matrix& dgain, Matrix& dbias) {
  dgain.row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  dbias.row(0) += dy.colwise().sum();
  const Matrix dxhat = dy.array().rowwise() * gain.row(0).array();
  const double inv_d = 1.0 / static_cast<double>(dy.cols());
  const Eigen::VectorXd mean_dxhat = dxhat.rowwise().sum() * inv_d;
  const Eigen::VectorXd mean_dxhat_xhat = (dxhat.array() * cache.xhat.array()).rowwise().sum().matrix() * inv_d;
  Matrix dx = dxhat;
  dx.colwise() -= mean_dxhat;
  dx -= (cache.xhat.array().colwise() * mean_dxhat_xhat.array()).matrix();
  return dx.array().colwise() * cache.rstd.array();
}

inline Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix y = x * w;
  y.rowwise() += b.row(0);
  return y;
}

struct LayerCache {
  Matrix x_in;
  LayerNormCache ln1;
  Matrix h1, q, k, v, attn_out;
  std::vector<Matrix> attn;  // [row * n_heads + head], L x L
  Matrix x_mid;
  LayerNormCache ln2;
  Matrix h2, f1, r1;
};

struct HeadCache {
  Matrix a1, r1, drop, d1, a2, r2;
};

}  // namespace detail

// Activations kept for backpropagation. Rows of every matrix are
// batch-major token positions: row = b * cols + i.
struct ForwardCache {
  std::size_t batch_rows = 0;
  std::size_t batch_cols = 0;
  std::vector<int> token_ids;
  std::vector<std::uint8_t> mask;
  std::vector<detail::LayerCache> layers;
  Matrix x_final;
  detail::LayerNormCache lnf;
  Matrix z;  // final encoder representation
  detail::HeadCache head;

  // Attention weights of layer `l`, batch row `b`, head `h`.
  const Matrix& attention(int l, std::size_t b, int h, int n_heads) const {
    return layers[static_cast<std::size_t>(l)].attn[b * static_cast<std::size_t>(n_heads) + static_cast<std::size_t>(h)];
  }
};

struct ForwardResult {
  Matrix logits;  // (rows * cols) x num_tags
  ForwardCache cache;

  // Logit vector at batch row b, position i.
  Eigen::RowVectorXd at(std::size_t b, std::size_t i) const {
    return logits.row(static_cast<Eigen::Index>(b * cache.batch_cols + i));
  }
};

inline void check_batch(const ModelBundle& m, const Batch& b) {
  if (b.rows == 0 || b.cols == 0) throw ShapeError("empty batch");
  if (b.cols > static_cast<std::size_t>(m.encoder.max_len)) throw ShapeError("batch wider than max_len");
  if (b.token_ids.size() != b.rows * b.cols || b.tag_ids.size() != b.rows * b.cols ||
      b.mask.size() != b.rows * b.cols) {
    throw ShapeError("batch matrices have inconsistent shapes");
  }
  for (std::size_t r = 0; r < b.rows; ++r) {
    if (b.length(r) == 0) throw ShapeError("batch row " + std::to_string(r) + " has no real tokens");
  }
  for (std::size_t i = 0; i < b.token_ids.size(); ++i) {
    if (b.token_ids[i] < 0 || static_cast<std::size_t>(b.token_ids[i]) >= m.vocab_size) {
      throw ShapeError("token id outside the model vocabulary");
    }
    if (b.mask[i] && (b.tag_ids[i] < 0 || static_cast<std::size_t>(b.tag_ids[i]) >= m.num_tags)) {
      throw ShapeError("tag id outside the model tag set");
    }
  }
}

// Pre-norm encoder with masked multi-head self-attention, then the head.
// `rng` drives dropout and is only consulted in training mode.
inline ForwardResult forward(const ModelBundle& m, const Batch& batch, Mode mode, Rng* rng = nullptr) {
  check_batch(m, batch);
  const auto& ec = m.encoder;
  const std::size_t B = batch.rows, L = batch.cols;
  const Eigen::Index N = static_cast<Eigen::Index>(B * L);
  const Eigen::Index d = ec.d_model;
  const int H = ec.n_heads;
  const Eigen::Index dh = d / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  ForwardResult out;
  ForwardCache& c = out.cache;
  c.batch_rows = B;
  c.batch_cols = L;
  c.token_ids = batch.token_ids;
  c.mask = batch.mask;

  Matrix x(N, d);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < L; ++i) {
      const Eigen::Index row = static_cast<Eigen::Index>(b * L + i);
      x.row(row) = m.params[0].row(batch.token(b, i)) + m.params[1].row(static_cast<Eigen::Index>(i));
    }
  }

  c.layers.resize(static_cast<std::size_t>(ec.n_layers));
  for (int l = 0; l < ec.n_layers; ++l) {
    auto& lc = c.layers[static_cast<std::size_t>(l)];
    lc.x_in = x;
    lc.h1 = detail::layer_norm(x, m.layer(l, kLn1Gain), m.layer(l, kLn1Bias), lc.ln1);
    lc.q = detail::affine(lc.h1, m.layer(l, kWq), m.layer(l, kBq));
    lc.k = detail::affine(lc.h1, m.layer(l, kWk), m.layer(l, kBk));
    lc.v = detail::affine(lc.h1, m.layer(l, kWv), m.layer(l, kBv));
    lc.attn_out = Matrix::Zero(N, d);
    lc.attn.resize(B * static_cast<std::size_t>(H));
    for (std::size_t b = 0; b < B; ++b) {
      const Eigen::Index r0 = static_cast<Eigen::Index>(b * L);
      const Eigen::Index len = static_cast<Eigen::Index>(L);
      for (int h = 0; h < H; ++h) {
        const Eigen::Index c0 = h * dh;
        Matrix scores = lc.q.block(r0, c0, len, dh) * lc.k.block(r0, c0, len, dh).transpose() * scale;
        Matrix& a = lc.attn[b * static_cast<std::size_t>(H) + static_cast<std::size_t>(h)];
        a = Matrix::Zero(len, len);
        for (Eigen::Index i = 0; i < len; ++i) {
          double mx = -std::numeric_limits<double>::infinity();
          for (Eigen::Index j = 0; j < len; ++j) {
            if (batch.real(b, static_cast<std::size_t>(j))) mx = std::max(mx, scores(i, j));
          }
          double sum = 0.0;
          for (Eigen::Index j = 0; j < len; ++j) {
            if (!batch.real(b, static_cast<std::size_t>(j))) continue;
            a(i, j) = std::exp(scores(i, j) - mx);
            sum += a(i, j);
          }
          a.row(i) /= sum;
        }
        lc.attn_out.block(r0, c0, len, dh) = a * lc.v.block(r0, c0, len, dh);
      }
    }
    x += detail::affine(lc.attn_out, m.layer(l, kWo), m.layer(l, kBo));
    lc.x_mid = x;
    lc.h2 = detail::layer_norm(x, m.layer(l, kLn2Gain), m.layer(l, kLn2Bias), lc.ln2);
    lc.f1 = detail::affine(lc.h2, m.layer(l, kW1), m.layer(l, kB1));
    lc.r1 = lc.f1.cwiseMax(0.0);
    x += detail::affine(lc.r1, m.layer(l, kW2), m.layer(l, kB2));
  }

  const std::size_t f = m.head_offset() - 2;
  c.x_final = x;
  c.z = detail::layer_norm(x, m.params[f], m.params[f + 1], c.lnf);

  const std::size_t ho = m.head_offset();
  if (m.head.kind == HeadKind::kLinear) {
    out.logits = detail::affine(c.z, m.params[ho], m.params[ho + 1]);
  } else {
    auto& hc = c.head;
    hc.a1 = detail::affine(c.z, m.params[ho], m.params[ho + 1]);
    hc.r1 = hc.a1.cwiseMax(0.0);
    if (mode == Mode::kTrain && m.head.dropout_p > 0.0) {
      if (rng == nullptr) throw ConfigError("training-mode forward needs an rng");
      hc.drop = dropout_mask(hc.r1.rows(), hc.r1.cols(), m.head.dropout_p, *rng);
      hc.d1 = hc.r1.cwiseProduct(hc.drop);
    } else {
      hc.drop.resize(0, 0);
      hc.d1 = hc.r1;
    }
    hc.a2 = detail::affine(hc.d1, m.params[ho + 2], m.params[ho + 3]);
    hc.r2 = hc.a2.cwiseMax(0.0);
    out.logits = detail::affine(hc.r2, m.params[ho + 4], m.params[ho + 5]);
  }
  return out;
}

inline Eigen::RowVectorXd softmax(const Eigen::RowVectorXd& logits) {
  Eigen::RowVectorXd p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

struct LossAndGrads {
  double loss = 0.0;
  std::vector<Matrix> grads;
};

namespace detail {

// Mean token cross-entropy; fills dlogits when non-null.
inline double cross_entropy(const Matrix& logits, const Batch& batch, Matrix* dlogits) {
  const std::size_t n = batch.real_count();
  if (n == 0) throw EmptyLoss("batch has no unmasked positions");
  if (dlogits) *dlogits = Matrix::Zero(logits.rows(), logits.cols());
  double total = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index row = 0; row < logits.rows(); ++row) {
    if (!batch.mask[static_cast<std::size_t>(row)]) continue;
    const int gold = batch.tag_ids[static_cast<std::size_t>(row)];
    const double mx = logits.row(row).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(row).array() - mx).exp();
    const double z = e.sum();
    total += std::log(z) + mx - logits(row, gold);
    if (dlogits) {
      dlogits->row(row) = e / z * inv_n;
      (*dlogits)(row, gold) -= inv_n;
    }
  }
  return total * inv_n;
}

}  // namespace detail

inline double loss(const ModelBundle& m, const Batch& batch, Mode mode = Mode::kEval, Rng* rng = nullptr) {
  if (batch.real_count() == 0) throw EmptyLoss("batch has no unmasked positions");
  return detail::cross_entropy(forward(m, batch, mode, rng).logits, batch, nullptr);
}

// Mean cross-entropy over unmasked positions and its exact gradient with
// respect to every parameter (same order as ModelBundle::params).
inline LossAndGrads loss_and_grads(const ModelBundle& m, const Batch& batch, Mode mode, Rng* rng) {
  if (batch.real_count() == 0) throw EmptyLoss("batch has no unmasked positions");
  ForwardResult fr = forward(m, batch, mode, rng);
  const ForwardCache& c = fr.cache;
  LossAndGrads out;
  out.grads.reserve(m.params.size());
  for (const auto& p : m.params) out.grads.push_back(Matrix::Zero(p.rows(), p.cols()));
  auto& g = out.grads;

  Matrix dlogits;
  out.loss = detail::cross_entropy(fr.logits, batch, &dlogits);

  const std::size_t ho = m.head_offset();
  Matrix dz;
  if (m.head.kind == HeadKind::kLinear) {
    g[ho] = c.z.transpose() * dlogits;
    g[ho + 1] = dlogits.colwise().sum();
    dz = dlogits * m.params[ho].transpose();
  } else {
    const auto& hc = c.head;
    g[ho + 4] = hc.r2.transpose() * dlogits;
    g[ho + 5] = dlogits.colwise().sum();
    Matrix da2 = (dlogits * m.params[ho + 4].transpose()).cwiseProduct((hc.a2.array() > 0.0).cast<double>().matrix());
    g[ho + 2] = hc.d1.transpose() * da2;
    g[ho + 3] = da2.colwise().sum();
    Matrix dd1 = da2 * m.params[ho + 2].transpose();
    if (hc.drop.size() != 0) dd1 = dd1.cwiseProduct(hc.drop);
    Matrix da1 = dd1.cwiseProduct((hc.a1.array() > 0.0).cast<double>().matrix());
    g[ho] = c.z.transpose() * da1;
    g[ho + 1] = da1.colwise().sum();
    dz = da1 * m.params[ho].transpose();
  }

  const std::size_t f = ho - 2;
  Matrix dx = detail::layer_norm_backward(dz, m.params[f], c.lnf, g[f], g[f + 1]);

  const auto& ec = m.encoder;
  const std::size_t B = c.batch_rows, L = c.batch_cols;
  const int H = ec.n_heads;
  const Eigen::Index d = ec.d_model, dh = d / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  for (int l = ec.n_layers - 1; l >= 0; --l) {
    const auto& lc = c.layers[static_cast<std::size_t>(l)];
    const std::size_t base = 2 + static_cast<std::size_t>(l) * kParamsPerLayer;

    // Feed-forward block.
    g[base + kW2] += lc.r1.transpose() * dx;
    g[base + kB2] += dx.colwise().sum();
    Matrix df1 = (dx * m.layer(l, kW2).transpose()).cwiseProduct((lc.f1.array() > 0.0).cast<double>().matrix());
    g[base + kW1] += lc.h2.transpose() * df1;
    g[base + kB1] += df1.colwise().sum();
    Matrix dh2 = df1 * m.layer(l, kW1).transpose();
    dx += detail::layer_norm_backward(dh2, m.layer(l, kLn2Gain), lc.ln2, g[base + kLn2Gain], g[base + kLn2Bias]);

    // Attention block.
    g[base + kWo] += lc.attn_out.transpose() * dx;
    g[base + kBo] += dx.colwise().sum();
    const Matrix dattn_out = dx * m.layer(l, kWo).transpose();
    Matrix dq = Matrix::Zero(dx.rows(), d), dk = Matrix::Zero(dx.rows(), d), dv = Matrix::Zero(dx.rows(), d);
    for (std::size_t b = 0; b < B; ++b) {
      const Eigen::Index r0 = static_cast<Eigen::Index>(b * L), len = static_cast<Eigen::Index>(L);
      for (int h = 0; h < H; ++h) {
        const Eigen::Index c0 = h * dh;
        const Matrix& a = lc.attn[b * static_cast<std::size_t>(H) + static_cast<std::size_t>(h)];
        const auto dout = dattn_out.block(r0, c0, len, dh);
        const Matrix da = dout * lc.v.block(r0, c0, len, dh).transpose();
        dv.block(r0, c0, len, dh) = a.transpose() * dout;
        const Eigen::VectorXd row_dot = (da.array() * a.array()).rowwise().sum();
        const Matrix ds = (a.array() * (da.colwise() - row_dot).array()).matrix() * scale;
        dq.block(r0, c0, len, dh) = ds * lc.k.block(r0, c0, len, dh);
        dk.block(r0, c0, len, dh) = ds.transpose() * lc.q.block(r0, c0, len, dh);
      }
    }
    g[base + kWq] += lc.h1.transpose() * dq;
    g[base + kBq] += dq.colwise().sum();
    g[base + kWk] += lc.h1.transpose() * dk;
    g[base + kBk] += dk.colwise().sum();
    g[base + kWv] += lc.h1.transpose() * dv;
    g[base + kBv] += dv.colwise().sum();
    const Matrix dh1 = dq * m.layer(l, kWq).transpose() + dk * m.layer(l, kWk).transpose() +
                       dv * m.layer(l, kWv).transpose();
    dx += detail::layer_norm_backward(dh1, m.layer(l, kLn1Gain), lc.ln1, g[base + kLn1Gain], g[base + kLn1Bias]);
  }

  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t i = 0; i < L; ++i) {
      const Eigen::Index row = static_cast<Eigen::Index>(b * L + i);
      g[0].row(c.token_ids[b * L + i]) += dx.row(row);
      g[1].row(static_cast<Eigen::Index>(i)) += dx.row(row);
    }
  }
  return out;
}

// Argmax per real position in evaluation mode; ties go to the lowest tag id.
inline std::vector<std::vector<TagId>> predict_tags(const ModelBundle& m, const std::vector<AddressSample>& samples,
                                                    const Vocabulary& vocab, const TagSchema& schema,
                                                    std::size_t batch_size = 64) {
  std::vector<std::vector<TagId>> out;
  out.reserve(samples.size());
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::vector<AddressSample> chunk(samples.begin() + static_cast<std::ptrdiff_t>(start),
                                           samples.begin() + static_cast<std::ptrdiff_t>(std::min(samples.size(), start + batch_size)));
    const Batch b = encode_batch(chunk, vocab, schema);
    const Matrix logits = forward(m, b, Mode::kEval).logits;
    for (std::size_t r = 0; r < b.rows; ++r) {
      std::vector<TagId> tags;
      for (std::size_t i = 0; i < chunk[r].size(); ++i) {
        const auto row = logits.row(static_cast<Eigen::Index>(r * b.cols + i));
        Eigen::Index best = 0;
        for (Eigen::Index t = 1; t < row.size(); ++t) {
          if (row(t) > row(best)) best = t;
        }
        tags.push_back(static_cast<TagId>(best));
      }
      out.push_back(std::move(tags));
    }
  }
  return out;
}

struct Representations {
  Matrix vectors;             // total tokens x d_model
  std::vector<TagId> gold;    // aligned with rows
};

// Final-encoder vectors (after the last layer norm) for every real token,
// sample order then position order.
inline Representations export_representations(const ModelBundle& m, const std::vector<AddressSample>& samples,
                                              const Vocabulary& vocab, const TagSchema& schema) {
  std::size_t total = 0;
  for (const auto& s : samples) total += s.size();
  Representations reps;
  reps.vectors.resize(static_cast<Eigen::Index>(total), m.encoder.d_model);
  reps.gold.reserve(total);
  Eigen::Index row = 0;
  constexpr std::size_t kChunk = 64;
  for (std::size_t start = 0; start < samples.size(); start += kChunk) {
    const std::vector<AddressSample> chunk(samples.begin() + static_cast<std::ptrdiff_t>(start),
                                           samples.begin() + static_cast<std::ptrdiff_t>(std::min(samples.size(), start + kChunk)));
    const Batch b = encode_batch(chunk, vocab, schema);
    const ForwardResult fr = forward(m, b, Mode::kEval);
    for (std::size_t r = 0; r < b.rows; ++r) {
      for (std::size_t i = 0; i < chunk[r].size(); ++i) {
        reps.vectors.row(row++) = fr.cache.z.row(static_cast<Eigen::Index>(r * b.cols + i));
        reps.gold.push_back(chunk[r].tags[i]);
      }
    }
  }
  return reps;
}

}  // namespace addrparse

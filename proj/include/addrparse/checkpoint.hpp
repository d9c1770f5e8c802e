#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "addrparse/model.hpp"
#include "addrparse/optim.hpp"

namespace addrparse {

struct Checkpoint {
  ModelBundle model;
  std::uint64_t vocab_fingerprint = 0;
  std::string schema_text;
  std::optional<Optimizer> optimizer;
};

namespace detail {

inline constexpr std::string_view kCheckpointMagic = "ADDRCKP1";

class ByteWriter {
 public:
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u64(s.size());
    out_.append(s);
  }
  void matrix(const Eigen::MatrixXd& m) {
    i64(m.rows());
    i64(m.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
    }
  }
  void matrices(const std::vector<Eigen::MatrixXd>& ms) {
    u64(ms.size());
    for (const auto& m : ms) matrix(m);
  }
  std::string take() && { return std::move(out_); }

 private:
  std::string out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view in) : in_(in) {}

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint64_t n = u64();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  Eigen::MatrixXd matrix() {
    const std::int64_t rows = i64(), cols = i64();
    if (rows < 0 || cols < 0 || static_cast<std::uint64_t>(rows) * static_cast<std::uint64_t>(cols) > (in_.size() - pos_) / 8) {
      throw FormatError("checkpoint tensor shape is corrupt");
    }
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = f64();
    }
    return m;
  }
  std::vector<Eigen::MatrixXd> matrices() {
    const std::uint64_t n = u64();
    if (n > in_.size()) throw FormatError("checkpoint tensor count is corrupt");
    std::vector<Eigen::MatrixXd> out;
    for (std::uint64_t i = 0; i < n; ++i) out.push_back(matrix());
    return out;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (in_.size() - pos_ < n) throw FormatError("checkpoint is truncated");
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace detail

// Little-endian binary layout: magic, configs, vocab fingerprint, schema,
// parameters, optional optimizer state. Doubles are stored bit-exactly.
inline std::string serialize_checkpoint(const Checkpoint& ck) {
  detail::ByteWriter w;
  w.str(detail::kCheckpointMagic);
  const auto& m = ck.model;
  w.str(m.encoder.variant_name);
  w.i64(m.encoder.d_model);
  w.i64(m.encoder.n_layers);
  w.i64(m.encoder.n_heads);
  w.i64(m.encoder.d_ff);
  w.i64(m.encoder.max_len);
  w.i64(m.head.kind == HeadKind::kLinear ? 0 : 1);
  w.i64(m.head.hidden_dim);
  w.f64(m.head.dropout_p);
  w.u64(m.vocab_size);
  w.u64(m.num_tags);
  w.u64(ck.vocab_fingerprint);
  w.str(ck.schema_text);
  w.matrices(m.params);
  w.u64(ck.optimizer ? 1 : 0);
  if (ck.optimizer) {
    const auto& o = *ck.optimizer;
    w.i64(static_cast<std::int64_t>(o.kind()));
    w.f64(o.hyper().weight_decay);
    w.f64(o.hyper().beta1);
    w.f64(o.hyper().beta2);
    w.f64(o.hyper().eps);
    w.f64(o.hyper().rms_alpha);
    w.u64(o.steps());
    w.matrices(o.first_moments());
    w.matrices(o.second_moments());
  }
  return std::move(w).take();
}

inline Checkpoint deserialize_checkpoint(std::string_view bytes) {
  detail::ByteReader r(bytes);
  if (r.str() != detail::kCheckpointMagic) throw FormatError("not a checkpoint file");
  Checkpoint ck;
  auto& m = ck.model;
  m.encoder.variant_name = r.str();
  m.encoder.d_model = static_cast<int>(r.i64());
  m.encoder.n_layers = static_cast<int>(r.i64());
  m.encoder.n_heads = static_cast<int>(r.i64());
  m.encoder.d_ff = static_cast<int>(r.i64());
  m.encoder.max_len = static_cast<int>(r.i64());
  m.head.kind = r.i64() == 0 ? HeadKind::kLinear : HeadKind::kMlp;
  m.head.hidden_dim = static_cast<int>(r.i64());
  m.head.dropout_p = r.f64();
  m.vocab_size = r.u64();
  m.num_tags = r.u64();
  ck.vocab_fingerprint = r.u64();
  ck.schema_text = r.str();
  m.params = r.matrices();
  if (r.u64() != 0) {
    const auto kind = static_cast<OptimizerKind>(r.i64());
    OptimizerHyper h;
    h.weight_decay = r.f64();
    h.beta1 = r.f64();
    h.beta2 = r.f64();
    h.eps = r.f64();
    h.rms_alpha = r.f64();
    const std::uint64_t t = r.u64();
    auto first = r.matrices();
    auto second = r.matrices();
    ck.optimizer = Optimizer::restore(kind, h, t, std::move(first), std::move(second));
  }
  if (!r.done()) throw FormatError("trailing bytes after checkpoint");
  m.encoder.validate();
  m.head.validate();
  const auto shapes = parameter_shapes(m.encoder, m.head, m.vocab_size, m.num_tags);
  if (shapes.size() != m.params.size()) throw FormatError("checkpoint parameter count does not match its configs");
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (shapes[i].rows != m.params[i].rows() || shapes[i].cols != m.params[i].cols()) {
      throw FormatError("checkpoint tensor " + shapes[i].name + " has the wrong shape");
    }
  }
  return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  const std::string bytes = serialize_checkpoint(ck);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace addrparse

#include "articnav/neuralnet.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "articnav/error.hpp"

namespace articnav {

template <typename Scalar>
BasicMlp<Scalar>::BasicMlp(std::vector<std::size_t> sizes, OutputHead head)
    : sizes_(std::move(sizes)), head_(head) {
  if (sizes_.size() < 2) throw Error(ErrorCategory::invalid_argument, "mlp needs >= 2 layer sizes");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] == 0 || sizes_[l + 1] == 0) {
      throw Error(ErrorCategory::invalid_argument, "mlp layer sizes must be > 0");
    }
    offsets_.push_back(total);
    total += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
  }
  params_ = Vector::Zero(static_cast<Eigen::Index>(total));
}

template <typename Scalar>
void BasicMlp<Scalar>::initialize(std::mt19937_64& rng) {
  ++version_;
  for (std::size_t l = 0; l < layer_count(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    std::uniform_real_distribution<double> u(-bound, bound);
    const std::size_t n = sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
    for (std::size_t i = 0; i < n; ++i) params_[offsets_[l] + i] = static_cast<Scalar>(u(rng));
  }
}

template <typename Scalar>
void BasicMlp<Scalar>::set_parameters(const Vector& p) {
  if (p.size() != params_.size()) {
    throw Error(ErrorCategory::invalid_argument, "parameter vector size mismatch");
  }
  ++version_;
  params_ = p;
}

template <typename Scalar>
Eigen::Map<const typename BasicMlp<Scalar>::Matrix> BasicMlp<Scalar>::weight(std::size_t l) const {
  return {params_.data() + offsets_[l], static_cast<Eigen::Index>(sizes_[l + 1]),
          static_cast<Eigen::Index>(sizes_[l])};
}

template <typename Scalar>
Eigen::Map<const typename BasicMlp<Scalar>::Vector> BasicMlp<Scalar>::bias(std::size_t l) const {
  return {params_.data() + offsets_[l] + sizes_[l] * sizes_[l + 1],
          static_cast<Eigen::Index>(sizes_[l + 1])};
}

template <typename Scalar>
typename BasicMlp<Scalar>::Matrix BasicMlp<Scalar>::forward(const Matrix& input,
                                                            Cache* cache) const {
  if (static_cast<std::size_t>(input.rows()) != input_size()) {
    throw Error(ErrorCategory::invalid_argument,
                "mlp input has " + std::to_string(input.rows()) + " rows, expected " +
                    std::to_string(input_size()));
  }
  if (cache) {
    cache->inputs.resize(layer_count());
    cache->pre.resize(layer_count() - 1);
    cache->owner = this;
    cache->version = version_;
  }
  Matrix a = input;
  for (std::size_t l = 0; l < layer_count(); ++l) {
    Matrix z = weight(l) * a;
    z.colwise() += bias(l);
    if (cache) cache->inputs[l] = std::move(a);
    if (l + 1 == layer_count()) return z;
    if (cache) cache->pre[l] = z;
    a = z.cwiseMax(Scalar(0));
  }
  return a;  // unreachable
}

template <typename Scalar>
Eigen::MatrixXd BasicMlp<Scalar>::predict(const Matrix& input) const {
  const Matrix out = forward(input);
  if (head_ == OutputHead::linear) return out.template cast<double>();
  Eigen::MatrixXd probs, log_probs;
  softmax_columns(out.template cast<float>(), probs, log_probs);
  return probs;
}

template <typename Scalar>
typename BasicMlp<Scalar>::Vector BasicMlp<Scalar>::backward(const Cache& cache,
                                                             const Matrix& output_grad) const {
  if (cache.owner != this || cache.version != version_ || cache.inputs.size() != layer_count()) {
    throw Error(ErrorCategory::invalid_argument,
                "backward called with a stale or foreign forward cache");
  }
  const Eigen::Index batch = cache.inputs.front().cols();
  if (output_grad.rows() != static_cast<Eigen::Index>(output_size()) || output_grad.cols() != batch) {
    throw Error(ErrorCategory::invalid_argument, "output gradient shape mismatch");
  }
  Vector grad(params_.size());
  Matrix g = output_grad;
  for (std::size_t l = layer_count(); l-- > 0;) {
    const auto rows = static_cast<Eigen::Index>(sizes_[l + 1]);
    const auto cols = static_cast<Eigen::Index>(sizes_[l]);
    Eigen::Map<Matrix> dw(grad.data() + offsets_[l], rows, cols);
    Eigen::Map<Vector> db(grad.data() + offsets_[l] + sizes_[l] * sizes_[l + 1], rows);
    dw.noalias() = g * cache.inputs[l].transpose();
    db = g.rowwise().sum();
    if (l == 0) break;
    Matrix back = weight(l).transpose() * g;
    g = (cache.pre[l - 1].array() > Scalar(0)).select(back, Scalar(0));
  }
  return grad;
}

template class BasicMlp<float>;
template class BasicMlp<double>;

void softmax_columns(const Eigen::MatrixXf& logits, Eigen::MatrixXd& probs,
                     Eigen::MatrixXd& log_probs) {
  const Eigen::MatrixXd z = logits.cast<double>();
  probs.resize(z.rows(), z.cols());
  log_probs.resize(z.rows(), z.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    const double m = z.col(j).maxCoeff();
    const double lse = m + std::log((z.col(j).array() - m).exp().sum());
    log_probs.col(j) = z.col(j).array() - lse;
    probs.col(j) = log_probs.col(j).array().exp().max(1e-30);
  }
}

Adam::Adam(AdamConfig config, std::size_t n) : config_(config) {
  state_.m = Eigen::VectorXf::Zero(static_cast<Eigen::Index>(n));
  state_.v = Eigen::VectorXf::Zero(static_cast<Eigen::Index>(n));
}

void Adam::set_state(AdamState s) {
  if (s.m.size() != state_.m.size() || s.v.size() != state_.v.size()) {
    throw Error(ErrorCategory::invalid_argument, "optimizer state size mismatch");
  }
  state_ = std::move(s);
}

void Adam::step(Eigen::VectorXf& params, const Eigen::VectorXf& grad) {
  if (grad.size() != params.size() || grad.size() != state_.m.size()) {
    throw Error(ErrorCategory::invalid_argument, "adam: gradient size mismatch");
  }
  if (!grad.allFinite()) {
    throw Error(ErrorCategory::non_finite, "adam: non-finite gradient");
  }
  ++state_.step;
  const auto t = static_cast<double>(state_.step);
  const auto b1 = static_cast<float>(config_.beta1);
  const auto b2 = static_cast<float>(config_.beta2);
  state_.m = b1 * state_.m + (1.0f - b1) * grad;
  state_.v = b2 * state_.v + (1.0f - b2) * grad.cwiseProduct(grad);
  const auto c1 = static_cast<float>(1.0 - std::pow(config_.beta1, t));
  const auto c2 = static_cast<float>(1.0 - std::pow(config_.beta2, t));
  const auto lr = static_cast<float>(config_.lr);
  const auto eps = static_cast<float>(config_.epsilon);
  params.array() -= lr * (state_.m.array() / c1) / ((state_.v.array() / c2).sqrt() + eps);
}

// ---- checkpoint encoding ----

namespace {

constexpr char kMagic[8] = {'A', 'R', 'T', 'N', 'A', 'V', 'C', 'K'};

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

class Writer {
 public:
  template <typename T>
  void put(T v) {
    v = to_little(v);
    out_.append(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_string(std::string_view s) {
    put<std::uint64_t>(s.size());
    out_.append(s);
  }
  void put_floats(const float* data, std::size_t n) {
    put<std::uint64_t>(n);
    for (std::size_t i = 0; i < n; ++i) put(data[i]);
  }
  std::string& bytes() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return to_little(v);
  }
  std::string get_string() {
    const auto n = get<std::uint64_t>();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  Eigen::VectorXf get_floats() {
    const auto n = get<std::uint64_t>();
    need(n * sizeof(float));
    Eigen::VectorXf v(static_cast<Eigen::Index>(n));
    for (std::uint64_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] = get<float>();
    return v;
  }
  std::size_t position() const { return pos_; }

 private:
  void need(std::uint64_t n) const {
    if (n > in_.size() - pos_) throw Error(ErrorCategory::corrupt_file, "checkpoint is truncated");
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes().append(kMagic, sizeof(kMagic));
  w.put<std::uint32_t>(Checkpoint::kFormatVersion);
  w.put<std::uint32_t>(ckpt.layout_version);
  w.put_string(ckpt.metadata);
  w.put<std::uint64_t>(ckpt.counters.size());
  for (const auto& [k, v] : ckpt.counters) {
    w.put_string(k);
    w.put(v);
  }
  w.put<std::uint64_t>(ckpt.scalars.size());
  for (const auto& [k, v] : ckpt.scalars) {
    w.put_string(k);
    w.put(v);
  }
  w.put<std::uint64_t>(ckpt.networks.size());
  for (const auto& [k, net] : ckpt.networks) {
    w.put_string(k);
    w.put<std::uint32_t>(net.head() == OutputHead::softmax ? 1u : 0u);
    w.put<std::uint64_t>(net.sizes().size());
    for (auto s : net.sizes()) w.put<std::uint64_t>(s);
    w.put_floats(net.parameters().data(), net.parameter_count());
  }
  w.put<std::uint64_t>(ckpt.optimizers.size());
  for (const auto& [k, opt] : ckpt.optimizers) {
    w.put_string(k);
    w.put(opt.first.lr);
    w.put(opt.first.beta1);
    w.put(opt.first.beta2);
    w.put(opt.first.epsilon);
    w.put(opt.second.step);
    w.put_floats(opt.second.m.data(), static_cast<std::size_t>(opt.second.m.size()));
    w.put_floats(opt.second.v.data(), static_cast<std::size_t>(opt.second.v.size()));
  }
  w.put(fnv1a(w.bytes()));
  return std::move(w.bytes());
}

Checkpoint decode_checkpoint(std::string_view bytes, std::uint32_t expected_layout_version) {
  if (bytes.size() < sizeof(kMagic) + 8 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCategory::corrupt_file, "not a checkpoint file (bad magic)");
  }
  Reader r(bytes.substr(sizeof(kMagic)));
  const auto format = r.get<std::uint32_t>();
  if (format != Checkpoint::kFormatVersion) {
    throw Error(ErrorCategory::unsupported_version,
                "checkpoint format version " + std::to_string(format) + ", expected " +
                    std::to_string(Checkpoint::kFormatVersion));
  }
  Checkpoint c;
  c.layout_version = r.get<std::uint32_t>();
  if (c.layout_version != expected_layout_version) {
    throw Error(ErrorCategory::layout_mismatch,
                "checkpoint observation layout version " + std::to_string(c.layout_version) +
                    " does not match this build's version " +
                    std::to_string(expected_layout_version));
  }
  if (bytes.size() < sizeof(kMagic) + 16) throw Error(ErrorCategory::corrupt_file, "checkpoint is truncated");
  const std::string_view body = bytes.substr(0, bytes.size() - 8);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
  if (to_little(stored) != fnv1a(body)) {
    throw Error(ErrorCategory::corrupt_file, "checkpoint checksum mismatch (truncated or damaged)");
  }
  Reader rb(body.substr(sizeof(kMagic) + 8));
  c.metadata = rb.get_string();
  for (auto n = rb.get<std::uint64_t>(); n > 0; --n) {
    auto k = rb.get_string();
    c.counters[k] = rb.get<std::uint64_t>();
  }
  for (auto n = rb.get<std::uint64_t>(); n > 0; --n) {
    auto k = rb.get_string();
    c.scalars[k] = rb.get<double>();
  }
  for (auto n = rb.get<std::uint64_t>(); n > 0; --n) {
    auto k = rb.get_string();
    const auto head = rb.get<std::uint32_t>() == 1u ? OutputHead::softmax : OutputHead::linear;
    std::vector<std::size_t> sizes(rb.get<std::uint64_t>());
    if (sizes.size() > 64) throw Error(ErrorCategory::corrupt_file, "implausible network depth");
    for (auto& s : sizes) s = rb.get<std::uint64_t>();
    Mlp net(sizes, head);
    const auto p = rb.get_floats();
    if (p.size() != static_cast<Eigen::Index>(net.parameter_count())) {
      throw Error(ErrorCategory::corrupt_file, "network '" + k + "' parameter count mismatch");
    }
    net.set_parameters(p);
    c.networks.emplace(k, std::move(net));
  }
  for (auto n = rb.get<std::uint64_t>(); n > 0; --n) {
    auto k = rb.get_string();
    AdamConfig cfg;
    cfg.lr = rb.get<double>();
    cfg.beta1 = rb.get<double>();
    cfg.beta2 = rb.get<double>();
    cfg.epsilon = rb.get<double>();
    AdamState st;
    st.step = rb.get<std::uint64_t>();
    st.m = rb.get_floats();
    st.v = rb.get_floats();
    c.optimizers.emplace(k, std::make_pair(cfg, std::move(st)));
  }
  if (rb.position() != body.size() - sizeof(kMagic) - 8) {
    throw Error(ErrorCategory::corrupt_file, "trailing bytes in checkpoint");
  }
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(ckpt);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCategory::io, "cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCategory::io, "write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCategory::io, "cannot move checkpoint into place: " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::uint32_t expected_layout_version) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::file_not_found, "cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str(), expected_layout_version);
}

}  // namespace articnav

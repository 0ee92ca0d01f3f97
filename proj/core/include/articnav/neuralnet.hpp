#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace articnav {

enum class OutputHead { linear, softmax };

// Dense network with rectified-linear hidden layers. Samples are columns.
// All parameters live in one flat vector: for each layer the weight matrix
// (out x in, column-major) followed by its bias.
template <typename Scalar>
class BasicMlp {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  // Activations recorded by forward(); tied to the parameter version that
  // produced them.
  struct Cache {
    std::vector<Matrix> inputs;       // input to each layer
    std::vector<Matrix> pre;          // pre-activation of each hidden layer
    const BasicMlp* owner = nullptr;
    std::uint64_t version = 0;
  };

  BasicMlp() = default;
  // sizes = {input, hidden..., output}; parameters start at zero.
  BasicMlp(std::vector<std::size_t> sizes, OutputHead head);

  // Fan-in scaled uniform: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  void initialize(std::mt19937_64& rng);

  // Raw outputs (logits for a softmax head). Throws Error(invalid_argument)
  // on a shape mismatch.
  Matrix forward(const Matrix& input, Cache* cache = nullptr) const;
  // forward() followed by the head: identity or column-wise softmax.
  Eigen::MatrixXd predict(const Matrix& input) const;

  // Gradient of sum_j <output_grad_j, raw_output_j> with respect to the flat
  // parameters. Throws Error(invalid_argument) when the cache is stale.
  Vector backward(const Cache& cache, const Matrix& output_grad) const;

  const std::vector<std::size_t>& sizes() const { return sizes_; }
  OutputHead head() const { return head_; }
  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  std::size_t layer_count() const { return sizes_.size() - 1; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }

  const Vector& parameters() const { return params_; }
  // Any mutation invalidates outstanding caches.
  Vector& mutable_parameters() {
    ++version_;
    return params_;
  }
  void set_parameters(const Vector& p);
  std::uint64_t version() const { return version_; }

  Eigen::Map<const Matrix> weight(std::size_t layer) const;
  Eigen::Map<const Vector> bias(std::size_t layer) const;

  template <typename Other>
  BasicMlp<Other> cast() const {
    BasicMlp<Other> out(sizes_, head_);
    out.set_parameters(params_.template cast<Other>());
    return out;
  }

  bool operator==(const BasicMlp& o) const {
    return sizes_ == o.sizes_ && head_ == o.head_ && params_ == o.params_;
  }

 private:
  std::vector<std::size_t> sizes_{1, 1};
  OutputHead head_ = OutputHead::linear;
  std::vector<std::size_t> offsets_;  // start of each layer's weights
  Vector params_;
  std::uint64_t version_ = 0;
};

using Mlp = BasicMlp<float>;

// Column-wise softmax and log-softmax, accumulated in double. Probabilities
// are floored at 1e-30.
void softmax_columns(const Eigen::MatrixXf& logits, Eigen::MatrixXd& probs,
                     Eigen::MatrixXd& log_probs);

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool operator==(const AdamConfig&) const = default;
};

struct AdamState {
  Eigen::VectorXf m;
  Eigen::VectorXf v;
  std::uint64_t step = 0;
  bool operator==(const AdamState&) const = default;
};

class Adam {
 public:
  Adam() = default;
  Adam(AdamConfig config, std::size_t parameter_count);

  // Bias-corrected Adam step. Throws Error(non_finite) when the gradient
  // holds a NaN or infinity; parameters are left untouched in that case.
  void step(Eigen::VectorXf& params, const Eigen::VectorXf& grad);
  void step(Mlp& net, const Eigen::VectorXf& grad) { step(net.mutable_parameters(), grad); }

  const AdamConfig& config() const { return config_; }
  AdamConfig& mutable_config() { return config_; }
  const AdamState& state() const { return state_; }
  void set_state(AdamState s);

 private:
  AdamConfig config_;
  AdamState state_;
};

// Versioned binary checkpoint. Layout (all little-endian):
//   magic "ARTNAVCK", u32 format version, u32 observation layout version,
//   string metadata (JSON), counters, scalars, networks, optimizers,
//   u64 FNV-1a checksum of everything before it.
// Strings are u64 length + bytes; networks store head, sizes and raw floats.
struct Checkpoint {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::uint32_t layout_version = 0;
  std::string metadata;
  std::map<std::string, std::uint64_t> counters;
  std::map<std::string, double> scalars;
  std::map<std::string, Mlp> networks;
  std::map<std::string, std::pair<AdamConfig, AdamState>> optimizers;

  bool operator==(const Checkpoint&) const = default;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
// Throws Error(corrupt_file) for truncated or damaged data,
// Error(unsupported_version) for a different format version and
// Error(layout_mismatch) when expected_layout_version differs.
Checkpoint decode_checkpoint(std::string_view bytes, std::uint32_t expected_layout_version);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::uint32_t expected_layout_version);

extern template class BasicMlp<float>;
extern template class BasicMlp<double>;

}  // namespace articnav

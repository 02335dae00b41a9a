#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace hitop::segnet {

/// U-Net shape. Each entry of `widths` is one encoder level (double 3x3 conv
/// then 2x2 max pool); the decoder mirrors it with stride-2 transposed convs
/// and concatenated skips, and a 1x1 head maps to one logit channel.
struct SegModelConfig {
  int height = 128;
  int width = 128;
  int in_channels = 1;
  std::vector<int> widths{64, 128, 256};
  int bottleneck = 512;
  double dropout = 0.15;

  /// 16/32/64 with a 128 bottleneck.
  static SegModelConfig desk(int height, int width);

  int depth() const noexcept { return static_cast<int>(widths.size()); }
  /// Throws ConfigError.
  void validate() const;
  nlohmann::json to_json() const;
  static SegModelConfig from_json(const nlohmann::json& doc);
  bool operator==(const SegModelConfig&) const = default;
};

struct TensorInfo {
  std::string name;
  std::vector<int> shape;  ///< row-major element order as stored
  std::size_t size() const;
};

/// Conv weights are [out][in][k][k], transposed-conv weights [in][out][2][2],
/// biases [out]. Order: enc{l}.conv{1,2}, bottleneck.conv{1,2}, then for
/// l = depth-1 .. 0: dec{l}.up, dec{l}.conv{1,2}; finally head.
std::vector<TensorInfo> parameter_layout(const SegModelConfig& config);

template <typename S>
class Network {
 public:
  using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  /// He-normal kernels (scaled for the linear head), zero biases.
  Network(const SegModelConfig& config, std::uint64_t seed);

  const SegModelConfig& config() const noexcept { return config_; }
  std::vector<Matrix>& parameters() noexcept { return params_; }
  const std::vector<Matrix>& parameters() const noexcept { return params_; }
  std::size_t parameter_count() const;

  /// `image` is in_channels x (height*width); returns 1 x (height*width) logits.
  /// Dropout draws from `rng` only when `training` is set.
  Matrix forward(const Matrix& image, bool training = false, std::mt19937_64* rng = nullptr) const;

  /// Forward and backward of the BCE-with-logits loss for one sample. Adds
  /// `scale` times the gradient of the summed per-pixel loss into `grads`
  /// (same shapes as parameters()) and returns the summed loss.
  double accumulate_gradient(const Matrix& image, const Matrix& target, S scale, bool training,
                             std::mt19937_64* rng, std::vector<Matrix>& grads) const;

  std::vector<Matrix> zero_gradients() const;

 private:
  struct Trace;
  Matrix run(const Matrix& image, bool training, std::mt19937_64* rng, Trace* trace) const;

  SegModelConfig config_;
  std::vector<Matrix> params_;
};

extern template class Network<float>;
extern template class Network<double>;

/// Mean of max(z,0) - z*y + log(1 + exp(-|z|)) over all entries.
double bce_with_logits(const Eigen::Ref<const Eigen::ArrayXd>& logits, const Eigen::Ref<const Eigen::ArrayXd>& targets);

}  // namespace hitop::segnet

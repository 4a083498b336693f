#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "shlb/tensor.h"

namespace shlb {

// At ReLU nodes the guided rule additionally drops negative incoming gradient.
enum class GradientRule { kStandard, kGuided };

struct BackwardOptions {
  GradientRule rule = GradientRule::kStandard;
  bool accumulate_parameter_grads = true;
};

// A learnable tensor. Its gradient lives in value's gradient slot.
template <typename Scalar>
struct Parameter {
  std::string name;
  Tensor<Scalar> value;
  bool trainable = true;
};

template <typename Scalar>
struct NamedParameter {
  std::string path;
  Parameter<Scalar>* param;
};

enum class LayerKind {
  kConv1d,
  kLinear,
  kLayerNorm,
  kMultiHeadAttention,
  kPositionalEncoding,
  kRelu,
  kGelu,
  kSoftmax,
  kFlatten,
  kTransformerBlock,
  kSequential,
};

std::string_view to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  std::size_t in = 0;      // input channels / features / model dim
  std::size_t out = 0;     // output channels / features
  std::size_t kernel = 0;  // conv1d only
  std::size_t heads = 0;   // attention and transformer block
  std::size_t hidden = 0;  // transformer feed-forward width

  static LayerSpec conv1d(std::size_t in, std::size_t out, std::size_t kernel);
  static LayerSpec linear(std::size_t in, std::size_t out);
  static LayerSpec layer_norm(std::size_t dim);
  static LayerSpec attention(std::size_t dim, std::size_t heads);
  static LayerSpec positional_encoding(std::size_t dim);
  static LayerSpec transformer_block(std::size_t dim, std::size_t heads, std::size_t hidden);
  static LayerSpec of(LayerKind kind) { return LayerSpec{kind}; }

  // Throws InvalidArgument for kernel < 1, dim % heads != 0, zero sizes.
  void validate() const;
};

// Stateful layer: forward() records what backward() needs (the layer's tape).
// Inputs are [N, T, C] for sequence layers and [..., F] for row-wise layers.
template <typename Scalar>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;
  // Throws ShapeError when the layer does not accept `input`.
  virtual Shape output_shape(const Shape& input) const = 0;
  virtual Tensor<Scalar> forward(const Tensor<Scalar>& input) = 0;
  // Returns dLoss/dInput and accumulates parameter gradients. Throws TapeError
  // if forward() has not run.
  virtual Tensor<Scalar> backward(const Tensor<Scalar>& grad_output,
                                  const BackwardOptions& options) = 0;
  virtual void collect_parameters(const std::string& prefix,
                                  std::vector<NamedParameter<Scalar>>& out);
  virtual void init_parameters(std::mt19937_64& rng);

  std::vector<NamedParameter<Scalar>> parameters(const std::string& prefix = "");
};

template <typename Scalar>
std::unique_ptr<Layer<Scalar>> make_layer(const LayerSpec& spec);

template <typename Scalar>
class Conv1d final : public Layer<Scalar> {
 public:
  // Stride 1, zero "same" padding: left (k-1)/2, right k-1-(k-1)/2.
  Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel);

  LayerKind kind() const override { return LayerKind::kConv1d; }
  std::unique_ptr<Layer<Scalar>> clone() const override;
  Shape output_shape(const Shape& input) const override;
  Tensor<Scalar> forward(const Tensor<Scalar>& input) override;
  Tensor<Scalar> backward(const Tensor<Scalar>& grad_output,
                          const BackwardOptions& options) override;
  void collect_parameters(const std::string& prefix,
                          std::vector<NamedParameter<Scalar>>& out) override;
  void init_parameters(std::mt19937_64& rng) override;

  // [kernel, in, out]
  Parameter<Scalar>& weight() { return weight_; }
  Parameter<Scalar>& bias() { return bias_; }

 private:
  std::size_t in_, out_, kernel_;
  Parameter<Scalar> weight_, bias_;
  Tensor<Scalar> columns_;  // im2col of the last input, [N*T, kernel*in]
  Shape input_shape_;
  bool taped_ = false;
};

template <typename Scalar>
class Linear final : public Layer<Scalar> {
 public:
  Linear(std::size_t in_features, std::size_t out_features);

  LayerKind kind() const override { return LayerKind::kLinear; }
  std::unique_ptr<Layer<Scalar>> clone() const override;
  Shape output_shape(const Shape& input) const override;
  Tensor<Scalar> forward(const Tensor<Scalar>& input) override;
  Tensor<Scalar> backward(const Tensor<Scalar>& grad_output,
                          const BackwardOptions& options) override;
  void collect_parameters(const std::string& prefix,
                          std::vector<NamedParameter<Scalar>>& out) override;
  void init_parameters(std::mt19937_64& rng) override;

  // [in, out]
  Parameter<Scalar>& weight() { return weight_; }
  Parameter<Scalar>& bias() { return bias_; }

 private:
  std::size_t in_, out_;
  Parameter<Scalar> weight_, bias_;
  Tensor<Scalar> input_;
  bool taped_ = false;
};

template <typename Scalar>
class LayerNorm final : public Layer<Scalar> {
 public:
  explicit LayerNorm(std::size_t dim, double eps = 1e-6);

  LayerKind kind() const override { return LayerKind::kLayerNorm; }
  std::unique_ptr<Layer<Scalar>> clone() const override;
  Shape output_shape(const Shape& input) const override;
  Tensor<Scalar> forward(const Tensor<Scalar>& input) override;
  Tensor<Scalar> backward(const Tensor<Scalar>& grad_output,
                          const BackwardOptions& options) override;
  void collect_parameters(const std::string& prefix,
                          std::vector<NamedParameter<Scalar>>& out) override;
  void init_parameters(std::mt19937_64& rng) override;

  Parameter<Scalar>& gain() { return gain_; }
  Parameter<Scalar>& bias() { return bias_; }

 private:
  std::size_t dim_;
  double eps_;
  Parameter<Scalar> gain_, bias_;
  Tensor<Scalar> normalized_;
  std::vector<Scalar> inv_std_;
  bool taped_ = false;
};

template <typename Scalar>
class MultiHeadAttention final : public Layer<Scalar> {
 public:
  MultiHeadAttention(std::size_t dim, std::size_t heads);

  LayerKind kind() const override { return LayerKind::kMultiHeadAttention; }
  std::unique_ptr<Layer<Scalar>> clone() const override;
  Shape output_shape(const Shape& input) const override;
  Tensor<Scalar> forward(const Tensor<Scalar>& input) override;
  Tensor<Scalar> backward(const Tensor<Scalar>& grad_output,
                          const BackwardOptions& options) override;
  void collect_parameters(const std::string& prefix,
                          std::vector<NamedParameter<Scalar>>& out) override;
  void init_parameters(std::mt19937_64& rng) override;

 private:
  std::size_t dim_, heads_;
  Linear<Scalar> query_, key_, value_, output_;
  Tensor<Scalar> q_, k_, v_;
  Tensor<Scalar> attention_;  // [N, heads, T, T] softmax weights
  Shape input_shape_;
  bool taped_ = false;
};

// Adds the fixed sinusoidal table PE[t, 2i] = sin(t / 10000^(2i/d)),
// PE[t, 2i+1] = cos(t / 10000^(2i/d)).
template <typename Scalar>
class PositionalEncoding final : public Layer<Scalar> {
 public:
  explicit PositionalEncoding(std::size_t dim);

  LayerKind kind() const override { return LayerKind::kPositionalEncoding; }
  std::unique_ptr<Layer<Scalar>> clone() const override;
  Shape output_shape(const Shape& input) const override;
  Tensor<Scalar> forward(const Tensor<Scalar>& input) override;
  Tensor<Scalar> backward(const Tensor<Scalar>& grad_output,
                          const BackwardOptions& options) override;

 private:
  std::size_t dim_;
  bool taped_ = false;
};

template <typename Scalar>
class Relu final : public Layer<Scalar> {
 public:
  LayerKind kind() const override { return LayerKind::kRelu; }
  std::unique_ptr<Layer<Scalar>> clone() const override;
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor<Scalar> forward(const Tensor<Scalar>& input) override;
  Tensor<Scalar> backward(const Tensor<Scalar>& grad_output,
                          const BackwardOptions& options) override;

 private:
  Tensor<Scalar> input_;
  bool taped_ = false;
};

// Exact GELU: x * Phi(x).
template <typename Scalar>
class Gelu final : public Layer<Scalar> {
 public:
  LayerKind kind() const override { return LayerKind::kGelu; }
  std::unique_ptr<Layer<Scalar>> clone() const override;
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor<Scalar> forward(const Tensor<Scalar>& input) override;
  Tensor<Scalar> backward(const Tensor<Scalar>& grad_output,
                          const BackwardOptions& options) override;

 private:
  Tensor<Scalar> input_;
  bool taped_ = false;
};

// Softmax over the last axis.
template <typename Scalar>
class Softmax final : public Layer<Scalar> {
 public:
  LayerKind kind() const override { return LayerKind::kSoftmax; }
  std::unique_ptr<Layer<Scalar>> clone() const override;
  Shape output_shape(const Shape& input) const override;
  Tensor<Scalar> forward(const Tensor<Scalar>& input) override;
  Tensor<Scalar> backward(const Tensor<Scalar>& grad_output,
                          const BackwardOptions& options) override;

 private:
  Tensor<Scalar> output_;
  bool taped_ = false;
};

// [N, d1, d2, ...] -> [N, d1*d2*...], row-major order preserved.
template <typename Scalar>
class Flatten final : public Layer<Scalar> {
 public:
  LayerKind kind() const override { return LayerKind::kFlatten; }
  std::unique_ptr<Layer<Scalar>> clone() const override;
  Shape output_shape(const Shape& input) const override;
  Tensor<Scalar> forward(const Tensor<Scalar>& input) override;
  Tensor<Scalar> backward(const Tensor<Scalar>& grad_output,
                          const BackwardOptions& options) override;

 private:
  Shape input_shape_;
  bool taped_ = false;
};

// Pre-layernorm block:
//   h = x + Attention(LN1(x));  y = h + W2 * GELU(W1 * LN2(h))
template <typename Scalar>
class TransformerBlock final : public Layer<Scalar> {
 public:
  TransformerBlock(std::size_t dim, std::size_t heads, std::size_t hidden);

  LayerKind kind() const override { return LayerKind::kTransformerBlock; }
  std::unique_ptr<Layer<Scalar>> clone() const override;
  Shape output_shape(const Shape& input) const override;
  Tensor<Scalar> forward(const Tensor<Scalar>& input) override;
  Tensor<Scalar> backward(const Tensor<Scalar>& grad_output,
                          const BackwardOptions& options) override;
  void collect_parameters(const std::string& prefix,
                          std::vector<NamedParameter<Scalar>>& out) override;
  void init_parameters(std::mt19937_64& rng) override;

 private:
  std::size_t dim_;
  LayerNorm<Scalar> norm1_, norm2_;
  MultiHeadAttention<Scalar> attention_;
  Linear<Scalar> expand_, contract_;
  Gelu<Scalar> activation_;
};

// Ordered container of layers. Shape errors raised inside a child are
// rethrown with the child's path ("encoder.3:conv1d").
template <typename Scalar>
class Sequential final : public Layer<Scalar> {
 public:
  explicit Sequential(std::string name = "");
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  Sequential& add(std::unique_ptr<Layer<Scalar>> layer);
  Sequential& add(const LayerSpec& spec) { return add(make_layer<Scalar>(spec)); }

  std::size_t size() const { return layers_.size(); }
  Layer<Scalar>& layer(std::size_t i) { return *layers_.at(i); }
  const Layer<Scalar>& layer(std::size_t i) const { return *layers_.at(i); }
  const std::string& name() const { return name_; }

  LayerKind kind() const override { return LayerKind::kSequential; }
  std::unique_ptr<Layer<Scalar>> clone() const override;
  Shape output_shape(const Shape& input) const override;
  Tensor<Scalar> forward(const Tensor<Scalar>& input) override;
  Tensor<Scalar> backward(const Tensor<Scalar>& grad_output,
                          const BackwardOptions& options) override;
  // Backward through layers [0, end) only; grad_output is dLoss/d(output of
  // layer end-1).
  Tensor<Scalar> backward_prefix(std::size_t end, const Tensor<Scalar>& grad_output,
                                 const BackwardOptions& options);
  void collect_parameters(const std::string& prefix,
                          std::vector<NamedParameter<Scalar>>& out) override;
  void init_parameters(std::mt19937_64& rng) override;

  // Records the output of layer `index` on forward and the gradient flowing
  // into it on backward.
  void set_capture(std::optional<std::size_t> index) { capture_ = index; }
  const Tensor<Scalar>& captured_activation() const { return captured_activation_; }
  const Tensor<Scalar>& captured_gradient() const { return captured_gradient_; }

 private:
  std::string path_of(std::size_t i) const;

  std::string name_;
  std::vector<std::unique_ptr<Layer<Scalar>>> layers_;
  std::optional<std::size_t> capture_;
  Tensor<Scalar> captured_activation_, captured_gradient_;
  bool taped_ = false;
};

}  // namespace shlb

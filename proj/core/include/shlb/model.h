#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "shlb/layers.h"
#include "shlb/tensor.h"

namespace shlb {

// Architecture of encoder f, projection head g and classifier h.
struct ModelSpec {
  std::size_t window_length = 50;
  std::size_t channels = 6;
  std::vector<std::size_t> conv_channels{16, 32, 64};
  std::size_t kernel_size = 3;
  // ReLU after every conv layer. Disabling it yields a ReLU-free classifier
  // path (used to check guided gradients against plain ones).
  bool conv_relu = true;
  std::size_t transformer_layers = 2;
  std::size_t attention_heads = 4;
  std::size_t ff_multiplier = 2;
  bool positional_encoding = true;
  std::size_t projection_hidden = 128;
  std::size_t projection_out = 64;
  std::size_t num_classes = 7;

  // Throws InvalidArgument.
  void validate() const;
  // Flattened encoder output size D = window_length * last conv channels.
  std::size_t representation_dim() const;

  bool operator==(const ModelSpec&) const = default;
};

enum class Head { kEncoder, kProjection, kClassifier };
enum class Component { kEncoder, kProjection, kClassifier };

template <typename Scalar>
class Model {
 public:
  Model(ModelSpec spec, std::uint64_t seed);

  const ModelSpec& spec() const { return spec_; }
  std::size_t representation_dim() const { return spec_.representation_dim(); }

  // batch: [N, T, S]. Returns [N, D], [N, D'] or [N, |Y|] softmax rows.
  Tensor<Scalar> forward(const Tensor<Scalar>& batch, Head head);

  // grad_output is dLoss/d(output of the last forward's head). Returns
  // dLoss/dInput; when input_grad is false and the encoder is frozen the pass
  // stops at the head and an empty tensor is returned.
  Tensor<Scalar> backward(const Tensor<Scalar>& grad_output, const BackwardOptions& options = {},
                          bool input_grad = true);
  // Like backward() but starts from the classifier's pre-softmax scores.
  // Requires the last forward to have used Head::kClassifier.
  Tensor<Scalar> backward_from_logits(const Tensor<Scalar>& grad_logits,
                                      const BackwardOptions& options = {});

  void zero_grad();
  void init_parameters(std::uint64_t seed);

  // Frozen encoder parameters are not trainable and never receive gradients.
  void set_encoder_frozen(bool frozen);
  bool encoder_frozen() const { return encoder_frozen_; }

  std::vector<NamedParameter<Scalar>> parameters();
  std::vector<NamedParameter<Scalar>> parameters(Component component);
  // Throws InvalidArgument for an unknown path.
  Parameter<Scalar>& parameter(const std::string& path);

  Sequential<Scalar>& encoder() { return encoder_; }
  Sequential<Scalar>& projection() { return projection_; }
  Sequential<Scalar>& classifier() { return classifier_; }

  // Encoder layer whose output is the Grad-CAM target (last conv's ReLU).
  std::size_t gradcam_layer() const {
    const std::size_t convs = spec_.conv_channels.size();
    return spec_.conv_relu ? 2 * convs - 1 : convs - 1;
  }

 private:
  ModelSpec spec_;
  Sequential<Scalar> encoder_{"encoder"};
  Sequential<Scalar> projection_{"projection"};
  Sequential<Scalar> classifier_{"classifier"};
  std::optional<Head> last_head_;
  bool encoder_frozen_ = false;
};

// Free-function spellings of the model operations.
template <typename Scalar>
Tensor<Scalar> forward(Model<Scalar>& model, const Tensor<Scalar>& batch, Head head) {
  return model.forward(batch, head);
}

// Input gradient of the class score (pre-softmax) for a single window
// [T, S] under the guided ReLU rule.
template <typename Scalar>
Tensor<Scalar> guided_backward(Model<Scalar>& model, std::size_t class_index,
                               const Tensor<Scalar>& window);

extern template class Model<float>;
extern template class Model<double>;

}  // namespace shlb

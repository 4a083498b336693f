#include "shlb/model.h"

#include <random>

#include "shlb/error.h"

namespace shlb {

void ModelSpec::validate() const {
  if (window_length == 0 || channels == 0) {
    throw InvalidArgument("model: window length and channel count must be positive");
  }
  if (conv_channels.empty()) throw InvalidArgument("model: at least one conv layer is required");
  for (std::size_t c : conv_channels) {
    if (c == 0) throw InvalidArgument("model: conv channel counts must be positive");
  }
  if (kernel_size < 1) throw InvalidArgument("model: conv kernel size must be >= 1");
  if (transformer_layers > 0) {
    if (attention_heads == 0 || conv_channels.back() % attention_heads != 0) {
      throw InvalidArgument("model: attention dim " + std::to_string(conv_channels.back()) +
                            " not divisible by " + std::to_string(attention_heads) + " heads");
    }
    if (ff_multiplier == 0) throw InvalidArgument("model: ff multiplier must be positive");
  }
  if (projection_hidden == 0 || projection_out == 0 || num_classes == 0) {
    throw InvalidArgument("model: head sizes must be positive");
  }
}

std::size_t ModelSpec::representation_dim() const {
  return window_length * conv_channels.back();
}

template <typename Scalar>
Model<Scalar>::Model(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  spec_.validate();
  std::size_t in = spec_.channels;
  for (std::size_t out : spec_.conv_channels) {
    encoder_.add(LayerSpec::conv1d(in, out, spec_.kernel_size));
    if (spec_.conv_relu) encoder_.add(LayerSpec::of(LayerKind::kRelu));
    in = out;
  }
  if (spec_.positional_encoding) encoder_.add(LayerSpec::positional_encoding(in));
  for (std::size_t i = 0; i < spec_.transformer_layers; ++i) {
    encoder_.add(LayerSpec::transformer_block(in, spec_.attention_heads, in * spec_.ff_multiplier));
  }
  encoder_.add(LayerSpec::of(LayerKind::kFlatten));

  const std::size_t d = spec_.representation_dim();
  projection_.add(LayerSpec::linear(d, spec_.projection_hidden));
  projection_.add(LayerSpec::of(LayerKind::kRelu));
  projection_.add(LayerSpec::linear(spec_.projection_hidden, spec_.projection_out));

  classifier_.add(LayerSpec::linear(d, spec_.num_classes));
  classifier_.add(LayerSpec::of(LayerKind::kSoftmax));

  init_parameters(seed);
}

template <typename Scalar>
void Model<Scalar>::init_parameters(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  encoder_.init_parameters(rng);
  projection_.init_parameters(rng);
  classifier_.init_parameters(rng);
}

template <typename Scalar>
Tensor<Scalar> Model<Scalar>::forward(const Tensor<Scalar>& batch, Head head) {
  if (batch.rank() != 3 || batch.dim(1) != spec_.window_length || batch.dim(2) != spec_.channels) {
    throw ShapeError("input", "expected [N, " + std::to_string(spec_.window_length) + ", " +
                                  std::to_string(spec_.channels) + "], got " +
                                  shape_string(batch.shape()));
  }
  Tensor<Scalar> features = encoder_.forward(batch);
  last_head_ = head;
  switch (head) {
    case Head::kEncoder: return features;
    case Head::kProjection: return projection_.forward(features);
    case Head::kClassifier: return classifier_.forward(features);
  }
  return features;
}

template <typename Scalar>
Tensor<Scalar> Model<Scalar>::backward(const Tensor<Scalar>& grad_output,
                                       const BackwardOptions& options, bool input_grad) {
  if (!last_head_) throw TapeError("model backward called without a preceding forward");
  Tensor<Scalar> g = grad_output;
  switch (*last_head_) {
    case Head::kEncoder: break;
    case Head::kProjection: g = projection_.backward(g, options); break;
    case Head::kClassifier: g = classifier_.backward(g, options); break;
  }
  if (!input_grad && encoder_frozen_) return {};
  return encoder_.backward(g, options);
}

template <typename Scalar>
Tensor<Scalar> Model<Scalar>::backward_from_logits(const Tensor<Scalar>& grad_logits,
                                                   const BackwardOptions& options) {
  if (last_head_ != Head::kClassifier) {
    throw TapeError("backward_from_logits requires a classifier forward pass");
  }
  Tensor<Scalar> g = classifier_.backward_prefix(classifier_.size() - 1, grad_logits, options);
  return encoder_.backward(g, options);
}

template <typename Scalar>
void Model<Scalar>::zero_grad() {
  for (auto& p : parameters()) p.param->value.zero_grad();
}

template <typename Scalar>
void Model<Scalar>::set_encoder_frozen(bool frozen) {
  encoder_frozen_ = frozen;
  for (auto& p : parameters(Component::kEncoder)) {
    p.param->trainable = !frozen;
    if (frozen) p.param->value.drop_grad();
  }
}

template <typename Scalar>
std::vector<NamedParameter<Scalar>> Model<Scalar>::parameters() {
  std::vector<NamedParameter<Scalar>> out;
  encoder_.collect_parameters("", out);
  projection_.collect_parameters("", out);
  classifier_.collect_parameters("", out);
  return out;
}

template <typename Scalar>
std::vector<NamedParameter<Scalar>> Model<Scalar>::parameters(Component component) {
  switch (component) {
    case Component::kEncoder: return encoder_.parameters();
    case Component::kProjection: return projection_.parameters();
    case Component::kClassifier: return classifier_.parameters();
  }
  return {};
}

template <typename Scalar>
Parameter<Scalar>& Model<Scalar>::parameter(const std::string& path) {
  for (auto& p : parameters()) {
    if (p.path == path) return *p.param;
  }
  throw InvalidArgument("unknown parameter '" + path + "'");
}

template <typename Scalar>
Tensor<Scalar> guided_backward(Model<Scalar>& model, std::size_t class_index,
                               const Tensor<Scalar>& window) {
  const ModelSpec& spec = model.spec();
  if (class_index >= spec.num_classes) {
    throw InvalidArgument("class index " + std::to_string(class_index) + " out of range for " +
                          std::to_string(spec.num_classes) + " classes");
  }
  if (window.rank() != 2) {
    throw ShapeError("input", "guided backward expects a single [T, S] window, got " +
                                  shape_string(window.shape()));
  }
  const Tensor<Scalar> batch = window.reshaped({1, window.dim(0), window.dim(1)});
  model.forward(batch, Head::kClassifier);
  Tensor<Scalar> seed({1, spec.num_classes});
  seed[class_index] = Scalar(1);
  BackwardOptions options;
  options.rule = GradientRule::kGuided;
  options.accumulate_parameter_grads = false;
  return model.backward_from_logits(seed, options).reshaped(window.shape());
}

template class Model<float>;
template class Model<double>;
template Tensor<float> guided_backward(Model<float>&, std::size_t, const Tensor<float>&);
template Tensor<double> guided_backward(Model<double>&, std::size_t, const Tensor<double>&);

}  // namespace shlb

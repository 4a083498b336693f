#include "shlb/layers.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "shlb/error.h"
#include "shlb/kernels.h"
#include "shlb/parallel.h"

namespace shlb {
namespace {

void require_tape(bool taped, LayerKind kind) {
  if (!taped) {
    throw TapeError("backward called on " + std::string(to_string(kind)) +
                    " without a preceding forward");
  }
}

void require_grad_shape(const Shape& expected, const Shape& got, LayerKind kind) {
  if (expected != got) {
    throw ShapeError("", std::string(to_string(kind)) + " backward expected gradient " +
                             shape_string(expected) + ", got " + shape_string(got));
  }
}

void require_rank3(const Shape& input, std::size_t channels, LayerKind kind) {
  if (input.size() != 3 || input[2] != channels) {
    throw ShapeError("", std::string(to_string(kind)) + " expects [N, T, " +
                             std::to_string(channels) + "], got " + shape_string(input));
  }
}

void require_last_dim(const Shape& input, std::size_t dim, LayerKind kind) {
  if (input.empty() || input.back() != dim) {
    throw ShapeError("", std::string(to_string(kind)) + " expects last dim " +
                             std::to_string(dim) + ", got " + shape_string(input));
  }
}

template <typename Scalar>
void fill_uniform(Tensor<Scalar>& t, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.values()) v = static_cast<Scalar>(dist(rng));
}

template <typename Scalar>
bool wants_grad(const Parameter<Scalar>& p, const BackwardOptions& options) {
  return p.trainable && options.accumulate_parameter_grads;
}

// Adds column sums of a [rows x cols] matrix into `out`.
template <typename Scalar>
void add_column_sums(std::span<const Scalar> m, std::size_t cols, std::span<Scalar> out) {
  const std::size_t rows = cols ? m.size() / cols : 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const Scalar* row = m.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) out[c] += row[c];
  }
}

template <typename Scalar>
void push_param(const std::string& prefix, Parameter<Scalar>& p,
                std::vector<NamedParameter<Scalar>>& out) {
  out.push_back({prefix.empty() ? p.name : prefix + "." + p.name, &p});
}

std::string join(const std::string& prefix, const std::string& name) {
  return prefix.empty() ? name : prefix + "." + name;
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv1d: return "conv1d";
    case LayerKind::kLinear: return "linear";
    case LayerKind::kLayerNorm: return "layernorm";
    case LayerKind::kMultiHeadAttention: return "multihead-attention";
    case LayerKind::kPositionalEncoding: return "positional-encoding";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kGelu: return "gelu";
    case LayerKind::kSoftmax: return "softmax";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kTransformerBlock: return "transformer-block";
    case LayerKind::kSequential: return "sequential";
  }
  return "unknown";
}

LayerSpec LayerSpec::conv1d(std::size_t in, std::size_t out, std::size_t kernel) {
  return {LayerKind::kConv1d, in, out, kernel, 0, 0};
}
LayerSpec LayerSpec::linear(std::size_t in, std::size_t out) {
  return {LayerKind::kLinear, in, out, 0, 0, 0};
}
LayerSpec LayerSpec::layer_norm(std::size_t dim) { return {LayerKind::kLayerNorm, dim, dim}; }
LayerSpec LayerSpec::attention(std::size_t dim, std::size_t heads) {
  return {LayerKind::kMultiHeadAttention, dim, dim, 0, heads, 0};
}
LayerSpec LayerSpec::positional_encoding(std::size_t dim) {
  return {LayerKind::kPositionalEncoding, dim, dim};
}
LayerSpec LayerSpec::transformer_block(std::size_t dim, std::size_t heads, std::size_t hidden) {
  return {LayerKind::kTransformerBlock, dim, dim, 0, heads, hidden};
}

void LayerSpec::validate() const {
  auto fail = [&](const std::string& why) {
    throw InvalidArgument(std::string(to_string(kind)) + ": " + why);
  };
  switch (kind) {
    case LayerKind::kConv1d:
      if (kernel < 1) fail("kernel size must be >= 1");
      if (in == 0 || out == 0) fail("channel counts must be positive");
      break;
    case LayerKind::kLinear:
      if (in == 0 || out == 0) fail("feature counts must be positive");
      break;
    case LayerKind::kLayerNorm:
    case LayerKind::kPositionalEncoding:
      if (in == 0) fail("dimension must be positive");
      break;
    case LayerKind::kMultiHeadAttention:
    case LayerKind::kTransformerBlock:
      if (in == 0 || heads == 0) fail("dimension and head count must be positive");
      if (in % heads != 0) fail("model dim " + std::to_string(in) +
                                " not divisible by " + std::to_string(heads) + " heads");
      if (kind == LayerKind::kTransformerBlock && hidden == 0) fail("hidden width must be positive");
      break;
    default:
      break;
  }
}

template <typename Scalar>
std::unique_ptr<Layer<Scalar>> make_layer(const LayerSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case LayerKind::kConv1d: return std::make_unique<Conv1d<Scalar>>(spec.in, spec.out, spec.kernel);
    case LayerKind::kLinear: return std::make_unique<Linear<Scalar>>(spec.in, spec.out);
    case LayerKind::kLayerNorm: return std::make_unique<LayerNorm<Scalar>>(spec.in);
    case LayerKind::kMultiHeadAttention:
      return std::make_unique<MultiHeadAttention<Scalar>>(spec.in, spec.heads);
    case LayerKind::kPositionalEncoding: return std::make_unique<PositionalEncoding<Scalar>>(spec.in);
    case LayerKind::kRelu: return std::make_unique<Relu<Scalar>>();
    case LayerKind::kGelu: return std::make_unique<Gelu<Scalar>>();
    case LayerKind::kSoftmax: return std::make_unique<Softmax<Scalar>>();
    case LayerKind::kFlatten: return std::make_unique<Flatten<Scalar>>();
    case LayerKind::kTransformerBlock:
      return std::make_unique<TransformerBlock<Scalar>>(spec.in, spec.heads, spec.hidden);
    case LayerKind::kSequential: return std::make_unique<Sequential<Scalar>>();
  }
  throw InvalidArgument("unknown layer kind");
}

// ---------------------------------------------------------------------------
// Layer

template <typename Scalar>
void Layer<Scalar>::collect_parameters(const std::string&, std::vector<NamedParameter<Scalar>>&) {}

template <typename Scalar>
void Layer<Scalar>::init_parameters(std::mt19937_64&) {}

template <typename Scalar>
std::vector<NamedParameter<Scalar>> Layer<Scalar>::parameters(const std::string& prefix) {
  std::vector<NamedParameter<Scalar>> out;
  collect_parameters(prefix, out);
  return out;
}

// ---------------------------------------------------------------------------
// Conv1d

template <typename Scalar>
Conv1d<Scalar>::Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel)
    : in_(in_channels),
      out_(out_channels),
      kernel_(kernel),
      weight_{"weight", Tensor<Scalar>({kernel, in_channels, out_channels})},
      bias_{"bias", Tensor<Scalar>({out_channels})} {
  LayerSpec::conv1d(in_channels, out_channels, kernel).validate();
}

template <typename Scalar>
std::unique_ptr<Layer<Scalar>> Conv1d<Scalar>::clone() const {
  return std::make_unique<Conv1d>(*this);
}

template <typename Scalar>
Shape Conv1d<Scalar>::output_shape(const Shape& input) const {
  require_rank3(input, in_, kind());
  return {input[0], input[1], out_};
}

template <typename Scalar>
Tensor<Scalar> Conv1d<Scalar>::forward(const Tensor<Scalar>& input) {
  const Shape out_shape = output_shape(input.shape());
  const std::size_t n = input.dim(0), t = input.dim(1);
  const std::size_t pad = (kernel_ - 1) / 2;
  const std::size_t width = kernel_ * in_;
  columns_ = Tensor<Scalar>({n * t, width});
  const Scalar* x = input.data();
  Scalar* cols = columns_.data();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t step = 0; step < t; ++step) {
      Scalar* row = cols + (b * t + step) * width;
      for (std::size_t k = 0; k < kernel_; ++k) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(step + k) -
                                   static_cast<std::ptrdiff_t>(pad);
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(t)) continue;
        std::copy_n(x + (b * t + static_cast<std::size_t>(src)) * in_, in_, row + k * in_);
      }
    }
  }
  Tensor<Scalar> out(out_shape);
  kernels::matmul(cols, weight_.value.data(), out.data(), n * t, width, out_);
  const Scalar* bias = bias_.value.data();
  for (std::size_t r = 0; r < n * t; ++r) {
    Scalar* row = out.data() + r * out_;
    for (std::size_t c = 0; c < out_; ++c) row[c] += bias[c];
  }
  input_shape_ = input.shape();
  taped_ = true;
  return out;
}

template <typename Scalar>
Tensor<Scalar> Conv1d<Scalar>::backward(const Tensor<Scalar>& grad_output,
                                        const BackwardOptions& options) {
  require_tape(taped_, kind());
  require_grad_shape(output_shape(input_shape_), grad_output.shape(), kind());
  const std::size_t n = input_shape_[0], t = input_shape_[1];
  const std::size_t rows = n * t, width = kernel_ * in_;
  const std::size_t pad = (kernel_ - 1) / 2;
  if (wants_grad(weight_, options)) {
    kernels::matmul_tn(columns_.data(), grad_output.data(), weight_.value.grad().data(), rows,
                       width, out_, true);
  }
  if (wants_grad(bias_, options)) {
    add_column_sums<Scalar>(grad_output.values(), out_, bias_.value.grad());
  }
  Tensor<Scalar> grad_columns({rows, width});
  kernels::matmul_nt(grad_output.data(), weight_.value.data(), grad_columns.data(), rows, out_,
                     width);
  Tensor<Scalar> grad_input(input_shape_);
  Scalar* gx = grad_input.data();
  const Scalar* gc = grad_columns.data();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t step = 0; step < t; ++step) {
      const Scalar* row = gc + (b * t + step) * width;
      for (std::size_t k = 0; k < kernel_; ++k) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(step + k) -
                                   static_cast<std::ptrdiff_t>(pad);
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(t)) continue;
        Scalar* dst = gx + (b * t + static_cast<std::size_t>(src)) * in_;
        for (std::size_t c = 0; c < in_; ++c) dst[c] += row[k * in_ + c];
      }
    }
  }
  return grad_input;
}

template <typename Scalar>
void Conv1d<Scalar>::collect_parameters(const std::string& prefix,
                                        std::vector<NamedParameter<Scalar>>& out) {
  push_param(prefix, weight_, out);
  push_param(prefix, bias_, out);
}

template <typename Scalar>
void Conv1d<Scalar>::init_parameters(std::mt19937_64& rng) {
  // He-uniform: convs feed ReLUs, so keep the second moment through conv+ReLU.
  fill_uniform(weight_.value, std::sqrt(6.0 / static_cast<double>(kernel_ * in_)), rng);
  bias_.value.fill(Scalar(0));
}

// ---------------------------------------------------------------------------
// Linear

template <typename Scalar>
Linear<Scalar>::Linear(std::size_t in_features, std::size_t out_features)
    : in_(in_features),
      out_(out_features),
      weight_{"weight", Tensor<Scalar>({in_features, out_features})},
      bias_{"bias", Tensor<Scalar>({out_features})} {
  LayerSpec::linear(in_features, out_features).validate();
}

template <typename Scalar>
std::unique_ptr<Layer<Scalar>> Linear<Scalar>::clone() const {
  return std::make_unique<Linear>(*this);
}

template <typename Scalar>
Shape Linear<Scalar>::output_shape(const Shape& input) const {
  require_last_dim(input, in_, kind());
  Shape out = input;
  out.back() = out_;
  return out;
}

template <typename Scalar>
Tensor<Scalar> Linear<Scalar>::forward(const Tensor<Scalar>& input) {
  Tensor<Scalar> out(output_shape(input.shape()));
  const std::size_t rows = input.size() / in_;
  kernels::matmul(input.data(), weight_.value.data(), out.data(), rows, in_, out_);
  const Scalar* bias = bias_.value.data();
  for (std::size_t r = 0; r < rows; ++r) {
    Scalar* row = out.data() + r * out_;
    for (std::size_t c = 0; c < out_; ++c) row[c] += bias[c];
  }
  input_ = input;
  taped_ = true;
  return out;
}

template <typename Scalar>
Tensor<Scalar> Linear<Scalar>::backward(const Tensor<Scalar>& grad_output,
                                        const BackwardOptions& options) {
  require_tape(taped_, kind());
  require_grad_shape(output_shape(input_.shape()), grad_output.shape(), kind());
  const std::size_t rows = input_.size() / in_;
  if (wants_grad(weight_, options)) {
    kernels::matmul_tn(input_.data(), grad_output.data(), weight_.value.grad().data(), rows, in_,
                       out_, true);
  }
  if (wants_grad(bias_, options)) {
    add_column_sums<Scalar>(grad_output.values(), out_, bias_.value.grad());
  }
  Tensor<Scalar> grad_input(input_.shape());
  kernels::matmul_nt(grad_output.data(), weight_.value.data(), grad_input.data(), rows, out_,
                     in_);
  return grad_input;
}

template <typename Scalar>
void Linear<Scalar>::collect_parameters(const std::string& prefix,
                                        std::vector<NamedParameter<Scalar>>& out) {
  push_param(prefix, weight_, out);
  push_param(prefix, bias_, out);
}

template <typename Scalar>
void Linear<Scalar>::init_parameters(std::mt19937_64& rng) {
  // variance 1/fan_in
  fill_uniform(weight_.value, std::sqrt(3.0 / static_cast<double>(in_)), rng);
  bias_.value.fill(Scalar(0));
}

// ---------------------------------------------------------------------------
// LayerNorm

template <typename Scalar>
LayerNorm<Scalar>::LayerNorm(std::size_t dim, double eps)
    : dim_(dim),
      eps_(eps),
      gain_{"gain", Tensor<Scalar>({dim}, Scalar(1))},
      bias_{"bias", Tensor<Scalar>({dim})} {
  LayerSpec::layer_norm(dim).validate();
}

template <typename Scalar>
std::unique_ptr<Layer<Scalar>> LayerNorm<Scalar>::clone() const {
  return std::make_unique<LayerNorm>(*this);
}

template <typename Scalar>
Shape LayerNorm<Scalar>::output_shape(const Shape& input) const {
  require_last_dim(input, dim_, kind());
  return input;
}

template <typename Scalar>
Tensor<Scalar> LayerNorm<Scalar>::forward(const Tensor<Scalar>& input) {
  Tensor<Scalar> out(output_shape(input.shape()));
  const std::size_t rows = input.size() / dim_;
  normalized_ = Tensor<Scalar>(input.shape());
  inv_std_.assign(rows, Scalar(0));
  const Scalar* gain = gain_.value.data();
  const Scalar* bias = bias_.value.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const Scalar* x = input.data() + r * dim_;
    double mean = 0.0;
    for (std::size_t c = 0; c < dim_; ++c) mean += x[c];
    mean /= static_cast<double>(dim_);
    double var = 0.0;
    for (std::size_t c = 0; c < dim_; ++c) var += (x[c] - mean) * (x[c] - mean);
    var /= static_cast<double>(dim_);
    const double inv = 1.0 / std::sqrt(var + eps_);
    inv_std_[r] = static_cast<Scalar>(inv);
    Scalar* xhat = normalized_.data() + r * dim_;
    Scalar* y = out.data() + r * dim_;
    for (std::size_t c = 0; c < dim_; ++c) {
      xhat[c] = static_cast<Scalar>((x[c] - mean) * inv);
      y[c] = gain[c] * xhat[c] + bias[c];
    }
  }
  taped_ = true;
  return out;
}

template <typename Scalar>
Tensor<Scalar> LayerNorm<Scalar>::backward(const Tensor<Scalar>& grad_output,
                                           const BackwardOptions& options) {
  require_tape(taped_, kind());
  require_grad_shape(normalized_.shape(), grad_output.shape(), kind());
  const std::size_t rows = inv_std_.size();
  const bool gain_grad = wants_grad(gain_, options);
  const bool bias_grad = wants_grad(bias_, options);
  std::span<Scalar> dgain = gain_grad ? gain_.value.grad() : std::span<Scalar>{};
  std::span<Scalar> dbias = bias_grad ? bias_.value.grad() : std::span<Scalar>{};
  const Scalar* gain = gain_.value.data();
  Tensor<Scalar> grad_input(normalized_.shape());
  std::vector<double> dxhat(dim_);
  for (std::size_t r = 0; r < rows; ++r) {
    const Scalar* g = grad_output.data() + r * dim_;
    const Scalar* xhat = normalized_.data() + r * dim_;
    double mean_d = 0.0, mean_dx = 0.0;
    for (std::size_t c = 0; c < dim_; ++c) {
      if (gain_grad) dgain[c] += g[c] * xhat[c];
      if (bias_grad) dbias[c] += g[c];
      dxhat[c] = static_cast<double>(g[c]) * gain[c];
      mean_d += dxhat[c];
      mean_dx += dxhat[c] * xhat[c];
    }
    mean_d /= static_cast<double>(dim_);
    mean_dx /= static_cast<double>(dim_);
    Scalar* dx = grad_input.data() + r * dim_;
    for (std::size_t c = 0; c < dim_; ++c) {
      dx[c] = static_cast<Scalar>(inv_std_[r] * (dxhat[c] - mean_d - xhat[c] * mean_dx));
    }
  }
  return grad_input;
}

template <typename Scalar>
void LayerNorm<Scalar>::collect_parameters(const std::string& prefix,
                                           std::vector<NamedParameter<Scalar>>& out) {
  push_param(prefix, gain_, out);
  push_param(prefix, bias_, out);
}

template <typename Scalar>
void LayerNorm<Scalar>::init_parameters(std::mt19937_64&) {
  gain_.value.fill(Scalar(1));
  bias_.value.fill(Scalar(0));
}

// ---------------------------------------------------------------------------
// MultiHeadAttention

template <typename Scalar>
MultiHeadAttention<Scalar>::MultiHeadAttention(std::size_t dim, std::size_t heads)
    : dim_(dim),
      heads_(heads),
      query_((LayerSpec::attention(dim, heads).validate(), dim), dim),
      key_(dim, dim),
      value_(dim, dim),
      output_(dim, dim) {}

template <typename Scalar>
std::unique_ptr<Layer<Scalar>> MultiHeadAttention<Scalar>::clone() const {
  return std::make_unique<MultiHeadAttention>(*this);
}

template <typename Scalar>
Shape MultiHeadAttention<Scalar>::output_shape(const Shape& input) const {
  require_rank3(input, dim_, kind());
  return input;
}

template <typename Scalar>
Tensor<Scalar> MultiHeadAttention<Scalar>::forward(const Tensor<Scalar>& input) {
  output_shape(input.shape());
  const std::size_t n = input.dim(0), t = input.dim(1);
  const std::size_t head_dim = dim_ / heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  q_ = query_.forward(input);
  k_ = key_.forward(input);
  v_ = value_.forward(input);
  attention_ = Tensor<Scalar>({n, heads_, t, t});
  Tensor<Scalar> mixed(input.shape());
  parallel_for(n * heads_, 1, [&](std::size_t begin, std::size_t end) {
    std::vector<double> scores(t);
    for (std::size_t job = begin; job < end; ++job) {
      const std::size_t b = job / heads_, h = job % heads_;
      const std::size_t off = h * head_dim;
      Scalar* att = attention_.data() + job * t * t;
      for (std::size_t i = 0; i < t; ++i) {
        const Scalar* qi = q_.data() + (b * t + i) * dim_ + off;
        double max_score = -INFINITY;
        for (std::size_t j = 0; j < t; ++j) {
          const Scalar* kj = k_.data() + (b * t + j) * dim_ + off;
          double s = 0.0;
          for (std::size_t d = 0; d < head_dim; ++d) s += static_cast<double>(qi[d]) * kj[d];
          scores[j] = s * scale;
          max_score = std::max(max_score, scores[j]);
        }
        double total = 0.0;
        for (std::size_t j = 0; j < t; ++j) {
          scores[j] = std::exp(scores[j] - max_score);
          total += scores[j];
        }
        Scalar* out = mixed.data() + (b * t + i) * dim_ + off;
        std::vector<double> acc(head_dim, 0.0);
        for (std::size_t j = 0; j < t; ++j) {
          const Scalar p = static_cast<Scalar>(scores[j] / total);
          att[i * t + j] = p;
          const Scalar* vj = v_.data() + (b * t + j) * dim_ + off;
          for (std::size_t d = 0; d < head_dim; ++d) acc[d] += static_cast<double>(p) * vj[d];
        }
        for (std::size_t d = 0; d < head_dim; ++d) out[d] = static_cast<Scalar>(acc[d]);
      }
    }
  });
  input_shape_ = input.shape();
  taped_ = true;
  return output_.forward(mixed);
}

template <typename Scalar>
Tensor<Scalar> MultiHeadAttention<Scalar>::backward(const Tensor<Scalar>& grad_output,
                                                    const BackwardOptions& options) {
  require_tape(taped_, kind());
  require_grad_shape(input_shape_, grad_output.shape(), kind());
  const std::size_t n = input_shape_[0], t = input_shape_[1];
  const std::size_t head_dim = dim_ / heads_;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  const Tensor<Scalar> grad_mixed = output_.backward(grad_output, options);
  Tensor<Scalar> grad_q(input_shape_), grad_k(input_shape_), grad_v(input_shape_);
  parallel_for(n * heads_, 1, [&](std::size_t begin, std::size_t end) {
    std::vector<double> grad_p(t), grad_s(t);
    for (std::size_t job = begin; job < end; ++job) {
      const std::size_t b = job / heads_, h = job % heads_;
      const std::size_t off = h * head_dim;
      const Scalar* att = attention_.data() + job * t * t;
      for (std::size_t i = 0; i < t; ++i) {
        const Scalar* go = grad_mixed.data() + (b * t + i) * dim_ + off;
        double dot = 0.0;
        for (std::size_t j = 0; j < t; ++j) {
          const Scalar* vj = v_.data() + (b * t + j) * dim_ + off;
          double s = 0.0;
          for (std::size_t d = 0; d < head_dim; ++d) s += static_cast<double>(go[d]) * vj[d];
          grad_p[j] = s;
          dot += s * att[i * t + j];
          Scalar* gv = grad_v.data() + (b * t + j) * dim_ + off;
          for (std::size_t d = 0; d < head_dim; ++d) gv[d] += att[i * t + j] * go[d];
        }
        for (std::size_t j = 0; j < t; ++j) {
          grad_s[j] = att[i * t + j] * (grad_p[j] - dot) * scale;
        }
        const Scalar* qi = q_.data() + (b * t + i) * dim_ + off;
        Scalar* gq = grad_q.data() + (b * t + i) * dim_ + off;
        for (std::size_t j = 0; j < t; ++j) {
          const Scalar* kj = k_.data() + (b * t + j) * dim_ + off;
          Scalar* gk = grad_k.data() + (b * t + j) * dim_ + off;
          const Scalar gs = static_cast<Scalar>(grad_s[j]);
          for (std::size_t d = 0; d < head_dim; ++d) {
            gq[d] += gs * kj[d];
            gk[d] += gs * qi[d];
          }
        }
      }
    }
  });
  Tensor<Scalar> grad_input = query_.backward(grad_q, options);
  const Tensor<Scalar> from_key = key_.backward(grad_k, options);
  const Tensor<Scalar> from_value = value_.backward(grad_v, options);
  for (std::size_t i = 0; i < grad_input.size(); ++i) {
    grad_input[i] += from_key[i] + from_value[i];
  }
  return grad_input;
}

template <typename Scalar>
void MultiHeadAttention<Scalar>::collect_parameters(const std::string& prefix,
                                                    std::vector<NamedParameter<Scalar>>& out) {
  query_.collect_parameters(join(prefix, "query"), out);
  key_.collect_parameters(join(prefix, "key"), out);
  value_.collect_parameters(join(prefix, "value"), out);
  output_.collect_parameters(join(prefix, "output"), out);
}

template <typename Scalar>
void MultiHeadAttention<Scalar>::init_parameters(std::mt19937_64& rng) {
  query_.init_parameters(rng);
  key_.init_parameters(rng);
  value_.init_parameters(rng);
  output_.init_parameters(rng);
}

// ---------------------------------------------------------------------------
// PositionalEncoding

template <typename Scalar>
PositionalEncoding<Scalar>::PositionalEncoding(std::size_t dim) : dim_(dim) {
  LayerSpec::positional_encoding(dim).validate();
}

template <typename Scalar>
std::unique_ptr<Layer<Scalar>> PositionalEncoding<Scalar>::clone() const {
  return std::make_unique<PositionalEncoding>(*this);
}

template <typename Scalar>
Shape PositionalEncoding<Scalar>::output_shape(const Shape& input) const {
  require_rank3(input, dim_, kind());
  return input;
}

template <typename Scalar>
Tensor<Scalar> PositionalEncoding<Scalar>::forward(const Tensor<Scalar>& input) {
  output_shape(input.shape());
  const std::size_t n = input.dim(0), t = input.dim(1);
  std::vector<Scalar> table(t * dim_);
  for (std::size_t pos = 0; pos < t; ++pos) {
    for (std::size_t c = 0; c < dim_; ++c) {
      const double rate =
          std::pow(10000.0, -static_cast<double>(c - c % 2) / static_cast<double>(dim_));
      const double angle = static_cast<double>(pos) * rate;
      table[pos * dim_ + c] = static_cast<Scalar>(c % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  Tensor<Scalar> out = input;
  for (std::size_t b = 0; b < n; ++b) {
    Scalar* x = out.data() + b * t * dim_;
    for (std::size_t i = 0; i < t * dim_; ++i) x[i] += table[i];
  }
  taped_ = true;
  return out;
}

template <typename Scalar>
Tensor<Scalar> PositionalEncoding<Scalar>::backward(const Tensor<Scalar>& grad_output,
                                                    const BackwardOptions&) {
  require_tape(taped_, kind());
  output_shape(grad_output.shape());
  return grad_output;
}

// ---------------------------------------------------------------------------
// Elementwise

template <typename Scalar>
std::unique_ptr<Layer<Scalar>> Relu<Scalar>::clone() const {
  return std::make_unique<Relu>(*this);
}

template <typename Scalar>
Tensor<Scalar> Relu<Scalar>::forward(const Tensor<Scalar>& input) {
  Tensor<Scalar> out = input;
  for (auto& v : out.values()) v = v > Scalar(0) ? v : Scalar(0);
  input_ = input;
  taped_ = true;
  return out;
}

template <typename Scalar>
Tensor<Scalar> Relu<Scalar>::backward(const Tensor<Scalar>& grad_output,
                                      const BackwardOptions& options) {
  require_tape(taped_, kind());
  require_grad_shape(input_.shape(), grad_output.shape(), kind());
  Tensor<Scalar> grad_input(input_.shape());
  const bool guided = options.rule == GradientRule::kGuided;
  for (std::size_t i = 0; i < grad_input.size(); ++i) {
    const bool open = input_[i] > Scalar(0) && (!guided || grad_output[i] > Scalar(0));
    grad_input[i] = open ? grad_output[i] : Scalar(0);
  }
  return grad_input;
}

template <typename Scalar>
std::unique_ptr<Layer<Scalar>> Gelu<Scalar>::clone() const {
  return std::make_unique<Gelu>(*this);
}

template <typename Scalar>
Tensor<Scalar> Gelu<Scalar>::forward(const Tensor<Scalar>& input) {
  Tensor<Scalar> out = input;
  for (auto& v : out.values()) {
    const double x = v;
    v = static_cast<Scalar>(0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)));
  }
  input_ = input;
  taped_ = true;
  return out;
}

template <typename Scalar>
Tensor<Scalar> Gelu<Scalar>::backward(const Tensor<Scalar>& grad_output, const BackwardOptions&) {
  require_tape(taped_, kind());
  require_grad_shape(input_.shape(), grad_output.shape(), kind());
  Tensor<Scalar> grad_input(input_.shape());
  const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;
  for (std::size_t i = 0; i < grad_input.size(); ++i) {
    const double x = input_[i];
    const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
    const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x * x);
    grad_input[i] = static_cast<Scalar>(grad_output[i] * (cdf + x * pdf));
  }
  return grad_input;
}

template <typename Scalar>
std::unique_ptr<Layer<Scalar>> Softmax<Scalar>::clone() const {
  return std::make_unique<Softmax>(*this);
}

template <typename Scalar>
Shape Softmax<Scalar>::output_shape(const Shape& input) const {
  if (input.empty() || input.back() == 0) {
    throw ShapeError("", "softmax needs a non-empty last axis, got " + shape_string(input));
  }
  return input;
}

template <typename Scalar>
Tensor<Scalar> Softmax<Scalar>::forward(const Tensor<Scalar>& input) {
  const std::size_t width = output_shape(input.shape()).back();
  Tensor<Scalar> out(input.shape());
  const std::size_t rows = input.size() / width;
  for (std::size_t r = 0; r < rows; ++r) {
    const Scalar* x = input.data() + r * width;
    Scalar* y = out.data() + r * width;
    const double max_x = *std::max_element(x, x + width);
    double total = 0.0;
    std::vector<double> e(width);
    for (std::size_t c = 0; c < width; ++c) {
      e[c] = std::exp(static_cast<double>(x[c]) - max_x);
      total += e[c];
    }
    for (std::size_t c = 0; c < width; ++c) y[c] = static_cast<Scalar>(e[c] / total);
  }
  output_ = out;
  taped_ = true;
  return out;
}

template <typename Scalar>
Tensor<Scalar> Softmax<Scalar>::backward(const Tensor<Scalar>& grad_output,
                                         const BackwardOptions&) {
  require_tape(taped_, kind());
  require_grad_shape(output_.shape(), grad_output.shape(), kind());
  const std::size_t width = output_.shape().back();
  const std::size_t rows = output_.size() / width;
  Tensor<Scalar> grad_input(output_.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const Scalar* p = output_.data() + r * width;
    const Scalar* g = grad_output.data() + r * width;
    double dot = 0.0;
    for (std::size_t c = 0; c < width; ++c) dot += static_cast<double>(g[c]) * p[c];
    Scalar* dx = grad_input.data() + r * width;
    for (std::size_t c = 0; c < width; ++c) dx[c] = static_cast<Scalar>(p[c] * (g[c] - dot));
  }
  return grad_input;
}

template <typename Scalar>
std::unique_ptr<Layer<Scalar>> Flatten<Scalar>::clone() const {
  return std::make_unique<Flatten>(*this);
}

template <typename Scalar>
Shape Flatten<Scalar>::output_shape(const Shape& input) const {
  if (input.size() < 2) {
    throw ShapeError("", "flatten expects rank >= 2, got " + shape_string(input));
  }
  return {input[0], shape_size(input) / std::max<std::size_t>(1, input[0])};
}

template <typename Scalar>
Tensor<Scalar> Flatten<Scalar>::forward(const Tensor<Scalar>& input) {
  input_shape_ = input.shape();
  taped_ = true;
  return input.reshaped(output_shape(input.shape()));
}

template <typename Scalar>
Tensor<Scalar> Flatten<Scalar>::backward(const Tensor<Scalar>& grad_output,
                                         const BackwardOptions&) {
  require_tape(taped_, kind());
  require_grad_shape(output_shape(input_shape_), grad_output.shape(), kind());
  return grad_output.reshaped(input_shape_);
}

// ---------------------------------------------------------------------------
// TransformerBlock

template <typename Scalar>
TransformerBlock<Scalar>::TransformerBlock(std::size_t dim, std::size_t heads,
                                           std::size_t hidden)
    : dim_((LayerSpec::transformer_block(dim, heads, hidden).validate(), dim)),
      norm1_(dim),
      norm2_(dim),
      attention_(dim, heads),
      expand_(dim, hidden),
      contract_(hidden, dim) {}

template <typename Scalar>
std::unique_ptr<Layer<Scalar>> TransformerBlock<Scalar>::clone() const {
  return std::make_unique<TransformerBlock>(*this);
}

template <typename Scalar>
Shape TransformerBlock<Scalar>::output_shape(const Shape& input) const {
  require_rank3(input, dim_, kind());
  return input;
}

template <typename Scalar>
Tensor<Scalar> TransformerBlock<Scalar>::forward(const Tensor<Scalar>& input) {
  output_shape(input.shape());
  Tensor<Scalar> hidden = attention_.forward(norm1_.forward(input));
  for (std::size_t i = 0; i < hidden.size(); ++i) hidden[i] += input[i];
  Tensor<Scalar> out =
      contract_.forward(activation_.forward(expand_.forward(norm2_.forward(hidden))));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += hidden[i];
  return out;
}

template <typename Scalar>
Tensor<Scalar> TransformerBlock<Scalar>::backward(const Tensor<Scalar>& grad_output,
                                                  const BackwardOptions& options) {
  Tensor<Scalar> grad_hidden = norm2_.backward(
      expand_.backward(activation_.backward(contract_.backward(grad_output, options), options),
                       options),
      options);
  for (std::size_t i = 0; i < grad_hidden.size(); ++i) grad_hidden[i] += grad_output[i];
  Tensor<Scalar> grad_input =
      norm1_.backward(attention_.backward(grad_hidden, options), options);
  for (std::size_t i = 0; i < grad_input.size(); ++i) grad_input[i] += grad_hidden[i];
  return grad_input;
}

template <typename Scalar>
void TransformerBlock<Scalar>::collect_parameters(const std::string& prefix,
                                                  std::vector<NamedParameter<Scalar>>& out) {
  norm1_.collect_parameters(join(prefix, "norm1"), out);
  attention_.collect_parameters(join(prefix, "attention"), out);
  norm2_.collect_parameters(join(prefix, "norm2"), out);
  expand_.collect_parameters(join(prefix, "ff1"), out);
  contract_.collect_parameters(join(prefix, "ff2"), out);
}

template <typename Scalar>
void TransformerBlock<Scalar>::init_parameters(std::mt19937_64& rng) {
  norm1_.init_parameters(rng);
  attention_.init_parameters(rng);
  norm2_.init_parameters(rng);
  expand_.init_parameters(rng);
  contract_.init_parameters(rng);
}

// ---------------------------------------------------------------------------
// Sequential

template <typename Scalar>
Sequential<Scalar>::Sequential(std::string name) : name_(std::move(name)) {}

template <typename Scalar>
Sequential<Scalar>::Sequential(const Sequential& other)
    : name_(other.name_),
      capture_(other.capture_),
      captured_activation_(other.captured_activation_),
      captured_gradient_(other.captured_gradient_),
      taped_(other.taped_) {
  layers_.reserve(other.layers_.size());
  for (const auto& layer : other.layers_) layers_.push_back(layer->clone());
}

template <typename Scalar>
Sequential<Scalar>& Sequential<Scalar>::operator=(const Sequential& other) {
  if (this != &other) *this = Sequential(other);
  return *this;
}

template <typename Scalar>
Sequential<Scalar>& Sequential<Scalar>::add(std::unique_ptr<Layer<Scalar>> layer) {
  layers_.push_back(std::move(layer));
  return *this;
}

template <typename Scalar>
std::unique_ptr<Layer<Scalar>> Sequential<Scalar>::clone() const {
  return std::make_unique<Sequential>(*this);
}

template <typename Scalar>
std::string Sequential<Scalar>::path_of(std::size_t i) const {
  return join(name_, std::to_string(i)) + ":" + std::string(to_string(layers_[i]->kind()));
}

template <typename Scalar>
Shape Sequential<Scalar>::output_shape(const Shape& input) const {
  Shape shape = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    try {
      shape = layers_[i]->output_shape(shape);
    } catch (const ShapeError& e) {
      if (!e.layer().empty()) throw;
      throw ShapeError(path_of(i), e.detail());
    }
  }
  return shape;
}

template <typename Scalar>
Tensor<Scalar> Sequential<Scalar>::forward(const Tensor<Scalar>& input) {
  output_shape(input.shape());
  Tensor<Scalar> x = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    try {
      x = layers_[i]->forward(x);
    } catch (const ShapeError& e) {
      if (!e.layer().empty()) throw;
      throw ShapeError(path_of(i), e.detail());
    }
    if (capture_ && *capture_ == i) captured_activation_ = x;
  }
  taped_ = true;
  return x;
}

template <typename Scalar>
Tensor<Scalar> Sequential<Scalar>::backward(const Tensor<Scalar>& grad_output,
                                            const BackwardOptions& options) {
  return backward_prefix(layers_.size(), grad_output, options);
}

template <typename Scalar>
Tensor<Scalar> Sequential<Scalar>::backward_prefix(std::size_t end,
                                                   const Tensor<Scalar>& grad_output,
                                                   const BackwardOptions& options) {
  if (!taped_) {
    throw TapeError("backward called on '" + name_ + "' without a preceding forward");
  }
  Tensor<Scalar> g = grad_output;
  for (std::size_t i = std::min(end, layers_.size()); i-- > 0;) {
    if (capture_ && *capture_ == i) captured_gradient_ = g;
    try {
      g = layers_[i]->backward(g, options);
    } catch (const ShapeError& e) {
      if (!e.layer().empty()) throw;
      throw ShapeError(path_of(i), e.detail());
    }
  }
  return g;
}

template <typename Scalar>
void Sequential<Scalar>::collect_parameters(const std::string& prefix,
                                            std::vector<NamedParameter<Scalar>>& out) {
  const std::string base = prefix.empty() ? name_ : prefix;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i]->collect_parameters(join(base, std::to_string(i)), out);
  }
}

template <typename Scalar>
void Sequential<Scalar>::init_parameters(std::mt19937_64& rng) {
  for (auto& layer : layers_) layer->init_parameters(rng);
}

#define SHLB_INSTANTIATE(T)                                                  \
  template class Layer<T>;                                                   \
  template class Conv1d<T>;                                                  \
  template class Linear<T>;                                                  \
  template class LayerNorm<T>;                                               \
  template class MultiHeadAttention<T>;                                      \
  template class PositionalEncoding<T>;                                      \
  template class Relu<T>;                                                    \
  template class Gelu<T>;                                                    \
  template class Softmax<T>;                                                 \
  template class Flatten<T>;                                                 \
  template class TransformerBlock<T>;                                        \
  template class Sequential<T>;                                              \
  template std::unique_ptr<Layer<T>> make_layer<T>(const LayerSpec&);

SHLB_INSTANTIATE(float)
SHLB_INSTANTIATE(double)
#undef SHLB_INSTANTIATE

}  // namespace shlb

#include "shlb/tensor.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "shlb/error.h"

namespace shlb {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

template <typename Scalar>
Tensor<Scalar>::Tensor(Shape shape, Scalar fill)
    : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

template <typename Scalar>
Tensor<Scalar>::Tensor(Shape shape, std::vector<Scalar> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != shape_size(shape_)) {
    throw ShapeError("", "tensor " + shape_string(shape_) + " given " +
                             std::to_string(values_.size()) + " values");
  }
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::reshaped(Shape shape) const {
  Tensor out = *this;
  out.reshape(std::move(shape));
  return out;
}

template <typename Scalar>
void Tensor<Scalar>::reshape(Shape shape) {
  if (shape_size(shape) != values_.size()) {
    throw ShapeError("", "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  shape_ = std::move(shape);
}

template <typename Scalar>
void Tensor<Scalar>::fill(Scalar value) {
  std::fill(values_.begin(), values_.end(), value);
}

template <typename Scalar>
std::span<Scalar> Tensor<Scalar>::grad() {
  if (!grad_) grad_.emplace(values_.size(), Scalar(0));
  return *grad_;
}

template <typename Scalar>
std::span<const Scalar> Tensor<Scalar>::grad() const {
  if (!grad_) return {};
  return *grad_;
}

template <typename Scalar>
void Tensor<Scalar>::zero_grad() {
  if (grad_) std::fill(grad_->begin(), grad_->end(), Scalar(0));
}

template <typename Scalar>
Tensor<Scalar> slice_rows(const Tensor<Scalar>& t, std::size_t begin, std::size_t end) {
  if (t.rank() == 0 || begin > end || end > t.dim(0)) {
    throw ShapeError("", "row slice [" + std::to_string(begin) + "," + std::to_string(end) +
                             ") out of range for " + shape_string(t.shape()));
  }
  Shape shape = t.shape();
  const std::size_t row = t.dim(0) ? t.size() / t.dim(0) : 0;
  shape[0] = end - begin;
  std::vector<Scalar> values(t.values().begin() + begin * row, t.values().begin() + end * row);
  return Tensor<Scalar>(std::move(shape), std::move(values));
}

template <typename Scalar>
Tensor<Scalar> concat_rows(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.rank() != b.rank() || a.rank() == 0 ||
      !std::equal(a.shape().begin() + 1, a.shape().end(), b.shape().begin() + 1)) {
    throw ShapeError("", "cannot concatenate " + shape_string(a.shape()) + " and " +
                             shape_string(b.shape()));
  }
  Shape shape = a.shape();
  shape[0] += b.dim(0);
  std::vector<Scalar> values;
  values.reserve(a.size() + b.size());
  values.insert(values.end(), a.values().begin(), a.values().end());
  values.insert(values.end(), b.values().begin(), b.values().end());
  return Tensor<Scalar>(std::move(shape), std::move(values));
}

template <typename Scalar>
bool all_finite(std::span<const Scalar> values) {
  return std::all_of(values.begin(), values.end(), [](Scalar v) { return std::isfinite(v); });
}

template class Tensor<float>;
template class Tensor<double>;
template Tensor<float> slice_rows(const Tensor<float>&, std::size_t, std::size_t);
template Tensor<double> slice_rows(const Tensor<double>&, std::size_t, std::size_t);
template Tensor<float> concat_rows(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> concat_rows(const Tensor<double>&, const Tensor<double>&);
template bool all_finite(std::span<const float>);
template bool all_finite(std::span<const double>);

}  // namespace shlb

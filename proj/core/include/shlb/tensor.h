#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace shlb {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major tensor with an optional gradient slot of identical shape.
template <typename Scalar>
class Tensor {
 public:
  using value_type = Scalar;

  Tensor() = default;
  explicit Tensor(Shape shape, Scalar fill = Scalar(0));
  Tensor(Shape shape, std::vector<Scalar> values);

  static Tensor from(std::initializer_list<std::size_t> shape,
                     std::initializer_list<Scalar> values) {
    return Tensor(Shape(shape), std::vector<Scalar>(values));
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::span<Scalar> values() { return values_; }
  std::span<const Scalar> values() const { return values_; }
  Scalar* data() { return values_.data(); }
  const Scalar* data() const { return values_.data(); }

  Scalar& operator[](std::size_t i) { return values_[i]; }
  const Scalar& operator[](std::size_t i) const { return values_[i]; }

  Scalar& at(std::size_t i, std::size_t j) { return values_[i * shape_[1] + j]; }
  const Scalar& at(std::size_t i, std::size_t j) const { return values_[i * shape_[1] + j]; }
  Scalar& at(std::size_t i, std::size_t j, std::size_t k) {
    return values_[(i * shape_[1] + j) * shape_[2] + k];
  }
  const Scalar& at(std::size_t i, std::size_t j, std::size_t k) const {
    return values_[(i * shape_[1] + j) * shape_[2] + k];
  }

  // Same values, new shape. Throws ShapeError when the element counts differ.
  Tensor reshaped(Shape shape) const;
  void reshape(Shape shape);

  void fill(Scalar value);

  bool has_grad() const { return grad_.has_value(); }
  // Allocates a zeroed gradient on first use.
  std::span<Scalar> grad();
  std::span<const Scalar> grad() const;
  void zero_grad();
  void drop_grad() { grad_.reset(); }

  template <typename Other>
  Tensor<Other> cast() const {
    std::vector<Other> out(values_.begin(), values_.end());
    return Tensor<Other>(shape_, std::move(out));
  }

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && values_ == other.values_;
  }

 private:
  Shape shape_;
  std::vector<Scalar> values_;
  std::optional<std::vector<Scalar>> grad_;
};

// Rows [begin, end) along axis 0.
template <typename Scalar>
Tensor<Scalar> slice_rows(const Tensor<Scalar>& t, std::size_t begin, std::size_t end);

// Concatenation along axis 0; trailing dims must agree.
template <typename Scalar>
Tensor<Scalar> concat_rows(const Tensor<Scalar>& a, const Tensor<Scalar>& b);

template <typename Scalar>
bool all_finite(std::span<const Scalar> values);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace shlb

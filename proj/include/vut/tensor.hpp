#pragma once

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vut/errors.hpp"

namespace vut {

enum class DType : uint8_t { F32 = 0, F64 = 1 };

inline const char* dtype_name(DType dt) {
  return dt == DType::F32 ? "real32" : "real64";
}

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major tensor. Storage is shared between copies and copied on
// mutation, so passing tensors by value is cheap and snapshots stay immutable.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, DType dt = DType::F32);
  static Tensor full(Shape shape, double value, DType dt = DType::F32);
  static Tensor ones(Shape shape, DType dt = DType::F32) {
    return full(std::move(shape), 1.0, dt);
  }
  static Tensor from_values(Shape shape, const std::vector<double>& values,
                            DType dt = DType::F32);
  static Tensor scalar(double value, DType dt = DType::F32) {
    return full({1}, value, dt);
  }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t numel() const { return numel_; }
  DType dtype() const { return dtype_; }
  bool defined() const { return numel_ > 0 || !shape_.empty(); }

  template <class T>
  std::span<const T> data() const;

  // Grants write access; detaches from sharers first.
  template <class T>
  std::span<T> mutable_data();

  // Element access through double regardless of dtype (convenience; not for
  // hot loops).
  double at(int64_t i) const;
  double at(int64_t i, int64_t j) const;
  void set(int64_t i, double v);
  void set(int64_t i, int64_t j, double v);

  Tensor astype(DType dt) const;
  // Same storage, new shape; element count must match.
  Tensor reshaped(Shape shape) const;
  Tensor clone() const;

  bool all_finite() const;
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  // Bitwise equality of dtype, shape and payload.
  bool bit_equal(const Tensor& other) const;

  double max_abs_diff(const Tensor& other) const;

 private:
  void allocate();
  void ensure_unique();

  Shape shape_;
  int64_t numel_ = 0;
  DType dtype_ = DType::F32;
  std::shared_ptr<std::vector<float>> f32_;
  std::shared_ptr<std::vector<double>> f64_;
};

template <>
inline std::span<const float> Tensor::data<float>() const {
  return {f32_->data(), static_cast<size_t>(numel_)};
}

template <>
inline std::span<const double> Tensor::data<double>() const {
  return {f64_->data(), static_cast<size_t>(numel_)};
}

template <>
inline std::span<float> Tensor::mutable_data<float>() {
  ensure_unique();
  return {f32_->data(), static_cast<size_t>(numel_)};
}

template <>
inline std::span<double> Tensor::mutable_data<double>() {
  ensure_unique();
  return {f64_->data(), static_cast<size_t>(numel_)};
}

// Invokes f with a value of the tensor scalar type (float or double).
template <class F>
decltype(auto) dispatch_dtype(DType dt, F&& f) {
  if (dt == DType::F32) return f(float{});
  return f(double{});
}

}  // namespace vut

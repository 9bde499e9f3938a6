#include "vut/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace vut {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

void Tensor::allocate() {
  for (int64_t d : shape_) {
    if (d <= 0) throw DataError("tensor dims must be positive, got " + shape_str(shape_));
  }
  numel_ = shape_numel(shape_);
  if (dtype_ == DType::F32) {
    f32_ = std::make_shared<std::vector<float>>(static_cast<size_t>(numel_), 0.0f);
    f64_.reset();
  } else {
    f64_ = std::make_shared<std::vector<double>>(static_cast<size_t>(numel_), 0.0);
    f32_.reset();
  }
}

void Tensor::ensure_unique() {
  if (dtype_ == DType::F32) {
    if (f32_.use_count() > 1) f32_ = std::make_shared<std::vector<float>>(*f32_);
  } else {
    if (f64_.use_count() > 1) f64_ = std::make_shared<std::vector<double>>(*f64_);
  }
}

Tensor Tensor::zeros(Shape shape, DType dt) {
  Tensor t;
  t.shape_ = std::move(shape);
  t.dtype_ = dt;
  t.allocate();
  return t;
}

Tensor Tensor::full(Shape shape, double value, DType dt) {
  Tensor t = zeros(std::move(shape), dt);
  dispatch_dtype(dt, [&](auto tag) {
    using T = decltype(tag);
    auto d = t.mutable_data<T>();
    for (auto& x : d) x = static_cast<T>(value);
  });
  return t;
}

Tensor Tensor::from_values(Shape shape, const std::vector<double>& values, DType dt) {
  Tensor t = zeros(std::move(shape), dt);
  if (static_cast<int64_t>(values.size()) != t.numel())
    throw DataError("from_values: " + std::to_string(values.size()) +
                    " values for shape " + shape_str(t.shape()));
  dispatch_dtype(dt, [&](auto tag) {
    using T = decltype(tag);
    auto d = t.mutable_data<T>();
    for (size_t i = 0; i < values.size(); ++i) d[i] = static_cast<T>(values[i]);
  });
  return t;
}

double Tensor::at(int64_t i) const {
  return dtype_ == DType::F32 ? static_cast<double>((*f32_)[static_cast<size_t>(i)])
                              : (*f64_)[static_cast<size_t>(i)];
}

double Tensor::at(int64_t i, int64_t j) const { return at(i * shape_.back() + j); }

void Tensor::set(int64_t i, double v) {
  if (dtype_ == DType::F32) {
    ensure_unique();
    (*f32_)[static_cast<size_t>(i)] = static_cast<float>(v);
  } else {
    ensure_unique();
    (*f64_)[static_cast<size_t>(i)] = v;
  }
}

void Tensor::set(int64_t i, int64_t j, double v) { set(i * shape_.back() + j, v); }

Tensor Tensor::astype(DType dt) const {
  if (dt == dtype_) return *this;
  Tensor out = zeros(shape_, dt);
  if (dt == DType::F64) {
    auto src = data<float>();
    auto dst = out.mutable_data<double>();
    for (size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<double>(src[i]);
  } else {
    auto src = data<double>();
    auto dst = out.mutable_data<float>();
    for (size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>(src[i]);
  }
  return out;
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != numel_)
    throw DataError("reshape " + shape_str(shape_) + " -> " + shape_str(shape) +
                    " changes element count");
  Tensor t = *this;
  t.shape_ = std::move(shape);
  return t;
}

Tensor Tensor::clone() const {
  Tensor t = *this;
  t.ensure_unique();
  return t;
}

bool Tensor::all_finite() const {
  return dispatch_dtype(dtype_, [&](auto tag) {
    using T = decltype(tag);
    for (T v : data<T>())
      if (!std::isfinite(v)) return false;
    return true;
  });
}

bool Tensor::bit_equal(const Tensor& other) const {
  if (dtype_ != other.dtype_ || shape_ != other.shape_) return false;
  return dispatch_dtype(dtype_, [&](auto tag) {
    using T = decltype(tag);
    auto a = data<T>();
    auto b = other.data<T>();
    return std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
  });
}

double Tensor::max_abs_diff(const Tensor& other) const {
  if (shape_ != other.shape_) throw DataError("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (int64_t i = 0; i < numel_; ++i) m = std::max(m, std::abs(at(i) - other.at(i)));
  return m;
}

}  // namespace vut

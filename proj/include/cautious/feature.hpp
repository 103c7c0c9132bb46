#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"

namespace cautious {

using ClassLabel = std::string;

/// A point in R^d. Construction rejects NaN/Inf so every downstream
/// computation can assume finite coordinates.
class FeatureVector {
 public:
  FeatureVector() = default;

  explicit FeatureVector(std::vector<double> values) : values_(std::move(values)) { validate(); }

  FeatureVector(std::initializer_list<double> values) : values_(values) { validate(); }

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

 private:
  void validate() const {
    if (values_.empty()) fail(ErrorCode::InvalidFeature, "feature vector must have dim >= 1");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) {
        fail(ErrorCode::InvalidFeature, "non-finite coordinate at index " + std::to_string(i));
      }
    }
  }

  std::vector<double> values_;
};

/// Row-major n x d block of points, the in-memory form every estimator keeps.
class PointMatrix {
 public:
  PointMatrix() = default;

  PointMatrix(std::size_t dim, std::vector<double> data) : dim_(dim), data_(std::move(data)) {
    if (dim_ == 0 || data_.size() % dim_ != 0) {
      fail(ErrorCode::DimensionMismatch, "point buffer is not a multiple of dim");
    }
    for (double v : data_) {
      if (!std::isfinite(v)) fail(ErrorCode::InvalidFeature, "non-finite coordinate in point set");
    }
  }

  static PointMatrix from_points(std::span<const FeatureVector> points) {
    if (points.empty()) return {};
    const std::size_t d = points.front().dim();
    std::vector<double> data;
    data.reserve(points.size() * d);
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (points[i].dim() != d) {
        fail(ErrorCode::DimensionMismatch, "point " + std::to_string(i) + " has dim " +
                                               std::to_string(points[i].dim()) + ", expected " +
                                               std::to_string(d));
      }
      data.insert(data.end(), points[i].values().begin(), points[i].values().end());
    }
    return PointMatrix(d, std::move(data));
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
  std::span<const double> data() const noexcept { return data_; }

  FeatureVector point(std::size_t i) const {
    auto r = row(i);
    return FeatureVector(std::vector<double>(r.begin(), r.end()));
  }

  friend bool operator==(const PointMatrix&, const PointMatrix&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double diff = a[j] - b[j];
    acc += diff * diff;
  }
  return acc;
}

inline void require_dim(std::size_t expected, std::size_t actual) {
  if (expected != actual) {
    fail(ErrorCode::DimensionMismatch,
         "expected dim " + std::to_string(expected) + ", got " + std::to_string(actual));
  }
}

}  // namespace cautious

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "error.hpp"
#include "feature.hpp"

namespace cautious {

enum class EstimatorKind { Kde, Knn };

inline std::string to_string(EstimatorKind kind) { return kind == EstimatorKind::Kde ? "kde" : "knn"; }

struct BandwidthRule {
  enum class Kind { Scott, Silverman, Fixed };

  Kind kind = Kind::Scott;
  double value = 0.0;  // only meaningful for Fixed

  static BandwidthRule scott() { return {Kind::Scott, 0.0}; }
  static BandwidthRule silverman() { return {Kind::Silverman, 0.0}; }
  static BandwidthRule fixed(double h) { return {Kind::Fixed, h}; }

  friend bool operator==(const BandwidthRule&, const BandwidthRule&) = default;
};

/// Mean over coordinates of the per-coordinate sample standard deviation
/// (n - 1 denominator; 0 for a single point).
inline double mean_coordinate_stddev(const PointMatrix& points) {
  const std::size_t n = points.size();
  const std::size_t d = points.dim();
  if (n < 2) return 0.0;
  double total = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += points.row(i)[j];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double diff = points.row(i)[j] - mean;
      ss += diff * diff;
    }
    total += std::sqrt(ss / static_cast<double>(n - 1));
  }
  return total / static_cast<double>(d);
}

/// Bandwidth selected by a rule for the given fitting points.
/// Scott: sigma * n^(-1/(d+4)); Silverman: (4/(d+2))^(1/(d+4)) * sigma * n^(-1/(d+4)).
/// A zero spread (all points identical) falls back to n^(-1/(d+4)).
inline double select_bandwidth(const PointMatrix& points, const BandwidthRule& rule) {
  if (rule.kind == BandwidthRule::Kind::Fixed) {
    if (!(rule.value > 0.0) || !std::isfinite(rule.value)) {
      fail(ErrorCode::InvalidBandwidth, "fixed bandwidth must be a finite positive number");
    }
    return rule.value;
  }
  const double n = static_cast<double>(points.size());
  const double d = static_cast<double>(points.dim());
  const double rate = std::pow(n, -1.0 / (d + 4.0));
  double sigma = mean_coordinate_stddev(points);
  if (!(sigma > 0.0)) sigma = 1.0;
  double factor = 1.0;
  if (rule.kind == BandwidthRule::Kind::Silverman) factor = std::pow(4.0 / (d + 2.0), 1.0 / (d + 4.0));
  return factor * sigma * rate;
}

/// Isotropic Gaussian kernel density estimate, scored in the log domain.
class KdeModel {
 public:
  KdeModel(PointMatrix points, double bandwidth) : points_(std::move(points)), bandwidth_(bandwidth) {
    if (points_.empty()) fail(ErrorCode::InsufficientData, "KDE needs at least one point");
    if (!(bandwidth_ > 0.0) || !std::isfinite(bandwidth_)) {
      fail(ErrorCode::InvalidBandwidth, "bandwidth must be a finite positive number");
    }
    const double d = static_cast<double>(points_.dim());
    log_norm_const_ = -0.5 * d * std::log(2.0 * std::numbers::pi) - d * std::log(bandwidth_) -
                      std::log(static_cast<double>(points_.size()));
    inv_two_h2_ = 1.0 / (2.0 * bandwidth_ * bandwidth_);
  }

  std::size_t dim() const noexcept { return points_.dim(); }
  std::size_t size() const noexcept { return points_.size(); }
  double bandwidth() const noexcept { return bandwidth_; }
  // -(d/2) log(2 pi) - d log h - log n
  double log_norm_const() const noexcept { return log_norm_const_; }
  const PointMatrix& points() const noexcept { return points_; }

  // log[(1/n) sum_i K_h(x - X_i)] via a running max-shifted sum of
  // exponentials, so no term over- or underflows regardless of d.
  double log_score(std::span<const double> x) const {
    require_dim(dim(), x.size());
    double max_exponent = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const double e = -squared_distance(x, points_.row(i)) * inv_two_h2_;
      if (e <= max_exponent) {
        sum += std::exp(e - max_exponent);
      } else {
        sum = sum * std::exp(max_exponent - e) + 1.0;
        max_exponent = e;
      }
    }
    return max_exponent + std::log(sum) + log_norm_const_;
  }

  double log_score(const FeatureVector& x) const { return log_score(x.values()); }

  friend bool operator==(const KdeModel& a, const KdeModel& b) {
    return a.bandwidth_ == b.bandwidth_ && a.points_ == b.points_;
  }

 private:
  PointMatrix points_;
  double bandwidth_;
  double log_norm_const_ = 0.0;
  double inv_two_h2_ = 0.0;
};

inline KdeModel fit_kde(const PointMatrix& points, const BandwidthRule& rule) {
  if (points.empty()) fail(ErrorCode::InsufficientData, "cannot fit KDE on zero points");
  return KdeModel(points, select_bandwidth(points, rule));
}

inline KdeModel fit_kde(std::span<const FeatureVector> points, const BandwidthRule& rule) {
  return fit_kde(PointMatrix::from_points(points), rule);
}

inline double kde_log_score(const KdeModel& model, const FeatureVector& x) { return model.log_score(x); }

/// k-nearest-neighbour density surrogate: score = -(distance to the k-th
/// nearest fitting point). Exact search; higher means denser.
class KnnModel {
 public:
  KnnModel(PointMatrix points, std::size_t k) : points_(std::move(points)), k_(k) {
    if (points_.empty()) fail(ErrorCode::InsufficientData, "k-NN needs at least one point");
    if (k_ < 1 || k_ > points_.size()) {
      fail(ErrorCode::InvalidK, "k=" + std::to_string(k_) + " outside [1, " +
                                    std::to_string(points_.size()) + "]");
    }
  }

  std::size_t dim() const noexcept { return points_.dim(); }
  std::size_t size() const noexcept { return points_.size(); }
  std::size_t k() const noexcept { return k_; }
  const PointMatrix& points() const noexcept { return points_; }

  double score(std::span<const double> x) const {
    require_dim(dim(), x.size());
    std::vector<double> d2(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) d2[i] = squared_distance(x, points_.row(i));
    auto kth = d2.begin() + static_cast<std::ptrdiff_t>(k_ - 1);
    std::nth_element(d2.begin(), kth, d2.end());
    return -std::sqrt(*kth);
  }

  double score(const FeatureVector& x) const { return score(x.values()); }

  friend bool operator==(const KnnModel&, const KnnModel&) = default;

 private:
  PointMatrix points_;
  std::size_t k_;
};

inline KnnModel fit_knn(const PointMatrix& points, std::size_t k) {
  if (points.empty()) fail(ErrorCode::InsufficientData, "cannot fit k-NN on zero points");
  return KnnModel(points, k);
}

inline KnnModel fit_knn(std::span<const FeatureVector> points, std::size_t k) {
  return fit_knn(PointMatrix::from_points(points), k);
}

inline double knn_score(const KnnModel& model, const FeatureVector& x) { return model.score(x); }

/// Default neighbour count for a class with n fitting points: min(10, n - 1), at least 1.
inline std::size_t default_knn_k(std::size_t n_fit) {
  return std::max<std::size_t>(1, std::min<std::size_t>(10, n_fit > 0 ? n_fit - 1 : 0));
}

/// A fitted per-class score function. Either estimator is scored through
/// score(), which returns a log-density (KDE) or a density surrogate (k-NN).
class DensityModel {
 public:
  DensityModel(KdeModel m) : payload_(std::move(m)) {}  // NOLINT(google-explicit-constructor)
  DensityModel(KnnModel m) : payload_(std::move(m)) {}  // NOLINT(google-explicit-constructor)

  EstimatorKind kind() const noexcept {
    return std::holds_alternative<KdeModel>(payload_) ? EstimatorKind::Kde : EstimatorKind::Knn;
  }

  const KdeModel* kde() const noexcept { return std::get_if<KdeModel>(&payload_); }
  const KnnModel* knn() const noexcept { return std::get_if<KnnModel>(&payload_); }

  std::size_t dim() const {
    return std::visit([](const auto& m) { return m.dim(); }, payload_);
  }
  std::size_t size() const {
    return std::visit([](const auto& m) { return m.size(); }, payload_);
  }
  const PointMatrix& points() const {
    return std::visit([](const auto& m) -> const PointMatrix& { return m.points(); }, payload_);
  }

  double score(std::span<const double> x) const {
    if (const auto* m = kde()) return m->log_score(x);
    return std::get<KnnModel>(payload_).score(x);
  }
  double score(const FeatureVector& x) const { return score(x.values()); }

  friend bool operator==(const DensityModel&, const DensityModel&) = default;

 private:
  std::variant<KdeModel, KnnModel> payload_;
};

/// Class-interaction adjusted score in the linear domain:
///   exp(s_target - shift) - lambda * sum_{y != target} exp(s_y - shift).
/// `shift` must be the same constant for every query (fixed at calibration)
/// so the adjustment preserves ordering across queries. Terms that underflow
/// after shifting count as exactly 0; the result may be negative.
inline double interaction_adjust(const std::map<ClassLabel, double>& log_scores, const ClassLabel& target,
                                 double lambda, double shift = 0.0) {
  auto it = log_scores.find(target);
  if (it == log_scores.end()) fail(ErrorCode::UnknownClass, "class '" + target + "' has no score");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail(ErrorCode::InvalidConfig, "lambda must be >= 0");
  const double own = std::exp(it->second - shift);
  if (lambda == 0.0) return own;
  double penalty = 0.0;
  for (const auto& [label, s] : log_scores) {
    if (label != target) penalty += std::exp(s - shift);
  }
  return own - lambda * penalty;
}

}  // namespace cautious

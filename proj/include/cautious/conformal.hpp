#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dataset.hpp"
#include "density.hpp"
#include "error.hpp"
#include "feature.hpp"
#include "parallel.hpp"

namespace cautious {

enum class QuantileMode { Empirical, FiniteSample };

inline std::string to_string(QuantileMode mode) {
  return mode == QuantileMode::Empirical ? "empirical" : "finite-sample";
}

inline void require_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::InvalidAlpha, "alpha must be in (0,1)");
}

// ---------------------------------------------------------------------------
// Thresholds and p-values
// ---------------------------------------------------------------------------

/// Number of calibration scores that must lie at or above the threshold in
/// empirical mode: the smallest m with m / n >= 1 - alpha.
inline std::size_t empirical_cover_count(std::size_t n, double alpha) {
  const double target = 1.0 - alpha;
  const double nd = static_cast<double>(n);
  auto m = static_cast<std::size_t>(std::ceil(target * nd));
  m = std::min(m, n);
  while (m > 0 && static_cast<double>(m - 1) / nd >= target) --m;
  while (m < n && static_cast<double>(m) / nd < target) ++m;
  return m;
}

/// Rank (1-based, ascending) of the finite-sample threshold: floor(alpha (n+1)),
/// i.e. the least c with (1 + c) / (n + 1) > alpha. 0 means "accept everything".
inline std::size_t finite_sample_rank(std::size_t n, double alpha) {
  const double denom = static_cast<double>(n) + 1.0;
  auto r = static_cast<std::size_t>(std::floor(alpha * denom));
  r = std::min(r, n);
  while (r > 0 && (1.0 + static_cast<double>(r - 1)) / denom > alpha) --r;
  while (r < n && (1.0 + static_cast<double>(r)) / denom <= alpha) ++r;
  return r;
}

/// Per-class threshold from calibration scores (higher score = more typical).
///
/// Empirical: sup{t : (1/n) #{s_i >= t} >= 1 - alpha}, the m-th largest score.
/// FiniteSample: the floor(alpha (n+1))-th smallest score, or -inf when that
/// rank is 0; this is the split-conformal choice with a distribution-free
/// coverage guarantee of at least 1 - alpha.
inline double calibrate_threshold(std::span<const double> scores, double alpha, QuantileMode mode) {
  if (scores.empty()) fail(ErrorCode::InsufficientData, "calibration needs at least one score");
  require_alpha(alpha);
  for (double s : scores) {
    if (std::isnan(s)) fail(ErrorCode::InvalidFeature, "NaN calibration score");
  }
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  if (mode == QuantileMode::Empirical) {
    const std::size_t m = empirical_cover_count(n, alpha);
    return sorted[n - m];
  }
  const std::size_t r = finite_sample_rank(n, alpha);
  if (r == 0) return -std::numeric_limits<double>::infinity();
  return sorted[r - 1];
}

/// Split-conformal p-value of a new conformity score against calibration
/// scores: (1 + #{s_i <= new}) / (n + 1).
inline double conformal_pvalue(std::span<const double> cal_scores, double new_score) {
  if (cal_scores.empty()) fail(ErrorCode::InsufficientData, "p-value needs calibration scores");
  const auto count = std::count_if(cal_scores.begin(), cal_scores.end(),
                                   [new_score](double s) { return s <= new_score; });
  return (1.0 + static_cast<double>(count)) / (static_cast<double>(cal_scores.size()) + 1.0);
}

// ---------------------------------------------------------------------------
// Configuration and models
// ---------------------------------------------------------------------------

struct InteractionConfig {
  std::optional<double> lambda;  // unset: 1 / (K - 1)

  friend bool operator==(const InteractionConfig&, const InteractionConfig&) = default;
};

struct TrainConfig {
  EstimatorKind estimator = EstimatorKind::Kde;
  BandwidthRule bandwidth = BandwidthRule::scott();
  std::optional<std::size_t> knn_k;  // unset: min(10, n_fit - 1)
  double split_ratio = 0.5;          // fraction of each class used for fitting
  QuantileMode quantile = QuantileMode::FiniteSample;
  double alpha = 0.1;
  std::map<ClassLabel, double> class_alpha;  // per-class overrides
  std::optional<InteractionConfig> interaction;
  std::size_t min_cal_size = 20;
  std::uint64_t seed = 0;

  double alpha_for(const ClassLabel& label) const {
    auto it = class_alpha.find(label);
    return it == class_alpha.end() ? alpha : it->second;
  }

  void validate() const {
    require_alpha(alpha);
    for (const auto& [label, a] : class_alpha) {
      if (!(a > 0.0 && a < 1.0)) fail(ErrorCode::InvalidAlpha, "alpha for class '" + label + "' must be in (0,1)");
    }
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) fail(ErrorCode::InvalidConfig, "split ratio must be in (0,1)");
    if (estimator == EstimatorKind::Kde && bandwidth.kind == BandwidthRule::Kind::Fixed &&
        !(bandwidth.value > 0.0 && std::isfinite(bandwidth.value))) {
      fail(ErrorCode::InvalidBandwidth, "fixed bandwidth must be a finite positive number");
    }
    if (knn_k && *knn_k == 0) fail(ErrorCode::InvalidK, "k must be >= 1");
    if (interaction && interaction->lambda && !(*interaction->lambda >= 0.0 && std::isfinite(*interaction->lambda))) {
      fail(ErrorCode::InvalidConfig, "lambda must be a finite number >= 0");
    }
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// One class's fitted density plus its calibration state.
struct ClassModel {
  ClassLabel label;
  std::shared_ptr<const DensityModel> density;
  PointMatrix calibration_points;
  std::vector<double> calibration_scores;  // conformity scores, in calibration-point order
  double threshold = std::numeric_limits<double>::infinity();
  double alpha = 0.1;
  std::size_t n_fit = 0;
  std::size_t n_cal = 0;
  bool omitted = false;

  bool includes(double conformity) const { return !omitted && conformity >= threshold; }

  friend bool operator==(const ClassModel& a, const ClassModel& b) {
    return a.label == b.label && *a.density == *b.density && a.calibration_points == b.calibration_points &&
           a.calibration_scores == b.calibration_scores && a.threshold == b.threshold && a.alpha == b.alpha &&
           a.n_fit == b.n_fit && a.n_cal == b.n_cal && a.omitted == b.omitted;
  }
};

struct PredictionSet {
  std::vector<ClassLabel> labels;        // ascending
  std::map<ClassLabel, double> scores;   // raw per-class scores
  bool is_null = true;

  bool contains(const ClassLabel& label) const {
    return std::binary_search(labels.begin(), labels.end(), label);
  }

  friend bool operator==(const PredictionSet&, const PredictionSet&) = default;
};

namespace detail {

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Unbiased draw in [0, bound) from a 64-bit engine.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t reject_below = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = rng();
    if (r >= reject_below) return r % bound;
  }
}

// Permutation of [0, n) that depends only on (seed, label).
inline std::vector<std::size_t> class_permutation(std::size_t n, std::uint64_t seed, const ClassLabel& label) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(splitmix64(seed ^ fnv1a(label)));
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(bounded(rng, i));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

inline std::size_t fit_count(std::size_t n, double split_ratio) {
  auto n_fit = static_cast<std::size_t>(std::ceil(split_ratio * static_cast<double>(n)));
  return std::clamp<std::size_t>(n_fit, 1, n);
}

inline DensityModel fit_density(const PointMatrix& points, const TrainConfig& config) {
  if (config.estimator == EstimatorKind::Kde) return fit_kde(points, config.bandwidth);
  const std::size_t k = config.knn_k ? std::min(*config.knn_k, points.size()) : default_knn_k(points.size());
  return fit_knn(points, k);
}

inline std::vector<double> score_rows(const DensityModel& density, const PointMatrix& points) {
  std::vector<double> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) out[i] = density.score(points.row(i));
  return out;
}

inline double threshold_for(std::span<const double> cal_scores, double alpha, QuantileMode mode) {
  if (cal_scores.empty()) return std::numeric_limits<double>::infinity();
  return calibrate_threshold(cal_scores, alpha, mode);
}

}  // namespace detail

/// Splits one class's points (seeded), fits the density on the fitting part
/// and calibrates on the rest using the raw density score.
inline ClassModel fit_class(const ClassLabel& label, std::span<const FeatureVector> points, double alpha,
                            const TrainConfig& config) {
  if (points.empty()) fail(ErrorCode::InsufficientData, "class '" + label + "' has no points");
  require_alpha(alpha);
  const PointMatrix all = PointMatrix::from_points(points);
  const std::size_t n = all.size();
  const std::size_t d = all.dim();
  const auto order = detail::class_permutation(n, config.seed, label);
  const std::size_t n_fit = detail::fit_count(n, config.split_ratio);

  std::vector<double> fit_buf;
  std::vector<double> cal_buf;
  fit_buf.reserve(n_fit * d);
  cal_buf.reserve((n - n_fit) * d);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = all.row(order[i]);
    auto& dst = i < n_fit ? fit_buf : cal_buf;
    dst.insert(dst.end(), row.begin(), row.end());
  }

  ClassModel model;
  model.label = label;
  model.density = std::make_shared<const DensityModel>(detail::fit_density(PointMatrix(d, std::move(fit_buf)), config));
  if (!cal_buf.empty()) model.calibration_points = PointMatrix(d, std::move(cal_buf));
  model.calibration_scores = detail::score_rows(*model.density, model.calibration_points);
  model.alpha = alpha;
  model.n_fit = n_fit;
  model.n_cal = n - n_fit;
  model.omitted = model.n_cal < config.min_cal_size;
  model.threshold = detail::threshold_for(model.calibration_scores, alpha, config.quantile);
  return model;
}

/// Trained set-valued classifier: per-class densities and thresholds.
/// Immutable; modifications return new classifiers sharing untouched models.
class ConformalClassifier {
 public:
  using ClassMap = std::map<ClassLabel, std::shared_ptr<const ClassModel>>;

  ConformalClassifier(std::size_t dim, TrainConfig config, ClassMap classes, double lambda = 0.0,
                      double shift = 0.0)
      : dim_(dim), config_(std::move(config)), classes_(std::move(classes)), lambda_(lambda), shift_(shift) {
    if (classes_.empty()) fail(ErrorCode::EmptyClassifier, "classifier needs at least one class");
    for (const auto& [label, model] : classes_) {
      if (model->density->dim() != dim_) fail(ErrorCode::DimensionMismatch, "class '" + label + "' has wrong dim");
    }
  }

  std::size_t dim() const noexcept { return dim_; }
  const TrainConfig& config() const noexcept { return config_; }
  const ClassMap& classes() const noexcept { return classes_; }
  std::size_t num_classes() const noexcept { return classes_.size(); }
  bool interaction() const noexcept { return config_.interaction.has_value(); }
  double lambda() const noexcept { return lambda_; }
  double shift() const noexcept { return shift_; }

  const ClassModel& at(const ClassLabel& label) const {
    auto it = classes_.find(label);
    if (it == classes_.end()) fail(ErrorCode::UnknownClass, "unknown class '" + label + "'");
    return *it->second;
  }
  bool has(const ClassLabel& label) const { return classes_.count(label) != 0; }

  std::vector<ClassLabel> labels() const {
    std::vector<ClassLabel> out;
    for (const auto& entry : classes_) out.push_back(entry.first);
    return out;
  }

  std::size_t active_classes() const {
    return static_cast<std::size_t>(
        std::count_if(classes_.begin(), classes_.end(), [](const auto& e) { return !e.second->omitted; }));
  }

  /// Raw scores of every class at x, in label order.
  std::vector<double> raw_scores(std::span<const double> x) const {
    require_dim(dim_, x.size());
    std::vector<double> out;
    out.reserve(classes_.size());
    for (const auto& entry : classes_) out.push_back(entry.second->density->score(x));
    return out;
  }

  /// Scores compared against thresholds, in label order: the raw scores, or
  /// interaction-adjusted linear scores when interaction mode is on.
  std::vector<double> conformity_from_raw(const std::vector<double>& raw) const {
    if (!interaction()) return raw;
    std::vector<double> linear(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) linear[i] = std::exp(raw[i] - shift_);
    std::vector<double> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      out[i] = lambda_ == 0.0 ? linear[i] : linear[i] - lambda_ * penalty_excluding(linear, i);
    }
    return out;
  }

  std::vector<double> conformity_scores(std::span<const double> x) const { return conformity_from_raw(raw_scores(x)); }

 private:
  static double penalty_excluding(const std::vector<double>& linear, std::size_t skip) {
    double p = 0.0;
    for (std::size_t j = 0; j < linear.size(); ++j) {
      if (j != skip) p += linear[j];
    }
    return p;
  }

  std::size_t dim_;
  TrainConfig config_;
  ClassMap classes_;
  double lambda_;
  double shift_;
};

namespace detail {

inline double auto_lambda(std::size_t num_classes) {
  return num_classes > 1 ? 1.0 / static_cast<double>(num_classes - 1) : 0.0;
}

// Recomputes the interaction shift, lambda and every class's adjusted
// calibration scores and threshold. Densities and splits are reused.
inline ConformalClassifier calibrate_interaction(std::size_t dim, const TrainConfig& config,
                                                 ConformalClassifier::ClassMap classes) {
  const double lambda = config.interaction->lambda ? *config.interaction->lambda : auto_lambda(classes.size());
  std::vector<const ClassModel*> models;
  for (const auto& entry : classes) models.push_back(entry.second.get());

  // raw[c][i][j]: class j's raw score at calibration point i of class c
  std::vector<std::vector<std::vector<double>>> raw(models.size());
  parallel_for(models.size(), [&](std::size_t c) {
    const auto& pts = models[c]->calibration_points;
    raw[c].resize(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      raw[c][i].resize(models.size());
      for (std::size_t j = 0; j < models.size(); ++j) raw[c][i][j] = models[j]->density->score(pts.row(i));
    }
  });
  double shift = -std::numeric_limits<double>::infinity();
  for (const auto& per_class : raw) {
    for (const auto& row : per_class) {
      for (double s : row) shift = std::max(shift, s);
    }
  }
  if (!std::isfinite(shift)) shift = 0.0;

  // Adjusted scores go through the same path as queries.
  ConformalClassifier probe(dim, config, classes, lambda, shift);
  ConformalClassifier::ClassMap out;
  for (std::size_t c = 0; c < models.size(); ++c) {
    auto updated = std::make_shared<ClassModel>(*models[c]);
    updated->calibration_scores.resize(raw[c].size());
    for (std::size_t i = 0; i < raw[c].size(); ++i) {
      updated->calibration_scores[i] = probe.conformity_from_raw(raw[c][i])[c];
    }
    updated->threshold = threshold_for(updated->calibration_scores, updated->alpha, config.quantile);
    out.emplace(updated->label, std::move(updated));
  }
  return ConformalClassifier(dim, config, std::move(out), lambda, shift);
}

inline ConformalClassifier assemble(std::size_t dim, const TrainConfig& config, ConformalClassifier::ClassMap classes) {
  if (classes.empty()) fail(ErrorCode::EmptyClassifier, "classifier needs at least one class");
  if (config.interaction) return calibrate_interaction(dim, config, std::move(classes));
  return ConformalClassifier(dim, config, std::move(classes));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Training and prediction
// ---------------------------------------------------------------------------

/// Fits and calibrates every labeled class independently. Unlabeled records
/// are ignored. Classes are processed in parallel with results identical to
/// a sequential run.
inline ConformalClassifier train(const LabeledDataset& data, const TrainConfig& config) {
  config.validate();
  auto groups = data.points_by_class();
  if (groups.empty()) fail(ErrorCode::InsufficientData, "training data has no labeled records");
  std::vector<std::pair<ClassLabel, std::vector<FeatureVector>>> items(groups.begin(), groups.end());
  std::vector<std::shared_ptr<const ClassModel>> fitted(items.size());
  parallel_for(items.size(), [&](std::size_t i) {
    const auto& [label, points] = items[i];
    fitted[i] = std::make_shared<const ClassModel>(fit_class(label, points, config.alpha_for(label), config));
  });
  ConformalClassifier::ClassMap classes;
  for (auto& model : fitted) classes.emplace(model->label, std::move(model));
  return detail::assemble(data.dim(), config, std::move(classes));
}

/// {y : score_y(x) >= t_y, y not omitted}; `scores` holds every class's raw score.
inline PredictionSet predict_set(const ConformalClassifier& classifier, std::span<const double> x) {
  const auto raw = classifier.raw_scores(x);
  const auto conformity = classifier.conformity_from_raw(raw);
  PredictionSet out;
  std::size_t i = 0;
  for (const auto& [label, model] : classifier.classes()) {
    out.scores.emplace(label, raw[i]);
    if (model->includes(conformity[i])) out.labels.push_back(label);
    ++i;
  }
  out.is_null = out.labels.empty();
  return out;
}

inline PredictionSet predict_set(const ConformalClassifier& classifier, const FeatureVector& x) {
  return predict_set(classifier, x.values());
}

namespace detail {
inline std::vector<ClassLabel> rank_top(const ConformalClassifier& classifier, const std::vector<double>& raw,
                                        std::size_t k) {
  std::vector<std::pair<double, const ClassLabel*>> ranked;
  std::size_t i = 0;
  for (const auto& [label, model] : classifier.classes()) {
    if (!model->omitted) ranked.emplace_back(raw[i], &label);
    ++i;
  }
  if (k < 1 || k > ranked.size()) {
    fail(ErrorCode::InvalidK, "k=" + std::to_string(k) + " outside [1, " + std::to_string(ranked.size()) + "]");
  }
  // Stable sort keeps ascending label order among equal scores.
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<ClassLabel> out;
  for (std::size_t j = 0; j < k; ++j) out.push_back(*ranked[j].second);
  return out;
}
}  // namespace detail

/// Non-omitted classes ranked by raw score, descending; ties by ascending label.
inline std::vector<ClassLabel> predict_topk(const ConformalClassifier& classifier, const FeatureVector& x,
                                            std::size_t k) {
  return detail::rank_top(classifier, classifier.raw_scores(x.values()), k);
}

/// Returns a classifier whose thresholds are recalibrated at a single alpha
/// for every class, from the stored calibration scores.
inline ConformalClassifier with_alpha(const ConformalClassifier& classifier, double alpha) {
  require_alpha(alpha);
  ConformalClassifier::ClassMap classes;
  for (const auto& [label, model] : classifier.classes()) {
    auto updated = std::make_shared<ClassModel>(*model);
    updated->alpha = alpha;
    updated->threshold = detail::threshold_for(updated->calibration_scores, alpha, classifier.config().quantile);
    classes.emplace(label, std::move(updated));
  }
  TrainConfig config = classifier.config();
  config.alpha = alpha;
  config.class_alpha.clear();
  return ConformalClassifier(classifier.dim(), std::move(config), std::move(classes), classifier.lambda(),
                             classifier.shift());
}

/// Adds a class fitted and calibrated exactly as train() would. Other
/// ClassModels are shared unchanged, except in interaction mode where every
/// threshold is recalibrated because scores are coupled across classes.
inline ConformalClassifier add_class(const ConformalClassifier& classifier, const ClassLabel& label,
                                     std::span<const FeatureVector> points, std::optional<double> alpha = std::nullopt) {
  if (classifier.has(label)) fail(ErrorCode::DuplicateClass, "class '" + label + "' already present");
  for (const auto& p : points) require_dim(classifier.dim(), p.dim());
  TrainConfig config = classifier.config();
  const double a = alpha ? *alpha : config.alpha;
  if (alpha) config.class_alpha[label] = *alpha;
  auto classes = classifier.classes();
  classes.emplace(label, std::make_shared<const ClassModel>(fit_class(label, points, a, config)));
  return detail::assemble(classifier.dim(), config, std::move(classes));
}

inline ConformalClassifier remove_class(const ConformalClassifier& classifier, const ClassLabel& label) {
  if (!classifier.has(label)) fail(ErrorCode::UnknownClass, "unknown class '" + label + "'");
  if (classifier.num_classes() == 1) fail(ErrorCode::EmptyClassifier, "cannot remove the only class");
  TrainConfig config = classifier.config();
  config.class_alpha.erase(label);
  auto classes = classifier.classes();
  classes.erase(label);
  return detail::assemble(classifier.dim(), config, std::move(classes));
}

}  // namespace cautious

#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "conformal.hpp"
#include "dataset.hpp"
#include "error.hpp"
#include "parallel.hpp"

namespace cautious {

struct EvalReport {
  double alpha = 0.0;
  double coverage = 0.0;
  std::map<ClassLabel, double> per_class_coverage;
  double ambiguity = 0.0;  // mean |C(x)|
  double null_rate = 0.0;
  std::size_t n_eval = 0;
  std::size_t out_of_inventory = 0;  // true label unknown to the classifier; never covered

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Per-point scores of every class for the labeled records of a dataset.
/// Computed once and reused across thresholds (alpha sweeps, top-k).
struct ScoreTable {
  std::vector<ClassLabel> classes;     // classifier label order
  std::vector<long> truth;             // index into classes, -1 when out of inventory
  std::vector<std::vector<double>> raw;
  std::vector<std::vector<double>> conformity;

  std::size_t size() const noexcept { return truth.size(); }
};

inline ScoreTable score_table(const ConformalClassifier& classifier, const LabeledDataset& data) {
  require_dim(classifier.dim(), data.dim());
  ScoreTable table;
  table.classes = classifier.labels();
  std::map<ClassLabel, long> index;
  for (std::size_t c = 0; c < table.classes.size(); ++c) index.emplace(table.classes[c], static_cast<long>(c));

  std::vector<const Record*> labeled;
  for (const auto& r : data.records()) {
    if (r.label) labeled.push_back(&r);
  }
  if (labeled.empty()) fail(ErrorCode::EmptyEvalSet, "no labeled records to evaluate");

  table.truth.resize(labeled.size());
  table.raw.resize(labeled.size());
  table.conformity.resize(labeled.size());
  parallel_for(labeled.size(), [&](std::size_t i) {
    auto it = index.find(*labeled[i]->label);
    table.truth[i] = it == index.end() ? -1 : it->second;
    table.raw[i] = classifier.raw_scores(labeled[i]->features.values());
    table.conformity[i] = classifier.conformity_from_raw(table.raw[i]);
  });
  return table;
}

/// Aggregates coverage metrics for fixed per-class thresholds (label order).
/// All sums are integer counts, so results do not depend on evaluation order.
inline EvalReport evaluate_table(const ScoreTable& table, const std::vector<double>& thresholds,
                                 const std::vector<bool>& omitted, double alpha) {
  const std::size_t k = table.classes.size();
  std::vector<std::size_t> class_total(k, 0);
  std::vector<std::size_t> class_covered(k, 0);
  std::size_t covered = 0;
  std::size_t set_sizes = 0;
  std::size_t nulls = 0;
  std::size_t outside = 0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    std::size_t size = 0;
    bool hit = false;
    for (std::size_t c = 0; c < k; ++c) {
      if (!omitted[c] && table.conformity[i][c] >= thresholds[c]) {
        ++size;
        if (static_cast<long>(c) == table.truth[i]) hit = true;
      }
    }
    set_sizes += size;
    if (size == 0) ++nulls;
    if (table.truth[i] < 0) {
      ++outside;
    } else {
      ++class_total[static_cast<std::size_t>(table.truth[i])];
      if (hit) ++class_covered[static_cast<std::size_t>(table.truth[i])];
    }
    if (hit) ++covered;
  }
  const double n = static_cast<double>(table.size());
  EvalReport report;
  report.alpha = alpha;
  report.n_eval = table.size();
  report.out_of_inventory = outside;
  report.coverage = static_cast<double>(covered) / n;
  report.ambiguity = static_cast<double>(set_sizes) / n;
  report.null_rate = static_cast<double>(nulls) / n;
  for (std::size_t c = 0; c < k; ++c) {
    if (class_total[c] > 0) {
      report.per_class_coverage[table.classes[c]] =
          static_cast<double>(class_covered[c]) / static_cast<double>(class_total[c]);
    }
  }
  return report;
}

namespace detail {
inline std::vector<bool> omitted_flags(const ConformalClassifier& classifier) {
  std::vector<bool> out;
  for (const auto& entry : classifier.classes()) out.push_back(entry.second->omitted);
  return out;
}
}  // namespace detail

/// Coverage, per-class coverage, ambiguity and null rate of the classifier
/// on labeled data. Points with labels unknown to the classifier are counted
/// as not covered.
inline EvalReport evaluate(const ConformalClassifier& classifier, const LabeledDataset& data) {
  const auto table = score_table(classifier, data);
  std::vector<double> thresholds;
  for (const auto& entry : classifier.classes()) thresholds.push_back(entry.second->threshold);
  return evaluate_table(table, thresholds, detail::omitted_flags(classifier), classifier.config().alpha);
}

/// One report per alpha (ascending, each in (0,1)). Densities and scores are
/// computed once; only thresholds are recalibrated from stored calibration
/// scores, so the resulting sets are nested across alphas.
inline std::vector<EvalReport> alpha_sweep(const ConformalClassifier& classifier, const LabeledDataset& data,
                                           const std::vector<double>& alphas) {
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    require_alpha(alphas[i]);
    if (i > 0 && !(alphas[i] > alphas[i - 1])) fail(ErrorCode::InvalidAlpha, "alphas must be strictly ascending");
  }
  const auto table = score_table(classifier, data);
  const auto omitted = detail::omitted_flags(classifier);
  std::vector<EvalReport> reports;
  reports.reserve(alphas.size());
  for (double alpha : alphas) {
    std::vector<double> thresholds;
    for (const auto& entry : classifier.classes()) {
      thresholds.push_back(
          detail::threshold_for(entry.second->calibration_scores, alpha, classifier.config().quantile));
    }
    reports.push_back(evaluate_table(table, thresholds, omitted, alpha));
  }
  return reports;
}

/// Trains once on `train_data` and sweeps alpha on `eval_data`.
inline std::vector<EvalReport> alpha_sweep(const LabeledDataset& train_data, const TrainConfig& config,
                                           const LabeledDataset& eval_data, const std::vector<double>& alphas) {
  return alpha_sweep(train(train_data, config), eval_data, alphas);
}

/// Fraction of labeled points whose true label is among the k highest raw scores.
inline double topk_accuracy(const ConformalClassifier& classifier, const LabeledDataset& data, std::size_t k) {
  const std::size_t active = classifier.active_classes();
  if (k < 1 || k > active) {
    fail(ErrorCode::InvalidK, "k=" + std::to_string(k) + " outside [1, " + std::to_string(active) + "]");
  }
  const auto table = score_table(classifier, data);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table.truth[i] < 0) continue;
    const auto top = detail::rank_top(classifier, table.raw[i], k);
    const auto& truth = table.classes[static_cast<std::size_t>(table.truth[i])];
    if (std::find(top.begin(), top.end(), truth) != top.end()) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(table.size());
}

/// CSV row schema: alpha,coverage,ambiguity,null_rate,n_eval,out_of_inventory
inline constexpr const char* kReportCsvHeader = "alpha,coverage,ambiguity,null_rate,n_eval,out_of_inventory";

}  // namespace cautious

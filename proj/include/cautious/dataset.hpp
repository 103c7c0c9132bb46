#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "error.hpp"
#include "feature.hpp"

namespace cautious {

struct Record {
  std::string id;
  std::optional<ClassLabel> label;  // empty for unlabeled rows
  FeatureVector features;

  friend bool operator==(const Record&, const Record&) = default;
};

/// Feature vectors with optional labels, all of one dimension, unique ids.
class LabeledDataset {
 public:
  explicit LabeledDataset(std::size_t dim) : dim_(dim) {
    if (dim_ == 0) fail(ErrorCode::InvalidFeature, "dataset dim must be >= 1");
  }

  void add(Record record) {
    require_dim(dim_, record.features.dim());
    if (!ids_.insert(record.id).second) fail(ErrorCode::DuplicateId, "duplicate id '" + record.id + "'");
    if (record.label) inventory_.insert(*record.label);
    records_.push_back(std::move(record));
  }

  void add(std::string id, std::optional<ClassLabel> label, FeatureVector features) {
    add(Record{std::move(id), std::move(label), std::move(features)});
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const std::vector<Record>& records() const noexcept { return records_; }
  const Record& operator[](std::size_t i) const { return records_[i]; }
  const std::set<ClassLabel>& inventory() const noexcept { return inventory_; }

  /// Labeled points grouped by class, each group in record order.
  std::map<ClassLabel, std::vector<FeatureVector>> points_by_class() const {
    std::map<ClassLabel, std::vector<FeatureVector>> groups;
    for (const auto& r : records_) {
      if (r.label) groups[*r.label].push_back(r.features);
    }
    return groups;
  }

  friend bool operator==(const LabeledDataset& a, const LabeledDataset& b) {
    return a.dim_ == b.dim_ && a.records_ == b.records_;
  }

 private:
  std::size_t dim_;
  std::vector<Record> records_;
  std::unordered_set<std::string> ids_;
  std::set<ClassLabel> inventory_;
};

}  // namespace cautious

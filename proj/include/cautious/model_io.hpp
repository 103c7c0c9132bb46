#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <system_error>

#include <json.hpp>

#include "conformal.hpp"
#include "density.hpp"
#include "error.hpp"
#include "io.hpp"

namespace cautious {

/// On-disk model directory layout version. Bump on any incompatible change.
inline constexpr int kModelFormatVersion = 1;
inline constexpr const char* kManifestName = "manifest.json";

namespace detail {

using json = nlohmann::json;

// Finite doubles go out as JSON numbers (shortest round-trip form);
// infinities as the strings "inf" / "-inf".
inline json encode_double(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline double decode_double(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw json::type_error::create(302, "expected a number", &j);
}

inline json encode_points(const PointMatrix& points) {
  json rows = json::array();
  for (std::size_t i = 0; i < points.size(); ++i) {
    json row = json::array();
    for (double v : points.row(i)) row.push_back(v);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline PointMatrix decode_points(const json& rows, std::size_t dim) {
  std::vector<double> data;
  for (const auto& row : rows) {
    if (row.size() != dim) fail(ErrorCode::DimensionMismatch, "stored point has wrong dim");
    for (const auto& v : row) data.push_back(v.get<double>());
  }
  if (data.empty()) return {};
  return PointMatrix(dim, std::move(data));
}

inline std::string hex_encode(std::string_view s) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  for (unsigned char c : s) {
    out += kDigits[c >> 4];
    out += kDigits[c & 0xf];
  }
  return out;
}

inline json encode_config(const TrainConfig& c) {
  json j;
  j["estimator"] = to_string(c.estimator);
  switch (c.bandwidth.kind) {
    case BandwidthRule::Kind::Scott: j["bandwidth"] = {{"rule", "scott"}}; break;
    case BandwidthRule::Kind::Silverman: j["bandwidth"] = {{"rule", "silverman"}}; break;
    case BandwidthRule::Kind::Fixed: j["bandwidth"] = {{"rule", "fixed"}, {"value", c.bandwidth.value}}; break;
  }
  j["knn_k"] = c.knn_k ? json(*c.knn_k) : json(nullptr);
  j["split_ratio"] = c.split_ratio;
  j["quantile"] = to_string(c.quantile);
  j["alpha"] = c.alpha;
  j["class_alpha"] = json::object();
  for (const auto& [label, a] : c.class_alpha) j["class_alpha"][label] = a;
  if (c.interaction) {
    j["interaction"] = {{"lambda", c.interaction->lambda ? json(*c.interaction->lambda) : json(nullptr)}};
  } else {
    j["interaction"] = nullptr;
  }
  j["min_cal_size"] = c.min_cal_size;
  j["seed"] = c.seed;
  return j;
}

inline TrainConfig decode_config(const json& j) {
  TrainConfig c;
  const auto estimator = j.at("estimator").get<std::string>();
  if (estimator == "kde") {
    c.estimator = EstimatorKind::Kde;
  } else if (estimator == "knn") {
    c.estimator = EstimatorKind::Knn;
  } else {
    fail(ErrorCode::CorruptManifest, "unknown estimator '" + estimator + "'");
  }
  const auto rule = j.at("bandwidth").at("rule").get<std::string>();
  if (rule == "scott") {
    c.bandwidth = BandwidthRule::scott();
  } else if (rule == "silverman") {
    c.bandwidth = BandwidthRule::silverman();
  } else if (rule == "fixed") {
    c.bandwidth = BandwidthRule::fixed(j.at("bandwidth").at("value").get<double>());
  } else {
    fail(ErrorCode::CorruptManifest, "unknown bandwidth rule '" + rule + "'");
  }
  if (!j.at("knn_k").is_null()) c.knn_k = j.at("knn_k").get<std::size_t>();
  c.split_ratio = j.at("split_ratio").get<double>();
  const auto quantile = j.at("quantile").get<std::string>();
  if (quantile == "empirical") {
    c.quantile = QuantileMode::Empirical;
  } else if (quantile == "finite-sample") {
    c.quantile = QuantileMode::FiniteSample;
  } else {
    fail(ErrorCode::CorruptManifest, "unknown quantile mode '" + quantile + "'");
  }
  c.alpha = j.at("alpha").get<double>();
  for (const auto& [label, a] : j.at("class_alpha").items()) c.class_alpha[label] = a.get<double>();
  if (!j.at("interaction").is_null()) {
    InteractionConfig ic;
    if (!j.at("interaction").at("lambda").is_null()) ic.lambda = j.at("interaction").at("lambda").get<double>();
    c.interaction = ic;
  }
  c.min_cal_size = j.at("min_cal_size").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

inline json encode_class(const ClassModel& m) {
  json j;
  j["label"] = m.label;
  const DensityModel& density = *m.density;
  j["estimator"] = to_string(density.kind());
  j["dim"] = density.dim();
  if (const auto* kde = density.kde()) {
    j["bandwidth"] = kde->bandwidth();
  } else {
    j["k"] = density.knn()->k();
  }
  j["fit_points"] = encode_points(density.points());
  j["calibration_points"] = encode_points(m.calibration_points);
  json scores = json::array();
  for (double s : m.calibration_scores) scores.push_back(encode_double(s));
  j["calibration_scores"] = std::move(scores);
  j["threshold"] = encode_double(m.threshold);
  j["alpha"] = m.alpha;
  j["n_fit"] = m.n_fit;
  j["n_cal"] = m.n_cal;
  j["omitted"] = m.omitted;
  return j;
}

inline ClassModel decode_class(const json& j) {
  ClassModel m;
  m.label = j.at("label").get<std::string>();
  const auto dim = j.at("dim").get<std::size_t>();
  PointMatrix fit = decode_points(j.at("fit_points"), dim);
  const auto estimator = j.at("estimator").get<std::string>();
  if (estimator == "kde") {
    m.density = std::make_shared<const DensityModel>(KdeModel(std::move(fit), j.at("bandwidth").get<double>()));
  } else if (estimator == "knn") {
    m.density = std::make_shared<const DensityModel>(KnnModel(std::move(fit), j.at("k").get<std::size_t>()));
  } else {
    fail(ErrorCode::CorruptManifest, "unknown estimator '" + estimator + "'");
  }
  m.calibration_points = decode_points(j.at("calibration_points"), dim);
  for (const auto& s : j.at("calibration_scores")) m.calibration_scores.push_back(decode_double(s));
  m.threshold = decode_double(j.at("threshold"));
  m.alpha = j.at("alpha").get<double>();
  m.n_fit = j.at("n_fit").get<std::size_t>();
  m.n_cal = j.at("n_cal").get<std::size_t>();
  m.omitted = j.at("omitted").get<bool>();
  if (m.calibration_scores.size() != m.n_cal || m.calibration_points.size() != m.n_cal ||
      m.density->size() != m.n_fit) {
    fail(ErrorCode::CorruptManifest, "class '" + m.label + "' has inconsistent counts");
  }
  return m;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoFailure, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) fail(ErrorCode::IoFailure, "write failed for '" + path.string() + "'");
}

}  // namespace detail

/// File name holding one class inside a model directory. Depends only on the
/// label, so adding or removing other classes never touches it.
inline std::string class_file_name(const ClassLabel& label) {
  return "class_" + detail::hex_encode(label) + ".json";
}

inline std::string serialize_manifest(const ConformalClassifier& classifier) {
  detail::json j;
  j["format_version"] = kModelFormatVersion;
  j["dim"] = classifier.dim();
  j["config"] = detail::encode_config(classifier.config());
  if (classifier.interaction()) {
    j["interaction_state"] = {{"lambda", classifier.lambda()}, {"shift", detail::encode_double(classifier.shift())}};
  }
  j["classes"] = detail::json::array();
  for (const auto& [label, model] : classifier.classes()) {
    j["classes"].push_back({{"label", label}, {"file", class_file_name(label)}});
  }
  return j.dump(2) + "\n";
}

inline std::string serialize_class(const ClassModel& model) { return detail::encode_class(model).dump() + "\n"; }

/// Writes manifest.json plus one file per class into `dir`. The directory is
/// assembled under "<dir>.partial" and renamed into place, so a failed save
/// leaves no half-written model. An existing model directory is replaced.
inline void save_model(const std::filesystem::path& dir, const ConformalClassifier& classifier) {
  namespace fs = std::filesystem;
  fs::path tmp = dir;
  tmp += ".partial";
  std::error_code ec;
  fs::remove_all(tmp, ec);
  if (!fs::create_directories(tmp, ec) || ec) fail(ErrorCode::IoFailure, "cannot create '" + tmp.string() + "'");
  try {
    for (const auto& [label, model] : classifier.classes()) {
      detail::write_text(tmp / class_file_name(label), serialize_class(*model));
    }
    detail::write_text(tmp / kManifestName, serialize_manifest(classifier));
    if (fs::exists(dir)) {
      if (!fs::is_directory(dir) || (!fs::is_empty(dir) && !fs::exists(dir / kManifestName))) {
        fail(ErrorCode::IoFailure, "refusing to replace '" + dir.string() + "': not a model directory");
      }
      fs::remove_all(dir);
    }
    fs::rename(tmp, dir);
  } catch (const fs::filesystem_error& e) {
    fs::remove_all(tmp, ec);
    fail(ErrorCode::IoFailure, e.what());
  } catch (...) {
    fs::remove_all(tmp, ec);
    throw;
  }
}

inline ConformalClassifier load_model(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) fail(ErrorCode::IoFailure, "model directory '" + dir.string() + "' not found");
  std::ifstream manifest_in(dir / kManifestName, std::ios::binary);
  if (!manifest_in) fail(ErrorCode::CorruptManifest, "missing " + std::string(kManifestName));
  detail::json manifest;
  try {
    manifest = detail::json::parse(manifest_in);
  } catch (const detail::json::exception& e) {
    fail(ErrorCode::CorruptManifest, std::string("unparseable manifest: ") + e.what());
  }
  try {
    const int version = manifest.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      fail(ErrorCode::VersionMismatch, "model format version " + std::to_string(version) + ", expected " +
                                           std::to_string(kModelFormatVersion));
    }
    const auto dim = manifest.at("dim").get<std::size_t>();
    TrainConfig config = detail::decode_config(manifest.at("config"));
    ConformalClassifier::ClassMap classes;
    for (const auto& entry : manifest.at("classes")) {
      const auto label = entry.at("label").get<std::string>();
      const auto file = entry.at("file").get<std::string>();
      std::ifstream in(dir / file, std::ios::binary);
      if (!in) fail(ErrorCode::MissingClassFile, "class '" + label + "': file '" + file + "' missing");
      ClassModel model;
      try {
        model = detail::decode_class(detail::json::parse(in));
      } catch (const detail::json::exception& e) {
        fail(ErrorCode::CorruptManifest, "class '" + label + "': " + e.what());
      }
      if (model.label != label) fail(ErrorCode::CorruptManifest, "class file '" + file + "' holds another label");
      if (model.density->dim() != dim) fail(ErrorCode::DimensionMismatch, "class '" + label + "' has wrong dim");
      classes.emplace(label, std::make_shared<const ClassModel>(std::move(model)));
    }
    double lambda = 0.0;
    double shift = 0.0;
    if (config.interaction) {
      const auto& state = manifest.at("interaction_state");
      lambda = state.at("lambda").get<double>();
      shift = detail::decode_double(state.at("shift"));
    }
    return ConformalClassifier(dim, std::move(config), std::move(classes), lambda, shift);
  } catch (const detail::json::exception& e) {
    fail(ErrorCode::CorruptManifest, e.what());
  }
}

}  // namespace cautious

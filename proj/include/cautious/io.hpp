#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "conformal.hpp"
#include "dataset.hpp"
#include "error.hpp"
#include "evaluation.hpp"

namespace cautious {

// ---------------------------------------------------------------------------
// Number formatting
// ---------------------------------------------------------------------------

/// Shortest decimal form that parses back to the identical double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) fail(ErrorCode::IoFailure, "cannot format number");
  return std::string(buf, ptr);
}

/// Parses a whole token as a double; nullopt unless every character is consumed.
inline std::optional<double> parse_double(std::string_view token) {
  while (!token.empty() && (token.front() == ' ' || token.front() == '\t')) token.remove_prefix(1);
  while (!token.empty() && (token.back() == ' ' || token.back() == '\t')) token.remove_suffix(1);
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  if (token.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split_fields(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

// ---------------------------------------------------------------------------
// Output files that appear only once complete
// ---------------------------------------------------------------------------

/// Writes to "<path>.partial" and renames onto `path` on commit(). If the
/// object is destroyed uncommitted (error path), the partial file is removed.
class AtomicFile {
 public:
  explicit AtomicFile(std::filesystem::path path) : path_(std::move(path)), tmp_(path_) {
    tmp_ += ".partial";
    stream_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!stream_) fail(ErrorCode::IoFailure, "cannot open '" + path_.string() + "' for writing");
  }
  AtomicFile(const AtomicFile&) = delete;
  AtomicFile& operator=(const AtomicFile&) = delete;

  ~AtomicFile() {
    if (!committed_) {
      stream_.close();
      std::error_code ec;
      std::filesystem::remove(tmp_, ec);
    }
  }

  std::ofstream& stream() { return stream_; }

  void commit() {
    stream_.flush();
    if (!stream_) fail(ErrorCode::IoFailure, "write failed for '" + path_.string() + "'");
    stream_.close();
    std::error_code ec;
    std::filesystem::rename(tmp_, path_, ec);
    if (ec) fail(ErrorCode::IoFailure, "cannot rename onto '" + path_.string() + "': " + ec.message());
    committed_ = true;
  }

 private:
  std::filesystem::path path_;
  std::filesystem::path tmp_;
  std::ofstream stream_;
  bool committed_ = false;
};

// ---------------------------------------------------------------------------
// Feature CSV: id,label,f0,...,f{d-1}
// ---------------------------------------------------------------------------

namespace detail {

inline std::string line_prefix(std::size_t line_no) { return "line " + std::to_string(line_no) + ": "; }

inline void check_plain_field(std::string_view value, std::string_view what) {
  if (value.find_first_of(",\n\r") != std::string_view::npos) {
    fail(ErrorCode::InvalidConfig, std::string(what) + " '" + std::string(value) + "' contains a separator");
  }
}

inline std::size_t parse_feature_header(std::string_view header) {
  const auto fields = split_fields(header);
  if (fields.size() < 3 || fields[0] != "id" || fields[1] != "label") {
    fail(ErrorCode::MalformedHeader, "line 1: header must be id,label,f0,...,f{d-1}");
  }
  for (std::size_t j = 2; j < fields.size(); ++j) {
    if (fields[j] != "f" + std::to_string(j - 2)) {
      fail(ErrorCode::MalformedHeader, "line 1: column " + std::to_string(j + 1) + " must be named f" +
                                           std::to_string(j - 2) + ", found '" + std::string(fields[j]) + "'");
    }
  }
  return fields.size() - 2;
}

}  // namespace detail

/// Streams a feature CSV row by row. Blank lines are skipped; an empty label
/// field marks the record unlabeled.
inline LabeledDataset read_features_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::MalformedHeader, "line 1: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::size_t dim = detail::parse_feature_header(line);
  LabeledDataset data(dim);
  std::size_t line_no = 1;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != dim + 2) {
      fail(ErrorCode::RaggedRow, detail::line_prefix(line_no) + "expected " + std::to_string(dim + 2) +
                                     " fields, got " + std::to_string(fields.size()));
    }
    values.assign(dim, 0.0);
    for (std::size_t j = 0; j < dim; ++j) {
      const auto v = parse_double(fields[j + 2]);
      if (!v) {
        fail(ErrorCode::NonFiniteValue, detail::line_prefix(line_no) + "cannot parse '" +
                                            std::string(fields[j + 2]) + "' as a number");
      }
      if (!std::isfinite(*v)) {
        fail(ErrorCode::NonFiniteValue, detail::line_prefix(line_no) + "non-finite value '" +
                                            std::string(fields[j + 2]) + "'");
      }
      values[j] = *v;
    }
    std::optional<ClassLabel> label;
    if (!fields[1].empty()) label = ClassLabel(fields[1]);
    try {
      data.add(std::string(fields[0]), std::move(label), FeatureVector(values));
    } catch (const Error& e) {
      fail(e.code(), detail::line_prefix(line_no) + e.message());
    }
  }
  return data;
}

inline LabeledDataset load_features_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open '" + path.string() + "'");
  return read_features_csv(in);
}

inline void write_features_csv(std::ostream& out, const LabeledDataset& data) {
  out << "id,label";
  for (std::size_t j = 0; j < data.dim(); ++j) out << ",f" << j;
  out << '\n';
  for (const auto& r : data.records()) {
    detail::check_plain_field(r.id, "id");
    if (r.label) detail::check_plain_field(*r.label, "label");
    out << r.id << ',' << r.label.value_or("");
    for (double v : r.features.values()) out << ',' << format_double(v);
    out << '\n';
  }
}

inline void save_features_csv(const std::filesystem::path& path, const LabeledDataset& data) {
  AtomicFile file(path);
  write_features_csv(file.stream(), data);
  file.commit();
}

// ---------------------------------------------------------------------------
// Prediction CSV: id,labels,set_size,is_null
// ---------------------------------------------------------------------------

inline std::string join_labels(const std::vector<ClassLabel>& labels) {
  std::vector<ClassLabel> sorted = labels;
  std::sort(sorted.begin(), sorted.end());
  std::string out;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i) out += '|';
    out += sorted[i];
  }
  return out;
}

inline void write_prediction_sets(std::ostream& out,
                                  const std::vector<std::pair<std::string, PredictionSet>>& predictions) {
  out << "id,labels,set_size,is_null\n";
  for (const auto& [id, set] : predictions) {
    out << id << ',' << join_labels(set.labels) << ',' << set.labels.size() << ','
        << (set.is_null ? "true" : "false") << '\n';
  }
}

inline void save_prediction_sets(const std::filesystem::path& path,
                                 const std::vector<std::pair<std::string, PredictionSet>>& predictions) {
  AtomicFile file(path);
  write_prediction_sets(file.stream(), predictions);
  file.commit();
}

// ---------------------------------------------------------------------------
// Metrics CSV: alpha,coverage,ambiguity,null_rate,n_eval,out_of_inventory
// ---------------------------------------------------------------------------

inline void write_reports_csv(std::ostream& out, const std::vector<EvalReport>& reports) {
  out << kReportCsvHeader << '\n';
  for (const auto& r : reports) {
    out << format_double(r.alpha) << ',' << format_double(r.coverage) << ',' << format_double(r.ambiguity) << ','
        << format_double(r.null_rate) << ',' << r.n_eval << ',' << r.out_of_inventory << '\n';
  }
}

inline void save_reports_csv(const std::filesystem::path& path, const std::vector<EvalReport>& reports) {
  AtomicFile file(path);
  write_reports_csv(file.stream(), reports);
  file.commit();
}

/// Reads the aggregate columns back; per-class coverage is not part of the CSV.
inline std::vector<EvalReport> read_reports_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCode::MalformedHeader, "line 1: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kReportCsvHeader) fail(ErrorCode::MalformedHeader, "line 1: unexpected metrics header");
  std::vector<EvalReport> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != 6) fail(ErrorCode::RaggedRow, detail::line_prefix(line_no) + "expected 6 fields");
    std::array<double, 6> v{};
    for (std::size_t j = 0; j < 6; ++j) {
      const auto parsed = parse_double(f[j]);
      if (!parsed || !std::isfinite(*parsed)) {
        fail(ErrorCode::NonFiniteValue, detail::line_prefix(line_no) + "bad number '" + std::string(f[j]) + "'");
      }
      v[j] = *parsed;
    }
    EvalReport r;
    r.alpha = v[0];
    r.coverage = v[1];
    r.ambiguity = v[2];
    r.null_rate = v[3];
    r.n_eval = static_cast<std::size_t>(v[4]);
    r.out_of_inventory = static_cast<std::size_t>(v[5]);
    out.push_back(r);
  }
  return out;
}

}  // namespace cautious

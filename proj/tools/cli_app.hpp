#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <cautious/cautious.hpp>

namespace cautious::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kData = 3, kIo = 4 };

inline constexpr const char* kVersion = "1.0.0";

/// Flag-level validation failure; always exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoFailure: return kIo;
    case ErrorCode::InvalidAlpha:
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidK:
    case ErrorCode::InvalidBandwidth: return kUsage;
    default: return kData;
  }
}

struct InputFlags {
  std::string features;
  std::string builtin;

  void add_to(CLI::App* cmd, bool required_labels) {
    auto* f = cmd->add_option("--features", features,
                              required_labels ? "Labeled feature CSV (id,label,f0,...)" : "Feature CSV (id,label,f0,...)");
    auto* b = cmd->add_option("--builtin", builtin, "Built-in dataset instead of --features (iris)");
    f->excludes(b);
  }

  void validate() const {
    if (features.empty() && builtin.empty()) throw UsageError("one of --features or --builtin is required");
    if (!builtin.empty() && builtin != "iris") throw UsageError("unknown builtin dataset '" + builtin + "'");
  }

  LabeledDataset load() const {
    if (!builtin.empty()) return iris_fixture();
    return load_features_csv(features);
  }
};

struct TrainFlags {
  InputFlags input;
  std::string out;
  double alpha = 0.1;
  std::string estimator = "kde";
  std::string bandwidth = "scott";
  std::optional<long> k;
  double split_ratio = 0.5;
  std::string quantile = "finite-sample";
  long min_cal_size = 20;
  long long seed = 0;
  std::string per_class_alpha;
  std::string lambda;
};

struct ModelFlags {
  std::string model;
  InputFlags input;
  std::string out;
  std::string alphas;
  long k = 1;
};

inline void check_alpha(double alpha, const std::string& what = "alpha") {
  if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError(what + " must be in (0,1)");
}

inline TrainConfig build_config(const TrainFlags& f) {
  TrainConfig c;
  check_alpha(f.alpha);
  c.alpha = f.alpha;
  if (f.estimator == "kde") {
    c.estimator = EstimatorKind::Kde;
  } else if (f.estimator == "knn") {
    c.estimator = EstimatorKind::Knn;
  } else {
    throw UsageError("estimator must be kde or knn");
  }
  if (f.bandwidth == "scott") {
    c.bandwidth = BandwidthRule::scott();
  } else if (f.bandwidth == "silverman") {
    c.bandwidth = BandwidthRule::silverman();
  } else {
    const auto h = parse_double(f.bandwidth);
    if (!h || !(*h > 0.0) || !std::isfinite(*h)) throw UsageError("bandwidth must be scott, silverman or a positive number");
    c.bandwidth = BandwidthRule::fixed(*h);
  }
  if (f.k) {
    if (*f.k < 1) throw UsageError("k must be >= 1");
    c.knn_k = static_cast<std::size_t>(*f.k);
  }
  if (!(f.split_ratio > 0.0 && f.split_ratio < 1.0)) throw UsageError("split-ratio must be in (0,1)");
  c.split_ratio = f.split_ratio;
  if (f.quantile == "finite-sample") {
    c.quantile = QuantileMode::FiniteSample;
  } else if (f.quantile == "empirical") {
    c.quantile = QuantileMode::Empirical;
  } else {
    throw UsageError("quantile must be finite-sample or empirical");
  }
  if (f.min_cal_size < 0) throw UsageError("min-cal-size must be >= 0");
  c.min_cal_size = static_cast<std::size_t>(f.min_cal_size);
  if (f.seed < 0) throw UsageError("seed must be >= 0");
  c.seed = static_cast<std::uint64_t>(f.seed);
  if (!f.lambda.empty()) {
    InteractionConfig ic;
    if (f.lambda != "auto") {
      const auto l = parse_double(f.lambda);
      if (!l || !(*l >= 0.0) || !std::isfinite(*l)) throw UsageError("lambda must be 'auto' or a number >= 0");
      ic.lambda = *l;
    }
    c.interaction = ic;
  }
  return c;
}

// Rows "label,alpha"; an optional "label,alpha" header line is skipped.
inline std::map<ClassLabel, double> read_per_class_alpha(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open '" + path + "'");
  std::map<ClassLabel, double> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || (line_no == 1 && line == "label,alpha")) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 2) fail(ErrorCode::RaggedRow, "line " + std::to_string(line_no) + ": expected label,alpha");
    const auto a = parse_double(fields[1]);
    if (!a || !(*a > 0.0 && *a < 1.0)) {
      throw UsageError("line " + std::to_string(line_no) + " of per-class alpha file: alpha must be in (0,1)");
    }
    out[ClassLabel(fields[0])] = *a;
  }
  return out;
}

/// Parses "start:stop:step" into an ascending grid inside (0,1).
inline std::vector<double> parse_alpha_grid(const std::string& spec) {
  const auto parts = split_fields(spec, ':');
  if (parts.size() != 3) throw UsageError("alphas must be start:stop:step");
  const auto start = parse_double(parts[0]);
  const auto stop = parse_double(parts[1]);
  const auto step = parse_double(parts[2]);
  if (!start || !stop || !step) throw UsageError("alphas must be start:stop:step with numeric fields");
  if (!(*step > 0.0)) throw UsageError("alphas step must be > 0");
  if (!(*stop >= *start)) throw UsageError("alphas stop must be >= start");
  check_alpha(*start, "alphas start");
  check_alpha(*stop, "alphas stop");
  const auto count = static_cast<std::size_t>(std::floor((*stop - *start) / *step + 1e-9)) + 1;
  std::vector<double> grid;
  for (std::size_t i = 0; i < count; ++i) {
    // Round to 12 significant digits so 0.05 + 2 * 0.05 prints as 0.15.
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", *start + static_cast<double>(i) * *step);
    grid.push_back(*parse_double(buf));
  }
  return grid;
}

inline void print_report(std::ostream& out, const EvalReport& r) {
  out << "alpha=" << format_double(r.alpha) << " coverage=" << format_double(r.coverage)
      << " ambiguity=" << format_double(r.ambiguity) << " null_rate=" << format_double(r.null_rate)
      << " n_eval=" << r.n_eval << " out_of_inventory=" << r.out_of_inventory << '\n';
  for (const auto& [label, cov] : r.per_class_coverage) {
    out << "  class " << label << " coverage=" << format_double(cov) << '\n';
  }
}

inline int cmd_train(const TrainFlags& f, std::ostream& out, std::ostream& err) {
  TrainConfig config = build_config(f);
  f.input.validate();
  if (!f.per_class_alpha.empty()) config.class_alpha = read_per_class_alpha(f.per_class_alpha);
  const auto data = f.input.load();
  const auto model = train(data, config);
  for (const auto& label : config.class_alpha) {
    if (!model.has(label.first)) err << "warning: per-class alpha for unknown class '" << label.first << "'\n";
  }
  save_model(f.out, model);
  out << "trained " << model.num_classes() << " classes (dim " << model.dim() << ", "
      << to_string(config.estimator) << ", " << to_string(config.quantile) << ")\n";
  out << "label,n_fit,n_cal,alpha,threshold,omitted\n";
  for (const auto& [label, m] : model.classes()) {
    out << label << ',' << m->n_fit << ',' << m->n_cal << ',' << format_double(m->alpha) << ','
        << format_double(m->threshold) << ',' << (m->omitted ? "true" : "false") << '\n';
  }
  return kOk;
}

inline int cmd_predict(const ModelFlags& f, std::ostream& out, std::ostream& err) {
  f.input.validate();
  const auto model = load_model(f.model);
  const auto data = f.input.load();
  require_dim(model.dim(), data.dim());
  std::vector<std::pair<std::string, PredictionSet>> predictions(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    predictions[i] = {data[i].id, predict_set(model, data[i].features)};
  });
  save_prediction_sets(f.out, predictions);
  if (data.empty()) {
    err << "warning: input has no rows; wrote header only\n";
    out << "predicted 0 rows\n";
    return kOk;
  }
  std::size_t nulls = 0;
  std::size_t sizes = 0;
  for (const auto& [id, set] : predictions) {
    nulls += set.is_null ? 1 : 0;
    sizes += set.labels.size();
  }
  const double n = static_cast<double>(predictions.size());
  out << "predicted " << predictions.size() << " rows; null_fraction=" << format_double(static_cast<double>(nulls) / n)
      << " mean_set_size=" << format_double(static_cast<double>(sizes) / n) << '\n';
  return kOk;
}

inline int cmd_evaluate(const ModelFlags& f, std::ostream& out, std::ostream&) {
  f.input.validate();
  const auto model = load_model(f.model);
  const auto data = f.input.load();
  const auto report = evaluate(model, data);
  print_report(out, report);
  if (!f.out.empty()) save_reports_csv(f.out, {report});
  return kOk;
}

inline int cmd_sweep(const ModelFlags& f, std::ostream& out, std::ostream&) {
  const auto alphas = parse_alpha_grid(f.alphas);
  f.input.validate();
  const auto model = load_model(f.model);
  const auto data = f.input.load();
  const auto reports = alpha_sweep(model, data, alphas);
  if (f.out.empty()) {
    write_reports_csv(out, reports);
  } else {
    save_reports_csv(f.out, reports);
    out << "wrote " << reports.size() << " rows to " << f.out << '\n';
  }
  return kOk;
}

inline int cmd_topk(const ModelFlags& f, std::ostream& out, std::ostream&) {
  if (f.k < 1) throw UsageError("k must be >= 1");
  f.input.validate();
  const auto model = load_model(f.model);
  if (static_cast<std::size_t>(f.k) > model.active_classes()) {
    throw UsageError("k=" + std::to_string(f.k) + " exceeds the " + std::to_string(model.active_classes()) +
                     " non-omitted classes");
  }
  const auto data = f.input.load();
  const double acc = topk_accuracy(model, data, static_cast<std::size_t>(f.k));
  out << "top-" << f.k << " accuracy=" << format_double(acc) << '\n';
  return kOk;
}

/// Entry point shared by the executable and the tests.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cautious set-valued classification with conformal per-class thresholds"};
  app.require_subcommand(0, 1);
  bool show_version = false;
  app.add_flag("--version", show_version, "Print the tool and model-format version");

  TrainFlags tf;
  auto* train_cmd = app.add_subcommand("train", "Fit per-class densities and calibrate thresholds");
  tf.input.add_to(train_cmd, true);
  train_cmd->add_option("--out", tf.out, "Output model directory")->required();
  train_cmd->add_option("--alpha", tf.alpha, "Miscoverage level in (0,1)")->capture_default_str();
  train_cmd->add_option("--estimator", tf.estimator, "Density estimator: kde or knn")->capture_default_str();
  train_cmd->add_option("--bandwidth", tf.bandwidth, "KDE bandwidth: scott, silverman or a positive number")
      ->capture_default_str();
  train_cmd->add_option("--k", tf.k, "k for the knn estimator (default min(10, n_fit-1))");
  train_cmd->add_option("--split-ratio", tf.split_ratio, "Fraction of each class used for fitting")
      ->capture_default_str();
  train_cmd->add_option("--quantile", tf.quantile, "Threshold rule: finite-sample or empirical")->capture_default_str();
  train_cmd->add_option("--min-cal-size", tf.min_cal_size, "Classes with fewer calibration points are omitted")
      ->capture_default_str();
  train_cmd->add_option("--seed", tf.seed, "Seed for the per-class splits")->capture_default_str();
  train_cmd->add_option("--per-class-alpha", tf.per_class_alpha, "CSV of label,alpha overrides");
  train_cmd->add_option("--lambda", tf.lambda, "Enable class interaction with this penalty (number or 'auto')");

  ModelFlags pf;
  auto* predict_cmd = app.add_subcommand("predict", "Write prediction sets for every row");
  predict_cmd->add_option("--model", pf.model, "Model directory")->required();
  pf.input.add_to(predict_cmd, false);
  predict_cmd->add_option("--out", pf.out, "Output prediction CSV")->required();

  ModelFlags ef;
  auto* eval_cmd = app.add_subcommand("evaluate", "Coverage, ambiguity and null rate on labeled data");
  eval_cmd->add_option("--model", ef.model, "Model directory")->required();
  ef.input.add_to(eval_cmd, true);
  eval_cmd->add_option("--out", ef.out, "Optional metrics CSV");

  ModelFlags sf;
  auto* sweep_cmd = app.add_subcommand("sweep", "Metrics over an alpha grid (thresholds only are recalibrated)");
  sweep_cmd->add_option("--model", sf.model, "Model directory")->required();
  sf.input.add_to(sweep_cmd, true);
  sweep_cmd->add_option("--alphas", sf.alphas, "Grid start:stop:step")->required();
  sweep_cmd->add_option("--out", sf.out, "Metrics CSV (stdout when omitted)");

  ModelFlags kf;
  auto* topk_cmd = app.add_subcommand("topk", "Top-k accuracy of the raw per-class scores");
  topk_cmd->add_option("--model", kf.model, "Model directory")->required();
  kf.input.add_to(topk_cmd, true);
  topk_cmd->add_option("--k", kf.k, "Number of ranked labels")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  if (show_version) {
    out << "cautious " << kVersion << " (model format " << kModelFormatVersion << ")\n";
    return kOk;
  }
  if (!configure_threads_from_env()) {
    err << "error: CAUTIOUS_THREADS must be a non-negative integer\n";
    return kUsage;
  }

  try {
    if (*train_cmd) return cmd_train(tf, out, err);
    if (*predict_cmd) return cmd_predict(pf, out, err);
    if (*eval_cmd) return cmd_evaluate(ef, out, err);
    if (*sweep_cmd) return cmd_sweep(sf, out, err);
    if (*topk_cmd) return cmd_topk(kf, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  }
  out << app.help();
  return kUsage;
}

}  // namespace cautious::cli

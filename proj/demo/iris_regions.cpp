// Trains on the two-feature Iris data at alpha = 0.05 and prints the
// prediction set over a grid of (sepal length, petal length) points as CSV.
// Plot the `labels` column to see the per-class regions, their overlaps and
// the surrounding null region.

#include <cstdio>
#include <cstdlib>
#include <iostream>

#include <cautious/cautious.hpp>

int main(int argc, char** argv) {
  double lambda = -1.0;
  if (argc > 1) lambda = std::atof(argv[1]);

  cautious::TrainConfig config;
  config.alpha = 0.05;
  config.quantile = cautious::QuantileMode::Empirical;
  config.min_cal_size = 5;
  if (lambda >= 0.0) config.interaction = cautious::InteractionConfig{lambda};

  const auto model = cautious::train(cautious::iris_fixture(), config);

  std::cout << "sepal_length,petal_length,labels\n";
  for (double sepal = 4.0; sepal <= 8.0 + 1e-9; sepal += 0.1) {
    for (double petal = 0.5; petal <= 7.5 + 1e-9; petal += 0.1) {
      const auto set = cautious::predict_set(model, cautious::FeatureVector{sepal, petal});
      std::printf("%.1f,%.1f,%s\n", sepal, petal, cautious::join_labels(set.labels).c_str());
    }
  }
  return 0;
}

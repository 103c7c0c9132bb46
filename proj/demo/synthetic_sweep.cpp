// Alpha sweep on a three-class Gaussian mixture: prints coverage, mean set
// size and null rate per alpha, the coverage/ambiguity trade-off curve.

#include <iostream>

#include <cautious/cautious.hpp>

int main() {
  cautious::MixtureSpec spec;
  spec.dim = 2;
  spec.components = {{"a", 1.0 / 3, {0.0, 0.0}, 1.0}, {"b", 1.0 / 3, {2.0, 0.0}, 1.0}, {"c", 1.0 / 3, {1.0, 2.0}, 1.0}};
  spec.n_total = 3000;
  spec.seed = 1;
  const auto train_data = cautious::synth_mixture(spec);
  spec.seed = 2;
  const auto eval_data = cautious::synth_mixture(spec);

  std::vector<double> alphas;
  for (int i = 1; i < 20; ++i) alphas.push_back(0.05 * i);
  const auto reports = cautious::alpha_sweep(train_data, cautious::TrainConfig{}, eval_data, alphas);
  cautious::write_reports_csv(std::cout, reports);
  return 0;
}

#pragma once

#include <array>
#include <cstdio>
#include <string>

#include "dataset.hpp"

namespace cautious {

/// Fisher's Iris data (150 samples, 3 classes of 50) restricted to two
/// features: sepal length and petal length, both in cm. Ids are
/// "iris-001" .. "iris-150" in the canonical row order.
inline LabeledDataset iris_fixture() {
  struct Row {
    double sepal_length;
    double petal_length;
    int species;
  };
  static constexpr std::array<Row, 150> kRows = {{
      {5.1, 1.4, 0}, {4.9, 1.4, 0}, {4.7, 1.3, 0}, {4.6, 1.5, 0}, {5.0, 1.4, 0},
      {5.4, 1.7, 0}, {4.6, 1.4, 0}, {5.0, 1.5, 0}, {4.4, 1.4, 0}, {4.9, 1.5, 0},
      {5.4, 1.5, 0}, {4.8, 1.6, 0}, {4.8, 1.4, 0}, {4.3, 1.1, 0}, {5.8, 1.2, 0},
      {5.7, 1.5, 0}, {5.4, 1.3, 0}, {5.1, 1.4, 0}, {5.7, 1.7, 0}, {5.1, 1.5, 0},
      {5.4, 1.7, 0}, {5.1, 1.5, 0}, {4.6, 1.0, 0}, {5.1, 1.7, 0}, {4.8, 1.9, 0},
      {5.0, 1.6, 0}, {5.0, 1.6, 0}, {5.2, 1.5, 0}, {5.2, 1.4, 0}, {4.7, 1.6, 0},
      {4.8, 1.6, 0}, {5.4, 1.5, 0}, {5.2, 1.5, 0}, {5.5, 1.4, 0}, {4.9, 1.5, 0},
      {5.0, 1.2, 0}, {5.5, 1.3, 0}, {4.9, 1.4, 0}, {4.4, 1.3, 0}, {5.1, 1.5, 0},
      {5.0, 1.3, 0}, {4.5, 1.3, 0}, {4.4, 1.3, 0}, {5.0, 1.6, 0}, {5.1, 1.9, 0},
      {4.8, 1.4, 0}, {5.1, 1.6, 0}, {4.6, 1.4, 0}, {5.3, 1.5, 0}, {5.0, 1.4, 0},
      {7.0, 4.7, 1}, {6.4, 4.5, 1}, {6.9, 4.9, 1}, {5.5, 4.0, 1}, {6.5, 4.6, 1},
      {5.7, 4.5, 1}, {6.3, 4.7, 1}, {4.9, 3.3, 1}, {6.6, 4.6, 1}, {5.2, 3.9, 1},
      {5.0, 3.5, 1}, {5.9, 4.2, 1}, {6.0, 4.0, 1}, {6.1, 4.7, 1}, {5.6, 3.6, 1},
      {6.7, 4.4, 1}, {5.6, 4.5, 1}, {5.8, 4.1, 1}, {6.2, 4.5, 1}, {5.6, 3.9, 1},
      {5.9, 4.8, 1}, {6.1, 4.0, 1}, {6.3, 4.9, 1}, {6.1, 4.7, 1}, {6.4, 4.3, 1},
      {6.6, 4.4, 1}, {6.8, 4.8, 1}, {6.7, 5.0, 1}, {6.0, 4.5, 1}, {5.7, 3.5, 1},
      {5.5, 3.8, 1}, {5.5, 3.7, 1}, {5.8, 3.9, 1}, {6.0, 5.1, 1}, {5.4, 4.5, 1},
      {6.0, 4.5, 1}, {6.7, 4.7, 1}, {6.3, 4.4, 1}, {5.6, 4.1, 1}, {5.5, 4.0, 1},
      {5.5, 4.4, 1}, {6.1, 4.6, 1}, {5.8, 4.0, 1}, {5.0, 3.3, 1}, {5.6, 4.2, 1},
      {5.7, 4.2, 1}, {5.7, 4.2, 1}, {6.2, 4.3, 1}, {5.1, 3.0, 1}, {5.7, 4.1, 1},
      {6.3, 6.0, 2}, {5.8, 5.1, 2}, {7.1, 5.9, 2}, {6.3, 5.6, 2}, {6.5, 5.8, 2},
      {7.6, 6.6, 2}, {4.9, 4.5, 2}, {7.3, 6.3, 2}, {6.7, 5.8, 2}, {7.2, 6.1, 2},
      {6.5, 5.1, 2}, {6.4, 5.3, 2}, {6.8, 5.5, 2}, {5.7, 5.0, 2}, {5.8, 5.1, 2},
      {6.4, 5.3, 2}, {6.5, 5.5, 2}, {7.7, 6.7, 2}, {7.7, 6.9, 2}, {6.0, 5.0, 2},
      {6.9, 5.7, 2}, {5.6, 4.9, 2}, {7.7, 6.7, 2}, {6.3, 4.9, 2}, {6.7, 5.7, 2},
      {7.2, 6.0, 2}, {6.2, 4.8, 2}, {6.1, 4.9, 2}, {6.4, 5.6, 2}, {7.2, 5.8, 2},
      {7.4, 6.1, 2}, {7.9, 6.4, 2}, {6.4, 5.6, 2}, {6.3, 5.1, 2}, {6.1, 5.6, 2},
      {7.7, 6.1, 2}, {6.3, 5.6, 2}, {6.4, 5.5, 2}, {6.0, 4.8, 2}, {6.9, 5.4, 2},
      {6.7, 5.6, 2}, {6.9, 5.1, 2}, {5.8, 5.1, 2}, {6.8, 5.9, 2}, {6.7, 5.7, 2},
      {6.7, 5.2, 2}, {6.3, 5.0, 2}, {6.5, 5.2, 2}, {6.2, 5.4, 2}, {5.9, 5.1, 2},
  }};
  static constexpr std::array<const char*, 3> kSpecies = {"setosa", "versicolor", "virginica"};

  LabeledDataset data(2);
  for (std::size_t i = 0; i < kRows.size(); ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "iris-%03zu", i + 1);
    data.add(id, std::string(kSpecies[static_cast<std::size_t>(kRows[i].species)]),
             FeatureVector{kRows[i].sepal_length, kRows[i].petal_length});
  }
  return data;
}

}  // namespace cautious

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "error.hpp"

namespace cautious {

/// Isotropic Gaussian mixture used as a ground-truth data source.
struct MixtureSpec {
  struct Component {
    ClassLabel label;
    double weight = 1.0;
    std::vector<double> mean;
    double variance = 1.0;
  };

  std::vector<Component> components;
  std::size_t dim = 0;
  std::size_t n_total = 0;
  std::uint64_t seed = 0;

  void validate() const {
    if (components.empty()) fail(ErrorCode::InvalidSpec, "mixture needs at least one component");
    if (dim == 0) fail(ErrorCode::InvalidSpec, "mixture dim must be >= 1");
    double total = 0.0;
    for (const auto& c : components) {
      if (!(c.weight > 0.0)) fail(ErrorCode::InvalidSpec, "component '" + c.label + "' weight must be > 0");
      if (!(c.variance > 0.0) || !std::isfinite(c.variance)) {
        fail(ErrorCode::InvalidSpec, "component '" + c.label + "' variance must be > 0");
      }
      if (c.mean.size() != dim) fail(ErrorCode::InvalidSpec, "component '" + c.label + "' mean has wrong dim");
      for (double m : c.mean) {
        if (!std::isfinite(m)) fail(ErrorCode::InvalidSpec, "component '" + c.label + "' mean is not finite");
      }
      total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) fail(ErrorCode::InvalidSpec, "component weights must sum to 1");
  }

  const Component& component(const ClassLabel& label) const {
    for (const auto& c : components) {
      if (c.label == label) return c;
    }
    fail(ErrorCode::UnknownClass, "no mixture component '" + label + "'");
  }
};

/// Closed-form log N(x; mean, variance I) of one component.
inline double mixture_log_density(const MixtureSpec::Component& c, std::span<const double> x) {
  const double d = static_cast<double>(c.mean.size());
  double d2 = 0.0;
  for (std::size_t j = 0; j < c.mean.size(); ++j) d2 += (x[j] - c.mean[j]) * (x[j] - c.mean[j]);
  return -0.5 * d * std::log(2.0 * std::numbers::pi * c.variance) - 0.5 * d2 / c.variance;
}

namespace detail {

// Uniform in (0, 1) from the top 53 bits; never returns 0.
inline double open_unit(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

// Box-Muller; portable where std::normal_distribution is not.
class NormalSource {
 public:
  explicit NormalSource(std::mt19937_64& rng) : rng_(rng) {}

  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(open_unit(rng_)));
    const double theta = 2.0 * std::numbers::pi * open_unit(rng_);
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  std::mt19937_64& rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace detail

/// Draws n_total labeled points: each point picks a component by weight, then
/// samples N(mean, variance I). Pure function of the spec. Ids "s0000000".
inline LabeledDataset synth_mixture(const MixtureSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  detail::NormalSource normal(rng);
  LabeledDataset data(spec.dim);
  std::vector<double> x(spec.dim);
  for (std::size_t i = 0; i < spec.n_total; ++i) {
    const double u = detail::open_unit(rng);
    std::size_t c = 0;
    double acc = spec.components[0].weight;
    while (u > acc && c + 1 < spec.components.size()) acc += spec.components[++c].weight;
    const auto& comp = spec.components[c];
    const double sd = std::sqrt(comp.variance);
    for (std::size_t j = 0; j < spec.dim; ++j) x[j] = comp.mean[j] + sd * normal();
    char id[24];
    std::snprintf(id, sizeof id, "s%07zu", i);
    data.add(id, comp.label, FeatureVector(x));
  }
  return data;
}

}  // namespace cautious

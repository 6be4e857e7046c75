#pragma once

#include <span>
#include <vector>

#include "core/inference.hpp"

namespace penmeta {

struct PosteriorCurve {
  std::vector<double> ages;
  std::vector<double> mean;
  std::vector<double> cri_low;
  std::vector<double> cri_high;
};

inline std::vector<double> decade_ages() { return {40.0, 50.0, 60.0, 70.0, 80.0}; }

std::vector<double> fine_age_grid();  // 20..95 step 1

/// Row t = Weibull(a_t * b_t, c_t * d_t) cdf at the requested ages.
std::vector<std::vector<double>> penetrance_draws(std::span<const HyperParams> trace,
                                                  std::span<const double> ages);

/// Per-age mean and equal-tailed quantile interval (linear interpolation).
PosteriorCurve summarize_curve(const std::vector<std::vector<double>>& draws,
                               std::span<const double> ages, double level = 0.95);

}  // namespace penmeta

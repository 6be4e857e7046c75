#include "core/posterior.hpp"

#include <algorithm>
#include <stdexcept>

#include "core/stats.hpp"

namespace penmeta {

std::vector<double> fine_age_grid() {
  std::vector<double> ages;
  for (int a = 20; a <= 95; ++a) ages.push_back(static_cast<double>(a));
  return ages;
}

std::vector<std::vector<double>> penetrance_draws(std::span<const HyperParams> trace,
                                                  std::span<const double> ages) {
  std::vector<std::vector<double>> draws;
  draws.reserve(trace.size());
  for (const HyperParams& h : trace) {
    const WeibullCurve curve{h.a * h.b, h.c * h.d};
    std::vector<double> row;
    row.reserve(ages.size());
    for (double age : ages) row.push_back(weibull_cdf(curve, age));
    draws.push_back(std::move(row));
  }
  return draws;
}

PosteriorCurve summarize_curve(const std::vector<std::vector<double>>& draws,
                               std::span<const double> ages, double level) {
  if (draws.empty()) throw std::invalid_argument("summarize_curve: no draws");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("summarize_curve: bad level");
  PosteriorCurve curve;
  curve.ages.assign(ages.begin(), ages.end());
  const double tail = (1.0 - level) / 2.0;
  std::vector<double> column(draws.size());
  for (std::size_t j = 0; j < ages.size(); ++j) {
    for (std::size_t t = 0; t < draws.size(); ++t) column[t] = draws[t][j];
    curve.mean.push_back(mean(column));
    std::sort(column.begin(), column.end());
    curve.cri_low.push_back(quantile_sorted(column, tail));
    curve.cri_high.push_back(quantile_sorted(column, 1.0 - tail));
  }
  return curve;
}

}  // namespace penmeta

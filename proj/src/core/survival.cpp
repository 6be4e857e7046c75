#include "core/survival.hpp"

#include <algorithm>
#include <cmath>

#include "core/stats.hpp"

namespace penmeta {

std::vector<CohortObservation> generate_carrier_cohort(const WeibullCurve& curve, int n,
                                                       const AgeSummary& censor_law,
                                                       double max_age, Rng& rng) {
  std::vector<CohortObservation> cohort(static_cast<std::size_t>(n));
  for (auto& obs : cohort) {
    const double event_time = rng.weibull(curve.kappa, curve.lambda);
    const double censor = std::max(rng.normal(censor_law.mean, censor_law.sd), 0.0);
    const double horizon = std::min(censor, max_age);
    obs.event = event_time <= horizon;
    obs.time = std::min(event_time, horizon);
  }
  return cohort;
}

KaplanMeier::KaplanMeier(std::vector<CohortObservation> observations) {
  std::sort(observations.begin(), observations.end(),
            [](const CohortObservation& a, const CohortObservation& b) { return a.time < b.time; });
  sorted_times_.reserve(observations.size());
  for (const auto& o : observations) sorted_times_.push_back(o.time);

  const std::size_t n = observations.size();
  double surv = 1.0;
  double green = 0.0;
  std::size_t i = 0;
  while (i < n) {
    const double t = observations[i].time;
    std::size_t deaths = 0;
    std::size_t j = i;
    while (j < n && observations[j].time == t) {
      if (observations[j].event) ++deaths;
      ++j;
    }
    if (deaths > 0) {
      const double at_risk_here = static_cast<double>(n - i);
      const double d = static_cast<double>(deaths);
      surv *= (at_risk_here - d) / at_risk_here;
      if (at_risk_here > d) green += d / (at_risk_here * (at_risk_here - d));
      steps_.push_back({t, surv, green});
    }
    i = j;
  }
}

double KaplanMeier::survival(double t) const {
  double s = 1.0;
  for (const auto& step : steps_) {
    if (step.time > t) break;
    s = step.survival;
  }
  return s;
}

double KaplanMeier::greenwood(double t) const {
  double g = 0.0;
  for (const auto& step : steps_) {
    if (step.time > t) break;
    g = step.greenwood;
  }
  return g;
}

int KaplanMeier::at_risk(double t) const {
  const auto it = std::lower_bound(sorted_times_.begin(), sorted_times_.end(), t);
  return static_cast<int>(sorted_times_.end() - it);
}

std::optional<PenetranceReport> km_penetrance_report(const KaplanMeier& km,
                                                     std::span<const double> ages, double level) {
  const double z = normal_quantile_for_level(level);
  PenetranceReport report;
  for (const double age : ages) {
    if (km.at_risk(age) < 1) return std::nullopt;
    const double s = km.survival(age);
    const double g = km.greenwood(age);
    if (!(s > 0.0 && s < 1.0) || g <= 0.0) return std::nullopt;
    // log(-log S) interval keeps the transformed bounds inside (0,1)
    const double sigma = std::sqrt(g) / std::fabs(std::log(s));
    const double s_low = std::pow(s, std::exp(z * sigma));
    const double s_high = std::pow(s, std::exp(-z * sigma));
    report.ages.push_back(age);
    report.values.push_back(1.0 - s);
    report.ci_low.push_back(1.0 - s_high);
    report.ci_high.push_back(1.0 - s_low);
  }
  return report;
}

}  // namespace penmeta

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "core/domain.hpp"
#include "core/rng.hpp"

namespace penmeta {

struct CohortObservation {
  double time = 0.0;
  bool event = false;
};

/// Carrier follow-up: event ~ Weibull(curve), censoring ~ N(censor_law)
/// floored at 0, administrative cutoff at max_age. A subject is an event iff
/// the event time is the minimum of the three.
std::vector<CohortObservation> generate_carrier_cohort(const WeibullCurve& curve, int n,
                                                       const AgeSummary& censor_law,
                                                       double max_age, Rng& rng);

/// Product-limit estimator with Greenwood variance.
class KaplanMeier {
 public:
  explicit KaplanMeier(std::vector<CohortObservation> observations);

  /// S(t): survival just after time t.
  double survival(double t) const;
  /// Accumulated Greenwood sum d/(n(n-d)) over event times <= t.
  double greenwood(double t) const;
  /// Subjects with observation time >= t.
  int at_risk(double t) const;

 private:
  struct Step {
    double time;
    double survival;
    double greenwood;
  };
  std::vector<Step> steps_;
  std::vector<double> sorted_times_;
};

/// Penetrance (1 - S) with log-log 95% CIs at the requested ages, or nullopt
/// when the estimate is degenerate at some age (no one at risk, S at 0 or 1,
/// or zero Greenwood variance).
std::optional<PenetranceReport> km_penetrance_report(const KaplanMeier& km,
                                                     std::span<const double> ages,
                                                     double level = 0.95);

}  // namespace penmeta

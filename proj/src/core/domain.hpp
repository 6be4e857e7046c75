#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace penmeta {

/// Weibull shape/scale pair; the penetrance function of one study.
struct WeibullCurve {
  double kappa = 0.0;  // shape, unitless
  double lambda = 0.0; // scale, years
};

/// F(t) = 1 - exp(-(t/lambda)^kappa). Throws std::domain_error for t < 0 or
/// non-finite t.
double weibull_cdf(const WeibullCurve& curve, double t);

/// Density of the Weibull curve at t >= 0 (0 at t = 0 for kappa > 1).
double weibull_pdf(const WeibullCurve& curve, double t);

double logit(double p);
double inv_logit(double x);

/// Mean/SD of a normal age distribution (onset or inclusion ages).
struct AgeSummary {
  double mean = 0.0;
  double sd = 0.0;
};

/// The four age distributions entering the odds-ratio bridge. RR/SIR studies
/// use only the first two (carrier and non-carrier onset ages).
struct AgeDistributions {
  AgeSummary cases_carrier;
  AgeSummary cases_noncarrier;
  AgeSummary controls_carrier;
  AgeSummary controls_noncarrier;
};

/// Default onset-age summary (US breast-cancer onset, SEER).
inline constexpr AgeSummary kDefaultAgeSummary{63.0, 14.00726};

inline AgeDistributions default_age_distributions() {
  return {kDefaultAgeSummary, kDefaultAgeSummary, kDefaultAgeSummary, kDefaultAgeSummary};
}

/// Per-age penetrance values with their reported confidence bounds.
struct PenetranceReport {
  std::vector<double> ages;
  std::vector<double> values;
  std::vector<double> ci_low;
  std::vector<double> ci_high;
};

/// 2x2 carrier/non-carrier by case/control table.
struct CountTable {
  std::int64_t carrier_cases = 0;
  std::int64_t carrier_controls = 0;
  std::int64_t noncarrier_cases = 0;
  std::int64_t noncarrier_controls = 0;
};

/// A scalar OR / RR / SIR report. At least one of {CI pair, counts} must be
/// present so a standard error is derivable.
struct RatioReport {
  double estimate = 0.0;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  std::optional<CountTable> counts;
};

enum class Modality { Penetrance, RR, SIR, OR };

const char* modality_name(Modality m);
Modality modality_from_name(const std::string& name);

struct StudyRecord {
  std::string id;
  Modality modality = Modality::OR;
  bool biased = false;
  std::optional<PenetranceReport> penetrance;
  std::optional<RatioReport> ratio;
  AgeDistributions ages = default_age_distributions();
  bool age_reported = false;
  /// Carriers for penetrance studies (drives the W* cohort simulation);
  /// informational for ratio studies.
  std::optional<std::int64_t> sample_size;
};

/// Non-carrier penetrance, treated as known. With truncation_age set, the cdf
/// is renormalized so F(truncation_age) = 1.
struct BaselinePenetrance {
  WeibullCurve curve{3.65, 143.2426};
  std::optional<double> truncation_age;

  double cdf(double t) const;
  double pdf(double t) const;
};

/// Validates every invariant of a study record; throws std::invalid_argument
/// with the study id and offending field on failure.
void validate_study(const StudyRecord& record);

void validate_studies(const std::vector<StudyRecord>& records);

/// Variance implied by a reported CI: ((T(hi) - T(lo)) / (2 z))^2 where T is
/// the transform already applied to lo/hi by the caller (log for ratio
/// estimates, logit for penetrance values).
double ci_to_logvar(double transformed_low, double transformed_high, double level = 0.95);

/// Convenience wrappers selecting the transform.
double ci_to_logvar_log(double ci_low, double ci_high, double level = 0.95);
double ci_to_logvar_logit(double ci_low, double ci_high, double level = 0.95);

struct OrEstimate {
  double estimate = 0.0;
  double log_se = 0.0;
};

/// OR and log-scale SE from a 2x2 table with 0.5 added to every cell.
OrEstimate continuity_corrected_or(const CountTable& counts);

/// Normal quantile for an equal-tailed CI at `level` (1.959964 for 0.95).
double normal_quantile_for_level(double level);

}  // namespace penmeta

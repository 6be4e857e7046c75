#include "core/domain.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "core/stats.hpp"

namespace penmeta {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

}  // namespace

double weibull_cdf(const WeibullCurve& curve, double t) {
  if (!std::isfinite(t) || t < 0.0) throw std::domain_error("weibull_cdf: t must be finite and >= 0");
  if (t == 0.0) return 0.0;
  return -std::expm1(-std::pow(t / curve.lambda, curve.kappa));
}

double weibull_pdf(const WeibullCurve& curve, double t) {
  if (!std::isfinite(t) || t < 0.0) throw std::domain_error("weibull_pdf: t must be finite and >= 0");
  if (t == 0.0) return curve.kappa == 1.0 ? 1.0 / curve.lambda : (curve.kappa > 1.0 ? 0.0 : std::numeric_limits<double>::infinity());
  const double u = std::pow(t / curve.lambda, curve.kappa);
  return curve.kappa / t * u * std::exp(-u);
}

double logit(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("logit: p must lie strictly in (0,1)");
  return std::log(p) - std::log1p(-p);
}

double inv_logit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

const char* modality_name(Modality m) {
  switch (m) {
    case Modality::Penetrance: return "penetrance";
    case Modality::RR: return "RR";
    case Modality::SIR: return "SIR";
    case Modality::OR: return "OR";
  }
  return "?";
}

Modality modality_from_name(const std::string& name) {
  if (name == "penetrance") return Modality::Penetrance;
  if (name == "RR") return Modality::RR;
  if (name == "SIR") return Modality::SIR;
  if (name == "OR") return Modality::OR;
  fail("unknown modality '" + name + "' (expected penetrance, RR, SIR or OR)");
}

double BaselinePenetrance::cdf(double t) const {
  const double raw = weibull_cdf(curve, t);
  if (!truncation_age) return raw;
  if (t >= *truncation_age) return 1.0;
  return raw / weibull_cdf(curve, *truncation_age);
}

double BaselinePenetrance::pdf(double t) const {
  const double raw = weibull_pdf(curve, t);
  if (!truncation_age) return raw;
  if (t > *truncation_age) return 0.0;
  return raw / weibull_cdf(curve, *truncation_age);
}

namespace {

void validate_age_summary(const AgeSummary& s, const std::string& ctx) {
  require(std::isfinite(s.mean) && s.mean > 0.0 && s.mean < 120.0, ctx + ": age mean must lie in (0,120)");
  require(std::isfinite(s.sd) && s.sd > 0.0, ctx + ": age sd must be > 0");
}

void validate_penetrance_report(const PenetranceReport& r, const std::string& ctx) {
  const std::size_t m = r.ages.size();
  require(m >= 1, ctx + ": penetrance report needs at least one age");
  require(r.values.size() == m && r.ci_low.size() == m && r.ci_high.size() == m,
          ctx + ": ages/values/ci_low/ci_high must share one length");
  for (std::size_t i = 0; i < m; ++i) {
    require(std::isfinite(r.ages[i]) && r.ages[i] > 0.0, ctx + ": ages must be positive");
    if (i > 0) require(r.ages[i] > r.ages[i - 1], ctx + ": ages must be strictly increasing");
    require(r.values[i] > 0.0 && r.values[i] < 1.0,
            ctx + ": penetrance values must lie strictly in (0,1)");
    require(r.ci_low[i] > 0.0 && r.ci_high[i] < 1.0, ctx + ": CI bounds must lie strictly in (0,1)");
    require(r.ci_low[i] < r.values[i] && r.values[i] < r.ci_high[i],
            ctx + ": CI must strictly bracket the value");
  }
}

void validate_ratio_report(const RatioReport& r, const std::string& ctx) {
  require(std::isfinite(r.estimate) && r.estimate > 0.0, ctx + ": ratio estimate must be > 0");
  const bool has_ci = r.ci_low.has_value() && r.ci_high.has_value();
  require(r.ci_low.has_value() == r.ci_high.has_value(), ctx + ": CI bounds must come as a pair");
  require(has_ci || r.counts.has_value(),
          ctx + ": need a CI pair or a 2x2 count table to derive a standard error");
  if (has_ci) {
    require(*r.ci_low > 0.0 && *r.ci_low < r.estimate && r.estimate < *r.ci_high,
            ctx + ": CI must satisfy 0 < low < estimate < high");
  }
  if (r.counts) {
    const CountTable& t = *r.counts;
    require(t.carrier_cases >= 0 && t.carrier_controls >= 0 && t.noncarrier_cases >= 0 &&
                t.noncarrier_controls >= 0,
            ctx + ": table counts must be nonnegative");
  }
}

}  // namespace

void validate_study(const StudyRecord& record) {
  const std::string ctx = "study '" + record.id + "'";
  require(!record.id.empty(), "study id must be nonempty");
  if (record.modality == Modality::Penetrance) {
    require(record.penetrance.has_value(), ctx + ": penetrance study needs a penetrance report");
    require(!record.ratio.has_value(), ctx + ": penetrance study cannot carry a ratio report");
    require(!record.biased, ctx + ": penetrance studies are assumed ascertainment-corrected (biased must be false)");
    validate_penetrance_report(*record.penetrance, ctx);
    require(record.sample_size.has_value() && *record.sample_size > 0,
            ctx + ": penetrance study needs a positive sample_size (carrier count)");
  } else {
    require(record.ratio.has_value(), ctx + ": ratio study needs a ratio report");
    require(!record.penetrance.has_value(), ctx + ": ratio study cannot carry a penetrance report");
    validate_ratio_report(*record.ratio, ctx);
  }
  validate_age_summary(record.ages.cases_carrier, ctx);
  validate_age_summary(record.ages.cases_noncarrier, ctx);
  validate_age_summary(record.ages.controls_carrier, ctx);
  validate_age_summary(record.ages.controls_noncarrier, ctx);
}

void validate_studies(const std::vector<StudyRecord>& records) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    validate_study(records[i]);
    for (std::size_t j = 0; j < i; ++j) {
      if (records[j].id == records[i].id) fail("duplicate study id '" + records[i].id + "'");
    }
  }
}

double normal_quantile_for_level(double level) {
  require(level > 0.0 && level < 1.0, "CI level must lie in (0,1)");
  if (level == 0.95) return kZ95;
  // Acklam's rational approximation of the normal quantile at 1 - (1-level)/2.
  const double p = 1.0 - (1.0 - level) / 2.0;
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

double ci_to_logvar(double transformed_low, double transformed_high, double level) {
  if (!(transformed_low < transformed_high))
    throw std::domain_error("ci_to_logvar: lower bound must be below upper bound");
  const double z = normal_quantile_for_level(level);
  const double sd = (transformed_high - transformed_low) / (2.0 * z);
  return sd * sd;
}

double ci_to_logvar_log(double ci_low, double ci_high, double level) {
  if (!(ci_low > 0.0 && ci_low < ci_high))
    throw std::domain_error("ci_to_logvar_log: need 0 < low < high");
  return ci_to_logvar(std::log(ci_low), std::log(ci_high), level);
}

double ci_to_logvar_logit(double ci_low, double ci_high, double level) {
  if (!(ci_low < ci_high)) throw std::domain_error("ci_to_logvar_logit: need low < high");
  return ci_to_logvar(logit(ci_low), logit(ci_high), level);
}

OrEstimate continuity_corrected_or(const CountTable& counts) {
  const double a = static_cast<double>(counts.carrier_cases) + 0.5;
  const double b = static_cast<double>(counts.carrier_controls) + 0.5;
  const double c = static_cast<double>(counts.noncarrier_cases) + 0.5;
  const double d = static_cast<double>(counts.noncarrier_controls) + 0.5;
  OrEstimate out;
  out.estimate = (a * d) / (b * c);
  out.log_se = std::sqrt(1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d);
  return out;
}

}  // namespace penmeta

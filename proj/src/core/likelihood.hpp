#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/domain.hpp"

namespace penmeta {

/// Per-study sampled parameters; bias present iff the study is biased (and
/// bias is being adjusted for).
struct StudyParams {
  WeibullCurve curve;
  std::optional<double> bias;
};

/// Logit-scale covariance of a penetrance study's reported values.
struct PenetranceCov {
  Eigen::MatrixXd matrix;
};

/// Uniform grid for composite Simpson integration of the bridge integrals.
struct QuadratureSpec {
  double lower = 0.0;
  double upper = 120.0;
  int points = 1201;  // must be odd and >= 3
};

void validate_quadrature(const QuadratureSpec& quad);

/// Ratio of odds implied by the penetrance curves and the study's age
/// distributions:
///   [int f_s q_c1 / int f_0 q_c0] / [int (1-F_s) q_h1 / int (1-F_0) q_h0].
double nu_or(const WeibullCurve& curve, const BaselinePenetrance& baseline,
             const AgeDistributions& ages, const QuadratureSpec& quad);

/// log( int f_s q_1 / int f_0 q_0 ) with q_1 = cases_carrier and
/// q_0 = cases_noncarrier. SIR studies route here unchanged.
double mean_log_rr(const WeibullCurve& curve, const BaselinePenetrance& baseline,
                   const AgeDistributions& ages, const QuadratureSpec& quad);

/// Variance of the log reported ratio: CI-derived when a CI is present,
/// otherwise from the continuity-corrected 2x2 table.
double ratio_log_variance(const RatioReport& report);

/// Normal log-density of log(estimate) around the bridge mean (+ bias).
double loglik_ratio_study(const StudyRecord& record, const StudyParams& params,
                          const BaselinePenetrance& baseline, const QuadratureSpec& quad);

/// W*: diagonal from the reported CIs (logit scale); off-diagonals from the
/// empirical correlation of logit Kaplan-Meier estimates over `sims`
/// synthetic cohorts of `sample_size` carriers drawn from `proto_curve`.
PenetranceCov build_penetrance_cov(const PenetranceReport& report, std::int64_t sample_size,
                                   const WeibullCurve& proto_curve, int sims, std::uint64_t seed);

/// MVN log-density of the logit reported values at the logit model
/// penetrances; -inf when the model cdf is numerically 0 or 1 at some age.
double loglik_penetrance_study(const StudyRecord& record, const StudyParams& params,
                               const PenetranceCov& cov);

/// Sum of per-study terms in study order; -inf if any term is -inf.
double joint_loglik(std::span<const StudyRecord> records, std::span<const StudyParams> params,
                    const BaselinePenetrance& baseline, const QuadratureSpec& quad,
                    const std::map<std::string, PenetranceCov>& covs);

/// logit(F(age)) computed stably from u = (age/lambda)^kappa; -inf / +inf
/// when the cdf is numerically 0 / 1.
double logit_weibull_cdf(const WeibullCurve& curve, double age);

namespace detail {

/// Precomputed per-study quadrature state: age-density grids and the
/// parameter-independent baseline denominators. The MCMC sweep evaluates
/// only the carrier-curve numerators per proposal.
class RatioBridge {
 public:
  RatioBridge(Modality modality, const AgeDistributions& ages, const BaselinePenetrance& baseline,
              const QuadratureSpec& quad);

  /// log nu (OR) or log mean RR at the given curve.
  double log_mean(const WeibullCurve& curve) const;

 private:
  bool is_or_;
  std::vector<double> log_x_;     // log of grid nodes (node 0 handled apart)
  std::vector<double> inv_x_;
  std::vector<double> w_cases_;   // simpson weight * q_c1 (or q_1)
  std::vector<double> w_healthy_; // simpson weight * q_h1 (OR only)
  double log_den_cases_ = 0.0;
  double log_den_healthy_ = 0.0;
};

}  // namespace detail

}  // namespace penmeta

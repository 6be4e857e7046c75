#include "core/likelihood.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "core/rng.hpp"
#include "core/stats.hpp"
#include "core/survival.hpp"

namespace penmeta {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kDegenerate = 1e-300;

std::vector<double> simpson_nodes(const QuadratureSpec& quad) {
  std::vector<double> x(static_cast<std::size_t>(quad.points));
  const double h = (quad.upper - quad.lower) / static_cast<double>(quad.points - 1);
  for (int i = 0; i < quad.points; ++i) x[static_cast<std::size_t>(i)] = quad.lower + h * i;
  return x;
}

std::vector<double> simpson_weights(const QuadratureSpec& quad) {
  std::vector<double> w(static_cast<std::size_t>(quad.points), 1.0);
  for (int i = 1; i + 1 < quad.points; ++i) w[static_cast<std::size_t>(i)] = (i % 2 == 1) ? 4.0 : 2.0;
  const double h = (quad.upper - quad.lower) / static_cast<double>(quad.points - 1);
  for (auto& v : w) v *= h / 3.0;
  return w;
}

double normal_density(double x, const AgeSummary& law) {
  const double z = (x - law.mean) / law.sd;
  return std::exp(-0.5 * z * z) / (law.sd * std::sqrt(2.0 * std::numbers::pi));
}

[[noreturn]] void degenerate(const char* which) {
  throw std::runtime_error(std::string("bridge integral degenerate: ") + which);
}

}  // namespace

void validate_quadrature(const QuadratureSpec& quad) {
  if (!(quad.lower < quad.upper)) throw std::invalid_argument("quadrature: lower must be < upper");
  if (quad.points < 3 || quad.points % 2 == 0)
    throw std::invalid_argument("quadrature: points must be odd and >= 3");
}

double logit_weibull_cdf(const WeibullCurve& curve, double age) {
  const double u = std::pow(age / curve.lambda, curve.kappa);
  if (u <= 0.0) return kNegInf;
  if (std::isinf(u)) return std::numeric_limits<double>::infinity();
  const double log_f = std::log(-std::expm1(-u));  // log F
  if (!std::isfinite(log_f)) return kNegInf;
  return log_f + u;  // log F - log(1-F), with log(1-F) = -u
}

namespace detail {

RatioBridge::RatioBridge(Modality modality, const AgeDistributions& ages,
                         const BaselinePenetrance& baseline, const QuadratureSpec& quad) {
  validate_quadrature(quad);
  is_or_ = modality == Modality::OR;
  const auto x = simpson_nodes(quad);
  const auto w = simpson_weights(quad);
  const std::size_t n = x.size();
  log_x_.resize(n);
  inv_x_.resize(n);
  w_cases_.resize(n);
  if (is_or_) w_healthy_.resize(n);

  double den_cases = 0.0;
  double den_healthy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    // node 0 contributes nothing to the onset-density integrals
    log_x_[i] = x[i] > 0.0 ? std::log(x[i]) : 0.0;
    inv_x_[i] = x[i] > 0.0 ? 1.0 / x[i] : 0.0;
    w_cases_[i] = w[i] * normal_density(x[i], ages.cases_carrier);
    if (x[i] > 0.0)
      den_cases += w[i] * normal_density(x[i], ages.cases_noncarrier) * baseline.pdf(x[i]);
    if (is_or_) {
      w_healthy_[i] = w[i] * normal_density(x[i], ages.controls_carrier);
      den_healthy +=
          w[i] * normal_density(x[i], ages.controls_noncarrier) * (1.0 - baseline.cdf(x[i]));
    }
  }
  if (!(den_cases > kDegenerate)) degenerate("int f0 q_c0");
  log_den_cases_ = std::log(den_cases);
  if (is_or_) {
    if (!(den_healthy > kDegenerate)) degenerate("int (1-F0) q_h0");
    log_den_healthy_ = std::log(den_healthy);
  }
}

double RatioBridge::log_mean(const WeibullCurve& curve) const {
  const std::size_t n = log_x_.size();
  const double log_lambda = std::log(curve.lambda);
  const double kappa = curve.kappa;
  double num_cases = 0.0;
  double num_healthy = 0.0;
  if (is_or_) {
    for (std::size_t i = 1; i < n; ++i) {
      const double u = std::exp(kappa * (log_x_[i] - log_lambda));
      const double surv = std::exp(-u);
      num_cases += w_cases_[i] * kappa * inv_x_[i] * u * surv;
      num_healthy += w_healthy_[i] * surv;
    }
    // node 0: f(0) = 0 for kappa > 1 and q(0) is negligible; 1-F(0) = 1
    num_healthy += w_healthy_[0];
    if (!(num_cases > kDegenerate)) degenerate("int f_s q_c1");
    if (!(num_healthy > kDegenerate)) degenerate("int (1-F_s) q_h1");
    return (std::log(num_cases) - log_den_cases_) -
           (std::log(num_healthy) - log_den_healthy_);
  }
  for (std::size_t i = 1; i < n; ++i) {
    const double u = std::exp(kappa * (log_x_[i] - log_lambda));
    num_cases += w_cases_[i] * kappa * inv_x_[i] * u * std::exp(-u);
  }
  if (!(num_cases > kDegenerate)) degenerate("int f_s q_1");
  return std::log(num_cases) - log_den_cases_;
}

}  // namespace detail

double nu_or(const WeibullCurve& curve, const BaselinePenetrance& baseline,
             const AgeDistributions& ages, const QuadratureSpec& quad) {
  detail::RatioBridge bridge(Modality::OR, ages, baseline, quad);
  return std::exp(bridge.log_mean(curve));
}

double mean_log_rr(const WeibullCurve& curve, const BaselinePenetrance& baseline,
                   const AgeDistributions& ages, const QuadratureSpec& quad) {
  detail::RatioBridge bridge(Modality::RR, ages, baseline, quad);
  return bridge.log_mean(curve);
}

double ratio_log_variance(const RatioReport& report) {
  if (report.ci_low && report.ci_high) return ci_to_logvar_log(*report.ci_low, *report.ci_high);
  if (report.counts) {
    const double se = continuity_corrected_or(*report.counts).log_se;
    return se * se;
  }
  throw std::invalid_argument("ratio study carries neither a CI nor a count table");
}

double loglik_ratio_study(const StudyRecord& record, const StudyParams& params,
                          const BaselinePenetrance& baseline, const QuadratureSpec& quad) {
  if (record.modality == Modality::Penetrance)
    throw std::invalid_argument("loglik_ratio_study: not a ratio study");
  detail::RatioBridge bridge(record.modality, record.ages, baseline, quad);
  const double mean = bridge.log_mean(params.curve) + params.bias.value_or(0.0);
  const double w = ratio_log_variance(*record.ratio);
  return normal_logpdf(std::log(record.ratio->estimate), mean, w);
}

PenetranceCov build_penetrance_cov(const PenetranceReport& report, std::int64_t sample_size,
                                   const WeibullCurve& proto_curve, int sims, std::uint64_t seed) {
  const std::size_t m = report.ages.size();
  Eigen::VectorXd sd(m);
  for (std::size_t i = 0; i < m; ++i)
    sd[static_cast<Eigen::Index>(i)] =
        std::sqrt(ci_to_logvar_logit(report.ci_low[i], report.ci_high[i]));

  PenetranceCov out;
  out.matrix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  if (m == 1) {
    out.matrix(0, 0) = sd[0] * sd[0];
    return out;
  }

  constexpr int kMaxRetries = 200;
  Rng rng(seed);
  Eigen::MatrixXd samples(sims, static_cast<Eigen::Index>(m));
  const AgeSummary censor_law{85.0, 10.0};
  for (int s = 0; s < sims; ++s) {
    int attempts = 0;
    for (;;) {
      auto cohort = generate_carrier_cohort(proto_curve, static_cast<int>(sample_size),
                                            censor_law, 95.0, rng);
      KaplanMeier km(std::move(cohort));
      bool ok = true;
      for (std::size_t i = 0; i < m && ok; ++i) {
        const double surv = km.survival(report.ages[i]);
        ok = km.at_risk(report.ages[i]) >= 1 && surv > 0.0 && surv < 1.0;
        if (ok) samples(s, static_cast<Eigen::Index>(i)) = logit(1.0 - surv);
      }
      if (ok) break;
      if (++attempts > kMaxRetries)
        throw std::runtime_error("build_penetrance_cov: degenerate cohorts at sample size " +
                                 std::to_string(sample_size));
    }
  }

  const Eigen::RowVectorXd col_mean = samples.colwise().mean();
  const Eigen::MatrixXd centered = samples.rowwise() - col_mean;
  Eigen::MatrixXd corr = (centered.transpose() * centered) / static_cast<double>(sims - 1);
  const Eigen::VectorXd sim_sd = corr.diagonal().cwiseSqrt();
  for (Eigen::Index i = 0; i < corr.rows(); ++i)
    for (Eigen::Index j = 0; j < corr.cols(); ++j) corr(i, j) /= sim_sd[i] * sim_sd[j];

  out.matrix = sd.asDiagonal() * corr * sd.asDiagonal();
  out.matrix = 0.5 * (out.matrix + out.matrix.transpose().eval());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(out.matrix);
  const double floor = 1e-8 * eig.eigenvalues().maxCoeff();
  if (eig.eigenvalues().minCoeff() < floor) {
    Eigen::VectorXd vals = eig.eigenvalues().cwiseMax(floor);
    out.matrix = eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
    // the repair must leave the CI-derived variances on the diagonal
    for (Eigen::Index i = 0; i < out.matrix.rows(); ++i) out.matrix(i, i) = sd[i] * sd[i];
  }
  return out;
}

double loglik_penetrance_study(const StudyRecord& record, const StudyParams& params,
                               const PenetranceCov& cov) {
  if (record.modality != Modality::Penetrance || !record.penetrance)
    throw std::invalid_argument("loglik_penetrance_study: not a penetrance study");
  const PenetranceReport& rep = *record.penetrance;
  const Eigen::Index m = static_cast<Eigen::Index>(rep.ages.size());
  Eigen::VectorXd diff(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double mu = logit_weibull_cdf(params.curve, rep.ages[static_cast<std::size_t>(i)]);
    if (!std::isfinite(mu)) return kNegInf;
    diff[i] = logit(rep.values[static_cast<std::size_t>(i)]) - mu;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov.matrix);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("loglik_penetrance_study: covariance is not positive definite");
  const Eigen::VectorXd z = llt.matrixL().solve(diff);
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) log_det += std::log(llt.matrixL()(i, i));
  return -0.5 * z.squaredNorm() - log_det -
         0.5 * static_cast<double>(m) * std::log(2.0 * std::numbers::pi);
}

double joint_loglik(std::span<const StudyRecord> records, std::span<const StudyParams> params,
                    const BaselinePenetrance& baseline, const QuadratureSpec& quad,
                    const std::map<std::string, PenetranceCov>& covs) {
  if (records.size() != params.size())
    throw std::invalid_argument("joint_loglik: records and params are misaligned");
  double total = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    double term;
    if (records[i].modality == Modality::Penetrance) {
      const auto it = covs.find(records[i].id);
      if (it == covs.end())
        throw std::invalid_argument("joint_loglik: missing covariance for study '" +
                                    records[i].id + "'");
      term = loglik_penetrance_study(records[i], params[i], it->second);
    } else {
      term = loglik_ratio_study(records[i], params[i], baseline, quad);
    }
    if (term == kNegInf) return kNegInf;
    total += term;
  }
  return total;
}

}  // namespace penmeta

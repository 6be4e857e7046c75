#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "core/domain.hpp"
#include "core/likelihood.hpp"
#include "core/rng.hpp"

namespace penmeta {

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

struct HyperPriorBounds {
  Interval a{7.5, 27.5};
  Interval b{0.15, 0.25};
  Interval c{43.0, 63.0};
  Interval d{1.32, 2.02};
};

struct BiasPriorSpec {
  double sigma_or = 0.9;
  double sigma_rr = 0.5;
};

struct HyperParams {
  double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
};

struct ChainState {
  std::vector<StudyParams> params;
  HyperParams hyper;
  std::int64_t iteration = 0;
};

/// Sampler run lengths and the approach switches: bias_adjust=false realizes
/// Approach 2 (biased studies kept, B_s pinned at 0), exclude_biased realizes
/// Approach 3.
struct RunConfig {
  int iterations = 30000;
  int burn_in = 15000;
  int chains = 4;
  std::uint64_t seed = 0;
  int thin = 1;
  bool bias_adjust = true;
  bool exclude_biased = false;
};

void validate_run_config(const RunConfig& config);

/// Everything about the model that is not data or run length.
struct ModelSpec {
  HyperPriorBounds bounds;
  BiasPriorSpec bias_prior;
  BaselinePenetrance baseline;
  QuadratureSpec quad;
  int cov_sims = 500;
  WeibullCurve cov_proto{4.55, 95.25};
};

/// Joint log prior: Gamma(a,b) on each kappa_s, Gamma(c,d) on each lambda_s,
/// half-normal on each tracked bias, uniform hyperpriors (-inf off support).
/// `modalities` selects sigma_or vs sigma_rr per study.
double log_prior(const ChainState& state, std::span<const Modality> modalities,
                 const HyperPriorBounds& bounds, const BiasPriorSpec& bias_prior);

/// Supplement proposal-variance schedules.
double kappa_proposal_variance(Modality modality, double kappa);
double lambda_proposal_variance(Modality modality, double lambda);

struct AcceptanceRates {
  double kappa = 0.0, lambda = 0.0, bias = 0.0;
  double hyper_a = 0.0, hyper_b = 0.0, hyper_c = 0.0, hyper_d = 0.0;
};

struct ChainTrace {
  std::vector<std::string> study_ids;
  std::vector<Modality> study_modalities;
  std::vector<bool> bias_tracked;  // per study: has a bias column in the trace
  std::vector<std::int64_t> iterations;
  std::vector<HyperParams> hyper;
  std::vector<std::vector<double>> kappa;    // [draw][study]
  std::vector<std::vector<double>> lambda_;  // [draw][study]
  std::vector<std::vector<double>> bias;     // [draw][study], 0 where untracked
  AcceptanceRates acceptance;
};

/// One Metropolis-within-Gibbs chain over prepared studies. Exposed so the
/// kernel stationarity tests can drive individual updates on pure-prior
/// targets.
class GibbsSampler {
 public:
  struct Study {
    std::string id;
    Modality modality = Modality::OR;
    bool track_bias = false;
    double sigma_bias = 0.9;
    bool flat_likelihood = false;  // test harness: likelihood identically 0
    // ratio studies
    double log_estimate = 0.0;
    double w_star = 1.0;
    std::shared_ptr<const detail::RatioBridge> bridge;
    // penetrance studies
    Eigen::MatrixXd chol_lower;        // L with L L^T = W*
    Eigen::VectorXd logit_values;
    std::vector<double> ages;
    double mvn_const = 0.0;            // -m/2 log(2 pi) - log det L
  };

  GibbsSampler(std::vector<Study> studies, HyperPriorBounds bounds, std::uint64_t seed);

  /// Hyper at interval midpoints, kappa = a*b, lambda = c*d, bias at the
  /// half-normal prior mean; then redraws study params from their priors (up
  /// to `max_redraws`) if the joint target is not finite.
  void initialize(int max_redraws = 100);

  bool update_kappa(int study);
  bool update_lambda(int study);
  bool update_bias(int study);
  /// which: 0=a, 1=b, 2=c, 3=d.
  bool update_hyper(int which);
  void sweep();

  const ChainState& state() const { return state_; }
  ChainState& mutable_state() { return state_; }
  /// Recompute likelihood caches after external edits to the state.
  void refresh();

  double study_loglik(int study) const { return loglik_[static_cast<std::size_t>(study)]; }
  int study_count() const { return static_cast<int>(studies_.size()); }
  const Study& study(int s) const { return studies_[static_cast<std::size_t>(s)]; }
  AcceptanceRates acceptance_rates() const;
  Rng& rng() { return rng_; }

 private:
  double eval_loglik(int study, const WeibullCurve& curve, double bias, double* mean_out) const;
  double ratio_loglik_from_mean(int study, double mean, double bias) const;

  std::vector<Study> studies_;
  HyperPriorBounds bounds_;
  ChainState state_;
  std::vector<double> loglik_;
  std::vector<double> ratio_mean_;
  Rng rng_;
  // acceptance bookkeeping: attempts/accepts per family
  std::int64_t att_[7] = {0, 0, 0, 0, 0, 0, 0};
  std::int64_t acc_[7] = {0, 0, 0, 0, 0, 0, 0};
};

/// Runs one chain: applies the approach switches to the record set, sweeps
/// `config.iterations` times and returns the post-burn-in thinned trace.
ChainTrace run_chain(std::span<const StudyRecord> records, const RunConfig& config,
                     const ModelSpec& model, const std::map<std::string, PenetranceCov>& covs,
                     std::uint64_t chain_seed);

/// Potential scale reduction factor over >= 2 equal-length chains.
/// Throws std::invalid_argument on degenerate input (zero within-chain or
/// zero between-chain variance).
double gelman_rubin(std::span<const std::vector<double>> chains);

}  // namespace penmeta

#include "core/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "core/stats.hpp"

namespace penmeta {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kBiasScaleFloor = 1e-3;
const double kLn500 = std::log(500.0);

double hyper_midpoint(const Interval& iv) { return 0.5 * (iv.lower + iv.upper); }

double kappa_offset(Modality m) {
  switch (m) {
    case Modality::Penetrance: return 0.01;
    case Modality::RR:
    case Modality::SIR: return 2000.0;
    case Modality::OR: return 200000.0;
  }
  return 0.0;
}

double lambda_power(Modality m) {
  switch (m) {
    case Modality::Penetrance: return 0.4;
    case Modality::RR:
    case Modality::SIR: return 0.9;
    case Modality::OR: return 1.2;
  }
  return 0.0;
}

}  // namespace

void validate_run_config(const RunConfig& config) {
  if (config.iterations <= 0) throw std::invalid_argument("iterations must be positive");
  if (config.burn_in < 0 || config.burn_in >= config.iterations)
    throw std::invalid_argument("burn-in must satisfy 0 <= burn_in < iterations");
  if (config.chains <= 0) throw std::invalid_argument("chains must be positive");
  if (config.thin <= 0) throw std::invalid_argument("thin must be positive");
  if (config.bias_adjust && config.exclude_biased)
    throw std::invalid_argument("bias adjustment and exclusion are mutually exclusive");
}

double kappa_proposal_variance(Modality modality, double kappa) {
  return std::log(kappa + kappa_offset(modality)) / kLn500;
}

double lambda_proposal_variance(Modality modality, double lambda) {
  return std::pow(lambda, lambda_power(modality));
}

double log_prior(const ChainState& state, std::span<const Modality> modalities,
                 const HyperPriorBounds& bounds, const BiasPriorSpec& bias_prior) {
  const HyperParams& h = state.hyper;
  auto inside = [](double v, const Interval& iv) { return v >= iv.lower && v <= iv.upper; };
  if (!inside(h.a, bounds.a) || !inside(h.b, bounds.b) || !inside(h.c, bounds.c) ||
      !inside(h.d, bounds.d))
    return kNegInf;
  if (modalities.size() != state.params.size())
    throw std::invalid_argument("log_prior: modalities and params are misaligned");
  double total = 0.0;
  auto width = [](const Interval& iv) { return iv.upper - iv.lower; };
  total -= std::log(width(bounds.a)) + std::log(width(bounds.b)) + std::log(width(bounds.c)) +
           std::log(width(bounds.d));
  for (std::size_t s = 0; s < state.params.size(); ++s) {
    const StudyParams& p = state.params[s];
    total += gamma_logpdf(p.curve.kappa, h.a, h.b);
    total += gamma_logpdf(p.curve.lambda, h.c, h.d);
    if (p.bias) {
      const double sigma =
          modalities[s] == Modality::OR ? bias_prior.sigma_or : bias_prior.sigma_rr;
      total += half_normal_logpdf(*p.bias, sigma);
    }
  }
  return total;
}

GibbsSampler::GibbsSampler(std::vector<Study> studies, HyperPriorBounds bounds, std::uint64_t seed)
    : studies_(std::move(studies)), bounds_(bounds), rng_(seed) {
  state_.params.resize(studies_.size());
  loglik_.assign(studies_.size(), 0.0);
  ratio_mean_.assign(studies_.size(), 0.0);
}

double GibbsSampler::ratio_loglik_from_mean(int study, double mean, double bias) const {
  const Study& st = studies_[static_cast<std::size_t>(study)];
  return normal_logpdf(st.log_estimate, mean + bias, st.w_star);
}

double GibbsSampler::eval_loglik(int study, const WeibullCurve& curve, double bias,
                                 double* mean_out) const {
  const Study& st = studies_[static_cast<std::size_t>(study)];
  if (mean_out) *mean_out = 0.0;
  if (st.flat_likelihood) return 0.0;
  if (st.bridge) {
    double mean;
    try {
      mean = st.bridge->log_mean(curve);
    } catch (const std::runtime_error&) {
      return kNegInf;  // underflowed integral: reject the proposal
    }
    if (mean_out) *mean_out = mean;
    return ratio_loglik_from_mean(study, mean, bias);
  }
  // penetrance study
  const Eigen::Index m = st.logit_values.size();
  Eigen::VectorXd diff(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double mu = logit_weibull_cdf(curve, st.ages[static_cast<std::size_t>(i)]);
    if (!std::isfinite(mu)) return kNegInf;
    diff[i] = st.logit_values[i] - mu;
  }
  const Eigen::VectorXd z =
      st.chol_lower.triangularView<Eigen::Lower>().solve(diff);
  return st.mvn_const - 0.5 * z.squaredNorm();
}

void GibbsSampler::refresh() {
  for (std::size_t s = 0; s < studies_.size(); ++s) {
    loglik_[s] = eval_loglik(static_cast<int>(s), state_.params[s].curve,
                             state_.params[s].bias.value_or(0.0), &ratio_mean_[s]);
  }
}

void GibbsSampler::initialize(int max_redraws) {
  state_.hyper = {hyper_midpoint(bounds_.a), hyper_midpoint(bounds_.b), hyper_midpoint(bounds_.c),
                  hyper_midpoint(bounds_.d)};
  const double kappa0 = state_.hyper.a * state_.hyper.b;
  const double lambda0 = state_.hyper.c * state_.hyper.d;
  for (std::size_t s = 0; s < studies_.size(); ++s) {
    state_.params[s].curve = {kappa0, lambda0};
    state_.params[s].bias =
        studies_[s].track_bias
            ? std::optional<double>(studies_[s].sigma_bias * std::sqrt(2.0 / std::numbers::pi))
            : std::nullopt;
  }
  state_.iteration = 0;
  refresh();
  for (std::size_t s = 0; s < studies_.size(); ++s) {
    int tries = 0;
    while (!std::isfinite(loglik_[s])) {
      if (++tries > max_redraws)
        throw std::runtime_error("chain initialization failed for study '" + studies_[s].id +
                                 "': likelihood not finite after prior redraws");
      state_.params[s].curve.kappa = rng_.gamma(state_.hyper.a, state_.hyper.b);
      state_.params[s].curve.lambda = rng_.gamma(state_.hyper.c, state_.hyper.d);
      loglik_[s] = eval_loglik(static_cast<int>(s), state_.params[s].curve,
                               state_.params[s].bias.value_or(0.0), &ratio_mean_[s]);
    }
  }
}

bool GibbsSampler::update_kappa(int study) {
  const std::size_t s = static_cast<std::size_t>(study);
  const Study& st = studies_[s];
  StudyParams& p = state_.params[s];
  ++att_[0];

  const double cur = p.curve.kappa;
  const double var_cur = kappa_proposal_variance(st.modality, cur);
  const double prop = rng_.gamma(cur * cur / var_cur, var_cur / cur);
  const double var_prop = kappa_proposal_variance(st.modality, prop);

  double mean_prop;
  const double ll_prop =
      eval_loglik(study, {prop, p.curve.lambda}, p.bias.value_or(0.0), &mean_prop);
  if (ll_prop == kNegInf) return false;

  double log_acc = ll_prop - loglik_[s];
  log_acc += gamma_logpdf(prop, state_.hyper.a, state_.hyper.b) -
             gamma_logpdf(cur, state_.hyper.a, state_.hyper.b);
  // asymmetric Gamma proposal correction
  log_acc += gamma_logpdf(cur, prop * prop / var_prop, var_prop / prop) -
             gamma_logpdf(prop, cur * cur / var_cur, var_cur / cur);

  if (std::log(rng_.uniform_pos()) < log_acc) {
    p.curve.kappa = prop;
    loglik_[s] = ll_prop;
    ratio_mean_[s] = mean_prop;
    ++acc_[0];
    return true;
  }
  return false;
}

bool GibbsSampler::update_lambda(int study) {
  const std::size_t s = static_cast<std::size_t>(study);
  const Study& st = studies_[s];
  StudyParams& p = state_.params[s];
  ++att_[1];

  const double cur = p.curve.lambda;
  const double var_cur = lambda_proposal_variance(st.modality, cur);
  const double prop = rng_.gamma(cur * cur / var_cur, var_cur / cur);
  const double var_prop = lambda_proposal_variance(st.modality, prop);

  double mean_prop;
  const double ll_prop =
      eval_loglik(study, {p.curve.kappa, prop}, p.bias.value_or(0.0), &mean_prop);
  if (ll_prop == kNegInf) return false;

  double log_acc = ll_prop - loglik_[s];
  log_acc += gamma_logpdf(prop, state_.hyper.c, state_.hyper.d) -
             gamma_logpdf(cur, state_.hyper.c, state_.hyper.d);
  log_acc += gamma_logpdf(cur, prop * prop / var_prop, var_prop / prop) -
             gamma_logpdf(prop, cur * cur / var_cur, var_cur / cur);

  if (std::log(rng_.uniform_pos()) < log_acc) {
    p.curve.lambda = prop;
    loglik_[s] = ll_prop;
    ratio_mean_[s] = mean_prop;
    ++acc_[1];
    return true;
  }
  return false;
}

bool GibbsSampler::update_bias(int study) {
  const std::size_t s = static_cast<std::size_t>(study);
  const Study& st = studies_[s];
  StudyParams& p = state_.params[s];
  if (!p.bias) throw std::logic_error("update_bias: study carries no bias term");
  ++att_[2];

  const double cur = *p.bias;
  const double scale_cur = std::max(0.836 * cur, kBiasScaleFloor);
  const double prop = rng_.half_normal(scale_cur);
  const double scale_prop = std::max(0.836 * prop, kBiasScaleFloor);

  const double ll_prop = st.flat_likelihood
                             ? 0.0
                             : ratio_loglik_from_mean(study, ratio_mean_[s], prop);

  double log_acc = ll_prop - loglik_[s];
  log_acc += half_normal_logpdf(prop, st.sigma_bias) - half_normal_logpdf(cur, st.sigma_bias);
  // half-normal proposal centered at 0; the scale depends on the current point
  log_acc += half_normal_logpdf(cur, scale_prop) - half_normal_logpdf(prop, scale_cur);

  if (std::log(rng_.uniform_pos()) < log_acc) {
    p.bias = prop;
    loglik_[s] = ll_prop;
    ++acc_[2];
    return true;
  }
  return false;
}

bool GibbsSampler::update_hyper(int which) {
  const Interval iv = which == 0 ? bounds_.a : which == 1 ? bounds_.b : which == 2 ? bounds_.c : bounds_.d;
  const double half_width = which == 0 ? 9.0 : which == 1 ? 0.04 : which == 2 ? 8.0 : 0.22;
  double& value = which == 0   ? state_.hyper.a
                  : which == 1 ? state_.hyper.b
                  : which == 2 ? state_.hyper.c
                               : state_.hyper.d;
  ++att_[3 + which];

  const double lo_cur = std::max(iv.lower, value - half_width);
  const double hi_cur = std::min(value + half_width, iv.upper);
  const double prop = rng_.uniform(lo_cur, hi_cur);
  const double lo_prop = std::max(iv.lower, prop - half_width);
  const double hi_prop = std::min(prop + half_width, iv.upper);

  const bool kappa_side = which < 2;
  double log_acc = 0.0;
  for (std::size_t s = 0; s < studies_.size(); ++s) {
    const StudyParams& p = state_.params[s];
    if (kappa_side) {
      const double b = which == 1 ? prop : state_.hyper.b;
      const double a = which == 0 ? prop : state_.hyper.a;
      log_acc += gamma_logpdf(p.curve.kappa, a, b) -
                 gamma_logpdf(p.curve.kappa, state_.hyper.a, state_.hyper.b);
    } else {
      const double d = which == 3 ? prop : state_.hyper.d;
      const double c = which == 2 ? prop : state_.hyper.c;
      log_acc += gamma_logpdf(p.curve.lambda, c, d) -
                 gamma_logpdf(p.curve.lambda, state_.hyper.c, state_.hyper.d);
    }
  }
  // q(cur | prop) / q(prop | cur) for the boundary-clipped uniform window
  log_acc += std::log(hi_cur - lo_cur) - std::log(hi_prop - lo_prop);

  if (std::log(rng_.uniform_pos()) < log_acc) {
    value = prop;
    ++acc_[3 + which];
    return true;
  }
  return false;
}

void GibbsSampler::sweep() {
  for (int s = 0; s < study_count(); ++s) {
    update_kappa(s);
    update_lambda(s);
    if (studies_[static_cast<std::size_t>(s)].track_bias) update_bias(s);
  }
  for (int which = 0; which < 4; ++which) update_hyper(which);
  ++state_.iteration;
}

AcceptanceRates GibbsSampler::acceptance_rates() const {
  auto rate = [this](int k) {
    return att_[k] == 0 ? 0.0 : static_cast<double>(acc_[k]) / static_cast<double>(att_[k]);
  };
  return {rate(0), rate(1), rate(2), rate(3), rate(4), rate(5), rate(6)};
}

ChainTrace run_chain(std::span<const StudyRecord> records, const RunConfig& config,
                     const ModelSpec& model, const std::map<std::string, PenetranceCov>& covs,
                     std::uint64_t chain_seed) {
  validate_run_config(config);

  // approach resolution, then a fixed sweep order by study id
  std::vector<const StudyRecord*> included;
  for (const auto& r : records) {
    if (config.exclude_biased && r.biased) continue;
    included.push_back(&r);
  }
  std::sort(included.begin(), included.end(),
            [](const StudyRecord* x, const StudyRecord* y) { return x->id < y->id; });

  std::vector<GibbsSampler::Study> studies;
  studies.reserve(included.size());
  for (const StudyRecord* r : included) {
    GibbsSampler::Study st;
    st.id = r->id;
    st.modality = r->modality;
    st.track_bias = r->biased && config.bias_adjust;
    st.sigma_bias =
        r->modality == Modality::OR ? model.bias_prior.sigma_or : model.bias_prior.sigma_rr;
    if (r->modality == Modality::Penetrance) {
      const auto it = covs.find(r->id);
      if (it == covs.end())
        throw std::invalid_argument("run_chain: missing covariance for study '" + r->id + "'");
      const PenetranceReport& rep = *r->penetrance;
      const Eigen::Index m = static_cast<Eigen::Index>(rep.ages.size());
      Eigen::LLT<Eigen::MatrixXd> llt(it->second.matrix);
      if (llt.info() != Eigen::Success)
        throw std::runtime_error("run_chain: covariance for '" + r->id +
                                 "' is not positive definite");
      st.chol_lower = llt.matrixL();
      st.logit_values.resize(m);
      for (Eigen::Index i = 0; i < m; ++i)
        st.logit_values[i] = logit(rep.values[static_cast<std::size_t>(i)]);
      st.ages = rep.ages;
      double log_det = 0.0;
      for (Eigen::Index i = 0; i < m; ++i) log_det += std::log(st.chol_lower(i, i));
      st.mvn_const =
          -0.5 * static_cast<double>(m) * std::log(2.0 * std::numbers::pi) - log_det;
    } else {
      st.log_estimate = std::log(r->ratio->estimate);
      st.w_star = ratio_log_variance(*r->ratio);
      st.bridge = std::make_shared<detail::RatioBridge>(r->modality, r->ages, model.baseline,
                                                        model.quad);
    }
    studies.push_back(std::move(st));
  }

  GibbsSampler sampler(std::move(studies), model.bounds, chain_seed);
  sampler.initialize();

  ChainTrace trace;
  for (int s = 0; s < sampler.study_count(); ++s) {
    trace.study_ids.push_back(sampler.study(s).id);
    trace.study_modalities.push_back(sampler.study(s).modality);
    // approach 2 keeps the bias columns (pinned at zero) so traces show them
    const StudyRecord* rec = included[static_cast<std::size_t>(s)];
    trace.bias_tracked.push_back(rec->biased && !config.exclude_biased);
  }

  const int kept =
      (config.iterations - config.burn_in + config.thin - 1) / config.thin;
  trace.iterations.reserve(static_cast<std::size_t>(kept));
  trace.hyper.reserve(static_cast<std::size_t>(kept));

  for (int t = 1; t <= config.iterations; ++t) {
    sampler.sweep();
    if (t > config.burn_in && (t - config.burn_in - 1) % config.thin == 0) {
      const ChainState& st = sampler.state();
      trace.iterations.push_back(t);
      trace.hyper.push_back(st.hyper);
      std::vector<double> k(st.params.size()), l(st.params.size()), b(st.params.size());
      for (std::size_t i = 0; i < st.params.size(); ++i) {
        k[i] = st.params[i].curve.kappa;
        l[i] = st.params[i].curve.lambda;
        b[i] = st.params[i].bias.value_or(0.0);
      }
      trace.kappa.push_back(std::move(k));
      trace.lambda_.push_back(std::move(l));
      trace.bias.push_back(std::move(b));
    }
  }
  trace.acceptance = sampler.acceptance_rates();
  return trace;
}

double gelman_rubin(std::span<const std::vector<double>> chains) {
  if (chains.size() < 2) throw std::invalid_argument("gelman_rubin: need at least 2 chains");
  const std::size_t n = chains.front().size();
  if (n < 10) throw std::invalid_argument("gelman_rubin: chains must have length >= 10");
  for (const auto& c : chains)
    if (c.size() != n) throw std::invalid_argument("gelman_rubin: chains must share one length");

  const double m = static_cast<double>(chains.size());
  const double nd = static_cast<double>(n);
  std::vector<double> chain_means;
  double within = 0.0;
  for (const auto& c : chains) {
    const double mu = mean(c);
    chain_means.push_back(mu);
    double ss = 0.0;
    for (double v : c) ss += (v - mu) * (v - mu);
    within += ss / (nd - 1.0);
  }
  within /= m;
  if (within <= 0.0) throw std::invalid_argument("gelman_rubin: zero within-chain variance");

  const double grand = mean(chain_means);
  double between = 0.0;
  for (double mu : chain_means) between += (mu - grand) * (mu - grand);
  between *= nd / (m - 1.0);
  if (between <= 0.0)
    throw std::invalid_argument("gelman_rubin: zero between-chain variance (duplicated chains)");

  return std::sqrt(((nd - 1.0) / nd * within + between / nd) / within);
}

}  // namespace penmeta

#include "core/simgen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "core/fit.hpp"
#include "core/stats.hpp"
#include "core/survival.hpp"

namespace penmeta {

namespace {

constexpr int kMaxCohortRetries = 100;

// ATM study table: sample sizes, biased flags (setting 1) and which studies
// report age summaries under scenario 1.
struct OrRow {
  std::int64_t n;
  bool biased_setting1;
};

const std::vector<std::int64_t> kPenetranceSizes = {156, 1160};

struct RatioRow {
  Modality modality;
  std::int64_t n;
  bool age_reported;
};

const std::vector<RatioRow> kRrRows = {
    {Modality::RR, 919, true},  {Modality::RR, 5173, true}, {Modality::RR, 660, false},
    {Modality::SIR, 712, true}, {Modality::SIR, 708, false},
};

const std::vector<OrRow> kOrRows = {
    {95561, false}, {18292, false}, {97997, false}, {64791, false}, {200, false},
    {193, false},   {2231, false},  {2133, false},  {298, false},   {603, false},
    {2434, false},  {2468, false},  {290, false},   {7778, true},   {3978, true},
    {93314, true},  {2406, true},   {948, true},    {446, true},    {322, true},
    {344, true},    {223, true},    {206, true},
};

const std::vector<std::int64_t> kSetting4RrSizes = {400, 1100, 250, 40, 70};

AgeSummary summary_from(std::span<const double> values) {
  if (values.size() < 2) return kDefaultAgeSummary;
  const double sd = sample_sd(values);
  if (!(sd > 0.0)) return kDefaultAgeSummary;
  return {mean(values), sd};
}

void synthesize_ci(RatioReport& report, double log_estimate, double log_se) {
  report.estimate = std::exp(log_estimate);
  report.ci_low = std::exp(log_estimate - kZ95 * log_se);
  report.ci_high = std::exp(log_estimate + kZ95 * log_se);
}

std::vector<std::int32_t> sample_without_replacement(const std::vector<std::int32_t>& pool,
                                                     int k, Rng& rng) {
  if (k > static_cast<int>(pool.size()))
    throw std::runtime_error("sample_without_replacement: pool too small");
  std::vector<std::int32_t> scratch(pool);
  std::vector<std::int32_t> out(static_cast<std::size_t>(k));
  const std::size_t n = scratch.size();
  for (int i = 0; i < k; ++i) {
    const std::size_t j =
        static_cast<std::size_t>(i) +
        static_cast<std::size_t>(rng.uniform() * static_cast<double>(n - static_cast<std::size_t>(i)));
    std::swap(scratch[static_cast<std::size_t>(i)], scratch[j]);
    out[static_cast<std::size_t>(i)] = scratch[static_cast<std::size_t>(i)];
  }
  return out;
}

}  // namespace

std::vector<StudyTemplateEntry> setting_template(int setting) {
  if (setting < 1 || setting > 4) throw std::invalid_argument("setting must be 1..4");
  std::vector<StudyTemplateEntry> tpl;
  for (std::int64_t n : kPenetranceSizes) tpl.push_back({Modality::Penetrance, n, false, false});
  for (const auto& row : kRrRows) tpl.push_back({row.modality, row.n, false, row.age_reported});

  // biased OR subsets per setting; the table's 10 biased studies are the
  // baseline, setting 2 keeps the first 5 of them, setting 3 additionally
  // flips the last 5 unbiased studies
  int biased_seen = 0;
  int unbiased_index = 0;
  const int n_unbiased = static_cast<int>(std::count_if(
      kOrRows.begin(), kOrRows.end(), [](const OrRow& r) { return !r.biased_setting1; }));
  for (const auto& row : kOrRows) {
    bool biased = row.biased_setting1;
    if (setting == 2 && biased) {
      biased = ++biased_seen <= 5;
    } else if (setting == 3 && !biased) {
      biased = ++unbiased_index > n_unbiased - 5;
    }
    tpl.push_back({Modality::OR, row.n, biased, row.n >= 10000});
  }
  if (setting == 4) {
    for (std::size_t i = 0; i < kSetting4RrSizes.size(); ++i)
      tpl.push_back({Modality::RR, kSetting4RrSizes[i], true, kRrRows[i].age_reported});
  }
  return tpl;
}

SimDesign make_design(int setting, int scenario, int replicates, std::vector<int> approaches,
                      std::uint64_t seed) {
  SimDesign design;
  design.setting = setting;
  design.scenario = scenario;
  design.replicates = replicates;
  design.approaches = std::move(approaches);
  design.seed = seed;
  design.study_template = setting_template(setting);
  validate_design(design);
  return design;
}

void validate_design(const SimDesign& design) {
  if (design.setting < 1 || design.setting > 4)
    throw std::invalid_argument("setting must be 1..4");
  if (design.scenario != 1 && design.scenario != 2)
    throw std::invalid_argument("scenario must be 1 or 2");
  if (design.replicates <= 0) throw std::invalid_argument("replicates must be positive");
  if (design.approaches.empty()) throw std::invalid_argument("need at least one approach");
  for (int a : design.approaches)
    if (a < 1 || a > 3) throw std::invalid_argument("approaches must be within {1,2,3}");
  if (design.study_template.empty()) throw std::invalid_argument("empty study template");
  const int expected_biased_or = design.setting == 1   ? 10
                                 : design.setting == 2 ? 5
                                 : design.setting == 3 ? 15
                                                       : 10;
  int biased_or = 0;
  int biased_rr = 0;
  for (const auto& e : design.study_template) {
    if (e.biased && e.modality == Modality::OR) ++biased_or;
    if (e.biased && (e.modality == Modality::RR || e.modality == Modality::SIR)) ++biased_rr;
  }
  if (biased_or != expected_biased_or)
    throw std::invalid_argument("template has the wrong biased-OR count for the setting");
  if ((design.setting == 4) != (biased_rr == 5))
    throw std::invalid_argument("biased RR studies belong to setting 4 only");
}

Population gen_population(const TruthSpec& truth, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = static_cast<std::size_t>(truth.population);
  Population pop;
  pop.event_age.resize(n);
  pop.carrier.resize(n);
  pop.affected.resize(n);

  const double trunc_mass = weibull_cdf(truth.noncarrier.curve, *truth.noncarrier.truncation_age);
  for (std::size_t i = 0; i < n; ++i) {
    const bool carrier = rng.uniform() < truth.carrier_prob;
    double event;
    if (carrier) {
      double kappa, lambda;
      do {
        kappa = rng.normal(truth.kappa_law.mean, truth.kappa_law.sd);
        lambda = rng.normal(truth.lambda_law.mean, truth.lambda_law.sd);
      } while (kappa <= 0.0 || lambda <= 0.0);
      event = rng.weibull(kappa, lambda);
    } else {
      // inverse-cdf draw from the truncated Weibull
      const double u = rng.uniform() * trunc_mass;
      event = truth.noncarrier.curve.lambda *
              std::pow(-std::log1p(-u), 1.0 / truth.noncarrier.curve.kappa);
    }
    const double censor = std::max(rng.normal(truth.censor_law.mean, truth.censor_law.sd), 0.0);
    const bool affected = event <= std::min(censor, truth.max_age);
    const double inclusion =
        std::max(rng.normal(truth.inclusion_law.mean, truth.inclusion_law.sd), 0.0);

    pop.event_age[i] = static_cast<float>(event);
    pop.carrier[i] = carrier ? 1 : 0;
    pop.affected[i] = affected ? 1 : 0;
    const auto idx = static_cast<std::int32_t>(i);
    if (affected) pop.cases.push_back(idx);
    if (event > inclusion) pop.controls.push_back(idx);
    (carrier ? pop.carriers : pop.noncarriers).push_back(idx);
  }
  return pop;
}

PenetranceReport gen_penetrance_study(const WeibullCurve& curve, int n_carriers,
                                      std::uint64_t seed) {
  if (n_carriers <= 0) throw std::invalid_argument("gen_penetrance_study: need carriers");
  Rng rng(seed);
  const AgeSummary censor_law{85.0, 10.0};
  const auto ages = decade_ages();
  for (int attempt = 0; attempt < kMaxCohortRetries; ++attempt) {
    auto cohort = generate_carrier_cohort(curve, n_carriers, censor_law, 95.0, rng);
    KaplanMeier km(std::move(cohort));
    if (auto report = km_penetrance_report(km, ages)) return *report;
  }
  throw std::runtime_error("gen_penetrance_study: degenerate cohorts after " +
                           std::to_string(kMaxCohortRetries) + " attempts");
}

GeneratedRatio gen_or_study(const Population& population, int n_cases, int n_controls,
                            std::uint64_t seed) {
  if (n_cases > static_cast<int>(population.cases.size()) ||
      n_controls > static_cast<int>(population.controls.size()))
    throw std::runtime_error("gen_or_study: not enough cases or controls in the population");
  Rng rng(seed);
  const auto cases = sample_without_replacement(population.cases, n_cases, rng);
  const auto controls = sample_without_replacement(population.controls, n_controls, rng);

  GeneratedRatio out;
  std::vector<double> case_ages;
  case_ages.reserve(cases.size());
  std::int64_t carrier_cases = 0;
  for (auto i : cases) {
    carrier_cases += population.carrier[static_cast<std::size_t>(i)];
    case_ages.push_back(population.event_age[static_cast<std::size_t>(i)]);
  }
  std::int64_t carrier_controls = 0;
  for (auto i : controls) carrier_controls += population.carrier[static_cast<std::size_t>(i)];

  out.counts = {carrier_cases, carrier_controls, n_cases - carrier_cases,
                n_controls - carrier_controls};
  double log_or, log_se;
  if (carrier_cases == 0 || carrier_controls == 0 || out.counts.noncarrier_cases == 0 ||
      out.counts.noncarrier_controls == 0) {
    const OrEstimate cc = continuity_corrected_or(out.counts);
    log_or = std::log(cc.estimate);
    log_se = cc.log_se;
    out.continuity_used = true;
  } else {
    const double a = static_cast<double>(out.counts.carrier_cases);
    const double b = static_cast<double>(out.counts.carrier_controls);
    const double c = static_cast<double>(out.counts.noncarrier_cases);
    const double d = static_cast<double>(out.counts.noncarrier_controls);
    log_or = std::log((a * d) / (b * c));
    log_se = std::sqrt(1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d);
  }
  out.log_se = log_se;
  synthesize_ci(out.report, log_or, log_se);

  // cases and controls are age-matched: the control distributions copy the
  // case onset summary
  const AgeSummary case_summary = summary_from(case_ages);
  out.ages = {case_summary, case_summary, case_summary, case_summary};
  return out;
}

GeneratedRatio gen_rr_study(const Population& population, int n_carriers, int n_noncarriers,
                            std::uint64_t seed) {
  if (n_carriers > static_cast<int>(population.carriers.size()) ||
      n_noncarriers > static_cast<int>(population.noncarriers.size()))
    throw std::runtime_error("gen_rr_study: not enough carriers or non-carriers");
  Rng rng(seed);
  const auto arm1 = sample_without_replacement(population.carriers, n_carriers, rng);
  const auto arm0 = sample_without_replacement(population.noncarriers, n_noncarriers, rng);

  std::vector<double> onset1, onset0;
  std::int64_t affected1 = 0, affected0 = 0;
  for (auto i : arm1) {
    if (population.affected[static_cast<std::size_t>(i)]) {
      ++affected1;
      onset1.push_back(population.event_age[static_cast<std::size_t>(i)]);
    }
  }
  for (auto i : arm0) {
    if (population.affected[static_cast<std::size_t>(i)]) {
      ++affected0;
      onset0.push_back(population.event_age[static_cast<std::size_t>(i)]);
    }
  }

  GeneratedRatio out;
  out.counts = {affected1, affected0, n_carriers - affected1, n_noncarriers - affected0};
  const double n1 = static_cast<double>(n_carriers);
  const double n0 = static_cast<double>(n_noncarriers);
  double log_rr, log_se;
  if (affected1 == 0 || affected0 == 0) {
    // mirror the 2x2 continuity treatment on the affected/unaffected split
    const double x1 = static_cast<double>(affected1) + 0.5;
    const double x0 = static_cast<double>(affected0) + 0.5;
    const double p1 = x1 / (n1 + 1.0);
    const double p0 = x0 / (n0 + 1.0);
    log_rr = std::log(p1 / p0);
    log_se = std::sqrt(1.0 / x1 - 1.0 / (n1 + 1.0) + 1.0 / x0 - 1.0 / (n0 + 1.0));
    out.continuity_used = true;
  } else {
    const double p1 = static_cast<double>(affected1) / n1;
    const double p0 = static_cast<double>(affected0) / n0;
    log_rr = std::log(p1 / p0);
    log_se = std::sqrt((1.0 - p1) / (n1 * p1) + (1.0 - p0) / (n0 * p0));
  }
  out.log_se = log_se;
  synthesize_ci(out.report, log_rr, log_se);

  out.ages = default_age_distributions();
  out.ages.cases_carrier = summary_from(onset1);
  out.ages.cases_noncarrier = summary_from(onset0);
  return out;
}

BiasedReport inject_bias(const RatioReport& report, const GammaLaw& law, std::uint64_t seed) {
  Rng rng(seed);
  BiasedReport out;
  out.true_bias = rng.gamma(law.shape, 1.0 / law.rate);
  out.report = report;
  const double shift = out.true_bias;
  out.report.estimate = std::exp(std::log(report.estimate) + shift);
  if (report.ci_low) out.report.ci_low = std::exp(std::log(*report.ci_low) + shift);
  if (report.ci_high) out.report.ci_high = std::exp(std::log(*report.ci_high) + shift);
  return out;
}

std::vector<double> true_penetrance_oracle(const TruthSpec& truth, std::span<const double> ages,
                                           std::int64_t n_draws, std::uint64_t seed) {
  if (n_draws <= 0) throw std::invalid_argument("true_penetrance_oracle: need draws");
  Rng rng(seed);
  std::vector<double> acc(ages.size(), 0.0);
  for (std::int64_t t = 0; t < n_draws; ++t) {
    double kappa, lambda;
    do {
      kappa = rng.normal(truth.kappa_law.mean, truth.kappa_law.sd);
      lambda = rng.normal(truth.lambda_law.mean, truth.lambda_law.sd);
    } while (kappa <= 0.0 || lambda <= 0.0);
    for (std::size_t j = 0; j < ages.size(); ++j)
      acc[j] += -std::expm1(-std::pow(ages[j] / lambda, kappa));
  }
  for (auto& v : acc) v /= static_cast<double>(n_draws);
  return acc;
}

std::vector<StudyRecord> gen_replicate_studies(const SimDesign& design, const TruthSpec& truth,
                                               std::uint64_t replicate_seed) {
  const Population population = gen_population(truth, derive_seed(replicate_seed, 0));
  Rng curve_rng(derive_seed(replicate_seed, 1));

  std::vector<StudyRecord> records;
  records.reserve(design.study_template.size());
  for (std::size_t s = 0; s < design.study_template.size(); ++s) {
    const StudyTemplateEntry& entry = design.study_template[s];
    StudyRecord rec;
    char id[16];
    std::snprintf(id, sizeof(id), "s%02zu", s + 1);
    rec.id = id;
    rec.modality = entry.modality;
    rec.biased = entry.biased;
    rec.sample_size = entry.sample_size;
    const std::uint64_t gen_seed = derive_seed(replicate_seed, 10 + s);

    if (entry.modality == Modality::Penetrance) {
      double kappa, lambda;
      do {
        kappa = curve_rng.normal(truth.kappa_law.mean, truth.kappa_law.sd);
        lambda = curve_rng.normal(truth.lambda_law.mean, truth.lambda_law.sd);
      } while (kappa <= 0.0 || lambda <= 0.0);
      rec.penetrance =
          gen_penetrance_study({kappa, lambda}, static_cast<int>(entry.sample_size), gen_seed);
      records.push_back(std::move(rec));
      continue;
    }

    const int n = static_cast<int>(entry.sample_size);
    const int n1 = n / 2;
    const int n0 = n - n1;
    GeneratedRatio gen = entry.modality == Modality::OR
                             ? gen_or_study(population, n1, n0, gen_seed)
                             : gen_rr_study(population, n1, n0, gen_seed);
    if (entry.biased) {
      const GammaLaw& law = entry.modality == Modality::OR ? truth.or_bias : truth.rr_bias;
      gen.report = inject_bias(gen.report, law, derive_seed(replicate_seed, 300 + s)).report;
    }
    rec.ratio = gen.report;
    const bool use_ages = design.scenario == 1 && entry.age_reported;
    rec.age_reported = use_ages;
    rec.ages = use_ages ? gen.ages : default_age_distributions();
    records.push_back(std::move(rec));
  }
  validate_studies(records);
  return records;
}

SimReport run_sim(const SimDesign& design, const TruthSpec& truth, const SimFitOptions& options) {
  validate_design(design);
  const auto ages = decade_ages();
  const auto truth_values =
      true_penetrance_oracle(truth, ages, 1'000'000, derive_seed(design.seed, 0xFAC7));

  struct ReplicateResult {
    bool ok = false;
    // [approach][age]
    std::vector<std::vector<double>> estimate, low, high;
  };
  std::vector<ReplicateResult> results(static_cast<std::size_t>(design.replicates));

  ModelSpec model;
  model.bias_prior = options.bias_prior;

  auto run_replicate = [&](int rep) {
    const std::uint64_t rep_seed = derive_seed(design.seed, 1000 + static_cast<std::uint64_t>(rep));
    ReplicateResult& slot = results[static_cast<std::size_t>(rep)];
    try {
      const auto records = gen_replicate_studies(design, truth, rep_seed);
      const auto covs = build_all_covs(records, model, derive_seed(rep_seed, 7));
      for (int approach : design.approaches) {
        RunConfig config;
        config.iterations = options.iterations;
        config.burn_in = options.burn_in;
        config.chains = options.chains;
        config.thin = 1;
        config.seed = derive_seed(rep_seed, 600 + static_cast<std::uint64_t>(approach));
        config.bias_adjust = approach == 1;
        config.exclude_biased = approach == 3;
        FitDriverOptions driver;
        driver.covs = &covs;
        driver.threads = 1;
        const FitSummary fit = fit_dataset(records, config, model, driver);
        slot.estimate.push_back(fit.decades.mean);
        slot.low.push_back(fit.decades.cri_low);
        slot.high.push_back(fit.decades.cri_high);
      }
      slot.ok = true;
    } catch (const std::exception&) {
      slot.ok = false;
    }
  };

  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  const int workers =
      std::max(1, std::min({options.threads <= 0 ? hw : options.threads, design.replicates}));
  if (workers <= 1) {
    for (int rep = 0; rep < design.replicates; ++rep) run_replicate(rep);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const int rep = next.fetch_add(1);
          if (rep >= design.replicates) return;
          run_replicate(rep);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  SimReport report;
  int ok_count = 0;
  for (const auto& r : results) ok_count += r.ok ? 1 : 0;
  report.failed_replicates = design.replicates - ok_count;
  if (static_cast<double>(report.failed_replicates) >
      0.02 * static_cast<double>(design.replicates))
    throw std::runtime_error("run_sim: more than 2% of replicates failed (" +
                             std::to_string(report.failed_replicates) + " of " +
                             std::to_string(design.replicates) + ")");

  for (std::size_t ai = 0; ai < design.approaches.size(); ++ai) {
    for (std::size_t j = 0; j < ages.size(); ++j) {
      SimCell cell;
      cell.setting = design.setting;
      cell.scenario = design.scenario;
      cell.approach = design.approaches[ai];
      cell.age = ages[j];
      cell.true_value = truth_values[j];
      double sum = 0.0, sq = 0.0;
      int covered = 0;
      for (const auto& r : results) {
        if (!r.ok) continue;
        const double est = r.estimate[ai][j];
        sum += est;
        sq += (est - cell.true_value) * (est - cell.true_value);
        if (r.low[ai][j] <= cell.true_value && cell.true_value <= r.high[ai][j]) ++covered;
      }
      cell.n_replicates = ok_count;
      cell.mean_estimate = sum / ok_count;
      cell.rmse_over_true = std::sqrt(sq / ok_count) / cell.true_value;
      cell.coverage = static_cast<double>(covered) / ok_count;
      report.cells.push_back(cell);
    }
  }
  return report;
}

}  // namespace penmeta

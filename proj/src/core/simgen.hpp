#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "core/domain.hpp"
#include "core/inference.hpp"

namespace penmeta {

struct StudyTemplateEntry {
  Modality modality = Modality::OR;
  std::int64_t sample_size = 0;
  bool biased = false;
  bool age_reported = false;
};

struct SimDesign {
  int setting = 1;
  int scenario = 1;
  int replicates = 500;
  std::vector<int> approaches = {1, 2, 3};
  std::uint64_t seed = 0;
  std::vector<StudyTemplateEntry> study_template;
};

/// Bundled templates mirroring the ATM study table; setting selects the
/// biased subset and setting 4 appends five biased RR studies.
std::vector<StudyTemplateEntry> setting_template(int setting);

SimDesign make_design(int setting, int scenario, int replicates, std::vector<int> approaches,
                      std::uint64_t seed);

void validate_design(const SimDesign& design);

struct GammaLaw {
  double shape = 0.0;
  double rate = 0.0;
};

/// Ground-truth data-generating laws.
struct TruthSpec {
  AgeSummary kappa_law{4.55, 0.525};
  AgeSummary lambda_law{95.25, 12.375};
  AgeSummary censor_law{85.0, 10.0};
  double max_age = 95.0;
  double carrier_prob = 0.01;
  std::int64_t population = 2'000'000;
  BaselinePenetrance noncarrier{{3.65, 143.2426}, 185.0};
  GammaLaw or_bias{2.312, 3.4};
  GammaLaw rr_bias{2.04, 5.83};
  AgeSummary inclusion_law{63.0, 14.00726};
};

/// One synthetic population shared by the OR/RR studies of a replicate.
/// Cases are subjects whose event precedes both censoring and max_age;
/// controls are subjects healthy at an independently drawn inclusion age.
struct Population {
  std::vector<float> event_age;
  std::vector<std::uint8_t> carrier;
  std::vector<std::uint8_t> affected;
  std::vector<std::int32_t> cases;
  std::vector<std::int32_t> controls;
  std::vector<std::int32_t> carriers;
  std::vector<std::int32_t> noncarriers;
};

Population gen_population(const TruthSpec& truth, std::uint64_t seed);

/// Kaplan-Meier penetrance report at ages 40..80 from a synthetic carrier
/// cohort; regenerates degenerate cohorts, throws after bounded retries.
PenetranceReport gen_penetrance_study(const WeibullCurve& curve, int n_carriers,
                                      std::uint64_t seed);

struct GeneratedRatio {
  RatioReport report;
  AgeDistributions ages;       // scenario-1 summaries from the sampled subjects
  CountTable counts;           // the sampled 2x2 (OR) or arm totals (RR)
  double log_se = 0.0;
  bool continuity_used = false;
};

GeneratedRatio gen_or_study(const Population& population, int n_cases, int n_controls,
                            std::uint64_t seed);

GeneratedRatio gen_rr_study(const Population& population, int n_carriers, int n_noncarriers,
                            std::uint64_t seed);

struct BiasedReport {
  RatioReport report;
  double true_bias = 0.0;  // recorded for diagnostics
};

/// Adds B ~ Gamma(law) to the log estimate; the SE (CI width on the log
/// scale) is unchanged.
BiasedReport inject_bias(const RatioReport& report, const GammaLaw& law, std::uint64_t seed);

std::vector<double> true_penetrance_oracle(const TruthSpec& truth, std::span<const double> ages,
                                           std::int64_t n_draws, std::uint64_t seed);

struct SimFitOptions {
  int iterations = 10000;
  int burn_in = 5000;
  int chains = 2;
  BiasPriorSpec bias_prior;
  int threads = 1;
};

struct SimCell {
  int setting = 0;
  int scenario = 0;
  int approach = 0;
  double age = 0.0;
  double true_value = 0.0;
  double mean_estimate = 0.0;
  double rmse_over_true = 0.0;
  double coverage = 0.0;
  int n_replicates = 0;
};

struct SimReport {
  std::vector<SimCell> cells;
  int failed_replicates = 0;
};

/// Generate the studies of one replicate (exposed for tests and for the
/// replicate-dump flag).
std::vector<StudyRecord> gen_replicate_studies(const SimDesign& design, const TruthSpec& truth,
                                               std::uint64_t replicate_seed);

SimReport run_sim(const SimDesign& design, const TruthSpec& truth, const SimFitOptions& options);

}  // namespace penmeta

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/inference.hpp"
#include "core/posterior.hpp"

namespace penmeta {

struct FitSummary {
  std::vector<ChainTrace> chains;
  PosteriorCurve decades;            // pooled post-burn-in draws, ages 40..80
  std::optional<PosteriorCurve> fine;  // 20..95 step 1 when requested
  std::vector<PosteriorCurve> per_chain_decades;
  std::map<std::string, double> rhat;  // keys a,b,c,d (chains >= 2)
  bool converged = true;               // all hyper rhat < 1.1
};

struct FitDriverOptions {
  bool fine_curve = false;
  bool per_chain_curves = false;
  int threads = 1;  // parallel chains
  /// Covariances to reuse; built from the run seed when absent.
  const std::map<std::string, PenetranceCov>* covs = nullptr;
};

/// W* for every penetrance study in the set, seeded deterministically.
std::map<std::string, PenetranceCov> build_all_covs(std::span<const StudyRecord> records,
                                                    const ModelSpec& model, std::uint64_t seed);

/// Validates, runs `config.chains` chains with seeds derived from
/// config.seed, pools the draws and summarizes.
FitSummary fit_dataset(std::span<const StudyRecord> records, const RunConfig& config,
                       const ModelSpec& model, const FitDriverOptions& options = {});

inline constexpr double kRhatThreshold = 1.1;

}  // namespace penmeta

#include "core/fit.hpp"

#include <atomic>
#include <stdexcept>
#include <thread>

namespace penmeta {

namespace {

// fixed sub-stream tags under the run seed
constexpr std::uint64_t kCovStream = 0x5747;   // 'WG' for W*
constexpr std::uint64_t kChainStream = 0xC0;

}  // namespace

std::map<std::string, PenetranceCov> build_all_covs(std::span<const StudyRecord> records,
                                                    const ModelSpec& model, std::uint64_t seed) {
  std::map<std::string, PenetranceCov> covs;
  std::uint64_t index = 0;
  for (const auto& r : records) {
    if (r.modality != Modality::Penetrance) continue;
    covs.emplace(r.id, build_penetrance_cov(*r.penetrance, r.sample_size.value_or(0),
                                            model.cov_proto, model.cov_sims,
                                            derive_seed(derive_seed(seed, kCovStream), index)));
    ++index;
  }
  return covs;
}

FitSummary fit_dataset(std::span<const StudyRecord> records, const RunConfig& config,
                       const ModelSpec& model, const FitDriverOptions& options) {
  validate_run_config(config);
  validate_quadrature(model.quad);

  std::map<std::string, PenetranceCov> local_covs;
  const std::map<std::string, PenetranceCov>* covs = options.covs;
  if (!covs) {
    local_covs = build_all_covs(records, model, config.seed);
    covs = &local_covs;
  }

  FitSummary out;
  out.chains.resize(static_cast<std::size_t>(config.chains));
  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  const int workers = std::max(1, std::min({options.threads <= 0 ? hw : options.threads,
                                            config.chains}));
  if (workers <= 1) {
    for (int k = 0; k < config.chains; ++k)
      out.chains[static_cast<std::size_t>(k)] =
          run_chain(records, config, model, *covs,
                    derive_seed(config.seed, kChainStream + static_cast<std::uint64_t>(k)));
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(config.chains));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const int k = next.fetch_add(1);
          if (k >= config.chains) return;
          try {
            out.chains[static_cast<std::size_t>(k)] =
                run_chain(records, config, model, *covs,
                          derive_seed(config.seed, kChainStream + static_cast<std::uint64_t>(k)));
          } catch (...) {
            errors[static_cast<std::size_t>(k)] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  // pool the kept draws in chain order
  std::vector<HyperParams> pooled;
  for (const auto& chain : out.chains)
    pooled.insert(pooled.end(), chain.hyper.begin(), chain.hyper.end());
  if (pooled.empty()) throw std::runtime_error("fit produced no post-burn-in draws");

  const auto decades = decade_ages();
  out.decades = summarize_curve(penetrance_draws(pooled, decades), decades);
  if (options.fine_curve) {
    const auto fine = fine_age_grid();
    out.fine = summarize_curve(penetrance_draws(pooled, fine), fine);
  }
  if (options.per_chain_curves) {
    for (const auto& chain : out.chains)
      out.per_chain_decades.push_back(
          summarize_curve(penetrance_draws(chain.hyper, decades), decades));
  }

  if (config.chains >= 2) {
    auto component = [&](auto getter) {
      std::vector<std::vector<double>> per_chain;
      for (const auto& chain : out.chains) {
        std::vector<double> xs;
        xs.reserve(chain.hyper.size());
        for (const auto& h : chain.hyper) xs.push_back(getter(h));
        per_chain.push_back(std::move(xs));
      }
      return gelman_rubin(per_chain);
    };
    out.rhat["a"] = component([](const HyperParams& h) { return h.a; });
    out.rhat["b"] = component([](const HyperParams& h) { return h.b; });
    out.rhat["c"] = component([](const HyperParams& h) { return h.c; });
    out.rhat["d"] = component([](const HyperParams& h) { return h.d; });
    for (const auto& [name, value] : out.rhat)
      if (!(value < kRhatThreshold)) out.converged = false;
  }
  return out;
}

}  // namespace penmeta

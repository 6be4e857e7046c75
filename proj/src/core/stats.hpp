#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace penmeta {

/// 97.5% standard-normal quantile, fixed for bit-stable CI round trips.
inline constexpr double kZ95 = 1.959964;

double mean(std::span<const double> x);
double sample_sd(std::span<const double> x);

/// Linear-interpolation quantile (R type 7). `sorted` must be ascending.
double quantile_sorted(std::span<const double> sorted, double p);

/// log density of Gamma(shape, scale) at x > 0.
double gamma_logpdf(double x, double shape, double scale);

/// log density of |N(0, sigma^2)| at x >= 0.
double half_normal_logpdf(double x, double sigma);

double normal_logpdf(double x, double mean, double var);

/// FNV-1a 64-bit; used for the manifest's dataset checksum.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace penmeta

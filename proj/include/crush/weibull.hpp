/**
 * @file weibull.hpp
 * @brief Weibull statistics of per-type crushing strengths.
 *
 * P_s(sigma) = exp(-(sigma / sigma0)^m), fitted by least squares on
 * ln(-ln P_s) = m ln sigma - m ln sigma0 with mean-rank survival estimates.
 */
#pragma once

#include "crush/simulator.hpp"

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace crush::weibull {

/// Types with fewer valid tests are dropped.
constexpr int kMinValid = 30;

struct WeibullFit {
    double m = 0.0;
    double sigma0 = 0.0;
    double r2 = 0.0;
    int n_valid = 0;
};

/// Strengths of the valid records, in input order. Throws InsufficientData
/// when fewer than `min_valid` records are valid.
std::vector<double> filter_batch(std::span<const simulator::CrushRecord> records, int min_valid = kMinValid);

/// Sorted (strength, P_s) pairs with P_s(i) = 1 - i/(N+1), i = 1..N.
std::vector<std::pair<double, double>> ranked_survival(std::span<const double> strengths);

/// Throws InsufficientData below `min_count` samples, DegenerateSample when
/// all strengths are equal, NonFinite on non-positive or non-finite input.
WeibullFit fit(std::span<const double> strengths, int min_count = kMinValid);

/// Fitted survival probability at sigma.
double survival(const WeibullFit& f, double sigma);

/// Inverse-CDF draws from Weibull(m, sigma0).
std::vector<double> sample(double m, double sigma0, int n, std::uint64_t seed);

struct Quantiles {
    double min = 0, q25 = 0, q50 = 0, q75 = 0, max = 0;
};

/// Linear-interpolation quantile (numpy default) of unsorted data.
double quantile(std::vector<double> values, double q);
Quantiles quantiles(std::span<const double> values);

struct DatasetSummary {
    Quantiles sigma0;
    Quantiles m;
    int types = 0;
};

DatasetSummary dataset_summary(std::span<const WeibullFit> fits);

}  // namespace crush::weibull

#include "crush/weibull.hpp"

#include "crush/error.hpp"
#include "crush/rng.hpp"

#include <algorithm>
#include <cmath>

namespace crush::weibull {

std::vector<double> filter_batch(std::span<const simulator::CrushRecord> records, int min_valid) {
    std::vector<double> out;
    for (const auto& r : records)
        if (r.valid) out.push_back(simulator::strength(r));
    if (static_cast<int>(out.size()) < min_valid)
        throw Error(ErrorKind::InsufficientData, std::to_string(out.size()) + " valid records, need " +
                                                     std::to_string(min_valid));
    return out;
}

std::vector<std::pair<double, double>> ranked_survival(std::span<const double> strengths) {
    std::vector<double> s(strengths.begin(), strengths.end());
    std::sort(s.begin(), s.end());
    const double n = static_cast<double>(s.size());
    std::vector<std::pair<double, double>> out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) out.emplace_back(s[i], 1.0 - (i + 1) / (n + 1));
    return out;
}

WeibullFit fit(std::span<const double> strengths, int min_count) {
    if (static_cast<int>(strengths.size()) < min_count)
        throw Error(ErrorKind::InsufficientData, "need at least " + std::to_string(min_count) + " strengths");
    for (double s : strengths)
        if (!(s > 0) || !std::isfinite(s)) throw Error(ErrorKind::NonFinite, "strengths must be positive and finite");
    const auto ranked = ranked_survival(strengths);
    if (ranked.front().first == ranked.back().first)
        throw Error(ErrorKind::DegenerateSample, "all strengths are equal");

    const double n = static_cast<double>(ranked.size());
    double mx = 0, my = 0;
    std::vector<double> x, y;
    for (const auto& [s, p] : ranked) {
        x.push_back(std::log(s));
        y.push_back(std::log(-std::log(p)));
        mx += x.back();
        my += y.back();
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    WeibullFit f;
    f.m = sxy / sxx;
    const double intercept = my - f.m * mx;
    f.sigma0 = std::exp(-intercept / f.m);
    f.r2 = std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0);
    f.n_valid = static_cast<int>(ranked.size());
    if (!(f.m > 0)) throw Error(ErrorKind::DegenerateSample, "non-positive Weibull modulus");
    return f;
}

double survival(const WeibullFit& f, double sigma) { return std::exp(-std::pow(sigma / f.sigma0, f.m)); }

std::vector<double> sample(double m, double sigma0, int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> out(n);
    for (auto& v : out) v = sigma0 * std::pow(-std::log(rng.uniform_open()), 1.0 / m);
    return out;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw Error(ErrorKind::InsufficientData, "quantile of an empty set");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Quantiles quantiles(std::span<const double> values) {
    std::vector<double> v(values.begin(), values.end());
    return {quantile(v, 0.0), quantile(v, 0.25), quantile(v, 0.5), quantile(v, 0.75), quantile(v, 1.0)};
}

DatasetSummary dataset_summary(std::span<const WeibullFit> fits) {
    std::vector<double> s0, m;
    for (const auto& f : fits) s0.push_back(f.sigma0), m.push_back(f.m);
    return {quantiles(s0), quantiles(m), static_cast<int>(fits.size())};
}

}  // namespace crush::weibull

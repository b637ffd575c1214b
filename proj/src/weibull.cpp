#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "mtlgr/dataio.hpp"
#include "mtlgr/error.hpp"

namespace mtlgr {

namespace {

// Profile score in the shape parameter, evaluated on logs shifted by their
// maximum so that exp(k * shifted) never overflows:
//   h(k) = sum w_i log x_i - 1/k - mean(log x),  w_i ∝ x_i^k
// h is strictly increasing; its derivative is Var_w(log x) + 1/k^2.
struct Score {
    double value;
    double slope;
};

Score profile_score(const std::vector<double>& logs, double log_max, double mean_log, double k) {
    double s0 = 0.0;
    double s1 = 0.0;
    double s2 = 0.0;
    for (double l : logs) {
        const double w = std::exp(k * (l - log_max));
        s0 += w;
        s1 += w * l;
        s2 += w * l * l;
    }
    const double m1 = s1 / s0;
    const double var = std::max(0.0, s2 / s0 - m1 * m1);
    return {m1 - 1.0 / k - mean_log, var + 1.0 / (k * k)};
}

double scale_given_shape(const std::vector<double>& logs, double log_max, double k) {
    double s0 = 0.0;
    for (double l : logs) s0 += std::exp(k * (l - log_max));
    return std::exp(log_max + std::log(s0 / static_cast<double>(logs.size())) / k);
}

}  // namespace

WeibullFit weibull_fit(std::span<const double> samples, double max_shape) {
    if (samples.size() < 2) fail(Errc::invalid_argument, "Weibull fit needs at least two samples");
    if (!(max_shape > 0.0)) fail(Errc::invalid_argument, "max_shape must be positive");
    std::vector<double> logs;
    logs.reserve(samples.size());
    for (double x : samples) {
        if (!(x > 0.0) || !std::isfinite(x)) {
            fail(Errc::invalid_argument, "Weibull samples must be positive and finite, got " + std::to_string(x));
        }
        logs.push_back(std::log(x));
    }
    const double n = static_cast<double>(logs.size());
    const double log_max = *std::max_element(logs.begin(), logs.end());
    const double mean_log = std::accumulate(logs.begin(), logs.end(), 0.0) / n;
    double sd = 0.0;
    for (double l : logs) sd += (l - mean_log) * (l - mean_log);
    sd = std::sqrt(sd / n);

    WeibullFit out;
    if (profile_score(logs, log_max, mean_log, max_shape).value <= 0.0) {
        out.shape = max_shape;
        out.scale = scale_given_shape(logs, log_max, max_shape);
        out.capped = true;
        return out;
    }

    // Bracket [lo, hi] with h(lo) < 0 < h(hi).
    double lo = 0.0;
    double hi = max_shape;
    double k = std::clamp(sd > 0.0 ? 1.2 / sd : 1.0, 1e-6, max_shape);
    constexpr int max_iters = 200;
    for (int it = 1; it <= max_iters; ++it) {
        const Score s = profile_score(logs, log_max, mean_log, k);
        if (s.value < 0.0) {
            lo = k;
        } else {
            hi = k;
        }
        double next = k - s.value / s.slope;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        const double change = std::abs(next - k);
        k = next;
        if (change <= 1e-10 * std::max(1.0, k)) {
            out.shape = k;
            out.scale = scale_given_shape(logs, log_max, k);
            out.iterations = it;
            return out;
        }
    }
    fail(Errc::numerical_failure, "Weibull shape did not converge in 200 iterations");
}

double weibull_pdf(double x, double shape, double scale) {
    if (x < 0.0) return 0.0;
    if (x == 0.0) return shape == 1.0 ? 1.0 / scale : (shape < 1.0 ? INFINITY : 0.0);
    const double z = x / scale;
    return shape / scale * std::pow(z, shape - 1.0) * std::exp(-std::pow(z, shape));
}

}  // namespace mtlgr

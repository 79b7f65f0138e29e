#include "bprelab/stats.hpp"

#include <algorithm>
#include <cmath>

#include "bprelab/errors.hpp"

namespace bprelab {

double rayleigh_cdf(double t, double sigma) {
    if (!(t >= 0.0)) throw DomainError("rayleigh_cdf needs t >= 0");
    if (!(sigma > 0.0)) throw DomainError("rayleigh_cdf needs sigma > 0");
    return -std::expm1(-t * t / (2.0 * sigma * sigma));
}

Ecdf::Ecdf(std::vector<double> samples) : xs_(std::move(samples)) {
    if (xs_.empty()) throw EmptySample("empty sample for ECDF");
    std::sort(xs_.begin(), xs_.end());
}

double Ecdf::operator()(double t) const {
    const auto it = std::upper_bound(xs_.begin(), xs_.end(), t);
    return static_cast<double>(it - xs_.begin()) / static_cast<double>(xs_.size());
}

KsResult ks_statistic(std::span<const double> samples,
                      const std::function<double(double)>& cdf) {
    if (samples.empty()) throw EmptySample("empty sample for KS statistic");
    std::vector<double> xs(samples.begin(), samples.end());
    std::sort(xs.begin(), xs.end());
    const double n = static_cast<double>(xs.size());
    KsResult best;
    best.at = xs.front();
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double f = cdf(xs[i]);
        const double lo = f - static_cast<double>(i) / n;        // gap below the jump
        const double hi = static_cast<double>(i + 1) / n - f;    // gap above the jump
        const double d = std::max(lo, hi);
        if (d > best.distance) {
            best.distance = d;
            best.at = xs[i];
        }
    }
    return best;
}

double ks_distance(std::span<const double> samples,
                   const std::function<double(double)>& cdf) {
    return ks_statistic(samples, cdf).distance;
}

double ks_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw EmptySample("empty sample for two-sample KS");
    std::vector<double> xa(a.begin(), a.end()), xb(b.begin(), b.end());
    std::sort(xa.begin(), xa.end());
    std::sort(xb.begin(), xb.end());
    const double na = static_cast<double>(xa.size()), nb = static_cast<double>(xb.size());
    std::size_t ia = 0, ib = 0;
    double best = 0.0;
    while (ia < xa.size() && ib < xb.size()) {
        const double x = std::min(xa[ia], xb[ib]);
        while (ia < xa.size() && xa[ia] <= x) ++ia;
        while (ib < xb.size() && xb[ib] <= x) ++ib;
        best = std::max(best, std::abs(static_cast<double>(ia) / na -
                                       static_cast<double>(ib) / nb));
    }
    return best;
}

double kolmogorov_bound_99(std::uint64_t n) {
    if (n == 0) throw EmptySample("Kolmogorov bound needs n >= 1");
    return 1.63 / std::sqrt(static_cast<double>(n));
}

PowerFit fit_power_fixed(std::span<const std::size_t> ns, std::span<const double> values,
                         double exponent) {
    if (ns.size() != values.size()) throw DomainError("fit input length mismatch");
    if (ns.size() < 2) throw DomainError("fit needs at least 2 points");
    double acc = 0.0;
    for (std::size_t i = 0; i < ns.size(); ++i) {
        if (ns[i] == 0) throw NonPositiveValue("fit needs positive n");
        if (!(values[i] > 0.0)) throw NonPositiveValue("fit needs positive values");
        acc += std::log(values[i]) + exponent * std::log(static_cast<double>(ns[i]));
    }
    PowerFit fit;
    fit.exponent = exponent;
    fit.coeff = std::exp(acc / static_cast<double>(ns.size()));
    for (std::size_t i = 0; i < ns.size(); ++i) {
        const double predicted =
            fit.coeff * std::pow(static_cast<double>(ns[i]), -exponent);
        fit.max_rel_residual =
            std::max(fit.max_rel_residual, std::abs(values[i] / predicted - 1.0));
    }
    return fit;
}

PowerFit fit_inverse_sqrt(std::span<const std::size_t> ns, std::span<const double> values) {
    return fit_power_fixed(ns, values, 0.5);
}

}  // namespace bprelab

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace bprelab {

// R_sigma(t) = 1 - exp(-t^2 / (2 sigma^2)). Throws DomainError for t < 0 or
// sigma <= 0.
double rayleigh_cdf(double t, double sigma);

// Empirical CDF; construction sorts a copy of the samples. Throws
// EmptySample on an empty input.
class Ecdf {
  public:
    explicit Ecdf(std::vector<double> samples);

    double operator()(double t) const;  // fraction of samples <= t
    std::span<const double> sorted() const { return xs_; }
    std::size_t size() const { return xs_.size(); }

  private:
    std::vector<double> xs_;
};

struct KsResult {
    double distance = 0.0;
    double at = 0.0;  // sample point attaining the sup
};

// One-sample Kolmogorov-Smirnov distance against a continuous reference CDF:
// sup over sorted sample points of both one-sided ECDF gaps.
KsResult ks_statistic(std::span<const double> samples,
                      const std::function<double(double)>& cdf);
double ks_distance(std::span<const double> samples, const std::function<double(double)>& cdf);

// Two-sample Kolmogorov-Smirnov distance between empirical CDFs.
double ks_two_sample(std::span<const double> a, std::span<const double> b);

// Kolmogorov 99% quantile bound for the one-sample statistic: 1.63/sqrt(n).
double kolmogorov_bound_99(std::uint64_t n);

// Least squares of ln(values) against ln(c) - exponent * ln(n) with the
// exponent held fixed; reports c and the largest relative deviation of the
// data from the fitted curve. Throws NonPositiveValue unless every value
// and every n is positive, DomainError with fewer than 2 points.
struct PowerFit {
    double coeff = 0.0;
    double exponent = 0.0;
    double max_rel_residual = 0.0;
};

PowerFit fit_power_fixed(std::span<const std::size_t> ns, std::span<const double> values,
                         double exponent);

// v_n ~ c / sqrt(n): the exponent is fixed at 1/2, never fitted.
PowerFit fit_inverse_sqrt(std::span<const std::size_t> ns, std::span<const double> values);

}  // namespace bprelab

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

// Small exact reference implementations used to pin down Monte Carlo
// estimators. Everything here recomputes results from first principles
// (dense dynamic programming, full enumeration); nothing calls back into
// the estimators under test.
namespace oracles {

struct LatticeStep {
    int step = 0;  // multiple of the mesh h
    double weight = 0.0;
};

// Dense DP for a walk S_k = a + h * (sum of integer steps), killed at the
// first k >= 1 with S_k <= 0.
class LatticeWalkDp {
  public:
    LatticeWalkDp(double a, double h, std::vector<LatticeStep> steps);

    // Runs the DP forward to generation k (k must not decrease).
    void advance(std::size_t k);

    std::size_t generation() const { return k_; }
    double survival() const;              // P(tau > k)
    double expect_s() const;              // E[S_k; tau > k]
    double expect_exp_neg_s() const;      // E[e^{-S_k}; tau > k]
    double cell(double lo, double hi) const;  // P(S_k in [lo, hi), tau > k)
    double conditional_cdf(double t) const;   // P(S_k <= t | tau > k)
    double conditional_quantile(double q) const;
    // alive point masses as (s, probability), ascending in s
    std::vector<std::pair<double, double>> alive() const;

  private:
    double a_ = 0.0, h_ = 0.0;
    std::vector<LatticeStep> steps_;
    int m_kill_ = 0;   // largest m with a + m h <= 0
    int max_up_ = 0;
    std::size_t k_ = 0;
    std::vector<double> mass_;  // index = m - (m_kill_ + 1)
};

// Exact expectation of fn over all atom index sequences of length n,
// weighted by the product of atom weights. Cost is atoms^n.
double enumerate_sequences(std::span<const double> weights, std::size_t n,
                           const std::function<double(std::span<const std::uint32_t>)>& fn);

}  // namespace oracles

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bprelab/environment.hpp"
#include "bprelab/positive_matrix.hpp"

namespace bprelab {

// One realized path of the associated Markov walk: X_{k+1} = X_k . M_k,
// S_{k+1} = S_k + rho(X_k, M_k) from root (x0, a). The running minimum m_n
// and its last attaining index T_n range over k >= 1 and are computed from
// the a-free increment prefix, so they are exactly invariant under changing
// the root level a. Stopping times beyond the horizon stay unset rather
// than taking a sentinel value.
struct WalkPath {
    double a = 0.0;
    std::vector<double> s;    // S_0 .. S_n
    std::vector<double> xs;   // flattened simplex points, (n+1) x p
    std::size_t p = 0;
    std::optional<std::size_t> tau;       // first k >= 1 with S_k <= 0
    std::optional<std::size_t> tau_plus;  // first k >= 1 with S_k >= 0
    double min_s = 0.0;                   // m_n = min(S_1..S_n)
    std::size_t argmin_last = 0;          // T_n = max{k >= 1 : S_k = m_n}

    std::size_t horizon() const { return s.empty() ? 0 : s.size() - 1; }
    SimplexPoint x_at(std::size_t k) const;
};

WalkPath run_walk(const EnvironmentEnsemble& ens, const SimplexPoint& x0, double a,
                  std::size_t n, Rng& rng);

// Same walk driven by a fixed atom-index sequence (couples the walk with a
// branching trajectory over one environment).
WalkPath walk_from_atoms(const EnvironmentEnsemble& ens, std::span<const std::uint32_t> atoms,
                         const SimplexPoint& x0, double a);

struct ScalarEstimate {
    double value = 0.0;
    double stderr_ = 0.0;
    std::uint64_t replicas = 0;
};

// sigma^2 estimated as mean of S_n(x,0)^2 / n with the start point drawn
// from a burned-in projective chain.
ScalarEstimate estimate_sigma2(const EnvironmentEnsemble& ens, std::size_t horizon,
                               std::uint64_t replicas, std::size_t burnin, std::uint64_t seed,
                               unsigned workers = 1);

struct TailRow {
    std::size_t n = 0;
    double estimate = 0.0;
    double stderr_ = 0.0;
    std::uint64_t replicas = 0;
};

// P(tau > n) over the horizon list, one shared long path per replica.
std::vector<TailRow> tau_tail_table(const EnvironmentEnsemble& ens, const SimplexPoint& x0,
                                    double a, std::span<const std::size_t> horizons,
                                    std::uint64_t replicas, std::uint64_t seed,
                                    unsigned workers = 1);

// E[S_n; tau > n] at n/4, n/2 and n; `stable` means the three stages agree
// within 5% relative spread, the condition for using the estimate as a
// harmonic-function surrogate.
struct VEstimate {
    double value = 0.0;
    double stderr_ = 0.0;
    std::vector<TailRow> curve;
    bool stable = false;
};

VEstimate estimate_V(const EnvironmentEnsemble& ens, const SimplexPoint& x0, double a,
                     std::size_t horizon, std::uint64_t replicas, std::uint64_t seed,
                     unsigned workers = 1);

struct ConditionedSamples {
    std::vector<double> values;  // S_n / sqrt(n) on {tau > n}, replica order
    std::uint64_t proposed = 0;
    double acceptance = 0.0;
};

// Rejection sampling of S_n/sqrt(n) given tau > n. Throws
// InsufficientAcceptance when fewer than `min_accept` paths survive.
ConditionedSamples conditioned_walk_samples(const EnvironmentEnsemble& ens,
                                            const SimplexPoint& x0, double a, std::size_t n,
                                            std::uint64_t replicas, std::uint64_t seed,
                                            unsigned workers = 1,
                                            std::uint64_t min_accept = 100);

struct CellEstimate {
    std::size_t n = 0;
    double b = 0.0;
    double estimate = 0.0;
    double stderr_ = 0.0;
    std::uint64_t replicas = 0;
};

// Joint cell probabilities P(S_n in [b, b+1), tau > n] over the horizon and
// offset lists, shared paths across horizons.
std::vector<CellEstimate> local_limit_cells(const EnvironmentEnsemble& ens,
                                            const SimplexPoint& x0, double a,
                                            std::span<const std::size_t> horizons,
                                            std::span<const double> offsets,
                                            std::uint64_t replicas, std::uint64_t seed,
                                            unsigned workers = 1);

// Harmonic-function estimate V-hat(x, s) with its value at the
// experiment root. `root_stderr` is zero for the exact lattice form.
struct ValueEstimator {
    std::function<double(const SimplexPoint&, double)> fn;
    double root_value = 0.0;
    double root_stderr = 0.0;
    std::string method;
};

// Change-of-measure weights w_k = V(X_k, S_k) 1{m_k > 0} / V(x0, a) along a
// path, k = 0..horizon. The root weight is 1 by convention.
std::vector<double> doob_weights(const WalkPath& path, const ValueEstimator& v);

struct DoobExpectation {
    double value = 0.0;
    double stderr_ = 0.0;
    double mean_weight = 0.0;
    double weight_stderr = 0.0;
    std::uint64_t replicas = 0;
};

// Importance-weighted mean (1/N) sum phi(X_k, S_k) w_k under the conditioned
// law. Throws RootValueNonpositive unless V-hat at the root clears
// 3 root standard errors.
DoobExpectation doob_expectation(const EnvironmentEnsemble& ens, const SimplexPoint& x0,
                                 double a, std::size_t k, std::uint64_t replicas,
                                 const ValueEstimator& v,
                                 const std::function<double(const SimplexPoint&, double)>& phi,
                                 std::uint64_t seed, unsigned workers = 1);

struct SeriesRow {
    std::size_t n = 0;
    double exp_term = 0.0;       // conditioned E[e^{-S_n}]
    double exp_stderr = 0.0;
    double eta_term = 0.0;       // conditioned E[eta_n e^{-S_n}]
    double eta_stderr = 0.0;
    double exp_partial = 0.0;
    double eta_partial = 0.0;
};

// Terms and partial sums of the conditioned series sum_n E[e^{-S_n}] and
// sum_n E[eta_n e^{-S_n}], estimated with the importance weights (shared
// paths across n).
std::vector<SeriesRow> series_partial_sums(const EnvironmentEnsemble& ens,
                                           const SimplexPoint& x0, double a,
                                           std::size_t n_max, std::uint64_t replicas,
                                           const ValueEstimator& v, std::uint64_t seed,
                                           unsigned workers = 1);

}  // namespace bprelab

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "bprelab/environment.hpp"
#include "bprelab/positive_matrix.hpp"
#include "bprelab/rng.hpp"

namespace bprelab {

using PopulationVector = std::vector<std::uint64_t>;

// One exact branching generation: children of every parent drawn from the
// given law, summed per type. Throws OverflowGuard if a count would leave
// the exact integer range.
PopulationVector step_population(const OffspringLaw& law, const PopulationVector& pop, Rng& rng);

// Population trajectory with a log-space mirror: counts are exact integers
// until any type exceeds 2^53, after which the state switches to log-value
// tracking evolved deterministically through the atom mean matrices
// (relative tracking error <= 1e-9 per the float arithmetic; suppressed
// branching fluctuations at that size are O(2^-26) relative per step).
// The switch generation is recorded.
class BranchSim {
  public:
    BranchSim(const EnvironmentEnsemble& ens, PopulationVector z);

    void step(std::size_t atom, Rng& rng);

    bool extinct() const;
    bool exact_mode() const { return !log_mode_; }
    std::optional<std::size_t> switch_generation() const { return switch_gen_; }
    std::size_t generation() const { return gen_; }

    double log_total() const;                  // ln|Z|, -inf when extinct
    double log_count(std::size_t j) const;     // ln Z(j), -inf when zero
    const PopulationVector& counts() const;    // exact mode only

  private:
    const EnvironmentEnsemble* ens_;
    PopulationVector counts_;
    std::vector<double> logs_;
    PopulationVector scratch_;
    bool log_mode_ = false;
    std::optional<std::size_t> switch_gen_;
    std::size_t gen_ = 0;
};

// Survival of the quenched process after n generations from ancestors z,
// via backward generating-function composition over the given atom indices:
// t <- 0, then t <- f_k(t) for k = n-1 .. 0, survival = 1 - prod_i t_i^{z_i}.
double exact_quenched_survival(const EnvironmentEnsemble& ens,
                               std::span<const std::uint32_t> atoms,
                               std::span<const std::uint64_t> z, std::size_t n);

struct SurvivalRow {
    std::size_t n = 0;
    double estimate = 0.0;
    double stderr_ = 0.0;
    std::uint64_t replicas = 0;
};

// Annealed survival E[q_{n,z}] over horizons, one environment path per
// replica shared across horizons and all ancestor vectors, with the exact
// quenched survival evaluated per path (no branching noise). Values for
// nested ancestor vectors are monotone replica by replica.
std::vector<std::vector<SurvivalRow>> annealed_survival_multi(
    const EnvironmentEnsemble& ens, std::span<const PopulationVector> zs,
    std::span<const std::size_t> horizons, std::uint64_t replicas, std::uint64_t seed,
    unsigned workers = 1);

std::vector<SurvivalRow> annealed_survival(const EnvironmentEnsemble& ens,
                                           const PopulationVector& z,
                                           std::span<const std::size_t> horizons,
                                           std::uint64_t replicas, std::uint64_t seed,
                                           unsigned workers = 1);

// sqrt(n) * annealed survival (the scaled tail whose flatness witnesses the
// 1/sqrt(n) decay).
std::vector<SurvivalRow> beta_z_table(const EnvironmentEnsemble& ens, const PopulationVector& z,
                                      std::span<const std::size_t> horizons,
                                      std::uint64_t replicas, std::uint64_t seed,
                                      unsigned workers = 1);

struct ConditionedScaled {
    std::size_t n = 0;
    std::vector<double> ratios;  // Z_n(z,j) / |M_{0,n} e_j| given survival
    std::uint64_t proposed = 0;
};

// Samples of the direction-j population ratio conditioned on survival at
// each horizon (shared trajectories across horizons). Throws
// InsufficientAcceptance when a horizon collects fewer than min_accept.
std::vector<ConditionedScaled> conditioned_scaled_population(
    const EnvironmentEnsemble& ens, const PopulationVector& z, std::size_t j,
    std::span<const std::size_t> horizons, std::uint64_t replicas, std::uint64_t seed,
    unsigned workers = 1, std::uint64_t min_accept = 100);

struct ConditionedLogPop {
    std::size_t n = 0;
    std::vector<double> log_pop;   // ln|Z_n| / sqrt(n) given survival
    std::vector<double> walk;      // S_n(barycenter, 0) / sqrt(n), same replica
    std::uint64_t proposed = 0;
};

// Joint samples (ln|Z_n|/sqrt(n), S_n/sqrt(n)) given survival, the walk
// driven by the same environment draw as the population.
std::vector<ConditionedLogPop> conditioned_log_population(
    const EnvironmentEnsemble& ens, const PopulationVector& z,
    std::span<const std::size_t> horizons, std::uint64_t replicas, std::uint64_t seed,
    unsigned workers = 1, std::uint64_t min_accept = 100);

// Normalized-population diagnostics along ONE fixed environment sequence
// (seed recorded): W_n(i,j) = Z_n(i,j)/|M_{0,n}(.,j)| moments per ancestor
// type, L2 Cauchy increments E[(W_{2n}-W_n)^2], the supercriticality and
// variance series partial sums of that sequence, and the coincidence of
// {extinct by the horizon} with {W below 0.01} against the exact quenched
// extinction oracle.
struct KestenStigumReport {
    std::uint64_t env_seed = 0;
    std::size_t p = 0;
    std::vector<std::size_t> horizons;
    std::vector<std::uint32_t> atoms;       // the fixed sequence, length 2*max horizon
    // flattened [horizon][ancestor i][direction j]
    std::vector<double> w_mean, w_stderr;
    std::vector<double> cauchy_mean, cauchy_stderr;
    std::vector<double> extinct_freq;       // per ancestor, at the max horizon
    std::vector<double> exact_extinction;   // oracle q_{H,i} on the fixed sequence
    std::vector<double> small_w_freq;       // per ancestor: P(max_j W_H < 0.01)
    std::vector<double> coincidence;        // per ancestor: P(extinct | W small)
    std::vector<double> supercrit_partial;  // per horizon: max_ij sum 1/M_{0,n}(i,j)
    std::vector<double> variance_partial;   // per horizon: variance-series partial sum
    std::uint64_t replicas = 0;
};

KestenStigumReport kesten_stigum_diagnostics(const EnvironmentEnsemble& ens,
                                             std::span<const std::size_t> horizons,
                                             std::uint64_t replicas, std::uint64_t env_seed,
                                             std::uint64_t sim_seed, unsigned workers = 1);

}  // namespace bprelab

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bprelab/offspring.hpp"
#include "bprelab/positive_matrix.hpp"
#include "bprelab/rng.hpp"

namespace bprelab {

// Finitely supported i.i.d. environment: weighted atoms, each a full
// offspring law for all p types. Weights must sum to 1 within 1e-12 and are
// renormalized; per-atom moment summaries are cached at construction.
class EnvironmentEnsemble {
  public:
    struct Atom {
        double weight;
        OffspringLaw law;
        MomentSummary moms;
        std::vector<double> mean_row_sums;
    };

    EnvironmentEnsemble(std::vector<double> weights, std::vector<OffspringLaw> laws);

    std::size_t p() const { return p_; }
    std::size_t atom_count() const { return atoms_.size(); }
    const Atom& atom(std::size_t k) const { return atoms_[k]; }

    std::size_t sample_atom(Rng& rng) const;

  private:
    std::size_t p_ = 0;
    std::vector<Atom> atoms_;
    std::vector<double> cum_;
};

std::vector<std::uint32_t> sample_env_sequence(const EnvironmentEnsemble& ens, std::size_t n,
                                               Rng& rng);

struct LyapunovEstimate {
    double value = 0.0;
    double stderr_ = 0.0;
    std::size_t horizon = 0;
    std::uint64_t replicas = 0;
};

// Furstenberg average along the projective chain: per replica
// (1/n) sum_k rho(X_k, M_k) from the barycenter. Ensembles whose atoms all
// share one constant row sum give the exact exponent with zero variance.
LyapunovEstimate estimate_lyapunov(const EnvironmentEnsemble& ens, std::size_t horizon,
                                   std::uint64_t replicas, std::uint64_t seed,
                                   unsigned workers = 1);

enum class CalibrationKnob {
    geometric_scale,  // multiply every truncated-geometric mean parameter
    weight_pair,      // reweight a two-atom ensemble: (w, 1-w)
};

struct CalibrationStep {
    double knob = 0.0;
    double pi_hat = 0.0;
    double stderr_ = 0.0;
};

struct CalibrationResult {
    EnvironmentEnsemble ensemble;
    double knob_value = 0.0;
    CalibrationKnob knob = CalibrationKnob::geometric_scale;
    std::vector<CalibrationStep> history;
};

EnvironmentEnsemble apply_knob(const EnvironmentEnsemble& ens, CalibrationKnob knob,
                               double value);

// Bisection on the knob until |pi_hat| <= target_tol at the given Monte
// Carlo budget. Uses common random numbers across evaluations so the
// bracketing is monotone; throws CalibrationFailed when [lo, hi] does not
// bracket a sign change.
CalibrationResult calibrate_critical(const EnvironmentEnsemble& ens, CalibrationKnob knob,
                                     double lo, double hi, double target_tol,
                                     std::size_t horizon, std::uint64_t replicas,
                                     std::uint64_t seed, unsigned workers = 1,
                                     unsigned max_iters = 60);

enum class HypothesisStatus { pass, fail, sufficient_pass, inconclusive };

struct HypothesisItem {
    std::string name;
    HypothesisStatus status = HypothesisStatus::inconclusive;
    double value = 0.0;
    double extra = 0.0;
    std::string detail;
};

struct HypothesisReport {
    std::vector<HypothesisItem> items;
    bool gate_pass = false;  // no definite failures among the items
};

// Decidable checks are evaluated exactly from atom data (moment integrability,
// entry comparability, the positive-drift set, the second-moment series);
// strong irreducibility is reported through a sufficient condition only, and
// criticality through a Monte Carlo zero test at 3 standard errors.
HypothesisReport validate_hypotheses(const EnvironmentEnsemble& ens, double delta, double eps,
                                     double K, std::size_t h4_horizon, std::uint64_t h4_replicas,
                                     std::uint64_t seed, unsigned workers = 1);

struct OccupationHistogram {
    std::size_t p = 0;
    std::size_t resolution = 0;
    std::vector<double> freq;  // flattened, first (p-1) coordinates binned
    std::uint64_t steps = 0;
};

// Empirical occupation of the projective chain; supported for p in {2,3}.
OccupationHistogram occupation_histogram(const EnvironmentEnsemble& ens, std::uint64_t steps,
                                         std::size_t resolution, std::uint64_t seed);

}  // namespace bprelab

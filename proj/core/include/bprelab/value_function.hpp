#pragma once

#include <cstdint>

#include "bprelab/markov_walk.hpp"

namespace bprelab {

// A mean-zero unit-step lattice walk: every atom's mean matrix has a
// constant row sum, the log row sums lie in {-h, 0, +h} for one h > 0, and
// the up and down weights balance. For such walks the killed-walk harmonic
// function is known in closed form.
struct UnitLatticeSpec {
    bool lattice = false;
    double h = 0.0;
};

UnitLatticeSpec detect_unit_lattice(const EnvironmentEnsemble& ens);

// Exact V for a detected unit-step lattice, rooted at level a: on lattice
// points s = a + m h the harmonic function of the walk killed at s <= 0 is
// h * (m - m_kill), with a one-step average when the root itself sits on
// the killing boundary (a = 0).
ValueEstimator lattice_value_estimator(const EnvironmentEnsemble& ens, double a);

// Monte Carlo fallback: E[S_n; tau > n] tabulated on an a-grid at fixed
// simplex bins (binned by first coordinate), interpolated linearly in a and
// extrapolated linearly beyond the grid.
struct ValueTableConfig {
    double a_max = 8.0;
    double a_step = 0.5;
    std::size_t x_bins = 4;
    std::size_t horizon = 1024;
    std::uint64_t replicas = 20000;
};

ValueEstimator table_value_estimator(const EnvironmentEnsemble& ens, const SimplexPoint& x0,
                                     double a, const ValueTableConfig& cfg, std::uint64_t seed,
                                     unsigned workers = 1);

// Lattice closed form when the ensemble admits it, Monte Carlo table
// otherwise.
ValueEstimator make_value_estimator(const EnvironmentEnsemble& ens, const SimplexPoint& x0,
                                    double a, const ValueTableConfig& cfg, std::uint64_t seed,
                                    unsigned workers = 1);

}  // namespace bprelab

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include <bprelab/ensemble_io.hpp>
#include <bprelab/errors.hpp>
#include <bprelab/markov_walk.hpp>
#include <bprelab/value_function.hpp>

#include "oracles.hpp"

using namespace bprelab;

namespace {

const double kLn2 = std::log(2.0);

}  // namespace

TEST_CASE("lattice detection across the shipped families") {
    UnitLatticeSpec lat = detect_unit_lattice(load_ensemble("ensembles/lattice_ln2.json"));
    CHECK(lat.lattice);
    CHECK(lat.h == doctest::Approx(kLn2).epsilon(1e-12));

    CHECK(!detect_unit_lattice(load_ensemble("ensembles/sym_nonlattice.json")).lattice);
    CHECK(!detect_unit_lattice(load_ensemble("ensembles/geo_pair.json")).lattice);
    // all-up increments have a drift, not a mean-zero lattice
    CHECK(!detect_unit_lattice(load_ensemble("ensembles/supercritical_ks.json")).lattice);
    // unbalanced weights break the mean-zero requirement
    CHECK(!detect_unit_lattice(load_ensemble("ensembles/subcritical_ln2.json")).lattice);
}

TEST_CASE("closed form harmonic function on the lattice") {
    EnvironmentEnsemble ens = load_ensemble("ensembles/lattice_ln2.json");
    SimplexPoint x = SimplexPoint::barycenter(2);

    ValueEstimator v01 = lattice_value_estimator(ens, 0.1);
    CHECK(v01.root_value == doctest::Approx(kLn2).epsilon(1e-12));
    CHECK(v01.root_stderr == 0.0);
    CHECK(v01.method == "lattice_exact");
    // V at the reachable lattice points a + m h
    CHECK(v01.fn(x, 0.1 + 3 * kLn2) == doctest::Approx(4 * kLn2).epsilon(1e-12));
    CHECK(v01.fn(x, 0.1 - kLn2) == 0.0);
    CHECK(v01.fn(x, -5.0) == 0.0);

    ValueEstimator v1 = lattice_value_estimator(ens, 1.0);
    CHECK(v1.root_value == doctest::Approx(2 * kLn2).epsilon(1e-12));

    // boundary root: one step average of the killed values
    ValueEstimator v0 = lattice_value_estimator(ens, 0.0);
    CHECK(v0.root_value == doctest::Approx(0.5 * kLn2).epsilon(1e-12));

    // far from the boundary the harmonic function tracks the level itself
    ValueEstimator vfar = lattice_value_estimator(ens, 100.0);
    CHECK(vfar.root_value / 100.0 == doctest::Approx(1.0).epsilon(0.01));

    CHECK_THROWS_AS(lattice_value_estimator(ens, -1.0), DomainError);
    CHECK_THROWS_AS(
        lattice_value_estimator(load_ensemble("ensembles/geo_pair.json"), 1.0), DomainError);
}

TEST_CASE("harmonicity of the closed form under one walk step") {
    // E[V(S_1) 1{S_1 > 0}] = V(a) exactly for the +-h balanced walk
    EnvironmentEnsemble ens = load_ensemble("ensembles/lattice_ln2.json");
    SimplexPoint x = SimplexPoint::barycenter(2);
    for (double a : {0.1, 1.0, 2.5}) {
        ValueEstimator v = lattice_value_estimator(ens, a);
        double up = v.fn(x, a + kLn2), down = v.fn(x, a - kLn2);
        CHECK(0.5 * up + 0.5 * down == doctest::Approx(v.root_value).epsilon(1e-12));
    }
}

TEST_CASE("monte carlo table approximates the exact lattice values") {
    EnvironmentEnsemble ens = load_ensemble("ensembles/lattice_ln2.json");
    SimplexPoint x0 = SimplexPoint::barycenter(2);
    ValueTableConfig cfg;
    cfg.a_max = 3.0;
    cfg.a_step = 0.5;
    cfg.x_bins = 2;
    cfg.horizon = 256;
    cfg.replicas = 8000;
    ValueEstimator table = table_value_estimator(ens, x0, 1.0, cfg, 7117);
    CHECK(table.method == "mc_table");
    CHECK(table.root_stderr > 0.0);
    ValueEstimator exact = lattice_value_estimator(ens, 1.0);
    // finite-horizon bias plus Monte Carlo noise, so the tolerance is loose
    CHECK(table.root_value == doctest::Approx(exact.root_value).epsilon(0.12));
    CHECK(table.fn(x0, 2.0) == doctest::Approx(exact.fn(x0, 2.0)).epsilon(0.12));
    // extrapolation beyond the grid keeps the unit slope within tolerance
    double far = table.fn(x0, 9.0);
    CHECK(far == doctest::Approx(exact.fn(x0, 9.0)).epsilon(0.15));
    CHECK(table.fn(x0, -1.0) == 0.0);
    ValueTableConfig bad;
    bad.a_step = 0.0;
    CHECK_THROWS_AS(table_value_estimator(ens, x0, 1.0, bad, 1), DomainError);
}

TEST_CASE("dispatch picks the closed form exactly when it applies") {
    ValueTableConfig cfg;
    cfg.a_max = 1.0;
    cfg.a_step = 0.5;
    cfg.x_bins = 1;
    cfg.horizon = 16;
    cfg.replicas = 200;
    EnvironmentEnsemble lat = load_ensemble("ensembles/lattice_ln2.json");
    SimplexPoint x0 = SimplexPoint::barycenter(2);
    CHECK(make_value_estimator(lat, x0, 1.0, cfg, 1).method == "lattice_exact");
    EnvironmentEnsemble sym = load_ensemble("ensembles/sym_nonlattice.json");
    CHECK(make_value_estimator(sym, x0, 1.0, cfg, 1).method == "mc_table");
}

TEST_CASE("change of measure weights along a fixed path") {
    EnvironmentEnsemble ens = load_ensemble("ensembles/lattice_ln2.json");
    SimplexPoint x0 = SimplexPoint::barycenter(2);
    Rng rng = derive_stream(15, StreamKind::env_sequence, 3);
    auto atoms = sample_env_sequence(ens, 32, rng);
    WalkPath path = walk_from_atoms(ens, atoms, x0, 1.0);
    ValueEstimator v = lattice_value_estimator(ens, 1.0);
    auto w = doob_weights(path, v);
    REQUIRE(w.size() == 33);
    CHECK(w[0] == 1.0);
    double run_min = path.s[1];
    for (std::size_t k = 1; k <= 32; ++k) {
        run_min = std::min(run_min, path.s[k]);
        double expect = run_min > 0.0 ? v.fn(x0, path.s[k]) / v.root_value : 0.0;
        CHECK(w[k] == doctest::Approx(expect).epsilon(1e-12));
    }
    ValueEstimator dead = v;
    dead.root_value = 0.0;
    CHECK_THROWS_AS(doob_weights(path, dead), RootValueNonpositive);
}

TEST_CASE("weights average to one under the exact harmonic function") {
    EnvironmentEnsemble ens = load_ensemble("ensembles/lattice_ln2.json");
    SimplexPoint x0 = SimplexPoint::barycenter(2);
    ValueEstimator v = lattice_value_estimator(ens, 1.0);
    for (std::size_t k : {std::size_t{1}, std::size_t{4}, std::size_t{16}}) {
        DoobExpectation d = doob_expectation(
            ens, x0, 1.0, k, 40000, v, [](const SimplexPoint&, double) { return 1.0; }, 33);
        CAPTURE(k);
        CHECK(std::abs(d.mean_weight - 1.0) <= 4 * d.weight_stderr + 1e-12);
        CHECK(d.value == doctest::Approx(d.mean_weight).epsilon(1e-12));
        CHECK(d.replicas == 40000);
    }
    // a conditioned mean under the transformed law: phi = level / sqrt(k)
    DoobExpectation lvl = doob_expectation(
        ens, x0, 1.0, 64, 40000, v, [](const SimplexPoint&, double s) { return s / 8.0; }, 34);
    CHECK(lvl.value > 0.0);

    ValueEstimator shaky = v;
    shaky.root_value = 0.10;
    shaky.root_stderr = 0.05;
    CHECK_THROWS_AS(doob_expectation(ens, x0, 1.0, 4, 100, shaky,
                                     [](const SimplexPoint&, double) { return 1.0; }, 33),
                    RootValueNonpositive);
}

TEST_CASE("series terms match the dense dp") {
    EnvironmentEnsemble ens = load_ensemble("ensembles/lattice_ln2.json");
    SimplexPoint x0 = SimplexPoint::barycenter(2);
    const double a = 1.0;
    ValueEstimator v = lattice_value_estimator(ens, a);
    const std::size_t n_max = 8;
    auto rows = series_partial_sums(ens, x0, a, n_max, 150000, v, 233);
    REQUIRE(rows.size() == n_max + 1);

    // dp oracle: E[e^{-S_n} V(S_n) 1{m_n > 0}] / V(a), with V = h (m - m_kill)
    oracles::LatticeWalkDp dp(a, kLn2, {{+1, 0.5}, {-1, 0.5}});
    const double v_root = v.root_value;
    double exp_partial = 0.0;
    double eta_bar = 0.5 * ens.atom(0).moms.eta + 0.5 * ens.atom(1).moms.eta;
    for (std::size_t n = 0; n <= n_max; ++n) {
        dp.advance(n);
        double term = 0.0;
        for (const auto& [s, mass] : dp.alive()) term += mass * std::exp(-s) * v.fn(x0, s);
        term /= v_root;
        exp_partial += term;
        CAPTURE(n);
        CHECK(rows[n].n == n);
        CHECK(std::abs(rows[n].exp_term - term) <= 4 * rows[n].exp_stderr + 1e-12);
        // the next environment draw is independent of the prefix, so the
        // eta-weighted term factorizes exactly
        CHECK(std::abs(rows[n].eta_term - term * eta_bar) <=
              4 * rows[n].eta_stderr + 1e-12);
        CHECK(rows[n].exp_partial == doctest::Approx(exp_partial).epsilon(0.05));
    }
    // n = 0 term is deterministic
    CHECK(rows[0].exp_term == doctest::Approx(std::exp(-a)).epsilon(1e-12));
    CHECK(rows[0].exp_stderr <= 1e-12);
}

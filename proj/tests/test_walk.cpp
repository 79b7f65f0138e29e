#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include <bprelab/ensemble_io.hpp>
#include <bprelab/errors.hpp>
#include <bprelab/markov_walk.hpp>

#include "oracles.hpp"

using namespace bprelab;

namespace {

const double kLn2 = std::log(2.0);

std::vector<std::uint32_t> fixed_atoms(const EnvironmentEnsemble& ens, std::size_t n,
                                       std::uint64_t seed) {
    Rng rng = derive_stream(seed, StreamKind::env_sequence, 0);
    return sample_env_sequence(ens, n, rng);
}

}  // namespace

TEST_CASE("path increments recompute from the raw matrix product") {
    EnvironmentEnsemble ens = load_ensemble("ensembles/sym_nonlattice.json");
    auto atoms = fixed_atoms(ens, 24, 31);
    SimplexPoint x0(std::vector<double>{0.7, 0.3});
    const double a = 2.0;
    WalkPath path = walk_from_atoms(ens, atoms, x0, a);
    REQUIRE(path.horizon() == 24);
    CHECK(path.s[0] == a);
    CHECK(path.p == 2);

    PosMatrix prod = PosMatrix::identity(2);
    for (std::size_t k = 0; k < atoms.size(); ++k) {
        prod = prod.multiply(ens.atom(atoms[k]).moms.mean);
        // S_{k+1} = a + ln|x0 M_0 ... M_k|
        double xm0 = x0[0] * prod(0, 0) + x0[1] * prod(1, 0);
        double xm1 = x0[0] * prod(0, 1) + x0[1] * prod(1, 1);
        CHECK(path.s[k + 1] == doctest::Approx(a + std::log(xm0 + xm1)).epsilon(1e-9));
        // X_{k+1} is the normalized image
        SimplexPoint xk = path.x_at(k + 1);
        CHECK(xk[0] == doctest::Approx(xm0 / (xm0 + xm1)).epsilon(1e-9));
    }
}

TEST_CASE("running minimum and its last index ignore the root level") {
    EnvironmentEnsemble ens = load_ensemble("ensembles/lattice_ln2.json");
    auto atoms = fixed_atoms(ens, 64, 77);
    SimplexPoint x0 = SimplexPoint::barycenter(2);
    WalkPath lo = walk_from_atoms(ens, atoms, x0, 1.0);
    WalkPath hi = walk_from_atoms(ens, atoms, x0, 7.0);
    CHECK(lo.argmin_last == hi.argmin_last);
    CHECK(lo.min_s == doctest::Approx(hi.min_s - 6.0).epsilon(1e-12));
    CHECK(lo.argmin_last >= 1);
    // the recorded minimum matches a direct scan over k >= 1
    double m = lo.s[1];
    std::size_t arg = 1;
    for (std::size_t k = 1; k < lo.s.size(); ++k) {
        if (lo.s[k] <= m + 1e-12) {
            if (lo.s[k] < m) m = lo.s[k];
            arg = k;
        }
    }
    CHECK(lo.min_s == doctest::Approx(m).epsilon(1e-12));
    CHECK(lo.argmin_last == arg);
}

TEST_CASE("stopping times against hand computed lattice values") {
    EnvironmentEnsemble ens = load_ensemble("ensembles/lattice_ln2.json");
    SimplexPoint x0 = SimplexPoint::barycenter(2);

    // near the boundary a single down step kills: P(tau > 1) = 1/2 and only
    // the three up-led sign patterns of length 3 survive: P(tau > 3) = 3/8
    oracles::LatticeWalkDp dp(0.1, kLn2, {{+1, 0.5}, {-1, 0.5}});
    dp.advance(1);
    CHECK(dp.survival() == doctest::Approx(0.5).epsilon(1e-12));
    dp.advance(3);
    CHECK(dp.survival() == doctest::Approx(0.375).epsilon(1e-12));

    std::vector<std::size_t> horizons{1, 3};
    auto rows = tau_tail_table(ens, x0, 0.1, horizons, 200000, 4242);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].n == 1);
    CHECK(std::abs(rows[0].estimate - 0.5) <= 4 * rows[0].stderr_);
    CHECK(std::abs(rows[1].estimate - 0.375) <= 4 * rows[1].stderr_);
    CHECK(rows[0].replicas == 200000);
}

TEST_CASE("deep tail matches the dense dp") {
    EnvironmentEnsemble ens = load_ensemble("ensembles/lattice_ln2.json");
    SimplexPoint x0 = SimplexPoint::barycenter(2);
    oracles::LatticeWalkDp dp(1.0, kLn2, {{+1, 0.5}, {-1, 0.5}});
    std::vector<std::size_t> horizons{16, 64, 256};
    auto rows = tau_tail_table(ens, x0, 1.0, horizons, 200000, 909);
    for (std::size_t k = 0; k < horizons.size(); ++k) {
        dp.advance(horizons[k]);
        CAPTURE(horizons[k]);
        CHECK(std::abs(rows[k].estimate - dp.survival()) <= 4 * rows[k].stderr_);
    }
    // the tail is monotone in n replica by replica
    CHECK(rows[0].estimate >= rows[1].estimate);
    CHECK(rows[1].estimate >= rows[2].estimate);
}

TEST_CASE("tau tail input validation") {
    EnvironmentEnsemble ens = load_ensemble("ensembles/lattice_ln2.json");
    SimplexPoint x0 = SimplexPoint::barycenter(2);
    std::vector<std::size_t> bad{4, 2};
    CHECK_THROWS_AS(tau_tail_table(ens, x0, 1.0, bad, 10, 1), DomainError);
    std::vector<std::size_t> zero{0, 2};
    CHECK_THROWS_AS(tau_tail_table(ens, x0, 1.0, zero, 10, 1), DomainError);
    CHECK_THROWS_AS(tau_tail_table(ens, x0, -1.0, std::vector<std::size_t>{2}, 10, 1),
                    DomainError);
}

TEST_CASE("variance of the walk per step") {
    // increments are exactly +-ln2, so S_n^2/n has mean (ln 2)^2
    EnvironmentEnsemble ens = load_ensemble("ensembles/lattice_ln2.json");
    ScalarEstimate est = estimate_sigma2(ens, 256, 3000, 64, 2025);
    CHECK(est.replicas == 3000);
    CHECK(std::abs(est.value - kLn2 * kLn2) <= 4 * est.stderr_);
    CHECK(est.stderr_ > 0.0);
    CHECK_THROWS_AS(estimate_sigma2(ens, 0, 10, 4, 1), DomainError);
}

TEST_CASE("harmonic surrogate approaches the exact lattice dp mean") {
    EnvironmentEnsemble ens = load_ensemble("ensembles/lattice_ln2.json");
    SimplexPoint x0 = SimplexPoint::barycenter(2);
    const std::size_t n = 512;
    VEstimate est = estimate_V(ens, x0, 1.0, n, 60000, 5150);
    oracles::LatticeWalkDp dp(1.0, kLn2, {{+1, 0.5}, {-1, 0.5}});
    dp.advance(n);
    CHECK(std::abs(est.value - dp.expect_s()) <= 4 * est.stderr_);
    CHECK(est.stable);
    REQUIRE(est.curve.size() == 3);
    CHECK(est.curve[0].n == n / 4);
    CHECK(est.curve[2].n == n);
    CHECK_THROWS_AS(estimate_V(ens, x0, 1.0, 2, 100, 1), DomainError);
}

TEST_CASE("conditioned walk sampler") {
    EnvironmentEnsemble ens = load_ensemble("ensembles/lattice_ln2.json");
    SimplexPoint x0 = SimplexPoint::barycenter(2);
    const std::size_t n = 64;
    ConditionedSamples cs = conditioned_walk_samples(ens, x0, 1.0, n, 20000, 606);
    CHECK(cs.proposed == 20000);
    CHECK(cs.values.size() >= 100);
    oracles::LatticeWalkDp dp(1.0, kLn2, {{+1, 0.5}, {-1, 0.5}});
    dp.advance(n);
    double se = std::sqrt(dp.survival() * (1 - dp.survival()) / 20000.0);
    CHECK(std::abs(cs.acceptance - dp.survival()) <= 4 * se);
    double sqn = std::sqrt(static_cast<double>(n));
    for (double v : cs.values) {
        CHECK(v > 0.0);
        // S_n on survival is a lattice point a + m h, scaled by sqrt(n)
        double s = v * sqn;
        double m = (s - 1.0) / kLn2;
        CHECK(std::abs(m - std::round(m)) <= 1e-9);
    }
    CHECK_THROWS_AS(conditioned_walk_samples(ens, x0, 1.0, 1024, 50, 606),
                    InsufficientAcceptance);
    CHECK_THROWS_AS(conditioned_walk_samples(ens, x0, 1.0, 0, 50, 606), DomainError);
}

TEST_CASE("joint cells at horizon one have closed form mass") {
    EnvironmentEnsemble ens = load_ensemble("ensembles/lattice_ln2.json");
    SimplexPoint x0 = SimplexPoint::barycenter(2);
    std::vector<std::size_t> horizons{1};
    std::vector<double> offsets{0.0, 1.0};
    auto cells = local_limit_cells(ens, x0, 0.1, horizons, offsets, 100000, 8080);
    REQUIRE(cells.size() == 2);
    // S_1 = 0.1 + ln 2 = 0.793 on the survival branch
    CHECK(cells[0].n == 1);
    CHECK(cells[0].b == 0.0);
    CHECK(std::abs(cells[0].estimate - 0.5) <= 4 * cells[0].stderr_);
    CHECK(cells[1].estimate == 0.0);

    // cross-check a deeper joint cell against the dp
    oracles::LatticeWalkDp dp(0.1, kLn2, {{+1, 0.5}, {-1, 0.5}});
    std::vector<std::size_t> deep{16};
    dp.advance(16);
    auto cells16 = local_limit_cells(ens, x0, 0.1, deep, offsets, 200000, 8081);
    CHECK(std::abs(cells16[0].estimate - dp.cell(0.0, 1.0)) <= 4 * cells16[0].stderr_ + 1e-9);
    CHECK(std::abs(cells16[1].estimate - dp.cell(1.0, 2.0)) <= 4 * cells16[1].stderr_ + 1e-9);

    CHECK_THROWS_AS(
        local_limit_cells(ens, x0, 0.1, std::vector<std::size_t>{}, offsets, 100, 1),
        DomainError);
}

TEST_CASE("walk reproducibility and stream separation") {
    EnvironmentEnsemble ens = load_ensemble("ensembles/sym_nonlattice.json");
    SimplexPoint x0 = SimplexPoint::barycenter(2);
    Rng r1 = derive_stream(400, StreamKind::walk, 9);
    Rng r2 = derive_stream(400, StreamKind::walk, 9);
    WalkPath p1 = run_walk(ens, x0, 1.0, 128, r1);
    WalkPath p2 = run_walk(ens, x0, 1.0, 128, r2);
    CHECK(p1.s == p2.s);
    CHECK(p1.tau == p2.tau);
    Rng r3 = derive_stream(400, StreamKind::walk, 10);
    WalkPath p3 = run_walk(ens, x0, 1.0, 128, r3);
    CHECK(p1.s != p3.s);
    CHECK_THROWS_AS(run_walk(ens, x0, -0.5, 8, r3), DomainError);
}

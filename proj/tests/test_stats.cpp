#include <doctest.h>

#include <cmath>
#include <cstddef>
#include <vector>

#include <bprelab/errors.hpp>
#include <bprelab/rng.hpp>
#include <bprelab/stats.hpp>

#include "oracles.hpp"

using namespace bprelab;

TEST_CASE("rayleigh cdf pinned values") {
    CHECK(rayleigh_cdf(0.0, 1.0) == 0.0);
    for (double sigma : {0.3, 1.0, 2.5}) {
        double median = sigma * std::sqrt(2.0 * std::log(2.0));
        CHECK(rayleigh_cdf(median, sigma) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(rayleigh_cdf(50.0 * sigma, sigma) == doctest::Approx(1.0).epsilon(1e-12));
    }
    // monotone
    double prev = -1.0;
    for (double t = 0.0; t <= 5.0; t += 0.05) {
        double v = rayleigh_cdf(t, 1.3);
        CHECK(v >= prev);
        prev = v;
    }
    CHECK_THROWS_AS(rayleigh_cdf(-0.1, 1.0), DomainError);
    CHECK_THROWS_AS(rayleigh_cdf(1.0, 0.0), DomainError);
    CHECK_THROWS_AS(rayleigh_cdf(1.0, -2.0), DomainError);
}

TEST_CASE("ecdf basics") {
    Ecdf f({3.0, 1.0, 2.0});
    CHECK(f(0.5) == 0.0);
    CHECK(f(1.0) == doctest::Approx(1.0 / 3.0));
    CHECK(f(2.5) == doctest::Approx(2.0 / 3.0));
    CHECK(f(3.0) == 1.0);
    CHECK_THROWS_AS(Ecdf({}), EmptySample);
}

TEST_CASE("ks single sample at the reference median is one half") {
    double sigma = 0.8;
    double median = sigma * std::sqrt(2.0 * std::log(2.0));
    std::vector<double> s{median};
    auto r = ks_statistic(s, [&](double t) { return rayleigh_cdf(t, sigma); });
    CHECK(r.distance == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.at == median);
}

TEST_CASE("ks constant samples vs continuous cdf") {
    for (double c : {0.2, 1.0, 3.0}) {
        std::vector<double> s(40, c);
        double fc = rayleigh_cdf(c, 1.0);
        double want = std::max(fc, 1.0 - fc);
        CHECK(ks_distance(s, [](double t) { return rayleigh_cdf(t, 1.0); }) ==
              doctest::Approx(want).epsilon(1e-12));
    }
    CHECK_THROWS_AS(ks_distance({}, [](double) { return 0.5; }), EmptySample);
}

TEST_CASE("ks self draw stays under the kolmogorov 99 percent bound") {
    // inverse transform sampling from the Rayleigh reference itself
    const std::size_t n = 10000;
    Rng rng = derive_stream(0x5eedful, StreamKind::generic, 7);
    double sigma = 1.0;
    std::vector<double> s;
    s.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        double u = rng.uniform();
        s.push_back(sigma * std::sqrt(-2.0 * std::log1p(-u)));
    }
    double d = ks_distance(s, [&](double t) { return rayleigh_cdf(t, sigma); });
    CHECK(d <= kolmogorov_bound_99(n));
    CHECK(kolmogorov_bound_99(n) == doctest::Approx(0.0163).epsilon(0.01));
}

TEST_CASE("ks two sample identical and disjoint") {
    std::vector<double> a{1.0, 2.0, 3.0, 4.0};
    CHECK(ks_two_sample(a, a) == 0.0);
    std::vector<double> b{10.0, 11.0};
    CHECK(ks_two_sample(a, b) == doctest::Approx(1.0));
    // half-overlapping step ecdfs
    std::vector<double> c{1.0, 2.0};
    std::vector<double> d{2.0, 3.0};
    CHECK(ks_two_sample(c, d) == doctest::Approx(0.5));
}

TEST_CASE("fit recovers an exact inverse square root law") {
    std::vector<std::size_t> ns{64, 128, 256, 512, 1024};
    std::vector<double> vals;
    for (auto n : ns) vals.push_back(2.7 / std::sqrt(static_cast<double>(n)));
    auto fit = fit_inverse_sqrt(ns, vals);
    CHECK(fit.coeff == doctest::Approx(2.7).epsilon(1e-12));
    CHECK(fit.exponent == 0.5);
    CHECK(fit.max_rel_residual <= 1e-12);
}

TEST_CASE("fit flags a wrong exponent with a large residual") {
    std::vector<std::size_t> ns{64, 128, 256, 512, 1024};
    std::vector<double> vals;
    for (auto n : ns) vals.push_back(5.0 / static_cast<double>(n));
    auto fit = fit_inverse_sqrt(ns, vals);
    CHECK(fit.max_rel_residual > 0.5);
}

TEST_CASE("fit input validation") {
    std::vector<std::size_t> ns{4, 9};
    std::vector<double> one{1.0};
    std::vector<std::size_t> one_n{4};
    CHECK_THROWS_AS(fit_inverse_sqrt(one_n, one), DomainError);
    std::vector<double> neg{1.0, -1.0};
    CHECK_THROWS_AS(fit_inverse_sqrt(ns, neg), NonPositiveValue);
    std::vector<double> zero{1.0, 0.0};
    CHECK_THROWS_AS(fit_inverse_sqrt(ns, zero), NonPositiveValue);
    std::vector<std::size_t> ns0{0, 9};
    std::vector<double> ok{1.0, 2.0};
    CHECK_THROWS_AS(fit_inverse_sqrt(ns0, ok), NonPositiveValue);
    std::vector<double> three{1.0, 2.0, 3.0};
    CHECK_THROWS_AS(fit_inverse_sqrt(ns, three), DomainError);
}

TEST_CASE("exact lattice tail follows the inverse square root law") {
    // killed +-ln2 walk started at a=1: survival probabilities from dense DP
    oracles::LatticeWalkDp dp(1.0, std::log(2.0),
                              {{+1, 0.5}, {-1, 0.5}});
    std::vector<std::size_t> ns{64, 128, 256, 512, 1024};
    std::vector<double> vals;
    for (auto n : ns) {
        dp.advance(n);
        vals.push_back(dp.survival());
    }
    auto fit = fit_inverse_sqrt(ns, vals);
    CHECK(fit.max_rel_residual <= 0.1);
    CHECK(fit.coeff > 0.0);
}

#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "bprelab/positive_matrix.hpp"
#include "bprelab/rng.hpp"

namespace bprelab {

// One parent type's offspring law given as an explicit finite table of
// count vectors with probabilities. Probabilities must sum to 1 within
// 1e-12 and are renormalized on construction.
struct FiniteTableRow {
    struct Atom {
        std::vector<std::uint32_t> counts;
        double prob = 0.0;
    };
    std::vector<Atom> atoms;
    std::vector<double> cum;  // cumulative probabilities for sampling
};

// One parent type's offspring law: with probability q0 no children at all,
// otherwise independent per-child-type counts, each truncated geometric.
// `mean` holds the pre-truncation target means; the tail mass beyond `cap`
// is collapsed into the cap atom, and realized moments are reported from
// the truncated tables.
struct ZeroInflatedGeometricRow {
    double q0 = 0.0;
    std::vector<double> mean;
    std::uint32_t cap = 64;
    // probability table per child type, index = count in [0, cap]
    std::vector<std::vector<double>> tables;
};

using OffspringRow = std::variant<FiniteTableRow, ZeroInflatedGeometricRow>;

FiniteTableRow make_finite_table_row(std::vector<FiniteTableRow::Atom> atoms);
ZeroInflatedGeometricRow make_zero_inflated_row(double q0, std::vector<double> mean,
                                                std::uint32_t cap = 64);

// Offspring law of a p-type generation: one row per parent type.
struct OffspringLaw {
    std::size_t p = 0;
    std::vector<OffspringRow> rows;
};

OffspringLaw make_offspring_law(std::size_t p, std::vector<OffspringRow> rows);

// Exact moment package of one law: mean matrix M(i,j) = E[xi(i,j)], second
// factorial moment matrices B_i(k,l) = E[xi(i,k)(xi(i,l) - delta_kl)],
// per-entry variances sigma2(i,j) = B_i(j,j) + M(i,j) - M(i,j)^2, and the
// scalar summaries mu = sum_i |B_i| and eta = mu / |M|^2.
struct MomentSummary {
    PosMatrix mean;
    std::vector<PosMatrix> hessians;
    PosMatrix sigma2;
    double mu = 0.0;
    double eta = 0.0;
};

// g^{(i)}(s) = E[prod_j s_j^{xi(i,j)}] for s in [0,1]^p; 0^0 = 1.
// Throws DomainError outside the cube.
double gf_eval(const OffspringLaw& law, std::size_t i, std::span<const double> s);

// Applies every row's generating function: (f(s))_i = g^{(i)}(s).
std::vector<double> gf_vector_eval(const OffspringLaw& law, std::span<const double> s);

// One parent of type i.
std::vector<std::uint64_t> sample_offspring(const OffspringLaw& law, std::size_t i, Rng& rng);

// Aggregated children of `count` i.i.d. parents of type i, added into `acc`.
// Uses per-parent draws for small counts and multinomial chunking for large
// ones; throws OverflowGuard if any accumulated count would leave the exact
// integer range.
void sample_offspring_sum(const OffspringLaw& law, std::size_t i, std::uint64_t count,
                          std::vector<std::uint64_t>& acc, Rng& rng);

MomentSummary moments(const OffspringLaw& law);

// Membership report for the uniformity class: per row, the witnesses of
//   (1) min_j P(xi(i,j) >= 2) >= eps
//   (2) P(xi(i,.) = 0) >= eps
//   (3) E[|xi(i,.)|^2] <= K.
struct ClassReport {
    struct RowWitness {
        double min_prob_geq2 = 0.0;
        double prob_zero_row = 0.0;
        double second_moment = 0.0;
        bool pass_geq2 = false;
        bool pass_zero = false;
        bool pass_second = false;
    };
    double eps = 0.0;
    double K = 0.0;
    std::vector<RowWitness> rows;
    bool pass = false;
};

ClassReport validate_class(const OffspringLaw& law, double eps, double K);

}  // namespace bprelab

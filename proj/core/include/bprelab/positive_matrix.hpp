#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "bprelab/errors.hpp"

namespace bprelab {

// Square matrix with nonnegative finite entries, row-major storage.
// Vectors act on the left as rows: (xM)_j = sum_i x_i M(i,j).
class PosMatrix {
  public:
    PosMatrix() = default;
    PosMatrix(std::size_t p, double fill);
    PosMatrix(std::size_t p, std::vector<double> entries);

    static PosMatrix identity(std::size_t p);

    std::size_t dim() const { return p_; }
    double operator()(std::size_t i, std::size_t j) const { return a_[i * p_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return a_[i * p_ + j]; }
    std::span<const double> entries() const { return a_; }

    PosMatrix multiply(const PosMatrix& rhs) const;

    bool operator==(const PosMatrix&) const = default;

  private:
    std::size_t p_ = 0;
    std::vector<double> a_;
};

// Point of the simplex: nonnegative coordinates with unit L1 norm.
// Construction renormalizes any input with positive sum and rejects the rest.
class SimplexPoint {
  public:
    explicit SimplexPoint(std::vector<double> coords);

    static SimplexPoint barycenter(std::size_t p);
    static SimplexPoint vertex(std::size_t p, std::size_t i);

    std::size_t dim() const { return x_.size(); }
    double operator[](std::size_t i) const { return x_[i]; }
    std::span<const double> coords() const { return x_; }

    bool operator==(const SimplexPoint&) const = default;

  private:
    std::vector<double> x_;
};

// Running product of matrices kept in normalized form: `bar_matrix` has unit
// column sums and carries the direction information, `col_log_norms[j]`
// carries ln|M_0 ... M_{n-1} e_j| and `log_norm` the global ln|M_0 ... M_{n-1}|,
// so magnitudes survive arbitrarily long chains.
struct NormalizedProduct {
    PosMatrix bar_matrix;
    std::vector<double> col_log_norms;
    double log_norm = 0.0;
    std::size_t length = 0;
};

// Sum of all entries (L1 norm of a nonnegative matrix).
double l1_norm(const PosMatrix& m);
double l1_norm(std::span<const double> v);

// Smallest column sum v(M).
double min_col_sum(const PosMatrix& m);

// max(1/v(M), |M|); throws DegenerateMatrix when v(M) = 0.
double cond_bound(const PosMatrix& m);

// Whether all entry ratios lie in [1/B, B] (entrywise comparability class).
// Requires B >= 1; matrices with a zero entry are never in the class.
bool in_class_B(const PosMatrix& m, double B);

// Row sums of m, in row order.
std::vector<double> row_sums(const PosMatrix& m);

// Projective action x.M = xM / |xM|; throws DegenerateMatrix if xM = 0.
SimplexPoint act_right(const SimplexPoint& x, const PosMatrix& m);

// Cocycle increment ln|xM|; throws DegenerateMatrix if xM = 0.
double rho(const SimplexPoint& x, const PosMatrix& m);

// Hennion projective distance
//   d(x,y) = (1 - m(x,y) m(y,x)) / (1 + m(x,y) m(y,x)),
//   m(x,y) = min over {i : y_i > 0} of x_i / y_i.
// Takes values in [0,1], vanishes iff x = y, and dominates |x-y|_1 / 2.
double hennion_distance(const SimplexPoint& x, const SimplexPoint& y);

// Empirical contraction coefficient of the projective action: the max of
// d(ei.M, ej.M) over distinct basis vertices. Submultiplicative over
// products and Lipschitz-dominates image distances on simplex pairs.
double contraction_coeff(const PosMatrix& m);

// Accumulates factors into a NormalizedProduct. Empty chain = identity with
// log_norm 0. Normalization happens at every step, so chains of length 10^6
// neither overflow nor underflow. Throws DegenerateMatrix when a column of
// the running product vanishes.
NormalizedProduct product_chain(std::span<const PosMatrix> ms);
void product_extend(NormalizedProduct& prod, const PosMatrix& m);

// Log of each column's L1 norm of the accumulated product.
std::vector<double> column_log_norms(const NormalizedProduct& prod);

// First column of bar_matrix as a simplex direction; near rank-one products
// all columns agree with it.
SimplexPoint rank_one_direction(const NormalizedProduct& prod);

}  // namespace bprelab

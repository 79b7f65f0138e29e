#include "bprelab/positive_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bprelab {

namespace {

void check_entries(std::size_t p, std::span<const double> a) {
    if (p < 1) throw DomainError("matrix dimension must be >= 1");
    if (a.size() != p * p) throw DomainError("matrix entry count does not match dimension");
    for (double v : a) {
        if (!std::isfinite(v) || v < 0.0)
            throw DomainError("matrix entries must be finite and nonnegative");
    }
}

}  // namespace

PosMatrix::PosMatrix(std::size_t p, double fill) : p_(p), a_(p * p, fill) {
    check_entries(p_, a_);
}

PosMatrix::PosMatrix(std::size_t p, std::vector<double> entries)
    : p_(p), a_(std::move(entries)) {
    check_entries(p_, a_);
}

PosMatrix PosMatrix::identity(std::size_t p) {
    PosMatrix m(p, 0.0);
    for (std::size_t i = 0; i < p; ++i) m(i, i) = 1.0;
    return m;
}

PosMatrix PosMatrix::multiply(const PosMatrix& rhs) const {
    if (rhs.p_ != p_) throw DomainError("matrix dimensions differ");
    PosMatrix out(p_, 0.0);
    for (std::size_t i = 0; i < p_; ++i) {
        for (std::size_t k = 0; k < p_; ++k) {
            const double v = (*this)(i, k);
            if (v == 0.0) continue;
            for (std::size_t j = 0; j < p_; ++j) out(i, j) += v * rhs(k, j);
        }
    }
    return out;
}

SimplexPoint::SimplexPoint(std::vector<double> coords) : x_(std::move(coords)) {
    if (x_.empty()) throw DomainError("simplex point needs at least one coordinate");
    double sum = 0.0;
    for (double v : x_) {
        if (!std::isfinite(v) || v < 0.0)
            throw DomainError("simplex coordinates must be finite and nonnegative");
        sum += v;
    }
    if (!(sum >= 1e-12)) throw DomainError("simplex point has non-positive mass");
    for (double& v : x_) v /= sum;
}

SimplexPoint SimplexPoint::barycenter(std::size_t p) {
    return SimplexPoint(std::vector<double>(p, 1.0));
}

SimplexPoint SimplexPoint::vertex(std::size_t p, std::size_t i) {
    std::vector<double> v(p, 0.0);
    v.at(i) = 1.0;
    return SimplexPoint(std::move(v));
}

double l1_norm(const PosMatrix& m) { return l1_norm(m.entries()); }

double l1_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

double min_col_sum(const PosMatrix& m) {
    const std::size_t p = m.dim();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < p; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < p; ++i) s += m(i, j);
        best = std::min(best, s);
    }
    return best;
}

double cond_bound(const PosMatrix& m) {
    const double v = min_col_sum(m);
    if (v <= 0.0) throw DegenerateMatrix("matrix has a zero column");
    return std::max(1.0 / v, l1_norm(m));
}

bool in_class_B(const PosMatrix& m, double B) {
    if (!(B >= 1.0)) throw DomainError("comparability bound must be >= 1");
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (double v : m.entries()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (lo <= 0.0) return false;
    return hi <= B * lo;
}

std::vector<double> row_sums(const PosMatrix& m) {
    const std::size_t p = m.dim();
    std::vector<double> out(p, 0.0);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) out[i] += m(i, j);
    return out;
}

SimplexPoint act_right(const SimplexPoint& x, const PosMatrix& m) {
    const std::size_t p = m.dim();
    if (x.dim() != p) throw DomainError("dimension mismatch in projective action");
    std::vector<double> y(p, 0.0);
    for (std::size_t i = 0; i < p; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        for (std::size_t j = 0; j < p; ++j) y[j] += xi * m(i, j);
    }
    double s = 0.0;
    for (double v : y) s += v;
    if (!(s > 0.0)) throw DegenerateMatrix("projective action sent the point to zero");
    for (double& v : y) v /= s;
    // Renormalized by hand above; the constructor only re-checks validity.
    return SimplexPoint(std::move(y));
}

double rho(const SimplexPoint& x, const PosMatrix& m) {
    const std::size_t p = m.dim();
    if (x.dim() != p) throw DomainError("dimension mismatch in cocycle");
    // |xM| = sum_j (xM)_j = sum_i x_i * rowsum_i(M).
    double s = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        double r = 0.0;
        for (std::size_t j = 0; j < p; ++j) r += m(i, j);
        s += xi * r;
    }
    if (!(s > 0.0)) throw DegenerateMatrix("cocycle undefined: xM = 0");
    return std::log(s);
}

double hennion_distance(const SimplexPoint& x, const SimplexPoint& y) {
    if (x.dim() != y.dim()) throw DomainError("dimension mismatch in Hennion distance");
    auto ratio = [](const SimplexPoint& u, const SimplexPoint& v) {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < u.dim(); ++i) {
            if (v[i] > 0.0) m = std::min(m, u[i] / v[i]);
        }
        return m;  // v != 0 on the simplex, so some v_i > 0
    };
    const double prod = ratio(x, y) * ratio(y, x);
    return (1.0 - prod) / (1.0 + prod);
}

double contraction_coeff(const PosMatrix& m) {
    const std::size_t p = m.dim();
    std::vector<SimplexPoint> images;
    images.reserve(p);
    for (std::size_t i = 0; i < p; ++i)
        images.push_back(act_right(SimplexPoint::vertex(p, i), m));
    double best = 0.0;
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = i + 1; j < p; ++j)
            best = std::max(best, hennion_distance(images[i], images[j]));
    return best;
}

void product_extend(NormalizedProduct& prod, const PosMatrix& m) {
    const std::size_t p = m.dim();
    if (prod.length == 0 && prod.bar_matrix.dim() == 0) {
        prod.bar_matrix = PosMatrix::identity(p);
        prod.col_log_norms.assign(p, 0.0);
    }
    if (prod.bar_matrix.dim() != p) throw DomainError("dimension mismatch in product chain");

    const double shift = *std::max_element(prod.col_log_norms.begin(), prod.col_log_norms.end());
    // Columns of the running product, rescaled by exp(col_log_norm - shift).
    std::vector<double> w(p);
    for (std::size_t l = 0; l < p; ++l) w[l] = std::exp(prod.col_log_norms[l] - shift);

    PosMatrix next(p, 0.0);
    std::vector<double> next_cln(p);
    for (std::size_t j = 0; j < p; ++j) {
        double colsum = 0.0;
        for (std::size_t i = 0; i < p; ++i) {
            double v = 0.0;
            for (std::size_t l = 0; l < p; ++l)
                v += w[l] * prod.bar_matrix(i, l) * m(l, j);
            next(i, j) = v;
            colsum += v;
        }
        if (!(colsum > 0.0))
            throw DegenerateMatrix("product chain column vanished");
        for (std::size_t i = 0; i < p; ++i) next(i, j) /= colsum;
        next_cln[j] = shift + std::log(colsum);
    }
    prod.bar_matrix = std::move(next);
    prod.col_log_norms = std::move(next_cln);

    const double top = *std::max_element(prod.col_log_norms.begin(), prod.col_log_norms.end());
    double acc = 0.0;
    for (double c : prod.col_log_norms) acc += std::exp(c - top);
    prod.log_norm = top + std::log(acc);
    prod.length += 1;
}

NormalizedProduct product_chain(std::span<const PosMatrix> ms) {
    NormalizedProduct prod;
    if (ms.empty()) {
        // Empty chain is the identity; callers that need a concrete
        // dimension should extend it at least once.
        prod.log_norm = 0.0;
        return prod;
    }
    for (const auto& m : ms) product_extend(prod, m);
    return prod;
}

std::vector<double> column_log_norms(const NormalizedProduct& prod) {
    return prod.col_log_norms;
}

SimplexPoint rank_one_direction(const NormalizedProduct& prod) {
    const std::size_t p = prod.bar_matrix.dim();
    if (p == 0) throw DomainError("empty product has no direction");
    std::vector<double> col(p);
    for (std::size_t i = 0; i < p; ++i) col[i] = prod.bar_matrix(i, 0);
    return SimplexPoint(std::move(col));
}

}  // namespace bprelab

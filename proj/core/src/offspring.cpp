#include "bprelab/offspring.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "bprelab/errors.hpp"

namespace bprelab {

namespace {

constexpr std::uint64_t kMaxExactCount = (std::uint64_t{1} << 63) - 1;
constexpr std::uint64_t kPerParentThreshold = 32;

void check_prob_sum(double sum) {
    if (std::abs(sum - 1.0) > 1e-12)
        throw DomainError("probabilities sum to " + std::to_string(sum) + ", expected 1");
}

std::uint64_t draw_binomial(Rng& rng, std::uint64_t n, double prob) {
    if (prob <= 0.0 || n == 0) return 0;
    if (prob >= 1.0) return n;
    std::binomial_distribution<std::int64_t> dist(static_cast<std::int64_t>(n), prob);
    return static_cast<std::uint64_t>(dist(rng));
}

// Multinomial counts over a probability table, drawn as chained binomials
// in fixed index order.
void multinomial_into(Rng& rng, std::uint64_t n, std::span<const double> probs,
                      std::span<std::uint64_t> out) {
    double tail = 1.0;
    std::uint64_t left = n;
    for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
        if (left == 0) {
            out[k] = 0;
            continue;
        }
        const double cond = tail > 0.0 ? std::min(1.0, probs[k] / tail) : 1.0;
        const std::uint64_t c = draw_binomial(rng, left, cond);
        out[k] = c;
        left -= c;
        tail -= probs[k];
    }
    out[probs.size() - 1] = left;
}

void add_checked(std::uint64_t& acc, std::uint64_t add) {
    if (acc > kMaxExactCount - add)
        throw OverflowGuard("population count left the exact integer range");
    acc += add;
}

std::size_t sample_index(Rng& rng, std::span<const double> cum) {
    const double u = rng.uniform();
    for (std::size_t k = 0; k + 1 < cum.size(); ++k) {
        if (u < cum[k]) return k;
    }
    return cum.size() - 1;
}

}  // namespace

FiniteTableRow make_finite_table_row(std::vector<FiniteTableRow::Atom> atoms) {
    if (atoms.empty()) throw DomainError("finite table row needs at least one atom");
    const std::size_t p = atoms.front().counts.size();
    double sum = 0.0;
    for (const auto& a : atoms) {
        if (a.counts.size() != p) throw DomainError("finite table atoms disagree on type count");
        if (!(a.prob >= 0.0) || !std::isfinite(a.prob))
            throw DomainError("finite table atom has invalid probability");
        sum += a.prob;
    }
    check_prob_sum(sum);
    FiniteTableRow row;
    row.atoms = std::move(atoms);
    double c = 0.0;
    row.cum.reserve(row.atoms.size());
    for (const auto& a : row.atoms) {
        c += a.prob;
        row.cum.push_back(c);
    }
    row.cum.back() = 1.0;
    return row;
}

ZeroInflatedGeometricRow make_zero_inflated_row(double q0, std::vector<double> mean,
                                                std::uint32_t cap) {
    if (!(q0 >= 0.0 && q0 < 1.0)) throw DomainError("zero-inflation weight must lie in [0,1)");
    if (mean.empty()) throw DomainError("zero-inflated row needs mean parameters");
    if (cap < 2) throw DomainError("truncation cap must be at least 2");
    ZeroInflatedGeometricRow row;
    row.q0 = q0;
    row.mean = std::move(mean);
    row.cap = cap;
    row.tables.reserve(row.mean.size());
    for (double m : row.mean) {
        if (!(m > 0.0) || !std::isfinite(m))
            throw DomainError("geometric mean parameter must be positive and finite");
        const double q = m / (1.0 + m);
        std::vector<double> t(cap + 1, 0.0);
        double mass = 1.0;
        double pk = 1.0 - q;  // P(X = k) = (1-q) q^k before truncation
        for (std::uint32_t k = 0; k < cap; ++k) {
            t[k] = pk;
            mass -= pk;
            pk *= q;
        }
        t[cap] = std::max(0.0, mass);  // tail collapsed into the cap atom
        row.tables.push_back(std::move(t));
    }
    return row;
}

OffspringLaw make_offspring_law(std::size_t p, std::vector<OffspringRow> rows) {
    if (p < 1) throw DomainError("offspring law needs at least one type");
    if (rows.size() != p) throw DomainError("offspring law needs one row per type");
    for (const auto& row : rows) {
        const std::size_t width = std::visit(
            [](const auto& r) {
                if constexpr (std::is_same_v<std::decay_t<decltype(r)>, FiniteTableRow>)
                    return r.atoms.front().counts.size();
                else
                    return r.mean.size();
            },
            row);
        if (width != p) throw DomainError("offspring row width does not match type count");
    }
    return OffspringLaw{p, std::move(rows)};
}

namespace {

double table_pgf(const std::vector<double>& table, double s) {
    // Horner evaluation of sum_k table[k] s^k.
    double acc = 0.0;
    for (std::size_t k = table.size(); k-- > 0;) acc = acc * s + table[k];
    return acc;
}

double table_moment(const std::vector<double>& table, int order) {
    // order 1: mean; order 2: E[X(X-1)]; order 3: E[X^2]
    double acc = 0.0;
    for (std::size_t k = 0; k < table.size(); ++k) {
        const double kk = static_cast<double>(k);
        if (order == 1) acc += table[k] * kk;
        if (order == 2) acc += table[k] * kk * (kk - 1.0);
        if (order == 3) acc += table[k] * kk * kk;
    }
    return acc;
}

struct RowMoments {
    std::vector<double> mean;
    PosMatrix hessian;
    double prob_zero = 0.0;
    double min_prob_geq2 = 0.0;
    double second_moment = 0.0;  // E[(sum_j xi_j)^2]
};

RowMoments row_moments(const FiniteTableRow& row, std::size_t p) {
    RowMoments rm;
    rm.mean.assign(p, 0.0);
    rm.hessian = PosMatrix(p, 0.0);
    std::vector<double> geq2(p, 0.0);
    for (const auto& a : row.atoms) {
        double total = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            const double c = static_cast<double>(a.counts[j]);
            rm.mean[j] += a.prob * c;
            total += c;
            if (a.counts[j] >= 2) geq2[j] += a.prob;
            for (std::size_t l = 0; l < p; ++l) {
                const double cl = static_cast<double>(a.counts[l]);
                rm.hessian(j, l) += a.prob * c * (cl - (j == l ? 1.0 : 0.0));
            }
        }
        if (total == 0.0) rm.prob_zero += a.prob;
        rm.second_moment += a.prob * total * total;
    }
    rm.min_prob_geq2 = *std::min_element(geq2.begin(), geq2.end());
    return rm;
}

RowMoments row_moments(const ZeroInflatedGeometricRow& row, std::size_t p) {
    RowMoments rm;
    rm.mean.assign(p, 0.0);
    rm.hessian = PosMatrix(p, 0.0);
    const double on = 1.0 - row.q0;
    std::vector<double> m_hat(p), fact2(p), sq(p), p0(p);
    for (std::size_t j = 0; j < p; ++j) {
        m_hat[j] = table_moment(row.tables[j], 1);
        fact2[j] = table_moment(row.tables[j], 2);
        sq[j] = table_moment(row.tables[j], 3);
        p0[j] = row.tables[j][0];
    }
    double prod_p0 = 1.0;
    double mean_total = 0.0;
    double var_total = 0.0;
    double min_geq2 = 1.0;
    for (std::size_t j = 0; j < p; ++j) {
        rm.mean[j] = on * m_hat[j];
        for (std::size_t l = 0; l < p; ++l) {
            rm.hessian(j, l) = on * (j == l ? fact2[j] : m_hat[j] * m_hat[l]);
        }
        prod_p0 *= p0[j];
        mean_total += m_hat[j];
        var_total += sq[j] - m_hat[j] * m_hat[j];
        min_geq2 = std::min(min_geq2, on * (1.0 - p0[j] - row.tables[j][1]));
    }
    rm.prob_zero = row.q0 + on * prod_p0;
    rm.min_prob_geq2 = min_geq2;
    rm.second_moment = on * (var_total + mean_total * mean_total);
    return rm;
}

RowMoments row_moments(const OffspringRow& row, std::size_t p) {
    return std::visit([p](const auto& r) { return row_moments(r, p); }, row);
}

}  // namespace

double gf_eval(const OffspringLaw& law, std::size_t i, std::span<const double> s) {
    if (i >= law.p) throw DomainError("row index out of range");
    if (s.size() != law.p) throw DomainError("generating function argument has wrong dimension");
    for (double v : s) {
        if (!(v >= 0.0 && v <= 1.0))
            throw DomainError("generating function argument outside [0,1]^p");
    }
    return std::visit(
        [&](const auto& row) -> double {
            using T = std::decay_t<decltype(row)>;
            if constexpr (std::is_same_v<T, FiniteTableRow>) {
                double acc = 0.0;
                for (const auto& a : row.atoms) {
                    double term = a.prob;
                    for (std::size_t j = 0; j < law.p && term != 0.0; ++j) {
                        // 0^0 = 1: zero exponents contribute nothing
                        for (std::uint32_t c = 0; c < a.counts[j]; ++c) term *= s[j];
                    }
                    acc += term;
                }
                return acc;
            } else {
                double prod = 1.0;
                for (std::size_t j = 0; j < law.p; ++j) prod *= table_pgf(row.tables[j], s[j]);
                return row.q0 + (1.0 - row.q0) * prod;
            }
        },
        law.rows[i]);
}

std::vector<double> gf_vector_eval(const OffspringLaw& law, std::span<const double> s) {
    std::vector<double> out(law.p);
    for (std::size_t i = 0; i < law.p; ++i) out[i] = gf_eval(law, i, s);
    return out;
}

std::vector<std::uint64_t> sample_offspring(const OffspringLaw& law, std::size_t i, Rng& rng) {
    if (i >= law.p) throw DomainError("row index out of range");
    std::vector<std::uint64_t> out(law.p, 0);
    sample_offspring_sum(law, i, 1, out, rng);
    return out;
}

void sample_offspring_sum(const OffspringLaw& law, std::size_t i, std::uint64_t count,
                          std::vector<std::uint64_t>& acc, Rng& rng) {
    if (i >= law.p) throw DomainError("row index out of range");
    if (acc.size() != law.p) throw DomainError("accumulator has wrong dimension");
    if (count == 0) return;
    std::visit(
        [&](const auto& row) {
            using T = std::decay_t<decltype(row)>;
            if constexpr (std::is_same_v<T, FiniteTableRow>) {
                if (count <= kPerParentThreshold) {
                    for (std::uint64_t r = 0; r < count; ++r) {
                        const auto& a = row.atoms[sample_index(rng, row.cum)];
                        for (std::size_t j = 0; j < law.p; ++j)
                            add_checked(acc[j], a.counts[j]);
                    }
                } else {
                    std::vector<double> probs(row.atoms.size());
                    for (std::size_t k = 0; k < row.atoms.size(); ++k) probs[k] = row.atoms[k].prob;
                    std::vector<std::uint64_t> ns(row.atoms.size(), 0);
                    multinomial_into(rng, count, probs, ns);
                    for (std::size_t k = 0; k < row.atoms.size(); ++k) {
                        if (ns[k] == 0) continue;
                        for (std::size_t j = 0; j < law.p; ++j) {
                            const std::uint64_t childs = ns[k] * row.atoms[k].counts[j];
                            if (row.atoms[k].counts[j] != 0 && childs / ns[k] != row.atoms[k].counts[j])
                                throw OverflowGuard("population count left the exact integer range");
                            add_checked(acc[j], childs);
                        }
                    }
                }
            } else {
                const std::uint64_t active =
                    row.q0 > 0.0 ? count - draw_binomial(rng, count, row.q0) : count;
                if (active == 0) return;
                if (active <= kPerParentThreshold) {
                    for (std::uint64_t r = 0; r < active; ++r) {
                        for (std::size_t j = 0; j < law.p; ++j) {
                            const double u = rng.uniform();
                            double c = 0.0;
                            std::uint32_t k = 0;
                            for (; k < row.cap; ++k) {
                                c += row.tables[j][k];
                                if (u < c) break;
                            }
                            add_checked(acc[j], k);
                        }
                    }
                } else {
                    std::vector<std::uint64_t> ns;
                    for (std::size_t j = 0; j < law.p; ++j) {
                        ns.assign(row.tables[j].size(), 0);
                        multinomial_into(rng, active, row.tables[j], ns);
                        for (std::size_t k = 1; k < ns.size(); ++k) {
                            if (ns[k] == 0) continue;
                            const std::uint64_t childs = ns[k] * static_cast<std::uint64_t>(k);
                            if (childs / ns[k] != k)
                                throw OverflowGuard("population count left the exact integer range");
                            add_checked(acc[j], childs);
                        }
                    }
                }
            }
        },
        law.rows[i]);
}

MomentSummary moments(const OffspringLaw& law) {
    MomentSummary ms;
    ms.mean = PosMatrix(law.p, 0.0);
    ms.sigma2 = PosMatrix(law.p, 0.0);
    ms.hessians.reserve(law.p);
    for (std::size_t i = 0; i < law.p; ++i) {
        RowMoments rm = row_moments(law.rows[i], law.p);
        for (std::size_t j = 0; j < law.p; ++j) ms.mean(i, j) = rm.mean[j];
        ms.hessians.push_back(rm.hessian);
    }
    for (std::size_t i = 0; i < law.p; ++i) {
        for (std::size_t j = 0; j < law.p; ++j) {
            const double m = ms.mean(i, j);
            ms.sigma2(i, j) = ms.hessians[i](j, j) + m - m * m;
        }
        ms.mu += l1_norm(ms.hessians[i]);
    }
    const double norm = l1_norm(ms.mean);
    if (!(norm > 0.0)) throw DegenerateMatrix("offspring law has zero mean matrix");
    ms.eta = ms.mu / (norm * norm);
    return ms;
}

ClassReport validate_class(const OffspringLaw& law, double eps, double K) {
    if (!(eps > 0.0)) throw DomainError("class threshold eps must be positive");
    if (!(K > 0.0)) throw DomainError("class bound K must be positive");
    ClassReport report;
    report.eps = eps;
    report.K = K;
    report.pass = true;
    for (std::size_t i = 0; i < law.p; ++i) {
        RowMoments rm = row_moments(law.rows[i], law.p);
        ClassReport::RowWitness w;
        w.min_prob_geq2 = rm.min_prob_geq2;
        w.prob_zero_row = rm.prob_zero;
        w.second_moment = rm.second_moment;
        w.pass_geq2 = rm.min_prob_geq2 >= eps;
        w.pass_zero = rm.prob_zero >= eps;
        w.pass_second = rm.second_moment <= K;
        report.pass = report.pass && w.pass_geq2 && w.pass_zero && w.pass_second;
        report.rows.push_back(w);
    }
    return report;
}

}  // namespace bprelab

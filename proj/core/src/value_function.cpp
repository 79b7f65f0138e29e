#include "bprelab/value_function.hpp"

#include <algorithm>
#include <cmath>

#include "bprelab/errors.hpp"

namespace bprelab {

UnitLatticeSpec detect_unit_lattice(const EnvironmentEnsemble& ens) {
    UnitLatticeSpec spec;
    std::vector<double> incr(ens.atom_count());
    for (std::size_t k = 0; k < ens.atom_count(); ++k) {
        const auto& rs = ens.atom(k).mean_row_sums;
        const double lo = *std::min_element(rs.begin(), rs.end());
        const double hi = *std::max_element(rs.begin(), rs.end());
        if (!(lo > 0.0) || hi - lo > 1e-9 * hi) return spec;  // row sums not constant
        incr[k] = std::log(0.5 * (lo + hi));
    }
    double h = 0.0;
    for (double d : incr)
        if (std::abs(d) > 1e-12) h = std::max(h, std::abs(d));
    if (h == 0.0) return spec;  // all increments zero: degenerate walk
    double mean = 0.0;
    for (std::size_t k = 0; k < ens.atom_count(); ++k) {
        const double d = incr[k];
        if (std::abs(d) > 1e-12 && std::abs(std::abs(d) - h) > 1e-9 * h)
            return spec;  // a second step size: not unit-step
        mean += ens.atom(k).weight * d;
    }
    if (std::abs(mean) > 1e-9 * h) return spec;  // drift: harmonic form invalid
    spec.lattice = true;
    spec.h = h;
    return spec;
}

ValueEstimator lattice_value_estimator(const EnvironmentEnsemble& ens, double a) {
    if (!(a >= 0.0)) throw DomainError("root level must be nonnegative");
    const UnitLatticeSpec spec = detect_unit_lattice(ens);
    if (!spec.lattice) throw DomainError("ensemble is not a mean-zero unit-step lattice walk");
    const double h = spec.h;

    // Largest lattice offset with a + m h <= 0.
    auto kill_offset = [a, h]() {
        long long m = static_cast<long long>(std::floor(-a / h + 0.5e-9));
        while (a + static_cast<double>(m) * h > 1e-12) --m;
        while (a + static_cast<double>(m + 1) * h <= 1e-12) ++m;
        return m;
    };
    const long long m_kill = kill_offset();

    auto value_at = [a, h, m_kill](double s) {
        if (s <= 0.0) return 0.0;
        const auto m = static_cast<long long>(std::llround((s - a) / h));
        return m > m_kill ? h * static_cast<double>(m - m_kill) : 0.0;
    };

    ValueEstimator est;
    est.fn = [value_at](const SimplexPoint&, double s) { return value_at(s); };
    est.method = "lattice_exact";
    est.root_stderr = 0.0;
    if (m_kill < 0) {
        est.root_value = value_at(a);
    } else {
        // Root sits on the killing boundary (a = 0): one-step average.
        double v = 0.0;
        for (std::size_t k = 0; k < ens.atom_count(); ++k) {
            const double d = std::log(ens.atom(k).mean_row_sums.front());
            const double s1 = a + d;
            if (s1 > 0.0) v += ens.atom(k).weight * value_at(s1);
        }
        est.root_value = v;
    }
    return est;
}

ValueEstimator table_value_estimator(const EnvironmentEnsemble& ens, const SimplexPoint& x0,
                                     double a, const ValueTableConfig& cfg, std::uint64_t seed,
                                     unsigned workers) {
    if (!(cfg.a_step > 0.0) || !(cfg.a_max >= cfg.a_step) || cfg.x_bins < 1)
        throw DomainError("value table grid is empty");
    const std::size_t p = ens.p();
    const auto n_a = static_cast<std::size_t>(std::floor(cfg.a_max / cfg.a_step)) + 1;

    std::vector<double> grid(n_a);
    for (std::size_t i = 0; i < n_a; ++i) grid[i] = static_cast<double>(i) * cfg.a_step;

    std::vector<std::vector<double>> values(cfg.x_bins, std::vector<double>(n_a, 0.0));
    std::vector<std::vector<double>> errors(cfg.x_bins, std::vector<double>(n_a, 0.0));
    for (std::size_t b = 0; b < cfg.x_bins; ++b) {
        std::vector<double> rep(p, 0.0);
        const double first = (static_cast<double>(b) + 0.5) / static_cast<double>(cfg.x_bins);
        rep[0] = first;
        for (std::size_t j = 1; j < p; ++j) rep[j] = (1.0 - first) / static_cast<double>(p - 1);
        const SimplexPoint xb(std::move(rep));
        for (std::size_t i = 0; i < n_a; ++i) {
            VEstimate est = estimate_V(ens, xb, grid[i], cfg.horizon, cfg.replicas,
                                       seed + b * 7919 + i, workers);
            values[b][i] = est.value;
            errors[b][i] = est.stderr_;
        }
    }

    const std::size_t bins = cfg.x_bins;
    auto lookup = [values, grid, bins](const SimplexPoint& x, double s) {
        if (s <= 0.0) return 0.0;
        auto b = static_cast<std::size_t>(x[0] * static_cast<double>(bins));
        b = std::min(b, bins - 1);
        const auto& col = values[b];
        if (s >= grid.back()) {
            // linear extrapolation: V grows like s + const
            const std::size_t m = grid.size();
            if (m == 1) return std::max(0.0, col[0] + (s - grid[0]));
            const double slope =
                (col[m - 1] - col[m - 2]) / (grid[m - 1] - grid[m - 2]);
            return std::max(0.0, col[m - 1] + slope * (s - grid.back()));
        }
        std::size_t i = 1;
        while (grid[i] < s) ++i;
        const double t = (s - grid[i - 1]) / (grid[i] - grid[i - 1]);
        return std::max(0.0, (1.0 - t) * col[i - 1] + t * col[i]);
    };

    ValueEstimator est;
    est.fn = lookup;
    est.method = "mc_table";
    est.root_value = lookup(x0, a);
    auto b0 = std::min(static_cast<std::size_t>(x0[0] * static_cast<double>(bins)), bins - 1);
    std::size_t nearest = 0;
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (std::abs(grid[i] - a) < std::abs(grid[nearest] - a)) nearest = i;
    est.root_stderr = errors[b0][nearest];
    return est;
}

ValueEstimator make_value_estimator(const EnvironmentEnsemble& ens, const SimplexPoint& x0,
                                    double a, const ValueTableConfig& cfg, std::uint64_t seed,
                                    unsigned workers) {
    if (detect_unit_lattice(ens).lattice) return lattice_value_estimator(ens, a);
    return table_value_estimator(ens, x0, a, cfg, seed, workers);
}

}  // namespace bprelab

#include "bprelab/markov_walk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bprelab/errors.hpp"
#include "bprelab/parallel.hpp"

namespace bprelab {

namespace {

// Flattened, allocation-free stepping of the projective chain and cocycle.
// |xM| = sum_j (xM)_j, so one pass computes the image and the increment.
struct WalkKernel {
    explicit WalkKernel(const EnvironmentEnsemble& ens) : p(ens.p()) {
        const std::size_t k = ens.atom_count();
        mats.resize(k * p * p);
        cumw.resize(k);
        etas.resize(k);
        double c = 0.0;
        for (std::size_t a = 0; a < k; ++a) {
            const auto& atom = ens.atom(a);
            for (std::size_t i = 0; i < p; ++i)
                for (std::size_t j = 0; j < p; ++j)
                    mats[(a * p + i) * p + j] = atom.moms.mean(i, j);
            c += atom.weight;
            cumw[a] = c;
            etas[a] = atom.moms.eta;
        }
        cumw.back() = 1.0;
    }

    std::size_t sample_atom(Rng& rng) const {
        const double u = rng.uniform();
        for (std::size_t a = 0; a + 1 < cumw.size(); ++a)
            if (u < cumw[a]) return a;
        return cumw.size() - 1;
    }

    // Advances x in place and returns the increment rho(x, M_atom).
    double step(double* x, double* y, std::size_t atom) const {
        const double* m = mats.data() + atom * p * p;
        for (std::size_t j = 0; j < p; ++j) y[j] = 0.0;
        for (std::size_t i = 0; i < p; ++i) {
            const double xi = x[i];
            if (xi == 0.0) continue;
            const double* row = m + i * p;
            for (std::size_t j = 0; j < p; ++j) y[j] += xi * row[j];
        }
        double s = 0.0;
        for (std::size_t j = 0; j < p; ++j) s += y[j];
        if (!(s > 0.0)) throw DegenerateMatrix("walk step sent the point to zero");
        const double inv = 1.0 / s;
        for (std::size_t j = 0; j < p; ++j) x[j] = y[j] * inv;
        return std::log(s);
    }

    std::size_t p;
    std::vector<double> mats;
    std::vector<double> cumw;
    std::vector<double> etas;
};

void init_point(const SimplexPoint& x0, std::vector<double>& x) {
    x.assign(x0.coords().begin(), x0.coords().end());
}

}  // namespace

SimplexPoint WalkPath::x_at(std::size_t k) const {
    std::vector<double> c(xs.begin() + static_cast<std::ptrdiff_t>(k * p),
                          xs.begin() + static_cast<std::ptrdiff_t>((k + 1) * p));
    return SimplexPoint(std::move(c));
}

namespace {

WalkPath build_path(const EnvironmentEnsemble& ens, const SimplexPoint& x0, double a,
                    std::span<const std::uint32_t> atoms) {
    if (!(a >= 0.0)) throw DomainError("walk root level must be nonnegative");
    WalkKernel kernel(ens);
    const std::size_t n = atoms.size();
    WalkPath path;
    path.a = a;
    path.p = ens.p();
    path.s.resize(n + 1);
    path.xs.resize((n + 1) * ens.p());
    std::vector<double> x, y(ens.p());
    init_point(x0, x);
    std::copy(x.begin(), x.end(), path.xs.begin());
    path.s[0] = a;

    double prefix = 0.0;              // a-free increment prefix c_k
    double min_prefix = std::numeric_limits<double>::infinity();
    std::size_t argmin = 0;
    for (std::size_t k = 0; k < n; ++k) {
        prefix += kernel.step(x.data(), y.data(), atoms[k]);
        path.s[k + 1] = a + prefix;
        std::copy(x.begin(), x.end(), path.xs.begin() + static_cast<std::ptrdiff_t>((k + 1) * ens.p()));
        if (prefix <= min_prefix) {  // <= keeps the last attaining index
            min_prefix = prefix;
            argmin = k + 1;
        }
        if (!path.tau && a + prefix <= 0.0) path.tau = k + 1;
        if (!path.tau_plus && a + prefix >= 0.0) path.tau_plus = k + 1;
    }
    if (n > 0) {
        path.min_s = a + min_prefix;
        path.argmin_last = argmin;
    } else {
        path.min_s = a;
        path.argmin_last = 0;
    }
    return path;
}

}  // namespace

WalkPath run_walk(const EnvironmentEnsemble& ens, const SimplexPoint& x0, double a,
                  std::size_t n, Rng& rng) {
    std::vector<std::uint32_t> atoms = sample_env_sequence(ens, n, rng);
    return build_path(ens, x0, a, atoms);
}

WalkPath walk_from_atoms(const EnvironmentEnsemble& ens, std::span<const std::uint32_t> atoms,
                         const SimplexPoint& x0, double a) {
    return build_path(ens, x0, a, atoms);
}

ScalarEstimate estimate_sigma2(const EnvironmentEnsemble& ens, std::size_t horizon,
                               std::uint64_t replicas, std::size_t burnin, std::uint64_t seed,
                               unsigned workers) {
    if (horizon == 0 || replicas == 0) throw DomainError("sigma^2 estimate needs a budget");
    WalkKernel kernel(ens);
    auto res = accumulate_replicas(
        replicas, workers, 1,
        [&](std::uint64_t r, std::span<double> out) {
            Rng rng = derive_stream(seed, StreamKind::sigma, r);
            std::vector<double> x(ens.p(), 1.0 / static_cast<double>(ens.p()));
            std::vector<double> y(ens.p());
            for (std::size_t k = 0; k < burnin; ++k)
                kernel.step(x.data(), y.data(), kernel.sample_atom(rng));
            double s = 0.0;
            for (std::size_t k = 0; k < horizon; ++k)
                s += kernel.step(x.data(), y.data(), kernel.sample_atom(rng));
            out[0] = s * s / static_cast<double>(horizon);
        });
    return {res[0].mean, res[0].stderr_, replicas};
}

std::vector<TailRow> tau_tail_table(const EnvironmentEnsemble& ens, const SimplexPoint& x0,
                                    double a, std::span<const std::size_t> horizons,
                                    std::uint64_t replicas, std::uint64_t seed,
                                    unsigned workers) {
    if (horizons.empty()) throw DomainError("tau tail needs at least one horizon");
    if (!(a >= 0.0)) throw DomainError("walk root level must be nonnegative");
    std::vector<std::size_t> hs(horizons.begin(), horizons.end());
    if (!std::is_sorted(hs.begin(), hs.end()) || hs.front() < 1)
        throw DomainError("horizons must be sorted ascending and >= 1");
    const std::size_t n_max = hs.back();
    WalkKernel kernel(ens);

    auto res = accumulate_replicas(
        replicas, workers, hs.size(),
        [&](std::uint64_t r, std::span<double> out) {
            Rng rng = derive_stream(seed, StreamKind::walk, r);
            std::vector<double> x, y(ens.p());
            init_point(x0, x);
            double prefix = 0.0;
            bool alive = true;
            std::size_t next = 0;
            for (std::size_t k = 1; k <= n_max && next < hs.size(); ++k) {
                prefix += kernel.step(x.data(), y.data(), kernel.sample_atom(rng));
                if (alive && a + prefix <= 0.0) alive = false;
                while (next < hs.size() && hs[next] == k) out[next++] = alive ? 1.0 : 0.0;
                if (!alive && next < hs.size()) {
                    // dead forever: flush remaining horizons
                    while (next < hs.size()) out[next++] = 0.0;
                }
            }
        });

    std::vector<TailRow> rows(hs.size());
    for (std::size_t i = 0; i < hs.size(); ++i)
        rows[i] = {hs[i], res[i].mean, res[i].stderr_, replicas};
    return rows;
}

VEstimate estimate_V(const EnvironmentEnsemble& ens, const SimplexPoint& x0, double a,
                     std::size_t horizon, std::uint64_t replicas, std::uint64_t seed,
                     unsigned workers) {
    if (horizon < 4) throw DomainError("V estimate needs horizon >= 4");
    if (!(a >= 0.0)) throw DomainError("walk root level must be nonnegative");
    const std::size_t stages[3] = {horizon / 4, horizon / 2, horizon};
    WalkKernel kernel(ens);

    auto res = accumulate_replicas(
        replicas, workers, 3,
        [&](std::uint64_t r, std::span<double> out) {
            Rng rng = derive_stream(seed, StreamKind::value_function, r);
            std::vector<double> x, y(ens.p());
            init_point(x0, x);
            double prefix = 0.0;
            bool alive = true;
            std::size_t next = 0;
            for (std::size_t k = 1; k <= horizon; ++k) {
                prefix += kernel.step(x.data(), y.data(), kernel.sample_atom(rng));
                if (alive && a + prefix <= 0.0) alive = false;
                while (next < 3 && stages[next] == k) {
                    out[next] = alive ? a + prefix : 0.0;
                    ++next;
                }
            }
        });

    VEstimate est;
    est.curve.reserve(3);
    for (std::size_t i = 0; i < 3; ++i)
        est.curve.push_back({stages[i], res[i].mean, res[i].stderr_, replicas});
    est.value = res[2].mean;
    est.stderr_ = res[2].stderr_;
    double lo = est.curve[0].estimate, hi = lo;
    for (const auto& row : est.curve) {
        lo = std::min(lo, row.estimate);
        hi = std::max(hi, row.estimate);
    }
    est.stable = hi > 0.0 && (hi - lo) <= 0.05 * hi;
    return est;
}

ConditionedSamples conditioned_walk_samples(const EnvironmentEnsemble& ens,
                                            const SimplexPoint& x0, double a, std::size_t n,
                                            std::uint64_t replicas, std::uint64_t seed,
                                            unsigned workers, std::uint64_t min_accept) {
    if (n == 0) throw DomainError("conditioned samples need a positive horizon");
    WalkKernel kernel(ens);
    const double sqn = std::sqrt(static_cast<double>(n));

    ConditionedSamples out;
    out.proposed = replicas;
    out.values = collect_accepted(replicas, workers, [&](std::uint64_t r) -> double {
        Rng rng = derive_stream(seed, StreamKind::walk, r);
        std::vector<double> x, y(ens.p());
        init_point(x0, x);
        double prefix = 0.0;
        for (std::size_t k = 1; k <= n; ++k) {
            prefix += kernel.step(x.data(), y.data(), kernel.sample_atom(rng));
            if (a + prefix <= 0.0) return std::numeric_limits<double>::quiet_NaN();
        }
        return (a + prefix) / sqn;
    });
    out.acceptance = static_cast<double>(out.values.size()) / static_cast<double>(replicas);
    if (out.values.size() < min_accept)
        throw InsufficientAcceptance("conditioned walk sampler accepted " +
                                     std::to_string(out.values.size()) + " of " +
                                     std::to_string(replicas) + " paths");
    return out;
}

std::vector<CellEstimate> local_limit_cells(const EnvironmentEnsemble& ens,
                                            const SimplexPoint& x0, double a,
                                            std::span<const std::size_t> horizons,
                                            std::span<const double> offsets,
                                            std::uint64_t replicas, std::uint64_t seed,
                                            unsigned workers) {
    if (horizons.empty() || offsets.empty()) throw DomainError("local limit needs cells");
    std::vector<std::size_t> hs(horizons.begin(), horizons.end());
    if (!std::is_sorted(hs.begin(), hs.end()) || hs.front() < 1)
        throw DomainError("horizons must be sorted ascending and >= 1");
    const std::size_t n_max = hs.back();
    const std::size_t nb = offsets.size();
    WalkKernel kernel(ens);

    auto res = accumulate_replicas(
        replicas, workers, hs.size() * nb,
        [&](std::uint64_t r, std::span<double> out) {
            Rng rng = derive_stream(seed, StreamKind::local_limit, r);
            std::vector<double> x, y(ens.p());
            init_point(x0, x);
            for (double& v : out) v = 0.0;
            double prefix = 0.0;
            bool alive = true;
            std::size_t next = 0;
            for (std::size_t k = 1; k <= n_max && next < hs.size(); ++k) {
                prefix += kernel.step(x.data(), y.data(), kernel.sample_atom(rng));
                if (alive && a + prefix <= 0.0) alive = false;
                while (next < hs.size() && hs[next] == k) {
                    if (alive) {
                        const double s = a + prefix;
                        for (std::size_t b = 0; b < nb; ++b)
                            if (s >= offsets[b] && s < offsets[b] + 1.0)
                                out[next * nb + b] = 1.0;
                    }
                    ++next;
                }
                if (!alive) break;  // later horizons keep their zero cells
            }
        });

    std::vector<CellEstimate> cells;
    cells.reserve(hs.size() * nb);
    for (std::size_t i = 0; i < hs.size(); ++i)
        for (std::size_t b = 0; b < nb; ++b)
            cells.push_back({hs[i], offsets[b], res[i * nb + b].mean, res[i * nb + b].stderr_,
                             replicas});
    return cells;
}

std::vector<double> doob_weights(const WalkPath& path, const ValueEstimator& v) {
    if (!(v.root_value > 0.0))
        throw RootValueNonpositive("harmonic estimate at the root is not positive");
    const std::size_t n = path.horizon();
    std::vector<double> w(n + 1);
    w[0] = 1.0;
    double run_min = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k <= n; ++k) {
        run_min = std::min(run_min, path.s[k]);
        w[k] = run_min > 0.0 ? v.fn(path.x_at(k), path.s[k]) / v.root_value : 0.0;
    }
    return w;
}

DoobExpectation doob_expectation(const EnvironmentEnsemble& ens, const SimplexPoint& x0,
                                 double a, std::size_t k, std::uint64_t replicas,
                                 const ValueEstimator& v,
                                 const std::function<double(const SimplexPoint&, double)>& phi,
                                 std::uint64_t seed, unsigned workers) {
    if (!(v.root_value > 3.0 * v.root_stderr) || !(v.root_value > 0.0))
        throw RootValueNonpositive("harmonic estimate at the root does not clear 3 stderr");
    WalkKernel kernel(ens);

    auto res = accumulate_replicas(
        replicas, workers, 2,
        [&](std::uint64_t r, std::span<double> out) {
            Rng rng = derive_stream(seed, StreamKind::doob, r);
            std::vector<double> x, y(ens.p());
            init_point(x0, x);
            double prefix = 0.0;
            bool alive = true;
            for (std::size_t i = 0; i < k; ++i) {
                prefix += kernel.step(x.data(), y.data(), kernel.sample_atom(rng));
                if (alive && a + prefix <= 0.0) alive = false;
            }
            const SimplexPoint xk{std::vector<double>(x.begin(), x.end())};
            double w = 0.0;
            if (alive || k == 0) w = v.fn(xk, a + prefix) / v.root_value;
            out[0] = w > 0.0 ? w * phi(xk, a + prefix) : 0.0;
            out[1] = w;
        });

    return {res[0].mean, res[0].stderr_, res[1].mean, res[1].stderr_, replicas};
}

std::vector<SeriesRow> series_partial_sums(const EnvironmentEnsemble& ens,
                                           const SimplexPoint& x0, double a,
                                           std::size_t n_max, std::uint64_t replicas,
                                           const ValueEstimator& v, std::uint64_t seed,
                                           unsigned workers) {
    if (!(v.root_value > 0.0))
        throw RootValueNonpositive("harmonic estimate at the root is not positive");
    WalkKernel kernel(ens);
    const std::size_t terms = 2 * (n_max + 1);

    auto res = accumulate_replicas(
        replicas, workers, terms,
        [&](std::uint64_t r, std::span<double> out) {
            Rng rng = derive_stream(seed, StreamKind::doob, r);
            std::vector<double> x, y(ens.p());
            init_point(x0, x);
            double prefix = 0.0;
            bool alive = true;
            for (std::size_t n = 0; n <= n_max; ++n) {
                const std::size_t atom = kernel.sample_atom(rng);
                double w = 0.0;
                if (alive) {
                    const SimplexPoint xn{std::vector<double>(x.begin(), x.end())};
                    w = v.fn(xn, a + prefix) / v.root_value;
                }
                const double e = w > 0.0 ? w * std::exp(-(a + prefix)) : 0.0;
                out[2 * n] = e;
                out[2 * n + 1] = e * kernel.etas[atom];
                prefix += kernel.step(x.data(), y.data(), atom);
                if (alive && a + prefix <= 0.0) alive = false;
            }
        });

    std::vector<SeriesRow> rows(n_max + 1);
    double pe = 0.0, ph = 0.0;
    for (std::size_t n = 0; n <= n_max; ++n) {
        SeriesRow row;
        row.n = n;
        row.exp_term = res[2 * n].mean;
        row.exp_stderr = res[2 * n].stderr_;
        row.eta_term = res[2 * n + 1].mean;
        row.eta_stderr = res[2 * n + 1].stderr_;
        pe += row.exp_term;
        ph += row.eta_term;
        row.exp_partial = pe;
        row.eta_partial = ph;
        rows[n] = row;
    }
    return rows;
}

}  // namespace bprelab

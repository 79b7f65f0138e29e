#include "bprelab/branching.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

#include "bprelab/errors.hpp"
#include "bprelab/parallel.hpp"

namespace bprelab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::uint64_t kExactLimit = std::uint64_t{1} << 53;

double logsumexp(std::span<const double> v) {
    double hi = -kInf;
    for (double x : v) hi = std::max(hi, x);
    if (hi == -kInf) return -kInf;
    double s = 0.0;
    for (double x : v) s += std::exp(x - hi);
    return hi + std::log(s);
}

void check_z(const EnvironmentEnsemble& ens, std::span<const std::uint64_t> z) {
    if (z.size() != ens.p()) throw DomainError("ancestor vector dimension mismatch");
}

bool all_zero(std::span<const std::uint64_t> z) {
    return std::all_of(z.begin(), z.end(), [](std::uint64_t v) { return v == 0; });
}

// survival = 1 - prod_i t_i^{z_i}, computed in log space when the product
// would underflow the direct form.
double survival_from_roots(std::span<const double> t, std::span<const std::uint64_t> z) {
    double log_ext = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (z[i] == 0) continue;
        if (t[i] <= 0.0) return 1.0;
        log_ext += static_cast<double>(z[i]) * std::log(t[i]);
    }
    return -std::expm1(log_ext);
}

}  // namespace

PopulationVector step_population(const OffspringLaw& law, const PopulationVector& pop,
                                 Rng& rng) {
    if (pop.size() != law.p) throw DomainError("population dimension mismatch");
    PopulationVector next(law.p, 0);
    for (std::size_t i = 0; i < law.p; ++i)
        if (pop[i] > 0) sample_offspring_sum(law, i, pop[i], next, rng);
    return next;
}

BranchSim::BranchSim(const EnvironmentEnsemble& ens, PopulationVector z)
    : ens_(&ens), counts_(std::move(z)) {
    if (counts_.size() != ens.p()) throw DomainError("ancestor vector dimension mismatch");
    scratch_.resize(counts_.size());
}

void BranchSim::step(std::size_t atom, Rng& rng) {
    const auto& a = ens_->atom(atom);
    const std::size_t p = counts_.size();
    if (!log_mode_) {
        std::fill(scratch_.begin(), scratch_.end(), 0);
        for (std::size_t i = 0; i < p; ++i)
            if (counts_[i] > 0) sample_offspring_sum(a.law, i, counts_[i], scratch_, rng);
        counts_.swap(scratch_);
        ++gen_;
        bool large = false;
        for (std::uint64_t c : counts_)
            if (c > kExactLimit) large = true;
        if (large) {
            log_mode_ = true;
            switch_gen_ = gen_;
            logs_.resize(p);
            for (std::size_t i = 0; i < p; ++i)
                logs_[i] = counts_[i] > 0 ? std::log(static_cast<double>(counts_[i])) : -kInf;
        }
        return;
    }
    // deterministic mean evolution: ln Z'_j = logsumexp_i(ln Z_i + ln M(i,j))
    std::vector<double> next(p, -kInf);
    std::vector<double> terms(p);
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t i = 0; i < p; ++i) {
            const double m = a.moms.mean(i, j);
            terms[i] = (m > 0.0 && logs_[i] > -kInf) ? logs_[i] + std::log(m) : -kInf;
        }
        next[j] = logsumexp(terms);
    }
    logs_.swap(next);
    ++gen_;
}

bool BranchSim::extinct() const {
    if (log_mode_) return false;
    return std::all_of(counts_.begin(), counts_.end(), [](std::uint64_t c) { return c == 0; });
}

double BranchSim::log_total() const {
    if (log_mode_) return logsumexp(logs_);
    std::uint64_t total = 0;
    for (std::uint64_t c : counts_) total += c;
    return total > 0 ? std::log(static_cast<double>(total)) : -kInf;
}

double BranchSim::log_count(std::size_t j) const {
    if (log_mode_) return logs_[j];
    return counts_[j] > 0 ? std::log(static_cast<double>(counts_[j])) : -kInf;
}

const PopulationVector& BranchSim::counts() const {
    if (log_mode_) throw DomainError("exact counts unavailable after log switch");
    return counts_;
}

double exact_quenched_survival(const EnvironmentEnsemble& ens,
                               std::span<const std::uint32_t> atoms,
                               std::span<const std::uint64_t> z, std::size_t n) {
    check_z(ens, z);
    if (atoms.size() < n) throw DomainError("environment sequence shorter than horizon");
    if (all_zero(z)) return 0.0;
    std::vector<double> t(ens.p(), 0.0);
    for (std::size_t k = n; k-- > 0;) t = gf_vector_eval(ens.atom(atoms[k]).law, t);
    return survival_from_roots(t, z);
}

std::vector<std::vector<SurvivalRow>> annealed_survival_multi(
    const EnvironmentEnsemble& ens, std::span<const PopulationVector> zs,
    std::span<const std::size_t> horizons, std::uint64_t replicas, std::uint64_t seed,
    unsigned workers) {
    for (const auto& z : zs) {
        check_z(ens, z);
        if (all_zero(z)) throw DomainError("ancestor vector must be nonzero");
    }
    if (horizons.empty() || zs.empty()) throw DomainError("empty horizon or ancestor list");
    if (!std::is_sorted(horizons.begin(), horizons.end()) || horizons.front() < 1)
        throw DomainError("horizons must be sorted and at least 1");
    const std::size_t H = horizons.size(), Z = zs.size();
    const std::size_t n_max = horizons.back();

    // Forward composition: with t_0 = 0 and t_{k+1} = f_{a_k}(t_k), the value
    // 1 - prod t_{n,i}^{z_i} is the survival of the reversed atom sequence,
    // which has the same law since the environment is i.i.d.
    auto table = accumulate_replicas(replicas, workers, H * Z, [&](std::uint64_t r,
                                                                   std::span<double> out) {
        Rng rng = derive_stream(seed, StreamKind::survival, r);
        std::vector<double> t(ens.p(), 0.0);
        std::size_t next = 0;
        for (std::size_t k = 1; k <= n_max && next < H; ++k) {
            t = gf_vector_eval(ens.atom(ens.sample_atom(rng)).law, t);
            if (k == horizons[next]) {
                for (std::size_t zi = 0; zi < Z; ++zi)
                    out[next * Z + zi] = survival_from_roots(t, zs[zi]);
                ++next;
            }
        }
    });

    std::vector<std::vector<SurvivalRow>> rows(Z, std::vector<SurvivalRow>(H));
    for (std::size_t h = 0; h < H; ++h)
        for (std::size_t zi = 0; zi < Z; ++zi) {
            const auto& ms = table[h * Z + zi];
            rows[zi][h] = {horizons[h], ms.mean, ms.stderr_, ms.n};
        }
    return rows;
}

std::vector<SurvivalRow> annealed_survival(const EnvironmentEnsemble& ens,
                                           const PopulationVector& z,
                                           std::span<const std::size_t> horizons,
                                           std::uint64_t replicas, std::uint64_t seed,
                                           unsigned workers) {
    std::vector<PopulationVector> zs{z};
    return annealed_survival_multi(ens, zs, horizons, replicas, seed, workers)[0];
}

std::vector<SurvivalRow> beta_z_table(const EnvironmentEnsemble& ens, const PopulationVector& z,
                                      std::span<const std::size_t> horizons,
                                      std::uint64_t replicas, std::uint64_t seed,
                                      unsigned workers) {
    auto rows = annealed_survival(ens, z, horizons, replicas, seed, workers);
    for (auto& row : rows) {
        const double root = std::sqrt(static_cast<double>(row.n));
        row.estimate *= root;
        row.stderr_ *= root;
    }
    return rows;
}

namespace {

void check_conditioned_args(const EnvironmentEnsemble& ens, const PopulationVector& z,
                            std::span<const std::size_t> horizons) {
    check_z(ens, z);
    if (all_zero(z)) throw DomainError("ancestor vector must be nonzero");
    if (horizons.empty() || !std::is_sorted(horizons.begin(), horizons.end()) ||
        horizons.front() < 1)
        throw DomainError("horizons must be sorted and at least 1");
}

}  // namespace

std::vector<ConditionedScaled> conditioned_scaled_population(
    const EnvironmentEnsemble& ens, const PopulationVector& z, std::size_t j,
    std::span<const std::size_t> horizons, std::uint64_t replicas, std::uint64_t seed,
    unsigned workers, std::uint64_t min_accept) {
    check_conditioned_args(ens, z, horizons);
    if (j >= ens.p()) throw DomainError("direction index out of range");
    const std::size_t H = horizons.size();
    const std::size_t n_max = horizons.back();
    const double nan = std::numeric_limits<double>::quiet_NaN();

    auto rows = collect_rows(replicas, workers, H, [&](std::uint64_t r, std::span<double> out) {
        for (auto& v : out) v = nan;
        Rng rng = derive_stream(seed, StreamKind::scaled_population, r);
        BranchSim sim(ens, z);
        NormalizedProduct prod = product_chain({});
        std::size_t next = 0;
        for (std::size_t k = 1; k <= n_max && next < H; ++k) {
            const std::size_t atom = ens.sample_atom(rng);
            sim.step(atom, rng);
            product_extend(prod, ens.atom(atom).moms.mean);
            if (sim.extinct()) break;
            if (k == horizons[next]) {
                out[next] = std::exp(sim.log_count(j) - prod.col_log_norms[j]);
                ++next;
            }
        }
    });

    std::vector<ConditionedScaled> out(H);
    for (std::size_t h = 0; h < H; ++h) {
        out[h].n = horizons[h];
        out[h].proposed = replicas;
        for (std::uint64_t r = 0; r < replicas; ++r) {
            const double v = rows[r * H + h];
            if (!std::isnan(v)) out[h].ratios.push_back(v);
        }
        if (out[h].ratios.size() < min_accept)
            throw InsufficientAcceptance("conditioned sample below minimum at horizon " +
                                         std::to_string(out[h].n));
    }
    return out;
}

std::vector<ConditionedLogPop> conditioned_log_population(
    const EnvironmentEnsemble& ens, const PopulationVector& z,
    std::span<const std::size_t> horizons, std::uint64_t replicas, std::uint64_t seed,
    unsigned workers, std::uint64_t min_accept) {
    check_conditioned_args(ens, z, horizons);
    const std::size_t H = horizons.size();
    const std::size_t n_max = horizons.back();
    const double nan = std::numeric_limits<double>::quiet_NaN();

    auto rows =
        collect_rows(replicas, workers, 2 * H, [&](std::uint64_t r, std::span<double> out) {
            for (auto& v : out) v = nan;
            Rng rng = derive_stream(seed, StreamKind::scaled_population, r ^ 0x9e3779b97f4a7c15ull);
            BranchSim sim(ens, z);
            SimplexPoint x = SimplexPoint::barycenter(ens.p());
            double s = 0.0;
            std::size_t next = 0;
            for (std::size_t k = 1; k <= n_max && next < H; ++k) {
                const std::size_t atom = ens.sample_atom(rng);
                const auto& mean = ens.atom(atom).moms.mean;
                sim.step(atom, rng);
                s += rho(x, mean);
                x = act_right(x, mean);
                if (sim.extinct()) break;
                if (k == horizons[next]) {
                    const double root = std::sqrt(static_cast<double>(k));
                    out[2 * next] = sim.log_total() / root;
                    out[2 * next + 1] = s / root;
                    ++next;
                }
            }
        });

    std::vector<ConditionedLogPop> out(H);
    for (std::size_t h = 0; h < H; ++h) {
        out[h].n = horizons[h];
        out[h].proposed = replicas;
        for (std::uint64_t r = 0; r < replicas; ++r) {
            const double lp = rows[r * 2 * H + 2 * h];
            if (!std::isnan(lp)) {
                out[h].log_pop.push_back(lp);
                out[h].walk.push_back(rows[r * 2 * H + 2 * h + 1]);
            }
        }
        if (out[h].log_pop.size() < min_accept)
            throw InsufficientAcceptance("conditioned sample below minimum at horizon " +
                                         std::to_string(out[h].n));
    }
    return out;
}

KestenStigumReport kesten_stigum_diagnostics(const EnvironmentEnsemble& ens,
                                             std::span<const std::size_t> horizons,
                                             std::uint64_t replicas, std::uint64_t env_seed,
                                             std::uint64_t sim_seed, unsigned workers) {
    if (horizons.empty() || !std::is_sorted(horizons.begin(), horizons.end()) ||
        horizons.front() < 1)
        throw DomainError("horizons must be sorted and at least 1");
    const std::size_t p = ens.p();
    const std::size_t H = horizons.size();
    const std::size_t n_max = 2 * horizons.back();

    KestenStigumReport rep;
    rep.env_seed = env_seed;
    rep.p = p;
    rep.horizons.assign(horizons.begin(), horizons.end());
    rep.replicas = replicas;
    {
        Rng env_rng = derive_stream(env_seed, StreamKind::env_sequence, 0);
        rep.atoms = sample_env_sequence(ens, n_max, env_rng);
    }

    // One product along the fixed sequence gives every replica's normalizers.
    std::vector<std::vector<double>> cln(n_max + 1);  // cln[k][j] = ln|M_{0,k} e_j|
    std::vector<double> supercrit(n_max, 0.0), varser(n_max, 0.0);
    {
        NormalizedProduct prod = product_chain({});
        cln[0] = std::vector<double>(p, 0.0);
        double sup_partial = 0.0, var_partial = 0.0;
        for (std::size_t k = 0; k < n_max; ++k) {
            const auto& cur = ens.atom(rep.atoms[k]);
            product_extend(prod, cur.moms.mean);
            cln[k + 1] = prod.col_log_norms;
            double inv_entry_max = 0.0;
            for (std::size_t i = 0; i < p; ++i)
                for (std::size_t j = 0; j < p; ++j) {
                    const double entry =
                        prod.bar_matrix(i, j) * std::exp(prod.col_log_norms[j]);
                    if (entry > 0.0) inv_entry_max = std::max(inv_entry_max, 1.0 / entry);
                }
            sup_partial += inv_entry_max;
            const auto& nxt = ens.atom(rep.atoms[(k + 1) % n_max]);
            double sig_max = 0.0;
            for (std::size_t i = 0; i < p; ++i)
                for (std::size_t j = 0; j < p; ++j)
                    sig_max = std::max(sig_max, cur.moms.sigma2(i, j));
            const double norm_next = l1_norm(nxt.moms.mean);
            var_partial += std::exp(-prod.log_norm) * sig_max / (norm_next * norm_next);
            supercrit[k] = sup_partial;
            varser[k] = var_partial;
        }
    }
    rep.supercrit_partial.resize(H);
    rep.variance_partial.resize(H);
    for (std::size_t h = 0; h < H; ++h) {
        rep.supercrit_partial[h] = supercrit[horizons[h] - 1];
        rep.variance_partial[h] = varser[horizons[h] - 1];
    }

    const std::size_t max_h = horizons.back();
    rep.w_mean.assign(H * p * p, 0.0);
    rep.w_stderr.assign(H * p * p, 0.0);
    rep.cauchy_mean.assign(H * p * p, 0.0);
    rep.cauchy_stderr.assign(H * p * p, 0.0);
    rep.extinct_freq.resize(p);
    rep.exact_extinction.resize(p);
    rep.small_w_freq.resize(p);
    rep.coincidence.resize(p);

    for (std::size_t anc = 0; anc < p; ++anc) {
        PopulationVector z(p, 0);
        z[anc] = 1;
        rep.exact_extinction[anc] =
            1.0 - exact_quenched_survival(ens, rep.atoms, z, max_h);

        // terms: per listed horizon p W values and p squared Cauchy
        // increments, then extinct flag, small-W flag, and the conjunction.
        const std::size_t n_terms = 2 * H * p + 3;
        auto ms = accumulate_replicas(
            replicas, workers, n_terms, [&](std::uint64_t r, std::span<double> out) {
                Rng rng = derive_stream(sim_seed, StreamKind::kesten_stigum, r * p + anc);
                BranchSim sim(ens, z);
                std::vector<double> w_at(H * p, 0.0), w_at2(H * p, 0.0);
                for (std::size_t k = 1; k <= n_max; ++k) {
                    sim.step(rep.atoms[k - 1], rng);
                    for (std::size_t h = 0; h < H; ++h) {
                        if (k == horizons[h])
                            for (std::size_t j = 0; j < p; ++j)
                                w_at[h * p + j] = std::exp(sim.log_count(j) - cln[k][j]);
                        if (k == 2 * horizons[h])
                            for (std::size_t j = 0; j < p; ++j)
                                w_at2[h * p + j] = std::exp(sim.log_count(j) - cln[k][j]);
                    }
                    if (sim.extinct()) break;
                }
                for (std::size_t h = 0; h < H; ++h)
                    for (std::size_t j = 0; j < p; ++j) {
                        const double d = w_at2[h * p + j] - w_at[h * p + j];
                        out[h * p + j] = w_at[h * p + j];
                        out[H * p + h * p + j] = d * d;
                    }
                double w_last = 0.0;
                for (std::size_t j = 0; j < p; ++j)
                    w_last = std::max(w_last, w_at[(H - 1) * p + j]);
                // extinction is absorbing, so dying at generation <= max_h is
                // exactly "extinct by the measurement horizon"
                const bool extinct = sim.extinct() && sim.generation() <= max_h;
                const bool small = w_last < 0.01;
                out[2 * H * p] = extinct ? 1.0 : 0.0;
                out[2 * H * p + 1] = small ? 1.0 : 0.0;
                out[2 * H * p + 2] = (extinct && small) ? 1.0 : 0.0;
            });

        for (std::size_t h = 0; h < H; ++h)
            for (std::size_t j = 0; j < p; ++j) {
                const std::size_t dst = h * p * p + anc * p + j;
                rep.w_mean[dst] = ms[h * p + j].mean;
                rep.w_stderr[dst] = ms[h * p + j].stderr_;
                rep.cauchy_mean[dst] = ms[H * p + h * p + j].mean;
                rep.cauchy_stderr[dst] = ms[H * p + h * p + j].stderr_;
            }
        rep.extinct_freq[anc] = ms[2 * H * p].mean;
        rep.small_w_freq[anc] = ms[2 * H * p + 1].mean;
        rep.coincidence[anc] = rep.small_w_freq[anc] > 0.0
                                   ? ms[2 * H * p + 2].mean / rep.small_w_freq[anc]
                                   : 1.0;
    }
    return rep;
}

}  // namespace bprelab

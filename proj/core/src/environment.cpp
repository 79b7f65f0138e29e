#include "bprelab/environment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bprelab/errors.hpp"
#include "bprelab/parallel.hpp"

namespace bprelab {

EnvironmentEnsemble::EnvironmentEnsemble(std::vector<double> weights,
                                         std::vector<OffspringLaw> laws) {
    if (weights.empty() || weights.size() != laws.size())
        throw DomainError("ensemble needs matching weight and law lists");
    p_ = laws.front().p;
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("ensemble weight invalid");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw DomainError("ensemble weights sum to " + std::to_string(sum) + ", expected 1");
    atoms_.reserve(laws.size());
    double c = 0.0;
    for (std::size_t k = 0; k < laws.size(); ++k) {
        if (laws[k].p != p_) throw DomainError("ensemble atoms disagree on type count");
        Atom a{weights[k], std::move(laws[k]), {}, {}};
        a.moms = moments(a.law);
        a.mean_row_sums = row_sums(a.moms.mean);
        c += a.weight;
        cum_.push_back(c);
        atoms_.push_back(std::move(a));
    }
    cum_.back() = 1.0;
}

std::size_t EnvironmentEnsemble::sample_atom(Rng& rng) const {
    const double u = rng.uniform();
    for (std::size_t k = 0; k + 1 < cum_.size(); ++k)
        if (u < cum_[k]) return k;
    return cum_.size() - 1;
}

std::vector<std::uint32_t> sample_env_sequence(const EnvironmentEnsemble& ens, std::size_t n,
                                               Rng& rng) {
    std::vector<std::uint32_t> out(n);
    for (auto& v : out) v = static_cast<std::uint32_t>(ens.sample_atom(rng));
    return out;
}

LyapunovEstimate estimate_lyapunov(const EnvironmentEnsemble& ens, std::size_t horizon,
                                   std::uint64_t replicas, std::uint64_t seed,
                                   unsigned workers) {
    if (horizon == 0 || replicas == 0) throw DomainError("lyapunov estimate needs a budget");
    std::vector<double> vals(replicas);
    parallel_replicas(replicas, workers, [&](std::uint64_t r) {
        Rng rng = derive_stream(seed, StreamKind::env_sequence, r);
        SimplexPoint x = SimplexPoint::barycenter(ens.p());
        double s = 0.0;
        for (std::size_t k = 0; k < horizon; ++k) {
            const auto& m = ens.atom(ens.sample_atom(rng)).moms.mean;
            s += rho(x, m);
            x = act_right(x, m);
        }
        vals[r] = s / static_cast<double>(horizon);
    });
    const auto ms = mean_and_stderr(vals);
    return {ms.mean, ms.stderr_, horizon, replicas};
}

EnvironmentEnsemble apply_knob(const EnvironmentEnsemble& ens, CalibrationKnob knob,
                               double value) {
    std::vector<double> weights;
    std::vector<OffspringLaw> laws;
    for (std::size_t k = 0; k < ens.atom_count(); ++k) {
        weights.push_back(ens.atom(k).weight);
        laws.push_back(ens.atom(k).law);
    }
    if (knob == CalibrationKnob::geometric_scale) {
        if (!(value > 0.0)) throw DomainError("scale knob must be positive");
        bool touched = false;
        for (auto& law : laws) {
            for (auto& row : law.rows) {
                if (auto* zig = std::get_if<ZeroInflatedGeometricRow>(&row)) {
                    std::vector<double> mean = zig->mean;
                    for (double& m : mean) m *= value;
                    *zig = make_zero_inflated_row(zig->q0, std::move(mean), zig->cap);
                    touched = true;
                }
            }
        }
        if (!touched)
            throw CalibrationFailed("scale knob touches no truncated-geometric rows");
    } else {
        if (ens.atom_count() != 2)
            throw CalibrationFailed("weight knob requires exactly two atoms");
        if (!(value > 0.0 && value < 1.0))
            throw DomainError("weight knob must lie in (0,1)");
        weights = {value, 1.0 - value};
    }
    return EnvironmentEnsemble(std::move(weights), std::move(laws));
}

CalibrationResult calibrate_critical(const EnvironmentEnsemble& ens, CalibrationKnob knob,
                                     double lo, double hi, double target_tol,
                                     std::size_t horizon, std::uint64_t replicas,
                                     std::uint64_t seed, unsigned workers,
                                     unsigned max_iters) {
    if (!(lo < hi)) throw DomainError("knob interval is empty");
    if (!(target_tol > 0.0)) throw DomainError("calibration tolerance must be positive");

    CalibrationResult res{ens, 0.0, knob, {}};
    auto eval = [&](double knob_value) {
        EnvironmentEnsemble cand = apply_knob(ens, knob, knob_value);
        // Common random numbers: every evaluation reuses the same seed, so
        // pi_hat is monotone in the knob and bisection is clean.
        LyapunovEstimate est = estimate_lyapunov(cand, horizon, replicas, seed, workers);
        res.history.push_back({knob_value, est.value, est.stderr_});
        return est.value;
    };

    // The identity knob value first: symmetric families are already critical.
    const double identity = knob == CalibrationKnob::geometric_scale ? 1.0 : 0.5;
    if (identity > lo && identity < hi) {
        const double pi0 = eval(identity);
        if (std::abs(pi0) <= target_tol) {
            res.ensemble = apply_knob(ens, knob, identity);
            res.knob_value = identity;
            return res;
        }
    }

    double flo = eval(lo);
    if (std::abs(flo) <= target_tol) {
        res.ensemble = apply_knob(ens, knob, lo);
        res.knob_value = lo;
        return res;
    }
    double fhi = eval(hi);
    if (std::abs(fhi) <= target_tol) {
        res.ensemble = apply_knob(ens, knob, hi);
        res.knob_value = hi;
        return res;
    }
    if (flo * fhi > 0.0)
        throw CalibrationFailed("knob interval does not bracket a sign change of the exponent");

    double a = lo, b = hi;
    for (unsigned it = 0; it < max_iters; ++it) {
        const double mid = 0.5 * (a + b);
        const double fm = eval(mid);
        if (std::abs(fm) <= target_tol) {
            res.ensemble = apply_knob(ens, knob, mid);
            res.knob_value = mid;
            return res;
        }
        if (flo * fm < 0.0) {
            b = mid;
            fhi = fm;
        } else {
            a = mid;
            flo = fm;
        }
    }
    throw CalibrationFailed("bisection exhausted its iteration budget above tolerance");
}

namespace {

bool proportional(const PosMatrix& a, const PosMatrix& b) {
    double ratio = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        for (std::size_t j = 0; j < a.dim(); ++j) {
            const double x = a(i, j), y = b(i, j);
            if (x == 0.0 && y == 0.0) continue;
            if (x == 0.0 || y == 0.0) return false;
            const double r = x / y;
            if (ratio == 0.0)
                ratio = r;
            else if (std::abs(r - ratio) > 1e-9 * std::abs(ratio))
                return false;
        }
    }
    return true;
}

}  // namespace

HypothesisReport validate_hypotheses(const EnvironmentEnsemble& ens, double delta, double eps,
                                     double K, std::size_t h4_horizon, std::uint64_t h4_replicas,
                                     std::uint64_t seed, unsigned workers) {
    if (!(delta > 0.0)) throw DomainError("hypothesis parameter delta must be positive");
    HypothesisReport rep;

    {
        HypothesisItem h{"moment_integrability", HypothesisStatus::pass, 0.0, 0.0, ""};
        for (std::size_t k = 0; k < ens.atom_count(); ++k) {
            const double nb = cond_bound(ens.atom(k).moms.mean);
            h.value += ens.atom(k).weight * std::pow(std::abs(std::log(nb)), 2.0 + delta);
        }
        h.detail = "E|ln n(M)|^(2+delta) over atoms";
        rep.items.push_back(h);
    }
    {
        HypothesisItem h{"strong_irreducibility", HypothesisStatus::inconclusive, 0.0, 0.0, ""};
        bool all_positive = true;
        for (std::size_t k = 0; k < ens.atom_count(); ++k) {
            for (double v : ens.atom(k).moms.mean.entries())
                all_positive = all_positive && v > 0.0;
        }
        bool has_nonproportional = false;
        for (std::size_t a = 0; a < ens.atom_count() && !has_nonproportional; ++a)
            for (std::size_t b = a + 1; b < ens.atom_count(); ++b)
                if (!proportional(ens.atom(a).moms.mean, ens.atom(b).moms.mean)) {
                    has_nonproportional = true;
                    break;
                }
        if (all_positive && has_nonproportional) {
            h.status = HypothesisStatus::sufficient_pass;
            h.detail = "all mean matrices strictly positive, non-proportional atoms present";
        } else {
            h.detail = all_positive ? "atoms pairwise proportional, condition undecided"
                                    : "some mean matrix has a zero entry, condition undecided";
        }
        rep.items.push_back(h);
    }
    {
        HypothesisItem h{"entry_comparability", HypothesisStatus::pass, 0.0, 0.0, ""};
        const double B = 1.0 / delta;
        double worst = 0.0;
        for (std::size_t k = 0; k < ens.atom_count(); ++k) {
            const auto& m = ens.atom(k).moms.mean;
            double lo = m.entries()[0], hi = m.entries()[0];
            for (double v : m.entries()) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            worst = std::max(worst, lo > 0.0 ? hi / lo
                                             : std::numeric_limits<double>::infinity());
            if (!in_class_B(m, B)) h.status = HypothesisStatus::fail;
        }
        h.value = worst;
        h.extra = B;
        h.detail = "max entry ratio vs bound 1/delta";
        rep.items.push_back(h);
    }
    {
        HypothesisItem h{"criticality", HypothesisStatus::pass, 0.0, 0.0, ""};
        LyapunovEstimate est = estimate_lyapunov(ens, h4_horizon, h4_replicas, seed, workers);
        h.value = est.value;
        h.extra = est.stderr_;
        if (std::abs(est.value) > 3.0 * est.stderr_ + 1e-12) h.status = HypothesisStatus::fail;
        h.detail = "pi_hat with |pi_hat| <= 3 stderr test";
        rep.items.push_back(h);
    }
    {
        HypothesisItem h{"positive_drift_set", HypothesisStatus::fail, 0.0, 0.0, ""};
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < ens.atom_count(); ++k) {
            if (ens.atom(k).weight <= 0.0) continue;
            const double mrs =
                *std::min_element(ens.atom(k).mean_row_sums.begin(),
                                  ens.atom(k).mean_row_sums.end());
            best = std::max(best, std::log(mrs));
        }
        h.value = best;
        h.extra = delta;
        // min_x ln|xM| over the simplex equals ln(min row sum), so atom
        // membership in the drift set is exact.
        if (best >= delta) h.status = HypothesisStatus::pass;
        h.detail = "max over atoms of ln(min row sum) vs delta";
        rep.items.push_back(h);
    }
    {
        HypothesisItem h{"variance_series", HypothesisStatus::pass, 0.0, 0.0, ""};
        for (std::size_t k = 0; k < ens.atom_count(); ++k) {
            const auto& a = ens.atom(k);
            const double norm = l1_norm(a.moms.mean);
            h.value += a.weight * a.moms.eta * (1.0 + std::max(0.0, std::log(norm)));
        }
        h.detail = "E[eta (1 + ln+|M|)] over atoms";
        rep.items.push_back(h);
    }
    {
        HypothesisItem h{"offspring_class", HypothesisStatus::pass, 0.0, 0.0, ""};
        double worst_geq2 = 1.0, worst_zero = 1.0, worst_second = 0.0;
        for (std::size_t k = 0; k < ens.atom_count(); ++k) {
            ClassReport cr = validate_class(ens.atom(k).law, eps, K);
            if (!cr.pass) h.status = HypothesisStatus::fail;
            for (const auto& w : cr.rows) {
                worst_geq2 = std::min(worst_geq2, w.min_prob_geq2);
                worst_zero = std::min(worst_zero, w.prob_zero_row);
                worst_second = std::max(worst_second, w.second_moment);
            }
        }
        h.value = std::min(worst_geq2, worst_zero);
        h.extra = worst_second;
        h.detail = "worst class witnesses across atoms vs (eps, K)";
        rep.items.push_back(h);
    }

    rep.gate_pass = true;
    for (const auto& item : rep.items)
        if (item.status == HypothesisStatus::fail) rep.gate_pass = false;
    return rep;
}

OccupationHistogram occupation_histogram(const EnvironmentEnsemble& ens, std::uint64_t steps,
                                         std::size_t resolution, std::uint64_t seed) {
    if (ens.p() != 2 && ens.p() != 3)
        throw DomainError("occupation histogram supports p in {2,3}");
    if (resolution < 1) throw DomainError("histogram resolution must be >= 1");
    OccupationHistogram hist;
    hist.p = ens.p();
    hist.resolution = resolution;
    hist.steps = steps;
    const std::size_t cells =
        ens.p() == 2 ? resolution : resolution * resolution;
    std::vector<std::uint64_t> counts(cells, 0);
    Rng rng = derive_stream(seed, StreamKind::occupation, 0);
    SimplexPoint x = SimplexPoint::barycenter(ens.p());
    for (std::uint64_t k = 0; k < steps; ++k) {
        x = act_right(x, ens.atom(ens.sample_atom(rng)).moms.mean);
        auto bin = [&](double v) {
            auto b = static_cast<std::size_t>(v * static_cast<double>(resolution));
            return std::min(b, resolution - 1);
        };
        const std::size_t cell =
            ens.p() == 2 ? bin(x[0]) : bin(x[0]) * resolution + bin(x[1]);
        counts[cell] += 1;
    }
    hist.freq.resize(cells);
    for (std::size_t c = 0; c < cells; ++c)
        hist.freq[c] = steps > 0 ? static_cast<double>(counts[c]) / static_cast<double>(steps) : 0.0;
    return hist;
}

}  // namespace bprelab

#include "bprelab/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "bprelab/branching.hpp"
#include "bprelab/ensemble_io.hpp"
#include "bprelab/errors.hpp"
#include "bprelab/markov_walk.hpp"
#include "bprelab/stats.hpp"
#include "bprelab/value_function.hpp"

namespace bprelab {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

struct KindName {
    ExperimentKind kind;
    const char* name;
};

constexpr KindName kKindNames[] = {
    {ExperimentKind::validate, "validate"},
    {ExperimentKind::lyapunov, "lyapunov"},
    {ExperimentKind::calibrate, "calibrate"},
    {ExperimentKind::survival, "survival"},
    {ExperimentKind::tau_tail, "tau-tail"},
    {ExperimentKind::rayleigh_walk, "rayleigh-walk"},
    {ExperimentKind::rayleigh_logpop, "rayleigh-logpop"},
    {ExperimentKind::scaled_population, "scaled-population"},
    {ExperimentKind::kesten_stigum, "kesten-stigum"},
    {ExperimentKind::series_check, "series-check"},
    {ExperimentKind::local_limit, "local-limit"},
};

double get_real(const json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (v.is_string()) return parse_double(v.get<std::string>());
    if (v.is_number()) return v.get<double>();
    throw ConfigError(std::string("config field '") + key + "' must be a number");
}

std::uint64_t get_u64(const json& j, const char* key, std::uint64_t fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_number_unsigned())
        throw ConfigError(std::string("config field '") + key +
                          "' must be an unsigned integer");
    return v.get<std::uint64_t>();
}

std::vector<std::uint64_t> get_u64_list(const json& j, const char* key) {
    std::vector<std::uint64_t> out;
    if (!j.contains(key)) return out;
    const auto& v = j.at(key);
    if (!v.is_array())
        throw ConfigError(std::string("config field '") + key + "' must be an array");
    for (const auto& e : v) {
        if (!e.is_number_unsigned())
            throw ConfigError(std::string("config field '") + key +
                              "' must hold unsigned integers");
        out.push_back(e.get<std::uint64_t>());
    }
    return out;
}

std::vector<double> get_real_list(const json& j, const char* key) {
    std::vector<double> out;
    if (!j.contains(key)) return out;
    const auto& v = j.at(key);
    if (!v.is_array())
        throw ConfigError(std::string("config field '") + key + "' must be an array");
    for (const auto& e : v) {
        if (e.is_string())
            out.push_back(parse_double(e.get<std::string>()));
        else if (e.is_number())
            out.push_back(e.get<double>());
        else
            throw ConfigError(std::string("config field '") + key + "' must hold numbers");
    }
    return out;
}

ordered_json real_array(std::span<const double> v) {
    ordered_json arr = ordered_json::array();
    for (double x : v) arr.push_back(format_double(x));
    return arr;
}

void push_verdict(ExperimentReport& rep, const std::string& name, bool pass, double value,
                  double threshold, const std::string& relation, const std::string& detail) {
    rep.verdicts.push_back({name, pass, value, threshold, relation, detail});
}

void push_scalar(ExperimentReport& rep, const std::string& name, double value, double stderr_,
                 std::uint64_t n) {
    rep.scalars.push_back({name, value, stderr_, n});
}

SimplexPoint start_point(const ExperimentConfig& cfg, std::size_t p) {
    if (cfg.x0.empty()) return SimplexPoint::barycenter(p);
    if (cfg.x0.size() != p) throw ConfigError("x0 dimension differs from ensemble");
    return SimplexPoint(cfg.x0);
}

PopulationVector ancestors(const ExperimentConfig& cfg, std::size_t p) {
    if (cfg.z.empty()) {
        PopulationVector z(p, 0);
        z[0] = 1;
        return z;
    }
    if (cfg.z.size() != p) throw ConfigError("z dimension differs from ensemble");
    return {cfg.z.begin(), cfg.z.end()};
}

void require_horizons(const ExperimentConfig& cfg) {
    if (cfg.horizons.empty()) throw ConfigError("experiment needs a horizons list");
}

// Hypothesis gate shared by the limit-theorem experiments. Fills the report
// and either throws GateFailed or records the override.
void gate(const ExperimentConfig& cfg, const EnvironmentEnsemble& ens, ExperimentReport& rep) {
    HypothesisReport hyp =
        validate_hypotheses(ens, cfg.delta, cfg.eps, cfg.K, cfg.gate_horizon,
                            cfg.gate_replicas, cfg.seed, cfg.workers);
    rep.gate_evaluated = true;
    rep.gate_pass = hyp.gate_pass;
    rep.hypotheses = hyp.items;
    if (hyp.gate_pass) return;
    std::string failing;
    for (const auto& item : hyp.items)
        if (item.status == HypothesisStatus::fail) {
            if (!failing.empty()) failing += ", ";
            failing += item.name;
        }
    if (!cfg.force) throw GateFailed("hypothesis gate failed (" + failing + "); use force to override");
    rep.notes.emplace_back("gate_overridden", failing);
}

EstimatorRow row_of(std::size_t n, double est, double se, std::uint64_t N, std::uint64_t seed) {
    return {static_cast<std::uint64_t>(n), est, se, N, seed};
}

void add_table(ExperimentReport& rep, const std::string& name,
               const std::vector<EstimatorRow>& rows) {
    rep.tables.push_back({name, estimator_table(rows)});
}

double sigma_from_variance(const ScalarEstimate& s2) { return std::sqrt(s2.value); }

double sigma_stderr(const ScalarEstimate& s2) {
    const double sigma = std::sqrt(s2.value);
    return sigma > 0 ? s2.stderr_ / (2.0 * sigma) : 0.0;
}

double rayleigh_dsigma(double t, double sigma) {
    // |d/dsigma R_sigma(t)| = (t^2 / sigma^3) exp(-t^2/(2 sigma^2))
    const double u = t * t / (sigma * sigma);
    return u / sigma * std::exp(-0.5 * u);
}

// ---------------------------------------------------------------- validate

void run_validate(const ExperimentConfig& cfg, const EnvironmentEnsemble& ens,
                  ExperimentReport& rep) {
    HypothesisReport hyp =
        validate_hypotheses(ens, cfg.delta, cfg.eps, cfg.K,
                            cfg.horizons.empty() ? cfg.gate_horizon : cfg.horizons.back(),
                            cfg.replicas, cfg.seed, cfg.workers);
    rep.gate_evaluated = true;
    rep.gate_pass = hyp.gate_pass;
    rep.hypotheses = hyp.items;
    std::size_t fails = 0;
    for (const auto& item : hyp.items) {
        if (item.status == HypothesisStatus::fail) ++fails;
        if (item.name == "criticality")
            push_scalar(rep, "pi_hat", item.value, item.extra, cfg.replicas);
    }
    push_verdict(rep, "hypothesis_gate", hyp.gate_pass, static_cast<double>(fails), 0.0, "==",
                 "definite hypothesis failures");
}

// ---------------------------------------------------------------- lyapunov

void run_lyapunov(const ExperimentConfig& cfg, const EnvironmentEnsemble& ens,
                  ExperimentReport& rep) {
    const std::size_t horizon = cfg.horizons.empty() ? 1024 : cfg.horizons.back();
    LyapunovEstimate lyap =
        estimate_lyapunov(ens, horizon, cfg.replicas, cfg.seed, cfg.workers);
    push_scalar(rep, "pi_hat", lyap.value, lyap.stderr_, lyap.replicas);
    add_table(rep, "lyapunov",
              {row_of(horizon, lyap.value, lyap.stderr_, lyap.replicas, cfg.seed)});
}

// ---------------------------------------------------------------- calibrate

void run_calibrate(const ExperimentConfig& cfg, const EnvironmentEnsemble& ens,
                   ExperimentReport& rep) {
    CalibrationKnob knob;
    if (cfg.knob == "geometric_scale")
        knob = CalibrationKnob::geometric_scale;
    else if (cfg.knob == "weight_pair")
        knob = CalibrationKnob::weight_pair;
    else
        throw ConfigError("unknown calibration knob: " + cfg.knob);
    const std::size_t horizon = cfg.horizons.empty() ? 1024 : cfg.horizons.back();
    CalibrationResult result =
        calibrate_critical(ens, knob, cfg.knob_lo, cfg.knob_hi, cfg.knob_tol, horizon,
                           cfg.replicas, cfg.seed, cfg.workers);
    std::vector<EstimatorRow> rows;
    for (std::size_t i = 0; i < result.history.size(); ++i)
        rows.push_back(row_of(i, result.history[i].pi_hat, result.history[i].stderr_,
                              cfg.replicas, cfg.seed));
    add_table(rep, "calibration", rows);
    push_scalar(rep, "knob_value", result.knob_value, 0.0, cfg.replicas);
    const double final_pi = result.history.empty() ? 0.0 : result.history.back().pi_hat;
    push_scalar(rep, "pi_hat", final_pi,
                result.history.empty() ? 0.0 : result.history.back().stderr_, cfg.replicas);
    push_verdict(rep, "calibrated", std::abs(final_pi) <= cfg.knob_tol, std::abs(final_pi),
                 cfg.knob_tol, "<=", "absolute drift at the returned knob");
    rep.artifacts.emplace_back("calibrated_ensemble.json", emit_ensemble(result.ensemble));
}

// ---------------------------------------------------------------- survival

void run_survival(const ExperimentConfig& cfg, const EnvironmentEnsemble& ens,
                  ExperimentReport& rep) {
    gate(cfg, ens, rep);
    require_horizons(cfg);
    const PopulationVector z = ancestors(cfg, ens.p());
    const bool zero_first = cfg.horizons.front() == 0;
    std::vector<std::size_t> hz(cfg.horizons.begin() + (zero_first ? 1 : 0),
                                cfg.horizons.end());
    if (hz.empty()) throw ConfigError("survival needs at least one horizon >= 1");
    auto surv = annealed_survival(ens, z, hz, cfg.replicas, cfg.seed, cfg.workers);

    std::vector<EstimatorRow> raw, beta;
    if (zero_first) {
        const bool alive = std::any_of(z.begin(), z.end(), [](auto v) { return v > 0; });
        raw.push_back(row_of(0, alive ? 1.0 : 0.0, 0.0, cfg.replicas, cfg.seed));
    }
    for (const auto& r : surv) {
        raw.push_back(row_of(r.n, r.estimate, r.stderr_, r.replicas, cfg.seed));
        const double root = std::sqrt(static_cast<double>(r.n));
        beta.push_back(row_of(r.n, root * r.estimate, root * r.stderr_, r.replicas, cfg.seed));
    }
    add_table(rep, "survival", raw);
    add_table(rep, "beta", beta);

    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    std::size_t counted = 0;
    for (const auto& r : beta)
        if (r.n >= 256) {
            lo = std::min(lo, r.estimate);
            hi = std::max(hi, r.estimate);
            ++counted;
        }
    if (counted >= 2) {
        const double ratio = lo > 0 ? hi / lo : std::numeric_limits<double>::infinity();
        push_verdict(rep, "beta_flat", ratio <= cfg.flatness_threshold, ratio,
                     cfg.flatness_threshold, "<=",
                     "max/min of sqrt(n) * survival over horizons >= 256");
    }
}

// ---------------------------------------------------------------- tau-tail

void run_tau_tail(const ExperimentConfig& cfg, const EnvironmentEnsemble& ens,
                  ExperimentReport& rep) {
    gate(cfg, ens, rep);
    require_horizons(cfg);
    const SimplexPoint x0 = start_point(cfg, ens.p());
    auto tail =
        tau_tail_table(ens, x0, cfg.a, cfg.horizons, cfg.replicas, cfg.seed, cfg.workers);
    ScalarEstimate s2 = estimate_sigma2(ens, cfg.sigma_horizon, cfg.sigma_replicas,
                                        cfg.sigma_burnin, cfg.seed, cfg.workers);
    ValueEstimator vest =
        make_value_estimator(ens, x0, cfg.a, ValueTableConfig{}, cfg.seed, cfg.workers);
    push_scalar(rep, "sigma2", s2.value, s2.stderr_, s2.replicas);
    push_scalar(rep, "V", vest.root_value, vest.root_stderr, 0);
    rep.notes.emplace_back("value_method", vest.method);

    std::vector<EstimatorRow> raw, scaled;
    for (const auto& r : tail) {
        raw.push_back(row_of(r.n, r.estimate, r.stderr_, r.replicas, cfg.seed));
        const double root = std::sqrt(static_cast<double>(r.n));
        scaled.push_back(
            row_of(r.n, root * r.estimate, root * r.stderr_, r.replicas, cfg.seed));
    }
    add_table(rep, "tau_tail_raw", raw);
    add_table(rep, "tau_tail_scaled", scaled);

    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& r : scaled) {
        lo = std::min(lo, r.estimate);
        hi = std::max(hi, r.estimate);
    }
    const double ratio = lo > 0 ? hi / lo : std::numeric_limits<double>::infinity();
    push_verdict(rep, "tail_flat", ratio <= cfg.flatness_threshold, ratio,
                 cfg.flatness_threshold, "<=", "max/min of sqrt(n) * P(tau > n)");

    const double sigma = sigma_from_variance(s2);
    const double target = 2.0 * vest.root_value / (sigma * std::sqrt(2.0 * M_PI));
    const double level = scaled.back().estimate;
    const double rel = target > 0 ? level / target : std::numeric_limits<double>::infinity();
    push_verdict(rep, "tail_level", std::abs(rel - 1.0) <= cfg.level_rel_tol, rel,
                 cfg.level_rel_tol, "|value-1| <=",
                 "level at largest n against 2V / (sigma sqrt(2 pi))");
}

// ------------------------------------------------------------ rayleigh-walk

void run_rayleigh_walk(const ExperimentConfig& cfg, const EnvironmentEnsemble& ens,
                       ExperimentReport& rep) {
    gate(cfg, ens, rep);
    require_horizons(cfg);
    const SimplexPoint x0 = start_point(cfg, ens.p());
    const std::size_t n = cfg.horizons.back();
    ConditionedSamples cond = conditioned_walk_samples(ens, x0, cfg.a, n, cfg.replicas,
                                                       cfg.seed, cfg.workers, 100);
    ScalarEstimate s2 = estimate_sigma2(ens, cfg.sigma_horizon, cfg.sigma_replicas,
                                        cfg.sigma_burnin, cfg.seed, cfg.workers);
    const double sigma = sigma_from_variance(s2);
    KsResult ks = ks_statistic(cond.values, [sigma](double t) {
        return rayleigh_cdf(std::max(t, 0.0), sigma);
    });
    const double widened = cfg.ks_walk_threshold +
                           2.0 * rayleigh_dsigma(ks.at, sigma) * sigma_stderr(s2);
    push_scalar(rep, "sigma2", s2.value, s2.stderr_, s2.replicas);
    push_scalar(rep, "acceptance", cond.acceptance, 0.0, cond.proposed);
    add_table(rep, "rayleigh_walk",
              {row_of(n, ks.distance, 0.0, cond.values.size(), cfg.seed)});
    push_verdict(rep, "rayleigh_ks", ks.distance <= widened, ks.distance, widened, "<=",
                 "base threshold " + format_double(cfg.ks_walk_threshold) +
                     " widened by the sigma-hat stderr");
}

// ---------------------------------------------------------- rayleigh-logpop

void run_rayleigh_logpop(const ExperimentConfig& cfg, const EnvironmentEnsemble& ens,
                         ExperimentReport& rep) {
    gate(cfg, ens, rep);
    require_horizons(cfg);
    const PopulationVector z = ancestors(cfg, ens.p());
    auto rows = conditioned_log_population(ens, z, cfg.horizons, cfg.replicas, cfg.seed,
                                           cfg.workers, 100);
    ScalarEstimate s2 = estimate_sigma2(ens, cfg.sigma_horizon, cfg.sigma_replicas,
                                        cfg.sigma_burnin, cfg.seed, cfg.workers);
    const double sigma = sigma_from_variance(s2);
    push_scalar(rep, "sigma2", s2.value, s2.stderr_, s2.replicas);

    std::vector<EstimatorRow> ks_rows, coupling_rows;
    double ks_last = 0.0, widened_last = 0.0;
    double coupling_first = 0.0, coupling_last = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        KsResult ks = ks_statistic(row.log_pop,
                                   [sigma](double t) { return rayleigh_cdf(std::max(t, 0.0), sigma); });
        ks_rows.push_back(row_of(row.n, ks.distance, 0.0, row.log_pop.size(), cfg.seed));
        std::size_t far = 0;
        for (std::size_t k = 0; k < row.log_pop.size(); ++k)
            if (std::abs(row.log_pop[k] - row.walk[k]) >= cfg.coupling_eps) ++far;
        const double c = static_cast<double>(far) / static_cast<double>(row.log_pop.size());
        const double se =
            std::sqrt(std::max(c * (1.0 - c), 0.0) / static_cast<double>(row.log_pop.size()));
        coupling_rows.push_back(row_of(row.n, c, se, row.log_pop.size(), cfg.seed));
        if (i == 0) coupling_first = c;
        if (i + 1 == rows.size()) {
            coupling_last = c;
            ks_last = ks.distance;
            widened_last = cfg.ks_logpop_threshold +
                           2.0 * rayleigh_dsigma(ks.at, sigma) * sigma_stderr(s2);
        }
    }
    add_table(rep, "rayleigh_logpop", ks_rows);
    add_table(rep, "coupling", coupling_rows);
    push_verdict(rep, "logpop_ks", ks_last <= widened_last, ks_last, widened_last, "<=",
                 "base threshold " + format_double(cfg.ks_logpop_threshold) +
                     " widened by the sigma-hat stderr");
    if (rows.size() >= 2)
        push_verdict(rep, "coupling_decreasing", coupling_last < coupling_first,
                     coupling_last, coupling_first, "<",
                     "P(|ln|Z|| - S| >= eps sqrt(n)) at largest vs smallest horizon");
}

// -------------------------------------------------------- scaled-population

void run_scaled_population(const ExperimentConfig& cfg, const EnvironmentEnsemble& ens,
                           ExperimentReport& rep) {
    gate(cfg, ens, rep);
    require_horizons(cfg);
    const PopulationVector z = ancestors(cfg, ens.p());
    if (cfg.direction >= ens.p()) throw ConfigError("direction index out of range");
    auto rows = conditioned_scaled_population(ens, z, cfg.direction, cfg.horizons,
                                              cfg.replicas, cfg.seed, cfg.workers, 100);

    std::vector<EstimatorRow> mass_rows;
    std::vector<double> masses;
    for (const auto& row : rows) {
        std::size_t low = 0;
        for (double v : row.ratios)
            if (v <= cfg.mass_cut) ++low;
        const double m = static_cast<double>(low) / static_cast<double>(row.ratios.size());
        const double se =
            std::sqrt(std::max(m * (1.0 - m), 0.0) / static_cast<double>(row.ratios.size()));
        masses.push_back(m);
        mass_rows.push_back(row_of(row.n, m, se, row.ratios.size(), cfg.seed));
    }
    add_table(rep, "scaled_mass", mass_rows);

    std::vector<std::size_t> trend =
        cfg.trend_horizons.empty() ? cfg.horizons : cfg.trend_horizons;
    double worst_increase = 0.0;
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t t : trend) {
        const auto it = std::find(cfg.horizons.begin(), cfg.horizons.end(), t);
        if (it == cfg.horizons.end())
            throw ConfigError("trend horizon not among the configured horizons");
        const double m = masses[static_cast<std::size_t>(it - cfg.horizons.begin())];
        if (prev != std::numeric_limits<double>::infinity())
            worst_increase = std::max(worst_increase, m - prev);
        prev = m;
    }
    push_verdict(rep, "mass_trend", worst_increase <= 0.0, worst_increase, 0.0, "<=",
                 "largest increase of the near-zero mass along the trend horizons");

    if (rows.size() >= 2) {
        const auto& a = rows[rows.size() - 2].ratios;
        const auto& b = rows.back().ratios;
        const double ks = ks_two_sample(a, b);
        push_verdict(rep, "two_sample_ks", ks <= cfg.two_sample_threshold, ks,
                     cfg.two_sample_threshold, "<=",
                     "ECDF distance between the last two horizons");
    }
}

// ------------------------------------------------------------ kesten-stigum

void run_kesten_stigum(const ExperimentConfig& cfg, const EnvironmentEnsemble& ens,
                       ExperimentReport& rep) {
    std::vector<std::size_t> horizons = cfg.horizons;
    if (horizons.empty()) horizons = {4, 8, 16, 32};
    KestenStigumReport krep = kesten_stigum_diagnostics(ens, horizons, cfg.replicas,
                                                        cfg.seed, cfg.seed, cfg.workers);
    const std::size_t p = krep.p, H = horizons.size();

    std::vector<EstimatorRow> cauchy_rows;
    std::vector<double> cauchy_max(H, 0.0);
    for (std::size_t h = 0; h < H; ++h) {
        std::size_t arg = 0;
        for (std::size_t e = 0; e < p * p; ++e)
            if (krep.cauchy_mean[h * p * p + e] > krep.cauchy_mean[h * p * p + arg]) arg = e;
        cauchy_max[h] = krep.cauchy_mean[h * p * p + arg];
        cauchy_rows.push_back(row_of(horizons[h], cauchy_max[h],
                                     krep.cauchy_stderr[h * p * p + arg], krep.replicas,
                                     cfg.seed));
    }
    add_table(rep, "cauchy_max", cauchy_rows);

    ordered_json w_mean = ordered_json::array(), cauchy = ordered_json::array();
    for (std::size_t h = 0; h < H; ++h) {
        ordered_json wm = ordered_json::array(), cm = ordered_json::array();
        for (std::size_t i = 0; i < p; ++i) {
            wm.push_back(real_array({&krep.w_mean[h * p * p + i * p], p}));
            cm.push_back(real_array({&krep.cauchy_mean[h * p * p + i * p], p}));
        }
        w_mean.push_back(wm);
        cauchy.push_back(cm);
    }
    rep.notes.emplace_back("w_mean", w_mean.dump());
    rep.notes.emplace_back("cauchy_mean", cauchy.dump());
    rep.notes.emplace_back("extinct_freq", real_array(krep.extinct_freq).dump());
    rep.notes.emplace_back("exact_extinction", real_array(krep.exact_extinction).dump());
    rep.notes.emplace_back("small_w_freq", real_array(krep.small_w_freq).dump());
    rep.notes.emplace_back("coincidence", real_array(krep.coincidence).dump());
    {
        ordered_json atoms = ordered_json::array();
        for (auto atom : krep.atoms) atoms.push_back(atom);
        rep.notes.emplace_back("env_atoms", atoms.dump());
    }
    rep.notes.emplace_back("env_seed", std::to_string(krep.env_seed));

    double worst_ratio = 0.0;
    for (std::size_t h = 1; h < H; ++h)
        worst_ratio = std::max(worst_ratio, cauchy_max[h - 1] > 0
                                                ? cauchy_max[h] / cauchy_max[h - 1]
                                                : std::numeric_limits<double>::infinity());
    push_verdict(rep, "cauchy_decreasing", worst_ratio < 1.0, worst_ratio, 1.0, "<",
                 "max ratio of successive L2 Cauchy increments");

    double min_coincidence = 1.0;
    for (double c : krep.coincidence) min_coincidence = std::min(min_coincidence, c);
    push_verdict(rep, "coincidence", min_coincidence >= cfg.coincidence_threshold,
                 min_coincidence, cfg.coincidence_threshold, ">=",
                 "P(extinct | W small) over ancestor types");

    double worst_dev = 0.0;
    for (std::size_t anc = 0; anc < p; ++anc) {
        const double q = krep.exact_extinction[anc];
        const double se =
            std::sqrt(std::max(q * (1.0 - q), 0.0) / static_cast<double>(krep.replicas)) +
            1.0 / static_cast<double>(krep.replicas);
        worst_dev = std::max(worst_dev, std::abs(krep.extinct_freq[anc] - q) / se);
    }
    push_verdict(rep, "extinction_oracle", worst_dev <= 4.0, worst_dev, 4.0, "<=",
                 "standardized gap to the exact quenched extinction probability");
}

// ------------------------------------------------------------- series-check

void run_series_check(const ExperimentConfig& cfg, const EnvironmentEnsemble& ens,
                      ExperimentReport& rep) {
    gate(cfg, ens, rep);
    const SimplexPoint x0 = start_point(cfg, ens.p());
    ValueEstimator vest =
        make_value_estimator(ens, x0, cfg.a, ValueTableConfig{}, cfg.seed, cfg.workers);
    push_scalar(rep, "V", vest.root_value, vest.root_stderr, 0);
    rep.notes.emplace_back("value_method", vest.method);

    std::vector<std::size_t> ks = cfg.horizons;
    if (ks.empty()) ks = {1, 4, 16, 64};
    const auto one = [](const SimplexPoint&, double) { return 1.0; };
    std::vector<EstimatorRow> weight_rows;
    double worst = 0.0;
    for (std::size_t k : ks) {
        DoobExpectation de = doob_expectation(ens, x0, cfg.a, k, cfg.replicas, vest, one,
                                              cfg.seed, cfg.workers);
        weight_rows.push_back(row_of(k, de.mean_weight, de.weight_stderr, de.replicas,
                                     cfg.seed));
        const double dev = std::abs(de.mean_weight - 1.0);
        worst = std::max(worst, de.weight_stderr > 0
                                    ? dev / de.weight_stderr
                                    : (dev > 1e-12 ? std::numeric_limits<double>::infinity()
                                                   : 0.0));
    }
    add_table(rep, "doob_weights", weight_rows);
    push_verdict(rep, "weights_unit", worst <= 3.0, worst, 3.0, "<=",
                 "max standardized deviation of the mean importance weight from 1");

    auto series = series_partial_sums(ens, x0, cfg.a, cfg.series_n_max, cfg.replicas, vest,
                                      cfg.seed, cfg.workers);
    std::vector<EstimatorRow> exp_rows, eta_rows, exp_part, eta_part;
    for (const auto& row : series) {
        exp_rows.push_back(row_of(row.n, row.exp_term, row.exp_stderr, cfg.replicas, cfg.seed));
        eta_rows.push_back(row_of(row.n, row.eta_term, row.eta_stderr, cfg.replicas, cfg.seed));
        exp_part.push_back(row_of(row.n, row.exp_partial, 0.0, cfg.replicas, cfg.seed));
        eta_part.push_back(row_of(row.n, row.eta_partial, 0.0, cfg.replicas, cfg.seed));
    }
    add_table(rep, "series_exp", exp_rows);
    add_table(rep, "series_eta", eta_rows);
    add_table(rep, "series_exp_partial", exp_part);
    add_table(rep, "series_eta_partial", eta_part);

    // dyadic increments partial(2m) - partial(m) should scale like m^{-1/2}
    // when the terms scale like n^{-3/2}
    std::vector<std::size_t> ms;
    std::vector<double> increments;
    for (std::size_t m = 8; 2 * m <= cfg.series_n_max; m *= 2) {
        const double inc = series[2 * m].exp_partial - series[m].exp_partial;
        if (inc > 0) {
            ms.push_back(m);
            increments.push_back(inc);
        }
    }
    if (ms.size() >= 2) {
        PowerFit fit = fit_inverse_sqrt(ms, increments);
        push_verdict(rep, "increment_fit",
                     fit.max_rel_residual <= cfg.increment_residual_threshold,
                     fit.max_rel_residual, cfg.increment_residual_threshold, "<=",
                     "relative residual of the dyadic-increment inverse-sqrt fit");
    } else {
        push_verdict(rep, "increment_fit", false, std::numeric_limits<double>::infinity(),
                     cfg.increment_residual_threshold, "<=",
                     "not enough positive dyadic increments");
    }
}

// -------------------------------------------------------------- local-limit

void run_local_limit(const ExperimentConfig& cfg, const EnvironmentEnsemble& ens,
                     ExperimentReport& rep) {
    gate(cfg, ens, rep);
    require_horizons(cfg);
    if (cfg.offsets.empty()) throw ConfigError("local-limit needs offsets");
    const SimplexPoint x0 = start_point(cfg, ens.p());
    auto cells = local_limit_cells(ens, x0, cfg.a, cfg.horizons, cfg.offsets, cfg.replicas,
                                   cfg.seed, cfg.workers);
    for (std::size_t b = 0; b < cfg.offsets.size(); ++b) {
        std::vector<EstimatorRow> rows;
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (const auto& cell : cells) {
            if (cell.b != cfg.offsets[b]) continue;
            const double scale = std::pow(static_cast<double>(cell.n), 1.5);
            const double v = scale * cell.estimate;
            rows.push_back(row_of(cell.n, v, scale * cell.stderr_, cell.replicas, cfg.seed));
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const std::string tag = std::to_string(b);
        add_table(rep, "local_limit_b" + tag, rows);
        const double ratio = lo > 0 ? hi / lo : std::numeric_limits<double>::infinity();
        push_verdict(rep, "bounded_b" + tag, ratio <= cfg.factor_bound, ratio,
                     cfg.factor_bound, "<=",
                     "max/min of n^{3/2} P(S_n in cell, tau > n) at offset " +
                         format_double(cfg.offsets[b]));
    }
}

}  // namespace

std::string kind_name(ExperimentKind k) {
    for (const auto& entry : kKindNames)
        if (entry.kind == k) return entry.name;
    throw ConfigError("unknown experiment kind");
}

ExperimentKind kind_from_name(const std::string& name) {
    for (const auto& entry : kKindNames)
        if (name == entry.name) return entry.kind;
    throw ConfigError("unknown experiment kind: " + name);
}

ExperimentConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");

    ExperimentConfig cfg;
    if (j.contains("kind")) {
        if (!j.at("kind").is_string()) throw ConfigError("config field 'kind' must be a string");
        cfg.kind = kind_from_name(j.at("kind").get<std::string>());
    }
    if (!j.contains("ensemble") || !j.at("ensemble").is_string())
        throw ConfigError("config needs an 'ensemble' path");
    cfg.ensemble_path = j.at("ensemble").get<std::string>();

    cfg.z = get_u64_list(j, "z");
    cfg.x0 = get_real_list(j, "x0");
    cfg.a = get_real(j, "a", cfg.a);
    for (auto h : get_u64_list(j, "horizons"))
        cfg.horizons.push_back(static_cast<std::size_t>(h));
    cfg.replicas = get_u64(j, "replicas", cfg.replicas);
    cfg.sigma_replicas = get_u64(j, "sigma_replicas", cfg.sigma_replicas);
    cfg.sigma_horizon = static_cast<std::size_t>(get_u64(j, "sigma_horizon", cfg.sigma_horizon));
    cfg.sigma_burnin = static_cast<std::size_t>(get_u64(j, "sigma_burnin", cfg.sigma_burnin));
    cfg.gate_replicas = get_u64(j, "gate_replicas", cfg.gate_replicas);
    cfg.gate_horizon = static_cast<std::size_t>(get_u64(j, "gate_horizon", cfg.gate_horizon));
    cfg.series_n_max = static_cast<std::size_t>(get_u64(j, "series_n_max", cfg.series_n_max));
    cfg.delta = get_real(j, "delta", cfg.delta);
    cfg.eps = get_real(j, "eps", cfg.eps);
    cfg.K = get_real(j, "K", cfg.K);
    cfg.seed = get_u64(j, "seed", cfg.seed);
    if (j.contains("knob")) {
        if (!j.at("knob").is_string()) throw ConfigError("config field 'knob' must be a string");
        cfg.knob = j.at("knob").get<std::string>();
    }
    cfg.knob_lo = get_real(j, "knob_lo", cfg.knob_lo);
    cfg.knob_hi = get_real(j, "knob_hi", cfg.knob_hi);
    cfg.knob_tol = get_real(j, "knob_tol", cfg.knob_tol);
    cfg.direction = static_cast<std::size_t>(get_u64(j, "direction", cfg.direction));
    for (auto h : get_u64_list(j, "trend_horizons"))
        cfg.trend_horizons.push_back(static_cast<std::size_t>(h));
    if (j.contains("offsets")) cfg.offsets = get_real_list(j, "offsets");
    if (j.contains("out_dir")) {
        if (!j.at("out_dir").is_string())
            throw ConfigError("config field 'out_dir' must be a string");
        cfg.out_dir = j.at("out_dir").get<std::string>();
    }

    cfg.ks_walk_threshold = get_real(j, "ks_walk_threshold", cfg.ks_walk_threshold);
    cfg.ks_logpop_threshold = get_real(j, "ks_logpop_threshold", cfg.ks_logpop_threshold);
    cfg.flatness_threshold = get_real(j, "flatness_threshold", cfg.flatness_threshold);
    cfg.level_rel_tol = get_real(j, "level_rel_tol", cfg.level_rel_tol);
    cfg.increment_residual_threshold =
        get_real(j, "increment_residual_threshold", cfg.increment_residual_threshold);
    cfg.coupling_eps = get_real(j, "coupling_eps", cfg.coupling_eps);
    cfg.mass_cut = get_real(j, "mass_cut", cfg.mass_cut);
    cfg.two_sample_threshold = get_real(j, "two_sample_threshold", cfg.two_sample_threshold);
    cfg.factor_bound = get_real(j, "factor_bound", cfg.factor_bound);
    cfg.coincidence_threshold =
        get_real(j, "coincidence_threshold", cfg.coincidence_threshold);

    if (cfg.replicas < 1 || cfg.sigma_replicas < 1 || cfg.gate_replicas < 1)
        throw ConfigError("budgets must be at least 1");
    for (std::size_t i = 1; i < cfg.horizons.size(); ++i)
        if (cfg.horizons[i] <= cfg.horizons[i - 1])
            throw ConfigError("horizons must be strictly increasing");
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    ExperimentConfig cfg = parse_config(buf.str());
    if (const char* env = std::getenv("BPRELAB_SEED"); env != nullptr && *env != '\0') {
        std::uint64_t v = 0;
        const char* end = env + std::char_traits<char>::length(env);
        auto res = std::from_chars(env, end, v);
        if (res.ec != std::errc() || res.ptr != end)
            throw ConfigError("BPRELAB_SEED must be an unsigned 64-bit integer");
        cfg.seed = v;
        cfg.seed_overridden = true;
    }
    return cfg;
}

std::string config_echo(const ExperimentConfig& cfg) {
    ordered_json j;
    j["kind"] = kind_name(cfg.kind);
    j["ensemble"] = cfg.ensemble_path;
    j["z"] = cfg.z;
    j["x0"] = real_array(cfg.x0);
    j["a"] = format_double(cfg.a);
    j["horizons"] = cfg.horizons;
    j["replicas"] = cfg.replicas;
    j["sigma_replicas"] = cfg.sigma_replicas;
    j["sigma_horizon"] = cfg.sigma_horizon;
    j["sigma_burnin"] = cfg.sigma_burnin;
    j["gate_replicas"] = cfg.gate_replicas;
    j["gate_horizon"] = cfg.gate_horizon;
    j["series_n_max"] = cfg.series_n_max;
    j["delta"] = format_double(cfg.delta);
    j["eps"] = format_double(cfg.eps);
    j["K"] = format_double(cfg.K);
    j["seed"] = cfg.seed;
    j["seed_overridden"] = cfg.seed_overridden;
    j["knob"] = cfg.knob;
    j["knob_lo"] = format_double(cfg.knob_lo);
    j["knob_hi"] = format_double(cfg.knob_hi);
    j["knob_tol"] = format_double(cfg.knob_tol);
    j["direction"] = cfg.direction;
    j["trend_horizons"] = cfg.trend_horizons;
    j["offsets"] = real_array(cfg.offsets);
    j["force"] = cfg.force;
    ordered_json thr;
    thr["ks_walk"] = format_double(cfg.ks_walk_threshold);
    thr["ks_logpop"] = format_double(cfg.ks_logpop_threshold);
    thr["flatness"] = format_double(cfg.flatness_threshold);
    thr["level_rel_tol"] = format_double(cfg.level_rel_tol);
    thr["increment_residual"] = format_double(cfg.increment_residual_threshold);
    thr["coupling_eps"] = format_double(cfg.coupling_eps);
    thr["mass_cut"] = format_double(cfg.mass_cut);
    thr["two_sample"] = format_double(cfg.two_sample_threshold);
    thr["factor_bound"] = format_double(cfg.factor_bound);
    thr["coincidence"] = format_double(cfg.coincidence_threshold);
    j["thresholds"] = thr;
    return j.dump();
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    EnvironmentEnsemble ens = load_ensemble(cfg.ensemble_path);

    ExperimentReport rep;
    rep.kind = kind_name(cfg.kind);
    rep.code_version = kCodeVersion;
    rep.config_echo = config_echo(cfg);

    switch (cfg.kind) {
        case ExperimentKind::validate: run_validate(cfg, ens, rep); break;
        case ExperimentKind::lyapunov: run_lyapunov(cfg, ens, rep); break;
        case ExperimentKind::calibrate: run_calibrate(cfg, ens, rep); break;
        case ExperimentKind::survival: run_survival(cfg, ens, rep); break;
        case ExperimentKind::tau_tail: run_tau_tail(cfg, ens, rep); break;
        case ExperimentKind::rayleigh_walk: run_rayleigh_walk(cfg, ens, rep); break;
        case ExperimentKind::rayleigh_logpop: run_rayleigh_logpop(cfg, ens, rep); break;
        case ExperimentKind::scaled_population: run_scaled_population(cfg, ens, rep); break;
        case ExperimentKind::kesten_stigum: run_kesten_stigum(cfg, ens, rep); break;
        case ExperimentKind::series_check: run_series_check(cfg, ens, rep); break;
        case ExperimentKind::local_limit: run_local_limit(cfg, ens, rep); break;
    }

    rep.all_pass = std::all_of(rep.verdicts.begin(), rep.verdicts.end(),
                               [](const Verdict& v) { return v.pass; });
    rep.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

}  // namespace bprelab

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bprelab/report.hpp"

namespace bprelab {

inline constexpr const char* kCodeVersion = "0.1.0";

enum class ExperimentKind {
    validate,
    lyapunov,
    calibrate,
    survival,
    tau_tail,
    rayleigh_walk,
    rayleigh_logpop,
    scaled_population,
    kesten_stigum,
    series_check,
    local_limit,
};

std::string kind_name(ExperimentKind k);
ExperimentKind kind_from_name(const std::string& name);  // throws ConfigError

// Effective experiment configuration. Everything that influences results is
// echoed into the report; workers and the output directory are not, so the
// report bytes depend only on (config, seed, code version).
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::validate;
    std::string ensemble_path;

    std::vector<std::uint64_t> z;        // ancestors; empty = one of type 0
    std::vector<double> x0;              // walk start direction; empty = barycenter
    double a = 1.0;                      // walk start level
    std::vector<std::size_t> horizons;   // strictly increasing

    std::uint64_t replicas = 10000;
    std::uint64_t sigma_replicas = 20000;
    std::size_t sigma_horizon = 4096;
    std::size_t sigma_burnin = 64;
    std::uint64_t gate_replicas = 512;
    std::size_t gate_horizon = 256;
    std::size_t series_n_max = 128;

    double delta = 0.25;
    double eps = 0.04;
    double K = 8.0;

    std::uint64_t seed = 1;
    bool seed_overridden = false;  // BPRELAB_SEED was applied

    // calibrate
    std::string knob = "geometric_scale";
    double knob_lo = 0.5;
    double knob_hi = 2.0;
    double knob_tol = 0.002;

    // scaled-population / local-limit extras
    std::size_t direction = 0;
    std::vector<std::size_t> trend_horizons;  // empty = all horizons
    std::vector<double> offsets{0.0, 1.0, 2.0};

    // verdict thresholds (defaults are the contract values)
    double ks_walk_threshold = 0.05;
    double ks_logpop_threshold = 0.07;
    double flatness_threshold = 1.15;
    double level_rel_tol = 0.20;
    double increment_residual_threshold = 0.3;
    double coupling_eps = 0.25;
    double mass_cut = 0.01;
    double two_sample_threshold = 0.05;
    double factor_bound = 3.0;
    double coincidence_threshold = 0.95;

    // not echoed
    std::string out_dir;
    bool force = false;
    unsigned workers = 1;
};

ExperimentConfig parse_config(const std::string& json_text);
// parse_config + BPRELAB_SEED override from the environment.
ExperimentConfig load_config(const std::string& path);
std::string config_echo(const ExperimentConfig& cfg);

// Dispatches the configured experiment. Throws ConfigError on invalid
// configuration, GateFailed when a required hypothesis gate fails without
// force, and propagates InsufficientAcceptance from conditioned samplers.
ExperimentReport run_experiment(const ExperimentConfig& cfg);

}  // namespace bprelab

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "restop/arrival.hpp"
#include "restop/env.hpp"
#include "restop/imitation.hpp"
#include "restop/mdp.hpp"
#include "restop/nn.hpp"

/// Benchmark orchestration: synthetic multi-city configs, data generation
/// with a train/test time split, per-alpha training of the learned
/// policies, and head-to-head evaluation on the held-out span. Every stage
/// is deterministic given (config, seed), so runs are reproducible and
/// parallel fan-out cannot change the output.
namespace restop {

struct CityConfig {
    std::string name;
    FeeCurve fee;
    GeneratorSpec generator;
};

struct BenchmarkConfig {
    std::string name = "custom";
    double horizon_days = 270.0;
    double split_fraction = 2.0 / 3.0;  // leading fraction used for training
    double episode_window = 30.0;       // days per training window
    std::vector<double> alphas;         // holding-cost ladder, ascending
    int seeds = 3;
    std::uint64_t base_seed = 1;
    double capacity = 22000.0;
    int max_items = 60;
    int grid_bins = 50;

    // Certainty-equivalence controller.
    int resolve_every = 10;
    int min_observations = 8;
    double lookback = 30.0;
    int window_min_count = 10;

    // Imitation loop.
    int il_iterations = 3;
    int il_windows = 25;
    int il_epochs = 60;
    double il_learning_rate = 0.05;
    double il_l2 = 1e-4;
    int il_batch = 32;
    int il_validation_windows = 24;
    bool il_inverse_frequency = false;
    Activation il_activation = Activation::relu;

    // Likelihood-ratio trainer.
    int pg_episodes = 1500;
    int pg_batch = 16;
    double pg_step = 0.02;
    bool pg_mean_baseline = true;

    std::vector<CityConfig> cities;

    void validate() const;
    std::string to_json() const;
    static BenchmarkConfig from_json(const std::string& text);
    static BenchmarkConfig load(const std::string& path);
    void save(const std::string& path) const;

    double train_days() const { return horizon_days * split_fraction; }
    double test_days() const { return horizon_days - train_days(); }
    CostModel cost_model(const CityConfig& city, double alpha) const;
};

/// Built-in configs: "tiny" (seconds-scale smoke), "stationary" (six cities,
/// fixed regimes), "default" (same six; the last city switches regime inside
/// the evaluation span).
BenchmarkConfig preset(const std::string& name);
std::vector<std::string> preset_names();

/// Normalization constants and cold-start priors derived from the config's
/// generator means; stored with every trained policy.
FeatureScaling make_scaling(const BenchmarkConfig& config);

struct GeneratedCity {
    std::string name;
    OrderSequence full;   // [0, horizon]
    OrderSequence train;  // leading split
    OrderSequence test;   // trailing split
};

/// Draw every city's sequence for one evaluation seed and slice the split.
std::vector<GeneratedCity> generate_cities(const BenchmarkConfig& config, std::uint64_t seed);

/// Training-split corpus paired with each city's cost model at this alpha.
std::vector<TrainingCity> training_corpus(const BenchmarkConfig& config,
                                          const std::vector<GeneratedCity>& cities, double alpha);

enum class Approach {
    baseline,
    load_threshold,
    model_based,
    model_based_windowed,
    imitation,
    policy_gradient,
    hindsight,
};

const char* to_string(Approach a);
Approach approach_from_string(const std::string& s);
std::vector<Approach> all_approaches();

struct EvalRow {
    Approach approach = Approach::baseline;
    double alpha = 0.0;
    std::string city;  // "all" aggregates over the config's cities
    std::uint64_t seed = 0;
    CostBreakdown cost;
    double decision_latency_us = 0.0;  // mean wall time per policy call
};

const char* results_csv_header();
std::string results_csv_row(const EvalRow& row);
std::string results_csv(const std::vector<EvalRow>& rows);

/// Policies trained once per (alpha, seed) and shared across the cities.
struct TrainedPolicies {
    std::optional<NeuralPolicy> imitation;
    std::optional<NeuralPolicy> policy_gradient;
    std::optional<ImitationResult> imitation_detail;
};

/// Train whichever of the two learned policies the approach list needs.
TrainedPolicies train_policies(const BenchmarkConfig& config,
                               const std::vector<GeneratedCity>& cities, double alpha,
                               std::uint64_t seed, bool want_imitation, bool want_pg);

/// Evaluate one approach on one city's held-out span.
EvalRow evaluate_approach(const BenchmarkConfig& config, const GeneratedCity& city,
                          const CityConfig& city_cfg, Approach approach, double alpha,
                          std::uint64_t seed, const TrainedPolicies& trained);

struct RunOptions {
    std::vector<double> alphas;          // empty: the config ladder
    std::vector<Approach> approaches;    // empty: all
    int seeds = -1;                      // <0: config.seeds
    int jobs = 1;                        // worker threads over (alpha, seed) cells
    bool aggregate_rows = true;          // append per-(approach, alpha, seed) "all" rows
};

/// Full evaluation: per (alpha, seed) generate, train, and score every
/// requested approach on every city. Row order is fixed regardless of jobs.
std::vector<EvalRow> run_benchmark(const BenchmarkConfig& config, const RunOptions& options);

/// Post-switch cost comparison on the regime-switching city: returns
/// (full-history cost, windowed cost) attributed to decisions taken at or
/// after the switch. Throws if no city switches regime.
std::pair<double, double> regime_switch_comparison(const BenchmarkConfig& config, double alpha,
                                                   std::uint64_t seed);

/// Solve the discretized model per alpha on one city's training split.
std::vector<std::pair<double, MdpSolution>> solve_policy_ladder(const BenchmarkConfig& config,
                                                                const GeneratedCity& city,
                                                                const CityConfig& city_cfg,
                                                                std::uint64_t seed);

/// True when every stop cell of `smaller` also stops in `larger` (stop
/// regions ordered by inclusion, as expected along the alpha ladder).
/// The two-argument form compares the whole rectangular table.
bool stop_region_nested(const GridPolicy& smaller, const GridPolicy& larger);

/// Containment over the grid states the discretized chain can occupy under
/// `model` (reachable_grid_states). The table corners no fold of arrivals
/// produces carry extrapolated labels with no behavioral meaning, and those
/// labels are not monotone in alpha; states of the chain are.
bool stop_region_nested(const GridPolicy& smaller, const GridPolicy& larger,
                        const ArrivalModel& model, const CostModel& cm);

/// Stop probability of the network over the solver grid at fixed
/// context features (no accrued delay; supplied stream means).
std::vector<std::vector<double>> neural_stop_fractions(const NeuralPolicy& policy,
                                                       const CostModel& cm,
                                                       const std::vector<double>& edges,
                                                       int max_items, double mean_inter_arrival,
                                                       double mean_weight);
void write_stop_fraction_csv(std::ostream& out, const std::vector<double>& edges,
                             const std::vector<std::vector<double>>& fractions);

// ─── Run-directory helpers ───────────────────────────────────────────────

/// Create (if needed) a run directory and write config.json into it.
void init_run_dir(const std::string& dir, const BenchmarkConfig& config);
void write_text_file(const std::string& path, const std::string& content);

/// manifest.json: command, config name, seed range, and artifact list.
void write_manifest(const std::string& dir, const std::string& command,
                    const BenchmarkConfig& config, const std::vector<std::string>& artifacts);

}  // namespace restop

#pragma once

#include <cstdint>
#include <vector>

#include "restop/env.hpp"
#include "restop/hindsight.hpp"
#include "restop/nn.hpp"

/// Imitation of the clairvoyant expert. Training windows are sampled from
/// recorded sequences; the expert labels every state visited during a
/// rollout with the hindsight-optimal action for that window, the labels
/// aggregate across iterations, and the network is retrained from scratch
/// on the full set each round. Iteration one rolls out the expert itself
/// (plain behavioral cloning); later iterations roll out the current
/// learner so the labels cover the states the learner actually reaches.
namespace restop {

struct ImitationConfig {
    int outer_iterations = 4;
    int windows_per_iteration = 40;
    double episode_window = 30.0;  // days per training window
    SupervisedConfig train;
    std::uint64_t seed = 0;
    /// Reweight classes by inverse label frequency, capped at 10x (stop
    /// labels are rare when waiting dominates).
    bool inverse_frequency_weights = false;
    int validation_windows = 32;  // held-out windows scored per iteration
    Activation activation = Activation::relu;
    FeatureScaling scaling;
};

/// One labeled decision of one rollout, kept for auditing.
struct LabelRecord {
    int step = 0;
    SystemState state;
    Action label = Action::wait;   // expert's choice
    Action taken = Action::wait;   // what the rollout actually did
    bool forced = false;
};

struct WindowRecord {
    int iteration = 0;
    std::size_t corpus_index = 0;
    double window_start = 0.0;  // offset inside the source sequence
    std::vector<LabelRecord> labels;
};

struct IterationDiagnostics {
    std::size_t dataset_size = 0;   // aggregated labels after this round
    double label_agreement = 0.0;   // greedy match rate over the full set
    double validation_cost = 0.0;   // mean simulated cost on held-out windows
    double train_loss = 0.0;
};

struct ImitationResult {
    NeuralPolicy policy;        // best validation cost across iterations
    NeuralPolicy final_policy;  // after the last iteration
    int best_iteration = 0;     // 1-based
    LabeledDataset dataset;     // the aggregated label set
    std::vector<IterationDiagnostics> iterations;
    std::vector<WindowRecord> windows;  // full rollout audit trail
};

/// Run the full loop over a multi-city corpus. Deterministic given
/// cfg.seed. Each iteration retrains a freshly initialized network on the
/// aggregated labels, then scores it on a fixed held-out window set.
ImitationResult imitate_expert(const std::vector<TrainingCity>& corpus,
                               const ImitationConfig& cfg);

/// Single-cost-model convenience overload.
ImitationResult imitate_expert(const std::vector<OrderSequence>& gamma, const CostModel& cm,
                               const ImitationConfig& cfg);

/// Inverse-frequency class weights for a label set: weight of class a is
/// total / (2 * count_a), 1.0 for absent classes.
std::array<double, 2> inverse_frequency_weights(const LabeledDataset& data);

}  // namespace restop

#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "restop/core.hpp"
#include "restop/simulate.hpp"

/// Small fixed-topology softmax policy network (6 -> 32 -> 32 -> 2) with
/// hand-written forward/backward passes. Everything is deterministic given
/// the seeds; parameters live in one flat vector so gradient checks and
/// serialization stay simple.
namespace restop {

/// Raw (unnormalized) policy inputs: held load, item count, accumulated
/// delay, the destination's full-truck fee, and the running mean
/// inter-arrival time and order weight of the episode.
struct PolicyFeatures {
    double load = 0.0;
    double item_count = 0.0;
    double total_delay = 0.0;
    double max_fee = 0.0;
    double mean_inter_arrival = 0.0;
    double mean_weight = 0.0;

    std::array<double, 6> raw() const {
        return {load, item_count, total_delay, max_fee, mean_inter_arrival, mean_weight};
    }
};

/// Fixed normalization constants and cold-start priors, chosen per
/// benchmark config and stored with the serialized policy.
struct FeatureScaling {
    double load_scale = 1.0;
    double items_scale = 1.0;
    double delay_scale = 1.0;
    double fee_scale = 1.0;
    double tau_scale = 1.0;
    double weight_scale = 1.0;
    double tau_prior = 1.0;     // mean inter-arrival before any observation
    double weight_prior = 1.0;  // mean weight before any observation

    void validate() const;
};

/// Assemble features for state s given the episode's running stream stats;
/// the scaling supplies the priors used while no arrival has been seen.
PolicyFeatures featurize(const SystemState& s, const EpisodeStats& stats, const CostModel& cm,
                         const FeatureScaling& scaling);

enum class Activation { relu, tanh };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

class NeuralPolicy {
  public:
    static constexpr int kInput = 6;
    static constexpr int kHidden = 32;
    static constexpr int kOutput = 2;  // logit order: [wait, stop]
    static constexpr int kParamCount =
        kHidden * kInput + kHidden + kHidden * kHidden + kHidden + kOutput * kHidden + kOutput;

    /// Symmetric fan-in-scaled uniform weight init, zero biases.
    NeuralPolicy(Activation activation, FeatureScaling scaling, std::uint64_t seed);

    std::array<double, 2> logits(const PolicyFeatures& f) const;
    std::array<double, 2> probabilities(const PolicyFeatures& f) const;
    /// Probabilities with masked actions zeroed and the rest renormalized.
    std::array<double, 2> masked_probabilities(const PolicyFeatures& f, ActionMask mask) const;

    /// Sample from the masked distribution. Forced actions return without
    /// consuming randomness.
    Action act(const PolicyFeatures& f, ActionMask mask, std::mt19937_64& rng) const;
    /// Argmax of the masked distribution; prefers wait on exact ties.
    Action act_greedy(const PolicyFeatures& f, ActionMask mask) const;

    std::vector<double>& parameters() { return params_; }
    const std::vector<double>& parameters() const { return params_; }
    Activation activation() const { return activation_; }
    const FeatureScaling& scaling() const { return scaling_; }

    /// Activations of one forward pass, kept for backpropagation.
    struct Trace {
        std::array<double, kInput> input;
        std::array<double, kHidden> pre1, hid1, pre2, hid2;
        std::array<double, kOutput> logits;
        std::array<double, kOutput> probs;
    };
    Trace forward(const PolicyFeatures& f) const;

    /// Exact 64-bit round-trip JSON serialization, including scaling and
    /// activation choice.
    std::string to_json() const;
    static NeuralPolicy from_json(const std::string& text);
    void save(const std::string& path) const;
    static NeuralPolicy load(const std::string& path);

  private:
    Activation activation_;
    FeatureScaling scaling_;
    std::vector<double> params_;
};

struct LabeledSample {
    PolicyFeatures features;
    Action label = Action::wait;
};

/// The aggregated demonstration set: append-only, insertion-ordered.
using LabeledDataset = std::vector<LabeledSample>;

void save_dataset_csv(const std::string& path, const LabeledDataset& data);
LabeledDataset load_dataset_csv(const std::string& path);

struct SupervisedConfig {
    double learning_rate = 0.05;
    double l2 = 1e-4;       // coefficient on the sum of squared weights
    int epochs = 100;
    int batch_size = 32;
    std::uint64_t seed = 0;
    std::array<double, 2> class_weights{1.0, 1.0};  // optional imbalance reweighting
};

/// Gradient of (weighted mean cross-entropy over the batch) +
/// l2 * sum of squared weights, with respect to every parameter.
std::vector<double> gradients(const NeuralPolicy& policy,
                              const LabeledSample* batch, std::size_t batch_size,
                              double l2, const std::array<double, 2>& class_weights);

/// Accumulate the gradient of (dlogits . logits) with respect to every
/// parameter into `grad` (length kParamCount). Shared building block of the
/// supervised and likelihood-ratio trainers.
void accumulate_logit_gradient(const NeuralPolicy& policy, const NeuralPolicy::Trace& trace,
                               const std::array<double, 2>& dlogits, std::vector<double>& grad);

struct TrainReport {
    std::vector<double> loss_trace;  // full-dataset objective after each epoch
    double final_loss = 0.0;
    double final_accuracy = 0.0;     // greedy-unmasked agreement with labels
};

/// Plain mini-batch SGD with a fixed step. Deterministic given cfg.seed.
/// Throws on NaN/inf in the objective or parameters.
TrainReport train_supervised(NeuralPolicy& policy, const LabeledDataset& data,
                             const SupervisedConfig& cfg);

/// Objective value on a dataset (weighted mean cross-entropy + l2 term).
double supervised_loss(const NeuralPolicy& policy, const LabeledDataset& data, double l2,
                       const std::array<double, 2>& class_weights);

/// StoppingPolicy adapter so a network can drive the simulator.
class NeuralAgent final : public StoppingPolicy {
  public:
    NeuralAgent(const NeuralPolicy& policy, bool greedy)
        : policy_(&policy), greedy_(greedy) {}
    Action decide(const SystemState& s, const StepContext& ctx) override;
    const char* name() const override { return "neural"; }

  private:
    const NeuralPolicy* policy_;
    bool greedy_;
};

}  // namespace restop

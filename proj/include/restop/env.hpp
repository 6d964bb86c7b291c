#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <vector>

#include "restop/arrival.hpp"
#include "restop/nn.hpp"
#include "restop/simulate.hpp"

/// Episodic reinforcement-learning view of the stopping problem: episodes
/// are uniformly sampled fixed-length windows of recorded sequences, and
/// rewards are the negated step costs, so undiscounted return equals the
/// negative of the simulator's cost on the same window.
namespace restop {

/// One sequence paired with the economics of its destination; training
/// corpora mix cities with distinct fee curves.
struct TrainingCity {
    OrderSequence sequence;
    CostModel cost_model;
};

struct EpisodeTransition {
    SystemState state;      // at the decision epoch
    double t = 0.0;
    Action action = Action::wait;
    double reward = 0.0;    // <= 0 by construction
    SystemState next_state; // after the following arrival folds in
    double t_next = 0.0;
    bool forced = false;    // action came from the mask, not the policy
    PolicyFeatures features;  // as seen by the policy at the decision
};

/// Environment parameters. `dataset` is non-owning.
struct EnvConfig {
    const std::vector<OrderSequence>* dataset = nullptr;
    double episode_window = 0.0;  // days; must fit inside the sequences
    CostModel cost_model;
    std::uint64_t seed = 0;
};

/// Contiguous slice of `seq` covering (from, from + duration]; the first
/// retained arrival's inter-arrival time is measured from the slice start.
OrderSequence slice_window(const OrderSequence& seq, double from, double duration);

/// Uniformly pick a sequence that can host the window, then a uniform
/// start offset. Throws if no sequence admits the window.
OrderSequence sample_window(const std::vector<OrderSequence>& gamma, double duration,
                            std::mt19937_64& rng);

/// Replay one already-sampled window: one transition per arrival, no
/// decision at the final arrival (costs past it are not charged). When a
/// scaling is supplied, each transition records the features the policy saw.
std::vector<EpisodeTransition> run_episode(StoppingPolicy& policy, const OrderSequence& window,
                                           const CostModel& cm, std::mt19937_64& rng,
                                           const FeatureScaling* scaling = nullptr);

/// Sample a window per the config and replay it.
std::vector<EpisodeTransition> get_episode(StoppingPolicy& policy, const EnvConfig& cfg,
                                           std::mt19937_64& rng);

double episode_return(const std::vector<EpisodeTransition>& episode);

/// Text log for external training loops: a config header plus one line per
/// transition (load, items, delay, t, action, reward, primed fields).
void write_transition_log(std::ostream& out, const EnvConfig& cfg,
                          const std::vector<std::vector<EpisodeTransition>>& episodes);

struct PgConfig {
    int episodes = 2000;
    int batch = 16;
    double step_size = 0.05;
    bool mean_baseline = true;  // subtract the batch-mean return
    double episode_window = 0.0;
    std::uint64_t seed = 0;
};

struct PgReport {
    std::vector<double> return_trace;  // batch-mean undiscounted return
    int episodes_run = 0;
};

/// Episodic likelihood-ratio gradient ascent on expected return (the
/// discount is 1; episodes are finite by construction). Deterministic given
/// the seed; throws if parameters or gradients stop being finite.
PgReport train_policy_gradient(NeuralPolicy& policy, const std::vector<TrainingCity>& corpus,
                               const PgConfig& cfg);
PgReport train_policy_gradient(NeuralPolicy& policy, const EnvConfig& env, const PgConfig& cfg);

}  // namespace restop

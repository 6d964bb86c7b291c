#pragma once

#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "restop/arrival.hpp"
#include "restop/core.hpp"

/// Sequence-replay simulator. Decisions happen at arrival epochs: the
/// controller sees the state with the new arrival folded in and either
/// ships now or holds until the next arrival. The final decision at the
/// last arrival covers the residual window unless truncation is requested.
namespace restop {

/// How the stretch after the last arrival is treated.
///   accrue_to_horizon: a final decision is taken at the last arrival and
///     its cost runs to the end of the window (default).
///   truncate_at_last_arrival: no decision at the last arrival; costs end
///     there. Matches episodic reward accounting.
enum class TailMode { accrue_to_horizon, truncate_at_last_arrival };

/// Everything a policy may consult at a decision epoch beyond the state.
struct StepContext {
    int step = 0;       // decision index; 0 is the epoch at s0 before any arrival
    double clock = 0.0; // decision time, days
    EpisodeStats stats; // arrivals observed so far this episode
    const OrderSequence* sequence = nullptr;
    const CostModel* cost_model = nullptr;
    std::mt19937_64* rng = nullptr;
};

/// Interface replayed by the simulator and the episode sampler. decide is
/// only called when both actions are admissible; forced states are resolved
/// by masking without consulting (or advancing) the policy.
class StoppingPolicy {
  public:
    virtual ~StoppingPolicy() = default;
    virtual void begin_episode(const OrderSequence&, const CostModel&) {}
    /// Called once per arrival, after the decision at that arrival's epoch.
    virtual void observe(const TimedDataPoint&) {}
    virtual Action decide(const SystemState& s, const StepContext& ctx) = 0;
    virtual const char* name() const = 0;
};

/// Ship every order the moment it arrives.
class AlwaysStopPolicy final : public StoppingPolicy {
  public:
    Action decide(const SystemState&, const StepContext&) override { return Action::stop; }
    const char* name() const override { return "baseline"; }
};

/// Hold everything until stopping is forced.
class NeverStopPolicy final : public StoppingPolicy {
  public:
    Action decide(const SystemState&, const StepContext&) override { return Action::wait; }
    const char* name() const override { return "never-stop"; }
};

/// Stop as soon as the held load reaches the threshold.
class LoadThresholdPolicy final : public StoppingPolicy {
  public:
    explicit LoadThresholdPolicy(double threshold) : threshold_(threshold) {}
    Action decide(const SystemState& s, const StepContext&) override {
        return s.load >= threshold_ ? Action::stop : Action::wait;
    }
    const char* name() const override { return "load-threshold"; }

  private:
    double threshold_;
};

/// Stop as soon as the held item count reaches the threshold.
class ItemCountThresholdPolicy final : public StoppingPolicy {
  public:
    explicit ItemCountThresholdPolicy(int threshold) : threshold_(threshold) {}
    Action decide(const SystemState& s, const StepContext&) override {
        return s.item_count >= threshold_ ? Action::stop : Action::wait;
    }
    const char* name() const override { return "item-threshold"; }

  private:
    int threshold_;
};

/// Replay a fixed action per decision index; used by exhaustive searches.
class ScriptedPolicy final : public StoppingPolicy {
  public:
    explicit ScriptedPolicy(std::vector<Action> script) : script_(std::move(script)) {}
    Action decide(const SystemState&, const StepContext& ctx) override {
        if (ctx.step < 0 || ctx.step >= static_cast<int>(script_.size()))
            throw std::out_of_range("ScriptedPolicy: no action for step " +
                                    std::to_string(ctx.step));
        return script_[static_cast<std::size_t>(ctx.step)];
    }
    const char* name() const override { return "scripted"; }

  private:
    std::vector<Action> script_;
};

/// Stop with fixed probability at every free decision; stress-test helper.
class BernoulliPolicy final : public StoppingPolicy {
  public:
    explicit BernoulliPolicy(double p_stop) : p_stop_(p_stop) {}
    Action decide(const SystemState&, const StepContext& ctx) override {
        std::bernoulli_distribution d(p_stop_);
        return d(*ctx.rng) ? Action::stop : Action::wait;
    }
    const char* name() const override { return "bernoulli"; }

  private:
    double p_stop_;
};

/// Cost totals of one simulated window. total_cost = shipping_cost +
/// delay_cost exactly; delay_cost = alpha * delay_days; delay_per_order
/// divides total delay-days by the number of orders that arrived.
struct CostBreakdown {
    double total_cost = 0.0;
    double shipping_cost = 0.0;
    double delay_cost = 0.0;
    double delay_days = 0.0;  // alpha-free accumulated order-days of waiting
    int shipments = 0;
    int orders = 0;
    double delay_per_order_days = 0.0;

    static const char* csv_header();
    std::string csv_row(const std::string& policy, double alpha) const;
};

struct TrajectoryStep {
    int step = 0;
    SystemState state;     // state at the decision epoch
    Action action = Action::wait;
    bool forced = false;
    double interval = 0.0; // days until the next epoch (or horizon)
};

/// Saved point of a run, sufficient to resume at an arrival-aligned split.
struct SimSnapshot {
    SystemState state;
    EpisodeStats stats;
    std::vector<double> held_arrivals;  // absolute arrival times of held orders
    std::mt19937_64 rng;
    int next_step = 0;
    int orders_seen = 0;
};

struct SimulateOptions {
    TailMode tail = TailMode::accrue_to_horizon;
    std::uint64_t seed = 0;
    bool record_trajectory = false;
};

struct SimulateResult {
    CostBreakdown breakdown;
    std::vector<TrajectoryStep> trajectory;  // empty unless recorded
    SimSnapshot final_state;
    /// Ship-time minus arrival-time summed over orders shipped; orders still
    /// held at the end contribute up to the cost cutoff. Equals
    /// breakdown.delay_days by construction and is accumulated from
    /// per-order timestamps as an internal cross-check.
    double per_order_delay_days = 0.0;
};

/// Replay `seq` under `policy` over [0, horizon]. All arrivals must fall
/// within the horizon. Costs follow step_cost; masking is applied before
/// the policy is consulted. Pass `resume` to continue a previous run whose
/// remaining points are given in `seq` (inter-arrivals relative to the
/// snapshot time); `horizon` is then the remaining time.
SimulateResult simulate(StoppingPolicy& policy, const OrderSequence& seq, double horizon,
                        const CostModel& cm, const SimulateOptions& options = {},
                        const SimSnapshot* resume = nullptr);

/// Sum of step costs over the recorded trajectory entries whose decision
/// epoch is at or after from_clock. Requires record_trajectory; summing
/// from the episode start reproduces breakdown.total_cost.
double trajectory_cost_from(const SimulateResult& result, const CostModel& cm,
                            double from_clock);

}  // namespace restop

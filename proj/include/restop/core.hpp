#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

/// Core state, action and cost primitives for regenerative stopping problems
/// in the shipping-consolidation instantiation. Units are kilograms for
/// weights and loads, days for times, and currency units for costs.
namespace restop {

enum class Action : std::uint8_t { wait = 0, stop = 1 };

const char* to_string(Action a);

/// One order: its weight and the time elapsed since the previous arrival.
struct TimedDataPoint {
    double weight = 0.0;         // kg, must be > 0
    double inter_arrival = 0.0;  // days, must be >= 0
};

/// Controller-visible state. load/item_count drive costs and transitions;
/// total_delay and clock are bookkeeping carried along for features.
struct SystemState {
    double load = 0.0;         // total weight of held orders, kg
    int item_count = 0;        // number of held orders
    double total_delay = 0.0;  // accumulated waiting of held orders, item-days
    double clock = 0.0;        // time since window start, days

    /// True at the regeneration point s0 = (0, 0).
    bool is_regeneration() const { return item_count == 0; }
};

bool operator==(const SystemState& a, const SystemState& b);

/// Piecewise-linear shipping fee as a function of dispatched load.
/// Breakpoints must start at load 0, be strictly increasing in load,
/// nondecreasing in fee, and concave (segment slopes nonincreasing).
/// Beyond the last breakpoint the fee is flat (the full-truck rate).
class FeeCurve {
  public:
    explicit FeeCurve(std::vector<std::pair<double, double>> breakpoints);

    /// Fee for dispatching `load` kg. Clamps below 0 and above the last
    /// breakpoint.
    double operator()(double load) const;

    double full_truck_fee() const { return points_.back().second; }
    const std::vector<std::pair<double, double>>& breakpoints() const { return points_; }

  private:
    std::vector<std::pair<double, double>> points_;
};

/// Economic parameters of one destination: delay cost rate alpha (per
/// order-day), the fee curve, truck capacity, and the item-count ceiling
/// used by solvers and simulators.
struct CostModel {
    CostModel(double alpha, FeeCurve fee_curve, double capacity, int max_items);

    double alpha;
    FeeCurve fee_curve;
    double capacity;  // kg; stopping is forced at load >= capacity
    int max_items;    // solver truncation and sanity ceiling
};

/// Which actions are admissible in a state: wait only at s0, stop only at
/// load >= capacity, both otherwise.
struct ActionMask {
    bool wait_allowed = true;
    bool stop_allowed = true;

    bool forced() const { return wait_allowed != stop_allowed; }
    Action forced_action() const;
    bool allows(Action a) const { return a == Action::wait ? wait_allowed : stop_allowed; }
};

ActionMask available_actions(const SystemState& s, const CostModel& cm);

/// Deterministic state update when data point x arrives after action a was
/// taken in state s. wait folds x into the held set; stop resets to s0
/// first, so the new state holds only x. Throws std::invalid_argument if a
/// is masked in s or x is malformed.
SystemState transition(const SystemState& s, const TimedDataPoint& x, Action a,
                       const CostModel& cm);

/// Cost accrual rate while waiting: alpha * item_count, per day.
double wait_cost_rate(const SystemState& s, const CostModel& cm);

/// Lump cost of stopping: fee_curve(load). Throws at s0 (stop is masked
/// there).
double stop_cost(const SystemState& s, const CostModel& cm);

/// Cost of taking action a in s and then sitting for dt days:
///   wait: wait_cost_rate(s) * dt
///   stop: stop_cost(s) + wait_cost_rate(s0) * dt
double step_cost(const SystemState& s, Action a, double dt, const CostModel& cm);

/// Running means of the arrival stream observed since episode start, used
/// as policy features. Callers supply priors for the empty case.
struct EpisodeStats {
    int count = 0;
    double sum_inter_arrival = 0.0;
    double sum_weight = 0.0;

    void observe(const TimedDataPoint& x) {
        ++count;
        sum_inter_arrival += x.inter_arrival;
        sum_weight += x.weight;
    }
    double mean_inter_arrival(double prior) const {
        return count > 0 ? sum_inter_arrival / count : prior;
    }
    double mean_weight(double prior) const { return count > 0 ? sum_weight / count : prior; }
};

}  // namespace restop

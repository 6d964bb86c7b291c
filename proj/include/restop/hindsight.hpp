#pragma once

#include <utility>
#include <vector>

#include "restop/arrival.hpp"
#include "restop/core.hpp"

/// Clairvoyant optimal stopping on a fully revealed window. With the whole
/// arrival sequence known, any reachable state at step j is a fold of the
/// arrivals since the last reset, so states are indexed by that reset
/// index and the dynamic program is quadratic in the number of arrivals.
namespace restop {

struct HindsightResult {
    struct QEntry {
        double wait = 0.0;  // +infinity where the action is masked
        double stop = 0.0;
    };

    /// Optimal actions a_0..a_m along the realized path (a_0 is the forced
    /// wait at s0; the last entry is the residual-window decision). Empty
    /// when the window has no arrivals.
    std::vector<Action> optimal_actions;
    double optimal_cost = 0.0;

    /// q[j][k]: action values at step j for the state holding arrivals
    /// k+1..j. q[0] has the single s0 entry.
    std::vector<std::vector<QEntry>> q;
    std::size_t q_evaluations = 0;  // (state, step) pairs evaluated

    /// Optimal action at step j for any state reachable there, including
    /// states off the optimal path (as visited by a learner's rollout).
    /// Throws if s cannot be a fold of arrivals ending at step j.
    Action expert_action(int j, const SystemState& s) const;

    /// Best cost-to-go at step j for the state with the given reset index.
    double value(int j, int reset_index) const;

    // Window data retained for state identification and auditing.
    std::vector<double> weight_prefix;  // W[0..m]
    std::vector<double> time_prefix;    // t[0..m]
    double horizon = 0.0;
    double alpha = 0.0;
    double capacity = 0.0;
};

/// Exact hindsight optimum over [0, horizon] for the model used throughout:
/// wait accrues alpha * items per day, stop pays the fee and resets. All
/// arrivals must fall within the horizon.
HindsightResult hindsight(const OrderSequence& seq, double horizon, const CostModel& cm);

/// Exhaustive reference: enumerates every mask-feasible action sequence and
/// replays each through the simulator. Ties pick the sequence that stops
/// earliest (stop before wait, lexicographically). Refuses more than
/// max_arrivals points.
std::pair<std::vector<Action>, double> brute_force_hindsight(const OrderSequence& seq,
                                                             double horizon,
                                                             const CostModel& cm,
                                                             int max_arrivals = 20);

}  // namespace restop

#include "restop/hindsight.hpp"

#include <cmath>
#include <limits>

#include "restop/simulate.hpp"

namespace restop {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double HindsightResult::value(int j, int reset_index) const {
    const auto& e = q[static_cast<std::size_t>(j)][static_cast<std::size_t>(reset_index)];
    return std::min(e.wait, e.stop);
}

Action HindsightResult::expert_action(int j, const SystemState& s) const {
    const int m = static_cast<int>(q.size()) - 1;
    if (j < 0 || j > m)
        throw std::out_of_range("expert_action: step " + std::to_string(j) + " outside window");
    if (s.item_count == 0) {
        if (j != 0)
            throw std::invalid_argument("expert_action: empty state is only reachable at step 0");
        return Action::wait;
    }
    const int k = j - s.item_count;
    if (k < 0 || k >= j)
        throw std::invalid_argument("expert_action: item count " +
                                    std::to_string(s.item_count) +
                                    " not reachable at step " + std::to_string(j));
    const double expected = weight_prefix[j] - weight_prefix[k];
    if (std::abs(s.load - expected) > 1e-6 * std::max(1.0, expected))
        throw std::invalid_argument("expert_action: load inconsistent with the arrival prefix");
    const auto& e = q[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
    return e.stop <= e.wait ? Action::stop : Action::wait;
}

HindsightResult hindsight(const OrderSequence& seq, double horizon, const CostModel& cm) {
    const int m = static_cast<int>(seq.points.size());
    HindsightResult r;
    r.horizon = horizon;
    r.alpha = cm.alpha;
    r.capacity = cm.capacity;
    r.weight_prefix.assign(m + 1, 0.0);
    r.time_prefix.assign(m + 1, 0.0);
    for (int i = 1; i <= m; ++i) {
        r.weight_prefix[i] = r.weight_prefix[i - 1] + seq.points[i - 1].weight;
        r.time_prefix[i] = r.time_prefix[i - 1] + seq.points[i - 1].inter_arrival;
    }
    if (r.time_prefix[m] > horizon * (1.0 + 1e-12) + 1e-9)
        throw std::invalid_argument("hindsight: arrivals extend past the horizon");

    r.q.resize(m + 1);
    std::vector<std::vector<double>> v(m + 1);
    for (int j = 0; j <= m; ++j) {
        const std::size_t states = j == 0 ? 1 : static_cast<std::size_t>(j);
        r.q[j].resize(states);
        v[j].resize(states);
    }

    for (int j = m; j >= 0; --j) {
        const int k_max = j == 0 ? 0 : j - 1;
        for (int k = 0; k <= k_max; ++k) {
            const int items = j - k;
            const double load = r.weight_prefix[j] - r.weight_prefix[k];
            const bool at_capacity = load >= cm.capacity;
            auto& e = r.q[j][k];
            ++r.q_evaluations;
            if (j == m) {
                const double dt = std::max(0.0, horizon - r.time_prefix[m]);
                e.wait = at_capacity ? kInf : cm.alpha * items * dt;
                e.stop = items == 0 ? kInf : cm.fee_curve(load);
            } else {
                const double dt = seq.points[j].inter_arrival;
                // wait keeps the reset index; stop makes j the new reset.
                e.wait = at_capacity ? kInf : cm.alpha * items * dt + v[j + 1][k];
                e.stop = items == 0 ? kInf : cm.fee_curve(load) + v[j + 1][j];
            }
            v[j][k] = std::min(e.wait, e.stop);
        }
    }

    r.optimal_cost = v[0][0];
    if (m > 0) {
        r.optimal_actions.reserve(m + 1);
        int k = 0;
        for (int j = 0; j <= m; ++j) {
            const auto& e = r.q[j][j == 0 ? 0 : k];
            const Action a = e.stop <= e.wait ? Action::stop : Action::wait;
            r.optimal_actions.push_back(a);
            if (a == Action::stop && j < m) k = j;
        }
    }
    return r;
}

namespace {

void enumerate_scripts(const OrderSequence& seq, const CostModel& cm, SystemState s, int step,
                       std::vector<Action>& script, double horizon,
                       std::vector<Action>& best_script, double& best_cost) {
    const int m = static_cast<int>(seq.points.size());
    if (step > m) {
        ScriptedPolicy policy(script);
        SimulateOptions opt;
        opt.tail = TailMode::accrue_to_horizon;
        const double cost = simulate(policy, seq, horizon, cm, opt).breakdown.total_cost;
        if (cost < best_cost) {
            best_cost = cost;
            best_script = script;
        }
        return;
    }
    const ActionMask mask = available_actions(s, cm);
    // stop explored first, so the first minimum found stops earliest.
    for (Action a : {Action::stop, Action::wait}) {
        if (!mask.allows(a)) continue;
        script.push_back(a);
        if (step == m) {
            enumerate_scripts(seq, cm, s, step + 1, script, horizon, best_script, best_cost);
        } else {
            enumerate_scripts(seq, cm, transition(s, seq.points[step], a, cm), step + 1, script,
                              horizon, best_script, best_cost);
        }
        script.pop_back();
    }
}

}  // namespace

std::pair<std::vector<Action>, double> brute_force_hindsight(const OrderSequence& seq,
                                                             double horizon, const CostModel& cm,
                                                             int max_arrivals) {
    const int m = static_cast<int>(seq.points.size());
    if (m > max_arrivals)
        throw std::invalid_argument("brute_force_hindsight: refusing " + std::to_string(m) +
                                    " arrivals (limit " + std::to_string(max_arrivals) + ")");
    std::vector<Action> script, best_script;
    double best_cost = kInf;
    enumerate_scripts(seq, cm, SystemState{}, 0, script, horizon, best_script, best_cost);
    if (m == 0) best_script.clear();  // the lone forced wait carries no information
    return {best_script, best_cost};
}

}  // namespace restop

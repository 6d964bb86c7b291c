#include "restop/simulate.hpp"

#include <cmath>
#include <sstream>

namespace restop {

const char* CostBreakdown::csv_header() {
    return "policy,alpha,total_cost,shipping_cost,delay_cost,shipments,delay_per_order_days";
}

std::string CostBreakdown::csv_row(const std::string& policy, double alpha) const {
    std::ostringstream ss;
    ss.precision(17);
    ss << policy << ',' << alpha << ',' << total_cost << ',' << shipping_cost << ','
       << delay_cost << ',' << shipments << ',' << delay_per_order_days;
    return ss.str();
}

namespace {

struct RunState {
    SystemState s;
    EpisodeStats stats;
    std::vector<double> held_arrivals;
    std::mt19937_64 rng;
    int step = 0;
    int orders = 0;
};

}  // namespace

SimulateResult simulate(StoppingPolicy& policy, const OrderSequence& seq, double horizon,
                        const CostModel& cm, const SimulateOptions& options,
                        const SimSnapshot* resume) {
    if (!(horizon >= 0.0)) throw std::invalid_argument("simulate: horizon must be >= 0");

    RunState run;
    if (resume != nullptr) {
        run.s = resume->state;
        run.stats = resume->stats;
        run.held_arrivals = resume->held_arrivals;
        run.rng = resume->rng;
        run.step = resume->next_step;
        run.orders = resume->orders_seen;
    } else {
        run.rng.seed(options.seed);
        policy.begin_episode(seq, cm);
    }
    const double start_clock = run.s.clock;
    const double end_clock = start_clock + horizon;
    if (seq.total_time() > horizon * (1.0 + 1e-12) + 1e-9)
        throw std::invalid_argument("simulate: arrivals extend past the horizon");

    SimulateResult result;
    auto& bd = result.breakdown;

    auto choose = [&](const SystemState& s, bool& forced) -> Action {
        ActionMask mask = available_actions(s, cm);
        forced = mask.forced();
        if (forced) return mask.forced_action();
        StepContext ctx;
        ctx.step = run.step;
        ctx.clock = s.clock;
        ctx.stats = run.stats;
        ctx.sequence = &seq;
        ctx.cost_model = &cm;
        ctx.rng = &run.rng;
        Action a = policy.decide(s, ctx);
        if (!mask.allows(a))
            throw std::logic_error(std::string("simulate: policy '") + policy.name() +
                                   "' returned a masked action");
        return a;
    };

    // step_cost(s, a, dt) split into its shipping and delay components.
    auto charge = [&](const SystemState& s, Action a, double dt) {
        if (a == Action::wait) {
            bd.delay_days += s.item_count * dt;
        } else {
            bd.shipping_cost += stop_cost(s, cm);
            ++bd.shipments;
            for (double arr : run.held_arrivals) result.per_order_delay_days += s.clock - arr;
            run.held_arrivals.clear();
        }
    };

    for (const auto& p : seq.points) {
        bool forced = false;
        Action a = choose(run.s, forced);
        charge(run.s, a, p.inter_arrival);
        if (options.record_trajectory)
            result.trajectory.push_back({run.step, run.s, a, forced, p.inter_arrival});
        run.s = transition(run.s, p, a, cm);
        run.held_arrivals.push_back(run.s.clock);
        run.stats.observe(p);
        policy.observe(p);
        ++run.step;
        ++run.orders;
    }

    if (options.tail == TailMode::accrue_to_horizon) {
        double dt = std::max(0.0, end_clock - run.s.clock);
        bool forced = false;
        Action a = choose(run.s, forced);
        charge(run.s, a, dt);
        if (options.record_trajectory)
            result.trajectory.push_back({run.step, run.s, a, forced, dt});
        if (a == Action::stop) {
            run.s.load = 0.0;
            run.s.item_count = 0;
            run.s.total_delay = 0.0;
        } else {
            run.s.total_delay += run.s.item_count * dt;
        }
        run.s.clock = end_clock;
        ++run.step;
    }

    const double cutoff = options.tail == TailMode::accrue_to_horizon ? end_clock : run.s.clock;
    for (double arr : run.held_arrivals) result.per_order_delay_days += cutoff - arr;

    bd.delay_cost = cm.alpha * bd.delay_days;
    bd.total_cost = bd.shipping_cost + bd.delay_cost;
    bd.orders = run.orders - (resume != nullptr ? resume->orders_seen : 0);
    bd.delay_per_order_days = bd.orders > 0 ? bd.delay_days / bd.orders : 0.0;

    result.final_state.state = run.s;
    result.final_state.stats = run.stats;
    result.final_state.held_arrivals = std::move(run.held_arrivals);
    result.final_state.rng = run.rng;
    result.final_state.next_step = run.step;
    result.final_state.orders_seen = run.orders;
    return result;
}

double trajectory_cost_from(const SimulateResult& result, const CostModel& cm,
                            double from_clock) {
    double cost = 0.0;
    for (const auto& ts : result.trajectory)
        if (ts.state.clock >= from_clock - 1e-12)
            cost += step_cost(ts.state, ts.action, ts.interval, cm);
    return cost;
}

}  // namespace restop

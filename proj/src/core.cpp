#include "restop/core.hpp"

#include <cmath>
#include <limits>

namespace restop {

const char* to_string(Action a) { return a == Action::wait ? "wait" : "stop"; }

bool operator==(const SystemState& a, const SystemState& b) {
    return a.load == b.load && a.item_count == b.item_count &&
           a.total_delay == b.total_delay && a.clock == b.clock;
}

FeeCurve::FeeCurve(std::vector<std::pair<double, double>> breakpoints)
    : points_(std::move(breakpoints)) {
    if (points_.empty()) throw std::invalid_argument("FeeCurve: needs at least one breakpoint");
    if (points_.front().first != 0.0)
        throw std::invalid_argument("FeeCurve: first breakpoint must be at load 0");
    double prev_slope = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points_.size(); ++i) {
        const auto& [load, fee] = points_[i];
        if (!std::isfinite(load) || !std::isfinite(fee))
            throw std::invalid_argument("FeeCurve: breakpoints must be finite");
        if (fee < 0.0) throw std::invalid_argument("FeeCurve: fees must be nonnegative");
        if (i > 0) {
            const auto& [pload, pfee] = points_[i - 1];
            if (load <= pload)
                throw std::invalid_argument("FeeCurve: breakpoint loads must be increasing");
            if (fee < pfee) throw std::invalid_argument("FeeCurve: fees must be nondecreasing");
            double slope = (fee - pfee) / (load - pload);
            if (slope > prev_slope + 1e-12)
                throw std::invalid_argument("FeeCurve: curve must be concave");
            prev_slope = slope;
        }
    }
}

double FeeCurve::operator()(double load) const {
    if (load <= points_.front().first) return points_.front().second;
    if (load >= points_.back().first) return points_.back().second;
    std::size_t hi = 1;
    while (points_[hi].first < load) ++hi;
    const auto& [l0, f0] = points_[hi - 1];
    const auto& [l1, f1] = points_[hi];
    return f0 + (f1 - f0) * (load - l0) / (l1 - l0);
}

CostModel::CostModel(double alpha_, FeeCurve fee_curve_, double capacity_, int max_items_)
    : alpha(alpha_), fee_curve(std::move(fee_curve_)), capacity(capacity_),
      max_items(max_items_) {
    if (!(alpha >= 0.0)) throw std::invalid_argument("CostModel: alpha must be >= 0");
    if (!(capacity > 0.0)) throw std::invalid_argument("CostModel: capacity must be > 0");
    if (max_items < 1) throw std::invalid_argument("CostModel: max_items must be >= 1");
    if (fee_curve.breakpoints().back().first > capacity)
        throw std::invalid_argument("CostModel: fee curve breakpoints must lie within capacity");
}

Action ActionMask::forced_action() const {
    if (!forced()) throw std::logic_error("ActionMask: no forced action, both allowed");
    return wait_allowed ? Action::wait : Action::stop;
}

ActionMask available_actions(const SystemState& s, const CostModel& cm) {
    ActionMask m;
    if (s.is_regeneration()) m.stop_allowed = false;
    if (s.load >= cm.capacity) m.wait_allowed = false;
    if (!m.wait_allowed && !m.stop_allowed)
        throw std::logic_error("available_actions: state both empty and at capacity");
    return m;
}

static void check_point(const TimedDataPoint& x) {
    if (!(x.weight > 0.0)) throw std::invalid_argument("transition: weight must be > 0");
    if (!(x.inter_arrival >= 0.0))
        throw std::invalid_argument("transition: inter_arrival must be >= 0");
}

SystemState transition(const SystemState& s, const TimedDataPoint& x, Action a,
                       const CostModel& cm) {
    check_point(x);
    if (!available_actions(s, cm).allows(a))
        throw std::invalid_argument(std::string("transition: action '") + to_string(a) +
                                    "' is masked in this state");
    SystemState base = s;
    if (a == Action::stop) {
        base.load = 0.0;
        base.item_count = 0;
        base.total_delay = 0.0;
    }
    SystemState next;
    next.load = base.load + x.weight;
    next.item_count = base.item_count + 1;
    next.total_delay = base.total_delay + base.item_count * x.inter_arrival;
    next.clock = s.clock + x.inter_arrival;
    return next;
}

double wait_cost_rate(const SystemState& s, const CostModel& cm) {
    return cm.alpha * s.item_count;
}

double stop_cost(const SystemState& s, const CostModel& cm) {
    if (s.is_regeneration())
        throw std::invalid_argument("stop_cost: undefined at the regeneration state");
    return cm.fee_curve(s.load);
}

double step_cost(const SystemState& s, Action a, double dt, const CostModel& cm) {
    if (!(dt >= 0.0)) throw std::invalid_argument("step_cost: dt must be >= 0");
    if (a == Action::wait) return wait_cost_rate(s, cm) * dt;
    // After a stop the system sits at s0, whose wait rate is zero, so the
    // dt term vanishes; it is kept explicit to mirror the cost definition.
    return stop_cost(s, cm) + 0.0 * dt;
}

}  // namespace restop

#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "restop/arrival.hpp"
#include "restop/simulate.hpp"

/// Model-based average-cost solver. The long-run average cost nu* is the
/// root of J(nu) = min_pi E[cycle cost - nu * cycle length], evaluated by
/// backward induction over one regeneration cycle on the discretized state
/// space (load bins x item count) and located by bisection.
namespace restop {

/// Tabular stationary policy on the solver grid. Row = item count
/// (0..max_items), column = load bin.
class GridPolicy {
  public:
    GridPolicy() = default;
    GridPolicy(std::vector<double> edges, int max_items);

    int bins() const { return static_cast<int>(edges_.size()) - 1; }
    int max_items() const { return max_items_; }
    const std::vector<double>& edges() const { return edges_; }
    double center(int b) const { return 0.5 * (edges_[b] + edges_[b + 1]); }

    Action at(int bin, int items) const;
    void set(int bin, int items, Action a);

    /// Number of cells labeled stop, optionally restricted to rows >= row_from.
    int stop_count(int row_from = 0) const;
    bool operator==(const GridPolicy& other) const;

    /// Text table: one row per item count, one character per bin, W or S.
    std::string to_table_text() const;
    static GridPolicy from_table_text(const std::string& text);
    /// CSV rows (weight_bin_center, item_count, action).
    void write_heatmap_csv(std::ostream& out) const;

  private:
    std::size_t idx(int bin, int items) const;
    std::vector<double> edges_;
    int max_items_ = 0;
    std::vector<std::uint8_t> actions_;
};

/// One relaxed-stopping evaluation at a fixed cost rate nu.
struct RelaxedDPResult {
    double nu = 0.0;
    double value = 0.0;  // J(nu): optimal E[cycle cost - nu * cycle length]
    GridPolicy policy;
    std::vector<double> values;  // V per grid state, same layout as the policy
    bool waits_at_truncation = false;  // some optimal action waits at items = I-1

    double value_at(int bin, int items) const;
};

/// Optimal relaxed stopping value and policy for penalty rate nu >= 0.
/// Stopping is forced at bin centers >= capacity and at item count
/// max_items; s0 must wait. Ties prefer stop.
RelaxedDPResult relaxed_stopping(double nu, const ArrivalModel& model, const CostModel& cm);

struct SolveOptions {
    /// Absolute tolerance on the bracket width and on |J(nu*)|. Negative
    /// selects the default 1e-6 * (initial upper bracket).
    double tol = -1.0;
    double nu_ceiling = 1e12;  // fail loudly if the bracket exceeds this
    int max_iterations = 500;
};

struct MdpSolution {
    double nu_star = 0.0;
    GridPolicy policy;
    int iterations = 0;                      // DP evaluations spent
    std::pair<double, double> bracket{0, 0}; // final [lo, hi], J(lo) >= 0 > J(hi)
    double residual = 0.0;                   // J(nu_star)
    bool truncation_warning = false;         // item ceiling may bind
};

/// Find nu* with J(nu*) = 0 by bracketing and bisection. Throws if J(0) < 0
/// (costs must be nonnegative) or no sign change is found below the ceiling.
MdpSolution solve(const ArrivalModel& model, const CostModel& cm, const SolveOptions& = {});

/// A stationary rule on the grid; items is already clamped to max_items and
/// the forced cases (s0, capacity, truncation) are applied by the caller.
using GridRule = std::function<Action(int bin, int items)>;

GridRule as_rule(const GridPolicy& policy);
GridRule load_threshold_rule(const ArrivalModel& model, double threshold);
GridRule item_threshold_rule(int threshold);

/// Exact long-run average cost of a rule on the discretized chain: expected
/// cycle cost over expected cycle length, propagated state by state from
/// s0 (the renewal-reward ratio, no simulation).
double exact_average_cost(const GridRule& rule, const ArrivalModel& model, const CostModel& cm);

/// Monte-Carlo long-run average of a rule on the same discretized chain,
/// sampling weights from the model and exponential inter-arrivals with the
/// model mean. Independent forward route used to certify the root.
double simulate_grid_chain(const GridRule& rule, const ArrivalModel& model, const CostModel& cm,
                           long long arrivals, std::uint64_t seed);

/// Cells of the solver grid the discretized chain can occupy at a decision
/// epoch: folds of supported arrivals from the regeneration state, expanded
/// only through cells where waiting is admissible. Indexed [items][bin];
/// row 0 is all false (the first decision happens after the first fold).
/// The rectangular policy table extrapolates beyond these cells into
/// corners (many items, little load) that no trajectory produces.
std::vector<std::vector<bool>> reachable_grid_states(const ArrivalModel& model,
                                                     const CostModel& cm);

struct ControllerConfig {
    std::vector<double> edges;   // estimator/solver grid
    int resolve_every = 1;       // arrivals between re-solves
    int min_observations = 5;    // baseline behavior below this
    bool windowed = false;       // windowed vs full-history estimation
    double lookback = 30.0;      // days, for the windowed estimator
    int window_min_count = 10;   // windowed-estimator fallback threshold
    SolveOptions solve;
};

/// Certainty-equivalence controller: re-estimates the arrival model from
/// observed history and re-solves every resolve_every arrivals; acts by
/// table lookup (nearest bin center, item count clamped). Ships immediately
/// until min_observations arrivals have been seen.
class ModelBasedController final : public StoppingPolicy {
  public:
    ModelBasedController(ControllerConfig config, const CostModel& cm);

    /// Feed an already-observed history (e.g. the training split) without
    /// taking decisions on it.
    void prime(const OrderSequence& history);

    void observe(const TimedDataPoint& x) override;
    Action decide(const SystemState& s, const StepContext& ctx) override;
    const char* name() const override { return "model-based"; }

    int solve_count() const { return solve_count_; }
    bool truncation_warned() const { return truncation_warned_; }
    const std::optional<GridPolicy>& current_policy() const { return policy_; }

  private:
    void maybe_resolve();

    ControllerConfig config_;
    CostModel cm_;
    OrderSequence history_;
    double clock_ = 0.0;
    int since_resolve_ = 0;
    std::optional<GridPolicy> policy_;
    int solve_count_ = 0;
    bool truncation_warned_ = false;
};

}  // namespace restop

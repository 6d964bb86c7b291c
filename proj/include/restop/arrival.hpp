#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "restop/core.hpp"

/// Order-arrival processes: recorded sequences, synthetic generators, and
/// the histogram arrival-model estimator shared with the MDP solver.
namespace restop {

/// One recorded stream of orders for a destination over a time window.
struct OrderSequence {
    std::vector<TimedDataPoint> points;
    double window = 0.0;  // days covered by the record, >= total_time()
    std::string destination_id;
    double max_fee = 0.0;  // full-truck fee of the destination, for features

    double total_time() const;
    /// Absolute arrival time of each point (prefix sums of inter-arrivals).
    std::vector<double> arrival_times() const;
};

/// Bin of `edges` containing w (half-open intervals), clamped into range.
int interval_bin(const std::vector<double>& edges, double w);

/// Bin of `edges` whose center is nearest to w, ties rounded up, clamped.
/// Coincides with interval_bin on uniform grids.
int nearest_center_bin(const std::vector<double>& edges, double w);

/// Discrete arrival model: a weight histogram over a shared bin grid plus
/// the mean inter-arrival time. Weights are represented by bin centers.
struct ArrivalModel {
    std::vector<double> edges;  // bin edges, strictly increasing, size bins+1
    std::vector<double> probs;  // one probability per bin, sums to 1
    double mean_inter_arrival = 0.0;  // days, > 0

    int bins() const { return static_cast<int>(probs.size()); }
    double center(int b) const { return 0.5 * (edges[b] + edges[b + 1]); }

    /// Bin containing w (half-open intervals), clamped into [0, bins-1].
    /// Used when counting observed weights.
    int interval_bin(double w) const;

    /// Bin whose center is nearest to w, ties rounded up, clamped. Used for
    /// control-time load rounding and DP transition re-binning. Coincides
    /// with interval_bin on uniform grids.
    int nearest_center_bin(double w) const;

    void validate() const;

    static std::vector<double> uniform_edges(double capacity, int bins);
};

/// Weight distribution of a synthetic generator.
struct WeightLaw {
    enum class Kind { uniform, lognormal, discrete, mixture };
    Kind kind = Kind::uniform;

    double lo = 0.0, hi = 0.0;      // uniform on [lo, hi]
    double mu = 0.0, sigma = 0.0;   // lognormal: exp(N(mu, sigma^2))
    std::vector<double> values;     // discrete support
    std::vector<double> probs;      // discrete probabilities
    std::vector<WeightLaw> components;       // mixture components
    std::vector<double> component_weights;   // mixture weights, sum to 1

    double sample(std::mt19937_64& rng) const;
    double mean() const;
    void validate() const;

    static WeightLaw make_uniform(double lo, double hi);
    static WeightLaw make_lognormal(double mu, double sigma);
    static WeightLaw make_discrete(std::vector<double> values, std::vector<double> probs);
    static WeightLaw make_mixture(std::vector<WeightLaw> components,
                                  std::vector<double> weights);
};

/// Inter-arrival distribution of a synthetic generator.
struct InterArrivalLaw {
    enum class Kind { exponential, deterministic, gamma };
    Kind kind = Kind::exponential;

    double rate = 0.0;   // exponential: arrivals per day
    double value = 0.0;  // deterministic spacing, days
    double shape = 0.0, scale = 0.0;  // gamma

    double sample(std::mt19937_64& rng) const;
    double mean() const;
    void validate() const;

    static InterArrivalLaw make_exponential(double rate);
    static InterArrivalLaw make_deterministic(double value);
    static InterArrivalLaw make_gamma(double shape, double scale);
};

/// A regime change: from switch_time onward, draws come from the new laws.
struct RegimeSwitch {
    double switch_time = 0.0;
    WeightLaw weights;
    InterArrivalLaw inter_arrival;
};

/// Full description of a synthetic arrival process, optionally
/// non-stationary through a schedule of regime switches.
struct GeneratorSpec {
    WeightLaw weights;
    InterArrivalLaw inter_arrival;
    std::vector<RegimeSwitch> regimes;  // strictly increasing switch times

    void validate() const;
    /// Laws in force at absolute time t.
    std::pair<const WeightLaw*, const InterArrivalLaw*> active_at(double t) const;
};

/// Draw a sequence over [0, window]: points are drawn until the running
/// time would exceed the window; that overshooting point is omitted.
/// Deterministic given the seed. destination_id/max_fee are left empty.
OrderSequence generate(const GeneratorSpec& spec, double window, std::uint64_t seed);

/// Histogram estimate over the given bin edges, pooled across sequences.
/// Weights above the top edge are clamped into the top bin. Throws if no
/// arrivals are present.
ArrivalModel estimate(const std::vector<OrderSequence>& sequences,
                      const std::vector<double>& edges);

/// Estimate from the arrivals of `seq` with arrival time in
/// [now - lookback, now]. Falls back to the full-history estimate when
/// fewer than min_count arrivals fall inside the window.
ArrivalModel windowed_estimate(const OrderSequence& seq, double now, double lookback,
                               const std::vector<double>& edges, int min_count = 10);

/// Line-oriented text serialization of sequence sets. Round-trips exactly.
void save_sequences(std::ostream& out, const std::vector<OrderSequence>& sequences);
void save_sequences_file(const std::string& path, const std::vector<OrderSequence>& sequences);
std::vector<OrderSequence> load_sequences(std::istream& in);
std::vector<OrderSequence> load_sequences_file(const std::string& path);

}  // namespace restop

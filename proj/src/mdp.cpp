#include "restop/mdp.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <sstream>

namespace restop {

// ─── GridPolicy ──────────────────────────────────────────────────────────

GridPolicy::GridPolicy(std::vector<double> edges, int max_items)
    : edges_(std::move(edges)), max_items_(max_items) {
    if (edges_.size() < 2) throw std::invalid_argument("GridPolicy: need at least one bin");
    if (max_items_ < 1) throw std::invalid_argument("GridPolicy: max_items must be >= 1");
    actions_.assign(static_cast<std::size_t>(max_items_ + 1) * (edges_.size() - 1),
                    static_cast<std::uint8_t>(Action::wait));
}

std::size_t GridPolicy::idx(int bin, int items) const {
    if (bin < 0 || bin >= bins() || items < 0 || items > max_items_)
        throw std::out_of_range("GridPolicy: cell (" + std::to_string(bin) + ", " +
                                std::to_string(items) + ") out of range");
    return static_cast<std::size_t>(items) * bins() + bin;
}

Action GridPolicy::at(int bin, int items) const {
    return static_cast<Action>(actions_[idx(bin, items)]);
}

void GridPolicy::set(int bin, int items, Action a) {
    actions_[idx(bin, items)] = static_cast<std::uint8_t>(a);
}

int GridPolicy::stop_count(int row_from) const {
    int n = 0;
    for (int i = row_from; i <= max_items_; ++i)
        for (int b = 0; b < bins(); ++b)
            if (at(b, i) == Action::stop) ++n;
    return n;
}

bool GridPolicy::operator==(const GridPolicy& other) const {
    return edges_ == other.edges_ && max_items_ == other.max_items_ &&
           actions_ == other.actions_;
}

static std::string fmt(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string GridPolicy::to_table_text() const {
    std::ostringstream ss;
    ss << "#restop grid-policy v1\n";
    ss << "bins " << bins() << " max_items " << max_items_ << "\n";
    ss << "edges";
    for (double e : edges_) ss << ' ' << fmt(e);
    ss << "\n";
    for (int i = 0; i <= max_items_; ++i) {
        ss << "row " << i << ": ";
        for (int b = 0; b < bins(); ++b) ss << (at(b, i) == Action::stop ? 'S' : 'W');
        ss << "\n";
    }
    return ss.str();
}

GridPolicy GridPolicy::from_table_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "#restop grid-policy v1")
        throw std::runtime_error("GridPolicy: bad or missing format header");
    std::string kw1, kw2;
    int bins = 0, max_items = 0;
    in >> kw1 >> bins >> kw2 >> max_items;
    if (kw1 != "bins" || kw2 != "max_items" || bins < 1 || max_items < 1)
        throw std::runtime_error("GridPolicy: bad dimensions line");
    in >> kw1;
    if (kw1 != "edges") throw std::runtime_error("GridPolicy: missing edges");
    std::vector<double> edges(static_cast<std::size_t>(bins) + 1);
    for (double& e : edges)
        if (!(in >> e)) throw std::runtime_error("GridPolicy: truncated edges");
    GridPolicy gp(std::move(edges), max_items);
    for (int i = 0; i <= max_items; ++i) {
        std::string row_kw, idx_tok, cells;
        if (!(in >> row_kw >> idx_tok >> cells) || row_kw != "row")
            throw std::runtime_error("GridPolicy: truncated at row " + std::to_string(i));
        if (cells.size() != static_cast<std::size_t>(bins))
            throw std::runtime_error("GridPolicy: row " + std::to_string(i) + " has wrong width");
        for (int b = 0; b < bins; ++b) {
            if (cells[b] != 'W' && cells[b] != 'S')
                throw std::runtime_error("GridPolicy: bad cell character");
            gp.set(b, i, cells[b] == 'S' ? Action::stop : Action::wait);
        }
    }
    return gp;
}

void GridPolicy::write_heatmap_csv(std::ostream& out) const {
    out << "weight_bin_center,item_count,action\n";
    for (int i = 0; i <= max_items_; ++i)
        for (int b = 0; b < bins(); ++b)
            out << fmt(center(b)) << ',' << i << ',' << to_string(at(b, i)) << "\n";
}

double RelaxedDPResult::value_at(int bin, int items) const {
    return values[static_cast<std::size_t>(items) * policy.bins() + bin];
}

// ─── Relaxed stopping DP ─────────────────────────────────────────────────

namespace {

/// Transition table and support of the weight distribution, shared by the
/// DP, the exact ratio evaluator and the chain sampler.
struct ChainModel {
    int items = 0;
    double etau = 0.0;
    std::vector<int> support;           // weight bins with positive probability
    std::vector<double> support_prob;
    std::vector<double> center;
    std::vector<double> fee;            // fee at each bin center
    std::vector<bool> at_capacity;      // bin center >= capacity
    std::vector<std::vector<int>> next; // next[b][k] for support index k

    ChainModel(const ArrivalModel& model, const CostModel& cm) {
        model.validate();
        const int B = model.bins();
        items = cm.max_items;
        etau = model.mean_inter_arrival;
        center.resize(B);
        fee.resize(B);
        at_capacity.resize(B);
        for (int b = 0; b < B; ++b) {
            center[b] = model.center(b);
            fee[b] = cm.fee_curve(center[b]);
            at_capacity[b] = center[b] >= cm.capacity;
        }
        for (int w = 0; w < B; ++w)
            if (model.probs[w] > 0.0) {
                support.push_back(w);
                support_prob.push_back(model.probs[w]);
            }
        next.assign(B, std::vector<int>(support.size()));
        for (int b = 0; b < B; ++b)
            for (std::size_t k = 0; k < support.size(); ++k)
                next[b][k] = model.nearest_center_bin(center[b] + center[support[k]]);
    }
    int bins() const { return static_cast<int>(center.size()); }
};

}  // namespace

RelaxedDPResult relaxed_stopping(double nu, const ArrivalModel& model, const CostModel& cm) {
    if (!(nu >= 0.0)) throw std::invalid_argument("relaxed_stopping: nu must be >= 0");
    ChainModel chain(model, cm);
    const int B = chain.bins();
    const int I = chain.items;
    const double etau = chain.etau;

    RelaxedDPResult result;
    result.nu = nu;
    result.policy = GridPolicy(model.edges, I);
    result.values.assign(static_cast<std::size_t>(I + 1) * B, 0.0);
    auto value = [&](int b, int i) -> double& {
        return result.values[static_cast<std::size_t>(i) * B + b];
    };

    for (int b = 0; b < B; ++b) {
        value(b, I) = chain.fee[b];
        result.policy.set(b, I, Action::stop);
    }
    for (int i = I - 1; i >= 1; --i) {
        const double wait_base = (cm.alpha * i - nu) * etau;
        for (int b = 0; b < B; ++b) {
            if (chain.at_capacity[b]) {
                value(b, i) = chain.fee[b];
                result.policy.set(b, i, Action::stop);
                continue;
            }
            double cont = 0.0;
            const auto& nb = chain.next[b];
            for (std::size_t k = 0; k < chain.support.size(); ++k)
                cont += chain.support_prob[k] * value(nb[k], i + 1);
            const double wait_v = wait_base + cont;
            const double stop_v = chain.fee[b];
            if (wait_v < stop_v) {
                value(b, i) = wait_v;
                result.policy.set(b, i, Action::wait);
                if (i == I - 1) result.waits_at_truncation = true;
            } else {
                value(b, i) = stop_v;
                result.policy.set(b, i, Action::stop);
            }
        }
    }
    // Row 0 holds only the regeneration state in practice; waiting is forced
    // there, and cells at capacity keep the forced-stop labeling.
    for (int b = 0; b < B; ++b) {
        if (chain.at_capacity[b]) {
            value(b, 0) = chain.fee[b];
            result.policy.set(b, 0, Action::stop);
            continue;
        }
        double cont = 0.0;
        const auto& nb = chain.next[b];
        for (std::size_t k = 0; k < chain.support.size(); ++k)
            cont += chain.support_prob[k] * value(nb[k], 0 + 1);
        value(b, 0) = -nu * etau + cont;
        result.policy.set(b, 0, Action::wait);
    }

    // J(nu): forced wait at s0, whose load is exactly 0, so the arrival
    // lands in its own weight bin without re-binning.
    double cont = 0.0;
    for (std::size_t k = 0; k < chain.support.size(); ++k)
        cont += chain.support_prob[k] * value(chain.support[k], 1);
    result.value = -nu * etau + cont;
    return result;
}

// ─── Root finding ────────────────────────────────────────────────────────

MdpSolution solve(const ArrivalModel& model, const CostModel& cm, const SolveOptions& options) {
    int evals = 0;
    bool truncation = false;
    auto eval = [&](double nu) {
        RelaxedDPResult r = relaxed_stopping(nu, model, cm);
        ++evals;
        truncation |= r.waits_at_truncation;
        return r;
    };

    RelaxedDPResult at_zero = eval(0.0);
    const double scale = std::max(1.0, std::abs(at_zero.value));
    if (at_zero.value < -1e-9 * scale)
        throw std::runtime_error("solve: J(0) < 0; cycle costs must be nonnegative");
    if (at_zero.value <= 0.0) {
        MdpSolution sol;
        sol.nu_star = 0.0;
        sol.policy = at_zero.policy;
        sol.iterations = evals;
        sol.bracket = {0.0, 0.0};
        sol.residual = at_zero.value;
        sol.truncation_warning = truncation;
        return sol;
    }

    // The ship-immediately cycle gives E[fee]/E[tau], an upper bound on
    // nu*, so J there is already <= 0; keep doubling in case of FP slack.
    double mean_fee = 0.0;
    for (int b = 0; b < model.bins(); ++b)
        mean_fee += model.probs[b] * cm.fee_curve(model.center(b));
    const double hi_initial = std::max(mean_fee / model.mean_inter_arrival,
                                       at_zero.value / model.mean_inter_arrival);
    const double tol = options.tol > 0.0 ? options.tol : 1e-6 * hi_initial;

    double hi = hi_initial;
    RelaxedDPResult at_hi = eval(hi);
    while (at_hi.value >= 0.0) {
        hi *= 2.0;
        if (hi > options.nu_ceiling)
            throw std::runtime_error("solve: no sign change below the nu ceiling " +
                                     std::to_string(options.nu_ceiling));
        at_hi = eval(hi);
    }

    double lo = 0.0;
    double mid = 0.5 * (lo + hi);
    RelaxedDPResult at_mid = eval(mid);
    while ((hi - lo > tol || std::abs(at_mid.value) > tol) && evals < options.max_iterations) {
        if (at_mid.value < 0.0)
            hi = mid;
        else
            lo = mid;
        mid = 0.5 * (lo + hi);
        at_mid = eval(mid);
    }

    MdpSolution sol;
    sol.nu_star = mid;
    sol.policy = at_mid.policy;
    sol.iterations = evals;
    sol.bracket = {lo, hi};
    sol.residual = at_mid.value;
    sol.truncation_warning = truncation;
    return sol;
}

// ─── Policy evaluation on the chain ──────────────────────────────────────

GridRule as_rule(const GridPolicy& policy) {
    return [&policy](int bin, int items) { return policy.at(bin, items); };
}

GridRule load_threshold_rule(const ArrivalModel& model, double threshold) {
    return [&model, threshold](int bin, int) {
        return model.center(bin) >= threshold ? Action::stop : Action::wait;
    };
}

GridRule item_threshold_rule(int threshold) {
    return [threshold](int, int items) {
        return items >= threshold ? Action::stop : Action::wait;
    };
}

double exact_average_cost(const GridRule& rule, const ArrivalModel& model, const CostModel& cm) {
    ChainModel chain(model, cm);
    const int B = chain.bins();
    const int I = chain.items;

    // Forward propagation of reach probabilities over one cycle; the s0
    // wait contributes one expected inter-arrival to the cycle length.
    std::vector<double> dist(B, 0.0), next_dist(B, 0.0);
    for (std::size_t k = 0; k < chain.support.size(); ++k)
        dist[chain.support[k]] += chain.support_prob[k];
    double cost = 0.0;
    double length = chain.etau;
    for (int i = 1; i <= I; ++i) {
        std::fill(next_dist.begin(), next_dist.end(), 0.0);
        bool any = false;
        for (int b = 0; b < B; ++b) {
            const double p = dist[b];
            if (p == 0.0) continue;
            const bool forced = chain.at_capacity[b] || i == I;
            const Action a = forced ? Action::stop : rule(b, i);
            if (a == Action::stop) {
                cost += p * chain.fee[b];
                continue;
            }
            cost += p * cm.alpha * i * chain.etau;
            length += p * chain.etau;
            const auto& nb = chain.next[b];
            for (std::size_t k = 0; k < chain.support.size(); ++k) {
                next_dist[nb[k]] += p * chain.support_prob[k];
                any = true;
            }
        }
        dist.swap(next_dist);
        if (!any) break;
    }
    return cost / length;
}

double simulate_grid_chain(const GridRule& rule, const ArrivalModel& model, const CostModel& cm,
                           long long arrivals, std::uint64_t seed) {
    ChainModel chain(model, cm);
    const int I = chain.items;
    std::mt19937_64 rng(seed);
    auto uniform = [&rng]() {
        return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    };
    // Manual inversion keeps the draws implementation-independent.
    auto draw_weight_bin = [&]() {
        double u = uniform();
        double acc = 0.0;
        for (std::size_t k = 0; k < chain.support.size(); ++k) {
            acc += chain.support_prob[k];
            if (u <= acc) return static_cast<int>(k);
        }
        return static_cast<int>(chain.support.size()) - 1;
    };

    double cost = 0.0, time = 0.0;
    int bin = -1, items = 0;  // items == 0 encodes s0
    for (long long n = 0; n < arrivals; ++n) {
        const double tau = -chain.etau * std::log(1.0 - uniform());
        time += tau;
        cost += cm.alpha * items * tau;
        const int k = draw_weight_bin();
        bin = items == 0 ? chain.support[k] : chain.next[bin][k];
        ++items;
        const bool forced = chain.at_capacity[bin] || items >= I;
        const Action a = forced ? Action::stop : rule(bin, items);
        if (a == Action::stop) {
            cost += chain.fee[bin];
            bin = -1;
            items = 0;
        }
    }
    return cost / time;
}

std::vector<std::vector<bool>> reachable_grid_states(const ArrivalModel& model,
                                                     const CostModel& cm) {
    ChainModel chain(model, cm);
    std::vector<std::vector<bool>> reach(static_cast<std::size_t>(chain.items) + 1,
                                         std::vector<bool>(chain.bins(), false));
    std::vector<int> frontier;
    for (int b : chain.support)
        if (!reach[1][static_cast<std::size_t>(b)]) {
            reach[1][static_cast<std::size_t>(b)] = true;
            frontier.push_back(b);
        }
    for (int n = 1; n < chain.items; ++n) {
        std::vector<int> grown;
        for (int b : frontier) {
            if (chain.at_capacity[static_cast<std::size_t>(b)]) continue;  // stop is forced
            for (std::size_t k = 0; k < chain.support.size(); ++k) {
                const int nb = chain.next[static_cast<std::size_t>(b)][k];
                auto cell = reach[static_cast<std::size_t>(n) + 1].begin() + nb;
                if (!*cell) {
                    *cell = true;
                    grown.push_back(nb);
                }
            }
        }
        frontier = std::move(grown);
    }
    return reach;
}

// ─── Certainty-equivalence controller ────────────────────────────────────

ModelBasedController::ModelBasedController(ControllerConfig config, const CostModel& cm)
    : config_(std::move(config)), cm_(cm) {
    if (config_.edges.size() < 2)
        throw std::invalid_argument("ModelBasedController: estimator grid required");
    if (config_.resolve_every < 1)
        throw std::invalid_argument("ModelBasedController: resolve_every must be >= 1");
    history_.destination_id = "controller-history";
}

void ModelBasedController::prime(const OrderSequence& history) {
    for (const auto& p : history.points) {
        history_.points.push_back(p);
        clock_ += p.inter_arrival;
    }
    history_.window = clock_;
    since_resolve_ = config_.resolve_every;  // re-solve at the first chance
    if (static_cast<int>(history_.points.size()) >= config_.min_observations) {
        maybe_resolve();
    }
}

void ModelBasedController::observe(const TimedDataPoint& x) {
    history_.points.push_back(x);
    clock_ += x.inter_arrival;
    history_.window = clock_;
    ++since_resolve_;
    if (static_cast<int>(history_.points.size()) >= config_.min_observations &&
        (!policy_.has_value() || since_resolve_ >= config_.resolve_every))
        maybe_resolve();
}

void ModelBasedController::maybe_resolve() {
    ArrivalModel model =
        config_.windowed
            ? windowed_estimate(history_, clock_, config_.lookback, config_.edges,
                                config_.window_min_count)
            : estimate({history_}, config_.edges);
    MdpSolution sol = solve(model, cm_, config_.solve);
    policy_ = std::move(sol.policy);
    truncation_warned_ = truncation_warned_ || sol.truncation_warning;
    ++solve_count_;
    since_resolve_ = 0;
}

Action ModelBasedController::decide(const SystemState& s, const StepContext&) {
    if (!policy_.has_value()) return Action::stop;  // ship-immediately until informed
    const int bin = nearest_center_bin(config_.edges, s.load);
    const int items = std::min(s.item_count, policy_->max_items());
    return policy_->at(bin, items);
}

}  // namespace restop

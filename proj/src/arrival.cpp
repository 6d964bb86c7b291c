#include "restop/arrival.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace restop {

double OrderSequence::total_time() const {
    double t = 0.0;
    for (const auto& p : points) t += p.inter_arrival;
    return t;
}

std::vector<double> OrderSequence::arrival_times() const {
    std::vector<double> out;
    out.reserve(points.size());
    double t = 0.0;
    for (const auto& p : points) {
        t += p.inter_arrival;
        out.push_back(t);
    }
    return out;
}

// ─── ArrivalModel ────────────────────────────────────────────────────────

void ArrivalModel::validate() const {
    if (edges.size() < 2) throw std::invalid_argument("ArrivalModel: need at least one bin");
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (!(edges[i] > edges[i - 1]))
            throw std::invalid_argument("ArrivalModel: edges must be strictly increasing");
    if (edges.front() < 0.0)
        throw std::invalid_argument("ArrivalModel: edges must be nonnegative");
    if (probs.size() + 1 != edges.size())
        throw std::invalid_argument("ArrivalModel: probs/edges size mismatch");
    double total = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0)) throw std::invalid_argument("ArrivalModel: negative probability");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw std::invalid_argument("ArrivalModel: probabilities must sum to 1");
    if (!(mean_inter_arrival > 0.0))
        throw std::invalid_argument("ArrivalModel: mean inter-arrival must be > 0");
}

int interval_bin(const std::vector<double>& edges, double w) {
    auto it = std::upper_bound(edges.begin(), edges.end(), w);
    int idx = static_cast<int>(it - edges.begin()) - 1;
    return std::clamp(idx, 0, static_cast<int>(edges.size()) - 2);
}

int nearest_center_bin(const std::vector<double>& edges, double w) {
    const int bins = static_cast<int>(edges.size()) - 1;
    auto center = [&](int b) { return 0.5 * (edges[b] + edges[b + 1]); };
    int b = interval_bin(edges, w);
    // A neighbor's center can be closer when bin widths differ. Ties round
    // up so uniform grids agree with interval binning.
    int best = b;
    double best_d = std::abs(w - center(b));
    for (int nb : {b - 1, b + 1}) {
        if (nb < 0 || nb >= bins) continue;
        double d = std::abs(w - center(nb));
        if (d < best_d || (d == best_d && nb > best)) {
            best = nb;
            best_d = d;
        }
    }
    return best;
}

int ArrivalModel::interval_bin(double w) const { return restop::interval_bin(edges, w); }

int ArrivalModel::nearest_center_bin(double w) const {
    return restop::nearest_center_bin(edges, w);
}

std::vector<double> ArrivalModel::uniform_edges(double capacity, int bins) {
    if (!(capacity > 0.0) || bins < 1)
        throw std::invalid_argument("uniform_edges: capacity must be > 0 and bins >= 1");
    std::vector<double> e(bins + 1);
    for (int i = 0; i <= bins; ++i) e[i] = capacity * i / bins;
    return e;
}

// ─── Generator laws ──────────────────────────────────────────────────────

WeightLaw WeightLaw::make_uniform(double lo, double hi) {
    WeightLaw w;
    w.kind = Kind::uniform;
    w.lo = lo;
    w.hi = hi;
    w.validate();
    return w;
}

WeightLaw WeightLaw::make_lognormal(double mu, double sigma) {
    WeightLaw w;
    w.kind = Kind::lognormal;
    w.mu = mu;
    w.sigma = sigma;
    w.validate();
    return w;
}

WeightLaw WeightLaw::make_discrete(std::vector<double> values, std::vector<double> probs) {
    WeightLaw w;
    w.kind = Kind::discrete;
    w.values = std::move(values);
    w.probs = std::move(probs);
    w.validate();
    return w;
}

WeightLaw WeightLaw::make_mixture(std::vector<WeightLaw> components,
                                  std::vector<double> weights) {
    WeightLaw w;
    w.kind = Kind::mixture;
    w.components = std::move(components);
    w.component_weights = std::move(weights);
    w.validate();
    return w;
}

void WeightLaw::validate() const {
    switch (kind) {
        case Kind::uniform:
            if (!(lo > 0.0) || !(hi >= lo))
                throw std::invalid_argument("WeightLaw(uniform): need 0 < lo <= hi");
            break;
        case Kind::lognormal:
            if (!(sigma >= 0.0) || !std::isfinite(mu))
                throw std::invalid_argument("WeightLaw(lognormal): bad parameters");
            break;
        case Kind::discrete: {
            if (values.empty() || values.size() != probs.size())
                throw std::invalid_argument("WeightLaw(discrete): values/probs mismatch");
            double total = 0.0;
            for (double v : values)
                if (!(v > 0.0)) throw std::invalid_argument("WeightLaw(discrete): values must be > 0");
            for (double p : probs) {
                if (!(p >= 0.0)) throw std::invalid_argument("WeightLaw(discrete): negative prob");
                total += p;
            }
            if (std::abs(total - 1.0) > 1e-12)
                throw std::invalid_argument("WeightLaw(discrete): probs must sum to 1");
            break;
        }
        case Kind::mixture: {
            if (components.empty() || components.size() != component_weights.size())
                throw std::invalid_argument("WeightLaw(mixture): components/weights mismatch");
            double total = 0.0;
            for (const auto& c : components) {
                if (c.kind == Kind::mixture)
                    throw std::invalid_argument("WeightLaw(mixture): no nested mixtures");
                c.validate();
            }
            for (double p : component_weights) {
                if (!(p >= 0.0)) throw std::invalid_argument("WeightLaw(mixture): negative weight");
                total += p;
            }
            if (std::abs(total - 1.0) > 1e-12)
                throw std::invalid_argument("WeightLaw(mixture): weights must sum to 1");
            break;
        }
    }
}

double WeightLaw::sample(std::mt19937_64& rng) const {
    switch (kind) {
        case Kind::uniform:
            return std::uniform_real_distribution<double>(lo, hi)(rng);
        case Kind::lognormal:
            return std::exp(std::normal_distribution<double>(mu, sigma)(rng));
        case Kind::discrete: {
            double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
            double acc = 0.0;
            for (std::size_t i = 0; i < values.size(); ++i) {
                acc += probs[i];
                if (u <= acc) return values[i];
            }
            return values.back();
        }
        case Kind::mixture: {
            double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
            double acc = 0.0;
            for (std::size_t i = 0; i < components.size(); ++i) {
                acc += component_weights[i];
                if (u <= acc) return components[i].sample(rng);
            }
            return components.back().sample(rng);
        }
    }
    throw std::logic_error("WeightLaw: unknown kind");
}

double WeightLaw::mean() const {
    switch (kind) {
        case Kind::uniform:
            return 0.5 * (lo + hi);
        case Kind::lognormal:
            return std::exp(mu + 0.5 * sigma * sigma);
        case Kind::discrete: {
            double m = 0.0;
            for (std::size_t i = 0; i < values.size(); ++i) m += values[i] * probs[i];
            return m;
        }
        case Kind::mixture: {
            double m = 0.0;
            for (std::size_t i = 0; i < components.size(); ++i)
                m += component_weights[i] * components[i].mean();
            return m;
        }
    }
    throw std::logic_error("WeightLaw: unknown kind");
}

InterArrivalLaw InterArrivalLaw::make_exponential(double rate) {
    InterArrivalLaw l;
    l.kind = Kind::exponential;
    l.rate = rate;
    l.validate();
    return l;
}

InterArrivalLaw InterArrivalLaw::make_deterministic(double value) {
    InterArrivalLaw l;
    l.kind = Kind::deterministic;
    l.value = value;
    l.validate();
    return l;
}

InterArrivalLaw InterArrivalLaw::make_gamma(double shape, double scale) {
    InterArrivalLaw l;
    l.kind = Kind::gamma;
    l.shape = shape;
    l.scale = scale;
    l.validate();
    return l;
}

void InterArrivalLaw::validate() const {
    switch (kind) {
        case Kind::exponential:
            if (!(rate > 0.0)) throw std::invalid_argument("InterArrivalLaw: rate must be > 0");
            break;
        case Kind::deterministic:
            if (!(value > 0.0)) throw std::invalid_argument("InterArrivalLaw: value must be > 0");
            break;
        case Kind::gamma:
            if (!(shape > 0.0) || !(scale > 0.0))
                throw std::invalid_argument("InterArrivalLaw: shape/scale must be > 0");
            break;
    }
}

double InterArrivalLaw::sample(std::mt19937_64& rng) const {
    switch (kind) {
        case Kind::exponential:
            return std::exponential_distribution<double>(rate)(rng);
        case Kind::deterministic:
            return value;
        case Kind::gamma:
            return std::gamma_distribution<double>(shape, scale)(rng);
    }
    throw std::logic_error("InterArrivalLaw: unknown kind");
}

double InterArrivalLaw::mean() const {
    switch (kind) {
        case Kind::exponential:
            return 1.0 / rate;
        case Kind::deterministic:
            return value;
        case Kind::gamma:
            return shape * scale;
    }
    throw std::logic_error("InterArrivalLaw: unknown kind");
}

void GeneratorSpec::validate() const {
    weights.validate();
    inter_arrival.validate();
    double prev = -1.0;
    for (const auto& r : regimes) {
        if (!(r.switch_time > 0.0) || r.switch_time <= prev)
            throw std::invalid_argument("GeneratorSpec: switch times must be increasing and > 0");
        r.weights.validate();
        r.inter_arrival.validate();
        prev = r.switch_time;
    }
}

std::pair<const WeightLaw*, const InterArrivalLaw*> GeneratorSpec::active_at(double t) const {
    const WeightLaw* w = &weights;
    const InterArrivalLaw* ia = &inter_arrival;
    for (const auto& r : regimes) {
        if (t >= r.switch_time) {
            w = &r.weights;
            ia = &r.inter_arrival;
        }
    }
    return {w, ia};
}

OrderSequence generate(const GeneratorSpec& spec, double window, std::uint64_t seed) {
    spec.validate();
    if (!(window >= 0.0)) throw std::invalid_argument("generate: window must be >= 0");
    std::mt19937_64 rng(seed);
    OrderSequence seq;
    seq.window = window;
    double t = 0.0;
    for (;;) {
        auto [w, ia] = spec.active_at(t);
        double tau = ia->sample(rng);
        double x = w->sample(rng);
        if (t + tau > window) break;
        t += tau;
        seq.points.push_back({x, tau});
    }
    return seq;
}

// ─── Estimation ──────────────────────────────────────────────────────────

static ArrivalModel estimate_from_points(const std::vector<const TimedDataPoint*>& pts,
                                         const std::vector<double>& edges) {
    if (pts.empty()) throw std::invalid_argument("estimate: no arrivals to estimate from");
    ArrivalModel model;
    model.edges = edges;
    model.probs.assign(edges.size() - 1, 0.0);
    model.mean_inter_arrival = 1.0;  // placeholder so interval_bin is usable
    double sum_tau = 0.0;
    for (const TimedDataPoint* p : pts) {
        model.probs[model.interval_bin(p->weight)] += 1.0;
        sum_tau += p->inter_arrival;
    }
    for (double& c : model.probs) c /= static_cast<double>(pts.size());
    model.mean_inter_arrival = sum_tau / static_cast<double>(pts.size());
    model.validate();
    return model;
}

ArrivalModel estimate(const std::vector<OrderSequence>& sequences,
                      const std::vector<double>& edges) {
    std::vector<const TimedDataPoint*> pts;
    for (const auto& s : sequences)
        for (const auto& p : s.points) pts.push_back(&p);
    return estimate_from_points(pts, edges);
}

ArrivalModel windowed_estimate(const OrderSequence& seq, double now, double lookback,
                               const std::vector<double>& edges, int min_count) {
    if (!(lookback > 0.0)) throw std::invalid_argument("windowed_estimate: lookback must be > 0");
    std::vector<const TimedDataPoint*> pts;
    double t = 0.0;
    for (const auto& p : seq.points) {
        t += p.inter_arrival;
        if (t >= now - lookback && t <= now) pts.push_back(&p);
    }
    if (static_cast<int>(pts.size()) < min_count) return estimate({seq}, edges);
    return estimate_from_points(pts, edges);
}

// ─── Text serialization ──────────────────────────────────────────────────

static std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

static double parse_double(const std::string& tok, int line, const char* what) {
    double v = 0.0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        throw std::runtime_error("load_sequences: line " + std::to_string(line) + ": bad " +
                                 what + " '" + tok + "'");
    return v;
}

void save_sequences(std::ostream& out, const std::vector<OrderSequence>& sequences) {
    out << "#restop sequences v1\n";
    for (const auto& s : sequences) {
        out << "@sequence dest=" << s.destination_id << " window=" << format_double(s.window)
            << " max_fee=" << format_double(s.max_fee) << "\n";
        for (const auto& p : s.points)
            out << format_double(p.inter_arrival) << " " << format_double(p.weight) << "\n";
    }
}

void save_sequences_file(const std::string& path, const std::vector<OrderSequence>& sequences) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_sequences: cannot open " + path);
    save_sequences(out, sequences);
}

std::vector<OrderSequence> load_sequences(std::istream& in) {
    std::vector<OrderSequence> out;
    std::string line;
    int lineno = 0;
    auto fail = [&](const std::string& msg) {
        throw std::runtime_error("load_sequences: line " + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("@sequence", 0) == 0) {
            OrderSequence seq;
            std::istringstream ss(line);
            std::string tok;
            ss >> tok;  // @sequence
            while (ss >> tok) {
                auto eq = tok.find('=');
                if (eq == std::string::npos) fail("bad header field '" + tok + "'");
                std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
                if (key == "dest")
                    seq.destination_id = val;
                else if (key == "window")
                    seq.window = parse_double(val, lineno, "window");
                else if (key == "max_fee")
                    seq.max_fee = parse_double(val, lineno, "max_fee");
                else
                    fail("unknown header field '" + key + "'");
            }
            if (!(seq.window >= 0.0)) fail("window must be >= 0");
            out.push_back(std::move(seq));
            continue;
        }
        if (out.empty()) fail("arrival record before any @sequence header");
        std::istringstream ss(line);
        std::string tau_tok, w_tok, extra;
        if (!(ss >> tau_tok >> w_tok)) fail("expected '<inter_arrival> <weight>'");
        if (ss >> extra) fail("trailing tokens after weight");
        TimedDataPoint p;
        p.inter_arrival = parse_double(tau_tok, lineno, "inter_arrival");
        p.weight = parse_double(w_tok, lineno, "weight");
        if (!(p.inter_arrival >= 0.0)) fail("inter_arrival must be >= 0");
        if (!(p.weight > 0.0)) fail("weight must be > 0");
        out.back().points.push_back(p);
    }
    for (auto& s : out)
        if (s.total_time() > s.window * (1.0 + 1e-12) + 1e-9)
            throw std::runtime_error("load_sequences: sequence '" + s.destination_id +
                                     "' arrivals exceed its window");
    return out;
}

std::vector<OrderSequence> load_sequences_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_sequences: cannot open " + path);
    return load_sequences(in);
}

}  // namespace restop

#include "restop/bench.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "restop/hindsight.hpp"

namespace restop {

using nlohmann::json;

// ─── Seed derivation ─────────────────────────────────────────────────────

/// splitmix64 finalizer over a combined stream id; keeps every stage's
/// randomness independent of the others while staying reproducible.
static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t x = a + 0x9E3779B97F4A7C15ULL * (b + 1);
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

static std::uint64_t mix_alpha(std::uint64_t seed, std::uint64_t tag, double alpha) {
    return mix(mix(seed, tag), std::bit_cast<std::uint64_t>(alpha));
}

// ─── Config serialization ────────────────────────────────────────────────

static json weight_law_json(const WeightLaw& w) {
    json j;
    switch (w.kind) {
        case WeightLaw::Kind::uniform:
            j["kind"] = "uniform";
            j["lo"] = w.lo;
            j["hi"] = w.hi;
            break;
        case WeightLaw::Kind::lognormal:
            j["kind"] = "lognormal";
            j["mu"] = w.mu;
            j["sigma"] = w.sigma;
            break;
        case WeightLaw::Kind::discrete:
            j["kind"] = "discrete";
            j["values"] = w.values;
            j["probs"] = w.probs;
            break;
        case WeightLaw::Kind::mixture: {
            j["kind"] = "mixture";
            json comps = json::array();
            for (const auto& c : w.components) comps.push_back(weight_law_json(c));
            j["components"] = std::move(comps);
            j["weights"] = w.component_weights;
            break;
        }
    }
    return j;
}

static WeightLaw weight_law_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "uniform")
        return WeightLaw::make_uniform(j.at("lo").get<double>(), j.at("hi").get<double>());
    if (kind == "lognormal")
        return WeightLaw::make_lognormal(j.at("mu").get<double>(), j.at("sigma").get<double>());
    if (kind == "discrete")
        return WeightLaw::make_discrete(j.at("values").get<std::vector<double>>(),
                                        j.at("probs").get<std::vector<double>>());
    if (kind == "mixture") {
        std::vector<WeightLaw> comps;
        for (const auto& c : j.at("components")) comps.push_back(weight_law_from_json(c));
        return WeightLaw::make_mixture(std::move(comps),
                                       j.at("weights").get<std::vector<double>>());
    }
    throw std::invalid_argument("benchmark config: unknown weight law kind '" + kind + "'");
}

static json inter_law_json(const InterArrivalLaw& l) {
    json j;
    switch (l.kind) {
        case InterArrivalLaw::Kind::exponential:
            j["kind"] = "exponential";
            j["rate"] = l.rate;
            break;
        case InterArrivalLaw::Kind::deterministic:
            j["kind"] = "deterministic";
            j["value"] = l.value;
            break;
        case InterArrivalLaw::Kind::gamma:
            j["kind"] = "gamma";
            j["shape"] = l.shape;
            j["scale"] = l.scale;
            break;
    }
    return j;
}

static InterArrivalLaw inter_law_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "exponential") return InterArrivalLaw::make_exponential(j.at("rate").get<double>());
    if (kind == "deterministic")
        return InterArrivalLaw::make_deterministic(j.at("value").get<double>());
    if (kind == "gamma")
        return InterArrivalLaw::make_gamma(j.at("shape").get<double>(),
                                           j.at("scale").get<double>());
    throw std::invalid_argument("benchmark config: unknown inter-arrival law kind '" + kind +
                                "'");
}

static json generator_json(const GeneratorSpec& g) {
    json j;
    j["weights"] = weight_law_json(g.weights);
    j["inter_arrival"] = inter_law_json(g.inter_arrival);
    json regimes = json::array();
    for (const auto& r : g.regimes) {
        json rj;
        rj["time"] = r.switch_time;
        rj["weights"] = weight_law_json(r.weights);
        rj["inter_arrival"] = inter_law_json(r.inter_arrival);
        regimes.push_back(std::move(rj));
    }
    j["regimes"] = std::move(regimes);
    return j;
}

static GeneratorSpec generator_from_json(const json& j) {
    GeneratorSpec g;
    g.weights = weight_law_from_json(j.at("weights"));
    g.inter_arrival = inter_law_from_json(j.at("inter_arrival"));
    if (j.contains("regimes")) {
        for (const auto& rj : j.at("regimes")) {
            RegimeSwitch r;
            r.switch_time = rj.at("time").get<double>();
            r.weights = weight_law_from_json(rj.at("weights"));
            r.inter_arrival = inter_law_from_json(rj.at("inter_arrival"));
            g.regimes.push_back(std::move(r));
        }
    }
    return g;
}

static json fee_json(const FeeCurve& fee) {
    json j = json::array();
    for (const auto& [load, cost] : fee.breakpoints()) j.push_back({load, cost});
    return j;
}

static FeeCurve fee_from_json(const json& j) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& p : j) pts.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
    return FeeCurve(std::move(pts));
}

std::string BenchmarkConfig::to_json() const {
    json j;
    j["format"] = "restop-benchmark";
    j["version"] = 1;
    j["name"] = name;
    j["horizon_days"] = horizon_days;
    j["split_fraction"] = split_fraction;
    j["episode_window"] = episode_window;
    j["alphas"] = alphas;
    j["seeds"] = seeds;
    j["base_seed"] = base_seed;
    j["capacity"] = capacity;
    j["max_items"] = max_items;
    j["grid_bins"] = grid_bins;
    j["controller"] = {{"resolve_every", resolve_every},
                       {"min_observations", min_observations},
                       {"lookback", lookback},
                       {"window_min_count", window_min_count}};
    j["imitation"] = {{"iterations", il_iterations},
                      {"windows", il_windows},
                      {"epochs", il_epochs},
                      {"learning_rate", il_learning_rate},
                      {"l2", il_l2},
                      {"batch", il_batch},
                      {"validation_windows", il_validation_windows},
                      {"inverse_frequency", il_inverse_frequency},
                      {"activation", to_string(il_activation)}};
    j["policy_gradient"] = {{"episodes", pg_episodes},
                            {"batch", pg_batch},
                            {"step_size", pg_step},
                            {"mean_baseline", pg_mean_baseline}};
    json cs = json::array();
    for (const auto& c : cities) {
        json cj;
        cj["name"] = c.name;
        cj["fee"] = fee_json(c.fee);
        cj["generator"] = generator_json(c.generator);
        cs.push_back(std::move(cj));
    }
    j["cities"] = std::move(cs);
    return j.dump(2) + "\n";
}

BenchmarkConfig BenchmarkConfig::from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        if (j.at("format").get<std::string>() != "restop-benchmark")
            throw std::invalid_argument("benchmark config: unexpected format tag");
        if (j.at("version").get<int>() != 1)
            throw std::invalid_argument("benchmark config: unsupported version");

        BenchmarkConfig c;
        c.name = j.at("name").get<std::string>();
        c.horizon_days = j.at("horizon_days").get<double>();
        c.split_fraction = j.at("split_fraction").get<double>();
        c.episode_window = j.at("episode_window").get<double>();
        c.alphas = j.at("alphas").get<std::vector<double>>();
        c.seeds = j.at("seeds").get<int>();
        c.base_seed = j.at("base_seed").get<std::uint64_t>();
        c.capacity = j.at("capacity").get<double>();
        c.max_items = j.at("max_items").get<int>();
        c.grid_bins = j.at("grid_bins").get<int>();

        const json& ctrl = j.at("controller");
        c.resolve_every = ctrl.at("resolve_every").get<int>();
        c.min_observations = ctrl.at("min_observations").get<int>();
        c.lookback = ctrl.at("lookback").get<double>();
        c.window_min_count = ctrl.at("window_min_count").get<int>();

        const json& il = j.at("imitation");
        c.il_iterations = il.at("iterations").get<int>();
        c.il_windows = il.at("windows").get<int>();
        c.il_epochs = il.at("epochs").get<int>();
        c.il_learning_rate = il.at("learning_rate").get<double>();
        c.il_l2 = il.at("l2").get<double>();
        c.il_batch = il.at("batch").get<int>();
        c.il_validation_windows = il.at("validation_windows").get<int>();
        c.il_inverse_frequency = il.at("inverse_frequency").get<bool>();
        c.il_activation = activation_from_string(il.at("activation").get<std::string>());

        const json& pg = j.at("policy_gradient");
        c.pg_episodes = pg.at("episodes").get<int>();
        c.pg_batch = pg.at("batch").get<int>();
        c.pg_step = pg.at("step_size").get<double>();
        c.pg_mean_baseline = pg.at("mean_baseline").get<bool>();

        for (const auto& cj : j.at("cities"))
            c.cities.push_back({cj.at("name").get<std::string>(), fee_from_json(cj.at("fee")),
                                generator_from_json(cj.at("generator"))});
        c.validate();
        return c;
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("benchmark config: ") + e.what());
    }
}

BenchmarkConfig BenchmarkConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("benchmark config: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

void BenchmarkConfig::save(const std::string& path) const {
    write_text_file(path, to_json());
}

CostModel BenchmarkConfig::cost_model(const CityConfig& city, double alpha) const {
    return CostModel(alpha, city.fee, capacity, max_items);
}

void BenchmarkConfig::validate() const {
    if (!(horizon_days > 0)) throw std::invalid_argument("benchmark config: horizon must be > 0");
    if (!(split_fraction > 0 && split_fraction < 1))
        throw std::invalid_argument("benchmark config: split fraction must be in (0, 1)");
    if (!(episode_window > 0) || episode_window > train_days() * (1 + 1e-12))
        throw std::invalid_argument(
            "benchmark config: episode window must be > 0 and fit in the training split");
    if (alphas.empty()) throw std::invalid_argument("benchmark config: empty alpha ladder");
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        if (!(alphas[i] > 0))
            throw std::invalid_argument("benchmark config: alphas must be > 0");
        if (i > 0 && !(alphas[i] > alphas[i - 1]))
            throw std::invalid_argument("benchmark config: alphas must be strictly ascending");
    }
    if (seeds < 1) throw std::invalid_argument("benchmark config: seeds must be >= 1");
    if (!(capacity > 0)) throw std::invalid_argument("benchmark config: capacity must be > 0");
    if (max_items < 1) throw std::invalid_argument("benchmark config: max_items must be >= 1");
    if (grid_bins < 2) throw std::invalid_argument("benchmark config: grid_bins must be >= 2");
    if (resolve_every < 1 || min_observations < 1 || window_min_count < 1)
        throw std::invalid_argument("benchmark config: controller counts must be >= 1");
    if (!(lookback > 0)) throw std::invalid_argument("benchmark config: lookback must be > 0");
    if (il_iterations < 1 || il_windows < 1 || il_epochs < 1 || il_batch < 1 ||
        il_validation_windows < 0)
        throw std::invalid_argument("benchmark config: imitation counts out of range");
    if (!(il_learning_rate > 0) || il_l2 < 0)
        throw std::invalid_argument("benchmark config: imitation rates out of range");
    if (pg_episodes < 1 || pg_batch < 1)
        throw std::invalid_argument("benchmark config: policy-gradient counts out of range");
    if (cities.empty()) throw std::invalid_argument("benchmark config: no cities");
    for (std::size_t i = 0; i < cities.size(); ++i) {
        if (cities[i].name.empty())
            throw std::invalid_argument("benchmark config: city with empty name");
        for (std::size_t k = 0; k < i; ++k)
            if (cities[k].name == cities[i].name)
                throw std::invalid_argument("benchmark config: duplicate city name '" +
                                            cities[i].name + "'");
        cities[i].generator.validate();
        // Constructing a cost model checks the fee curve against capacity.
        (void)cost_model(cities[i], alphas.front());
    }
}

// ─── Presets ─────────────────────────────────────────────────────────────

static CityConfig make_city(std::string name, std::vector<std::pair<double, double>> fee,
                            WeightLaw weights, InterArrivalLaw inter,
                            std::vector<RegimeSwitch> regimes = {}) {
    CityConfig c{std::move(name), FeeCurve(std::move(fee)), GeneratorSpec{}};
    c.generator.weights = std::move(weights);
    c.generator.inter_arrival = std::move(inter);
    c.generator.regimes = std::move(regimes);
    return c;
}

static std::vector<CityConfig> six_cities(bool regime_switch_in_last) {
    std::vector<CityConfig> cities;
    cities.push_back(make_city("A", {{0, 150}, {8000, 510}, {22000, 888}},
                               WeightLaw::make_uniform(400, 1600),
                               InterArrivalLaw::make_exponential(0.5)));
    cities.push_back(make_city("B", {{0, 120}, {6000, 420}, {22000, 852}},
                               WeightLaw::make_lognormal(6.3, 0.6),
                               InterArrivalLaw::make_exponential(1.0)));
    cities.push_back(make_city("C", {{0, 100}, {5000, 400}, {22000, 910}},
                               WeightLaw::make_discrete({250, 500, 1000, 2000},
                                                        {0.3, 0.3, 0.25, 0.15}),
                               InterArrivalLaw::make_exponential(2.0)));
    cities.push_back(make_city("D", {{0, 90}, {4000, 330}, {22000, 780}},
                               WeightLaw::make_uniform(200, 900),
                               InterArrivalLaw::make_gamma(2.0, 0.125)));
    cities.push_back(make_city(
        "E", {{0, 80}, {4000, 296}, {22000, 782}},
        WeightLaw::make_mixture({WeightLaw::make_uniform(150, 450),
                                 WeightLaw::make_discrete({1200}, {1.0})},
                                {0.7, 0.3}),
        InterArrivalLaw::make_exponential(8.0)));
    std::vector<RegimeSwitch> regimes;
    if (regime_switch_in_last)
        regimes.push_back({225.0, WeightLaw::make_uniform(800, 2000),
                           InterArrivalLaw::make_exponential(6.0)});
    cities.push_back(make_city("F", {{0, 110}, {7000, 460}, {22000, 835}},
                               WeightLaw::make_lognormal(6.1, 0.5),
                               InterArrivalLaw::make_exponential(1.2), std::move(regimes)));
    return cities;
}

BenchmarkConfig preset(const std::string& name) {
    BenchmarkConfig c;
    c.name = name;
    if (name == "tiny") {
        c.horizon_days = 60;
        c.episode_window = 10;
        c.alphas = {0.5, 5.0};
        c.seeds = 2;
        c.max_items = 30;
        c.grid_bins = 20;
        c.min_observations = 6;
        c.lookback = 15;
        c.il_iterations = 2;
        c.il_windows = 10;
        c.il_epochs = 40;
        c.il_validation_windows = 8;
        c.il_inverse_frequency = false;
        c.pg_episodes = 600;
        c.pg_batch = 12;
        c.pg_step = 5e-5;
        c.cities.push_back(make_city("T1", {{0, 120}, {6000, 420}, {22000, 852}},
                                     WeightLaw::make_uniform(400, 1600),
                                     InterArrivalLaw::make_exponential(1.5)));
        c.cities.push_back(make_city("T2", {{0, 100}, {5000, 400}, {22000, 910}},
                                     WeightLaw::make_discrete({250, 500, 1000, 2000},
                                                              {0.3, 0.3, 0.25, 0.15}),
                                     InterArrivalLaw::make_exponential(3.0)));
    } else if (name == "stationary") {
        c.alphas = {0.05, 0.158, 0.5, 1.58, 5.0, 15.8, 50.0};
        c.il_windows = 40;
        c.il_epochs = 120;
        c.il_inverse_frequency = false;
        c.pg_episodes = 3000;
        c.pg_step = 2e-5;
        c.cities = six_cities(false);
    } else if (name == "default") {
        c.alphas = {0.05, 0.158, 0.5, 1.58, 5.0, 15.8, 50.0};
        c.il_windows = 40;
        c.il_epochs = 120;
        c.il_inverse_frequency = false;
        c.pg_episodes = 3000;
        c.pg_step = 2e-5;
        c.cities = six_cities(true);
    } else {
        throw std::invalid_argument("unknown preset '" + name +
                                    "' (expected tiny, stationary or default)");
    }
    c.validate();
    return c;
}

std::vector<std::string> preset_names() { return {"tiny", "stationary", "default"}; }

// ─── Derived pieces ──────────────────────────────────────────────────────

FeatureScaling make_scaling(const BenchmarkConfig& config) {
    FeatureScaling s;
    s.load_scale = config.capacity;
    s.items_scale = static_cast<double>(config.max_items);
    s.delay_scale = std::max(1.0, config.max_items * config.episode_window / 4.0);
    double max_fee = 0.0, max_tau = 0.0, max_weight = 0.0;
    double sum_tau = 0.0, sum_weight = 0.0;
    for (const auto& city : config.cities) {
        max_fee = std::max(max_fee, city.fee.full_truck_fee());
        const double tau = city.generator.inter_arrival.mean();
        const double w = city.generator.weights.mean();
        max_tau = std::max(max_tau, tau);
        max_weight = std::max(max_weight, w);
        sum_tau += tau;
        sum_weight += w;
    }
    const double n = static_cast<double>(config.cities.size());
    s.fee_scale = std::max(1.0, max_fee);
    s.tau_scale = std::max(1e-9, max_tau);
    s.weight_scale = std::max(1e-9, max_weight);
    s.tau_prior = sum_tau / n;
    s.weight_prior = sum_weight / n;
    return s;
}

std::vector<GeneratedCity> generate_cities(const BenchmarkConfig& config, std::uint64_t seed) {
    std::vector<GeneratedCity> out;
    out.reserve(config.cities.size());
    for (std::size_t i = 0; i < config.cities.size(); ++i) {
        const auto& cc = config.cities[i];
        OrderSequence full = generate(cc.generator, config.horizon_days, mix(seed, 0xC170 + i));
        full.destination_id = cc.name;
        full.max_fee = cc.fee.full_truck_fee();
        GeneratedCity g{cc.name, std::move(full), {}, {}};
        g.train = slice_window(g.full, 0.0, config.train_days());
        g.test = slice_window(g.full, config.train_days(), config.test_days());
        out.push_back(std::move(g));
    }
    return out;
}

std::vector<TrainingCity> training_corpus(const BenchmarkConfig& config,
                                          const std::vector<GeneratedCity>& cities,
                                          double alpha) {
    std::vector<TrainingCity> corpus;
    corpus.reserve(cities.size());
    for (std::size_t i = 0; i < cities.size(); ++i)
        corpus.push_back({cities[i].train, config.cost_model(config.cities[i], alpha)});
    return corpus;
}

// ─── Approaches ──────────────────────────────────────────────────────────

const char* to_string(Approach a) {
    switch (a) {
        case Approach::baseline: return "baseline";
        case Approach::load_threshold: return "load-threshold";
        case Approach::model_based: return "model-based";
        case Approach::model_based_windowed: return "model-based-windowed";
        case Approach::imitation: return "imitation";
        case Approach::policy_gradient: return "policy-gradient";
        case Approach::hindsight: return "hindsight";
    }
    throw std::logic_error("to_string: bad approach");
}

Approach approach_from_string(const std::string& s) {
    for (Approach a : all_approaches())
        if (s == to_string(a)) return a;
    throw std::invalid_argument("unknown approach '" + s + "'");
}

std::vector<Approach> all_approaches() {
    return {Approach::baseline,       Approach::load_threshold,
            Approach::model_based,    Approach::model_based_windowed,
            Approach::imitation,      Approach::policy_gradient,
            Approach::hindsight};
}

const char* results_csv_header() {
    return "approach,alpha,city,seed,total_cost,shipping_cost,delay_cost,shipments,"
           "delay_per_order_days,decision_latency_us";
}

std::string results_csv_row(const EvalRow& row) {
    std::ostringstream ss;
    ss.precision(17);
    ss << to_string(row.approach) << ',' << row.alpha << ',' << row.city << ',' << row.seed
       << ',' << row.cost.total_cost << ',' << row.cost.shipping_cost << ','
       << row.cost.delay_cost << ',' << row.cost.shipments << ','
       << row.cost.delay_per_order_days << ',' << row.decision_latency_us;
    return ss.str();
}

std::string results_csv(const std::vector<EvalRow>& rows) {
    std::ostringstream ss;
    ss << results_csv_header() << "\n";
    for (const auto& r : rows) ss << results_csv_row(r) << "\n";
    return ss.str();
}

// ─── Evaluation ──────────────────────────────────────────────────────────

namespace {

/// Forwarding decorator that measures wall time spent inside the wrapped
/// policy (decide and observe both count; solves hide in observe).
class TimingPolicy final : public StoppingPolicy {
  public:
    explicit TimingPolicy(StoppingPolicy& inner) : inner_(&inner) {}

    void begin_episode(const OrderSequence& seq, const CostModel& cm) override {
        inner_->begin_episode(seq, cm);
    }
    void observe(const TimedDataPoint& x) override {
        const auto t0 = std::chrono::steady_clock::now();
        inner_->observe(x);
        ns_ += std::chrono::duration_cast<std::chrono::nanoseconds>(
                   std::chrono::steady_clock::now() - t0)
                   .count();
    }
    Action decide(const SystemState& s, const StepContext& ctx) override {
        const auto t0 = std::chrono::steady_clock::now();
        const Action a = inner_->decide(s, ctx);
        ns_ += std::chrono::duration_cast<std::chrono::nanoseconds>(
                   std::chrono::steady_clock::now() - t0)
                   .count();
        ++decides_;
        return a;
    }
    const char* name() const override { return inner_->name(); }

    double mean_micros() const {
        return decides_ > 0 ? static_cast<double>(ns_) / 1000.0 / decides_ : 0.0;
    }

  private:
    StoppingPolicy* inner_;
    long long ns_ = 0;
    long long decides_ = 0;
};

ControllerConfig controller_config(const BenchmarkConfig& config, bool windowed) {
    ControllerConfig cc;
    cc.edges = ArrivalModel::uniform_edges(config.capacity, config.grid_bins);
    cc.resolve_every = config.resolve_every;
    cc.min_observations = config.min_observations;
    cc.windowed = windowed;
    cc.lookback = config.lookback;
    cc.window_min_count = config.window_min_count;
    return cc;
}

}  // namespace

TrainedPolicies train_policies(const BenchmarkConfig& config,
                               const std::vector<GeneratedCity>& cities, double alpha,
                               std::uint64_t seed, bool want_imitation, bool want_pg) {
    TrainedPolicies tp;
    if (!want_imitation && !want_pg) return tp;
    const auto corpus = training_corpus(config, cities, alpha);
    const FeatureScaling scaling = make_scaling(config);

    if (want_imitation) {
        ImitationConfig icfg;
        icfg.outer_iterations = config.il_iterations;
        icfg.windows_per_iteration = config.il_windows;
        icfg.episode_window = config.episode_window;
        icfg.train.learning_rate = config.il_learning_rate;
        icfg.train.l2 = config.il_l2;
        icfg.train.epochs = config.il_epochs;
        icfg.train.batch_size = config.il_batch;
        icfg.seed = mix_alpha(seed, 0x111, alpha);
        icfg.inverse_frequency_weights = config.il_inverse_frequency;
        icfg.validation_windows = config.il_validation_windows;
        icfg.activation = config.il_activation;
        icfg.scaling = scaling;
        ImitationResult res = imitate_expert(corpus, icfg);
        tp.imitation = res.policy;
        tp.imitation_detail = std::move(res);
    }
    if (want_pg) {
        NeuralPolicy policy(config.il_activation, scaling, mix_alpha(seed, 0x222, alpha));
        PgConfig pcfg;
        pcfg.episodes = config.pg_episodes;
        pcfg.batch = config.pg_batch;
        pcfg.step_size = config.pg_step;
        pcfg.mean_baseline = config.pg_mean_baseline;
        pcfg.episode_window = config.episode_window;
        pcfg.seed = mix_alpha(seed, 0x333, alpha);
        train_policy_gradient(policy, corpus, pcfg);
        tp.policy_gradient = std::move(policy);
    }
    return tp;
}

EvalRow evaluate_approach(const BenchmarkConfig& config, const GeneratedCity& city,
                          const CityConfig& city_cfg, Approach approach, double alpha,
                          std::uint64_t seed, const TrainedPolicies& trained) {
    const CostModel cm = config.cost_model(city_cfg, alpha);
    const double horizon = config.test_days();
    SimulateOptions opts;
    opts.seed = mix_alpha(seed, 0x500 + static_cast<std::uint64_t>(approach), alpha);

    EvalRow row;
    row.approach = approach;
    row.alpha = alpha;
    row.city = city.name;
    row.seed = seed;

    auto run = [&](StoppingPolicy& policy) {
        TimingPolicy timed(policy);
        const SimulateResult res = simulate(timed, city.test, horizon, cm, opts);
        row.cost = res.breakdown;
        row.decision_latency_us = timed.mean_micros();
    };

    switch (approach) {
        case Approach::baseline: {
            AlwaysStopPolicy p;
            run(p);
            break;
        }
        case Approach::load_threshold: {
            LoadThresholdPolicy p(0.8 * config.capacity);
            run(p);
            break;
        }
        case Approach::model_based:
        case Approach::model_based_windowed: {
            ModelBasedController p(
                controller_config(config, approach == Approach::model_based_windowed), cm);
            p.prime(city.train);
            run(p);
            break;
        }
        case Approach::imitation: {
            if (!trained.imitation.has_value())
                throw std::logic_error("evaluate_approach: imitation policy not trained");
            NeuralAgent p(*trained.imitation, /*greedy=*/true);
            run(p);
            break;
        }
        case Approach::policy_gradient: {
            if (!trained.policy_gradient.has_value())
                throw std::logic_error("evaluate_approach: policy-gradient policy not trained");
            NeuralAgent p(*trained.policy_gradient, /*greedy=*/true);
            run(p);
            break;
        }
        case Approach::hindsight: {
            const HindsightResult hs = hindsight(city.test, horizon, cm);
            ScriptedPolicy p(hs.optimal_actions);
            run(p);
            break;
        }
    }
    return row;
}

// ─── Full benchmark runs ─────────────────────────────────────────────────

namespace {

struct JobSpec {
    double alpha;
    std::uint64_t seed;
};

std::vector<EvalRow> run_job(const BenchmarkConfig& config, const JobSpec& job,
                             const std::vector<Approach>& approaches, bool aggregate_rows) {
    const auto cities = generate_cities(config, job.seed);
    bool want_im = false, want_pg = false;
    for (Approach a : approaches) {
        want_im |= a == Approach::imitation;
        want_pg |= a == Approach::policy_gradient;
    }
    const TrainedPolicies trained =
        train_policies(config, cities, job.alpha, job.seed, want_im, want_pg);

    std::vector<EvalRow> rows;
    for (Approach a : approaches) {
        EvalRow agg;
        agg.approach = a;
        agg.alpha = job.alpha;
        agg.city = "all";
        agg.seed = job.seed;
        double latency_weighted = 0.0;
        for (std::size_t c = 0; c < cities.size(); ++c) {
            EvalRow row = evaluate_approach(config, cities[c], config.cities[c], a, job.alpha,
                                            job.seed, trained);
            agg.cost.total_cost += row.cost.total_cost;
            agg.cost.shipping_cost += row.cost.shipping_cost;
            agg.cost.delay_cost += row.cost.delay_cost;
            agg.cost.delay_days += row.cost.delay_days;
            agg.cost.shipments += row.cost.shipments;
            agg.cost.orders += row.cost.orders;
            latency_weighted += row.decision_latency_us * row.cost.orders;
            rows.push_back(std::move(row));
        }
        if (aggregate_rows) {
            agg.cost.delay_per_order_days =
                agg.cost.orders > 0 ? agg.cost.delay_days / agg.cost.orders : 0.0;
            agg.decision_latency_us =
                agg.cost.orders > 0 ? latency_weighted / agg.cost.orders : 0.0;
            rows.push_back(std::move(agg));
        }
    }
    return rows;
}

}  // namespace

std::vector<EvalRow> run_benchmark(const BenchmarkConfig& config, const RunOptions& options) {
    config.validate();
    const std::vector<double> alphas = options.alphas.empty() ? config.alphas : options.alphas;
    const std::vector<Approach> approaches =
        options.approaches.empty() ? all_approaches() : options.approaches;
    const int seeds = options.seeds < 0 ? config.seeds : options.seeds;
    if (seeds < 1) throw std::invalid_argument("run_benchmark: seeds must be >= 1");

    std::vector<JobSpec> jobs;
    for (double alpha : alphas)
        for (int k = 0; k < seeds; ++k) jobs.push_back({alpha, config.base_seed + k});

    std::vector<std::vector<EvalRow>> per_job(jobs.size());
    const int workers = std::max(1, std::min<int>(options.jobs, static_cast<int>(jobs.size())));
    if (workers == 1) {
        for (std::size_t i = 0; i < jobs.size(); ++i)
            per_job[i] = run_job(config, jobs[i], approaches, options.aggregate_rows);
    } else {
        std::atomic<std::size_t> next{0};
        std::atomic<bool> failed{false};
        std::exception_ptr error;
        std::mutex error_mutex;
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                while (!failed.load()) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= jobs.size()) break;
                    try {
                        per_job[i] = run_job(config, jobs[i], approaches, options.aggregate_rows);
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(error_mutex);
                        if (!error) error = std::current_exception();
                        failed.store(true);
                        break;
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
        if (error) std::rethrow_exception(error);
    }

    std::vector<EvalRow> rows;
    for (auto& jr : per_job)
        for (auto& r : jr) rows.push_back(std::move(r));
    return rows;
}

std::pair<double, double> regime_switch_comparison(const BenchmarkConfig& config, double alpha,
                                                   std::uint64_t seed) {
    config.validate();
    std::size_t idx = config.cities.size();
    for (std::size_t i = 0; i < config.cities.size(); ++i)
        if (!config.cities[i].generator.regimes.empty()) {
            idx = i;
            break;
        }
    if (idx == config.cities.size())
        throw std::invalid_argument("regime_switch_comparison: no city switches regime");

    const double switch_time = config.cities[idx].generator.regimes.front().switch_time;
    // Test-window clocks restart at zero, so shift the switch accordingly.
    const double switch_clock = std::max(0.0, switch_time - config.train_days());

    const auto cities = generate_cities(config, seed);
    const CostModel cm = config.cost_model(config.cities[idx], alpha);
    SimulateOptions opts;
    opts.record_trajectory = true;

    auto run_one = [&](bool windowed) {
        ModelBasedController ctrl(controller_config(config, windowed), cm);
        ctrl.prime(cities[idx].train);
        const SimulateResult res =
            simulate(ctrl, cities[idx].test, config.test_days(), cm, opts);
        return trajectory_cost_from(res, cm, switch_clock);
    };
    return {run_one(false), run_one(true)};
}

// ─── Policy structure ────────────────────────────────────────────────────

std::vector<std::pair<double, MdpSolution>> solve_policy_ladder(const BenchmarkConfig& config,
                                                                const GeneratedCity& city,
                                                                const CityConfig& city_cfg,
                                                                std::uint64_t /*seed*/) {
    const auto edges = ArrivalModel::uniform_edges(config.capacity, config.grid_bins);
    const ArrivalModel model = estimate({city.train}, edges);
    std::vector<std::pair<double, MdpSolution>> out;
    out.reserve(config.alphas.size());
    for (double alpha : config.alphas)
        out.emplace_back(alpha, solve(model, config.cost_model(city_cfg, alpha)));
    return out;
}

bool stop_region_nested(const GridPolicy& smaller, const GridPolicy& larger) {
    if (smaller.bins() != larger.bins() || smaller.max_items() != larger.max_items())
        throw std::invalid_argument("stop_region_nested: mismatched grids");
    for (int i = 0; i <= smaller.max_items(); ++i)
        for (int b = 0; b < smaller.bins(); ++b)
            if (smaller.at(b, i) == Action::stop && larger.at(b, i) != Action::stop)
                return false;
    return true;
}

bool stop_region_nested(const GridPolicy& smaller, const GridPolicy& larger,
                        const ArrivalModel& model, const CostModel& cm) {
    if (smaller.bins() != larger.bins() || smaller.max_items() != larger.max_items())
        throw std::invalid_argument("stop_region_nested: mismatched grids");
    if (smaller.edges() != model.edges || smaller.max_items() != cm.max_items)
        throw std::invalid_argument("stop_region_nested: policies solved on a different grid");
    const auto reach = reachable_grid_states(model, cm);
    for (int i = 1; i <= smaller.max_items(); ++i)
        for (int b = 0; b < smaller.bins(); ++b)
            if (reach[static_cast<std::size_t>(i)][static_cast<std::size_t>(b)] &&
                smaller.at(b, i) == Action::stop && larger.at(b, i) != Action::stop)
                return false;
    return true;
}

std::vector<std::vector<double>> neural_stop_fractions(const NeuralPolicy& policy,
                                                       const CostModel& cm,
                                                       const std::vector<double>& edges,
                                                       int max_items, double mean_inter_arrival,
                                                       double mean_weight) {
    if (edges.size() < 2)
        throw std::invalid_argument("neural_stop_fractions: need at least one bin");
    const int bins = static_cast<int>(edges.size()) - 1;
    std::vector<std::vector<double>> out(static_cast<std::size_t>(max_items) + 1,
                                         std::vector<double>(static_cast<std::size_t>(bins)));
    for (int i = 0; i <= max_items; ++i) {
        for (int b = 0; b < bins; ++b) {
            PolicyFeatures f;
            f.load = 0.5 * (edges[b] + edges[b + 1]);
            f.item_count = static_cast<double>(i);
            f.total_delay = 0.0;
            f.max_fee = cm.fee_curve.full_truck_fee();
            f.mean_inter_arrival = mean_inter_arrival;
            f.mean_weight = mean_weight;
            out[static_cast<std::size_t>(i)][static_cast<std::size_t>(b)] =
                policy.probabilities(f)[1];
        }
    }
    return out;
}

void write_stop_fraction_csv(std::ostream& out, const std::vector<double>& edges,
                             const std::vector<std::vector<double>>& fractions) {
    out << "weight_bin_center,item_count,p_stop\n";
    out.precision(17);
    for (std::size_t i = 0; i < fractions.size(); ++i)
        for (std::size_t b = 0; b < fractions[i].size(); ++b)
            out << 0.5 * (edges[b] + edges[b + 1]) << ',' << i << ',' << fractions[i][b]
                << "\n";
}

// ─── Run-directory helpers ───────────────────────────────────────────────

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

void init_run_dir(const std::string& dir, const BenchmarkConfig& config) {
    std::filesystem::create_directories(dir);
    config.save(dir + "/config.json");
}

void write_manifest(const std::string& dir, const std::string& command,
                    const BenchmarkConfig& config, const std::vector<std::string>& artifacts) {
    json j;
    j["format"] = "restop-run";
    j["version"] = 1;
    j["command"] = command;
    j["config"] = config.name;
    j["seeds"] = config.seeds;
    j["base_seed"] = config.base_seed;
    j["artifacts"] = artifacts;
    write_text_file(dir + "/manifest.json", j.dump(2) + "\n");
}

}  // namespace restop

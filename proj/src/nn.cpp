#include "restop/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace restop {

void FeatureScaling::validate() const {
    for (double v : {load_scale, items_scale, delay_scale, fee_scale, tau_scale, weight_scale})
        if (!(v > 0.0)) throw std::invalid_argument("FeatureScaling: scales must be > 0");
    if (!(tau_prior >= 0.0) || !(weight_prior >= 0.0))
        throw std::invalid_argument("FeatureScaling: priors must be >= 0");
}

PolicyFeatures featurize(const SystemState& s, const EpisodeStats& stats, const CostModel& cm,
                         const FeatureScaling& scaling) {
    PolicyFeatures f;
    f.load = s.load;
    f.item_count = s.item_count;
    f.total_delay = s.total_delay;
    f.max_fee = cm.fee_curve.full_truck_fee();
    f.mean_inter_arrival = stats.mean_inter_arrival(scaling.tau_prior);
    f.mean_weight = stats.mean_weight(scaling.weight_prior);
    return f;
}

const char* to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    throw std::invalid_argument("unknown activation '" + s + "'");
}

// Parameter layout: W1 (32x6 row-major), b1, W2 (32x32), b2, W3 (2x32), b3.
namespace {
constexpr int kW1 = 0;
constexpr int kB1 = kW1 + NeuralPolicy::kHidden * NeuralPolicy::kInput;
constexpr int kW2 = kB1 + NeuralPolicy::kHidden;
constexpr int kB2 = kW2 + NeuralPolicy::kHidden * NeuralPolicy::kHidden;
constexpr int kW3 = kB2 + NeuralPolicy::kHidden;
constexpr int kB3 = kW3 + NeuralPolicy::kOutput * NeuralPolicy::kHidden;

double activate(Activation a, double z) {
    return a == Activation::relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

double activate_grad(Activation a, double z, double h) {
    return a == Activation::relu ? (z > 0.0 ? 1.0 : 0.0) : 1.0 - h * h;
}

}  // namespace

NeuralPolicy::NeuralPolicy(Activation activation, FeatureScaling scaling, std::uint64_t seed)
    : activation_(activation), scaling_(scaling), params_(kParamCount, 0.0) {
    scaling_.validate();
    std::mt19937_64 rng(seed);
    auto init_block = [&](int offset, int rows, int cols) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
        std::uniform_real_distribution<double> d(-bound, bound);
        for (int i = 0; i < rows * cols; ++i) params_[offset + i] = d(rng);
    };
    init_block(kW1, kHidden, kInput);
    init_block(kW2, kHidden, kHidden);
    init_block(kW3, kOutput, kHidden);
    // biases stay zero
}

NeuralPolicy::Trace NeuralPolicy::forward(const PolicyFeatures& f) const {
    Trace t;
    const auto raw = f.raw();
    const std::array<double, kInput> scale = {scaling_.load_scale,  scaling_.items_scale,
                                              scaling_.delay_scale, scaling_.fee_scale,
                                              scaling_.tau_scale,   scaling_.weight_scale};
    for (int i = 0; i < kInput; ++i) t.input[i] = raw[i] / scale[i];
    const double* p = params_.data();
    for (int j = 0; j < kHidden; ++j) {
        double z = p[kB1 + j];
        for (int i = 0; i < kInput; ++i) z += p[kW1 + j * kInput + i] * t.input[i];
        t.pre1[j] = z;
        t.hid1[j] = activate(activation_, z);
    }
    for (int j = 0; j < kHidden; ++j) {
        double z = p[kB2 + j];
        for (int i = 0; i < kHidden; ++i) z += p[kW2 + j * kHidden + i] * t.hid1[i];
        t.pre2[j] = z;
        t.hid2[j] = activate(activation_, z);
    }
    for (int o = 0; o < kOutput; ++o) {
        double z = p[kB3 + o];
        for (int i = 0; i < kHidden; ++i) z += p[kW3 + o * kHidden + i] * t.hid2[i];
        t.logits[o] = z;
    }
    const double zmax = std::max(t.logits[0], t.logits[1]);
    const double e0 = std::exp(t.logits[0] - zmax);
    const double e1 = std::exp(t.logits[1] - zmax);
    t.probs = {e0 / (e0 + e1), e1 / (e0 + e1)};
    return t;
}

std::array<double, 2> NeuralPolicy::logits(const PolicyFeatures& f) const {
    return forward(f).logits;
}

std::array<double, 2> NeuralPolicy::probabilities(const PolicyFeatures& f) const {
    return forward(f).probs;
}

std::array<double, 2> NeuralPolicy::masked_probabilities(const PolicyFeatures& f,
                                                         ActionMask mask) const {
    auto p = probabilities(f);
    if (!mask.wait_allowed) p[0] = 0.0;
    if (!mask.stop_allowed) p[1] = 0.0;
    const double total = p[0] + p[1];
    if (total <= 0.0) throw std::logic_error("masked_probabilities: nothing admissible");
    return {p[0] / total, p[1] / total};
}

Action NeuralPolicy::act(const PolicyFeatures& f, ActionMask mask, std::mt19937_64& rng) const {
    if (mask.forced()) return mask.forced_action();
    const auto p = masked_probabilities(f, mask);
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    return u < p[0] ? Action::wait : Action::stop;
}

Action NeuralPolicy::act_greedy(const PolicyFeatures& f, ActionMask mask) const {
    if (mask.forced()) return mask.forced_action();
    const auto p = masked_probabilities(f, mask);
    return p[1] > p[0] ? Action::stop : Action::wait;
}

// ─── Serialization ───────────────────────────────────────────────────────

std::string NeuralPolicy::to_json() const {
    nlohmann::json j;
    j["format"] = "restop-policy";
    j["version"] = 1;
    j["layers"] = {kInput, kHidden, kHidden, kOutput};
    j["activation"] = to_string(activation_);
    j["scaling"] = {{"load_scale", scaling_.load_scale},
                    {"items_scale", scaling_.items_scale},
                    {"delay_scale", scaling_.delay_scale},
                    {"fee_scale", scaling_.fee_scale},
                    {"tau_scale", scaling_.tau_scale},
                    {"weight_scale", scaling_.weight_scale},
                    {"tau_prior", scaling_.tau_prior},
                    {"weight_prior", scaling_.weight_prior}};
    j["params"] = params_;
    return j.dump(2);
}

NeuralPolicy NeuralPolicy::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    if (j.value("format", "") != "restop-policy")
        throw std::runtime_error("NeuralPolicy: not a policy file");
    if (j.value("version", 0) != 1)
        throw std::runtime_error("NeuralPolicy: unsupported version");
    const std::vector<int> expected{kInput, kHidden, kHidden, kOutput};
    if (j.at("layers").get<std::vector<int>>() != expected)
        throw std::runtime_error("NeuralPolicy: unexpected layer sizes");
    FeatureScaling sc;
    const auto& s = j.at("scaling");
    sc.load_scale = s.at("load_scale").get<double>();
    sc.items_scale = s.at("items_scale").get<double>();
    sc.delay_scale = s.at("delay_scale").get<double>();
    sc.fee_scale = s.at("fee_scale").get<double>();
    sc.tau_scale = s.at("tau_scale").get<double>();
    sc.weight_scale = s.at("weight_scale").get<double>();
    sc.tau_prior = s.at("tau_prior").get<double>();
    sc.weight_prior = s.at("weight_prior").get<double>();
    NeuralPolicy policy(activation_from_string(j.at("activation").get<std::string>()), sc, 0);
    auto params = j.at("params").get<std::vector<double>>();
    if (static_cast<int>(params.size()) != kParamCount)
        throw std::runtime_error("NeuralPolicy: expected " + std::to_string(kParamCount) +
                                 " parameters, got " + std::to_string(params.size()));
    policy.params_ = std::move(params);
    return policy;
}

void NeuralPolicy::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("NeuralPolicy: cannot open " + path);
    out << to_json() << "\n";
}

NeuralPolicy NeuralPolicy::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("NeuralPolicy: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

// ─── Dataset IO ──────────────────────────────────────────────────────────

void save_dataset_csv(const std::string& path, const LabeledDataset& data) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_dataset_csv: cannot open " + path);
    out << "load,item_count,total_delay,max_fee,mean_inter_arrival,mean_weight,label\n";
    out.precision(17);
    for (const auto& s : data) {
        const auto r = s.features.raw();
        for (double v : r) out << v << ',';
        out << to_string(s.label) << "\n";
    }
}

LabeledDataset load_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_dataset_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) return {};
    LabeledDataset data;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string tok;
        std::array<double, 6> vals{};
        for (double& v : vals) {
            if (!std::getline(ss, tok, ','))
                throw std::runtime_error("load_dataset_csv: line " + std::to_string(lineno) +
                                         ": too few fields");
            v = std::stod(tok);
        }
        if (!std::getline(ss, tok))
            throw std::runtime_error("load_dataset_csv: line " + std::to_string(lineno) +
                                     ": missing label");
        LabeledSample s;
        s.features.load = vals[0];
        s.features.item_count = vals[1];
        s.features.total_delay = vals[2];
        s.features.max_fee = vals[3];
        s.features.mean_inter_arrival = vals[4];
        s.features.mean_weight = vals[5];
        if (tok == "wait")
            s.label = Action::wait;
        else if (tok == "stop")
            s.label = Action::stop;
        else
            throw std::runtime_error("load_dataset_csv: line " + std::to_string(lineno) +
                                     ": bad label '" + tok + "'");
        data.push_back(s);
    }
    return data;
}

// ─── Gradients and training ──────────────────────────────────────────────

void accumulate_logit_gradient(const NeuralPolicy& policy, const NeuralPolicy::Trace& t,
                               const std::array<double, 2>& dlogits, std::vector<double>& g) {
    constexpr int In = NeuralPolicy::kInput;
    constexpr int H = NeuralPolicy::kHidden;
    constexpr int Out = NeuralPolicy::kOutput;
    if (g.size() != static_cast<std::size_t>(NeuralPolicy::kParamCount))
        throw std::invalid_argument("accumulate_logit_gradient: bad gradient buffer size");
    const auto& p = policy.parameters();
    const Activation act = policy.activation();

    std::array<double, H> dhid2{};
    for (int o = 0; o < Out; ++o) {
        g[kB3 + o] += dlogits[o];
        for (int i = 0; i < H; ++i) {
            g[kW3 + o * H + i] += dlogits[o] * t.hid2[i];
            dhid2[i] += p[kW3 + o * H + i] * dlogits[o];
        }
    }
    std::array<double, H> dpre2;
    for (int j = 0; j < H; ++j) dpre2[j] = dhid2[j] * activate_grad(act, t.pre2[j], t.hid2[j]);

    std::array<double, H> dhid1{};
    for (int j = 0; j < H; ++j) {
        g[kB2 + j] += dpre2[j];
        for (int i = 0; i < H; ++i) {
            g[kW2 + j * H + i] += dpre2[j] * t.hid1[i];
            dhid1[i] += p[kW2 + j * H + i] * dpre2[j];
        }
    }
    std::array<double, H> dpre1;
    for (int j = 0; j < H; ++j) dpre1[j] = dhid1[j] * activate_grad(act, t.pre1[j], t.hid1[j]);
    for (int j = 0; j < H; ++j) {
        g[kB1 + j] += dpre1[j];
        for (int i = 0; i < In; ++i) g[kW1 + j * In + i] += dpre1[j] * t.input[i];
    }
}

std::vector<double> gradients(const NeuralPolicy& policy, const LabeledSample* batch,
                              std::size_t batch_size, double l2,
                              const std::array<double, 2>& class_weights) {
    if (batch_size == 0) throw std::invalid_argument("gradients: empty batch");
    constexpr int H = NeuralPolicy::kHidden;
    constexpr int In = NeuralPolicy::kInput;
    constexpr int Out = NeuralPolicy::kOutput;
    const auto& p = policy.parameters();
    std::vector<double> g(NeuralPolicy::kParamCount, 0.0);

    for (std::size_t n = 0; n < batch_size; ++n) {
        const auto& sample = batch[n];
        const auto t = policy.forward(sample.features);
        const int label = sample.label == Action::wait ? 0 : 1;
        const double w = class_weights[label] / static_cast<double>(batch_size);

        std::array<double, Out> dlogits;
        for (int o = 0; o < Out; ++o) dlogits[o] = w * (t.probs[o] - (o == label ? 1.0 : 0.0));
        accumulate_logit_gradient(policy, t, dlogits, g);
    }

    if (l2 != 0.0) {
        auto add_l2 = [&](int offset, int count) {
            for (int i = 0; i < count; ++i) g[offset + i] += 2.0 * l2 * p[offset + i];
        };
        add_l2(kW1, H * In);
        add_l2(kW2, H * H);
        add_l2(kW3, Out * H);
    }
    return g;
}

double supervised_loss(const NeuralPolicy& policy, const LabeledDataset& data, double l2,
                       const std::array<double, 2>& class_weights) {
    if (data.empty()) throw std::invalid_argument("supervised_loss: empty dataset");
    double loss = 0.0;
    for (const auto& s : data) {
        const auto t = policy.forward(s.features);
        const int label = s.label == Action::wait ? 0 : 1;
        loss += -class_weights[label] * std::log(std::max(t.probs[label], 1e-300));
    }
    loss /= static_cast<double>(data.size());
    if (l2 != 0.0) {
        const auto& p = policy.parameters();
        double sq = 0.0;
        auto add = [&](int offset, int count) {
            for (int i = 0; i < count; ++i) sq += p[offset + i] * p[offset + i];
        };
        add(kW1, NeuralPolicy::kHidden * NeuralPolicy::kInput);
        add(kW2, NeuralPolicy::kHidden * NeuralPolicy::kHidden);
        add(kW3, NeuralPolicy::kOutput * NeuralPolicy::kHidden);
        loss += l2 * sq;
    }
    return loss;
}

TrainReport train_supervised(NeuralPolicy& policy, const LabeledDataset& data,
                             const SupervisedConfig& cfg) {
    if (data.empty()) throw std::invalid_argument("train_supervised: empty dataset");
    if (!(cfg.learning_rate > 0.0) || cfg.epochs < 1 || cfg.batch_size < 1)
        throw std::invalid_argument("train_supervised: bad configuration");
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    TrainReport report;
    std::vector<LabeledSample> batch;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            batch.clear();
            for (std::size_t i = start; i < end; ++i) batch.push_back(data[order[i]]);
            const auto g = gradients(policy, batch.data(), batch.size(), cfg.l2,
                                     cfg.class_weights);
            auto& params = policy.parameters();
            for (int i = 0; i < NeuralPolicy::kParamCount; ++i)
                params[i] -= cfg.learning_rate * g[i];
        }
        const double loss = supervised_loss(policy, data, cfg.l2, cfg.class_weights);
        if (!std::isfinite(loss))
            throw std::runtime_error("train_supervised: objective diverged (epoch " +
                                     std::to_string(epoch) + ", loss not finite)");
        report.loss_trace.push_back(loss);
    }
    report.final_loss = report.loss_trace.back();

    int correct = 0;
    for (const auto& s : data) {
        const auto pr = policy.probabilities(s.features);
        const Action a = pr[1] > pr[0] ? Action::stop : Action::wait;
        if (a == s.label) ++correct;
    }
    report.final_accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    return report;
}

Action NeuralAgent::decide(const SystemState& s, const StepContext& ctx) {
    const auto f = featurize(s, ctx.stats, *ctx.cost_model, policy_->scaling());
    const ActionMask mask = available_actions(s, *ctx.cost_model);
    return greedy_ ? policy_->act_greedy(f, mask) : policy_->act(f, mask, *ctx.rng);
}

}  // namespace restop

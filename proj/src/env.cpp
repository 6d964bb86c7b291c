#include "restop/env.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

namespace restop {

// ─── Window sampling ─────────────────────────────────────────────────────

OrderSequence slice_window(const OrderSequence& seq, double from, double duration) {
    if (!(from >= 0.0)) throw std::invalid_argument("slice_window: negative start");
    if (!(duration > 0.0)) throw std::invalid_argument("slice_window: duration must be > 0");
    if (from + duration > seq.window * (1.0 + 1e-12) + 1e-9)
        throw std::invalid_argument("slice_window: window extends past the recorded horizon");

    OrderSequence out;
    out.window = duration;
    out.destination_id = seq.destination_id;
    out.max_fee = seq.max_fee;

    const double to = from + duration;
    double t = 0.0;
    double last_kept = from;  // slice times restart at the slice start
    for (const auto& p : seq.points) {
        t += p.inter_arrival;
        if (t <= from) continue;
        if (t > to) break;
        out.points.push_back({p.weight, t - last_kept});
        last_kept = t;
    }
    return out;
}

/// 53-bit uniform in [0, 1); deterministic across platforms.
static double unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

OrderSequence sample_window(const std::vector<OrderSequence>& gamma, double duration,
                            std::mt19937_64& rng) {
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < gamma.size(); ++i)
        if (gamma[i].window >= duration) eligible.push_back(i);
    if (eligible.empty())
        throw std::invalid_argument("sample_window: no sequence long enough for the window");

    const std::size_t pick = std::min<std::size_t>(
        static_cast<std::size_t>(unit(rng) * static_cast<double>(eligible.size())),
        eligible.size() - 1);
    const OrderSequence& seq = gamma[eligible[pick]];
    const double slack = seq.window - duration;
    const double start = slack > 0.0 ? unit(rng) * slack : 0.0;
    return slice_window(seq, start, duration);
}

// ─── Episode replay ──────────────────────────────────────────────────────

std::vector<EpisodeTransition> run_episode(StoppingPolicy& policy, const OrderSequence& window,
                                           const CostModel& cm, std::mt19937_64& rng,
                                           const FeatureScaling* scaling) {
    std::vector<EpisodeTransition> episode;
    episode.reserve(window.points.size());

    SystemState s;  // regeneration state at clock 0
    EpisodeStats stats;
    policy.begin_episode(window, cm);

    int step = 0;
    for (const auto& p : window.points) {
        EpisodeTransition tr;
        tr.state = s;
        tr.t = s.clock;
        if (scaling != nullptr) tr.features = featurize(s, stats, cm, *scaling);

        ActionMask mask = available_actions(s, cm);
        tr.forced = mask.forced();
        if (tr.forced) {
            tr.action = mask.forced_action();
        } else {
            StepContext ctx;
            ctx.step = step;
            ctx.clock = s.clock;
            ctx.stats = stats;
            ctx.sequence = &window;
            ctx.cost_model = &cm;
            ctx.rng = &rng;
            tr.action = policy.decide(s, ctx);
            if (!mask.allows(tr.action))
                throw std::logic_error(std::string("run_episode: policy '") + policy.name() +
                                       "' returned a masked action");
        }

        // Negated step cost: waiting charges the holding rate over the
        // inter-arrival gap; stopping pays the fee and restarts the rate
        // from the regeneration state (which holds nothing).
        if (tr.action == Action::wait)
            tr.reward = -wait_cost_rate(s, cm) * p.inter_arrival;
        else
            tr.reward = -stop_cost(s, cm);

        s = transition(s, p, tr.action, cm);
        tr.next_state = s;
        tr.t_next = s.clock;
        episode.push_back(tr);

        stats.observe(p);
        policy.observe(p);
        ++step;
    }
    return episode;
}

std::vector<EpisodeTransition> get_episode(StoppingPolicy& policy, const EnvConfig& cfg,
                                           std::mt19937_64& rng) {
    if (cfg.dataset == nullptr) throw std::invalid_argument("get_episode: null dataset");
    OrderSequence window = sample_window(*cfg.dataset, cfg.episode_window, rng);
    return run_episode(policy, window, cfg.cost_model, rng);
}

double episode_return(const std::vector<EpisodeTransition>& episode) {
    double g = 0.0;
    for (const auto& tr : episode) g += tr.reward;
    return g;
}

// ─── Transition log ──────────────────────────────────────────────────────

static std::string fmt(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_transition_log(std::ostream& out, const EnvConfig& cfg,
                          const std::vector<std::vector<EpisodeTransition>>& episodes) {
    out << "#restop transitions v1\n";
    out << "episode_window " << fmt(cfg.episode_window) << " alpha " << fmt(cfg.cost_model.alpha)
        << " capacity " << fmt(cfg.cost_model.capacity) << " max_items "
        << cfg.cost_model.max_items << " dataset_size "
        << (cfg.dataset != nullptr ? cfg.dataset->size() : 0) << " seed " << cfg.seed << "\n";
    out << "episodes " << episodes.size() << "\n";
    for (std::size_t e = 0; e < episodes.size(); ++e) {
        out << "episode " << e << " transitions " << episodes[e].size() << "\n";
        for (const auto& tr : episodes[e]) {
            out << fmt(tr.state.load) << ' ' << tr.state.item_count << ' '
                << fmt(tr.state.total_delay) << ' ' << fmt(tr.t) << ' '
                << (tr.action == Action::wait ? 'W' : 'S') << ' ' << fmt(tr.reward) << ' '
                << fmt(tr.next_state.load) << ' ' << tr.next_state.item_count << ' '
                << fmt(tr.next_state.total_delay) << ' ' << fmt(tr.t_next) << ' '
                << (tr.forced ? 1 : 0) << "\n";
        }
    }
}

// ─── Policy-gradient training ────────────────────────────────────────────

namespace {

struct Eligible {
    const OrderSequence* seq;
    const CostModel* cm;
};

void check_finite(const std::vector<double>& v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x))
            throw std::runtime_error(std::string("train_policy_gradient: non-finite ") + what);
}

}  // namespace

PgReport train_policy_gradient(NeuralPolicy& policy, const std::vector<TrainingCity>& corpus,
                               const PgConfig& cfg) {
    if (cfg.episodes <= 0) throw std::invalid_argument("train_policy_gradient: episodes <= 0");
    if (cfg.batch <= 0) throw std::invalid_argument("train_policy_gradient: batch <= 0");
    if (!(cfg.episode_window > 0.0))
        throw std::invalid_argument("train_policy_gradient: episode window must be > 0");

    std::vector<Eligible> eligible;
    for (const auto& city : corpus)
        if (city.sequence.window >= cfg.episode_window)
            eligible.push_back({&city.sequence, &city.cost_model});
    if (eligible.empty())
        throw std::invalid_argument("train_policy_gradient: no sequence fits the episode window");

    std::mt19937_64 rng(cfg.seed);
    NeuralAgent agent(policy, /*greedy=*/false);

    PgReport report;
    auto& params = policy.parameters();

    int remaining = cfg.episodes;
    while (remaining > 0) {
        const int batch = std::min(cfg.batch, remaining);
        std::vector<std::vector<EpisodeTransition>> episodes;
        std::vector<double> returns;
        episodes.reserve(batch);
        returns.reserve(batch);

        for (int b = 0; b < batch; ++b) {
            const std::size_t pick = std::min<std::size_t>(
                static_cast<std::size_t>(unit(rng) * static_cast<double>(eligible.size())),
                eligible.size() - 1);
            const auto& slot = eligible[pick];
            const double slack = slot.seq->window - cfg.episode_window;
            const double start = slack > 0.0 ? unit(rng) * slack : 0.0;
            OrderSequence window = slice_window(*slot.seq, start, cfg.episode_window);
            auto episode = run_episode(agent, window, *slot.cm, rng, &policy.scaling());
            returns.push_back(episode_return(episode));
            episodes.push_back(std::move(episode));
        }

        double baseline = 0.0;
        if (cfg.mean_baseline) {
            for (double g : returns) baseline += g;
            baseline /= static_cast<double>(returns.size());
        }

        // Likelihood-ratio estimate: mean over episodes of
        // (G - b) * sum over free decisions of grad log pi(a | s).
        std::vector<double> grad(NeuralPolicy::kParamCount, 0.0);
        for (std::size_t e = 0; e < episodes.size(); ++e) {
            const double adv = returns[e] - baseline;
            if (adv == 0.0) continue;
            const double scale = adv / static_cast<double>(episodes.size());
            for (const auto& tr : episodes[e]) {
                if (tr.forced) continue;
                const auto trace = policy.forward(tr.features);
                const int a = tr.action == Action::wait ? 0 : 1;
                std::array<double, 2> dlogits;
                for (int o = 0; o < 2; ++o)
                    dlogits[o] = scale * ((o == a ? 1.0 : 0.0) - trace.probs[o]);
                accumulate_logit_gradient(policy, trace, dlogits, grad);
            }
        }
        check_finite(grad, "gradient");

        if (cfg.step_size != 0.0) {
            for (std::size_t i = 0; i < params.size(); ++i)
                params[i] += cfg.step_size * grad[i];
            check_finite(params, "parameters");
        }

        double mean_return = 0.0;
        for (double g : returns) mean_return += g;
        report.return_trace.push_back(mean_return / static_cast<double>(returns.size()));
        report.episodes_run += batch;
        remaining -= batch;
    }
    return report;
}

PgReport train_policy_gradient(NeuralPolicy& policy, const EnvConfig& env, const PgConfig& cfg) {
    if (env.dataset == nullptr)
        throw std::invalid_argument("train_policy_gradient: null dataset");
    std::vector<TrainingCity> corpus;
    corpus.reserve(env.dataset->size());
    for (const auto& seq : *env.dataset) corpus.push_back({seq, env.cost_model});
    PgConfig local = cfg;
    if (!(local.episode_window > 0.0)) local.episode_window = env.episode_window;
    return train_policy_gradient(policy, corpus, local);
}

}  // namespace restop

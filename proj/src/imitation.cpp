#include "restop/imitation.hpp"

#include <algorithm>
#include <limits>
#include <optional>
#include <stdexcept>

#include "restop/simulate.hpp"

namespace restop {

namespace {

/// 53-bit uniform in [0, 1); deterministic across platforms.
double unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return base ^ (0x9E3779B97F4A7C15ULL * (stream + 1));
}

struct SampledWindow {
    std::size_t corpus_index = 0;
    double start = 0.0;
    OrderSequence window;
};

SampledWindow pick_window(const std::vector<TrainingCity>& corpus,
                          const std::vector<std::size_t>& eligible, double duration,
                          std::mt19937_64& rng) {
    const std::size_t pick = std::min<std::size_t>(
        static_cast<std::size_t>(unit(rng) * static_cast<double>(eligible.size())),
        eligible.size() - 1);
    const std::size_t idx = eligible[pick];
    const OrderSequence& seq = corpus[idx].sequence;
    const double slack = seq.window - duration;
    const double start = slack > 0.0 ? unit(rng) * slack : 0.0;
    return {idx, start, slice_window(seq, start, duration)};
}

}  // namespace

std::array<double, 2> inverse_frequency_weights(const LabeledDataset& data) {
    double counts[2] = {0.0, 0.0};
    for (const auto& s : data) counts[s.label == Action::wait ? 0 : 1] += 1.0;
    const double total = counts[0] + counts[1];
    std::array<double, 2> w{1.0, 1.0};
    // Capped so a class with a handful of samples cannot dominate the
    // objective outright.
    for (int a = 0; a < 2; ++a)
        if (counts[a] > 0.0) w[a] = std::min(10.0, total / (2.0 * counts[a]));
    return w;
}

ImitationResult imitate_expert(const std::vector<TrainingCity>& corpus,
                               const ImitationConfig& cfg) {
    if (cfg.outer_iterations <= 0)
        throw std::invalid_argument("imitate_expert: outer_iterations <= 0");
    if (cfg.windows_per_iteration <= 0)
        throw std::invalid_argument("imitate_expert: windows_per_iteration <= 0");
    if (!(cfg.episode_window > 0.0))
        throw std::invalid_argument("imitate_expert: episode window must be > 0");
    cfg.scaling.validate();

    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < corpus.size(); ++i)
        if (corpus[i].sequence.window >= cfg.episode_window) eligible.push_back(i);
    if (eligible.empty())
        throw std::invalid_argument("imitate_expert: no sequence fits the episode window");

    std::mt19937_64 rng(cfg.seed);
    std::mt19937_64 rng_val(derive_seed(cfg.seed, 0xDA));

    // Held-out windows are fixed up front so every iteration is scored on
    // the same footing.
    std::vector<SampledWindow> validation;
    validation.reserve(static_cast<std::size_t>(std::max(cfg.validation_windows, 0)));
    for (int i = 0; i < cfg.validation_windows; ++i)
        validation.push_back(pick_window(corpus, eligible, cfg.episode_window, rng_val));

    ImitationResult result{
        NeuralPolicy(cfg.activation, cfg.scaling, derive_seed(cfg.seed, 1)),
        NeuralPolicy(cfg.activation, cfg.scaling, derive_seed(cfg.seed, 1)),
        0,
        {},
        {},
        {}};

    std::optional<NeuralPolicy> current;  // learner from the previous round
    std::optional<NeuralPolicy> best;
    double best_cost = std::numeric_limits<double>::infinity();
    int best_iteration = 0;

    for (int iter = 1; iter <= cfg.outer_iterations; ++iter) {
        for (int w = 0; w < cfg.windows_per_iteration; ++w) {
            SampledWindow sw = pick_window(corpus, eligible, cfg.episode_window, rng);
            const CostModel& cm = corpus[sw.corpus_index].cost_model;
            const HindsightResult hs = hindsight(sw.window, cfg.episode_window, cm);
            const int m = static_cast<int>(sw.window.points.size());

            WindowRecord record;
            record.iteration = iter;
            record.corpus_index = sw.corpus_index;
            record.window_start = sw.start;

            SystemState s;
            EpisodeStats stats;
            for (int j = 0; j <= m; ++j) {
                const Action label = hs.expert_action(j, s);
                const ActionMask mask = available_actions(s, cm);
                result.dataset.push_back({featurize(s, stats, cm, cfg.scaling), label});

                Action taken = label;
                if (j < m) {
                    if (mask.forced()) {
                        taken = mask.forced_action();
                    } else if (iter > 1) {
                        // Later rounds follow the learner so the labels
                        // cover the states it actually visits.
                        taken = current->act(featurize(s, stats, cm, cfg.scaling), mask, rng);
                    }
                    record.labels.push_back({j, s, label, taken, mask.forced()});
                    s = transition(s, sw.window.points[static_cast<std::size_t>(j)], taken, cm);
                    stats.observe(sw.window.points[static_cast<std::size_t>(j)]);
                } else {
                    record.labels.push_back({j, s, label, label, mask.forced()});
                }
            }
            result.windows.push_back(std::move(record));
        }

        // Fresh initialization every round: the aggregated set, not the
        // previous weights, carries the learning signal.
        NeuralPolicy trained(cfg.activation, cfg.scaling, derive_seed(cfg.seed, 1));
        SupervisedConfig tcfg = cfg.train;
        tcfg.seed = derive_seed(cfg.seed, 0x100 + static_cast<std::uint64_t>(iter));
        if (cfg.inverse_frequency_weights)
            tcfg.class_weights = inverse_frequency_weights(result.dataset);
        const TrainReport report = train_supervised(trained, result.dataset, tcfg);

        IterationDiagnostics diag;
        diag.dataset_size = result.dataset.size();
        diag.label_agreement = report.final_accuracy;
        diag.train_loss = report.final_loss;
        if (!validation.empty()) {
            double total = 0.0;
            for (const auto& vw : validation) {
                NeuralAgent agent(trained, /*greedy=*/true);
                total += simulate(agent, vw.window, cfg.episode_window,
                                  corpus[vw.corpus_index].cost_model)
                             .breakdown.total_cost;
            }
            diag.validation_cost = total / static_cast<double>(validation.size());
            if (diag.validation_cost < best_cost) {
                best_cost = diag.validation_cost;
                best = trained;
                best_iteration = iter;
            }
        }
        result.iterations.push_back(diag);
        current = std::move(trained);
    }

    result.final_policy = *current;
    if (best.has_value()) {
        result.policy = *best;
        result.best_iteration = best_iteration;
    } else {
        result.policy = *current;
        result.best_iteration = cfg.outer_iterations;
    }
    return result;
}

ImitationResult imitate_expert(const std::vector<OrderSequence>& gamma, const CostModel& cm,
                               const ImitationConfig& cfg) {
    std::vector<TrainingCity> corpus;
    corpus.reserve(gamma.size());
    for (const auto& seq : gamma) corpus.push_back({seq, cm});
    return imitate_expert(corpus, cfg);
}

}  // namespace restop

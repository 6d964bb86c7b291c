#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "restop/imitation.hpp"
#include "restop/simulate.hpp"

using namespace restop;

namespace {

/// One 1000 kg order per day with a flat fee: two-item cycles are optimal,
/// so a learner that beats ship-immediately must have picked up waiting.
struct ToyCorpus {
    CostModel cm{5.0, FeeCurve({{0.0, 10.0}}), 1e6, 1000};
    std::vector<OrderSequence> gamma;
    ToyCorpus() {
        GeneratorSpec spec;
        spec.weights = WeightLaw::make_discrete({1000.0}, {1.0});
        spec.inter_arrival = InterArrivalLaw::make_deterministic(1.0);
        for (std::uint64_t seed : {99, 100, 101}) {
            OrderSequence seq = generate(spec, 200.0, seed);
            seq.max_fee = cm.fee_curve.full_truck_fee();
            gamma.push_back(seq);
        }
    }
};

FeatureScaling toy_scaling() {
    FeatureScaling sc;
    sc.load_scale = 2000.0;
    sc.items_scale = 2.0;
    sc.delay_scale = 2.0;
    sc.fee_scale = 10.0;
    sc.tau_scale = 1.0;
    sc.weight_scale = 1000.0;
    sc.tau_prior = 1.0;
    sc.weight_prior = 1000.0;
    return sc;
}

ImitationConfig toy_config() {
    ImitationConfig cfg;
    cfg.outer_iterations = 2;
    cfg.windows_per_iteration = 25;
    cfg.episode_window = 6.0;
    cfg.train.learning_rate = 0.1;
    cfg.train.epochs = 60;
    cfg.train.batch_size = 32;
    cfg.train.l2 = 1e-4;
    cfg.seed = 11;
    cfg.validation_windows = 12;
    cfg.scaling = toy_scaling();
    return cfg;
}

LabeledDataset labels_of(int waits, int stops) {
    LabeledDataset data;
    for (int i = 0; i < waits; ++i) data.push_back({PolicyFeatures{}, Action::wait});
    for (int i = 0; i < stops; ++i) data.push_back({PolicyFeatures{}, Action::stop});
    return data;
}

}  // namespace

TEST_CASE("inverse-frequency weights rebalance and are capped") {
    const auto balanced = inverse_frequency_weights(labels_of(10, 10));
    CHECK(balanced[0] == 1.0);
    CHECK(balanced[1] == 1.0);

    const auto skewed = inverse_frequency_weights(labels_of(30, 10));
    CHECK(skewed[0] == doctest::Approx(2.0 / 3.0));
    CHECK(skewed[1] == doctest::Approx(2.0));

    const auto rare = inverse_frequency_weights(labels_of(100, 1));
    CHECK(rare[1] == 10.0);  // 101 / 2 would swamp the objective
    CHECK(rare[0] == doctest::Approx(101.0 / 200.0));

    const auto missing = inverse_frequency_weights(labels_of(8, 0));
    CHECK(missing[0] == 0.5);
    CHECK(missing[1] == 1.0);  // absent class keeps the neutral weight

    const auto empty = inverse_frequency_weights({});
    CHECK(empty[0] == 1.0);
    CHECK(empty[1] == 1.0);
}

TEST_CASE("expert imitation aggregates labels and audits every rollout") {
    const ToyCorpus toy;
    const ImitationConfig cfg = toy_config();
    const ImitationResult result = imitate_expert(toy.gamma, toy.cm, cfg);

    REQUIRE(result.iterations.size() == static_cast<std::size_t>(cfg.outer_iterations));
    REQUIRE(result.windows.size() ==
            static_cast<std::size_t>(cfg.outer_iterations * cfg.windows_per_iteration));

    SUBCASE("the dataset grows by one label per decision epoch") {
        std::size_t running = 0;
        std::size_t window_idx = 0;
        for (int iter = 1; iter <= cfg.outer_iterations; ++iter) {
            for (int w = 0; w < cfg.windows_per_iteration; ++w, ++window_idx) {
                const WindowRecord& wr = result.windows[window_idx];
                CHECK(wr.iteration == iter);
                running += wr.labels.size();
            }
            CHECK(result.iterations[static_cast<std::size_t>(iter - 1)].dataset_size ==
                  running);
        }
        CHECK(result.dataset.size() == running);
    }

    SUBCASE("rollout audits record steps, forcing, and expert agreement") {
        for (const auto& wr : result.windows) {
            REQUIRE(!wr.labels.empty());
            CHECK(wr.labels.front().forced);  // nothing is held at the first epoch
            CHECK(wr.labels.front().label == Action::wait);
            CHECK(wr.window_start >= 0.0);
            CHECK(wr.corpus_index < toy.gamma.size());
            for (std::size_t j = 0; j < wr.labels.size(); ++j) {
                CHECK(wr.labels[j].step == static_cast<int>(j));
                // The first round rolls out the expert itself.
                if (wr.iteration == 1 && !wr.labels[j].forced)
                    CHECK(wr.labels[j].taken == wr.labels[j].label);
            }
        }
    }

    SUBCASE("diagnostics are within range and pick the best round") {
        double best_seen = std::numeric_limits<double>::infinity();
        for (const auto& diag : result.iterations) {
            CHECK(diag.label_agreement >= 0.0);
            CHECK(diag.label_agreement <= 1.0);
            CHECK(std::isfinite(diag.validation_cost));
            CHECK(std::isfinite(diag.train_loss));
            best_seen = std::min(best_seen, diag.validation_cost);
        }
        REQUIRE(result.best_iteration >= 1);
        REQUIRE(result.best_iteration <= cfg.outer_iterations);
        CHECK(result.iterations[static_cast<std::size_t>(result.best_iteration - 1)]
                  .validation_cost == best_seen);
    }
}

TEST_CASE("the imitated policy beats shipping immediately on the toy stream") {
    const ToyCorpus toy;
    const ImitationResult result = imitate_expert(toy.gamma, toy.cm, toy_config());

    NeuralAgent learner(result.policy, /*greedy=*/true);
    const double il_cost =
        simulate(learner, toy.gamma[0], toy.gamma[0].window, toy.cm).breakdown.total_cost;
    AlwaysStopPolicy ship;
    const double ship_cost =
        simulate(ship, toy.gamma[0], toy.gamma[0].window, toy.cm).breakdown.total_cost;

    CHECK(il_cost <= 0.95 * ship_cost);
}

TEST_CASE("imitation runs are reproducible and overloads agree") {
    const ToyCorpus toy;
    ImitationConfig cfg = toy_config();
    cfg.outer_iterations = 1;
    cfg.windows_per_iteration = 8;
    cfg.train.epochs = 15;
    cfg.validation_windows = 4;

    const ImitationResult a = imitate_expert(toy.gamma, toy.cm, cfg);
    const ImitationResult b = imitate_expert(toy.gamma, toy.cm, cfg);
    CHECK(a.final_policy.parameters() == b.final_policy.parameters());
    CHECK(a.dataset.size() == b.dataset.size());
    CHECK(a.best_iteration == b.best_iteration);

    std::vector<TrainingCity> corpus;
    for (const auto& seq : toy.gamma) corpus.push_back({seq, toy.cm});
    const ImitationResult c = imitate_expert(corpus, cfg);
    CHECK(c.final_policy.parameters() == a.final_policy.parameters());
}

TEST_CASE("imitation without held-out windows falls back to the last round") {
    const ToyCorpus toy;
    ImitationConfig cfg = toy_config();
    cfg.outer_iterations = 2;
    cfg.windows_per_iteration = 4;
    cfg.train.epochs = 10;
    cfg.validation_windows = 0;

    const ImitationResult result = imitate_expert(toy.gamma, toy.cm, cfg);
    CHECK(result.best_iteration == cfg.outer_iterations);
    CHECK(result.policy.parameters() == result.final_policy.parameters());
    for (const auto& diag : result.iterations) CHECK(diag.validation_cost == 0.0);
}

TEST_CASE("imitation configurations are validated") {
    const ToyCorpus toy;
    const ImitationConfig good = toy_config();

    ImitationConfig bad = good;
    bad.outer_iterations = 0;
    CHECK_THROWS_AS(imitate_expert(toy.gamma, toy.cm, bad), std::invalid_argument);
    bad = good;
    bad.windows_per_iteration = 0;
    CHECK_THROWS_AS(imitate_expert(toy.gamma, toy.cm, bad), std::invalid_argument);
    bad = good;
    bad.episode_window = 0.0;
    CHECK_THROWS_AS(imitate_expert(toy.gamma, toy.cm, bad), std::invalid_argument);
    bad = good;
    bad.episode_window = 1e6;
    CHECK_THROWS_AS(imitate_expert(toy.gamma, toy.cm, bad), std::invalid_argument);
    bad = good;
    bad.scaling.load_scale = 0.0;
    CHECK_THROWS_AS(imitate_expert(toy.gamma, toy.cm, bad), std::invalid_argument);
}

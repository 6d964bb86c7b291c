#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "restop/bench.hpp"

namespace {

using namespace restop;

struct CommonArgs {
    std::string preset_name = "default";
    std::string config_path;
    std::string out_dir = "run";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int jobs = 1;
    std::vector<double> alphas;
    std::vector<std::string> approach_names;
    int seeds = -1;
};

BenchmarkConfig resolve_config(const CommonArgs& args) {
    BenchmarkConfig config =
        args.config_path.empty() ? preset(args.preset_name) : BenchmarkConfig::load(args.config_path);
    if (args.seed_set) config.base_seed = args.seed;
    return config;
}

std::string alpha_tag(double alpha) {
    std::ostringstream ss;
    ss << alpha;
    std::string s = ss.str();
    for (char& c : s)
        if (c == '.') c = 'p';
    return s;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--preset", args.preset_name, "Built-in config: tiny, stationary, default")
        ->check(CLI::IsMember(preset_names()));
    cmd->add_option("--config", args.config_path, "Path to a benchmark config JSON")
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", args.out_dir, "Run directory for artifacts");
    cmd->add_option("--seed", args.seed, "Base evaluation seed")
        ->each([&args](const std::string&) { args.seed_set = true; });
}

int run_generate(const CommonArgs& args) {
    const BenchmarkConfig config = resolve_config(args);
    init_run_dir(args.out_dir, config);
    std::filesystem::create_directories(args.out_dir + "/sequences");

    std::vector<std::string> artifacts{"config.json"};
    const auto cities = generate_cities(config, config.base_seed);
    for (const auto& city : cities) {
        const std::string rel = "sequences/" + city.name + ".txt";
        save_sequences_file(args.out_dir + "/" + rel, {city.full});
        artifacts.push_back(rel);
        std::cout << city.name << ": " << city.full.points.size() << " orders over "
                  << config.horizon_days << " days -> " << args.out_dir << "/" << rel << "\n";
    }
    write_manifest(args.out_dir, "generate", config, artifacts);
    return 0;
}

int run_train(const CommonArgs& args) {
    const BenchmarkConfig config = resolve_config(args);
    init_run_dir(args.out_dir, config);
    std::filesystem::create_directories(args.out_dir + "/policies");
    const std::vector<double> alphas = args.alphas.empty() ? config.alphas : args.alphas;

    std::vector<std::string> artifacts{"config.json"};
    const auto cities = generate_cities(config, config.base_seed);
    for (double alpha : alphas) {
        const TrainedPolicies trained =
            train_policies(config, cities, alpha, config.base_seed, true, true);
        const std::string tag = alpha_tag(alpha);

        const std::string il_rel = "policies/imitation_alpha_" + tag + ".json";
        trained.imitation->save(args.out_dir + "/" + il_rel);
        artifacts.push_back(il_rel);

        const std::string pg_rel = "policies/policy_gradient_alpha_" + tag + ".json";
        trained.policy_gradient->save(args.out_dir + "/" + pg_rel);
        artifacts.push_back(pg_rel);

        const std::string labels_rel = "policies/imitation_alpha_" + tag + "_labels.csv";
        save_dataset_csv(args.out_dir + "/" + labels_rel, trained.imitation_detail->dataset);
        artifacts.push_back(labels_rel);

        const std::string diag_rel = "policies/imitation_alpha_" + tag + "_iterations.csv";
        std::ostringstream diag;
        diag << "iteration,dataset_size,label_agreement,validation_cost,train_loss\n";
        diag.precision(17);
        const auto& iters = trained.imitation_detail->iterations;
        for (std::size_t i = 0; i < iters.size(); ++i)
            diag << (i + 1) << ',' << iters[i].dataset_size << ',' << iters[i].label_agreement
                 << ',' << iters[i].validation_cost << ',' << iters[i].train_loss << "\n";
        write_text_file(args.out_dir + "/" + diag_rel, diag.str());
        artifacts.push_back(diag_rel);

        std::cout << "alpha " << alpha << ": " << trained.imitation_detail->dataset.size()
                  << " labels, best iteration " << trained.imitation_detail->best_iteration
                  << ", policies in " << args.out_dir << "/policies/\n";
    }
    write_manifest(args.out_dir, "train", config, artifacts);
    return 0;
}

int run_evaluate(const CommonArgs& args, bool everything) {
    const BenchmarkConfig config = resolve_config(args);
    init_run_dir(args.out_dir, config);

    RunOptions options;
    options.alphas = args.alphas;
    options.seeds = args.seeds;
    options.jobs = args.jobs;
    for (const auto& name : args.approach_names)
        options.approaches.push_back(approach_from_string(name));

    std::vector<std::string> artifacts{"config.json"};
    const auto rows = run_benchmark(config, options);
    write_text_file(args.out_dir + "/results.csv", results_csv(rows));
    artifacts.push_back("results.csv");
    std::cout << rows.size() << " result rows -> " << args.out_dir << "/results.csv\n";

    if (everything) {
        std::filesystem::create_directories(args.out_dir + "/sequences");
        const auto cities = generate_cities(config, config.base_seed);
        for (const auto& city : cities) {
            const std::string rel = "sequences/" + city.name + ".txt";
            save_sequences_file(args.out_dir + "/" + rel, {city.full});
            artifacts.push_back(rel);
        }
    }
    write_manifest(args.out_dir, everything ? "sweep" : "evaluate", config, artifacts);
    return 0;
}

int run_policy_grid(const CommonArgs& args, const std::string& city_name, bool skip_neural) {
    const BenchmarkConfig config = resolve_config(args);
    init_run_dir(args.out_dir, config);
    std::filesystem::create_directories(args.out_dir + "/grids");

    std::size_t idx = 0;
    if (!city_name.empty()) {
        idx = config.cities.size();
        for (std::size_t i = 0; i < config.cities.size(); ++i)
            if (config.cities[i].name == city_name) idx = i;
        if (idx == config.cities.size())
            throw CLI::ValidationError("--city", "no city named '" + city_name + "'");
    }

    std::vector<std::string> artifacts{"config.json"};
    const auto cities = generate_cities(config, config.base_seed);
    const auto& city = cities[idx];

    const auto ladder = solve_policy_ladder(config, city, config.cities[idx], config.base_seed);
    for (const auto& [alpha, solution] : ladder) {
        const std::string rel = "grids/model_based_" + city.name + "_alpha_" + alpha_tag(alpha) +
                                ".csv";
        std::ofstream out(args.out_dir + "/" + rel);
        solution.policy.write_heatmap_csv(out);
        artifacts.push_back(rel);
        std::cout << "alpha " << alpha << ": long-run average " << solution.nu_star << " -> "
                  << rel << "\n";
    }

    if (!skip_neural) {
        const std::vector<double> alphas = args.alphas.empty() ? config.alphas : args.alphas;
        const auto edges = ArrivalModel::uniform_edges(config.capacity, config.grid_bins);
        for (double alpha : alphas) {
            const TrainedPolicies trained =
                train_policies(config, cities, alpha, config.base_seed, true, false);
            const CostModel cm = config.cost_model(config.cities[idx], alpha);
            double tau = 0.0, weight = 0.0;
            for (const auto& p : city.train.points) {
                tau += p.inter_arrival;
                weight += p.weight;
            }
            const std::size_t n = city.train.points.size();
            tau = n > 0 ? tau / static_cast<double>(n) : make_scaling(config).tau_prior;
            weight = n > 0 ? weight / static_cast<double>(n) : make_scaling(config).weight_prior;

            const auto fractions = neural_stop_fractions(*trained.imitation, cm, edges,
                                                         config.max_items, tau, weight);
            const std::string rel =
                "grids/imitation_" + city.name + "_alpha_" + alpha_tag(alpha) + ".csv";
            std::ofstream out(args.out_dir + "/" + rel);
            write_stop_fraction_csv(out, edges, fractions);
            artifacts.push_back(rel);
            std::cout << "alpha " << alpha << ": stop-fraction grid -> " << rel << "\n";
        }
    }
    write_manifest(args.out_dir, "policy-grid", config, artifacts);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Shipping-consolidation stopping benchmark"};
    app.require_subcommand(1);

    CommonArgs args;

    auto* gen = app.add_subcommand("generate", "Draw city order sequences and save them");
    add_common(gen, args);

    auto* train = app.add_subcommand("train", "Train imitation and gradient policies");
    add_common(train, args);
    train->add_option("--alpha", args.alphas, "Holding-cost values (default: config ladder)");

    auto* eval = app.add_subcommand("evaluate", "Score approaches on the held-out span");
    add_common(eval, args);
    eval->add_option("--alpha", args.alphas, "Holding-cost values (default: config ladder)");
    eval->add_option("--approaches", args.approach_names,
                     "Subset of approaches (default: all)")
        ->delimiter(',');
    eval->add_option("--seeds", args.seeds, "Number of evaluation seeds (default: config)");
    eval->add_option("--jobs", args.jobs, "Worker threads")->check(CLI::PositiveNumber);

    auto* sweep = app.add_subcommand("sweep", "Full run: evaluate everything and save data");
    add_common(sweep, args);
    sweep->add_option("--alpha", args.alphas, "Holding-cost values (default: config ladder)");
    sweep->add_option("--approaches", args.approach_names,
                      "Subset of approaches (default: all)")
        ->delimiter(',');
    sweep->add_option("--seeds", args.seeds, "Number of evaluation seeds (default: config)");
    sweep->add_option("--jobs", args.jobs, "Worker threads")->check(CLI::PositiveNumber);

    std::string grid_city;
    bool skip_neural = false;
    auto* grid = app.add_subcommand("policy-grid", "Export solver and network policy surfaces");
    add_common(grid, args);
    grid->add_option("--city", grid_city, "City to solve (default: first)");
    grid->add_option("--alpha", args.alphas,
                     "Alphas for the network surfaces (default: config ladder)");
    grid->add_flag("--skip-neural", skip_neural, "Only write the solver grids");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) return run_generate(args);
        if (*train) return run_train(args);
        if (*eval) return run_evaluate(args, false);
        if (*sweep) return run_evaluate(args, true);
        if (*grid) return run_policy_grid(args, grid_city, skip_neural);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

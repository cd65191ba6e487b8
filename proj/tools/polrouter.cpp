// polrouter run <experiment> [--config PATH] [--seed N] [--out DIR] [--analytic] [--format csv|json]

#include <CLI11.hpp>

#include <iostream>

#include "polrouter/polrouter.hpp"

int main(int argc, char** argv) {
    using namespace polrouter;
    CLI::App app{"Polarization-preserving router simulator"};
    app.require_subcommand(1);
    auto* run = app.add_subcommand("run", "run one experiment and write its data files");

    std::string name, config_path, out_dir = "out", format = "csv";
    std::optional<std::uint64_t> seed;
    bool analytic = false;
    std::vector<std::string> names;
    for (const auto& [n, _] : kExperimentNames) names.emplace_back(n);
    run->add_option("experiment", name, "experiment name")->required()->check(CLI::IsMember(names));
    run->add_option("--config", config_path, "TOML configuration file")->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "random seed (overrides run.seed)");
    run->add_option("--out", out_dir, "output directory");
    run->add_flag("--analytic", analytic, "infinite-shot expectations instead of sampled counts");
    run->add_option("--format", format, "table format")->check(CLI::IsMember({"csv", "json"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        ExperimentConfig cfg = config_path.empty() ? ExperimentConfig{} : load_config(config_path);
        if (seed) cfg.run.seed = *seed;
        ExperimentOptions opt;
        opt.out_dir = out_dir;
        opt.analytic = analytic;
        opt.format = format == "json" ? OutputFormat::Json : OutputFormat::Csv;
        const auto res = run_experiment(name, cfg, opt);
        std::cout << res.summary["metrics"].dump(2) << '\n';
        for (const auto& f : res.files) std::cerr << "wrote " << f.string() << '\n';
        return 0;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const ConfigurationError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const AnalysisError& e) {
        std::cerr << "analysis error: " << e.what() << '\n';
        return 1;
    } catch (const DomainError& e) {
        std::cerr << "domain error: " << e.what() << '\n';
        return 1;
    }
}

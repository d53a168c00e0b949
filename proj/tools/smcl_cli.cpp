#include <CLI11.hpp>
#include <functional>
#include <iostream>
#include <map>
#include <optional>

#include "smcl/commands.hpp"
#include "smcl/config.hpp"
#include "smcl/errors.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

}  // namespace

int main(int argc, char** argv) {
    using Command = std::function<void(const smcl::config::RunConfig&)>;
    const std::vector<std::pair<std::string, std::pair<std::string, Command>>> commands = {
        {"train-input", {"Train the GRU input model with its auxiliary head", smcl::commands::train_input}},
        {"extract-features", {"Run the trained input model over the series", smcl::commands::extract_features}},
        {"train-smcl", {"Fit the state-space last layer by SMC score ascent", smcl::commands::train_smcl}},
        {"recursive-mle", {"Stream the training segment through recursive MLE", smcl::commands::recursive_mle}},
        {"forecast", {"Write sampled forecasts and bounds for a few windows", smcl::commands::forecast}},
        {"evaluate", {"RMSE and PICP of the SMC last layer over all windows", smcl::commands::evaluate}},
        {"baseline-hmm", {"Fit and evaluate the linear-Gaussian HMM baseline", smcl::commands::baseline_hmm}},
    };

    CLI::App app{"Decoupled GRU + SMC last-layer forecasting pipeline"};
    app.require_subcommand(1);
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    std::optional<std::string> out;
    app.add_option("--config", config_path, "INI configuration file");
    app.add_option("--seed", seed, "Root seed (overrides [run] seed)");
    app.add_option("--threads", threads, "Worker threads (default: all cores)");
    app.add_option("--out", out, "Output directory (overrides [run] out)");
    std::map<CLI::App*, Command> handlers;
    for (const auto& [name, entry] : commands) handlers[app.add_subcommand(name, entry.first)] = entry.second;

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        smcl::config::RunConfig cfg = config_path.empty() ? smcl::config::RunConfig{} : smcl::config::load(config_path);
        if (seed) cfg.seed = *seed;
        if (threads) cfg.threads = *threads;
        if (out) cfg.out = *out;
        for (auto* sub : app.get_subcommands()) handlers.at(sub)(cfg);
    } catch (const smcl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const smcl::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const smcl::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kExitData;
    }
    return 0;
}

// Command-line front end: solve-short, solve-long, continue, verify and
// oracle-compare, each driven by a sectioned config file.

#include <CLI11.hpp>
#include <iostream>

#include "apfk/harness.hpp"

namespace {

struct SubArgs {
    std::string config;
    std::string out;
};

// The config's [run].mode is overridden by the subcommand chosen.
int dispatch(const std::string& mode, const SubArgs& args) {
    apfk::ConfigFile cfg = apfk::ConfigFile::load(args.config);
    namespace fs = std::filesystem;
    std::string out = !args.out.empty() ? args.out : cfg.get_string("run", "out", "");
    if (mode == "short") return apfk::harness::run_short(cfg, fs::path(out.empty() ? "out" : out));
    if (mode == "long") return apfk::harness::run_long(cfg, fs::path(out.empty() ? "out" : out));
    if (mode == "ladder")
        return apfk::harness::run_ladder_mode(cfg, fs::path(out.empty() ? "out" : out));
    if (mode == "verify")
        return apfk::harness::run_verify(
            cfg, out.empty() ? std::nullopt : std::make_optional(fs::path(out)), std::cout);
    if (mode == "oracle")
        return apfk::harness::run_oracle(cfg, fs::path(out.empty() ? "out" : out), std::cout);
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"spectral solver for quasi-periodic and almost-periodic chain equilibria"};
    app.require_subcommand(1);

    std::map<std::string, std::pair<std::string, std::string>> specs = {
        {"solve-short", {"short", "solve a nearest-neighbour model"}},
        {"solve-long", {"long", "solve a finite-range interaction model"}},
        {"continue", {"ladder", "frequency-by-frequency continuation"}},
        {"verify", {"verify", "Diophantine condition check over the index set"}},
        {"oracle-compare", {"oracle", "cross-check against dense-Newton and chain oracles"}},
    };

    std::map<std::string, SubArgs> args;
    for (auto& [name, spec] : specs) {
        CLI::App* sub = app.add_subcommand(name, spec.second);
        sub->add_option("--config", args[name].config, "config file")->required();
        sub->add_option("--out", args[name].out, "output directory (overrides [run].out)");
    }

    CLI11_PARSE(app, argc, argv);

    for (auto& [name, spec] : specs) {
        if (app.got_subcommand(name)) {
            try {
                return dispatch(spec.first, args[name]);
            } catch (const apfk::error& e) {
                std::cerr << "error: " << e.what() << "\n";
                return 1;
            }
        }
    }
    return 1;
}

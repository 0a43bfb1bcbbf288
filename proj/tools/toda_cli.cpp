#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "toda/cli.hpp"
#include "toda/errors.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Toda lattice Cauchy problem: direct integration and inverse spectral solution"};
    std::string mode, config_path, out_dir;
    std::uint64_t seed = 0;
    app.add_option("mode", mode, "direct | ist | compare | verify")
        ->required()
        ->check(CLI::IsMember({"direct", "ist", "compare", "verify"}));
    app.add_option("--config", config_path, "run configuration file")->required();
    auto* out_opt = app.add_option("--out", out_dir, "output directory (overrides output.dir)");
    auto* seed_opt = app.add_option("--seed", seed, "random seed (overrides run.seed)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        toda::RunConfig config = toda::read_config(config_path, toda::parse_mode(mode));
        if (*out_opt) config.out_dir = out_dir;
        if (*seed_opt) config.seed = seed;
        const int status = toda::run(config, std::cout);
        if (status == 4) std::cerr << "error: tolerance breach\n";
        return status;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return toda::exit_code(e);
    }
}

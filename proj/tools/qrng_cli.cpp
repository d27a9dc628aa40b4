#include "qrng/config.hpp"
#include "qrng/io.hpp"
#include "qrng/pipeline.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>

namespace {

struct Common {
    std::string config_path;
    std::string out_path;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config_path, "YAML configuration file")->required();
    cmd->add_option("--out", c.out_path, "output path")->required();
    cmd->add_option("--seed", c.seed, "override run.seed");
}

qrng::Config load(const Common& c) {
    auto cfg = qrng::load_config(c.config_path);
    if (c.seed) cfg.run.seed = *c.seed;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Phase-noise QRNG simulator and post-processing pipeline"};
    app.require_subcommand(1);

    Common sim_opts, cal_opts, pipe_opts, stab_opts;
    auto* sim = app.add_subcommand("simulate", "simulate an acquisition and write a sample file");
    add_common(sim, sim_opts);
    auto* cal = app.add_subcommand("calibrate", "fringe scan and power sweep; writes the fit and QCNR CSV");
    add_common(cal, cal_opts);
    auto* pipe = app.add_subcommand("pipeline", "calibrate, extract and test; writes a bit file and report");
    add_common(pipe, pipe_opts);
    std::size_t n_bits = 0;
    std::string ascii_path;
    pipe->add_option("--bits", n_bits, "output bits (default n_sequences * seq_len_bits)");
    pipe->add_option("--ascii", ascii_path, "also write the bits as ASCII 0/1 for the reference test suite");
    auto* stab = app.add_subcommand("stability", "drift scenario with and without recalibration");
    add_common(stab, stab_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return qrng::cmd_simulate(load(sim_opts), sim_opts.out_path, std::cout);
        if (cal->parsed()) return qrng::cmd_calibrate(load(cal_opts), cal_opts.out_path, std::cout);
        if (stab->parsed()) return qrng::cmd_stability(load(stab_opts), stab_opts.out_path, std::cout);
        if (pipe->parsed()) {
            const auto cfg = load(pipe_opts);
            if (n_bits == 0) n_bits = cfg.stats.n_sequences * cfg.stats.seq_len_bits;
            const int status = qrng::cmd_pipeline(cfg, n_bits, pipe_opts.out_path, std::cout);
            if (!ascii_path.empty()) {
                std::ifstream in(pipe_opts.out_path, std::ios::binary);
                const auto bits = qrng::read_bits(in);
                std::ofstream out(ascii_path);
                qrng::export_bits_ascii(bits, out);
            }
            return status;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return qrng::kExitValidation;
    }
    return qrng::kExitValidation;
}

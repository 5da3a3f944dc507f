// SPDX-License-Identifier: Apache-2.0
//
// bpga: train, distill, quantize and simulate the one-conv-layer bearing
// fault classifier. See README.md for the pipeline walkthrough.

#include <CLI11.hpp>
#include <iostream>

#include "commands.hpp"

using namespace bpga;

namespace {

struct CommonOpts {
    std::string config_file;
    std::string snr = "";
    cli::RunConfig cfg;

    void attach(CLI::App* app, bool with_training = true) {
        app->add_option("--config", config_file, "flat key=value config file");
        app->add_option("--seed", cfg.seed, "run seed");
        app->add_option("--out", cfg.out_dir, "output directory")->required();
        app->add_option("--num-classes", cfg.num_classes, "number of classes");
        app->add_option("--snr", snr, "SNR in dB, or 'clean'");
        if (with_training) {
            app->add_option("--epochs", cfg.distill.epochs, "student training epochs");
            app->add_option("--batch-size", cfg.distill.batch_size, "mini-batch size");
            app->add_option("--lr", cfg.distill.lr, "base learning rate");
            app->add_option("--T", cfg.distill.T, "distillation temperature");
            app->add_option("--alpha", cfg.distill.alpha, "CE/KD balance");
            app->add_option("--beta", cfg.distill.beta, "target-class weight");
            app->add_option("--gamma", cfg.distill.gamma, "non-target-class weight");
            app->add_option("--teacher-epochs", cfg.teacher.epochs, "teacher training epochs");
            app->add_option("--teacher-batch-size", cfg.teacher.batch_size, "teacher batch size");
            app->add_option("--teacher-lr", cfg.teacher.lr, "teacher learning rate");
        }
    }

    // config file first, then explicit flags override
    cli::RunConfig resolve(CLI::App* app) {
        cli::RunConfig out;
        if (!config_file.empty()) out = cli::load_config(config_file);

        auto overridden = [&](const std::string& name) {
            const auto* opt = app->get_option_no_throw(name);
            return opt && opt->count() > 0;
        };
        if (overridden("--seed")) out.seed = cfg.seed;
        if (overridden("--out")) out.out_dir = cfg.out_dir;
        if (overridden("--num-classes")) out.num_classes = cfg.num_classes;
        if (overridden("--snr")) out.snr_db = cli::parse_snr(snr);
        if (overridden("--epochs")) out.distill.epochs = cfg.distill.epochs;
        if (overridden("--batch-size")) out.distill.batch_size = cfg.distill.batch_size;
        if (overridden("--lr")) out.distill.lr = cfg.distill.lr;
        if (overridden("--T")) out.distill.T = cfg.distill.T;
        if (overridden("--alpha")) out.distill.alpha = cfg.distill.alpha;
        if (overridden("--beta")) out.distill.beta = cfg.distill.beta;
        if (overridden("--gamma")) out.distill.gamma = cfg.distill.gamma;
        if (overridden("--teacher-epochs")) out.teacher.epochs = cfg.teacher.epochs;
        if (overridden("--teacher-batch-size")) out.teacher.batch_size = cfg.teacher.batch_size;
        if (overridden("--teacher-lr")) out.teacher.lr = cfg.teacher.lr;
        if (overridden("--samples-per-class")) out.samples_per_class = cfg.samples_per_class;
        if (overridden("--hop")) out.hop = cfg.hop;
        if (overridden("--record-seconds")) out.record_seconds = cfg.record_seconds;
        if (overridden("--dataset")) out.dataset = cfg.dataset;
        if (overridden("--calib-size")) out.calib_size = cfg.calib_size;
        if (overridden("--control-overhead")) out.control_overhead = cfg.control_overhead;
        if (overridden("--clock-mhz")) out.clock_mhz = cfg.clock_mhz;
        return out;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"training, quantization and FPGA-datapath simulation for the one-conv-layer "
                 "bearing fault classifier"};
    app.require_subcommand(1);

    // gen-data
    auto gen = app.add_subcommand("gen-data", "generate or import a dataset and preprocess it");
    CommonOpts gen_opts;
    gen_opts.attach(gen, false);
    gen->add_option("--dataset", gen_opts.cfg.dataset, "'synthetic' or a raw-record CSV path");
    gen->add_option("--samples-per-class", gen_opts.cfg.samples_per_class, "windows per class");
    gen->add_option("--hop", gen_opts.cfg.hop, "window hop (stride) in samples");
    gen->add_option("--record-seconds", gen_opts.cfg.record_seconds, "synthetic record length");

    // train-teacher
    auto teach = app.add_subcommand("train-teacher", "train the six-block teacher network");
    CommonOpts teach_opts;
    teach_opts.attach(teach);
    std::string teach_data;
    teach->add_option("--data", teach_data, "dataset directory (gen-data output)")->required();

    // distill
    auto dist = app.add_subcommand("distill", "train the student via decoupled distillation");
    CommonOpts dist_opts;
    dist_opts.attach(dist);
    std::string dist_data, dist_teacher;
    bool no_kd = false;
    dist->add_option("--data", dist_data, "dataset directory")->required();
    dist->add_option("--teacher", dist_teacher, "teacher checkpoint (.bpgf)");
    dist->add_flag("--no-kd", no_kd, "train with plain cross entropy (no teacher)");

    // quantize
    auto quant_cmd = app.add_subcommand("quantize", "calibrate and quantize a student checkpoint");
    CommonOpts quant_opts;
    quant_opts.attach(quant_cmd, false);
    std::string quant_student, quant_data;
    quant_cmd->add_option("--student", quant_student, "student checkpoint (.bpgf)")->required();
    quant_cmd->add_option("--data", quant_data, "dataset directory for calibration")->required();
    quant_cmd->add_option("--calib-size", quant_opts.cfg.calib_size, "calibration sample count");

    // export-rom
    auto rom = app.add_subcommand("export-rom", "write ROM hex images from a quantized model");
    std::string rom_model, rom_out;
    rom->add_option("--model", rom_model, "quantized model (.bpgq)")->required();
    rom->add_option("--out", rom_out, "output directory")->required();

    // simulate
    auto sim = app.add_subcommand("simulate", "run the cycle-counting datapath simulator");
    CommonOpts sim_opts;
    sim_opts.attach(sim, false);
    std::string sim_model, sim_input, sim_rom;
    int sim_limit = 0;
    sim->add_option("--model", sim_model, "quantized model (.bpgq)")->required();
    sim->add_option("--input", sim_input, "spectrum fixture (.bpgs)")->required();
    sim->add_option("--rom-dir", sim_rom, "load weights from ROM hex images instead");
    sim->add_option("--limit", sim_limit, "max samples to simulate (0 = all)");
    sim->add_option("--control-overhead", sim_opts.cfg.control_overhead,
                    "control/handoff cycles added per inference");
    sim->add_option("--clock-mhz", sim_opts.cfg.clock_mhz, "clock for latency conversion");

    // eval
    auto ev = app.add_subcommand("eval", "paired float-vs-quantized evaluation on the test set");
    CommonOpts ev_opts;
    ev_opts.attach(ev, false);
    std::string ev_model, ev_student, ev_data;
    ev->add_option("--model", ev_model, "quantized model (.bpgq)")->required();
    ev->add_option("--student", ev_student, "float student checkpoint (.bpgf)")->required();
    ev->add_option("--data", ev_data, "dataset directory")->required();

    // bench
    auto bench = app.add_subcommand("bench", "host wall-clock vs simulated latency");
    CommonOpts bench_opts;
    bench_opts.attach(bench, false);
    std::string bench_model, bench_student, bench_input;
    int bench_limit = 1000;
    bench->add_option("--model", bench_model, "quantized model (.bpgq)")->required();
    bench->add_option("--student", bench_student, "float student checkpoint (.bpgf)")->required();
    bench->add_option("--input", bench_input, "spectrum fixture (.bpgs)")->required();
    bench->add_option("--limit", bench_limit, "samples to time");
    bench->add_option("--control-overhead", bench_opts.cfg.control_overhead, "control cycles");
    bench->add_option("--clock-mhz", bench_opts.cfg.clock_mhz, "clock for latency conversion");

    // sweep
    auto sweep = app.add_subcommand("sweep", "run the pipeline over SNR/seed lists");
    std::string sweep_config, sweep_out;
    sweep->add_option("--config", sweep_config, "config with sweep.snr_list / sweep.seeds")
        ->required();
    sweep->add_option("--out", sweep_out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) return cli::cmd_gen_data(gen_opts.resolve(gen));
        if (*teach) return cli::cmd_train_teacher(teach_opts.resolve(teach), teach_data);
        if (*dist) {
            if (!no_kd && dist_teacher.empty())
                throw std::runtime_error("distill: --teacher required unless --no-kd is given");
            return cli::cmd_distill(dist_opts.resolve(dist), dist_data, dist_teacher, no_kd);
        }
        if (*quant_cmd)
            return cli::cmd_quantize(quant_opts.resolve(quant_cmd), quant_student, quant_data);
        if (*rom) return cli::cmd_export_rom(rom_model, rom_out);
        if (*sim)
            return cli::cmd_simulate(sim_opts.resolve(sim), sim_model, sim_input, sim_limit,
                                     sim_rom);
        if (*ev) return cli::cmd_eval(ev_opts.resolve(ev), ev_model, ev_student, ev_data);
        if (*bench)
            return cli::cmd_bench(bench_opts.resolve(bench), bench_model, bench_student,
                                  bench_input, bench_limit);
        if (*sweep) return cli::cmd_sweep(sweep_config, sweep_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

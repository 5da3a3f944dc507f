// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "bpga/accel.hpp"
#include "bpga/binio.hpp"
#include "bpga/distill.hpp"
#include "bpga/metrics.hpp"
#include "bpga/quantize.hpp"

namespace bpga::cli {

namespace fs = std::filesystem;

namespace {

void print_line(const std::string& s) { std::cout << s << "\n"; }

}  // namespace

signal::SampleSet load_dataset(const fs::path& data_dir) {
    signal::SampleSet set;
    const std::pair<const char*, signal::Split> parts[] = {
        {"train.bpgs", signal::Split::train},
        {"val.bpgs", signal::Split::val},
        {"test.bpgs", signal::Split::test},
    };
    for (const auto& [name, split] : parts) {
        auto samples = signal::load_bpgs(data_dir / name);
        for (auto& s : samples) {
            set.samples.push_back(std::move(s));
            set.split.push_back(split);
        }
    }
    return set;
}

int cmd_gen_data(RunConfig cfg) {
    cfg.validate();
    DirLock lock(cfg.out_dir);

    std::vector<signal::RawRecord> records;
    if (cfg.dataset == "synthetic") {
        for (int c = 0; c < cfg.num_classes; ++c) {
            Rng rng(stage_seed(cfg.seed, SeedStream::record, static_cast<std::uint64_t>(c)));
            records.push_back(signal::gen_synthetic(c, cfg.record_seconds, rng));
        }
    } else {
        records = signal::load_csv(cfg.dataset);
        for (const auto& r : records)
            if (r.label < 0 || r.label >= cfg.num_classes)
                throw std::runtime_error("record label outside num_classes");
    }
    signal::save_csv(records, cfg.out_dir / "records.csv");

    std::vector<signal::Spectrum> all;
    for (std::size_t r = 0; r < records.size(); ++r) {
        Rng rng(stage_seed(cfg.seed, SeedStream::preprocess, r));
        auto spectra =
            signal::preprocess(records[r], cfg.samples_per_class, cfg.hop, cfg.snr_db, rng);
        for (auto& s : spectra) all.push_back(std::move(s));
    }

    Rng split_rng(stage_seed(cfg.seed, SeedStream::split));
    const auto set = signal::make_splits(std::move(all), split_rng);

    signal::save_bpgs(set.subset(signal::Split::train), cfg.num_classes, cfg.out_dir / "train.bpgs");
    signal::save_bpgs(set.subset(signal::Split::val), cfg.num_classes, cfg.out_dir / "val.bpgs");
    signal::save_bpgs(set.subset(signal::Split::test), cfg.num_classes, cfg.out_dir / "test.bpgs");

    Manifest m;
    m.config_text = render_config(cfg);
    m.entries["records.csv"] = file_hash(cfg.out_dir / "records.csv");
    m.entries["train.bpgs"] = file_hash(cfg.out_dir / "train.bpgs");
    m.entries["val.bpgs"] = file_hash(cfg.out_dir / "val.bpgs");
    m.entries["test.bpgs"] = file_hash(cfg.out_dir / "test.bpgs");
    m.save(cfg.out_dir / "manifest.txt");

    print_line("gen-data: " + std::to_string(set.samples.size()) + " samples (" +
               snr_to_string(cfg.snr_db) + " dB) -> " + cfg.out_dir.string());
    return 0;
}

int cmd_train_teacher(RunConfig cfg, const fs::path& data_dir) {
    cfg.validate();
    DirLock lock(cfg.out_dir);
    const auto data = load_dataset(data_dir);

    Rng init_rng(stage_seed(cfg.seed, SeedStream::teacher_init));
    auto teacher = nn::TeacherNet::init(init_rng);
    print_line("train-teacher: " + std::to_string(nn::param_count(teacher)) + " parameters");

    auto result = distill::train_teacher(std::move(teacher), data, cfg.teacher, cfg.seed);
    nn::save_checkpoint(result.net, cfg.out_dir / "teacher.bpgf");
    distill::write_history_csv(result.history, cfg.out_dir / "teacher_history.csv");

    Manifest m;
    m.config_text = render_config(cfg);
    m.entries["input.train.bpgs"] = file_hash(data_dir / "train.bpgs");
    m.entries["input.val.bpgs"] = file_hash(data_dir / "val.bpgs");
    m.entries["teacher.bpgf"] = file_hash(cfg.out_dir / "teacher.bpgf");
    m.entries["teacher_history.csv"] = file_hash(cfg.out_dir / "teacher_history.csv");
    m.save(cfg.out_dir / "manifest.txt");

    std::ostringstream msg;
    msg.precision(4);
    msg << "train-teacher: best val F1 " << 100.0 * result.best_val_f1 << "% (epoch "
        << result.best_epoch << ")";
    print_line(msg.str());
    return 0;
}

int cmd_distill(RunConfig cfg, const fs::path& data_dir, const fs::path& teacher_ckpt,
                bool no_kd) {
    cfg.validate();
    DirLock lock(cfg.out_dir);
    const auto data = load_dataset(data_dir);

    nn::TeacherNet teacher;
    if (!no_kd) teacher = nn::load_teacher(teacher_ckpt);

    Rng init_rng(stage_seed(cfg.seed, SeedStream::student_init));
    auto student = nn::StudentNet::init(init_rng);

    auto result = distill::train_student(no_kd ? nullptr : &teacher, std::move(student), data,
                                         cfg.distill, cfg.seed);
    nn::save_checkpoint(result.net, cfg.out_dir / "student.bpgf");
    distill::write_history_csv(result.history, cfg.out_dir / "student_history.csv");

    Manifest m;
    m.config_text = render_config(cfg);
    m.entries["input.train.bpgs"] = file_hash(data_dir / "train.bpgs");
    m.entries["input.val.bpgs"] = file_hash(data_dir / "val.bpgs");
    if (!no_kd) m.entries["input.teacher.bpgf"] = file_hash(teacher_ckpt);
    m.entries["mode"] = no_kd ? "supervised" : "dkd";
    m.entries["student.bpgf"] = file_hash(cfg.out_dir / "student.bpgf");
    m.entries["student_history.csv"] = file_hash(cfg.out_dir / "student_history.csv");
    m.save(cfg.out_dir / "manifest.txt");

    std::ostringstream msg;
    msg.precision(4);
    msg << "distill" << (no_kd ? " (no KD)" : "") << ": best val F1 "
        << 100.0 * result.best_val_f1 << "% (epoch " << result.best_epoch << ")";
    print_line(msg.str());
    return 0;
}

int cmd_quantize(RunConfig cfg, const fs::path& student_ckpt, const fs::path& data_dir) {
    cfg.validate();
    DirLock lock(cfg.out_dir);

    const auto student = nn::load_student(student_ckpt);
    auto all = signal::load_bpgs(data_dir / "train.bpgs");
    // stride-sample so the calibration set spans every class (the fixture
    // stores samples grouped by class)
    std::vector<signal::Spectrum> calib;
    const std::size_t want = std::min<std::size_t>(all.size(), static_cast<std::size_t>(cfg.calib_size));
    const std::size_t stride = all.size() / want;
    for (std::size_t i = 0; i < want; ++i) calib.push_back(std::move(all[i * stride]));

    const auto fmt = quant::calibrate(student, calib);
    auto qm = quant::quantize_model(student, fmt);
    qm.source_hash = file_hash(student_ckpt);
    qm.calib_hash = file_hash(data_dir / "train.bpgs");

    // the calibration set must run without accumulator overflow
    for (const auto& s : calib) (void)quant::quantized_forward(qm, s.x);

    quant::export_model(qm, cfg.out_dir / "model.bpgq");

    Manifest m;
    m.config_text = render_config(cfg);
    m.entries["input.student.bpgf"] = qm.source_hash;
    m.entries["input.calibration"] = qm.calib_hash;
    m.entries["model.bpgq"] = file_hash(cfg.out_dir / "model.bpgq");
    m.entries["fmt.input"] = fmt.input.str();
    m.entries["fmt.conv_w"] = fmt.conv_w.str();
    m.entries["fmt.conv_b"] = fmt.conv_b.str();
    m.entries["fmt.conv_out"] = fmt.conv_out.str();
    m.entries["fmt.pooled"] = fmt.pooled.str();
    m.entries["fmt.fc_w"] = fmt.fc_w.str();
    m.entries["fmt.fc_b"] = fmt.fc_b.str();
    m.entries["fmt.fc_out"] = fmt.fc_out.str();
    m.save(cfg.out_dir / "manifest.txt");

    print_line("quantize: formats input " + fmt.input.str() + ", conv out " + fmt.conv_out.str() +
               ", shift " + fmt.conv_out.str() + "->" + fmt.pooled.str() + ", fc out " +
               fmt.fc_out.str());
    return 0;
}

int cmd_export_rom(const fs::path& model, const fs::path& out_dir) {
    DirLock lock(out_dir);
    const auto qm = quant::import_model(model);
    quant::export_rom(qm, out_dir);

    Manifest m;
    m.config_text = "";
    m.entries["input.model.bpgq"] = file_hash(model);
    m.entries["conv.hex"] = file_hash(out_dir / "conv.hex");
    m.entries["fc.hex"] = file_hash(out_dir / "fc.hex");
    m.entries["bias.hex"] = file_hash(out_dir / "bias.hex");
    m.save(out_dir / "manifest.txt");

    print_line("export-rom: 256 + 2560 + 14 words -> " + out_dir.string());
    return 0;
}

int cmd_simulate(RunConfig cfg, const fs::path& model, const fs::path& spectra, int limit,
                 const fs::path& rom_dir) {
    DirLock lock(cfg.out_dir);
    const auto qm = quant::import_model(model);
    auto samples = signal::load_bpgs(spectra);
    if (limit > 0 && static_cast<int>(samples.size()) > limit)
        samples.resize(static_cast<std::size_t>(limit));

    // weights come from the ROM hex images when a directory is given; the
    // .bpgq still supplies the stage formats
    const auto rom = rom_dir.empty() ? quant::make_rom(qm) : quant::load_rom(rom_dir);
    accel::Accelerator sim(rom, qm.fmt, {cfg.control_overhead, cfg.clock_mhz});

    std::ofstream pred(cfg.out_dir / "predictions.csv", std::ios::trunc);
    pred << "index,true_label,predicted\n";
    accel::CycleReport report;
    std::vector<int> truth, predicted;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto res = sim.run_inference(samples[i].x);
        if (i == 0) report = res.cycles;
        else if (res.cycles.total() != report.total())
            throw std::runtime_error("cycle count varied across inputs");
        truth.push_back(samples[i].label);
        predicted.push_back(res.label);
        pred << i << "," << samples[i].label << "," << res.label << "\n";
    }
    pred.close();

    std::ofstream kv(cfg.out_dir / "cycle_report.txt", std::ios::trunc);
    kv << accel::report_kv(report);
    kv.close();
    accel::write_report_csv(report, cfg.out_dir / "cycle_report.csv");

    const auto eval = metrics::evaluate(truth, predicted, cfg.num_classes);
    metrics::write_report_csv(eval, cfg.out_dir / "eval_sim.csv");

    Manifest m;
    m.config_text = render_config(cfg);
    m.entries["input.model.bpgq"] = file_hash(model);
    m.entries["input.spectra"] = file_hash(spectra);
    m.entries["predictions.csv"] = file_hash(cfg.out_dir / "predictions.csv");
    m.entries["cycle_report.csv"] = file_hash(cfg.out_dir / "cycle_report.csv");
    m.save(cfg.out_dir / "manifest.txt");

    std::ostringstream msg;
    msg.precision(4);
    msg << "simulate: " << samples.size() << " samples, F1 " << 100.0 * eval.f1 << "%, "
        << report.total() << " cycles/sample (" << report.microseconds() << " us at "
        << report.clock_mhz << " MHz)";
    print_line(msg.str());
    return 0;
}

int cmd_eval(RunConfig cfg, const fs::path& model, const fs::path& student_ckpt,
             const fs::path& data_dir) {
    DirLock lock(cfg.out_dir);
    const auto qm = quant::import_model(model);
    const auto student = nn::load_student(student_ckpt);
    const auto test = signal::load_bpgs(data_dir / "test.bpgs");
    if (test.empty()) throw std::runtime_error("empty test set");

    std::vector<int> truth, pred_float, pred_quant;
    constexpr std::size_t kChunk = 256;
    for (std::size_t start = 0; start < test.size(); start += kChunk) {
        const auto n = std::min(kChunk, test.size() - start);
        nn::Matrix x(static_cast<Eigen::Index>(n), nn::kInputLen);
        for (std::size_t r = 0; r < n; ++r)
            x.row(static_cast<Eigen::Index>(r)) = test[start + r].x.matrix().transpose();
        const auto p = nn::predict(nn::student_forward(student, x));
        pred_float.insert(pred_float.end(), p.begin(), p.end());
    }
    for (const auto& s : test) {
        truth.push_back(s.label);
        pred_quant.push_back(quant::quantized_forward(qm, s.x).label);
    }

    const auto ef = metrics::evaluate(truth, pred_float, cfg.num_classes);
    const auto eq = metrics::evaluate(truth, pred_quant, cfg.num_classes);
    metrics::write_report_csv(ef, cfg.out_dir / "eval_float.csv");
    metrics::write_report_csv(eq, cfg.out_dir / "eval_quant.csv");

    std::ofstream drop(cfg.out_dir / "drop_report.csv", std::ios::trunc);
    drop.precision(10);
    drop << "metric,float,quantized,drop_points\n";
    drop << "f1," << ef.f1 << "," << eq.f1 << "," << 100.0 * (ef.f1 - eq.f1) << "\n";
    drop << "precision," << ef.precision << "," << eq.precision << ","
         << 100.0 * (ef.precision - eq.precision) << "\n";
    drop << "recall," << ef.recall << "," << eq.recall << "," << 100.0 * (ef.recall - eq.recall)
         << "\n";
    drop.close();

    Manifest m;
    m.config_text = render_config(cfg);
    m.entries["input.model.bpgq"] = file_hash(model);
    m.entries["input.student.bpgf"] = file_hash(student_ckpt);
    m.entries["input.test.bpgs"] = file_hash(data_dir / "test.bpgs");
    m.entries["drop_report.csv"] = file_hash(cfg.out_dir / "drop_report.csv");
    m.save(cfg.out_dir / "manifest.txt");

    std::ostringstream msg;
    msg.precision(4);
    msg << "eval: float F1 " << 100.0 * ef.f1 << "%, quantized F1 " << 100.0 * eq.f1
        << "%, drop " << 100.0 * (ef.f1 - eq.f1) << " points";
    print_line(msg.str());
    return 0;
}

int cmd_bench(RunConfig cfg, const fs::path& model, const fs::path& student_ckpt,
              const fs::path& spectra, int limit) {
    DirLock lock(cfg.out_dir);
    const auto qm = quant::import_model(model);
    const auto student = nn::load_student(student_ckpt);
    auto samples = signal::load_bpgs(spectra);
    if (limit > 0 && static_cast<int>(samples.size()) > limit)
        samples.resize(static_cast<std::size_t>(limit));
    const auto n = samples.size();

    using clock = std::chrono::steady_clock;

    // per-sample float inference on the host
    int sink = 0;
    auto t0 = clock::now();
    for (const auto& s : samples) {
        nn::Matrix x(1, nn::kInputLen);
        x.row(0) = s.x.matrix().transpose();
        sink += nn::predict(nn::student_forward(student, x))[0];
    }
    auto t1 = clock::now();
    const double host_float_us =
        std::chrono::duration<double, std::micro>(t1 - t0).count() / static_cast<double>(n);

    t0 = clock::now();
    for (const auto& s : samples) sink += quant::quantized_forward(qm, s.x).label;
    t1 = clock::now();
    if (sink == -1) print_line("");  // keep the timed loops observable
    const double host_quant_us =
        std::chrono::duration<double, std::micro>(t1 - t0).count() / static_cast<double>(n);

    accel::Accelerator sim(quant::make_rom(qm), qm.fmt,
                           {cfg.control_overhead, cfg.clock_mhz});
    const auto res = sim.run_inference(samples[0].x);
    const double sim_us = res.cycles.microseconds();
    const double conv_fc_us =
        static_cast<double>(res.cycles.conv + res.cycles.fc) / cfg.clock_mhz;

    std::ofstream out(cfg.out_dir / "bench.csv", std::ios::trunc);
    out.precision(10);
    out << "samples,host_float_us,host_quant_us,sim_cycles,sim_us,conv_fc_us,speedup_float_vs_sim\n";
    out << n << "," << host_float_us << "," << host_quant_us << "," << res.cycles.total() << ","
        << sim_us << "," << conv_fc_us << "," << host_float_us / sim_us << "\n";
    out << "# power consumption is not modeled\n";
    out.close();

    std::ostringstream msg;
    msg.precision(4);
    msg << "bench: host float " << host_float_us << " us/sample, host quantized " << host_quant_us
        << " us/sample, simulated " << res.cycles.total() << " cycles = " << sim_us << " us ("
        << conv_fc_us << " us conv+fc), speedup x" << host_float_us / sim_us;
    print_line(msg.str());
    return 0;
}

int cmd_sweep(const fs::path& config_file, const fs::path& out_dir) {
    auto kv = parse_kv_file(config_file);

    auto split_list = [](const std::string& s) {
        std::vector<std::string> items;
        std::istringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto a = item.find_first_not_of(" \t");
            const auto b = item.find_last_not_of(" \t");
            if (a != std::string::npos) items.push_back(item.substr(a, b - a + 1));
        }
        return items;
    };

    std::vector<double> snrs{signal::kCleanSnr};
    std::vector<std::uint64_t> seeds{0};
    if (auto it = kv.find("sweep.snr_list"); it != kv.end()) {
        snrs.clear();
        for (const auto& s : split_list(it->second)) snrs.push_back(parse_snr(s));
        kv.erase(it);
    }
    if (auto it = kv.find("sweep.seeds"); it != kv.end()) {
        seeds.clear();
        for (const auto& s : split_list(it->second)) seeds.push_back(std::stoull(s));
        kv.erase(it);
    }

    RunConfig base;
    kv.erase("out_dir");
    kv.erase("snr");
    kv.erase("seed");
    apply_kv(base, kv);
    base.validate();

    DirLock lock(out_dir);
    std::ofstream agg(out_dir / "sweep.csv", std::ios::trunc);
    agg.precision(8);
    agg << "snr,seed,dkd_val_f1,nokd_val_f1,float_test_f1,quant_test_f1,drop_points\n";

    for (const double snr : snrs) {
        for (const auto seed : seeds) {
            RunConfig cfg = base;
            cfg.snr_db = snr;
            cfg.seed = seed;
            const fs::path run_dir =
                out_dir / ("snr_" + snr_to_string(snr) + "_seed_" + std::to_string(seed));

            cfg.out_dir = run_dir / "data";
            cmd_gen_data(cfg);
            cfg.out_dir = run_dir / "teacher";
            cmd_train_teacher(cfg, run_dir / "data");
            cfg.out_dir = run_dir / "dkd";
            cmd_distill(cfg, run_dir / "data", run_dir / "teacher/teacher.bpgf", false);
            cfg.out_dir = run_dir / "nokd";
            cmd_distill(cfg, run_dir / "data", "", true);
            cfg.out_dir = run_dir / "quant";
            cmd_quantize(cfg, run_dir / "dkd/student.bpgf", run_dir / "data");
            cfg.out_dir = run_dir / "eval";
            cmd_eval(cfg, run_dir / "quant/model.bpgq", run_dir / "dkd/student.bpgf",
                     run_dir / "data");

            // pull the headline numbers back out of the artifacts
            auto best_f1 = [](const fs::path& history) {
                std::ifstream in(history);
                std::string line, best;
                std::getline(in, line);  // header
                double f1 = 0.0;
                while (std::getline(in, line)) {
                    const auto pos = line.rfind(',');
                    f1 = std::max(f1, std::stod(line.substr(pos + 1)));
                }
                return f1;
            };
            auto drop_row = [&](const fs::path& p) {
                std::ifstream in(p);
                std::string line;
                std::getline(in, line);
                std::getline(in, line);  // f1 row
                std::vector<std::string> cells = split_list(line);
                return std::tuple{std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3])};
            };
            const auto [f1_float, f1_quant, drop] = drop_row(run_dir / "eval/drop_report.csv");
            agg << snr_to_string(snr) << "," << seed << ","
                << best_f1(run_dir / "dkd/student_history.csv") << ","
                << best_f1(run_dir / "nokd/student_history.csv") << "," << f1_float << ","
                << f1_quant << "," << drop << "\n";
            agg.flush();
        }
    }
    print_line("sweep: results in " + (out_dir / "sweep.csv").string());
    return 0;
}

}  // namespace bpga::cli

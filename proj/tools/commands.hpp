// SPDX-License-Identifier: Apache-2.0
//
// Subcommand implementations behind the CLI front end. Every command
// writes its artifacts plus a manifest tying outputs to the config hash
// and input hashes, and returns a process exit status.

#pragma once

#include <filesystem>

#include "bpga/config.hpp"

namespace bpga::cli {

int cmd_gen_data(RunConfig cfg);
int cmd_train_teacher(RunConfig cfg, const std::filesystem::path& data_dir);
int cmd_distill(RunConfig cfg, const std::filesystem::path& data_dir,
                const std::filesystem::path& teacher_ckpt, bool no_kd);
int cmd_quantize(RunConfig cfg, const std::filesystem::path& student_ckpt,
                 const std::filesystem::path& data_dir);
int cmd_export_rom(const std::filesystem::path& model, const std::filesystem::path& out_dir);
int cmd_simulate(RunConfig cfg, const std::filesystem::path& model,
                 const std::filesystem::path& spectra, int limit,
                 const std::filesystem::path& rom_dir = {});
int cmd_eval(RunConfig cfg, const std::filesystem::path& model,
             const std::filesystem::path& student_ckpt, const std::filesystem::path& data_dir);
int cmd_bench(RunConfig cfg, const std::filesystem::path& model,
              const std::filesystem::path& student_ckpt, const std::filesystem::path& spectra,
              int limit);
int cmd_sweep(const std::filesystem::path& config_file, const std::filesystem::path& out_dir);

// shared helper: load the three split fixture files of a dataset directory
signal::SampleSet load_dataset(const std::filesystem::path& data_dir);

}  // namespace bpga::cli

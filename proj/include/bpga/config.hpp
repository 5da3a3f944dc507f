// SPDX-License-Identifier: Apache-2.0
//
// Run configuration (flat key=value files mirrored by CLI flags), run
// manifests with config/input hashes, and the per-output-directory lock.

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bpga/distill.hpp"

namespace bpga::cli {

// fixed per-stage seed streams so each artifact is reproducible from the
// run seed alone
enum class SeedStream : std::uint64_t {
    record = 0x01,
    preprocess = 0x02,
    split = 0x03,
    teacher_init = 0x04,
    student_init = 0x05,
};

std::uint64_t stage_seed(std::uint64_t seed, SeedStream stream, std::uint64_t item = 0);

struct RunConfig {
    std::uint64_t seed = 0;
    std::string dataset = "synthetic";  // "synthetic" or a raw-record CSV path
    int samples_per_class = 1000;
    int num_classes = 10;
    double snr_db = signal::kCleanSnr;  // "clean" in config files
    int hop = 28;
    double record_seconds = 6.0;  // synthetic record length per class
    int calib_size = 256;
    std::filesystem::path out_dir = "out";

    distill::DistillConfig distill;  // student training
    distill::TrainConfig teacher;    // teacher training

    std::uint64_t control_overhead = 65;
    double clock_mhz = 100.0;

    void validate() const;
};

// "key = value" lines, '#' comments, "clean" accepted for snr keys.
std::map<std::string, std::string> parse_kv_file(const std::filesystem::path& path);
std::map<std::string, std::string> parse_kv_text(const std::string& text);

// Applies known keys onto a config; unknown keys are an error.
void apply_kv(RunConfig& cfg, const std::map<std::string, std::string>& kv);
RunConfig load_config(const std::filesystem::path& path);

// The canonical key=value rendering (also what gets hashed).
std::string render_config(const RunConfig& cfg);

double parse_snr(const std::string& value);  // "clean" -> +inf
std::string snr_to_string(double snr_db);

// manifest.txt: canonical config, config hash, and one hash line per
// input/output artifact so any report can be traced to its inputs.
struct Manifest {
    std::string config_text;
    std::map<std::string, std::string> entries;
    void save(const std::filesystem::path& path) const;
};

std::string file_hash(const std::filesystem::path& path);

// One command at a time per output directory.
class DirLock {
public:
    explicit DirLock(const std::filesystem::path& dir);
    ~DirLock();
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

private:
    std::filesystem::path lock_path_;
    bool owned_ = false;
};

}  // namespace bpga::cli

// SPDX-License-Identifier: Apache-2.0

#include "bpga/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "bpga/binio.hpp"

namespace bpga::cli {

std::uint64_t stage_seed(std::uint64_t seed, SeedStream stream, std::uint64_t item) {
    std::uint64_t h = seed ^ (0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(stream) + 1));
    h ^= 0xBF58476D1CE4E5B9ULL * (item + 1);
    h ^= h >> 31;
    return h;
}

void RunConfig::validate() const {
    if (samples_per_class < 4) throw std::invalid_argument("samples_per_class must be >= 4");
    if (num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
    if (hop < 1) throw std::invalid_argument("hop must be >= 1");
    if (calib_size < 1) throw std::invalid_argument("calib_size must be >= 1");
    if (record_seconds <= 0.0) throw std::invalid_argument("record_seconds must be positive");
    if (clock_mhz <= 0.0) throw std::invalid_argument("clock_mhz must be positive");
    distill.validate();
}

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

std::map<std::string, std::string> parse_kv_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(line_no) + ": expected key=value");
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key.empty()) throw std::runtime_error("config line " + std::to_string(line_no) + ": empty key");
        kv[key] = value;
    }
    return kv;
}

std::map<std::string, std::string> parse_kv_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_kv_text(ss.str());
}

double parse_snr(const std::string& value) {
    if (value == "clean" || value == "inf") return signal::kCleanSnr;
    return std::stod(value);
}

std::string snr_to_string(double snr_db) {
    if (std::isinf(snr_db)) return "clean";
    std::ostringstream out;
    out << snr_db;
    return out.str();
}

void apply_kv(RunConfig& cfg, const std::map<std::string, std::string>& kv) {
    for (const auto& [key, value] : kv) {
        try {
            if (key == "seed") cfg.seed = std::stoull(value);
            else if (key == "dataset") cfg.dataset = value;
            else if (key == "samples_per_class") cfg.samples_per_class = std::stoi(value);
            else if (key == "num_classes") cfg.num_classes = std::stoi(value);
            else if (key == "snr") cfg.snr_db = parse_snr(value);
            else if (key == "hop") cfg.hop = std::stoi(value);
            else if (key == "record_seconds") cfg.record_seconds = std::stod(value);
            else if (key == "calib_size") cfg.calib_size = std::stoi(value);
            else if (key == "out_dir") cfg.out_dir = value;
            else if (key == "distill.T") cfg.distill.T = std::stod(value);
            else if (key == "distill.alpha") cfg.distill.alpha = std::stod(value);
            else if (key == "distill.beta") cfg.distill.beta = std::stod(value);
            else if (key == "distill.gamma") cfg.distill.gamma = std::stod(value);
            else if (key == "distill.epochs") cfg.distill.epochs = std::stoi(value);
            else if (key == "distill.batch_size") cfg.distill.batch_size = std::stoi(value);
            else if (key == "distill.lr") cfg.distill.lr = std::stod(value);
            else if (key == "teacher.epochs") cfg.teacher.epochs = std::stoi(value);
            else if (key == "teacher.batch_size") cfg.teacher.batch_size = std::stoi(value);
            else if (key == "teacher.lr") cfg.teacher.lr = std::stod(value);
            else if (key == "control_overhead") cfg.control_overhead = std::stoull(value);
            else if (key == "clock_mhz") cfg.clock_mhz = std::stod(value);
            else throw std::runtime_error("unknown config key: " + key);
        } catch (const std::invalid_argument&) {
            throw std::runtime_error("bad value for config key " + key + ": " + value);
        } catch (const std::out_of_range&) {
            throw std::runtime_error("bad value for config key " + key + ": " + value);
        }
    }
}

RunConfig load_config(const std::filesystem::path& path) {
    RunConfig cfg;
    apply_kv(cfg, parse_kv_file(path));
    return cfg;
}

std::string render_config(const RunConfig& cfg) {
    std::ostringstream out;
    out.precision(17);
    out << "seed = " << cfg.seed << "\n"
        << "dataset = " << cfg.dataset << "\n"
        << "samples_per_class = " << cfg.samples_per_class << "\n"
        << "num_classes = " << cfg.num_classes << "\n"
        << "snr = " << snr_to_string(cfg.snr_db) << "\n"
        << "hop = " << cfg.hop << "\n"
        << "record_seconds = " << cfg.record_seconds << "\n"
        << "calib_size = " << cfg.calib_size << "\n"
        << "distill.T = " << cfg.distill.T << "\n"
        << "distill.alpha = " << cfg.distill.alpha << "\n"
        << "distill.beta = " << cfg.distill.beta << "\n"
        << "distill.gamma = " << cfg.distill.gamma << "\n"
        << "distill.epochs = " << cfg.distill.epochs << "\n"
        << "distill.batch_size = " << cfg.distill.batch_size << "\n"
        << "distill.lr = " << cfg.distill.lr << "\n"
        << "teacher.epochs = " << cfg.teacher.epochs << "\n"
        << "teacher.batch_size = " << cfg.teacher.batch_size << "\n"
        << "teacher.lr = " << cfg.teacher.lr << "\n"
        << "control_overhead = " << cfg.control_overhead << "\n"
        << "clock_mhz = " << cfg.clock_mhz << "\n";
    return out.str();
}

void Manifest::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << "config_hash = " << io::hash_hex(io::fnv1a(config_text.data(), config_text.size()))
        << "\n";
    for (const auto& [key, value] : entries) out << key << " = " << value << "\n";
    out << "\n# config\n";
    std::istringstream cfg(config_text);
    std::string line;
    while (std::getline(cfg, line)) out << "# " << line << "\n";
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string file_hash(const std::filesystem::path& path) {
    return io::hash_hex(io::fnv1a_file(path));
}

DirLock::DirLock(const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    lock_path_ = dir / ".lock";
    if (std::filesystem::exists(lock_path_))
        throw std::runtime_error("output directory is locked by another run: " +
                                 lock_path_.string());
    std::ofstream out(lock_path_);
    if (!out) throw std::runtime_error("cannot create lock file: " + lock_path_.string());
    out << "locked\n";
    owned_ = true;
}

DirLock::~DirLock() {
    if (owned_) {
        std::error_code ec;
        std::filesystem::remove(lock_path_, ec);
    }
}

}  // namespace bpga::cli

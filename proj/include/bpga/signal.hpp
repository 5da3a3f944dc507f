// SPDX-License-Identifier: Apache-2.0
//
// Vibration-signal front end: windowed segmentation of raw records,
// SNR-controlled Gaussian noise, z-score standardization and the radix-2
// FFT magnitude spectrum that feeds the classifier. Also holds the
// synthetic bearing-signal generator and the raw-record / spectrum file
// formats.

#pragma once

#include <Eigen/Core>
#include <complex>
#include <filesystem>
#include <limits>
#include <vector>

#include "bpga/rng.hpp"

namespace bpga::signal {

constexpr int kSegmentLength = 2048;
constexpr int kSpectrumBins = 1024;
constexpr int kNumClasses = 10;
constexpr double kDefaultSampleRate = 12000.0;

// Sentinel for "no noise injection".
constexpr double kCleanSnr = std::numeric_limits<double>::infinity();

struct RawRecord {
    Eigen::ArrayXd samples;
    int label = 0;
    double sample_rate = kDefaultSampleRate;
};

struct Segment {
    Eigen::ArrayXd x;  // exactly kSegmentLength points
    int label = 0;
};

struct Spectrum {
    Eigen::ArrayXd x;  // exactly kSpectrumBins magnitudes
    int label = 0;
};

enum class Split : std::uint8_t { train = 0, val = 1, test = 2 };

struct SampleSet {
    std::vector<Spectrum> samples;
    std::vector<Split> split;  // parallel to samples

    std::vector<std::size_t> indices(Split s) const;
    std::vector<Spectrum> subset(Split s) const;
};

// `count` windows of 2048 points. The first start index is drawn uniformly
// from the feasible range; subsequent starts advance by `hop` and wrap to
// the signal start when the window would run off the end.
std::vector<Segment> sample_windows(const RawRecord& record, int count, int hop, Rng& rng);

// Zero-mean Gaussian noise scaled so 10*log10(Ps/Pn) == snr_db in
// expectation, with P the mean squared sample. kCleanSnr returns the
// segment unchanged; a zero-power segment is an error.
Segment add_noise(const Segment& seg, double snr_db, Rng& rng);

// (x - mean) / population stddev; all zeros when stddev < 1e-12.
Eigen::ArrayXd zscore(const Eigen::ArrayXd& x);

// In-place radix-2 decimation-in-time FFT. Length must be a power of two.
std::vector<std::complex<double>> fft_pow2(const Eigen::ArrayXd& x);

// Magnitudes of bins 0..1023 (one-sided, DC included, Nyquist excluded).
Spectrum rfft_mag(const Segment& seg);

// Full pipeline, per segment: z-score -> noise -> z-score -> FFT magnitude
// -> z-score. Noise is injected in the time domain so the SNR keeps its
// physical meaning; clean mode is equivalent to skipping the noise stage.
std::vector<Spectrum> preprocess(const RawRecord& record, int count, int hop, double snr_db,
                                 Rng& rng);

// Stratified random 2:1:1 split (deterministic under a fixed seed). Each
// class needs at least 4 samples.
SampleSet make_splits(std::vector<Spectrum> samples, Rng& rng);

// Synthetic bearing-like vibration record for one of the ten class
// presets: an exponentially decaying impulse train at a class-specific
// impact rate and resonance (absent for the healthy class) over shaft
// harmonics and sensor noise.
RawRecord gen_synthetic(int class_id, double duration_s, Rng& rng);

// Raw-record CSV: header "label,sample_rate", one sample per line, records
// separated by a blank line.
std::vector<RawRecord> load_csv(const std::filesystem::path& path);
void save_csv(const std::vector<RawRecord>& records, const std::filesystem::path& path);

// Spectrum fixture file: 16-byte header (magic BPGS, version u32, count
// u32, class count u32) then count * 1024 little-endian float32 values.
// Samples are stored grouped by class in label order, equal counts per
// class, so labels stay implicit.
void save_bpgs(const std::vector<Spectrum>& samples, int class_count,
               const std::filesystem::path& path);
std::vector<Spectrum> load_bpgs(const std::filesystem::path& path);

}  // namespace bpga::signal

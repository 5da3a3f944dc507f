// SPDX-License-Identifier: Apache-2.0

#include "bpga/signal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "bpga/binio.hpp"

namespace bpga::signal {

std::vector<std::size_t> SampleSet::indices(Split s) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (split[i] == s) idx.push_back(i);
    return idx;
}

std::vector<Spectrum> SampleSet::subset(Split s) const {
    std::vector<Spectrum> out;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (split[i] == s) out.push_back(samples[i]);
    return out;
}

std::vector<Segment> sample_windows(const RawRecord& record, int count, int hop, Rng& rng) {
    const auto len = record.samples.size();
    const auto last_start = len - kSegmentLength;
    if (last_start < 0) throw std::invalid_argument("record shorter than one window");
    if (count < 1 || hop < 1) throw std::invalid_argument("sample_windows: count/hop must be >= 1");

    std::vector<Segment> out;
    out.reserve(static_cast<std::size_t>(count));
    Eigen::Index start = rng.uniform_int(0, last_start);
    for (int i = 0; i < count; ++i) {
        if (start > last_start) start = 0;  // wrap to the signal start
        out.push_back({record.samples.segment(start, kSegmentLength), record.label});
        start += hop;
    }
    return out;
}

Segment add_noise(const Segment& seg, double snr_db, Rng& rng) {
    if (std::isinf(snr_db)) return seg;  // clean mode
    const double signal_power = seg.x.square().mean();
    if (signal_power <= 0.0) throw std::invalid_argument("add_noise: zero-power segment");
    const double noise_power = signal_power / std::pow(10.0, snr_db / 10.0);
    const double sigma = std::sqrt(noise_power);
    Segment out{seg.x, seg.label};
    for (Eigen::Index i = 0; i < out.x.size(); ++i) out.x[i] += sigma * rng.gaussian();
    return out;
}

Eigen::ArrayXd zscore(const Eigen::ArrayXd& x) {
    if (x.size() == 0) throw std::invalid_argument("zscore: empty input");
    const double mean = x.mean();
    const double sd = std::sqrt((x - mean).square().mean());
    if (sd < 1e-12) return Eigen::ArrayXd::Zero(x.size());
    return (x - mean) / sd;
}

std::vector<std::complex<double>> fft_pow2(const Eigen::ArrayXd& x) {
    const auto n = static_cast<std::size_t>(x.size());
    if (n == 0 || (n & (n - 1)) != 0)
        throw std::invalid_argument("fft_pow2: length must be a power of two");

    std::vector<std::complex<double>> a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = x[static_cast<Eigen::Index>(i)];

    // bit-reversal permutation
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * M_PI / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const auto u = a[i + k];
                const auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    return a;
}

Spectrum rfft_mag(const Segment& seg) {
    if (seg.x.size() != kSegmentLength)
        throw std::invalid_argument("rfft_mag: segment must have 2048 points");
    const auto bins = fft_pow2(seg.x);
    Spectrum s;
    s.label = seg.label;
    s.x.resize(kSpectrumBins);
    for (int i = 0; i < kSpectrumBins; ++i) s.x[i] = std::abs(bins[static_cast<std::size_t>(i)]);
    return s;
}

std::vector<Spectrum> preprocess(const RawRecord& record, int count, int hop, double snr_db,
                                 Rng& rng) {
    auto segments = sample_windows(record, count, hop, rng);
    std::vector<Spectrum> out;
    out.reserve(segments.size());
    for (auto& seg : segments) {
        seg.x = zscore(seg.x);
        if (!std::isinf(snr_db)) {
            seg = add_noise(seg, snr_db, rng);
            seg.x = zscore(seg.x);
        }
        Spectrum spec = rfft_mag(seg);
        spec.x = zscore(spec.x);
        out.push_back(std::move(spec));
    }
    return out;
}

SampleSet make_splits(std::vector<Spectrum> samples, Rng& rng) {
    int max_label = 0;
    for (const auto& s : samples) max_label = std::max(max_label, s.label);

    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(max_label) + 1);
    for (std::size_t i = 0; i < samples.size(); ++i)
        by_class[static_cast<std::size_t>(samples[i].label)].push_back(i);

    SampleSet set;
    set.samples = std::move(samples);
    set.split.assign(set.samples.size(), Split::train);

    for (auto& idx : by_class) {
        if (idx.empty()) continue;
        const auto n = idx.size();
        if (n < 4) throw std::invalid_argument("make_splits: a class has fewer than 4 samples");
        rng.shuffle(idx);
        const std::size_t n_train = n / 2;
        const std::size_t n_val = (n - n_train) / 2;
        for (std::size_t k = 0; k < n; ++k) {
            Split s = k < n_train ? Split::train : (k < n_train + n_val ? Split::val : Split::test);
            set.split[idx[k]] = s;
        }
    }
    return set;
}

namespace {

struct ClassPreset {
    double impact_rate_hz;  // 0: no impulse train (healthy)
    double resonance_hz;    // primary ring-down band
    double resonance2_hz;   // secondary band excited as damage spreads
    double impulse_amp;
    double decay_s;
    double band2_share;  // burst energy fraction in the secondary band
    double rate_mult;    // spacing tweak as the defect widens
    double jitter_frac;  // impact-timing jitter; smears the spectral comb
    double h1, h2, h3;   // shaft-harmonic amplitudes
    double noise_sigma;
};

// Healthy, then ball / outer-race / inner-race faults at three severities.
// The fault type sets the impact rate and the resonance bands; severity
// moves several weak cues together: burst amplitude, ring-down time
// constant (bandwidth), the energy share of the secondary band and the
// impact spacing. Each cue drifts slowly along the record, so windows
// near severity boundaries genuinely overlap.
constexpr double kShaftHz = 30.0;
constexpr ClassPreset kPresets[kNumClasses] = {
    // rate    f1      f2      amp   decay   share mult  jit    h1    h2    h3    noise
    {0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.00, 0.50, 0.30, 0.25},               // 0 healthy
    {70.7, 2500.0, 3100.0, 0.75, 0.0030, 0.20, 0.97, 0.005, 0.70, 0.35, 0.15, 0.25},   // 1 ball minor
    {70.7, 2500.0, 3100.0, 1.00, 0.0020, 0.45, 1.00, 0.030, 0.70, 0.35, 0.15, 0.25},   // 2 ball moderate
    {70.7, 2500.0, 3100.0, 1.30, 0.0014, 0.70, 1.03, 0.090, 0.70, 0.35, 0.15, 0.25},   // 3 ball severe
    {107.3, 3400.0, 4000.0, 0.75, 0.0030, 0.20, 0.97, 0.005, 0.60, 0.30, 0.20, 0.25},  // 4 OR minor
    {107.3, 3400.0, 4000.0, 1.00, 0.0020, 0.45, 1.00, 0.030, 0.60, 0.30, 0.20, 0.25},  // 5 OR moderate
    {107.3, 3400.0, 4000.0, 1.30, 0.0014, 0.70, 1.03, 0.090, 0.60, 0.30, 0.20, 0.25},  // 6 OR severe
    {162.2, 4500.0, 5100.0, 0.75, 0.0030, 0.20, 0.97, 0.005, 0.50, 0.40, 0.10, 0.25},  // 7 IR minor
    {162.2, 4500.0, 5100.0, 1.00, 0.0020, 0.45, 1.00, 0.030, 0.50, 0.40, 0.10, 0.25},  // 8 IR moderate
    {162.2, 4500.0, 5100.0, 1.30, 0.0014, 0.70, 1.03, 0.090, 0.50, 0.40, 0.10, 0.25},  // 9 IR severe
};

}  // namespace

RawRecord gen_synthetic(int class_id, double duration_s, Rng& rng) {
    if (class_id < 0 || class_id >= kNumClasses)
        throw std::invalid_argument("gen_synthetic: class id out of range");
    const ClassPreset& p = kPresets[class_id];
    const double fs = kDefaultSampleRate;
    const auto n = static_cast<Eigen::Index>(std::llround(duration_s * fs));

    RawRecord rec;
    rec.label = class_id;
    rec.sample_rate = fs;
    rec.samples = Eigen::ArrayXd::Zero(n);

    const double gain = rng.uniform(0.9, 1.1);  // sensor/mounting variance per record

    // shaft harmonics with random phase
    const double h_amp[3] = {p.h1, p.h2, p.h3};
    for (int h = 0; h < 3; ++h) {
        const double f = kShaftHz * (h + 1);
        const double phase = rng.uniform(0.0, 2.0 * M_PI);
        const double w = 2.0 * M_PI * f / fs;
        for (Eigen::Index i = 0; i < n; ++i)
            rec.samples[i] += gain * h_amp[h] * std::sin(w * static_cast<double>(i) + phase);
    }

    // decaying resonance bursts at the fault impact rate
    if (p.impact_rate_hz > 0.0) {
        const double period = fs / (p.impact_rate_hz * p.rate_mult);
        const auto support = static_cast<Eigen::Index>(std::ceil(8.0 * p.decay_s * fs));
        // inner-race faults pass through the load zone once per shaft turn
        const bool load_modulated = p.impact_rate_hz > 150.0;
        const double wm = 2.0 * M_PI * kShaftHz / fs;

        // slow operating-condition drift, one AR(1) step per impact; the
        // resonance position wanders slowly enough to hold still within a
        // window but spreads widely across the record
        double drift_amp = 0.0, drift_freq = 0.0, drift_share = 0.0;
        auto ar1 = [&rng](double s) { return 0.9 * s + 0.435 * rng.gaussian(); };
        auto ar1_slow = [&rng](double s) { return 0.98 * s + 0.2 * rng.gaussian(); };

        for (double t0 = rng.uniform(0.0, period); t0 < static_cast<double>(n); t0 += period) {
            drift_amp = ar1(drift_amp);
            drift_freq = ar1_slow(drift_freq);
            drift_share = ar1(drift_share);

            const double jitter = rng.uniform(-p.jitter_frac, p.jitter_frac) * period;
            const double amp = std::max(0.15 * p.impulse_amp,
                                        gain * p.impulse_amp * rng.uniform(0.85, 1.15) *
                                            (1.0 + 0.22 * drift_amp));
            const double f1 = p.resonance_hz + 400.0 * drift_freq;
            const double f2 = p.resonance2_hz + 400.0 * drift_freq;
            const double share =
                std::clamp(p.band2_share + 0.12 * drift_share, 0.02, 0.98);
            const double phase1 = rng.uniform(0.0, 2.0 * M_PI);
            const double phase2 = rng.uniform(0.0, 2.0 * M_PI);

            const auto start = static_cast<Eigen::Index>(std::llround(t0 + jitter));
            if (start < 0) continue;
            const Eigen::Index stop = std::min(n, start + support);
            double mod = 1.0;
            if (load_modulated) mod = 0.6 + 0.4 * std::sin(wm * static_cast<double>(start));
            const double w1 = 2.0 * M_PI * f1 / fs;
            const double w2 = 2.0 * M_PI * f2 / fs;
            for (Eigen::Index i = start; i < stop; ++i) {
                const double dt = static_cast<double>(i - start);
                const double env = std::exp(-dt / (p.decay_s * fs));
                rec.samples[i] += amp * mod * env *
                                  ((1.0 - share) * std::sin(w1 * dt + phase1) +
                                   share * std::sin(w2 * dt + phase2));
            }
        }
    }

    for (Eigen::Index i = 0; i < n; ++i) rec.samples[i] += p.noise_sigma * rng.gaussian();
    return rec;
}

std::vector<RawRecord> load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path.string());

    std::vector<RawRecord> records;
    std::string line;
    std::vector<double> samples;
    bool in_record = false;
    int label = 0;
    double rate = kDefaultSampleRate;
    std::size_t line_no = 0;

    auto flush = [&]() {
        if (!in_record) return;
        if (samples.empty()) throw std::runtime_error("record with no samples in " + path.string());
        RawRecord r;
        r.label = label;
        r.sample_rate = rate;
        r.samples = Eigen::Map<const Eigen::ArrayXd>(samples.data(),
                                                     static_cast<Eigen::Index>(samples.size()));
        records.push_back(std::move(r));
        samples.clear();
        in_record = false;
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            flush();
            continue;
        }
        if (!in_record) {
            // header: label,sample_rate
            std::istringstream ss(line);
            std::string l, r;
            if (!std::getline(ss, l, ',') || !std::getline(ss, r))
                throw std::runtime_error("malformed record header at line " +
                                         std::to_string(line_no));
            try {
                label = std::stoi(l);
                rate = std::stod(r);
            } catch (const std::exception&) {
                throw std::runtime_error("malformed record header at line " +
                                         std::to_string(line_no));
            }
            if (label < 0) throw std::runtime_error("unknown label at line " + std::to_string(line_no));
            in_record = true;
        } else {
            try {
                std::size_t used = 0;
                const double v = std::stod(line, &used);
                if (used != line.size()) throw std::invalid_argument("trailing chars");
                samples.push_back(v);
            } catch (const std::exception&) {
                throw std::runtime_error("malformed sample at line " + std::to_string(line_no));
            }
        }
    }
    flush();
    if (records.empty()) throw std::runtime_error("no records in " + path.string());
    return records;
}

void save_csv(const std::vector<RawRecord>& records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out.precision(17);
    for (std::size_t r = 0; r < records.size(); ++r) {
        if (r) out << "\n";
        out << records[r].label << "," << records[r].sample_rate << "\n";
        for (Eigen::Index i = 0; i < records[r].samples.size(); ++i)
            out << records[r].samples[i] << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

void save_bpgs(const std::vector<Spectrum>& samples, int class_count,
               const std::filesystem::path& path) {
    if (samples.empty()) throw std::invalid_argument("save_bpgs: no samples");
    std::vector<std::vector<const Spectrum*>> by_class(static_cast<std::size_t>(class_count));
    for (const auto& s : samples) {
        if (s.label < 0 || s.label >= class_count)
            throw std::invalid_argument("save_bpgs: label outside class count");
        by_class[static_cast<std::size_t>(s.label)].push_back(&s);
    }
    const std::size_t per_class = by_class[0].size();
    for (const auto& g : by_class)
        if (g.size() != per_class)
            throw std::invalid_argument("save_bpgs: per-class counts must be equal");

    io::Writer w;
    w.magic("BPGS");
    w.u32(1);  // version
    w.u32(static_cast<std::uint32_t>(samples.size()));
    w.u32(static_cast<std::uint32_t>(class_count));
    for (const auto& group : by_class)
        for (const auto* s : group) {
            if (s->x.size() != kSpectrumBins)
                throw std::invalid_argument("save_bpgs: spectrum must have 1024 bins");
            for (Eigen::Index i = 0; i < kSpectrumBins; ++i)
                w.f32(static_cast<float>(s->x[i]));
        }
    w.save(path);
}

std::vector<Spectrum> load_bpgs(const std::filesystem::path& path) {
    auto r = io::Reader::load(path);
    r.expect_magic("BPGS", "spectrum fixture");
    const auto version = r.u32();
    if (version != 1) throw std::runtime_error("unsupported BPGS version");
    const auto count = r.u32();
    const auto class_count = r.u32();
    if (class_count == 0 || count % class_count != 0)
        throw std::runtime_error("BPGS: count not divisible by class count");
    if (r.remaining() != static_cast<std::size_t>(count) * kSpectrumBins * 4)
        throw std::runtime_error("BPGS: size mismatch");
    const auto per_class = count / class_count;

    std::vector<Spectrum> out;
    out.reserve(count);
    for (std::uint32_t c = 0; c < class_count; ++c)
        for (std::uint32_t k = 0; k < per_class; ++k) {
            Spectrum s;
            s.label = static_cast<int>(c);
            s.x.resize(kSpectrumBins);
            for (int i = 0; i < kSpectrumBins; ++i) s.x[i] = static_cast<double>(r.f32());
            out.push_back(std::move(s));
        }
    return out;
}

}  // namespace bpga::signal

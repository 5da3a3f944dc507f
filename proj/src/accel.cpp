// SPDX-License-Identifier: Apache-2.0

#include "bpga/accel.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace bpga::accel {

std::string report_kv(const CycleReport& r) {
    std::ostringstream out;
    out << "rf_select_cycles=" << r.rf_select << "\n"
        << "conv_cycles=" << r.conv << "\n"
        << "pool_cycles=" << r.pool << "\n"
        << "shift_cycles=" << r.shift << "\n"
        << "fc_cycles=" << r.fc << "\n"
        << "classify_cycles=" << r.classify << "\n"
        << "overhead_cycles=" << r.overhead << "\n"
        << "total_cycles=" << r.total() << "\n"
        << "clock_mhz=" << r.clock_mhz << "\n"
        << "latency_us=" << r.microseconds() << "\n";
    return out.str();
}

void write_report_csv(const CycleReport& r, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << "rf_select,conv,pool,shift,fc,classify,overhead,total,clock_mhz,latency_us\n"
        << r.rf_select << "," << r.conv << "," << r.pool << "," << r.shift << "," << r.fc << ","
        << r.classify << "," << r.overhead << "," << r.total() << "," << r.clock_mhz << ","
        << r.microseconds() << "\n";
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

Fixed16 fused_relu_maxpool(Fixed16 x1, Fixed16 x2) {
    if (!(x1.fmt == x2.fmt))
        throw std::invalid_argument("fused_relu_maxpool: operand formats differ");
    const auto a = static_cast<std::uint16_t>(x1.raw);
    const auto b = static_cast<std::uint16_t>(x2.raw);
    const bool neg1 = (a & 0x8000u) != 0;
    const bool neg2 = (b & 0x8000u) != 0;
    if (neg1 && neg2) return {0, x1.fmt};  // both below zero: ReLU kills the pair
    if (neg1) return x2;
    if (neg2) return x1;
    return (a & 0x7FFFu) >= (b & 0x7FFFu) ? x1 : x2;  // nonnegative: magnitude compare
}

Accelerator::Accelerator(quant::RomImage rom, quant::StageFormats fmt, Options opt)
    : rom_(std::move(rom)), fmt_(fmt), opt_(opt) {
    if (rom_.conv_rom.size() != quant::kConvKernels * quant::kConvTaps ||
        rom_.fc_rom.size() != quant::kFcInputs * quant::kFcOutputs ||
        rom_.bias_rom.size() != quant::kConvKernels + quant::kFcOutputs)
        throw std::invalid_argument("Accelerator: ROM word-count mismatch");
    report_.clock_mhz = opt_.clock_mhz;
    report_.overhead = opt_.control_overhead;
}

std::vector<Window> Accelerator::rf_select(std::span<const Fixed16> input) const {
    if (input.size() != static_cast<std::size_t>(nn::kInputLen))
        throw std::invalid_argument("rf_select: input must have 1024 words");
    std::vector<Window> windows(128);
    for (int w = 0; w < 128; ++w)
        for (int t = 0; t < 64; ++t) {
            const int src = 8 * w + t - 28;  // padded index minus the 28-word zero pad
            windows[static_cast<std::size_t>(w)].taps[static_cast<std::size_t>(t)] =
                (src >= 0 && src < nn::kInputLen) ? input[static_cast<std::size_t>(src)]
                                                  : Fixed16{0, fmt_.input};
        }
    return windows;
}

std::array<std::array<Fixed16, 128>, quant::kConvKernels> Accelerator::conv_stage(
    const std::vector<Window>& windows) {
    if (windows.size() != 128) throw std::invalid_argument("conv_stage: need 128 windows");

    const int acc_frac = fmt_.input.frac_bits + fmt_.conv_w.frac_bits;
    std::array<std::array<Fixed16, 128>, quant::kConvKernels> out;
    std::vector<MacUnit> units(128);

    const std::uint64_t before = units[0].cycles;
    for (int k = 0; k < quant::kConvKernels; ++k) {
        for (auto& u : units) u.reset(acc_frac);
        const WideAcc bias =
            to_wide({static_cast<std::int16_t>(rom_.bias_rom[static_cast<std::size_t>(k)]),
                     fmt_.conv_b},
                    acc_frac);
        for (int t = 0; t < quant::kConvTaps; ++t) {
            // one feed cycle: the ROM broadcasts weight (k, t) to all units
            const Fixed16 weight{
                static_cast<std::int16_t>(rom_.conv_rom[static_cast<std::size_t>(
                    k * quant::kConvTaps + t)]),
                fmt_.conv_w};
            for (int w = 0; w < 128; ++w)
                units[static_cast<std::size_t>(w)].feed(
                    windows[static_cast<std::size_t>(w)].taps[static_cast<std::size_t>(t)],
                    weight);
        }
        for (int w = 0; w < 128; ++w) {
            auto& unit = units[static_cast<std::size_t>(w)];
            out[static_cast<std::size_t>(k)][static_cast<std::size_t>(w)] =
                acc_to_fixed(acc_add(unit.acc, bias), fmt_.conv_out);
        }
    }
    report_.conv = units[0].cycles - before;  // units run in lockstep
    return out;
}

std::array<Fixed16, quant::kFcInputs> Accelerator::pool_stage(
    const std::array<std::array<Fixed16, 128>, quant::kConvKernels>& conv_out) const {
    std::array<Fixed16, quant::kFcInputs> pooled;
    for (int k = 0; k < quant::kConvKernels; ++k)
        for (int p = 0; p < 64; ++p)
            pooled[static_cast<std::size_t>(k * 64 + p)] = fused_relu_maxpool(
                conv_out[static_cast<std::size_t>(k)][static_cast<std::size_t>(2 * p)],
                conv_out[static_cast<std::size_t>(k)][static_cast<std::size_t>(2 * p + 1)]);
    return pooled;
}

Fixed16 Accelerator::shift_stage(Fixed16 x) const { return convert(x, fmt_.pooled); }

std::array<Fixed16, quant::kFcOutputs> Accelerator::fc_stage(
    const std::array<Fixed16, quant::kFcInputs>& activations) {
    const int acc_frac = fmt_.pooled.frac_bits + fmt_.fc_w.frac_bits;
    std::vector<MacUnit> units(quant::kFcOutputs);
    for (auto& u : units) u.reset(acc_frac);

    const std::uint64_t before = units[0].cycles;
    for (int i = 0; i < quant::kFcInputs; ++i) {
        // one feed cycle: 10 weight words stream from the ROM
        for (int j = 0; j < quant::kFcOutputs; ++j)
            units[static_cast<std::size_t>(j)].feed(
                activations[static_cast<std::size_t>(i)],
                {static_cast<std::int16_t>(
                     rom_.fc_rom[static_cast<std::size_t>(i * quant::kFcOutputs + j)]),
                 fmt_.fc_w});
    }
    report_.fc = units[0].cycles - before;

    std::array<Fixed16, quant::kFcOutputs> logits;
    for (int j = 0; j < quant::kFcOutputs; ++j) {
        const WideAcc bias = to_wide(
            {static_cast<std::int16_t>(
                 rom_.bias_rom[static_cast<std::size_t>(quant::kConvKernels + j)]),
             fmt_.fc_b},
            acc_frac);
        logits[static_cast<std::size_t>(j)] =
            acc_to_fixed(acc_add(units[static_cast<std::size_t>(j)].acc, bias), fmt_.fc_out);
    }
    return logits;
}

int Accelerator::classify(const std::array<Fixed16, quant::kFcOutputs>& logits) {
    int best = 0;
    for (int j = 1; j < quant::kFcOutputs; ++j)
        if (logits[static_cast<std::size_t>(j)].raw > logits[static_cast<std::size_t>(best)].raw)
            best = j;
    return best;
}

InferenceResult Accelerator::run_inference(const Eigen::ArrayXd& spectrum) {
    if (spectrum.size() != nn::kInputLen)
        throw std::invalid_argument("run_inference: input must have 1024 bins");

    report_ = CycleReport{};
    report_.clock_mhz = opt_.clock_mhz;
    report_.overhead = opt_.control_overhead;

    std::vector<Fixed16> input(static_cast<std::size_t>(nn::kInputLen));
    for (int i = 0; i < nn::kInputLen; ++i)
        input[static_cast<std::size_t>(i)] = quantize(spectrum[i], fmt_.input);

    const auto windows = rf_select(input);
    const auto conv_out = conv_stage(windows);
    const auto pooled = pool_stage(conv_out);
    std::array<Fixed16, quant::kFcInputs> shifted;
    for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] = shift_stage(pooled[i]);
    const auto logits = fc_stage(shifted);

    InferenceResult res;
    res.logits = logits;
    res.label = classify(logits);
    res.cycles = report_;
    return res;
}

}  // namespace bpga::accel

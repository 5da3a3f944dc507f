// SPDX-License-Identifier: Apache-2.0
//
// Cycle-counting, bit-exact simulator of the FPGA accelerator datapath:
// RF selector, ROM-fed MAC arrays for the convolution (128 units, 4 kernel
// passes of 64 feed cycles) and the fully-connected stage (10 reused units
// over 256 cycles), the fused ReLU/max-pool comparator, the decimal-point
// shift stage and the argmax classifier.
//
// Results must be bit-identical to quant::quantized_forward on every
// input; cycle accounting is independent of host scheduling.

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bpga/fixedpoint.hpp"
#include "bpga/quantize.hpp"

namespace bpga::accel {

// One multiply-accumulate datapath element: fixed-point multiplier,
// adder, reset and result register. One product per feed cycle.
struct MacUnit {
    WideAcc acc{0, 0};
    std::uint64_t cycles = 0;

    void reset(int frac_bits) { acc = {0, frac_bits}; }
    void feed(Fixed16 p, Fixed16 q) {
        acc = acc_add(acc, fxp_mul(p, q));
        ++cycles;
    }
};

struct CycleReport {
    std::uint64_t rf_select = 0;
    std::uint64_t conv = 0;
    std::uint64_t pool = 0;
    std::uint64_t shift = 0;
    std::uint64_t fc = 0;
    std::uint64_t classify = 0;
    std::uint64_t overhead = 0;  // FIFO handoff / stage latching, configurable
    double clock_mhz = 100.0;

    std::uint64_t total() const { return rf_select + conv + pool + shift + fc + classify + overhead; }
    double microseconds() const { return static_cast<double>(total()) / clock_mhz; }
};

std::string report_kv(const CycleReport& r);
void write_report_csv(const CycleReport& r, const std::filesystem::path& path);

// 64 taps feeding one MAC pass; 128 windows per input.
struct Window {
    std::array<Fixed16, 64> taps;
};

struct Options {
    std::uint64_t control_overhead = 65;
    double clock_mhz = 100.0;
};

// max(0, x1, x2) decided on the sign bits first: both negative yields the
// zero word, mixed signs keep the nonnegative operand, and only two
// nonnegative words reach the magnitude comparator (low 15 bits).
Fixed16 fused_relu_maxpool(Fixed16 x1, Fixed16 x2);

struct InferenceResult {
    int label = 0;
    std::array<Fixed16, quant::kFcOutputs> logits;
    CycleReport cycles;
};

class Accelerator {
public:
    Accelerator(quant::RomImage rom, quant::StageFormats fmt, Options opt = {});

    // input split into 128 overlapping 64-tap windows at stride 8 over a
    // zero padding of 28 words per side
    std::vector<Window> rf_select(std::span<const Fixed16> input) const;

    // 4 kernel passes, 128 units in lockstep, 64 feed cycles each; bias is
    // added in the wide domain and results narrow to the conv-out format
    std::array<std::array<Fixed16, 128>, quant::kConvKernels> conv_stage(
        const std::vector<Window>& windows);

    // fused ReLU/max-pool over adjacent pairs, flattened channel-major
    std::array<Fixed16, quant::kFcInputs> pool_stage(
        const std::array<std::array<Fixed16, 128>, quant::kConvKernels>& conv_out) const;

    // decimal-point repositioning into the FC-side format
    Fixed16 shift_stage(Fixed16 x) const;

    // 10 units, 256 feed cycles, 10 ROM words consumed per cycle
    std::array<Fixed16, quant::kFcOutputs> fc_stage(
        const std::array<Fixed16, quant::kFcInputs>& activations);

    // argmax on raw words, lowest index on ties
    static int classify(const std::array<Fixed16, quant::kFcOutputs>& logits);

    InferenceResult run_inference(const Eigen::ArrayXd& spectrum);

    const CycleReport& last_report() const { return report_; }

private:
    quant::RomImage rom_;
    quant::StageFormats fmt_;
    Options opt_;
    CycleReport report_;
};

}  // namespace bpga::accel

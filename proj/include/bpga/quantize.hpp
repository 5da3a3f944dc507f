// SPDX-License-Identifier: Apache-2.0
//
// Conversion of a trained float student into the 16-bit fixed-point
// deployment artifact: per-stage format calibration from observed ranges,
// weight/bias quantization, a bit-exact quantized software reference
// forward pass, and the ROM-image / .bpgq export formats.

#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include "bpga/fixedpoint.hpp"
#include "bpga/nn.hpp"
#include "bpga/signal.hpp"

namespace bpga::quant {

// One format per pipeline stage. conv_out is the format emitted by the
// convolution accumulators; pooled is the format the shift stage converts
// pooled activations into for the fully-connected side.
struct StageFormats {
    FixedFormat input;
    FixedFormat conv_w, conv_b, conv_out;
    FixedFormat pooled;
    FixedFormat fc_w, fc_b, fc_out;

    bool operator==(const StageFormats&) const = default;
};

constexpr int kConvKernels = 4;
constexpr int kConvTaps = 64;
constexpr int kFcInputs = 256;
constexpr int kFcOutputs = 10;
constexpr int kParamWords = kConvKernels * kConvTaps + kConvKernels + kFcInputs * kFcOutputs +
                            kFcOutputs;  // 2830

struct QuantizedModel {
    StageFormats fmt;
    std::array<std::array<std::int16_t, kConvTaps>, kConvKernels> conv_w{};
    std::array<std::int16_t, kConvKernels> conv_b{};
    std::vector<std::int16_t> fc_w;  // input-major: fc_w[i*10 + j]
    std::array<std::int16_t, kFcOutputs> fc_b{};

    // provenance, recorded in run manifests (not part of the wire format)
    std::string source_hash, calib_hash;
};

// Hardware-ordered memory layout: conv ROM kernel-major (kernel 0 taps
// 0..63, ...), FC ROM input-major in 256 groups of 10, bias registers
// 4 conv + 10 FC.
struct RomImage {
    std::vector<std::uint16_t> conv_rom;  // 256 words
    std::vector<std::uint16_t> fc_rom;    // 2560 words
    std::vector<std::uint16_t> bias_rom;  // 14 words
};

// Float forward passes over the calibration set record per-stage ranges;
// every stage and parameter tensor gets the smallest covering format.
// safety_margin reserves one extra integer bit on the data-dependent
// stages.
StageFormats calibrate(const nn::StudentNet& model, const std::vector<signal::Spectrum>& calib,
                       bool safety_margin = false);

QuantizedModel quantize_model(const nn::StudentNet& model, const StageFormats& fmt);

struct QuantForward {
    std::array<Fixed16, kFcOutputs> logits;
    int label = 0;  // argmax, lowest index on ties
};

// Bit-exact reference semantics of the accelerator datapath: wide-
// accumulator dot products, bias add in the wide domain, fused
// ReLU/max-pool, shift to the FC-side format, final argmax on raw words.
QuantForward quantized_forward(const QuantizedModel& qm, const Eigen::ArrayXd& spectrum);

// .bpgq: magic BPGQ, version u16, stage-format table (stage id u8,
// int_bits u8, frac_bits u8), parameter words little-endian i16 in
// RomImage order, trailing CRC32.
void export_model(const QuantizedModel& qm, const std::filesystem::path& path);
QuantizedModel import_model(const std::filesystem::path& path);

RomImage make_rom(const QuantizedModel& qm);

// One 4-hex-digit uppercase word per line; writes conv.hex, fc.hex and
// bias.hex under dir.
void export_rom(const QuantizedModel& qm, const std::filesystem::path& dir);
std::vector<std::uint16_t> load_hex(const std::filesystem::path& path);

// Reassemble a RomImage from the three hex files.
RomImage load_rom(const std::filesystem::path& dir);

}  // namespace bpga::quant

// SPDX-License-Identifier: Apache-2.0
//
// Signed 16-bit fixed-point number system with a configurable
// integer/fraction split, saturating quantization, and a 48-bit wide
// accumulator matching a DSP multiply-accumulate datapath.
//
// A Q(X,Y) value stores one sign bit, X integer bits and Y fraction bits
// in a 16-bit two's-complement word, X + Y == 15. The represented real
// value is raw * 2^-Y.

#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace bpga {

// Bit allocation of a 16-bit word: 1 sign bit + int_bits + frac_bits == 16.
struct FixedFormat {
    std::uint8_t int_bits;
    std::uint8_t frac_bits;

    FixedFormat() : int_bits(0), frac_bits(15) {}
    FixedFormat(int ib, int fb);

    bool operator==(const FixedFormat&) const = default;

    double resolution() const;   // 2^-frac_bits
    std::string str() const;     // "(2,13)"
};

// One quantized value. raw is two's complement; value == raw * 2^-frac_bits.
struct Fixed16 {
    std::int16_t raw = 0;
    FixedFormat fmt;
};

// 48-bit accumulator. frac_bits is the effective fraction width, normally
// the sum of the two operand fraction widths feeding the multiplier.
// Never overflows for <= 2^15 accumulation steps of 16x16-bit products
// (31-bit product + 15-bit headroom <= 46 bits), but overflow is still
// checked and is a hard error: it signals a mis-sized format allocation.
struct WideAcc {
    std::int64_t raw = 0;
    int frac_bits = 0;
};

// Round real -> nearest representable, ties to even, then saturate to the
// 16-bit range. NaN input is a contract violation.
Fixed16 quantize(double value, FixedFormat fmt);

// Exact inverse map of the stored word.
double dequantize(Fixed16 v);

// Exact integer product; result fraction width is the sum of the operands'.
WideAcc fxp_mul(Fixed16 a, Fixed16 b);

// Exact addition of equal-fraction accumulators. Throws on 48-bit overflow
// or on a fraction-width mismatch.
WideAcc acc_add(WideAcc acc, WideAcc p);

// Realign a 16-bit word into the wide domain at the given fraction width.
// Left shifts are exact; right shifts round half-even.
WideAcc to_wide(Fixed16 v, int frac_bits);

// Reposition the binary point and narrow back to 16 bits: shift, round
// half-even, saturate. Bit-exactly equivalent to quantizing the exact
// rational value held by the accumulator.
Fixed16 acc_to_fixed(WideAcc acc, FixedFormat out_fmt);

// Pure format conversion of a 16-bit word (the hardware "shift" stage).
Fixed16 convert(Fixed16 v, FixedFormat out_fmt);

// Smallest format covering every value: int_bits is the least X >= 0 with
// max|v| < 2^X, fraction gets the remaining bits. Throws if max|v| >= 2^15
// or the input is empty/non-finite.
FixedFormat fit_format(std::span<const double> values);

// Shared rounding helper (raw >> s with ties to even), exposed because the
// quantizer, the accumulator narrowing and tests all need the same rule.
std::int64_t round_half_even_shift(std::int64_t raw, int s);

}  // namespace bpga

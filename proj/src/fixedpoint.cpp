// SPDX-License-Identifier: Apache-2.0

#include "bpga/fixedpoint.hpp"

#include <cmath>
#include <stdexcept>

namespace bpga {

namespace {

constexpr std::int64_t kRawMin = -32768;
constexpr std::int64_t kRawMax = 32767;
constexpr std::int64_t kAccMax = (std::int64_t{1} << 47) - 1;
constexpr std::int64_t kAccMin = -(std::int64_t{1} << 47);

std::int64_t check_acc_range(std::int64_t raw) {
    if (raw > kAccMax || raw < kAccMin)
        throw std::overflow_error("wide accumulator overflow (mis-sized format allocation)");
    return raw;
}

// Nearest integer, ties to even. Caller guarantees |x| is small enough to
// fit an int64 (quantize saturates beforehand).
std::int64_t round_half_even(double x) {
    const double f = std::floor(x);
    const double d = x - f;
    const auto base = static_cast<std::int64_t>(f);
    if (d > 0.5) return base + 1;
    if (d < 0.5) return base;
    return (base & 1) ? base + 1 : base;
}

}  // namespace

FixedFormat::FixedFormat(int ib, int fb)
    : int_bits(static_cast<std::uint8_t>(ib)), frac_bits(static_cast<std::uint8_t>(fb)) {
    if (ib < 0 || fb < 0 || 1 + ib + fb != 16)
        throw std::invalid_argument("FixedFormat: need 1 + int_bits + frac_bits == 16");
}

double FixedFormat::resolution() const { return std::ldexp(1.0, -frac_bits); }

std::string FixedFormat::str() const {
    return "(" + std::to_string(int_bits) + "," + std::to_string(frac_bits) + ")";
}

Fixed16 quantize(double value, FixedFormat fmt) {
    if (std::isnan(value)) throw std::invalid_argument("quantize: NaN input");
    const double scaled = std::ldexp(value, fmt.frac_bits);
    std::int64_t raw;
    if (scaled >= 65536.0) {
        raw = kRawMax;
    } else if (scaled <= -65536.0) {
        raw = kRawMin;
    } else {
        raw = round_half_even(scaled);
        if (raw > kRawMax) raw = kRawMax;
        if (raw < kRawMin) raw = kRawMin;
    }
    return {static_cast<std::int16_t>(raw), fmt};
}

double dequantize(Fixed16 v) { return std::ldexp(static_cast<double>(v.raw), -v.fmt.frac_bits); }

WideAcc fxp_mul(Fixed16 a, Fixed16 b) {
    return {static_cast<std::int64_t>(a.raw) * static_cast<std::int64_t>(b.raw),
            a.fmt.frac_bits + b.fmt.frac_bits};
}

WideAcc acc_add(WideAcc acc, WideAcc p) {
    if (acc.frac_bits != p.frac_bits)
        throw std::invalid_argument("acc_add: fraction width mismatch");
    return {check_acc_range(acc.raw + p.raw), acc.frac_bits};
}

std::int64_t round_half_even_shift(std::int64_t raw, int s) {
    if (s <= 0) return raw;
    if (s > 62) return 0;  // |raw| < 2^47 << 2^s: rounds to zero
    const std::int64_t q = raw >> s;  // arithmetic shift == floor
    const std::int64_t rem = raw - (q << s);
    const std::int64_t half = std::int64_t{1} << (s - 1);
    if (rem > half || (rem == half && (q & 1))) return q + 1;
    return q;
}

WideAcc to_wide(Fixed16 v, int frac_bits) {
    const int d = frac_bits - v.fmt.frac_bits;
    std::int64_t raw = d >= 0 ? (static_cast<std::int64_t>(v.raw) << d)
                              : round_half_even_shift(v.raw, -d);
    return {check_acc_range(raw), frac_bits};
}

Fixed16 acc_to_fixed(WideAcc acc, FixedFormat out_fmt) {
    const int d = acc.frac_bits - out_fmt.frac_bits;
    std::int64_t raw = d >= 0 ? round_half_even_shift(acc.raw, d) : (acc.raw << -d);
    if (raw > kRawMax) raw = kRawMax;
    if (raw < kRawMin) raw = kRawMin;
    return {static_cast<std::int16_t>(raw), out_fmt};
}

Fixed16 convert(Fixed16 v, FixedFormat out_fmt) {
    return acc_to_fixed({v.raw, v.fmt.frac_bits}, out_fmt);
}

FixedFormat fit_format(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("fit_format: empty value set");
    double m = 0.0;
    for (double v : values) {
        if (!std::isfinite(v)) throw std::invalid_argument("fit_format: non-finite value");
        m = std::max(m, std::fabs(v));
    }
    int x = 0;
    while (m >= std::ldexp(1.0, x)) {
        if (++x > 15) throw std::invalid_argument("fit_format: |value| >= 2^15 is unrepresentable");
    }
    return {x, 15 - x};
}

}  // namespace bpga

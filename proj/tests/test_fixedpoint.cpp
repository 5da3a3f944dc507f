// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bpga/fixedpoint.hpp"
#include "bpga/rng.hpp"
#include "oracles.hpp"

using namespace bpga;

TEST_CASE("format invariants") {
    CHECK(FixedFormat(2, 13).int_bits == 2);
    CHECK(FixedFormat(0, 15).frac_bits == 15);
    CHECK(FixedFormat(15, 0).int_bits == 15);
    CHECK_THROWS(FixedFormat(3, 13));
    CHECK_THROWS(FixedFormat(16, 0));
    CHECK(FixedFormat(2, 13).str() == "(2,13)");
}

TEST_CASE("quantize examples") {
    const FixedFormat q213(2, 13);
    CHECK(quantize(0.0, q213).raw == 0);
    CHECK(quantize(1.0, q213).raw == 8192);

    // saturation vs the independent round-and-clamp oracle
    const auto sat = quantize(5.0, q213);
    CHECK(sat.raw == 32767);
    CHECK(sat.raw == oracles::round_clamp16(5.0L * 8192.0L));
    CHECK(dequantize(sat) == doctest::Approx(3.99988).epsilon(1e-4));

    CHECK(quantize(-5.0, q213).raw == -32768);
    CHECK_THROWS(quantize(std::nan(""), q213));

    // round-half-even at the representable midpoints
    const FixedFormat q78(7, 8);
    CHECK(quantize(0.001953125, q78).raw == 0);   // 0.5 ulp -> even 0
    CHECK(quantize(0.005859375, q78).raw == 2);   // 1.5 ulp -> even 2
    CHECK(quantize(-0.001953125, q78).raw == 0);
    CHECK(quantize(-0.005859375, q78).raw == -2);
}

TEST_CASE("dequantize examples") {
    CHECK(dequantize({0, FixedFormat(2, 13)}) == 0.0);
    CHECK(dequantize({8192, FixedFormat(2, 13)}) == 1.0);
    CHECK(dequantize({-1, FixedFormat(7, 8)}) == -std::ldexp(1.0, -8));
}

TEST_CASE("fxp_mul examples") {
    const FixedFormat q213(2, 13);
    const FixedFormat q78(7, 8);

    const auto one_sq = fxp_mul({8192, q213}, {8192, q213});
    CHECK(one_sq.raw == 67108864);
    CHECK(one_sq.frac_bits == 26);
    CHECK(std::ldexp(static_cast<double>(one_sq.raw), -one_sq.frac_bits) == 1.0);

    CHECK(fxp_mul({0, q213}, {12345, q78}).raw == 0);

    const auto m = fxp_mul({-4096, q213}, {256, q78});
    CHECK(m.raw == -1048576);
    CHECK(m.frac_bits == 21);
    CHECK(std::ldexp(static_cast<double>(m.raw), -m.frac_bits) == -0.5);
}

TEST_CASE("acc_add examples and overflow") {
    const WideAcc p{123456, 26};
    const auto r = acc_add({0, 26}, p);
    CHECK(r.raw == p.raw);

    // 64 copies of 1.0 accumulate exactly
    WideAcc acc{0, 26};
    const auto one = fxp_mul({8192, FixedFormat(2, 13)}, {8192, FixedFormat(2, 13)});
    for (int i = 0; i < 64; ++i) acc = acc_add(acc, one);
    CHECK(std::ldexp(static_cast<double>(acc.raw), -acc.frac_bits) == 64.0);

    CHECK_THROWS_AS(acc_add({1, 26}, {2, 25}), std::invalid_argument);
    const std::int64_t near_max = (std::int64_t{1} << 47) - 1;
    CHECK_THROWS_AS(acc_add({near_max, 26}, {1, 26}), std::overflow_error);
}

TEST_CASE("acc_to_fixed examples") {
    const FixedFormat q78(7, 8);
    // 1.0 held at frac 26
    CHECK(acc_to_fixed({std::int64_t{1} << 26, 26}, q78).raw == 256);
    // 200.0 saturates to ~127.996
    const auto sat = acc_to_fixed({std::int64_t{200} << 26, 26}, q78);
    CHECK(sat.raw == 32767);
    CHECK(sat.raw == oracles::round_clamp16(200.0L * 256.0L));
    // 2^-30 is far below the (7,8) resolution and rounds to zero
    CHECK(acc_to_fixed({1, 30}, q78).raw == 0);
}

TEST_CASE("convert is the shift stage") {
    const Fixed16 one{8192, FixedFormat(2, 13)};
    const auto shifted = convert(one, FixedFormat(7, 8));
    CHECK(shifted.raw == 256);
    CHECK(dequantize(shifted) == 1.0);
    CHECK(convert({1, FixedFormat(2, 13)}, FixedFormat(7, 8)).raw == 0);
}

TEST_CASE("fit_format examples and bounds") {
    const double small[] = {-0.4, 0.1, 0.4};
    CHECK(fit_format(small) == FixedFormat(0, 15));
    const double conv[] = {0.0, -3.2, 1.0};
    CHECK(fit_format(conv) == FixedFormat(2, 13));
    const double fc[] = {100.0, -7.0};
    CHECK(fit_format(fc) == FixedFormat(7, 8));

    const double huge[] = {32768.0};
    CHECK_THROWS(fit_format(huge));
    CHECK_THROWS(fit_format(std::span<const double>{}));

    // minimality: max < 2^X and (X >= 1 implies max >= 2^(X-1))
    Rng rng(7);
    for (int i = 0; i < 2000; ++i) {
        const double v[] = {rng.uniform(-20000.0, 20000.0), rng.uniform(-1.0, 1.0)};
        const auto f = fit_format(v);
        const double m = std::max(std::fabs(v[0]), std::fabs(v[1]));
        CHECK(m < std::ldexp(1.0, f.int_bits));
        if (f.int_bits >= 1) CHECK(m >= std::ldexp(1.0, f.int_bits - 1));
    }
}

TEST_CASE("round trip within half ulp and monotone quantize") {
    Rng rng(11);
    for (int i = 0; i < 20000; ++i) {
        const int ib = static_cast<int>(rng.uniform_int(0, 15));
        const FixedFormat fmt(ib, 15 - ib);
        const double range = std::ldexp(1.0, ib);
        // in-range: within the representable span plus half an ulp
        const double v = std::ldexp(static_cast<double>(rng.uniform_int(-32768, 32767)) +
                                        rng.uniform(-0.5, 0.5),
                                    -fmt.frac_bits);
        const auto q = quantize(v, fmt);
        CHECK(std::fabs(dequantize(q) - v) <= std::ldexp(1.0, -fmt.frac_bits - 1));

        const double v2 = rng.uniform(-range * 1.5, range * 1.5);
        const double lo = std::min(v, v2), hi = std::max(v, v2);
        CHECK(quantize(lo, fmt).raw <= quantize(hi, fmt).raw);
    }
}

TEST_CASE("mul/accumulate exactness vs 128-bit oracle") {
    Rng rng(13);
    for (int trial = 0; trial < 2000; ++trial) {
        const int fa = static_cast<int>(rng.uniform_int(0, 15));
        const int fb = static_cast<int>(rng.uniform_int(0, 15));
        const FixedFormat qa(15 - fa, fa), qb(15 - fb, fb);
        std::vector<std::int16_t> a(64), b(64);
        WideAcc acc{0, fa + fb};
        for (int i = 0; i < 64; ++i) {
            a[static_cast<std::size_t>(i)] = static_cast<std::int16_t>(rng.uniform_int(-32768, 32767));
            b[static_cast<std::size_t>(i)] = static_cast<std::int16_t>(rng.uniform_int(-32768, 32767));
            acc = acc_add(acc, fxp_mul({a[static_cast<std::size_t>(i)], qa},
                                       {b[static_cast<std::size_t>(i)], qb}));
        }
        const __int128 expect = oracles::exact_dot(a, b);
        CHECK(static_cast<__int128>(acc.raw) == expect);
    }
}

TEST_CASE("acc_to_fixed consistent with float-side quantize") {
    Rng rng(17);
    for (int trial = 0; trial < 20000; ++trial) {
        const int fa = static_cast<int>(rng.uniform_int(0, 15));
        const int fb = static_cast<int>(rng.uniform_int(0, 15));
        const int fo = static_cast<int>(rng.uniform_int(0, 15));
        const FixedFormat qa(15 - fa, fa), qb(15 - fb, fb), qo(15 - fo, fo);
        const Fixed16 a{static_cast<std::int16_t>(rng.uniform_int(-32768, 32767)), qa};
        const Fixed16 b{static_cast<std::int16_t>(rng.uniform_int(-32768, 32767)), qb};
        const auto lhs = acc_to_fixed(fxp_mul(a, b), qo);
        const auto rhs = quantize(dequantize(a) * dequantize(b), qo);
        CHECK(lhs.raw == rhs.raw);
    }
}

TEST_CASE("to_wide realigns bias words") {
    const Fixed16 bias{100, FixedFormat(0, 15)};
    const auto wide = to_wide(bias, 26);
    CHECK(wide.raw == std::int64_t{100} << 11);
    CHECK(wide.frac_bits == 26);
    // narrowing realignment rounds half-even
    CHECK(to_wide({3, FixedFormat(0, 15)}, 14).raw == 2);
    CHECK(to_wide({5, FixedFormat(0, 15)}, 14).raw == 2);
}

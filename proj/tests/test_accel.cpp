// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bpga/accel.hpp"
#include "oracles.hpp"

using namespace bpga;
using namespace bpga::accel;

namespace {

quant::StageFormats test_formats() {
    quant::StageFormats f;
    f.input = FixedFormat(5, 10);
    f.conv_w = FixedFormat(0, 15);
    f.conv_b = FixedFormat(0, 15);
    f.conv_out = FixedFormat(2, 13);
    f.pooled = FixedFormat(2, 13);
    f.fc_w = FixedFormat(0, 15);
    f.fc_b = FixedFormat(2, 13);
    f.fc_out = FixedFormat(7, 8);
    return f;
}

quant::QuantizedModel random_model(std::uint64_t seed) {
    Rng rng(seed);
    quant::QuantizedModel qm;
    qm.fmt = test_formats();
    for (auto& kernel : qm.conv_w)
        for (auto& w : kernel) w = static_cast<std::int16_t>(rng.uniform_int(-2000, 2000));
    for (auto& b : qm.conv_b) b = static_cast<std::int16_t>(rng.uniform_int(-500, 500));
    qm.fc_w.resize(quant::kFcInputs * quant::kFcOutputs);
    for (auto& w : qm.fc_w) w = static_cast<std::int16_t>(rng.uniform_int(-300, 300));
    for (auto& b : qm.fc_b) b = static_cast<std::int16_t>(rng.uniform_int(-500, 500));
    return qm;
}

Eigen::ArrayXd random_spectrum(std::uint64_t seed, double scale = 3.0) {
    Rng rng(seed);
    Eigen::ArrayXd x(1024);
    for (int i = 0; i < 1024; ++i) x[i] = scale * rng.gaussian();
    return x;
}

}  // namespace

TEST_CASE("rom word counts are validated") {
    auto qm = random_model(1);
    auto rom = quant::make_rom(qm);
    CHECK_NOTHROW(Accelerator(rom, qm.fmt));
    auto bad = rom;
    bad.conv_rom.pop_back();
    CHECK_THROWS(Accelerator(bad, qm.fmt));
    bad = rom;
    bad.bias_rom.push_back(0);
    CHECK_THROWS(Accelerator(bad, qm.fmt));
}

TEST_CASE("rf_select windows") {
    auto qm = random_model(2);
    Accelerator sim(quant::make_rom(qm), qm.fmt);

    std::vector<Fixed16> zeros(1024, Fixed16{0, qm.fmt.input});
    const auto zwin = sim.rf_select(zeros);
    REQUIRE(zwin.size() == 128);
    for (const auto& w : zwin)
        for (const auto& t : w.taps) CHECK(t.raw == 0);

    // distinct word per position to check the indexing exactly
    std::vector<Fixed16> input(1024);
    for (int i = 0; i < 1024; ++i)
        input[static_cast<std::size_t>(i)] = {static_cast<std::int16_t>(i + 1), qm.fmt.input};
    const auto win = sim.rf_select(input);

    // window 0 starts with the 28-word zero padding
    for (int t = 0; t < 28; ++t) CHECK(win[0].taps[static_cast<std::size_t>(t)].raw == 0);
    CHECK(win[0].taps[28].raw == 1);

    // window i covers padded range [8i, 8i+64): tap t maps to input 8i+t-28
    for (int i : {1, 17, 64, 127})
        for (int t = 0; t < 64; ++t) {
            const int src = 8 * i + t - 28;
            const std::int16_t want =
                (src >= 0 && src < 1024) ? static_cast<std::int16_t>(src + 1) : std::int16_t{0};
            CHECK(win[static_cast<std::size_t>(i)].taps[static_cast<std::size_t>(t)].raw == want);
        }

    std::vector<Fixed16> wrong(100);
    CHECK_THROWS(sim.rf_select(wrong));
}

TEST_CASE("mac unit accumulates exactly") {
    Rng rng(3);
    const FixedFormat qa(5, 10), qb(0, 15);
    MacUnit unit;
    unit.reset(25);

    std::vector<std::int16_t> a(64), b(64);
    for (int i = 0; i < 64; ++i) {
        a[static_cast<std::size_t>(i)] = static_cast<std::int16_t>(rng.uniform_int(-32768, 32767));
        b[static_cast<std::size_t>(i)] = static_cast<std::int16_t>(rng.uniform_int(-32768, 32767));
        unit.feed({a[static_cast<std::size_t>(i)], qa}, {b[static_cast<std::size_t>(i)], qb});
    }
    CHECK(unit.cycles == 64);
    CHECK(static_cast<__int128>(unit.acc.raw) == oracles::exact_dot(a, b));

    // one-hot weight selects a tap; zero weights give zero
    MacUnit sel;
    sel.reset(25);
    for (int i = 0; i < 64; ++i)
        sel.feed({a[static_cast<std::size_t>(i)], qa},
                 {static_cast<std::int16_t>(i == 20 ? 1 : 0), qb});
    CHECK(sel.acc.raw == a[20]);
}

TEST_CASE("fused_relu_maxpool equals max(0, x1, x2)") {
    const FixedFormat fmt(2, 13);
    auto enc = [&](double v) { return quantize(v, fmt); };

    CHECK(fused_relu_maxpool(enc(-1.5), enc(-0.2)).raw == 0);
    CHECK(fused_relu_maxpool(enc(-1.5), enc(0.2)).raw == enc(0.2).raw);
    CHECK(fused_relu_maxpool(enc(0.2), enc(-1.5)).raw == enc(0.2).raw);
    CHECK(fused_relu_maxpool(enc(1.5), enc(0.2)).raw == enc(1.5).raw);

    CHECK_THROWS(fused_relu_maxpool(enc(1.0), quantize(1.0, FixedFormat(7, 8))));

    // exhaustive-style random sweep plus a dense grid near zero
    Rng rng(4);
    auto reference = [&](std::int16_t r1, std::int16_t r2) {
        const double m = std::max({0.0, std::ldexp(static_cast<double>(r1), -13),
                                   std::ldexp(static_cast<double>(r2), -13)});
        return quantize(m, fmt).raw;
    };
    for (int i = 0; i < 1000000; ++i) {
        const auto r1 = static_cast<std::int16_t>(rng.uniform_int(-32768, 32767));
        const auto r2 = static_cast<std::int16_t>(rng.uniform_int(-32768, 32767));
        const auto got = fused_relu_maxpool({r1, fmt}, {r2, fmt}).raw;
        if (got != reference(r1, r2)) {
            REQUIRE(got == reference(r1, r2));  // report the failing pair
        }
    }
    for (int r1 = -40; r1 <= 40; ++r1)
        for (int r2 = -40; r2 <= 40; ++r2) {
            const auto got = fused_relu_maxpool({static_cast<std::int16_t>(r1), fmt},
                                                {static_cast<std::int16_t>(r2), fmt})
                                 .raw;
            CHECK(got == reference(static_cast<std::int16_t>(r1), static_cast<std::int16_t>(r2)));
        }
}

TEST_CASE("conv stage: zero ROM yields biases, 256 cycles") {
    auto qm = random_model(5);
    for (auto& kernel : qm.conv_w)
        for (auto& w : kernel) w = 0;
    Accelerator sim(quant::make_rom(qm), qm.fmt);

    std::vector<Fixed16> input(1024);
    Rng rng(6);
    for (auto& v : input)
        v = {static_cast<std::int16_t>(rng.uniform_int(-10000, 10000)), qm.fmt.input};
    const auto out = sim.conv_stage(sim.rf_select(input));
    for (int k = 0; k < 4; ++k) {
        const auto want =
            convert({qm.conv_b[static_cast<std::size_t>(k)], qm.fmt.conv_b}, qm.fmt.conv_out);
        for (int w = 0; w < 128; ++w)
            CHECK(out[static_cast<std::size_t>(k)][static_cast<std::size_t>(w)].raw == want.raw);
    }
    CHECK(sim.last_report().conv == 256);
}

TEST_CASE("pool stage") {
    auto qm = random_model(7);
    Accelerator sim(quant::make_rom(qm), qm.fmt);

    std::array<std::array<Fixed16, 128>, 4> conv_out;
    // strictly negative channel pools to zero words
    for (int k = 0; k < 4; ++k)
        for (int w = 0; w < 128; ++w)
            conv_out[static_cast<std::size_t>(k)][static_cast<std::size_t>(w)] = {
                static_cast<std::int16_t>(-1 - w), qm.fmt.conv_out};
    const auto pooled = sim.pool_stage(conv_out);
    CHECK(pooled.size() == 256);
    for (const auto& p : pooled) CHECK(p.raw == 0);

    // matches float relu+maxpool then requantize on random words
    Rng rng(8);
    for (int k = 0; k < 4; ++k)
        for (int w = 0; w < 128; ++w)
            conv_out[static_cast<std::size_t>(k)][static_cast<std::size_t>(w)] = {
                static_cast<std::int16_t>(rng.uniform_int(-32768, 32767)), qm.fmt.conv_out};
    const auto pooled2 = sim.pool_stage(conv_out);
    for (int k = 0; k < 4; ++k)
        for (int p = 0; p < 64; ++p) {
            const double a = dequantize(
                conv_out[static_cast<std::size_t>(k)][static_cast<std::size_t>(2 * p)]);
            const double b = dequantize(
                conv_out[static_cast<std::size_t>(k)][static_cast<std::size_t>(2 * p + 1)]);
            const double want = std::max({0.0, a, b});
            CHECK(dequantize(pooled2[static_cast<std::size_t>(k * 64 + p)]) == want);
        }
}

TEST_CASE("shift stage") {
    auto qm = random_model(9);
    qm.fmt.conv_out = FixedFormat(2, 13);
    qm.fmt.pooled = FixedFormat(7, 8);
    Accelerator sim(quant::make_rom(qm), qm.fmt);

    CHECK(sim.shift_stage({8192, FixedFormat(2, 13)}).raw == 256);  // 1.0 exact
    CHECK(sim.shift_stage({1, FixedFormat(2, 13)}).raw == 0);       // below resolution

    Rng rng(10);
    for (int i = 0; i < 10000; ++i) {
        const auto r = static_cast<std::int16_t>(rng.uniform_int(-32768, 32767));
        const auto got = sim.shift_stage({r, FixedFormat(2, 13)});
        const auto want = quantize(std::ldexp(static_cast<double>(r), -13), FixedFormat(7, 8));
        CHECK(got.raw == want.raw);
    }
}

TEST_CASE("fc stage: zero activations yield biases, 256 cycles") {
    auto qm = random_model(11);
    Accelerator sim(quant::make_rom(qm), qm.fmt);

    std::array<Fixed16, 256> zeros;
    zeros.fill({0, qm.fmt.pooled});
    const auto logits = sim.fc_stage(zeros);
    for (int j = 0; j < 10; ++j) {
        const auto want =
            convert({qm.fc_b[static_cast<std::size_t>(j)], qm.fmt.fc_b}, qm.fmt.fc_out);
        CHECK(logits[static_cast<std::size_t>(j)].raw == want.raw);
    }
    CHECK(sim.last_report().fc == 256);
}

TEST_CASE("classify") {
    const FixedFormat fmt(7, 8);
    std::array<Fixed16, 10> logits;
    logits.fill({-5, fmt});
    logits[6] = {100, fmt};
    CHECK(Accelerator::classify(logits) == 6);

    logits.fill({42, fmt});
    CHECK(Accelerator::classify(logits) == 0);  // all equal: lowest index

    // agreement with float argmax on tie-free random logits
    Rng rng(12);
    for (int trial = 0; trial < 1000; ++trial) {
        std::array<Fixed16, 10> z;
        bool tie = false;
        for (auto& v : z) v = {static_cast<std::int16_t>(rng.uniform_int(-32768, 32767)), fmt};
        for (int i = 0; i < 10 && !tie; ++i)
            for (int j = i + 1; j < 10; ++j) tie |= z[static_cast<std::size_t>(i)].raw ==
                                                    z[static_cast<std::size_t>(j)].raw;
        if (tie) continue;
        int best = 0;
        for (int j = 1; j < 10; ++j)
            if (dequantize(z[static_cast<std::size_t>(j)]) >
                dequantize(z[static_cast<std::size_t>(best)]))
                best = j;
        CHECK(Accelerator::classify(z) == best);
    }
}

TEST_CASE("run_inference is bit-identical to the quantized reference") {
    for (std::uint64_t model_seed : {21u, 22u, 23u}) {
        const auto qm = random_model(model_seed);
        Accelerator sim(quant::make_rom(qm), qm.fmt);
        for (int i = 0; i < 100; ++i) {
            const auto x = random_spectrum(1000 + static_cast<std::uint64_t>(i));
            const auto hw = sim.run_inference(x);
            const auto sw = quant::quantized_forward(qm, x);
            CHECK(hw.label == sw.label);
            for (int j = 0; j < 10; ++j)
                CHECK(hw.logits[static_cast<std::size_t>(j)].raw ==
                      sw.logits[static_cast<std::size_t>(j)].raw);
        }
    }
}

TEST_CASE("cycle report anchors") {
    const auto qm = random_model(31);
    Accelerator sim(quant::make_rom(qm), qm.fmt);  // default 65 overhead, 100 MHz

    const auto res1 = sim.run_inference(random_spectrum(51));
    const auto res2 = sim.run_inference(random_spectrum(52, 30.0));
    for (const auto& r : {res1.cycles, res2.cycles}) {
        CHECK(r.conv == 256);
        CHECK(r.fc == 256);
        CHECK(r.overhead == 65);
        CHECK(r.total() == 577);
        CHECK(r.microseconds() == doctest::Approx(5.77));
        // conv+fc alone at 100 MHz
        CHECK(static_cast<double>(r.conv + r.fc) / r.clock_mhz == doctest::Approx(5.12));
    }

    // determinism across repeated runs
    const auto again = sim.run_inference(random_spectrum(51));
    CHECK(again.label == res1.label);
    for (int j = 0; j < 10; ++j)
        CHECK(again.logits[static_cast<std::size_t>(j)].raw ==
              res1.logits[static_cast<std::size_t>(j)].raw);

    // report rendering
    const auto kv = report_kv(res1.cycles);
    CHECK(kv.find("conv_cycles=256") != std::string::npos);
    CHECK(kv.find("total_cycles=577") != std::string::npos);
    CHECK(kv.find("latency_us=5.77") != std::string::npos);
}

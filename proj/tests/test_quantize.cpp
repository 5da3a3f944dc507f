// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "bpga/binio.hpp"
#include "bpga/quantize.hpp"
#include "oracles.hpp"

using namespace bpga;
using namespace bpga::quant;

namespace {

nn::StudentNet scaled_student(std::uint64_t seed, double conv_scale = 1.0, double fc_scale = 1.0) {
    Rng rng(seed);
    auto net = nn::StudentNet::init(rng);
    net.conv.w *= conv_scale;
    net.fc.w *= fc_scale;
    return net;
}

std::vector<signal::Spectrum> random_spectra(int n, std::uint64_t seed, double scale = 2.0) {
    Rng rng(seed);
    std::vector<signal::Spectrum> out;
    for (int i = 0; i < n; ++i) {
        signal::Spectrum s;
        s.label = i % 10;
        s.x.resize(signal::kSpectrumBins);
        for (int b = 0; b < signal::kSpectrumBins; ++b) s.x[b] = scale * rng.gaussian();
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

TEST_CASE("calibrate picks minimal covering formats") {
    auto net = scaled_student(1);
    // force |w| <= 0.9 so the weight stage must land on (0,15)
    net.conv.w = net.conv.w.cwiseMax(-0.9).cwiseMin(0.9) * 0.99;
    const auto calib = random_spectra(32, 2);
    const auto fmt = calibrate(net, calib);
    CHECK(fmt.conv_w == FixedFormat(0, 15));

    // determinism: same inputs, same formats
    CHECK(calibrate(net, calib) == fmt);

    // conv activations spanning +-3.2 land on (2,13)
    double conv_range = 0.0;
    {
        nn::Matrix x(static_cast<Eigen::Index>(calib.size()), nn::kInputLen);
        for (std::size_t r = 0; r < calib.size(); ++r)
            x.row(static_cast<Eigen::Index>(r)) = calib[r].x.matrix().transpose();
        conv_range = nn::student_forward_cached(net, x).conv_out.x.cwiseAbs().maxCoeff();
    }
    if (conv_range > 2.0 && conv_range < 4.0) CHECK(fmt.conv_out == FixedFormat(2, 13));

    CHECK_THROWS(calibrate(net, {}));
}

TEST_CASE("quantize_model basics") {
    auto net = scaled_student(3);
    const auto calib = random_spectra(16, 4);
    const auto fmt = calibrate(net, calib);

    // zero weights map to zero words
    auto zeroed = net;
    zeroed.conv.w.setZero();
    const auto qz = quantize_model(zeroed, fmt);
    for (const auto& kernel : qz.conv_w)
        for (auto w : kernel) CHECK(w == 0);

    // round-trip error within half an ulp per weight
    const auto qm = quantize_model(net, fmt);
    const double ulp = std::ldexp(1.0, -fmt.conv_w.frac_bits);
    for (int k = 0; k < 4; ++k)
        for (int t = 0; t < 64; ++t) {
            const double back = std::ldexp(
                static_cast<double>(qm.conv_w[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)]),
                -fmt.conv_w.frac_bits);
            CHECK(std::fabs(back - net.conv.w(k, t)) <= 0.5 * ulp + 1e-15);
        }

    // full-model histogram against the independent round-and-clamp oracle
    for (int i = 0; i < kFcInputs; ++i)
        for (int j = 0; j < kFcOutputs; ++j) {
            const auto want = oracles::round_clamp16(
                static_cast<long double>(net.fc.w(i, j)) *
                static_cast<long double>(1 << fmt.fc_w.frac_bits));
            CHECK(qm.fc_w[static_cast<std::size_t>(i * kFcOutputs + j)] == want);
        }
}

TEST_CASE("quantized_forward zero input yields bias path") {
    auto net = scaled_student(5);
    const auto calib = random_spectra(16, 6);
    const auto fmt = calibrate(net, calib);
    const auto qm = quantize_model(net, fmt);

    const auto out = quantized_forward(qm, Eigen::ArrayXd::Zero(1024));
    // float reference of the same computation
    nn::Matrix x = nn::Matrix::Zero(1, 1024);
    const auto fl = nn::student_forward(net, x);
    for (int j = 0; j < 10; ++j) {
        const double got = dequantize(out.logits[static_cast<std::size_t>(j)]);
        CHECK(std::fabs(got - fl(0, j)) < 0.02);
    }
}

TEST_CASE("argmax parity with the float model on a trained-like model") {
    // moderate weights keep logits well separated from ties
    auto net = scaled_student(7, 1.0, 1.0);
    const auto calib = random_spectra(64, 8);
    const auto fmt = calibrate(net, calib);
    const auto qm = quantize_model(net, fmt);

    const auto inputs = random_spectra(1000, 9);
    int agree = 0;
    for (const auto& s : inputs) {
        nn::Matrix x(1, nn::kInputLen);
        x.row(0) = s.x.matrix().transpose();
        const int fl = nn::predict(nn::student_forward(net, x))[0];
        const int qt = quantized_forward(qm, s.x).label;
        agree += fl == qt;
    }
    CHECK(agree >= 990);
}

TEST_CASE("export/import round trip and corruption") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "bpga_quant_test";
    fs::create_directories(dir);
    const auto path = dir / "model.bpgq";

    auto net = scaled_student(11);
    const auto fmt = calibrate(net, random_spectra(16, 12));
    const auto qm = quantize_model(net, fmt);
    export_model(qm, path);

    const auto back = import_model(path);
    CHECK(back.fmt == qm.fmt);
    CHECK(back.conv_w == qm.conv_w);
    CHECK(back.conv_b == qm.conv_b);
    CHECK(back.fc_w == qm.fc_w);
    CHECK(back.fc_b == qm.fc_b);

    // parameter storage is exactly 2830 16-bit words
    CHECK(kParamWords == 2830);
    CHECK(fs::file_size(path) == 4 + 2 + 8 * 3 + 2830 * 2 + 4);

    // corrupted magic
    {
        auto bytes = io::Reader::load(path).data();
        bytes[0] = 'X';
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS(import_model(path));

    // flipped payload bit fails the CRC
    export_model(qm, path);
    {
        auto bytes = io::Reader::load(path).data();
        bytes[100] ^= 0x01;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_WITH_AS(import_model(path), "CRC mismatch in .bpgq file", std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("golden byte snapshot of a fixed model") {
    // deterministic model + calibration set -> the artifact bytes and CRC
    // must never drift between builds
    auto net = scaled_student(42);
    const auto fmt = calibrate(net, random_spectra(16, 43));
    const auto qm = quantize_model(net, fmt);

    io::Writer w;
    const auto rom = make_rom(qm);
    for (auto word : rom.conv_rom) w.u16(word);
    for (auto word : rom.fc_rom) w.u16(word);
    for (auto word : rom.bias_rom) w.u16(word);
    const auto crc = io::crc32(w.data().data(), w.data().size());
    // frozen after the first verified build
    CHECK(crc == 2013191527u);
}

TEST_CASE("ROM image layout and hex files") {
    namespace fs = std::filesystem;
    auto net = scaled_student(13);
    const auto fmt = calibrate(net, random_spectra(16, 14));
    const auto qm = quantize_model(net, fmt);

    const auto rom = make_rom(qm);
    CHECK(rom.conv_rom.size() == 256);
    CHECK(rom.fc_rom.size() == 2560);
    CHECK(rom.bias_rom.size() == 14);

    // kernel-major conv order, input-major fc order
    CHECK(rom.conv_rom[64 * 2 + 5] ==
          static_cast<std::uint16_t>(qm.conv_w[2][5]));
    CHECK(rom.fc_rom[10 * 100 + 3] ==
          static_cast<std::uint16_t>(qm.fc_w[100 * 10 + 3]));
    CHECK(rom.bias_rom[2] == static_cast<std::uint16_t>(qm.conv_b[2]));
    CHECK(rom.bias_rom[4 + 7] == static_cast<std::uint16_t>(qm.fc_b[7]));

    const auto dir = fs::temp_directory_path() / "bpga_rom_test";
    export_rom(qm, dir);
    CHECK(load_hex(dir / "conv.hex") == rom.conv_rom);
    CHECK(load_hex(dir / "fc.hex") == rom.fc_rom);
    CHECK(load_hex(dir / "bias.hex") == rom.bias_rom);

    // hex format: four uppercase digits per line
    std::ifstream in(dir / "conv.hex");
    std::string first;
    std::getline(in, first);
    CHECK(first.size() == 4);
    for (char c : first) CHECK(((c >= '0' && c <= '9') || (c >= 'A' && c <= 'F')));
    fs::remove_all(dir);
}

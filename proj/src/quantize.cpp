// SPDX-License-Identifier: Apache-2.0

#include "bpga/quantize.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "bpga/binio.hpp"

namespace bpga::quant {

namespace {

FixedFormat fit_scalar(double max_abs, bool margin) {
    const double v[1] = {max_abs};
    FixedFormat f = fit_format(v);
    if (margin && f.int_bits < 15) f = FixedFormat(f.int_bits + 1, f.frac_bits - 1);
    return f;
}

double max_abs(const Eigen::Ref<const Eigen::MatrixXd>& m) {
    return m.size() ? m.cwiseAbs().maxCoeff() : 0.0;
}

void check_student_geometry(const nn::StudentNet& model) {
    if (model.conv.out_ch != kConvKernels || model.conv.in_ch != 1 ||
        model.conv.kernel != kConvTaps || model.conv.stride != 8 || model.conv.pad != 28 ||
        model.fc.w.rows() != kFcInputs || model.fc.w.cols() != kFcOutputs)
        throw std::invalid_argument("quantize: unexpected student geometry");
}

}  // namespace

StageFormats calibrate(const nn::StudentNet& model, const std::vector<signal::Spectrum>& calib,
                       bool safety_margin) {
    check_student_geometry(model);
    if (calib.empty()) throw std::invalid_argument("calibrate: empty calibration set");

    double in_max = 0.0, conv_max = 0.0, pool_max = 0.0, out_max = 0.0;
    constexpr Eigen::Index kChunk = 128;
    for (std::size_t start = 0; start < calib.size();
         start += static_cast<std::size_t>(kChunk)) {
        const auto n = std::min<std::size_t>(kChunk, calib.size() - start);
        nn::Matrix x(static_cast<Eigen::Index>(n), nn::kInputLen);
        for (std::size_t r = 0; r < n; ++r) {
            const auto& s = calib[start + r];
            if (s.x.size() != nn::kInputLen)
                throw std::invalid_argument("calibrate: sample width mismatch");
            x.row(static_cast<Eigen::Index>(r)) = s.x.matrix().transpose();
        }
        const auto cache = nn::student_forward_cached(model, x);
        in_max = std::max(in_max, max_abs(x));
        conv_max = std::max(conv_max, max_abs(cache.conv_out.x));
        pool_max = std::max(pool_max, max_abs(cache.pool.y.x));
        out_max = std::max(out_max, max_abs(cache.logits));
    }

    StageFormats fmt;
    fmt.input = fit_scalar(in_max, safety_margin);
    fmt.conv_w = fit_scalar(max_abs(model.conv.w), false);
    fmt.conv_b = fit_scalar(model.conv.b.cwiseAbs().maxCoeff(), false);
    fmt.conv_out = fit_scalar(conv_max, safety_margin);
    fmt.pooled = fit_scalar(pool_max, safety_margin);
    fmt.fc_w = fit_scalar(max_abs(model.fc.w), false);
    fmt.fc_b = fit_scalar(model.fc.b.cwiseAbs().maxCoeff(), false);
    fmt.fc_out = fit_scalar(out_max, safety_margin);
    return fmt;
}

QuantizedModel quantize_model(const nn::StudentNet& model, const StageFormats& fmt) {
    check_student_geometry(model);
    QuantizedModel qm;
    qm.fmt = fmt;
    for (int k = 0; k < kConvKernels; ++k) {
        for (int t = 0; t < kConvTaps; ++t)
            qm.conv_w[static_cast<std::size_t>(k)][static_cast<std::size_t>(t)] =
                quantize(model.conv.w(k, t), fmt.conv_w).raw;
        qm.conv_b[static_cast<std::size_t>(k)] = quantize(model.conv.b[k], fmt.conv_b).raw;
    }
    qm.fc_w.resize(kFcInputs * kFcOutputs);
    for (int i = 0; i < kFcInputs; ++i)
        for (int j = 0; j < kFcOutputs; ++j)
            qm.fc_w[static_cast<std::size_t>(i * kFcOutputs + j)] =
                quantize(model.fc.w(i, j), fmt.fc_w).raw;
    for (int j = 0; j < kFcOutputs; ++j)
        qm.fc_b[static_cast<std::size_t>(j)] = quantize(model.fc.b[j], fmt.fc_b).raw;
    return qm;
}

QuantForward quantized_forward(const QuantizedModel& qm, const Eigen::ArrayXd& spectrum) {
    if (spectrum.size() != nn::kInputLen)
        throw std::invalid_argument("quantized_forward: input must have 1024 bins");
    const StageFormats& fmt = qm.fmt;

    std::array<std::int16_t, nn::kInputLen> q_in;
    for (int i = 0; i < nn::kInputLen; ++i)
        q_in[static_cast<std::size_t>(i)] = quantize(spectrum[i], fmt.input).raw;

    // convolution: 128 windows of 64 taps at stride 8 over 28-padding
    const int acc_frac = fmt.input.frac_bits + fmt.conv_w.frac_bits;
    std::array<std::array<std::int16_t, 128>, kConvKernels> conv_out;
    for (int k = 0; k < kConvKernels; ++k) {
        const WideAcc bias = to_wide({qm.conv_b[static_cast<std::size_t>(k)], fmt.conv_b}, acc_frac);
        for (int w = 0; w < 128; ++w) {
            WideAcc acc{0, acc_frac};
            for (int t = 0; t < kConvTaps; ++t) {
                const int src = 8 * w + t - 28;
                const std::int16_t xr =
                    (src >= 0 && src < nn::kInputLen) ? q_in[static_cast<std::size_t>(src)] : 0;
                acc = acc_add(acc, fxp_mul({xr, fmt.input},
                                           {qm.conv_w[static_cast<std::size_t>(k)]
                                                     [static_cast<std::size_t>(t)],
                                            fmt.conv_w}));
            }
            acc = acc_add(acc, bias);
            conv_out[static_cast<std::size_t>(k)][static_cast<std::size_t>(w)] =
                acc_to_fixed(acc, fmt.conv_out).raw;
        }
    }

    // fused ReLU + max-pool (k=2, s=2), then shift into the FC-side format
    std::array<std::int16_t, kFcInputs> act;
    for (int k = 0; k < kConvKernels; ++k)
        for (int p = 0; p < 64; ++p) {
            const std::int16_t a = conv_out[static_cast<std::size_t>(k)][static_cast<std::size_t>(2 * p)];
            const std::int16_t b =
                conv_out[static_cast<std::size_t>(k)][static_cast<std::size_t>(2 * p + 1)];
            std::int16_t m = a > b ? a : b;
            if (m < 0) m = 0;
            act[static_cast<std::size_t>(k * 64 + p)] =
                convert({m, fmt.conv_out}, fmt.pooled).raw;
        }

    // fully-connected: 10 dot products over the 256 activations
    const int fc_frac = fmt.pooled.frac_bits + fmt.fc_w.frac_bits;
    QuantForward out;
    for (int j = 0; j < kFcOutputs; ++j) {
        WideAcc acc{0, fc_frac};
        for (int i = 0; i < kFcInputs; ++i)
            acc = acc_add(acc, fxp_mul({act[static_cast<std::size_t>(i)], fmt.pooled},
                                       {qm.fc_w[static_cast<std::size_t>(i * kFcOutputs + j)],
                                        fmt.fc_w}));
        acc = acc_add(acc, to_wide({qm.fc_b[static_cast<std::size_t>(j)], fmt.fc_b}, fc_frac));
        out.logits[static_cast<std::size_t>(j)] = acc_to_fixed(acc, fmt.fc_out);
    }

    out.label = 0;
    for (int j = 1; j < kFcOutputs; ++j)
        if (out.logits[static_cast<std::size_t>(j)].raw >
            out.logits[static_cast<std::size_t>(out.label)].raw)
            out.label = j;
    return out;
}

// ---------------------------------------------------------------------------
// .bpgq wire format

namespace {

constexpr std::uint16_t kBpgqVersion = 1;

const FixedFormat* stage_by_id(const StageFormats& fmt, int id) {
    switch (id) {
        case 0: return &fmt.input;
        case 1: return &fmt.conv_w;
        case 2: return &fmt.conv_b;
        case 3: return &fmt.conv_out;
        case 4: return &fmt.pooled;
        case 5: return &fmt.fc_w;
        case 6: return &fmt.fc_b;
        case 7: return &fmt.fc_out;
        default: return nullptr;
    }
}

}  // namespace

RomImage make_rom(const QuantizedModel& qm) {
    RomImage rom;
    rom.conv_rom.reserve(kConvKernels * kConvTaps);
    for (const auto& kernel : qm.conv_w)
        for (const auto w : kernel) rom.conv_rom.push_back(static_cast<std::uint16_t>(w));
    rom.fc_rom.reserve(qm.fc_w.size());
    for (const auto w : qm.fc_w) rom.fc_rom.push_back(static_cast<std::uint16_t>(w));
    for (const auto b : qm.conv_b) rom.bias_rom.push_back(static_cast<std::uint16_t>(b));
    for (const auto b : qm.fc_b) rom.bias_rom.push_back(static_cast<std::uint16_t>(b));
    return rom;
}

void export_model(const QuantizedModel& qm, const std::filesystem::path& path) {
    io::Writer w;
    w.magic("BPGQ");
    w.u16(kBpgqVersion);
    for (int id = 0; id < 8; ++id) {
        const FixedFormat* f = stage_by_id(qm.fmt, id);
        w.u8(static_cast<std::uint8_t>(id));
        w.u8(f->int_bits);
        w.u8(f->frac_bits);
    }
    const RomImage rom = make_rom(qm);
    for (auto word : rom.conv_rom) w.i16(static_cast<std::int16_t>(word));
    for (auto word : rom.fc_rom) w.i16(static_cast<std::int16_t>(word));
    for (auto word : rom.bias_rom) w.i16(static_cast<std::int16_t>(word));
    w.u32(io::crc32(w.data().data(), w.data().size()));
    w.save(path);
}

QuantizedModel import_model(const std::filesystem::path& path) {
    auto r = io::Reader::load(path);
    if (r.size() < 4) throw std::runtime_error("truncated .bpgq file");
    const std::uint32_t stored_crc =
        static_cast<std::uint32_t>(r.data()[r.size() - 4]) |
        (static_cast<std::uint32_t>(r.data()[r.size() - 3]) << 8) |
        (static_cast<std::uint32_t>(r.data()[r.size() - 2]) << 16) |
        (static_cast<std::uint32_t>(r.data()[r.size() - 1]) << 24);
    if (io::crc32(r.data().data(), r.size() - 4) != stored_crc)
        throw std::runtime_error("CRC mismatch in .bpgq file");

    r.expect_magic("BPGQ", "quantized model");
    if (r.u16() != kBpgqVersion) throw std::runtime_error("unsupported .bpgq version");

    QuantizedModel qm;
    for (int id = 0; id < 8; ++id) {
        if (r.u8() != id) throw std::runtime_error("bad stage table in .bpgq file");
        const int ib = r.u8();
        const int fb = r.u8();
        const FixedFormat f(ib, fb);  // validates the split
        switch (id) {
            case 0: qm.fmt.input = f; break;
            case 1: qm.fmt.conv_w = f; break;
            case 2: qm.fmt.conv_b = f; break;
            case 3: qm.fmt.conv_out = f; break;
            case 4: qm.fmt.pooled = f; break;
            case 5: qm.fmt.fc_w = f; break;
            case 6: qm.fmt.fc_b = f; break;
            case 7: qm.fmt.fc_out = f; break;
        }
    }
    if (r.remaining() != static_cast<std::size_t>(kParamWords) * 2 + 4)
        throw std::runtime_error("unexpected .bpgq payload size");
    for (auto& kernel : qm.conv_w)
        for (auto& w : kernel) w = r.i16();
    qm.fc_w.resize(kFcInputs * kFcOutputs);
    for (auto& w : qm.fc_w) w = r.i16();
    for (auto& b : qm.conv_b) b = r.i16();
    for (auto& b : qm.fc_b) b = r.i16();
    return qm;
}

// ---------------------------------------------------------------------------
// ROM hex files

namespace {

void write_hex(const std::vector<std::uint16_t>& words, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    char line[8];
    for (auto w : words) {
        std::snprintf(line, sizeof line, "%04X", w);
        out << line << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

void export_rom(const QuantizedModel& qm, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const RomImage rom = make_rom(qm);
    write_hex(rom.conv_rom, dir / "conv.hex");
    write_hex(rom.fc_rom, dir / "fc.hex");
    write_hex(rom.bias_rom, dir / "bias.hex");
}

RomImage load_rom(const std::filesystem::path& dir) {
    RomImage rom;
    rom.conv_rom = load_hex(dir / "conv.hex");
    rom.fc_rom = load_hex(dir / "fc.hex");
    rom.bias_rom = load_hex(dir / "bias.hex");
    return rom;
}

std::vector<std::uint16_t> load_hex(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    std::vector<std::uint16_t> words;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (line.empty()) continue;
        if (line.size() != 4) throw std::runtime_error("bad hex word at line " + std::to_string(line_no));
        std::uint16_t v = 0;
        for (char c : line) {
            const int d = std::isdigit(static_cast<unsigned char>(c)) ? c - '0'
                          : (c >= 'A' && c <= 'F')                    ? c - 'A' + 10
                          : (c >= 'a' && c <= 'f')                    ? c - 'a' + 10
                                                                      : -1;
            if (d < 0) throw std::runtime_error("bad hex word at line " + std::to_string(line_no));
            v = static_cast<std::uint16_t>((v << 4) | d);
        }
        words.push_back(v);
    }
    return words;
}

}  // namespace bpga::quant

// SPDX-License-Identifier: Apache-2.0

#include "bpga/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "bpga/binio.hpp"

namespace bpga::nn {

namespace {

// uniform +-sqrt(1/fan_in), drawn in storage order
void init_uniform(double* data, Eigen::Index n, double bound, Rng& rng) {
    for (Eigen::Index i = 0; i < n; ++i) data[i] = rng.uniform(-bound, bound);
}

void check_finite(const Matrix& m, const char* where) {
    if (!m.allFinite()) throw std::runtime_error(std::string("non-finite values in ") + where);
}

}  // namespace

Conv1d Conv1d::init(int in_ch, int out_ch, int kernel, int stride, int pad, Rng& rng) {
    Conv1d l;
    l.in_ch = in_ch;
    l.out_ch = out_ch;
    l.kernel = kernel;
    l.stride = stride;
    l.pad = pad;
    l.w.resize(out_ch, in_ch * kernel);
    l.b.resize(out_ch);
    const double bound = std::sqrt(1.0 / (in_ch * kernel));
    init_uniform(l.w.data(), l.w.size(), bound, rng);
    init_uniform(l.b.data(), l.b.size(), bound, rng);
    return l;
}

Linear Linear::init(int in, int out, Rng& rng) {
    Linear l;
    l.w.resize(in, out);
    l.b.resize(out);
    const double bound = std::sqrt(1.0 / in);
    init_uniform(l.w.data(), l.w.size(), bound, rng);
    init_uniform(l.b.data(), l.b.size(), bound, rng);
    return l;
}

BatchNorm1d BatchNorm1d::init(int channels) {
    BatchNorm1d bn;
    bn.gamma = Vector::Ones(channels);
    bn.beta = Vector::Zero(channels);
    bn.running_mean = Vector::Zero(channels);
    bn.running_var = Vector::Ones(channels);
    return bn;
}

// ---------------------------------------------------------------------------
// convolution (cross-correlation with zero padding), im2col + GEMM

namespace {

void fill_windows(const Matrix& padded, int lout, int stride, int kernel, Matrix& win) {
    const auto in_ch = padded.cols();
    for (Eigen::Index c = 0; c < in_ch; ++c)
        for (int t = 0; t < kernel; ++t) {
            Eigen::Map<const Vector, 0, Eigen::InnerStride<>> src(
                padded.col(c).data() + t, lout, Eigen::InnerStride<>(stride));
            win.col(c * kernel + t) = src;
        }
}

}  // namespace

Acts conv1d_forward(const Conv1d& layer, const Acts& in) {
    if (in.channels() != layer.in_ch) throw std::invalid_argument("conv1d: channel mismatch");
    const int lout = layer.out_len(in.len);
    if (lout < 1) throw std::invalid_argument("conv1d: input too short");

    Acts out;
    out.batch = in.batch;
    out.len = lout;
    out.x.resize(static_cast<Eigen::Index>(in.batch) * lout, layer.out_ch);

    Matrix padded = Matrix::Zero(in.len + 2 * layer.pad, layer.in_ch);
    Matrix win(lout, layer.in_ch * layer.kernel);
    for (int s = 0; s < in.batch; ++s) {
        padded.middleRows(layer.pad, in.len) = in.x.middleRows(static_cast<Eigen::Index>(s) * in.len, in.len);
        fill_windows(padded, lout, layer.stride, layer.kernel, win);
        auto block = out.x.middleRows(static_cast<Eigen::Index>(s) * lout, lout);
        block.noalias() = win * layer.w.transpose();
        block.rowwise() += layer.b.transpose();
    }
    check_finite(out.x, "conv1d_forward");
    return out;
}

Acts conv1d_backward(const Conv1d& layer, const Acts& in, const Acts& dout, Conv1dGrads& g) {
    const int lout = layer.out_len(in.len);
    if (dout.len != lout || dout.channels() != layer.out_ch || dout.batch != in.batch)
        throw std::invalid_argument("conv1d_backward: shape mismatch");

    g.dw = Matrix::Zero(layer.out_ch, layer.in_ch * layer.kernel);
    g.db = Vector::Zero(layer.out_ch);

    Acts din;
    din.batch = in.batch;
    din.len = in.len;
    din.x = Matrix::Zero(in.x.rows(), in.x.cols());

    Matrix padded = Matrix::Zero(in.len + 2 * layer.pad, layer.in_ch);
    Matrix dpadded(in.len + 2 * layer.pad, layer.in_ch);
    Matrix win(lout, layer.in_ch * layer.kernel);
    Matrix dwin(lout, layer.in_ch * layer.kernel);

    for (int s = 0; s < in.batch; ++s) {
        padded.middleRows(layer.pad, in.len) = in.x.middleRows(static_cast<Eigen::Index>(s) * in.len, in.len);
        fill_windows(padded, lout, layer.stride, layer.kernel, win);
        auto dy = dout.x.middleRows(static_cast<Eigen::Index>(s) * lout, lout);

        g.dw.noalias() += dy.transpose() * win;
        g.db += dy.colwise().sum().transpose();

        dwin.noalias() = dy * layer.w;
        dpadded.setZero();
        for (int c = 0; c < layer.in_ch; ++c)
            for (int t = 0; t < layer.kernel; ++t) {
                Eigen::Map<Vector, 0, Eigen::InnerStride<>> dst(
                    dpadded.col(c).data() + t, lout, Eigen::InnerStride<>(layer.stride));
                dst += dwin.col(static_cast<Eigen::Index>(c) * layer.kernel + t);
            }
        din.x.middleRows(static_cast<Eigen::Index>(s) * in.len, in.len) =
            dpadded.middleRows(layer.pad, in.len);
    }
    return din;
}

// ---------------------------------------------------------------------------
// ReLU / max-pool

Acts relu_forward(const Acts& in) {
    Acts out = in;
    out.x = in.x.cwiseMax(0.0);
    return out;
}

Acts relu_backward(const Acts& in, const Acts& dout) {
    Acts din = dout;
    din.x = (in.x.array() > 0.0).select(dout.x, Matrix::Zero(dout.x.rows(), dout.x.cols()));
    return din;
}

PoolCache maxpool_forward(const Acts& in, int k, int s) {
    const int lout = (in.len - k) / s + 1;
    if (lout < 1) throw std::invalid_argument("maxpool: input shorter than window");
    PoolCache cache;
    cache.in_len = in.len;
    cache.k = k;
    cache.s = s;
    cache.y.batch = in.batch;
    cache.y.len = lout;
    cache.y.x.resize(static_cast<Eigen::Index>(in.batch) * lout, in.channels());
    cache.argmax.resize(cache.y.x.rows(), cache.y.x.cols());

    for (int b = 0; b < in.batch; ++b)
        for (int c = 0; c < in.channels(); ++c)
            for (int i = 0; i < lout; ++i) {
                const Eigen::Index base = static_cast<Eigen::Index>(b) * in.len + i * s;
                Eigen::Index best = base;
                double best_v = in.x(base, c);
                for (int j = 1; j < k; ++j)
                    if (in.x(base + j, c) > best_v) {  // strict: first index wins ties
                        best_v = in.x(base + j, c);
                        best = base + j;
                    }
                const Eigen::Index row = static_cast<Eigen::Index>(b) * lout + i;
                cache.y.x(row, c) = best_v;
                cache.argmax(row, c) = best;
            }
    return cache;
}

Acts maxpool_backward(const PoolCache& cache, const Acts& dout) {
    Acts din;
    din.batch = dout.batch;
    din.len = cache.in_len;
    din.x = Matrix::Zero(static_cast<Eigen::Index>(dout.batch) * cache.in_len, dout.channels());
    for (Eigen::Index r = 0; r < dout.x.rows(); ++r)
        for (Eigen::Index c = 0; c < dout.x.cols(); ++c)
            din.x(cache.argmax(r, c), c) += dout.x(r, c);
    return din;
}

// ---------------------------------------------------------------------------
// batch normalization (population statistics over batch*len rows)

BnCache batchnorm_train(BatchNorm1d& bn, const Acts& in) {
    const auto n = static_cast<double>(in.x.rows());
    BnCache cache;
    cache.y = in;
    cache.xhat.resize(in.x.rows(), in.x.cols());
    cache.inv_std.resize(in.x.cols());

    for (Eigen::Index c = 0; c < in.x.cols(); ++c) {
        const double mean = in.x.col(c).mean();
        const double var = (in.x.col(c).array() - mean).square().mean();
        const double inv_std = 1.0 / std::sqrt(var + bn.eps);
        cache.inv_std[c] = inv_std;
        cache.xhat.col(c) = (in.x.col(c).array() - mean) * inv_std;
        cache.y.x.col(c) = bn.gamma[c] * cache.xhat.col(c).array() + bn.beta[c];
        bn.running_mean[c] = (1.0 - bn.momentum) * bn.running_mean[c] + bn.momentum * mean;
        // unbiased running variance, matching common framework behavior
        const double unbiased = n > 1.0 ? var * n / (n - 1.0) : var;
        bn.running_var[c] = (1.0 - bn.momentum) * bn.running_var[c] + bn.momentum * unbiased;
    }
    return cache;
}

Acts batchnorm_infer(const BatchNorm1d& bn, const Acts& in) {
    Acts out = in;
    for (Eigen::Index c = 0; c < in.x.cols(); ++c) {
        const double inv_std = 1.0 / std::sqrt(bn.running_var[c] + bn.eps);
        out.x.col(c) =
            (bn.gamma[c] * inv_std) * (in.x.col(c).array() - bn.running_mean[c]) + bn.beta[c];
    }
    return out;
}

Acts batchnorm_backward(const BatchNorm1d& bn, const BnCache& cache, const Acts& dout,
                        Vector& dgamma, Vector& dbeta) {
    const auto n = static_cast<double>(dout.x.rows());
    dgamma.resize(dout.x.cols());
    dbeta.resize(dout.x.cols());
    Acts din = dout;
    for (Eigen::Index c = 0; c < dout.x.cols(); ++c) {
        const auto dy = dout.x.col(c).array();
        const auto xh = cache.xhat.col(c).array();
        dbeta[c] = dy.sum();
        dgamma[c] = (dy * xh).sum();
        const auto dxhat = dy * bn.gamma[c];
        const double sum_dxhat = dxhat.sum();
        const double sum_dxhat_xhat = (dxhat * xh).sum();
        din.x.col(c) =
            (cache.inv_std[c] / n) * (n * dxhat - sum_dxhat - xh * sum_dxhat_xhat);
    }
    return din;
}

// ---------------------------------------------------------------------------
// flatten / linear

Matrix flatten(const Acts& in) {
    Matrix out(in.batch, static_cast<Eigen::Index>(in.channels()) * in.len);
    for (int b = 0; b < in.batch; ++b)
        for (int c = 0; c < in.channels(); ++c)
            out.row(b).segment(static_cast<Eigen::Index>(c) * in.len, in.len) =
                in.x.col(c).segment(static_cast<Eigen::Index>(b) * in.len, in.len).transpose();
    return out;
}

Acts flatten_backward(const Matrix& dflat, int batch, int len, int channels) {
    Acts din;
    din.batch = batch;
    din.len = len;
    din.x.resize(static_cast<Eigen::Index>(batch) * len, channels);
    for (int b = 0; b < batch; ++b)
        for (int c = 0; c < channels; ++c)
            din.x.col(c).segment(static_cast<Eigen::Index>(b) * len, len) =
                dflat.row(b).segment(static_cast<Eigen::Index>(c) * len, len).transpose();
    return din;
}

Matrix linear_forward(const Linear& layer, const Matrix& x) {
    Matrix y = x * layer.w;
    y.rowwise() += layer.b.transpose();
    check_finite(y, "linear_forward");
    return y;
}

Matrix linear_backward(const Linear& layer, const Matrix& x, const Matrix& dout, Matrix& dw,
                       Vector& db) {
    dw.noalias() = x.transpose() * dout;
    db = dout.colwise().sum().transpose();
    return dout * layer.w.transpose();
}

// ---------------------------------------------------------------------------
// scalar helpers

Vector softmax_T(const Vector& logits, double T) {
    if (!(T > 0.0)) throw std::invalid_argument("softmax_T: temperature must be positive");
    Vector z = logits / T;
    const double m = z.maxCoeff();
    Vector e = (z.array() - m).exp();
    return e / e.sum();
}

double cosine_lr(int epoch, int total_epochs, double base_lr) {
    return 0.5 * base_lr * (1.0 + std::cos(M_PI * static_cast<double>(epoch) / total_epochs));
}

std::vector<int> predict(const Matrix& logits) {
    std::vector<int> out(static_cast<std::size_t>(logits.rows()));
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        int best = 0;
        for (Eigen::Index c = 1; c < logits.cols(); ++c)
            if (logits(r, c) > logits(r, best)) best = static_cast<int>(c);
        out[static_cast<std::size_t>(r)] = best;
    }
    return out;
}

// ---------------------------------------------------------------------------
// optimizer

SgdState SgdState::make(const std::vector<ParamRef>& params, double momentum) {
    SgdState s;
    s.momentum = momentum;
    for (const auto& p : params) s.velocity.push_back(Vector::Zero(p.size));
    return s;
}

void sgd_step(const std::vector<ParamRef>& params, const std::vector<ParamRef>& grads,
              SgdState& state, double lr) {
    if (params.size() != grads.size() || params.size() != state.velocity.size())
        throw std::invalid_argument("sgd_step: parameter/gradient list mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        Eigen::Map<Vector> p(params[i].data, params[i].size);
        Eigen::Map<const Vector> g(grads[i].data, grads[i].size);
        state.velocity[i] = state.momentum * state.velocity[i] + g;
        p -= lr * state.velocity[i];
    }
}

// ---------------------------------------------------------------------------
// student

StudentNet StudentNet::init(Rng& rng) {
    StudentNet net;
    net.conv = Conv1d::init(1, 4, 64, 8, 28, rng);
    net.fc = Linear::init(256, 10, rng);
    return net;
}

namespace {
Acts as_acts(const Matrix& spectra) {
    Acts a;
    a.batch = static_cast<int>(spectra.rows());
    a.len = static_cast<int>(spectra.cols());
    a.x.resize(spectra.size(), 1);
    for (int b = 0; b < a.batch; ++b)
        a.x.col(0).segment(static_cast<Eigen::Index>(b) * a.len, a.len) = spectra.row(b).transpose();
    return a;
}
}  // namespace

StudentCache student_forward_cached(const StudentNet& net, const Matrix& spectra) {
    if (spectra.cols() != kInputLen) throw std::invalid_argument("student: input must be 1024 wide");
    StudentCache c;
    c.in = as_acts(spectra);
    c.conv_out = conv1d_forward(net.conv, c.in);
    c.relu_out = relu_forward(c.conv_out);
    c.pool = maxpool_forward(c.relu_out, 2, 2);
    c.flat = flatten(c.pool.y);
    c.logits = linear_forward(net.fc, c.flat);
    return c;
}

Matrix student_forward(const StudentNet& net, const Matrix& spectra) {
    return student_forward_cached(net, spectra).logits;
}

StudentGrads student_backward(const StudentNet& net, const StudentCache& cache,
                              const Matrix& dlogits) {
    StudentGrads g;
    Matrix dflat = linear_backward(net.fc, cache.flat, dlogits, g.fc_dw, g.fc_db);
    Acts dpool = flatten_backward(dflat, cache.pool.y.batch, cache.pool.y.len,
                                  cache.pool.y.channels());
    Acts drelu = maxpool_backward(cache.pool, dpool);
    Acts dconv = relu_backward(cache.conv_out, drelu);
    conv1d_backward(net.conv, cache.in, dconv, g.conv);
    return g;
}

std::vector<ParamRef> StudentGrads::refs() {
    return {{conv.dw.data(), conv.dw.size()},
            {conv.db.data(), conv.db.size()},
            {fc_dw.data(), fc_dw.size()},
            {fc_db.data(), fc_db.size()}};
}

std::vector<ParamRef> student_params(StudentNet& net) {
    return {{net.conv.w.data(), net.conv.w.size()},
            {net.conv.b.data(), net.conv.b.size()},
            {net.fc.w.data(), net.fc.w.size()},
            {net.fc.b.data(), net.fc.b.size()}};
}

std::size_t param_count(const StudentNet& net) {
    return static_cast<std::size_t>(net.conv.w.size() + net.conv.b.size() + net.fc.w.size() +
                                    net.fc.b.size());
}

// ---------------------------------------------------------------------------
// teacher

std::vector<ConvSpec> default_teacher_plan() {
    return {{16, 64, 8, 24}, {32, 3, 1, 1}, {64, 3, 1, 1}, {64, 3, 1, 1}, {64, 3, 1, 1},
            {64, 3, 1, 1}};
}

TeacherNet TeacherNet::init(Rng& rng) { return init(default_teacher_plan(), kInputLen, rng); }

TeacherNet TeacherNet::init(const std::vector<ConvSpec>& plan, int input_len, Rng& rng) {
    TeacherNet net;
    net.input_len = input_len;
    int len = input_len;
    int ch = 1;
    for (const auto& spec : plan) {
        net.convs.push_back(Conv1d::init(ch, spec.out_ch, spec.kernel, spec.stride, spec.pad, rng));
        net.bns.push_back(BatchNorm1d::init(spec.out_ch));
        len = net.convs.back().out_len(len);
        if (len < 2) throw std::invalid_argument("teacher plan: feature map exhausted");
        len = (len - 2) / 2 + 1;  // pool k=2, s=2
        ch = spec.out_ch;
    }
    net.fc = Linear::init(ch * len, 10, rng);
    return net;
}

Matrix teacher_forward(const TeacherNet& net, const Matrix& spectra) {
    Acts a = as_acts(spectra);
    for (std::size_t i = 0; i < net.convs.size(); ++i) {
        a = conv1d_forward(net.convs[i], a);
        a = batchnorm_infer(net.bns[i], a);
        a = relu_forward(a);
        a = maxpool_forward(a, 2, 2).y;
    }
    return linear_forward(net.fc, flatten(a));
}

Matrix teacher_forward_train(TeacherNet& net, const Matrix& spectra, TeacherCache& cache) {
    cache.blocks.clear();
    cache.blocks.resize(net.convs.size());
    Acts a = as_acts(spectra);
    for (std::size_t i = 0; i < net.convs.size(); ++i) {
        auto& blk = cache.blocks[i];
        blk.in = a;
        blk.conv_out = conv1d_forward(net.convs[i], blk.in);
        blk.bn = batchnorm_train(net.bns[i], blk.conv_out);
        blk.relu_out = relu_forward(blk.bn.y);
        blk.pool = maxpool_forward(blk.relu_out, 2, 2);
        a = blk.pool.y;
    }
    cache.flat = flatten(a);
    cache.logits = linear_forward(net.fc, cache.flat);
    return cache.logits;
}

TeacherGrads teacher_backward(const TeacherNet& net, const TeacherCache& cache,
                              const Matrix& dlogits) {
    TeacherGrads g;
    g.convs.resize(net.convs.size());
    g.dgamma.resize(net.convs.size());
    g.dbeta.resize(net.convs.size());

    Matrix dflat = linear_backward(net.fc, cache.flat, dlogits, g.fc_dw, g.fc_db);
    const auto& last = cache.blocks.back().pool.y;
    Acts d = flatten_backward(dflat, last.batch, last.len, last.channels());

    for (std::size_t i = net.convs.size(); i-- > 0;) {
        const auto& blk = cache.blocks[i];
        Acts drelu = maxpool_backward(blk.pool, d);
        Acts dbn_y = relu_backward(blk.bn.y, drelu);
        Acts dconv = batchnorm_backward(net.bns[i], blk.bn, dbn_y, g.dgamma[i], g.dbeta[i]);
        d = conv1d_backward(net.convs[i], blk.in, dconv, g.convs[i]);
    }
    return g;
}

std::vector<ParamRef> TeacherGrads::refs() {
    std::vector<ParamRef> out;
    for (std::size_t i = 0; i < convs.size(); ++i) {
        out.push_back({convs[i].dw.data(), convs[i].dw.size()});
        out.push_back({convs[i].db.data(), convs[i].db.size()});
        out.push_back({dgamma[i].data(), dgamma[i].size()});
        out.push_back({dbeta[i].data(), dbeta[i].size()});
    }
    out.push_back({fc_dw.data(), fc_dw.size()});
    out.push_back({fc_db.data(), fc_db.size()});
    return out;
}

std::vector<ParamRef> teacher_params(TeacherNet& net) {
    std::vector<ParamRef> out;
    for (std::size_t i = 0; i < net.convs.size(); ++i) {
        out.push_back({net.convs[i].w.data(), net.convs[i].w.size()});
        out.push_back({net.convs[i].b.data(), net.convs[i].b.size()});
        out.push_back({net.bns[i].gamma.data(), net.bns[i].gamma.size()});
        out.push_back({net.bns[i].beta.data(), net.bns[i].beta.size()});
    }
    out.push_back({net.fc.w.data(), net.fc.w.size()});
    out.push_back({net.fc.b.data(), net.fc.b.size()});
    return out;
}

std::size_t param_count(const TeacherNet& net) {
    std::size_t n = static_cast<std::size_t>(net.fc.w.size() + net.fc.b.size());
    for (std::size_t i = 0; i < net.convs.size(); ++i)
        n += static_cast<std::size_t>(net.convs[i].w.size() + net.convs[i].b.size() +
                                      net.bns[i].gamma.size() + net.bns[i].beta.size());
    return n;
}

// ---------------------------------------------------------------------------
// checkpoints
//
// Layout: magic "BPGF" | version u16 | model kind u8 (1 student, 2 teacher)
// | input_len u32 | layer count u16 | layer table | float32 payload.
// Table entry: kind u8 (1 conv, 2 batchnorm, 3 linear) + five u32 fields
// (conv: out,in,kernel,stride,pad; bn: channels; linear: in,out).
// Payload per layer: conv w (out-major, in, tap) then b; bn gamma, beta,
// running mean, running var; linear w (in-major) then b.

namespace {

constexpr std::uint16_t kCheckpointVersion = 1;

void write_matrix(io::Writer& w, const Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) w.f32(static_cast<float>(m(r, c)));
}

void write_vector(io::Writer& w, const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) w.f32(static_cast<float>(v[i]));
}

void read_matrix(io::Reader& r, Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = static_cast<double>(r.f32());
}

void read_vector(io::Reader& r, Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = static_cast<double>(r.f32());
}

void write_conv_entry(io::Writer& w, const Conv1d& c) {
    w.u8(1);
    w.u32(static_cast<std::uint32_t>(c.out_ch));
    w.u32(static_cast<std::uint32_t>(c.in_ch));
    w.u32(static_cast<std::uint32_t>(c.kernel));
    w.u32(static_cast<std::uint32_t>(c.stride));
    w.u32(static_cast<std::uint32_t>(c.pad));
}

void write_bn_entry(io::Writer& w, const BatchNorm1d& bn) {
    w.u8(2);
    w.u32(static_cast<std::uint32_t>(bn.gamma.size()));
    for (int i = 0; i < 4; ++i) w.u32(0);
}

void write_linear_entry(io::Writer& w, const Linear& l) {
    w.u8(3);
    w.u32(static_cast<std::uint32_t>(l.w.rows()));
    w.u32(static_cast<std::uint32_t>(l.w.cols()));
    for (int i = 0; i < 3; ++i) w.u32(0);
}

struct LayerEntry {
    std::uint8_t kind;
    std::uint32_t f[5];
};

std::vector<LayerEntry> read_header(io::Reader& r, std::uint8_t expect_kind,
                                    std::uint32_t* input_len) {
    r.expect_magic("BPGF", "model checkpoint");
    if (r.u16() != kCheckpointVersion) throw std::runtime_error("unsupported checkpoint version");
    const auto kind = r.u8();
    if (kind != expect_kind) throw std::runtime_error("checkpoint holds a different model kind");
    *input_len = r.u32();
    const auto count = r.u16();
    std::vector<LayerEntry> entries(count);
    for (auto& e : entries) {
        e.kind = r.u8();
        for (auto& f : e.f) f = r.u32();
    }
    return entries;
}

}  // namespace

void save_checkpoint(const StudentNet& net, const std::filesystem::path& path) {
    io::Writer w;
    w.magic("BPGF");
    w.u16(kCheckpointVersion);
    w.u8(1);
    w.u32(kInputLen);
    w.u16(2);
    write_conv_entry(w, net.conv);
    write_linear_entry(w, net.fc);
    write_matrix(w, net.conv.w);
    write_vector(w, net.conv.b);
    write_matrix(w, net.fc.w);
    write_vector(w, net.fc.b);
    w.save(path);
}

void save_checkpoint(const TeacherNet& net, const std::filesystem::path& path) {
    io::Writer w;
    w.magic("BPGF");
    w.u16(kCheckpointVersion);
    w.u8(2);
    w.u32(static_cast<std::uint32_t>(net.input_len));
    w.u16(static_cast<std::uint16_t>(2 * net.convs.size() + 1));
    for (std::size_t i = 0; i < net.convs.size(); ++i) {
        write_conv_entry(w, net.convs[i]);
        write_bn_entry(w, net.bns[i]);
    }
    write_linear_entry(w, net.fc);
    for (std::size_t i = 0; i < net.convs.size(); ++i) {
        write_matrix(w, net.convs[i].w);
        write_vector(w, net.convs[i].b);
        write_vector(w, net.bns[i].gamma);
        write_vector(w, net.bns[i].beta);
        write_vector(w, net.bns[i].running_mean);
        write_vector(w, net.bns[i].running_var);
    }
    write_matrix(w, net.fc.w);
    write_vector(w, net.fc.b);
    w.save(path);
}

StudentNet load_student(const std::filesystem::path& path) {
    auto r = io::Reader::load(path);
    std::uint32_t input_len = 0;
    auto entries = read_header(r, 1, &input_len);
    if (entries.size() != 2 || entries[0].kind != 1 || entries[1].kind != 3 ||
        input_len != kInputLen)
        throw std::runtime_error("not a student checkpoint");
    const auto& c = entries[0];
    if (c.f[0] != 4 || c.f[1] != 1 || c.f[2] != 64 || c.f[3] != 8 || c.f[4] != 28)
        throw std::runtime_error("unexpected student convolution geometry");
    if (entries[1].f[0] != 256 || entries[1].f[1] != 10)
        throw std::runtime_error("unexpected student linear geometry");

    StudentNet net;
    net.conv.in_ch = 1;
    net.conv.out_ch = 4;
    net.conv.kernel = 64;
    net.conv.stride = 8;
    net.conv.pad = 28;
    net.conv.w.resize(4, 64);
    net.conv.b.resize(4);
    net.fc.w.resize(256, 10);
    net.fc.b.resize(10);
    read_matrix(r, net.conv.w);
    read_vector(r, net.conv.b);
    read_matrix(r, net.fc.w);
    read_vector(r, net.fc.b);
    if (r.remaining() != 0) throw std::runtime_error("trailing bytes in checkpoint");
    return net;
}

TeacherNet load_teacher(const std::filesystem::path& path) {
    auto r = io::Reader::load(path);
    std::uint32_t input_len = 0;
    auto entries = read_header(r, 2, &input_len);
    if (entries.empty() || entries.back().kind != 3 || entries.size() % 2 == 0)
        throw std::runtime_error("malformed teacher layer table");

    TeacherNet net;
    net.input_len = static_cast<int>(input_len);
    const std::size_t blocks = (entries.size() - 1) / 2;
    for (std::size_t i = 0; i < blocks; ++i) {
        const auto& ce = entries[2 * i];
        const auto& be = entries[2 * i + 1];
        if (ce.kind != 1 || be.kind != 2) throw std::runtime_error("malformed teacher layer table");
        Conv1d conv;
        conv.out_ch = static_cast<int>(ce.f[0]);
        conv.in_ch = static_cast<int>(ce.f[1]);
        conv.kernel = static_cast<int>(ce.f[2]);
        conv.stride = static_cast<int>(ce.f[3]);
        conv.pad = static_cast<int>(ce.f[4]);
        conv.w.resize(conv.out_ch, conv.in_ch * conv.kernel);
        conv.b.resize(conv.out_ch);
        net.convs.push_back(std::move(conv));
        BatchNorm1d bn = BatchNorm1d::init(static_cast<int>(be.f[0]));
        net.bns.push_back(std::move(bn));
    }
    net.fc.w.resize(static_cast<Eigen::Index>(entries.back().f[0]),
                    static_cast<Eigen::Index>(entries.back().f[1]));
    net.fc.b.resize(static_cast<Eigen::Index>(entries.back().f[1]));

    for (std::size_t i = 0; i < blocks; ++i) {
        read_matrix(r, net.convs[i].w);
        read_vector(r, net.convs[i].b);
        read_vector(r, net.bns[i].gamma);
        read_vector(r, net.bns[i].beta);
        read_vector(r, net.bns[i].running_mean);
        read_vector(r, net.bns[i].running_var);
    }
    read_matrix(r, net.fc.w);
    read_vector(r, net.fc.b);
    if (r.remaining() != 0) throw std::runtime_error("trailing bytes in checkpoint");
    return net;
}

}  // namespace bpga::nn

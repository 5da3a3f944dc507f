// SPDX-License-Identifier: Apache-2.0
//
// Dense neural-network core with hand-derived backpropagation: 1-D
// convolution, ReLU, max-pooling, batch normalization and fully-connected
// layers, plus the one-conv-layer student and the WDCNN-style teacher,
// SGD with momentum and a cosine-annealed learning rate.
//
// Activations are batched as (batch*len) x channels matrices in
// sample-major row order; all arithmetic is double precision.

#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <vector>

#include "bpga/rng.hpp"

namespace bpga::nn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IndexMatrix = Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic>;

// Batch of 1-D multichannel activations. x has batch*len rows (sample
// major) and one column per channel.
struct Acts {
    Matrix x;
    int batch = 0;
    int len = 0;
    int channels() const { return static_cast<int>(x.cols()); }
};

// ---------------------------------------------------------------------------
// layers

struct Conv1d {
    Matrix w;  // out_ch x (in_ch*kernel); column index = in*kernel + tap
    Vector b;  // out_ch
    int in_ch = 0, out_ch = 0, kernel = 0, stride = 1, pad = 0;

    static Conv1d init(int in_ch, int out_ch, int kernel, int stride, int pad, Rng& rng);
    int out_len(int in_len) const { return (in_len + 2 * pad - kernel) / stride + 1; }
};

struct Linear {
    Matrix w;  // in x out
    Vector b;  // out
    static Linear init(int in, int out, Rng& rng);
};

struct BatchNorm1d {
    Vector gamma, beta;
    Vector running_mean, running_var;
    double eps = 1e-5;
    double momentum = 0.1;
    static BatchNorm1d init(int channels);
};

Acts conv1d_forward(const Conv1d& layer, const Acts& in);

struct Conv1dGrads {
    Matrix dw;
    Vector db;
};
// Returns grad wrt the layer input; fills dw/db.
Acts conv1d_backward(const Conv1d& layer, const Acts& in, const Acts& dout, Conv1dGrads& g);

Acts relu_forward(const Acts& in);
Acts relu_backward(const Acts& in, const Acts& dout);

struct PoolCache {
    Acts y;
    IndexMatrix argmax;  // absolute input row per output element
    int in_len = 0;
    int k = 2, s = 2;
};
// Floor rule: the last window must be fully contained. Ties take the
// leftmost input.
PoolCache maxpool_forward(const Acts& in, int k, int s);
Acts maxpool_backward(const PoolCache& cache, const Acts& dout);

struct BnCache {
    Acts y;
    Matrix xhat;
    Vector inv_std;
};
// Training mode: batch statistics over all rows, running averages updated.
BnCache batchnorm_train(BatchNorm1d& bn, const Acts& in);
Acts batchnorm_infer(const BatchNorm1d& bn, const Acts& in);
Acts batchnorm_backward(const BatchNorm1d& bn, const BnCache& cache, const Acts& dout,
                        Vector& dgamma, Vector& dbeta);

// batch x (channels*len), channel-major within a sample
Matrix flatten(const Acts& in);
Acts flatten_backward(const Matrix& dflat, int batch, int len, int channels);

Matrix linear_forward(const Linear& layer, const Matrix& x);
Matrix linear_backward(const Linear& layer, const Matrix& x, const Matrix& dout, Matrix& dw,
                       Vector& db);

// ---------------------------------------------------------------------------
// scalar helpers

// Temperature-softened softmax with max subtraction; T > 0.
Vector softmax_T(const Vector& logits, double T);

// 0.5 * base * (1 + cos(pi * epoch / total))
double cosine_lr(int epoch, int total_epochs, double base_lr);

// argmax per row, lowest index on ties
std::vector<int> predict(const Matrix& logits);

// ---------------------------------------------------------------------------
// optimizer

struct ParamRef {
    double* data;
    Eigen::Index size;
};

struct SgdState {
    std::vector<Vector> velocity;
    double momentum = 0.9;
    static SgdState make(const std::vector<ParamRef>& params, double momentum = 0.9);
};

// v <- momentum*v + g ; p <- p - lr*v
void sgd_step(const std::vector<ParamRef>& params, const std::vector<ParamRef>& grads,
              SgdState& state, double lr);

// ---------------------------------------------------------------------------
// student: conv(1->4, k=64, s=8, p=28) -> ReLU -> maxpool(2,2) -> linear(256->10)

constexpr int kInputLen = 1024;
constexpr int kNumClasses = 10;

struct StudentNet {
    Conv1d conv;
    Linear fc;
    static StudentNet init(Rng& rng);
};

struct StudentCache {
    Acts in, conv_out, relu_out;
    PoolCache pool;
    Matrix flat;
    Matrix logits;
};

struct StudentGrads {
    Conv1dGrads conv;
    Matrix fc_dw;
    Vector fc_db;
    std::vector<ParamRef> refs();
};

// spectra: batch x 1024 -> logits batch x 10
Matrix student_forward(const StudentNet& net, const Matrix& spectra);
StudentCache student_forward_cached(const StudentNet& net, const Matrix& spectra);
StudentGrads student_backward(const StudentNet& net, const StudentCache& cache,
                              const Matrix& dlogits);
std::vector<ParamRef> student_params(StudentNet& net);
std::size_t param_count(const StudentNet& net);

// ---------------------------------------------------------------------------
// teacher: six conv-BN-ReLU-pool blocks and one fully-connected layer

struct ConvSpec {
    int out_ch, kernel, stride, pad;
};

// Wide first kernel, then kernel-3 blocks; pool k=2,s=2 after every block.
std::vector<ConvSpec> default_teacher_plan();

struct TeacherNet {
    std::vector<Conv1d> convs;
    std::vector<BatchNorm1d> bns;
    Linear fc;
    int input_len = kInputLen;

    static TeacherNet init(Rng& rng);
    static TeacherNet init(const std::vector<ConvSpec>& plan, int input_len, Rng& rng);
};

struct TeacherBlockCache {
    Acts in, conv_out;
    BnCache bn;       // bn.y is the ReLU input
    Acts relu_out;
    PoolCache pool;
};

struct TeacherCache {
    std::vector<TeacherBlockCache> blocks;
    Matrix flat;
    Matrix logits;
};

struct TeacherGrads {
    std::vector<Conv1dGrads> convs;
    std::vector<Vector> dgamma, dbeta;
    Matrix fc_dw;
    Vector fc_db;
    std::vector<ParamRef> refs();
};

Matrix teacher_forward(const TeacherNet& net, const Matrix& spectra);  // inference mode
Matrix teacher_forward_train(TeacherNet& net, const Matrix& spectra, TeacherCache& cache);
TeacherGrads teacher_backward(const TeacherNet& net, const TeacherCache& cache,
                              const Matrix& dlogits);
std::vector<ParamRef> teacher_params(TeacherNet& net);
std::size_t param_count(const TeacherNet& net);

// ---------------------------------------------------------------------------
// checkpoints: magic BPGF, layer kind/shape table, float32 payload

void save_checkpoint(const StudentNet& net, const std::filesystem::path& path);
void save_checkpoint(const TeacherNet& net, const std::filesystem::path& path);
StudentNet load_student(const std::filesystem::path& path);
TeacherNet load_teacher(const std::filesystem::path& path);

}  // namespace bpga::nn

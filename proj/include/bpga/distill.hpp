// SPDX-License-Identifier: Apache-2.0
//
// Classification and distillation losses: cross entropy, temperature-
// softened KL, classical knowledge distillation, and the decoupled
// target/non-target formulation with analytic gradients, plus the student
// and teacher training loops.
//
// Sign convention: tckd_loss and nckd_loss are both nonnegative KLs, so
// kl == tckd + p_other^teacher * nckd holds exactly.

#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "bpga/nn.hpp"
#include "bpga/signal.hpp"

namespace bpga::distill {

using nn::Matrix;
using nn::Vector;

struct DistillConfig {
    double T = 2.5;       // softmax temperature
    double alpha = 0.2;   // CE / distillation balance
    double beta = 4.0;    // target-class term weight
    double gamma = 1.0;   // non-target-class term weight
    int epochs = 75;
    int batch_size = 64;
    double lr = 0.1;
    double momentum = 0.9;

    void validate() const;  // T > 0, alpha in [0,1], beta/gamma >= 0
};

struct LogitPair {
    Vector teacher;
    Vector student;
    int target = 0;
};

// -sum y_i log p_i; probs must be strictly positive and sum to 1
double ce_loss(const Vector& target_onehot, const Vector& probs);

// sum p^T_i log(p^T_i / p^S_i) >= 0
double kl_loss(const Vector& p_teacher, const Vector& p_student);

// (1-alpha)*CE(y, p^S at T=1) + alpha*T^2*KL(p^T(T), p^S(T))
double kd_loss(const LogitPair& pair, double T, double alpha);

struct TargetSplit {
    double p_target;  // p_t
    double p_other;   // 1 - p_t
    Vector p_hat;     // renormalized non-target distribution; entry t is 0
};
TargetSplit split_target(const Vector& probs, int target);

// binary KL between the (p_t, p_other) pairs of teacher and student
double tckd_loss(const LogitPair& pair, double T);

// KL between the renormalized non-target distributions
double nckd_loss(const LogitPair& pair, double T);

// (1-alpha)*CE + alpha*T^2*(beta*TCKD + gamma*NCKD)
double dkd_loss(const LogitPair& pair, const DistillConfig& cfg);

// analytic gradient of dkd_loss wrt the student logits
Vector dkd_grad(const LogitPair& pair, const DistillConfig& cfg);

// ---------------------------------------------------------------------------
// training

struct HistoryRow {
    int epoch;
    double lr;
    double train_loss;
    double val_f1;
};

void write_history_csv(std::span<const HistoryRow> history, const std::filesystem::path& path);

struct StudentTrainResult {
    nn::StudentNet net;  // best-validation-F1 snapshot
    std::vector<HistoryRow> history;
    double best_val_f1 = 0.0;
    int best_epoch = -1;
};

// Mini-batch SGD on dkd_loss with cosine-annealed learning rate. The
// teacher is frozen; its logits are computed once up front in inference
// mode. teacher == nullptr trains with plain cross entropy (alpha treated
// as 0), sharing the exact arithmetic path so a beta=gamma=alpha=0 run is
// bit-identical to a no-teacher run with the same seed.
StudentTrainResult train_student(const nn::TeacherNet* teacher, nn::StudentNet student,
                                 const signal::SampleSet& data, const DistillConfig& cfg,
                                 std::uint64_t seed);

struct TrainConfig {
    int epochs = 75;
    int batch_size = 64;
    double lr = 0.1;
    double momentum = 0.9;
};

struct TeacherTrainResult {
    nn::TeacherNet net;
    std::vector<HistoryRow> history;
    double best_val_f1 = 0.0;
    int best_epoch = -1;
};

TeacherTrainResult train_teacher(nn::TeacherNet teacher, const signal::SampleSet& data,
                                 const TrainConfig& cfg, std::uint64_t seed);

// batched inference helpers shared by the trainers and the CLI
Matrix gather_inputs(const signal::SampleSet& data, std::span<const std::size_t> idx);
std::vector<int> gather_labels(const signal::SampleSet& data, std::span<const std::size_t> idx);
Matrix teacher_logits_batched(const nn::TeacherNet& teacher, const Matrix& inputs);

}  // namespace bpga::distill

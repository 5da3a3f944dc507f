// SPDX-License-Identifier: Apache-2.0

#include "bpga/distill.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "bpga/metrics.hpp"

namespace bpga::distill {

void DistillConfig::validate() const {
    if (!(T > 0.0)) throw std::invalid_argument("DistillConfig: T must be positive");
    if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("DistillConfig: alpha in [0,1]");
    if (beta < 0.0 || gamma < 0.0)
        throw std::invalid_argument("DistillConfig: beta and gamma must be nonnegative");
    if (epochs < 1 || batch_size < 1 || lr <= 0.0)
        throw std::invalid_argument("DistillConfig: bad training parameters");
}

double ce_loss(const Vector& target_onehot, const Vector& probs) {
    if (target_onehot.size() != probs.size())
        throw std::invalid_argument("ce_loss: size mismatch");
    double loss = 0.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i)
        if (target_onehot[i] != 0.0) loss -= target_onehot[i] * std::log(probs[i]);
    return loss;
}

double kl_loss(const Vector& p_teacher, const Vector& p_student) {
    if (p_teacher.size() != p_student.size()) throw std::invalid_argument("kl_loss: size mismatch");
    double loss = 0.0;
    for (Eigen::Index i = 0; i < p_teacher.size(); ++i)
        if (p_teacher[i] > 0.0) loss += p_teacher[i] * std::log(p_teacher[i] / p_student[i]);
    return loss;
}

double kd_loss(const LogitPair& pair, double T, double alpha) {
    Vector y = Vector::Zero(pair.student.size());
    y[pair.target] = 1.0;
    const double ce = ce_loss(y, nn::softmax_T(pair.student, 1.0));
    const double kl = kl_loss(nn::softmax_T(pair.teacher, T), nn::softmax_T(pair.student, T));
    return (1.0 - alpha) * ce + alpha * T * T * kl;
}

TargetSplit split_target(const Vector& probs, int target) {
    if (target < 0 || target >= probs.size())
        throw std::invalid_argument("split_target: target out of range");
    TargetSplit s;
    s.p_target = probs[target];
    s.p_other = 1.0 - s.p_target;
    s.p_hat = Vector::Zero(probs.size());
    for (Eigen::Index i = 0; i < probs.size(); ++i)
        if (i != target) s.p_hat[i] = probs[i] / s.p_other;
    return s;
}

double tckd_loss(const LogitPair& pair, double T) {
    const auto t = split_target(nn::softmax_T(pair.teacher, T), pair.target);
    const auto s = split_target(nn::softmax_T(pair.student, T), pair.target);
    return t.p_target * std::log(t.p_target / s.p_target) +
           t.p_other * std::log(t.p_other / s.p_other);
}

double nckd_loss(const LogitPair& pair, double T) {
    const auto t = split_target(nn::softmax_T(pair.teacher, T), pair.target);
    const auto s = split_target(nn::softmax_T(pair.student, T), pair.target);
    return kl_loss(t.p_hat, s.p_hat);
}

double dkd_loss(const LogitPair& pair, const DistillConfig& cfg) {
    Vector y = Vector::Zero(pair.student.size());
    y[pair.target] = 1.0;
    const double ce = ce_loss(y, nn::softmax_T(pair.student, 1.0));
    const double distil = cfg.beta * tckd_loss(pair, cfg.T) + cfg.gamma * nckd_loss(pair, cfg.T);
    return (1.0 - cfg.alpha) * ce + cfg.alpha * cfg.T * cfg.T * distil;
}

namespace {

// dL/dz for a loss with gradient g wrt s = softmax(z/T):
// dL/dz_k = (1/T) * s_k * (g_k - sum_i g_i s_i)
Vector softmax_chain(const Vector& s, const Vector& g, double T) {
    const double dot = g.dot(s);
    return (s.array() * (g.array() - dot) / T).matrix();
}

}  // namespace

Vector dkd_grad(const LogitPair& pair, const DistillConfig& cfg) {
    const int t = pair.target;

    // CE part at T=1: p - y
    Vector grad = nn::softmax_T(pair.student, 1.0);
    grad[t] -= 1.0;
    grad *= (1.0 - cfg.alpha);

    const Vector s_t = nn::softmax_T(pair.teacher, cfg.T);
    const Vector s_s = nn::softmax_T(pair.student, cfg.T);
    const auto teacher = split_target(s_t, t);
    const auto student = split_target(s_s, t);

    // TCKD: loss depends on s only through s_t
    Vector g_tckd = Vector::Zero(s_s.size());
    g_tckd[t] = -teacher.p_target / student.p_target + teacher.p_other / student.p_other;

    // NCKD: -sum_{i != t} phat^T_i log s_i + log(1 - s_t)
    Vector g_nckd(s_s.size());
    for (Eigen::Index i = 0; i < s_s.size(); ++i)
        g_nckd[i] = i == t ? -1.0 / student.p_other : -teacher.p_hat[i] / s_s[i];

    grad += cfg.alpha * cfg.T * cfg.T *
            (cfg.beta * softmax_chain(s_s, g_tckd, cfg.T) +
             cfg.gamma * softmax_chain(s_s, g_nckd, cfg.T));
    return grad;
}

// ---------------------------------------------------------------------------
// training

Matrix gather_inputs(const signal::SampleSet& data, std::span<const std::size_t> idx) {
    Matrix x(static_cast<Eigen::Index>(idx.size()), nn::kInputLen);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const auto& s = data.samples[idx[r]];
        if (s.x.size() != nn::kInputLen)
            throw std::invalid_argument("sample width does not match the network input");
        x.row(static_cast<Eigen::Index>(r)) = s.x.matrix().transpose();
    }
    return x;
}

std::vector<int> gather_labels(const signal::SampleSet& data, std::span<const std::size_t> idx) {
    std::vector<int> labels(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) labels[r] = data.samples[idx[r]].label;
    return labels;
}

Matrix teacher_logits_batched(const nn::TeacherNet& teacher, const Matrix& inputs) {
    constexpr Eigen::Index kChunk = 256;
    Matrix logits(inputs.rows(), nn::kNumClasses);
    for (Eigen::Index start = 0; start < inputs.rows(); start += kChunk) {
        const auto n = std::min(kChunk, inputs.rows() - start);
        logits.middleRows(start, n) = nn::teacher_forward(teacher, inputs.middleRows(start, n));
    }
    return logits;
}

void write_history_csv(std::span<const HistoryRow> history, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out.precision(12);
    out << "epoch,lr,train_loss,val_f1\n";
    for (const auto& row : history)
        out << row.epoch << "," << row.lr << "," << row.train_loss << "," << row.val_f1 << "\n";
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

namespace {

double validation_f1(const nn::StudentNet& net, const Matrix& val_x,
                     const std::vector<int>& val_labels) {
    const auto pred = nn::predict(nn::student_forward(net, val_x));
    return metrics::f1_macro(metrics::confusion_matrix(val_labels, pred, nn::kNumClasses));
}

}  // namespace

StudentTrainResult train_student(const nn::TeacherNet* teacher, nn::StudentNet student,
                                 const signal::SampleSet& data, const DistillConfig& cfg,
                                 std::uint64_t seed) {
    cfg.validate();
    const auto train_idx = data.indices(signal::Split::train);
    const auto val_idx = data.indices(signal::Split::val);
    if (train_idx.empty() || val_idx.empty())
        throw std::invalid_argument("train_student: empty train or validation split");

    const Matrix train_x = gather_inputs(data, train_idx);
    const auto train_labels = gather_labels(data, train_idx);
    const Matrix val_x = gather_inputs(data, val_idx);
    const auto val_labels = gather_labels(data, val_idx);

    DistillConfig eff = cfg;
    Matrix t_logits;
    if (teacher) {
        t_logits = teacher_logits_batched(*teacher, train_x);
    } else {
        t_logits = Matrix::Zero(train_x.rows(), nn::kNumClasses);
        eff.alpha = 0.0;  // plain supervised training
    }

    const auto n = train_idx.size();
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;

    Rng rng(seed);
    auto params = nn::student_params(student);
    auto sgd = nn::SgdState::make(params, eff.momentum);

    StudentTrainResult result;
    result.best_val_f1 = -1.0;

    for (int epoch = 0; epoch < eff.epochs; ++epoch) {
        const double lr = nn::cosine_lr(epoch, eff.epochs, eff.lr);
        rng.shuffle(perm);

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(eff.batch_size)) {
            const auto b = std::min(static_cast<std::size_t>(eff.batch_size), n - start);
            Matrix xb(static_cast<Eigen::Index>(b), nn::kInputLen);
            Matrix tb(static_cast<Eigen::Index>(b), nn::kNumClasses);
            std::vector<int> yb(b);
            for (std::size_t r = 0; r < b; ++r) {
                const auto j = perm[start + r];
                xb.row(static_cast<Eigen::Index>(r)) = train_x.row(static_cast<Eigen::Index>(j));
                tb.row(static_cast<Eigen::Index>(r)) = t_logits.row(static_cast<Eigen::Index>(j));
                yb[r] = train_labels[j];
            }

            auto cache = nn::student_forward_cached(student, xb);
            Matrix dlogits(static_cast<Eigen::Index>(b), nn::kNumClasses);
            const double inv_b = 1.0 / static_cast<double>(b);
            for (std::size_t r = 0; r < b; ++r) {
                const auto ri = static_cast<Eigen::Index>(r);
                LogitPair pair{tb.row(ri).transpose(), cache.logits.row(ri).transpose(), yb[r]};
                loss_sum += dkd_loss(pair, eff);
                dlogits.row(ri) = (dkd_grad(pair, eff) * inv_b).transpose();
            }
            auto grads = nn::student_backward(student, cache, dlogits);
            nn::sgd_step(params, grads.refs(), sgd, lr);
        }

        const double val_f1 = validation_f1(student, val_x, val_labels);
        result.history.push_back({epoch, lr, loss_sum / static_cast<double>(n), val_f1});
        if (val_f1 > result.best_val_f1) {
            result.best_val_f1 = val_f1;
            result.best_epoch = epoch;
            result.net = student;
        }
    }
    return result;
}

TeacherTrainResult train_teacher(nn::TeacherNet teacher, const signal::SampleSet& data,
                                 const TrainConfig& cfg, std::uint64_t seed) {
    if (cfg.epochs < 1 || cfg.batch_size < 1 || cfg.lr <= 0.0)
        throw std::invalid_argument("train_teacher: bad training parameters");
    const auto train_idx = data.indices(signal::Split::train);
    const auto val_idx = data.indices(signal::Split::val);
    if (train_idx.empty() || val_idx.empty())
        throw std::invalid_argument("train_teacher: empty train or validation split");

    const Matrix train_x = gather_inputs(data, train_idx);
    const auto train_labels = gather_labels(data, train_idx);
    const Matrix val_x = gather_inputs(data, val_idx);
    const auto val_labels = gather_labels(data, val_idx);

    const auto n = train_idx.size();
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;

    Rng rng(seed);
    auto params = nn::teacher_params(teacher);
    auto sgd = nn::SgdState::make(params, cfg.momentum);

    TeacherTrainResult result;
    result.best_val_f1 = -1.0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = nn::cosine_lr(epoch, cfg.epochs, cfg.lr);
        rng.shuffle(perm);

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
            const auto b = std::min(static_cast<std::size_t>(cfg.batch_size), n - start);
            Matrix xb(static_cast<Eigen::Index>(b), nn::kInputLen);
            std::vector<int> yb(b);
            for (std::size_t r = 0; r < b; ++r) {
                xb.row(static_cast<Eigen::Index>(r)) =
                    train_x.row(static_cast<Eigen::Index>(perm[start + r]));
                yb[r] = train_labels[perm[start + r]];
            }

            nn::TeacherCache cache;
            nn::teacher_forward_train(teacher, xb, cache);
            Matrix dlogits(static_cast<Eigen::Index>(b), nn::kNumClasses);
            const double inv_b = 1.0 / static_cast<double>(b);
            for (std::size_t r = 0; r < b; ++r) {
                const auto ri = static_cast<Eigen::Index>(r);
                const Vector p = nn::softmax_T(cache.logits.row(ri).transpose(), 1.0);
                loss_sum -= std::log(p[yb[r]]);
                Vector g = p;
                g[yb[r]] -= 1.0;
                dlogits.row(ri) = (g * inv_b).transpose();
            }
            auto grads = nn::teacher_backward(teacher, cache, dlogits);
            nn::sgd_step(params, grads.refs(), sgd, lr);
        }

        const auto pred = nn::predict(teacher_logits_batched(teacher, val_x));
        const double val_f1 =
            metrics::f1_macro(metrics::confusion_matrix(val_labels, pred, nn::kNumClasses));
        result.history.push_back({epoch, lr, loss_sum / static_cast<double>(n), val_f1});
        if (val_f1 > result.best_val_f1) {
            result.best_val_f1 = val_f1;
            result.best_epoch = epoch;
            result.net = teacher;
        }
    }
    return result;
}

}  // namespace bpga::distill

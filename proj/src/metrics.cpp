// SPDX-License-Identifier: Apache-2.0

#include "bpga/metrics.hpp"

#include <fstream>
#include <stdexcept>

namespace bpga::metrics {

Confusion confusion_matrix(std::span<const int> truth, std::span<const int> predicted,
                           int num_classes) {
    if (truth.size() != predicted.size())
        throw std::invalid_argument("confusion_matrix: length mismatch");
    Confusion m = Confusion::Zero(num_classes, num_classes);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int t = truth[i], p = predicted[i];
        if (t < 0 || t >= num_classes || p < 0 || p >= num_classes)
            throw std::invalid_argument("confusion_matrix: class id out of range");
        m(t, p) += 1;
    }
    return m;
}

namespace {

struct ClassCounts {
    long tp, fp, fn;
};

ClassCounts counts(const Confusion& m, Eigen::Index i) {
    const long tp = m(i, i);
    const long fp = m.col(i).sum() - tp;
    const long fn = m.row(i).sum() - tp;
    return {tp, fp, fn};
}

}  // namespace

double f1_macro(const Confusion& m) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const auto [tp, fp, fn] = counts(m, i);
        const long denom = 2 * tp + fp + fn;
        sum += denom > 0 ? 2.0 * static_cast<double>(tp) / static_cast<double>(denom) : 0.0;
    }
    return sum / static_cast<double>(m.rows());
}

double precision_macro(const Confusion& m) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const auto [tp, fp, fn] = counts(m, i);
        (void)fn;
        sum += tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    }
    return sum / static_cast<double>(m.rows());
}

double recall_macro(const Confusion& m) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const auto [tp, fp, fn] = counts(m, i);
        (void)fp;
        sum += tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    }
    return sum / static_cast<double>(m.rows());
}

EvalReport evaluate(std::span<const int> truth, std::span<const int> predicted, int num_classes) {
    EvalReport r;
    r.confusion = confusion_matrix(truth, predicted, num_classes);
    r.f1 = f1_macro(r.confusion);
    r.precision = precision_macro(r.confusion);
    r.recall = recall_macro(r.confusion);
    r.samples = static_cast<int>(truth.size());
    return r;
}

void write_report_csv(const EvalReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out.precision(10);
    out << "f1,precision,recall,samples\n"
        << report.f1 << "," << report.precision << "," << report.recall << "," << report.samples
        << "\n\n";
    out << "confusion";
    for (Eigen::Index c = 0; c < report.confusion.cols(); ++c) out << ",pred_" << c;
    out << "\n";
    for (Eigen::Index r = 0; r < report.confusion.rows(); ++r) {
        out << "true_" << r;
        for (Eigen::Index c = 0; c < report.confusion.cols(); ++c)
            out << "," << report.confusion(r, c);
        out << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace bpga::metrics

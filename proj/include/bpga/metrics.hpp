// SPDX-License-Identifier: Apache-2.0
//
// Confusion-matrix evaluation: macro F1 / precision / recall. A class with
// no true positives, false positives and false negatives contributes 0.

#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <span>

namespace bpga::metrics {

// rows = true class, cols = predicted class
using Confusion = Eigen::MatrixXi;

Confusion confusion_matrix(std::span<const int> truth, std::span<const int> predicted,
                           int num_classes);

// (1/C) * sum_i 2*TP_i / (2*TP_i + FP_i + FN_i)
double f1_macro(const Confusion& m);
double precision_macro(const Confusion& m);
double recall_macro(const Confusion& m);

struct EvalReport {
    double f1 = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    Confusion confusion;
    int samples = 0;
};

EvalReport evaluate(std::span<const int> truth, std::span<const int> predicted, int num_classes);

// CSV: summary row then the confusion matrix
void write_report_csv(const EvalReport& report, const std::filesystem::path& path);

}  // namespace bpga::metrics

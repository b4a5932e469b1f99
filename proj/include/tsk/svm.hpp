#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

namespace tsk {

// Soft-margin binary SVM in dual form, trained by SMO on a precomputed Gram.
struct SvmModel {
    Eigen::VectorXd alphas;        // dual coefficients, 0 <= alpha_i <= C
    double bias = 0.0;
    double C = 0.0;
    std::vector<int> support_ids;  // indices with alpha > 0
    Eigen::VectorXd labels;        // +-1 per training point
};

// Maximal-violating-pair SMO. Deterministic: ties in the working-set scan go
// to the lowest index. Converges when the KKT gap is <= tol; raises
// ConvergenceError after 1e4 * N pair updates.
SvmModel svm_train(const Eigen::MatrixXd& gram, std::span<const int> labels, double C,
                   double tol = 1e-3);

// Decision values f_j = sum_i alpha_i y_i cross(j, i) + bias.
Eigen::VectorXd svm_decide(const SvmModel& m, const Eigen::MatrixXd& cross);

// One-vs-rest ensemble over lexicographically sorted class ids.
struct OvrSvmModel {
    std::vector<std::string> classes;  // sorted ascending
    std::vector<SvmModel> models;      // aligned with classes
};

OvrSvmModel svm_train_multiclass(const Eigen::MatrixXd& gram, std::span<const std::string> labels,
                                 double C, double tol = 1e-3);

// argmax of per-class decision values; ties break to the smallest class id.
std::vector<std::string> svm_classify(const OvrSvmModel& m, const Eigen::MatrixXd& cross);

}  // namespace tsk

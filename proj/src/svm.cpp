#include "tsk/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "tsk/errors.hpp"

namespace tsk {

SvmModel svm_train(const Eigen::MatrixXd& gram, std::span<const int> labels, double C, double tol) {
    const auto n = static_cast<Eigen::Index>(labels.size());
    if (gram.rows() != n || gram.cols() != n)
        throw DimensionError("gram is " + std::to_string(gram.rows()) + "x" +
                             std::to_string(gram.cols()) + " but there are " + std::to_string(n) +
                             " labels");
    if (!(C > 0.0)) throw ConfigError("C must be positive");
    if (!(tol > 0.0)) throw ConfigError("tol must be positive");

    bool has_pos = false, has_neg = false;
    for (int y : labels) {
        if (y == 1) has_pos = true;
        else if (y == -1) has_neg = true;
        else throw ConfigError("labels must be +1 or -1");
    }
    if (!has_pos || !has_neg)
        throw DegenerateProblemError("training labels contain a single class");

    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = static_cast<double>(labels[static_cast<std::size_t>(i)]);

    // Dual: min 1/2 a'Qa - e'a, Q_ij = y_i y_j K_ij, 0 <= a <= C, y'a = 0.
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, -1.0);  // Qa - e at a = 0

    const long max_updates = 10000L * static_cast<long>(n);
    long updates = 0;
    double gap = std::numeric_limits<double>::infinity();
    while (true) {
        // Maximal violating pair over I_up / I_low; first extremum wins ties.
        Eigen::Index i = -1, j = -1;
        double up = -std::numeric_limits<double>::infinity();
        double low = std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < n; ++k) {
            const double v = -y(k) * grad(k);
            const bool in_up = (y(k) > 0 && alpha(k) < C) || (y(k) < 0 && alpha(k) > 0);
            const bool in_low = (y(k) > 0 && alpha(k) > 0) || (y(k) < 0 && alpha(k) < C);
            if (in_up && v > up) {
                up = v;
                i = k;
            }
            if (in_low && v < low) {
                low = v;
                j = k;
            }
        }
        gap = up - low;
        if (i < 0 || j < 0 || gap <= tol) break;
        if (++updates > max_updates)
            throw ConvergenceError("SMO did not converge in " + std::to_string(max_updates) +
                                   " updates (KKT gap " + std::to_string(gap) + ")");

        double quad = gram(i, i) + gram(j, j) - 2.0 * gram(i, j);
        if (quad <= 0.0) quad = 1e-12;
        double step = gap / quad;

        // Box limits keeping both multipliers feasible along the constraint.
        double lo_i = (y(i) > 0) ? -alpha(i) : alpha(i) - C;
        double hi_i = (y(i) > 0) ? C - alpha(i) : alpha(i);
        double lo_j = (y(j) > 0) ? alpha(j) - C : -alpha(j);
        double hi_j = (y(j) > 0) ? alpha(j) : C - alpha(j);
        step = std::min(step, std::min(hi_i, hi_j));
        step = std::max(step, std::max(lo_i, lo_j));
        if (step == 0.0) break;

        alpha(i) += y(i) * step;
        alpha(j) -= y(j) * step;
        // Clip fp residue at the box edges.
        alpha(i) = std::clamp(alpha(i), 0.0, C);
        alpha(j) = std::clamp(alpha(j), 0.0, C);

        grad.noalias() += step * y.cwiseProduct(gram.col(i) - gram.col(j));
    }

    // Bias from -y_k g_k: averaged over free vectors; otherwise the midpoint
    // of the final up/low bounds.
    double bias;
    double sum = 0.0;
    int free_count = 0;
    for (Eigen::Index k = 0; k < n; ++k) {
        if (alpha(k) > 0.0 && alpha(k) < C) {
            sum += -y(k) * grad(k);
            ++free_count;
        }
    }
    if (free_count > 0) {
        bias = sum / free_count;
    } else {
        double up = -std::numeric_limits<double>::infinity();
        double low = std::numeric_limits<double>::infinity();
        for (Eigen::Index k = 0; k < n; ++k) {
            const double v = -y(k) * grad(k);
            if ((y(k) > 0 && alpha(k) < C) || (y(k) < 0 && alpha(k) > 0)) up = std::max(up, v);
            if ((y(k) > 0 && alpha(k) > 0) || (y(k) < 0 && alpha(k) < C)) low = std::min(low, v);
        }
        bias = (up + low) / 2.0;
    }

    SvmModel m;
    m.alphas = std::move(alpha);
    m.bias = bias;
    m.C = C;
    m.labels = std::move(y);
    for (Eigen::Index k = 0; k < n; ++k)
        if (m.alphas(k) > 0.0) m.support_ids.push_back(static_cast<int>(k));
    return m;
}

Eigen::VectorXd svm_decide(const SvmModel& m, const Eigen::MatrixXd& cross) {
    if (cross.cols() != m.alphas.size())
        throw DimensionError("cross has " + std::to_string(cross.cols()) +
                             " columns but the model has " + std::to_string(m.alphas.size()) +
                             " training points");
    return (cross * m.alphas.cwiseProduct(m.labels)).array() + m.bias;
}

OvrSvmModel svm_train_multiclass(const Eigen::MatrixXd& gram, std::span<const std::string> labels,
                                 double C, double tol) {
    std::set<std::string> uniq(labels.begin(), labels.end());
    if (uniq.size() < 2) throw DegenerateProblemError("training labels contain a single class");

    OvrSvmModel out;
    out.classes.assign(uniq.begin(), uniq.end());
    out.models.reserve(out.classes.size());
    std::vector<int> binary(labels.size());
    for (const auto& cls : out.classes) {
        for (std::size_t i = 0; i < labels.size(); ++i) binary[i] = labels[i] == cls ? 1 : -1;
        out.models.push_back(svm_train(gram, binary, C, tol));
    }
    return out;
}

std::vector<std::string> svm_classify(const OvrSvmModel& m, const Eigen::MatrixXd& cross) {
    if (m.models.empty()) throw ConfigError("empty one-vs-rest model");
    Eigen::MatrixXd scores(cross.rows(), static_cast<Eigen::Index>(m.models.size()));
    for (std::size_t c = 0; c < m.models.size(); ++c)
        scores.col(static_cast<Eigen::Index>(c)) = svm_decide(m.models[c], cross);
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(cross.rows()));
    for (Eigen::Index r = 0; r < cross.rows(); ++r) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < scores.cols(); ++c)
            if (scores(r, c) > scores(r, best)) best = c;  // ties keep the smallest class id
        out.push_back(m.classes[static_cast<std::size_t>(best)]);
    }
    return out;
}

}  // namespace tsk

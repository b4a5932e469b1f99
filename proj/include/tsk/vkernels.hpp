#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

namespace tsk {

enum class KernelKind { linear, rbf, laplacian };

std::string_view to_string(KernelKind kind);
KernelKind kernel_kind_from_string(std::string_view name);

// A scalar psd kernel on the reals (used on timestamps), optionally
// regularized by lambda * delta(a, b) where delta is the Kronecker delta
// on exact equality of the stored values.
class VectorKernel {
public:
    static VectorKernel linear(double lambda = 0.0);
    static VectorKernel rbf(double gamma, double lambda = 0.0);
    static VectorKernel laplacian(double gamma, double lambda = 0.0);

    KernelKind kind() const { return kind_; }
    std::optional<double> gamma() const { return gamma_; }
    double lambda() const { return lambda_; }

    VectorKernel with_lambda(double lambda) const;

    double operator()(double a, double b) const;

    bool operator==(const VectorKernel&) const = default;

    std::string describe() const;

private:
    VectorKernel(KernelKind kind, std::optional<double> gamma, double lambda);

    KernelKind kind_;
    std::optional<double> gamma_;
    double lambda_;
};

// Matrix of pairwise evaluations, G(i, j) = k(t[i], s[j]). When t and s alias
// the same data the upper triangle is computed and mirrored, so the result is
// symmetric to the last bit.
Eigen::MatrixXd gram(const VectorKernel& k, std::span<const double> t, std::span<const double> s);
Eigen::MatrixXd gram(const VectorKernel& k, std::span<const double> t);

nlohmann::json vector_kernel_to_json(const VectorKernel& k);
VectorKernel vector_kernel_from_json(const nlohmann::json& j);

}  // namespace tsk

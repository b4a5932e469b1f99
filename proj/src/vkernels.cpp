#include "tsk/vkernels.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "tsk/errors.hpp"

namespace tsk {

std::string_view to_string(KernelKind kind) {
    switch (kind) {
        case KernelKind::linear: return "linear";
        case KernelKind::rbf: return "rbf";
        case KernelKind::laplacian: return "laplacian";
    }
    return "?";
}

KernelKind kernel_kind_from_string(std::string_view name) {
    if (name == "linear") return KernelKind::linear;
    if (name == "rbf") return KernelKind::rbf;
    if (name == "laplacian") return KernelKind::laplacian;
    throw ConfigError("unknown kernel kind '" + std::string(name) + "'");
}

VectorKernel::VectorKernel(KernelKind kind, std::optional<double> gamma, double lambda)
    : kind_(kind), gamma_(gamma), lambda_(lambda) {
    if (kind_ == KernelKind::linear) {
        if (gamma_.has_value()) throw ConfigError("linear kernel takes no gamma");
    } else {
        if (!gamma_.has_value()) throw ConfigError("rbf/laplacian kernel requires gamma");
        if (!(*gamma_ > 0.0) || !std::isfinite(*gamma_))
            throw ConfigError("gamma must be positive and finite");
    }
    if (lambda_ < 0.0 || !std::isfinite(lambda_)) throw ConfigError("lambda must be >= 0");
}

VectorKernel VectorKernel::linear(double lambda) {
    return VectorKernel(KernelKind::linear, std::nullopt, lambda);
}

VectorKernel VectorKernel::rbf(double gamma, double lambda) {
    return VectorKernel(KernelKind::rbf, gamma, lambda);
}

VectorKernel VectorKernel::laplacian(double gamma, double lambda) {
    return VectorKernel(KernelKind::laplacian, gamma, lambda);
}

VectorKernel VectorKernel::with_lambda(double lambda) const {
    return VectorKernel(kind_, gamma_, lambda);
}

double VectorKernel::operator()(double a, double b) const {
    double base;
    switch (kind_) {
        case KernelKind::linear: base = a * b; break;
        case KernelKind::rbf: base = std::exp(-*gamma_ * (a - b) * (a - b)); break;
        case KernelKind::laplacian: base = std::exp(-*gamma_ * std::abs(a - b)); break;
        default: base = 0.0; break;
    }
    // Kronecker delta on exact equality of the stored reals.
    if (lambda_ != 0.0 && a == b) base += lambda_;
    return base;
}

std::string VectorKernel::describe() const {
    std::string s(to_string(kind_));
    if (gamma_) s += "(gamma=" + std::to_string(*gamma_) + ")";
    if (lambda_ != 0.0) s += "+" + std::to_string(lambda_) + "*delta";
    return s;
}

Eigen::MatrixXd gram(const VectorKernel& k, std::span<const double> t, std::span<const double> s) {
    const bool self = t.data() == s.data() && t.size() == s.size();
    const auto n = static_cast<Eigen::Index>(t.size());
    const auto m = static_cast<Eigen::Index>(s.size());
    if (n == 0 || m == 0) throw ConfigError("gram requires nonempty timestamp lists");
    Eigen::MatrixXd g(n, m);
    if (self) {
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i; j < n; ++j) {
                double v = k(t[static_cast<std::size_t>(i)], t[static_cast<std::size_t>(j)]);
                g(i, j) = v;
                g(j, i) = v;
            }
    } else {
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < m; ++j)
                g(i, j) = k(t[static_cast<std::size_t>(i)], s[static_cast<std::size_t>(j)]);
    }
    return g;
}

Eigen::MatrixXd gram(const VectorKernel& k, std::span<const double> t) { return gram(k, t, t); }

nlohmann::json vector_kernel_to_json(const VectorKernel& k) {
    nlohmann::json j;
    j["kind"] = std::string(to_string(k.kind()));
    if (k.gamma()) j["gamma"] = *k.gamma();
    j["lambda"] = k.lambda();
    return j;
}

VectorKernel vector_kernel_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("kind"))
        throw ConfigError("vector kernel JSON must be an object with a 'kind' field");
    KernelKind kind = kernel_kind_from_string(j.at("kind").get<std::string>());
    double lambda = j.value("lambda", 0.0);
    if (kind == KernelKind::linear) {
        if (j.contains("gamma") && !j.at("gamma").is_null())
            throw ConfigError("linear kernel takes no gamma");
        return VectorKernel::linear(lambda);
    }
    if (!j.contains("gamma")) throw ConfigError("rbf/laplacian kernel requires gamma");
    double gamma = j.at("gamma").get<double>();
    return kind == KernelKind::rbf ? VectorKernel::rbf(gamma, lambda)
                                   : VectorKernel::laplacian(gamma, lambda);
}

}  // namespace tsk

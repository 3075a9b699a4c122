#ifndef RKME_KERNEL_HPP
#define RKME_KERNEL_HPP

#include <string>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

namespace rkme {

enum class KernelFamily { gaussian, laplacian };

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);

// Kernel family plus bandwidth. gaussian: k(x,x') = exp(-gamma*|x-x'|^2),
// laplacian: k(x,x') = exp(-gamma*|x-x'|). gamma > 0 in both cases, so
// 0 < k <= 1 and k(x,x) = 1.
struct KernelConfig {
    KernelFamily family = KernelFamily::gaussian;
    double gamma = 1.0;

    void validate() const;
    bool operator==(const KernelConfig&) const = default;
};

void to_json(nlohmann::json& j, const KernelConfig& cfg);
void from_json(const nlohmann::json& j, KernelConfig& cfg);

// k(x, x'). Throws InputError on dimension mismatch.
double eval(const KernelConfig& cfg, const Eigen::Ref<const Eigen::VectorXd>& x,
            const Eigen::Ref<const Eigen::VectorXd>& x_prime);

// Pairwise kernel matrix G[i][j] = k(A.row(i), B.row(j)). Rows may be
// computed in parallel; the result is identical to the sequential loop.
Eigen::MatrixXd gram(const KernelConfig& cfg, const Eigen::Ref<const Eigen::MatrixXd>& A,
                     const Eigen::Ref<const Eigen::MatrixXd>& B);

// Gradient of k(z, x) with respect to z. The laplacian kernel is not
// differentiable at z == x; that case throws SolverError and callers that
// accumulate gradients skip the term.
Eigen::VectorXd grad_z(const KernelConfig& cfg, const Eigen::Ref<const Eigen::VectorXd>& z,
                       const Eigen::Ref<const Eigen::VectorXd>& x);

// Number of worker threads used by gram for large inputs, after applying
// the RKME_NUM_THREADS cap.
int max_threads();

} // namespace rkme

#endif

#ifndef RKME_RKME_HPP
#define RKME_RKME_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "rkme/dataset.hpp"
#include "rkme/kernel.hpp"

namespace rkme {

// Weighted reduced set (beta, Z) representing the score function
// Phi(x) = sum_m beta[m] * k(Z.row(m), x). Z rows are constructed
// pseudo-points, not selections from any raw dataset.
struct Rkme {
    KernelConfig kernel;
    Eigen::VectorXd beta;
    Eigen::MatrixXd Z;

    struct Meta {
        Eigen::Index source_size = 0; // N of the dataset the set was reduced from
        double objective = 0.0;       // final value of the reduced-set objective
        std::string created;          // ISO-8601 timestamp, empty if unset
    } meta;

    Eigen::Index size() const { return Z.rows(); }
    Eigen::Index dim() const { return Z.cols(); }
    void validate() const;
};

void to_json(nlohmann::json& j, const Rkme& spec);
void from_json(const nlohmann::json& j, Rkme& spec);

Rkme read_rkme_json(const std::filesystem::path& path);
void write_rkme_json(const Rkme& spec, const std::filesystem::path& path);

// A weighted point set viewed as an element of the RKHS:
// mu = sum_i weights[i] * k(points.row(i), .). Datasets embed with uniform
// weights 1/N, reduced sets with their beta.
struct Embedding {
    KernelConfig kernel;
    Eigen::MatrixXd points;
    Eigen::VectorXd weights;

    static Embedding of(const Dataset& data, const KernelConfig& cfg);
    static Embedding of(const Rkme& spec);
};

// <mu(P_X), mu(P_X')> = (1/NN') sum_ij k(x_i, x'_j), accumulated in blocks
// so the full Gram matrix is never materialized.
double empirical_kme_inner(const KernelConfig& cfg, const Eigen::Ref<const Eigen::MatrixXd>& X,
                           const Eigen::Ref<const Eigen::MatrixXd>& X_prime);

// Squared RKHS distance between two embeddings. Both must share the same
// kernel config (ConfigError otherwise). Clamped to >= 0 on return.
double mmd_sq(const Embedding& a, const Embedding& b);
double mmd_sq(const Dataset& a, const Dataset& b, const KernelConfig& cfg);
double mmd_sq(const Dataset& a, const Rkme& b);
double mmd_sq(const Rkme& a, const Rkme& b);

// Closed-form coefficient update at fixed Z: solves (K + lambda I) beta = C
// with K[n][m] = k(z_n, z_m) and C[n] = (1/N) sum_m k(z_n, x_m). With
// lambda = 0 a singular K raises SolverError.
constexpr double kDefaultBetaRidge = 1e-8;
Eigen::VectorXd update_beta(const KernelConfig& cfg, const Eigen::Ref<const Eigen::MatrixXd>& Z,
                            const Eigen::Ref<const Eigen::MatrixXd>& X,
                            double lambda = kDefaultBetaRidge);

struct ReduceOptions {
    int iterations = 20;     // outer alternating iterations
    double eta = 0.1;        // initial gradient step for the Z update
    std::uint64_t seed = 0;  // k-means init seed
    double rel_tol = 1e-6;   // early stop when relative objective decrease falls below
    // When set, receives the objective value after init and after every
    // outer iteration; the sequence is non-increasing.
    std::vector<double>* trace = nullptr;
};

// Reduced-set construction: k-means init, then alternate the closed-form
// beta update with one backtracked gradient step on every z_m (all rows
// stepped from the same snapshot). Deterministic given opts.seed.
Rkme reduce(const KernelConfig& cfg, const Eigen::Ref<const Eigen::MatrixXd>& X, Eigen::Index M,
            const ReduceOptions& opts = {});

// Phi(x) = sum_m beta[m] k(z_m, x).
double rkme_eval(const Rkme& spec, const Eigen::Ref<const Eigen::VectorXd>& x);

// Phi applied to every row of X.
Eigen::VectorXd rkme_eval_rows(const Rkme& spec, const Eigen::Ref<const Eigen::MatrixXd>& X);

// Lloyd's algorithm with k-means++ seeding; used for reduce() init and the
// built-in models' basis construction. Deterministic given seed.
Eigen::MatrixXd kmeans_centers(const Eigen::Ref<const Eigen::MatrixXd>& X, Eigen::Index k,
                               std::uint64_t seed, int max_iterations = 100);

} // namespace rkme

#endif

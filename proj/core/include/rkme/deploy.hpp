#ifndef RKME_DEPLOY_HPP
#define RKME_DEPLOY_HPP

#include <cstdint>

#include <Eigen/Core>

#include "rkme/dataset.hpp"
#include "rkme/herding.hpp"
#include "rkme/market.hpp"
#include "rkme/models.hpp"

namespace rkme {

struct MatchResult {
    Eigen::Index index = 0;            // argmin entry, ties to the lowest index
    Eigen::VectorXd per_entry_mmd_sq;  // squared MMD between test data and each spec
};

// Task-recurrent matching: the entry whose specification is closest to the
// empirical embedding of the test data.
MatchResult match_task_recurrent(const Pool& pool, const Dataset& test);

// Estimated simplex weights over pool entries.
struct MixtureWeights {
    Eigen::VectorXd w;       // >= 0, sums to 1
    Eigen::VectorXd raw_w;   // pre-projection ridge solution
    double residual = 0.0;   // squared RKHS distance achieved by w
    double condition = 0.0;  // eigenvalue condition estimate of H
    bool degenerate = false; // H nearly singular
};

struct WeightOptions {
    double ridge = 1e-8;
    enum class Projection { clip_renormalize, euclidean } projection = Projection::clip_renormalize;
};

// Solves (H + ridge I) raw_w = C with H[i][j] = <Phi_i, Phi_j> and
// C[i] = (1/N) sum_n Phi_i(x_n), projects onto the simplex, and returns the
// candidate (projected solution, any vertex, or uniform) with the smallest
// residual. Residual ties keep the projected solution.
MixtureWeights estimate_weights(const Pool& pool, const Dataset& test, const WeightOptions& opts = {});

// Euclidean projection onto the probability simplex.
Eigen::VectorXd simplex_project(const Eigen::VectorXd& v);

// Herded points labeled with the provider index they were drawn from.
struct MimicSample {
    Eigen::MatrixXd X;
    Eigen::VectorXi provider;
};

// Provider indices are drawn categorically from w; each provider's points
// come from its own herding sequence seeded by (seed, provider index), so
// sequences never interleave across providers. Deterministic given seed.
MimicSample generate_mimic(const Pool& pool, const Eigen::VectorXd& w, Eigen::Index size,
                           std::uint64_t seed, const HerdOptions& herd = {});

// Classifier from points to provider indices, trained on a mimic sample.
ModelRef train_selector(const KernelConfig& cfg, const MimicSample& sample, double ridge = 1e-3);

struct DeployOptions {
    Eigen::Index mimic_size = 0; // 0: 20 * entries * (classes or 10), capped at 2000
    std::uint64_t seed = 0;
    WeightOptions weights{};
    HerdOptions herd{};
    double selector_ridge = 1e-3;
};

struct DeployDiagnostics {
    MixtureWeights weights;
    ModelRef selector;
    Eigen::VectorXi chosen;           // per-point entry index
    Eigen::VectorXd per_entry_mmd_sq; // same diagnostics as task-recurrent matching
    Eigen::Index mimic_size = 0;
};

struct DeployResult {
    Eigen::VectorXd predictions;
    DeployDiagnostics diag;
};

// Instance-recurrent deployment: weight estimation, mimic generation,
// selector training, then per-point prediction with the selected models.
DeployResult deploy_instance_recurrent(const Pool& pool, const Dataset& test,
                                       const DeployOptions& opts = {});

struct TaskDeployResult {
    Eigen::VectorXd predictions;
    MatchResult match;
};

// Task-recurrent deployment: match once, predict everything with that model.
TaskDeployResult deploy_task_recurrent(const Pool& pool, const Dataset& test);

} // namespace rkme

#endif

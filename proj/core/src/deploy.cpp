#include "rkme/deploy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "rkme/errors.hpp"
#include "rkme/random.hpp"

namespace rkme {

namespace {

void check_test_against_pool(const Pool& pool, const Dataset& test) {
    if (pool.empty()) throw InputError("pool is empty");
    test.validate();
    if (test.dim() != pool.spec_at(0).dim()) {
        throw InputError("test dimension " + std::to_string(test.dim()) +
                         " does not match pool dimension " + std::to_string(pool.spec_at(0).dim()));
    }
}

} // namespace

MatchResult match_task_recurrent(const Pool& pool, const Dataset& test) {
    check_test_against_pool(pool, test);
    MatchResult result;
    result.per_entry_mmd_sq.resize(pool.size());
    const Embedding test_emb = Embedding::of(test, pool.kernel());
    for (Eigen::Index i = 0; i < pool.size(); ++i) {
        result.per_entry_mmd_sq[i] = mmd_sq(test_emb, Embedding::of(pool.spec_at(i)));
    }
    result.index = 0;
    for (Eigen::Index i = 1; i < pool.size(); ++i) {
        if (result.per_entry_mmd_sq[i] < result.per_entry_mmd_sq[result.index]) result.index = i;
    }
    return result;
}

Eigen::VectorXd simplex_project(const Eigen::VectorXd& v) {
    const Eigen::Index n = v.size();
    std::vector<double> u(v.begin(), v.end());
    std::sort(u.begin(), u.end(), std::greater<double>());
    double running = 0.0;
    double theta = 0.0;
    Eigen::Index rho = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        running += u[static_cast<std::size_t>(i)];
        const double candidate = (running - 1.0) / static_cast<double>(i + 1);
        if (u[static_cast<std::size_t>(i)] - candidate > 0.0) {
            theta = candidate;
            rho = i;
        }
    }
    (void)rho;
    return (v.array() - theta).max(0.0);
}

MixtureWeights estimate_weights(const Pool& pool, const Dataset& test, const WeightOptions& opts) {
    check_test_against_pool(pool, test);
    const Eigen::Index c = pool.size();
    const KernelConfig& cfg = pool.kernel();

    Eigen::MatrixXd H(c, c);
    for (Eigen::Index i = 0; i < c; ++i) {
        const Rkme& si = pool.spec_at(i);
        for (Eigen::Index j = i; j < c; ++j) {
            const Rkme& sj = pool.spec_at(j);
            const double inner = si.beta.dot(gram(cfg, si.Z, sj.Z) * sj.beta);
            H(i, j) = inner;
            H(j, i) = inner;
        }
    }
    Eigen::VectorXd C(c);
    for (Eigen::Index i = 0; i < c; ++i) {
        C[i] = rkme_eval_rows(pool.spec_at(i), test.X).mean();
    }

    Eigen::MatrixXd A = H;
    A.diagonal().array() += opts.ridge;
    MixtureWeights result;
    result.raw_w = A.ldlt().solve(C);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H);
    const double lambda_max = eig.eigenvalues().maxCoeff();
    const double lambda_min = eig.eigenvalues().minCoeff();
    result.condition = lambda_min > 0.0 ? lambda_max / lambda_min : std::numeric_limits<double>::infinity();
    result.degenerate = !(result.condition < 1e10);

    Eigen::VectorXd projected;
    if (opts.projection == WeightOptions::Projection::euclidean) {
        projected = simplex_project(result.raw_w);
    } else {
        projected = result.raw_w.cwiseMax(0.0);
        const double total = projected.sum();
        if (total > 0.0) {
            projected /= total;
        } else {
            projected = Eigen::VectorXd::Constant(c, 1.0 / static_cast<double>(c));
        }
    }

    // Residual of a candidate weight vector; the returned w is the best of
    // the projected solution, every vertex, and the uniform vector.
    const double t_self = empirical_kme_inner(cfg, test.X, test.X);
    const auto residual_of = [&](const Eigen::VectorXd& w) {
        return std::max(0.0, t_self - 2.0 * w.dot(C) + w.dot(H * w));
    };

    result.w = projected;
    result.residual = residual_of(projected);
    for (Eigen::Index i = 0; i < c; ++i) {
        Eigen::VectorXd vertex = Eigen::VectorXd::Zero(c);
        vertex[i] = 1.0;
        const double r = residual_of(vertex);
        if (r < result.residual) {
            result.residual = r;
            result.w = vertex;
        }
    }
    const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(c, 1.0 / static_cast<double>(c));
    const double r_uniform = residual_of(uniform);
    if (r_uniform < result.residual) {
        result.residual = r_uniform;
        result.w = uniform;
    }
    return result;
}

MimicSample generate_mimic(const Pool& pool, const Eigen::VectorXd& w, Eigen::Index size,
                           std::uint64_t seed, const HerdOptions& herd) {
    if (pool.empty()) throw InputError("pool is empty");
    if (size < 1) throw InputError("mimic sample size must be >= 1");
    if (w.size() != pool.size()) throw InputError("weight vector length does not match pool size");
    if (w.minCoeff() < 0.0) throw InputError("mixture weights must be non-negative");
    if (!(w.sum() > 0.0)) throw InputError("mixture weights are all zero");

    const Eigen::Index c = pool.size();
    MimicSample sample;
    sample.provider.resize(size);
    sample.X.resize(size, pool.spec_at(0).dim());

    Rng provider_rng(mix_seed(seed, 0x70726f76ULL));
    Eigen::VectorXi counts = Eigen::VectorXi::Zero(c);
    for (Eigen::Index s = 0; s < size; ++s) {
        const int i = provider_rng.categorical(w);
        sample.provider[s] = i;
        counts[i] += 1;
    }

    // Each provider herds its own sequence; points are then dealt back out
    // in draw order, so the draw order never perturbs any sequence.
    std::vector<Eigen::MatrixXd> herded(static_cast<std::size_t>(c));
    for (Eigen::Index i = 0; i < c; ++i) {
        if (counts[i] == 0) continue;
        HerdOptions per_provider = herd;
        per_provider.seed = mix_seed(seed, 0x68657264ULL + static_cast<std::uint64_t>(i));
        herded[static_cast<std::size_t>(i)] = herd_sample(pool.spec_at(i), counts[i], per_provider);
    }
    Eigen::VectorXi used = Eigen::VectorXi::Zero(c);
    for (Eigen::Index s = 0; s < size; ++s) {
        const int i = sample.provider[s];
        sample.X.row(s) = herded[static_cast<std::size_t>(i)].row(used[i]++);
    }
    return sample;
}

ModelRef train_selector(const KernelConfig& cfg, const MimicSample& sample, double ridge) {
    if (sample.X.rows() < 1) throw InputError("mimic sample is empty");
    Dataset data;
    data.X = sample.X;
    data.y = sample.provider.cast<double>();
    return train_krc(cfg, data, ridge);
}

namespace {

Eigen::Index default_mimic_size(const Pool& pool) {
    // 20 * c * (class count when every model advertises one, else 10).
    Eigen::Index classes = 0;
    for (Eigen::Index i = 0; i < pool.size(); ++i) {
        const ModelRef& model = pool.model_at(i);
        const auto* kr = std::get_if<KernelRidgeParams>(&model.params);
        if (kr == nullptr || model.output != OutputKind::class_index) {
            classes = 0;
            break;
        }
        classes = std::max(classes, kr->classes.size());
    }
    if (classes == 0) classes = 10;
    return std::min<Eigen::Index>(2000, 20 * pool.size() * classes);
}

} // namespace

DeployResult deploy_instance_recurrent(const Pool& pool, const Dataset& test,
                                       const DeployOptions& opts) {
    check_test_against_pool(pool, test);

    DeployResult result;
    result.diag.weights = estimate_weights(pool, test, opts.weights);
    result.diag.per_entry_mmd_sq = match_task_recurrent(pool, test).per_entry_mmd_sq;
    result.diag.mimic_size = opts.mimic_size > 0 ? opts.mimic_size : default_mimic_size(pool);

    const MimicSample sample =
        generate_mimic(pool, result.diag.weights.w, result.diag.mimic_size, opts.seed, opts.herd);
    result.diag.selector = train_selector(pool.kernel(), sample, opts.selector_ridge);

    const Eigen::VectorXd chosen = predict(result.diag.selector, test.X);
    result.diag.chosen.resize(test.size());
    for (Eigen::Index i = 0; i < test.size(); ++i) {
        result.diag.chosen[i] = static_cast<int>(std::lround(chosen[i]));
    }

    // Predict per selected entry, batching points that share a model.
    result.predictions.resize(test.size());
    for (Eigen::Index entry = 0; entry < pool.size(); ++entry) {
        std::vector<Eigen::Index> rows;
        for (Eigen::Index i = 0; i < test.size(); ++i) {
            if (result.diag.chosen[i] == entry) rows.push_back(i);
        }
        if (rows.empty()) continue;
        Eigen::MatrixXd subset(static_cast<Eigen::Index>(rows.size()), test.dim());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            subset.row(static_cast<Eigen::Index>(r)) = test.X.row(rows[r]);
        }
        const Eigen::VectorXd labels = predict(pool.model_at(entry), subset);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            result.predictions[rows[r]] = labels[static_cast<Eigen::Index>(r)];
        }
    }
    return result;
}

TaskDeployResult deploy_task_recurrent(const Pool& pool, const Dataset& test) {
    TaskDeployResult result;
    result.match = match_task_recurrent(pool, test);
    result.predictions = predict(pool.model_at(result.match.index), test.X);
    return result;
}

} // namespace rkme

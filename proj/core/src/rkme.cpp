#include "rkme/rkme.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <vector>

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

#include "json_eigen.hpp"
#include "rkme/errors.hpp"
#include "rkme/random.hpp"

namespace rkme {

void Rkme::validate() const {
    kernel.validate();
    if (Z.rows() < 1) throw InputError("reduced set must contain at least one point");
    if (beta.size() != Z.rows()) throw InputError("beta length must equal reduced set size");
    if (!Z.allFinite() || !beta.allFinite()) throw InputError("reduced set contains non-finite values");
}

void to_json(nlohmann::json& j, const Rkme& spec) {
    nlohmann::json meta{{"source_size", spec.meta.source_size}, {"objective", spec.meta.objective}};
    if (!spec.meta.created.empty()) meta["created"] = spec.meta.created;
    j = nlohmann::json{{"kernel", spec.kernel},
                       {"beta", detail::vector_to_json(spec.beta)},
                       {"Z", detail::matrix_to_json(spec.Z)},
                       {"meta", std::move(meta)}};
}

void from_json(const nlohmann::json& j, Rkme& spec) {
    spec.kernel = j.at("kernel").get<KernelConfig>();
    spec.beta = detail::vector_from_json(j.at("beta"), "rkme beta");
    spec.Z = detail::matrix_from_json(j.at("Z"), "rkme Z");
    const auto& meta = j.at("meta");
    spec.meta.source_size = meta.at("source_size").get<Eigen::Index>();
    spec.meta.objective = meta.at("objective").get<double>();
    spec.meta.created = meta.value("created", std::string{});
    spec.validate();
}

Rkme read_rkme_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open spec file '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InputError("malformed spec JSON in '" + path.string() + "': " + e.what());
    }
    return j.get<Rkme>();
}

void write_rkme_json(const Rkme& spec, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
    out << nlohmann::json(spec).dump(2) << '\n';
    if (!out) throw InputError("failed writing '" + path.string() + "'");
}

Embedding Embedding::of(const Dataset& data, const KernelConfig& cfg) {
    data.validate();
    cfg.validate();
    Embedding emb;
    emb.kernel = cfg;
    emb.points = data.X;
    emb.weights = Eigen::VectorXd::Constant(data.size(), 1.0 / static_cast<double>(data.size()));
    return emb;
}

Embedding Embedding::of(const Rkme& spec) {
    spec.validate();
    return Embedding{spec.kernel, spec.Z, spec.beta};
}

namespace {

constexpr Eigen::Index kBlockRows = 256;

// sum_ij u[i] v[j] k(P.row(i), Q.row(j)), accumulated block by block.
double weighted_gram_sum(const KernelConfig& cfg, const Eigen::Ref<const Eigen::MatrixXd>& P,
                         const Eigen::VectorXd& u, const Eigen::Ref<const Eigen::MatrixXd>& Q,
                         const Eigen::VectorXd& v) {
    double total = 0.0;
    for (Eigen::Index begin = 0; begin < P.rows(); begin += kBlockRows) {
        const Eigen::Index rows = std::min(kBlockRows, P.rows() - begin);
        const Eigen::MatrixXd block = gram(cfg, P.middleRows(begin, rows), Q);
        total += u.segment(begin, rows).dot(block * v);
    }
    return total;
}

} // namespace

double empirical_kme_inner(const KernelConfig& cfg, const Eigen::Ref<const Eigen::MatrixXd>& X,
                           const Eigen::Ref<const Eigen::MatrixXd>& X_prime) {
    if (X.rows() < 1 || X_prime.rows() < 1) throw InputError("empirical KME requires non-empty inputs");
    const Eigen::VectorXd u = Eigen::VectorXd::Constant(X.rows(), 1.0 / static_cast<double>(X.rows()));
    const Eigen::VectorXd v =
        Eigen::VectorXd::Constant(X_prime.rows(), 1.0 / static_cast<double>(X_prime.rows()));
    return weighted_gram_sum(cfg, X, u, X_prime, v);
}

double mmd_sq(const Embedding& a, const Embedding& b) {
    if (!(a.kernel == b.kernel)) {
        throw ConfigError("embeddings use different kernels (" + to_string(a.kernel.family) + ", gamma=" +
                          std::to_string(a.kernel.gamma) + " vs " + to_string(b.kernel.family) +
                          ", gamma=" + std::to_string(b.kernel.gamma) + ")");
    }
    if (a.points.rows() < 1 || b.points.rows() < 1) throw InputError("embedding has no points");
    const double aa = weighted_gram_sum(a.kernel, a.points, a.weights, a.points, a.weights);
    const double bb = weighted_gram_sum(b.kernel, b.points, b.weights, b.points, b.weights);
    const double ab = weighted_gram_sum(a.kernel, a.points, a.weights, b.points, b.weights);
    return std::max(0.0, aa + bb - 2.0 * ab);
}

double mmd_sq(const Dataset& a, const Dataset& b, const KernelConfig& cfg) {
    return mmd_sq(Embedding::of(a, cfg), Embedding::of(b, cfg));
}

double mmd_sq(const Dataset& a, const Rkme& b) {
    return mmd_sq(Embedding::of(a, b.kernel), Embedding::of(b));
}

double mmd_sq(const Rkme& a, const Rkme& b) { return mmd_sq(Embedding::of(a), Embedding::of(b)); }

Eigen::VectorXd update_beta(const KernelConfig& cfg, const Eigen::Ref<const Eigen::MatrixXd>& Z,
                            const Eigen::Ref<const Eigen::MatrixXd>& X, double lambda) {
    if (Z.rows() < 1 || X.rows() < 1) throw InputError("update_beta requires non-empty Z and X");
    if (lambda < 0.0) throw InputError("ridge lambda must be >= 0");
    Eigen::MatrixXd K = gram(cfg, Z, Z);
    const Eigen::VectorXd C = gram(cfg, Z, X).rowwise().mean();
    Eigen::MatrixXd A = K;
    A.diagonal().array() += lambda;
    const auto ldlt = A.ldlt();
    const Eigen::VectorXd beta = ldlt.solve(C);
    if (lambda == 0.0) {
        const Eigen::VectorXd d = ldlt.vectorD();
        const double d_max = d.cwiseAbs().maxCoeff();
        const double residual = (K * beta - C).cwiseAbs().maxCoeff();
        if (!beta.allFinite() || d.cwiseAbs().minCoeff() <= 1e-12 * d_max ||
            residual > 1e-8 * std::max(1.0, C.cwiseAbs().maxCoeff())) {
            throw SolverError("kernel matrix is singular; rerun with a positive ridge");
        }
    }
    return beta;
}

double rkme_eval(const Rkme& spec, const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (x.size() != spec.dim()) throw InputError("point dimension does not match reduced set");
    Eigen::MatrixXd xr = x.transpose();
    return (gram(spec.kernel, spec.Z, xr).col(0)).dot(spec.beta);
}

Eigen::VectorXd rkme_eval_rows(const Rkme& spec, const Eigen::Ref<const Eigen::MatrixXd>& X) {
    if (X.cols() != spec.dim()) throw InputError("points dimension does not match reduced set");
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index begin = 0; begin < X.rows(); begin += kBlockRows) {
        const Eigen::Index rows = std::min(kBlockRows, X.rows() - begin);
        out.segment(begin, rows) = gram(spec.kernel, X.middleRows(begin, rows), spec.Z) * spec.beta;
    }
    return out;
}

// ---------------------------------------------------------------------------
// k-means

namespace {

Eigen::VectorXd sq_dists_to_center(const Eigen::Ref<const Eigen::MatrixXd>& X,
                                   const Eigen::RowVectorXd& center) {
    Eigen::VectorXd d2 = X.rowwise().squaredNorm();
    d2.noalias() -= 2.0 * (X * center.transpose());
    d2.array() += center.squaredNorm();
    return d2;
}

} // namespace

Eigen::MatrixXd kmeans_centers(const Eigen::Ref<const Eigen::MatrixXd>& X, Eigen::Index k,
                               std::uint64_t seed, int max_iterations) {
    const Eigen::Index n = X.rows();
    if (k < 1 || k > n) throw InputError("k-means requires 1 <= k <= n");
    Rng rng(mix_seed(seed, 0x6b6d65616e73ULL));

    // k-means++ seeding
    Eigen::MatrixXd centers(k, X.cols());
    centers.row(0) = X.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
    Eigen::VectorXd best_d2 = sq_dists_to_center(X, centers.row(0)).cwiseMax(0.0);
    for (Eigen::Index c = 1; c < k; ++c) {
        const double total = best_d2.sum();
        Eigen::Index pick;
        if (total > 0.0) {
            pick = rng.categorical(best_d2);
        } else {
            pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
        }
        centers.row(c) = X.row(pick);
        best_d2 = best_d2.cwiseMin(sq_dists_to_center(X, centers.row(c)).cwiseMax(0.0));
    }

    // Lloyd iterations; ties and empty-cluster repair are deterministic.
    std::vector<Eigen::Index> assign(static_cast<std::size_t>(n), -1);
    Eigen::MatrixXd d2(n, k);
    for (int it = 0; it < max_iterations; ++it) {
        for (Eigen::Index c = 0; c < k; ++c) d2.col(c) = sq_dists_to_center(X, centers.row(c));
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::Index best = 0;
            d2.row(i).minCoeff(&best);
            if (assign[static_cast<std::size_t>(i)] != best) {
                assign[static_cast<std::size_t>(i)] = best;
                changed = true;
            }
        }
        if (!changed && it > 0) break;

        Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, X.cols());
        Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(assign[static_cast<std::size_t>(i)]) += X.row(i);
            counts[assign[static_cast<std::size_t>(i)]] += 1.0;
        }
        for (Eigen::Index c = 0; c < k; ++c) {
            if (counts[c] > 0.0) {
                centers.row(c) = sums.row(c) / counts[c];
            } else {
                // Reseat an empty cluster at the point farthest from its center.
                Eigen::Index far = 0;
                double far_d = -1.0;
                for (Eigen::Index i = 0; i < n; ++i) {
                    const double di = d2(i, assign[static_cast<std::size_t>(i)]);
                    if (di > far_d) {
                        far_d = di;
                        far = i;
                    }
                }
                centers.row(c) = X.row(far);
                assign[static_cast<std::size_t>(far)] = c;
            }
        }
    }
    return centers;
}

// ---------------------------------------------------------------------------
// reduced-set construction

namespace {

struct ObjectiveParts {
    Eigen::MatrixXd K_zz; // M x M
    Eigen::MatrixXd K_zx; // M x N
};

ObjectiveParts objective_parts(const KernelConfig& cfg, const Eigen::Ref<const Eigen::MatrixXd>& Z,
                               const Eigen::Ref<const Eigen::MatrixXd>& X) {
    return {gram(cfg, Z, Z), gram(cfg, Z, X)};
}

double objective_value(double t_xx, const Eigen::VectorXd& beta, const ObjectiveParts& parts) {
    const Eigen::VectorXd C = parts.K_zx.rowwise().mean();
    return t_xx + beta.dot(parts.K_zz * beta) - 2.0 * beta.dot(C);
}

// dF/dZ at fixed beta; rows correspond to reduced-set points.
Eigen::MatrixXd objective_grad(const KernelConfig& cfg, const Eigen::Ref<const Eigen::MatrixXd>& X,
                               const Eigen::VectorXd& beta, const Eigen::Ref<const Eigen::MatrixXd>& Z,
                               const ObjectiveParts& parts) {
    const auto n = static_cast<double>(X.rows());
    if (cfg.family == KernelFamily::gaussian) {
        const Eigen::VectorXd s = parts.K_zz * beta - parts.K_zx.rowwise().sum() / n;
        Eigen::MatrixXd inner = s.asDiagonal() * Z;
        inner.noalias() -= parts.K_zz * beta.asDiagonal() * Z;
        inner.noalias() += parts.K_zx * X / n;
        return (-4.0 * cfg.gamma) * (beta.asDiagonal() * inner);
    }

    // laplacian: accumulate per row, skipping the singular z == x pairs.
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(Z.rows(), Z.cols());
    for (Eigen::Index m = 0; m < Z.rows(); ++m) {
        Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(Z.cols());
        for (Eigen::Index j = 0; j < Z.rows(); ++j) {
            const Eigen::RowVectorXd diff = Z.row(m) - Z.row(j);
            const double dist = diff.norm();
            if (dist == 0.0) continue;
            acc += beta[j] * (-cfg.gamma * parts.K_zz(m, j) / dist) * diff;
        }
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            const Eigen::RowVectorXd diff = Z.row(m) - X.row(i);
            const double dist = diff.norm();
            if (dist == 0.0) continue;
            acc -= (1.0 / n) * (-cfg.gamma * parts.K_zx(m, i) / dist) * diff;
        }
        grad.row(m) = 2.0 * beta[m] * acc;
    }
    return grad;
}

} // namespace

Rkme reduce(const KernelConfig& cfg, const Eigen::Ref<const Eigen::MatrixXd>& X, Eigen::Index M,
            const ReduceOptions& opts) {
    cfg.validate();
    if (X.rows() < 1) throw InputError("reduce requires a non-empty dataset");
    if (!X.allFinite()) throw InputError("reduce requires finite data");
    if (M < 1) throw InputError("reduced set size M must be >= 1");
    if (M > X.rows()) {
        throw InputError("reduced set size M=" + std::to_string(M) + " exceeds dataset size N=" +
                         std::to_string(X.rows()));
    }
    if (opts.iterations < 1) throw InputError("reduce requires at least one iteration");
    if (!(opts.eta > 0.0)) throw InputError("reduce step size eta must be > 0");

    const double t_xx = empirical_kme_inner(cfg, X, X);

    Eigen::MatrixXd Z = kmeans_centers(X, M, opts.seed);
    Eigen::VectorXd beta = Eigen::VectorXd::Constant(M, 1.0 / static_cast<double>(M));
    ObjectiveParts parts = objective_parts(cfg, Z, X);
    double objective = objective_value(t_xx, beta, parts);
    if (opts.trace) {
        opts.trace->clear();
        opts.trace->push_back(objective);
    }

    for (int t = 0; t < opts.iterations; ++t) {
        const double before = objective;

        // Coefficient step: closed form, kept only when it does not regress
        // (the ridge perturbs the exact minimizer by O(lambda)).
        const Eigen::VectorXd beta_new = update_beta(cfg, Z, X);
        const double f_beta = objective_value(t_xx, beta_new, parts);
        if (std::isfinite(f_beta) && f_beta <= objective) {
            beta = beta_new;
            objective = f_beta;
        }

        // Position step: one gradient step on all rows from the same
        // snapshot, with step halving until the objective does not increase.
        const Eigen::MatrixXd grad = objective_grad(cfg, X, beta, Z, parts);
        double eta = opts.eta;
        for (int attempt = 0; attempt < 20; ++attempt) {
            const Eigen::MatrixXd Z_try = Z - eta * grad;
            const ObjectiveParts parts_try = objective_parts(cfg, Z_try, X);
            const double f_try = objective_value(t_xx, beta, parts_try);
            if (std::isfinite(f_try) && f_try <= objective) {
                Z = Z_try;
                parts = parts_try;
                objective = f_try;
                break;
            }
            eta *= 0.5;
        }

        if (opts.trace) opts.trace->push_back(objective);
        if (!std::isfinite(objective)) {
            throw SolverError("reduced-set objective diverged; decrease eta");
        }
        if (before - objective <= opts.rel_tol * std::abs(before)) break;
    }

    Rkme spec;
    spec.kernel = cfg;
    spec.beta = beta;
    spec.Z = Z;
    spec.meta.source_size = X.rows();
    spec.meta.objective = objective;
    return spec;
}

} // namespace rkme

#include "rkme/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "rkme/errors.hpp"

namespace rkme {

std::string to_string(KernelFamily family) {
    return family == KernelFamily::gaussian ? "gaussian" : "laplacian";
}

KernelFamily kernel_family_from_string(const std::string& name) {
    if (name == "gaussian") return KernelFamily::gaussian;
    if (name == "laplacian") return KernelFamily::laplacian;
    throw InputError("unknown kernel family '" + name + "' (expected gaussian or laplacian)");
}

void KernelConfig::validate() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) {
        throw InputError("kernel gamma must be a positive finite real");
    }
}

void to_json(nlohmann::json& j, const KernelConfig& cfg) {
    j = nlohmann::json{{"family", to_string(cfg.family)}, {"gamma", cfg.gamma}};
}

void from_json(const nlohmann::json& j, KernelConfig& cfg) {
    cfg.family = kernel_family_from_string(j.at("family").get<std::string>());
    cfg.gamma = j.at("gamma").get<double>();
    cfg.validate();
}

namespace {

void check_same_dim(Eigen::Index da, Eigen::Index db) {
    if (da != db) {
        throw InputError("dimension mismatch: " + std::to_string(da) + " vs " + std::to_string(db));
    }
    if (da < 1) throw InputError("points must have dimension >= 1");
}

// Squared distances for one row of A against all rows of B, via the
// expansion |a-b|^2 = |a|^2 + |b|^2 - 2 a.b, clamped at 0 against roundoff.
Eigen::ArrayXd row_sq_dists(const Eigen::Ref<const Eigen::MatrixXd>& A,
                            const Eigen::Ref<const Eigen::MatrixXd>& B,
                            const Eigen::VectorXd& b_sq_norms, Eigen::Index i) {
    Eigen::ArrayXd d2 = (b_sq_norms.array() - 2.0 * (B * A.row(i).transpose()).array()) +
                        A.row(i).squaredNorm();
    return d2.max(0.0);
}

void gram_rows(const KernelConfig& cfg, const Eigen::Ref<const Eigen::MatrixXd>& A,
               const Eigen::Ref<const Eigen::MatrixXd>& B, const Eigen::VectorXd& b_sq_norms,
               Eigen::MatrixXd& out, Eigen::Index row_begin, Eigen::Index row_end) {
    for (Eigen::Index i = row_begin; i < row_end; ++i) {
        Eigen::ArrayXd d2 = row_sq_dists(A, B, b_sq_norms, i);
        if (cfg.family == KernelFamily::gaussian) {
            out.row(i) = (-cfg.gamma * d2).exp();
        } else {
            out.row(i) = (-cfg.gamma * d2.sqrt()).exp();
        }
    }
}

} // namespace

int max_threads() {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    n = std::clamp(n, 1, 8);
    if (const char* env = std::getenv("RKME_NUM_THREADS")) {
        char* end = nullptr;
        const long cap = std::strtol(env, &end, 10);
        if (end != env && cap >= 1) n = std::min(n, static_cast<int>(cap));
    }
    return n;
}

double eval(const KernelConfig& cfg, const Eigen::Ref<const Eigen::VectorXd>& x,
            const Eigen::Ref<const Eigen::VectorXd>& x_prime) {
    cfg.validate();
    check_same_dim(x.size(), x_prime.size());
    if (cfg.family == KernelFamily::gaussian) {
        return std::exp(-cfg.gamma * (x - x_prime).squaredNorm());
    }
    return std::exp(-cfg.gamma * (x - x_prime).norm());
}

Eigen::MatrixXd gram(const KernelConfig& cfg, const Eigen::Ref<const Eigen::MatrixXd>& A,
                     const Eigen::Ref<const Eigen::MatrixXd>& B) {
    cfg.validate();
    check_same_dim(A.cols(), B.cols());
    const Eigen::Index n = A.rows();
    const Eigen::Index m = B.rows();
    Eigen::MatrixXd out(n, m);
    const Eigen::VectorXd b_sq_norms = B.rowwise().squaredNorm();

    const int threads = max_threads();
    if (threads == 1 || n * m < 1 << 16) {
        gram_rows(cfg, A, B, b_sq_norms, out, 0, n);
    } else {
        std::vector<std::thread> workers;
        const Eigen::Index chunk = (n + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            const Eigen::Index begin = std::min<Eigen::Index>(t * chunk, n);
            const Eigen::Index end = std::min<Eigen::Index>(begin + chunk, n);
            if (begin == end) break;
            workers.emplace_back(
                [&, begin, end] { gram_rows(cfg, A, B, b_sq_norms, out, begin, end); });
        }
        for (auto& w : workers) w.join();
    }

    // A set against itself: pin the unit diagonal and exact symmetry that
    // hold mathematically but not under the norm expansion's roundoff.
    if (A.data() == B.data() && n == m) {
        out.diagonal().setOnes();
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i + 1; j < m; ++j) out(i, j) = out(j, i);
        }
    }
    return out;
}

Eigen::VectorXd grad_z(const KernelConfig& cfg, const Eigen::Ref<const Eigen::VectorXd>& z,
                       const Eigen::Ref<const Eigen::VectorXd>& x) {
    cfg.validate();
    check_same_dim(z.size(), x.size());
    const Eigen::VectorXd diff = z - x;
    if (cfg.family == KernelFamily::gaussian) {
        const double k = std::exp(-cfg.gamma * diff.squaredNorm());
        return -2.0 * cfg.gamma * k * diff;
    }
    const double dist = diff.norm();
    if (dist == 0.0) {
        throw SolverError("laplacian kernel gradient is singular at z == x");
    }
    const double k = std::exp(-cfg.gamma * dist);
    return (-cfg.gamma * k / dist) * diff;
}

} // namespace rkme

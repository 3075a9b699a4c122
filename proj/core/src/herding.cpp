#include "rkme/herding.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "rkme/errors.hpp"
#include "rkme/random.hpp"

namespace rkme {

HerdState::HerdState(Rkme spec) : spec_(std::move(spec)) {
    spec_.validate();
    drawn_.resize(16, spec_.dim());
}

void HerdState::append(const Eigen::VectorXd& x) {
    if (x.size() != spec_.dim()) throw InputError("herded point dimension mismatch");
    if (count_ == drawn_.rows()) {
        Eigen::MatrixXd grown(drawn_.rows() * 2, drawn_.cols());
        grown.topRows(count_) = drawn_.topRows(count_);
        drawn_.swap(grown);
    }
    drawn_.row(count_++) = x.transpose();
}

namespace {

// Kernel values of one point against a point set, plus the score function
// Phi(x) - (1/(T+1)) sum_t k(x_t, x) and its gradient in x.
struct HerdObjective {
    const Rkme& spec;
    Eigen::Ref<const Eigen::MatrixXd> drawn;
    double denom; // T + 1

    Eigen::VectorXd kvec(const Eigen::Ref<const Eigen::MatrixXd>& P, const Eigen::VectorXd& x) const {
        Eigen::VectorXd d2 = P.rowwise().squaredNorm();
        d2.noalias() -= 2.0 * (P * x);
        d2.array() += x.squaredNorm();
        d2 = d2.cwiseMax(0.0);
        if (spec.kernel.family == KernelFamily::gaussian) {
            return (-spec.kernel.gamma * d2.array()).exp();
        }
        return (-spec.kernel.gamma * d2.array().sqrt()).exp();
    }

    double value(const Eigen::VectorXd& x) const {
        double v = spec.beta.dot(kvec(spec.Z, x));
        if (drawn.rows() > 0) v -= kvec(drawn, x).sum() / denom;
        return v;
    }

    Eigen::VectorXd gradient(const Eigen::VectorXd& x) const {
        const double gamma = spec.kernel.gamma;
        Eigen::VectorXd g = Eigen::VectorXd::Zero(x.size());
        if (spec.kernel.family == KernelFamily::gaussian) {
            const Eigen::VectorXd kz = kvec(spec.Z, x);
            const Eigen::VectorXd bk = spec.beta.cwiseProduct(kz);
            g = -2.0 * gamma * (bk.sum() * x - spec.Z.transpose() * bk);
            if (drawn.rows() > 0) {
                const Eigen::VectorXd kd = kvec(drawn, x) / denom;
                g += 2.0 * gamma * (kd.sum() * x - drawn.transpose() * kd);
            }
            return g;
        }
        // laplacian; singular terms at zero distance are skipped.
        for (Eigen::Index m = 0; m < spec.Z.rows(); ++m) {
            const Eigen::VectorXd diff = x - spec.Z.row(m).transpose();
            const double dist = diff.norm();
            if (dist == 0.0) continue;
            g += spec.beta[m] * (-gamma * std::exp(-gamma * dist) / dist) * diff;
        }
        for (Eigen::Index t = 0; t < drawn.rows(); ++t) {
            const Eigen::VectorXd diff = x - drawn.row(t).transpose();
            const double dist = diff.norm();
            if (dist == 0.0) continue;
            g -= (1.0 / denom) * (-gamma * std::exp(-gamma * dist) / dist) * diff;
        }
        return g;
    }
};

} // namespace

Eigen::VectorXd herd_next(const HerdState& state, const HerdOptions& opts) {
    const Rkme& spec = state.spec();
    const double gamma = spec.kernel.gamma;
    const Eigen::Index d = spec.dim();
    const Eigen::Index m = spec.size();

    const double inflate = 5.0 / std::sqrt(gamma);
    const Eigen::VectorXd lo = spec.Z.colwise().minCoeff().transpose().array() - inflate;
    const Eigen::VectorXd hi = spec.Z.colwise().maxCoeff().transpose().array() + inflate;
    const auto clip = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        return x.cwiseMax(lo).cwiseMin(hi);
    };

    HerdObjective objective{spec, state.drawn(), static_cast<double>(state.count() + 1)};

    // Start set: every atom plus seeded Gaussian perturbations of atoms,
    // sigma matched to the kernel length scale.
    Rng rng(mix_seed(opts.seed, static_cast<std::uint64_t>(state.count())));
    const double sigma = 1.0 / std::sqrt(2.0 * gamma);
    std::vector<Eigen::VectorXd> starts;
    starts.reserve(static_cast<std::size_t>(m + opts.restarts));
    for (Eigen::Index i = 0; i < m; ++i) starts.push_back(spec.Z.row(i).transpose());
    for (int r = 0; r < opts.restarts; ++r) {
        const Eigen::Index atom = static_cast<Eigen::Index>(r) % m;
        starts.push_back(clip(spec.Z.row(atom).transpose() + sigma * rng.gaussian_vector(d)));
    }

    Eigen::VectorXd best_x = starts.front();
    double best_v = -std::numeric_limits<double>::infinity();
    const double step0 = 0.5 / gamma;

    for (const Eigen::VectorXd& start : starts) {
        Eigen::VectorXd x = start;
        double v = objective.value(x);
        double step = step0;
        for (int s = 0; s < opts.steps; ++s) {
            const Eigen::VectorXd g = objective.gradient(x);
            if (!g.allFinite() || g.norm() < 1e-14) break;
            double local = step;
            bool improved = false;
            for (int halving = 0; halving < 16; ++halving) {
                const Eigen::VectorXd x_try = clip(x + local * g);
                const double v_try = objective.value(x_try);
                if (v_try > v) {
                    x = x_try;
                    v = v_try;
                    improved = true;
                    break;
                }
                local *= 0.5;
            }
            if (!improved) break;
            step = std::min(local * 2.0, step0 * 8.0);
        }
        if (v > best_v) {
            best_v = v;
            best_x = x;
        }
    }
    return best_x;
}

Eigen::MatrixXd herd_sample(const Rkme& spec, Eigen::Index n, const HerdOptions& opts) {
    if (n < 1) throw InputError("herd_sample requires n >= 1");
    HerdState state(spec);
    Eigen::MatrixXd out(n, spec.dim());
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd x = herd_next(state, opts);
        out.row(i) = x.transpose();
        state.append(x);
    }
    return out;
}

} // namespace rkme

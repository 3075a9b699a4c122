#include "rkme/synth.hpp"

#include <cmath>

#include "rkme/errors.hpp"
#include "rkme/random.hpp"

namespace rkme {

namespace {

constexpr std::uint64_t kProviderStreamSalt = 0x746f79ULL;

struct ProviderMixture {
    Eigen::Vector2d inner_mean;
    Eigen::Vector2d outer_mean;
    double sigma;
};

ProviderMixture provider_mixture(const ToyConfig& cfg, int provider) {
    const double angle = 2.0 * M_PI * provider / cfg.n_providers;
    const Eigen::Vector2d direction(std::cos(angle), std::sin(angle));
    return {cfg.inner_scale * cfg.radius * direction, cfg.outer_scale * cfg.radius * direction,
            cfg.sigma};
}

// One point from a provider's two-Gaussian mixture, consuming only rng.
Eigen::Vector2d draw_point(const ProviderMixture& mix, Rng& rng) {
    const bool inner = rng.uniform() < 0.5;
    const Eigen::Vector2d mean = inner ? mix.inner_mean : mix.outer_mean;
    return mean + mix.sigma * Eigen::Vector2d(rng.gaussian(), rng.gaussian());
}

} // namespace

void ToyConfig::validate() const {
    if (n_providers < 1) throw InputError("toy config requires at least one provider");
    if (!(radius > 0.0)) throw InputError("toy circle radius must be > 0");
    if (per_provider < 1) throw InputError("toy per-provider sample size must be >= 1");
    if (sigma < 0.0) throw InputError("toy sigma must be >= 0");
    if (!(inner_scale < 1.0 && 1.0 < outer_scale)) {
        throw InputError("toy mixture means must straddle the circle");
    }
}

ToyProblem make_toy(const ToyConfig& cfg) {
    cfg.validate();
    ToyProblem problem;
    problem.rule.radius = cfg.radius;
    problem.providers.reserve(static_cast<std::size_t>(cfg.n_providers));
    for (int p = 0; p < cfg.n_providers; ++p) {
        const ProviderMixture mix = provider_mixture(cfg, p);
        Rng rng(mix_seed(cfg.seed, kProviderStreamSalt + static_cast<std::uint64_t>(p)));
        Dataset data;
        data.X.resize(cfg.per_provider, 2);
        Eigen::VectorXd labels(cfg.per_provider);
        for (Eigen::Index i = 0; i < cfg.per_provider; ++i) {
            const Eigen::Vector2d x = draw_point(mix, rng);
            data.X.row(i) = x.transpose();
            labels[i] = problem.rule(x);
        }
        data.y = labels;
        problem.providers.push_back(std::move(data));
    }
    return problem;
}

TestMode TestMode::task(int provider) {
    TestMode mode;
    mode.kind = Kind::task_recurrent;
    mode.provider = provider;
    return mode;
}

TestMode TestMode::instance(Eigen::VectorXd w) {
    TestMode mode;
    mode.kind = Kind::instance_recurrent;
    mode.w = std::move(w);
    return mode;
}

Dataset make_test(const ToyConfig& cfg, const TestMode& mode, Eigen::Index n, std::uint64_t seed) {
    cfg.validate();
    if (n < 1) throw InputError("test sample size must be >= 1");
    if (mode.kind == TestMode::Kind::task_recurrent) {
        if (mode.provider < 0 || mode.provider >= cfg.n_providers) {
            throw InputError("task-recurrent provider index out of range");
        }
    } else {
        if (mode.w.size() != cfg.n_providers) {
            throw InputError("mixture weight length does not match provider count");
        }
        if (!mode.w.allFinite() || mode.w.minCoeff() < 0.0) {
            throw InputError("mixture weights must be finite and non-negative");
        }
        if (!(mode.w.sum() > 0.0)) throw InputError("mixture weights are all zero");
    }

    const ToyLabelRule rule{cfg.radius};
    // Provider choices come from their own stream so that a vertex-weight
    // mixture reproduces the task-recurrent draw exactly.
    Rng provider_rng(mix_seed(seed, 0x7069636bULL));
    Dataset data;
    data.X.resize(n, 2);
    Eigen::VectorXd labels(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        int provider = mode.provider;
        if (mode.kind == TestMode::Kind::instance_recurrent) {
            provider = provider_rng.categorical(mode.w);
        }
        Rng point_rng(mix_seed(seed, 0x706f696eULL + static_cast<std::uint64_t>(i)));
        const Eigen::Vector2d x = draw_point(provider_mixture(cfg, provider), point_rng);
        data.X.row(i) = x.transpose();
        labels[i] = rule(x);
    }
    data.y = labels;
    return data;
}

} // namespace rkme

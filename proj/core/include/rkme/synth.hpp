#ifndef RKME_SYNTH_HPP
#define RKME_SYNTH_HPP

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "rkme/dataset.hpp"

namespace rkme {

// Synthetic 2-d binary task: providers draw from two-component Gaussian
// mixtures whose means straddle a common circle; the shared rule labels a
// point by the side of the circle it lies on, independent of provider.
struct ToyConfig {
    int n_providers = 3;
    double radius = 1.0;
    Eigen::Index per_provider = 300;
    double sigma = 0.25;
    std::uint64_t seed = 0;
    double inner_scale = 0.6; // mean inside the circle, as a fraction of radius
    double outer_scale = 1.4; // mean outside the circle

    void validate() const;
};

// The global rule: label 0 inside the circle, 1 outside. A point's label
// depends only on its coordinates.
struct ToyLabelRule {
    double radius = 1.0;
    double operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        return x.norm() < radius ? 0.0 : 1.0;
    }
};

struct ToyProblem {
    std::vector<Dataset> providers;
    ToyLabelRule rule;
};

// Labeled provider datasets; deterministic per cfg.seed.
ToyProblem make_toy(const ToyConfig& cfg);

struct TestMode {
    enum class Kind { task_recurrent, instance_recurrent } kind = Kind::task_recurrent;
    int provider = 0;  // task-recurrent: the recurring provider index
    Eigen::VectorXd w; // instance-recurrent: mixture weights over providers

    static TestMode task(int provider);
    static TestMode instance(Eigen::VectorXd w);
};

// Labeled test set: task-recurrent draws from one provider's mixture,
// instance-recurrent draws the provider per point from w. Point coordinates
// at a given index depend only on (seed, index, provider), so an
// instance-recurrent draw with a vertex w equals the task-recurrent draw.
Dataset make_test(const ToyConfig& cfg, const TestMode& mode, Eigen::Index n, std::uint64_t seed);

} // namespace rkme

#endif

#ifndef RKME_HERDING_HPP
#define RKME_HERDING_HPP

#include <cstdint>

#include <Eigen/Core>

#include "rkme/rkme.hpp"

namespace rkme {

struct HerdOptions {
    int restarts = 10;      // random perturbations added to the atom starts
    int steps = 50;         // ascent iterations per candidate
    std::uint64_t seed = 0; // perturbation seed; draw index is mixed in per draw
};

// Greedy sampling state: the target score function and the points drawn so
// far. Append-only; each draw depends on all previous ones.
class HerdState {
public:
    explicit HerdState(Rkme spec);

    const Rkme& spec() const { return spec_; }
    Eigen::Index count() const { return count_; }
    // T x d view of the points drawn so far.
    Eigen::Ref<const Eigen::MatrixXd> drawn() const { return drawn_.topRows(count_); }

    void append(const Eigen::VectorXd& x);

private:
    Rkme spec_;
    Eigen::MatrixXd drawn_;
    Eigen::Index count_ = 0;
};

// Next herded point: approximate argmax over x of
//   Phi(x) - (1/(T+1)) sum_{t<=T} k(x_t, x)
// via multi-start backtracked gradient ascent (starts: every reduced-set
// atom plus opts.restarts perturbed atoms). The returned point's objective
// is >= the best objective over the start set, and lies inside the
// bounding box of Z inflated by 5/sqrt(gamma) per axis.
Eigen::VectorXd herd_next(const HerdState& state, const HerdOptions& opts = {});

// n points drawn by repeated herd_next; deterministic given opts.seed.
Eigen::MatrixXd herd_sample(const Rkme& spec, Eigen::Index n, const HerdOptions& opts = {});

} // namespace rkme

#endif

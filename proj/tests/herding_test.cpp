#include <doctest.h>

#include <cmath>
#include <vector>

#include "rkme/errors.hpp"
#include "rkme/herding.hpp"
#include "support/test_util.hpp"

using namespace rkme;

namespace {

Rkme atom_spec(const Eigen::MatrixXd& Z, const Eigen::VectorXd& beta, double gamma) {
    Rkme spec;
    spec.kernel = KernelConfig{KernelFamily::gaussian, gamma};
    spec.Z = Z;
    spec.beta = beta;
    return spec;
}

// T = |drawn| objective of Eq.-style herding at point x, by direct sums.
double herd_objective(const Rkme& spec, const Eigen::MatrixXd& drawn, const Eigen::Vector2d& x) {
    double value = 0.0;
    for (Eigen::Index m = 0; m < spec.size(); ++m) {
        value += spec.beta[m] * testutil::oracle_kernel(spec.kernel, spec.Z.row(m), x);
    }
    for (Eigen::Index t = 0; t < drawn.rows(); ++t) {
        value -= testutil::oracle_kernel(spec.kernel, drawn.row(t), x) /
                 static_cast<double>(drawn.rows() + 1);
    }
    return value;
}

// coarse grid argmax over an axis-aligned box
std::pair<Eigen::Vector2d, double> grid_argmax(const Rkme& spec, const Eigen::MatrixXd& drawn,
                                               double lo, double hi, int steps) {
    Eigen::Vector2d best(lo, lo);
    double best_v = -1e300;
    for (int i = 0; i <= steps; ++i) {
        for (int j = 0; j <= steps; ++j) {
            const Eigen::Vector2d x(lo + (hi - lo) * i / steps, lo + (hi - lo) * j / steps);
            const double v = herd_objective(spec, drawn, x);
            if (v > best_v) {
                best_v = v;
                best = x;
            }
        }
    }
    return {best, best_v};
}

} // namespace

TEST_SUITE("herding") {

TEST_CASE("first draw from a single atom is the atom") {
    Eigen::MatrixXd Z(1, 2);
    Z << 0.4, -1.2;
    const Rkme spec = atom_spec(Z, Eigen::VectorXd::Ones(1), 1.0);
    HerdState state(spec);
    const Eigen::VectorXd x = herd_next(state);
    CHECK((x - Z.row(0).transpose()).norm() < 1e-9);

    const Eigen::MatrixXd sample = herd_sample(spec, 1);
    CHECK((sample.row(0) - Z.row(0)).norm() < 1e-9);
}

TEST_CASE("two far atoms: first draw hits an atom, second the other") {
    Eigen::MatrixXd Z(2, 2);
    Z << 0.0, 0.0, 4.0, 4.0;
    const Rkme spec = atom_spec(Z, Eigen::VectorXd::Constant(2, 0.5), 4.0);

    HerdState state(spec);
    const Eigen::VectorXd first = herd_next(state);
    const auto [grid_best, grid_value] = grid_argmax(spec, state.drawn(), -1.0, 5.0, 120);
    (void)grid_best;
    const double d0 = (first - Z.row(0).transpose()).norm();
    const double d1 = (first - Z.row(1).transpose()).norm();
    CHECK(std::min(d0, d1) < 1e-3);
    CHECK(herd_objective(spec, state.drawn(), first.head<2>()) >= grid_value - 1e-6);

    state.append(first);
    const Eigen::VectorXd second = herd_next(state);
    const Eigen::Index other = d0 < d1 ? 1 : 0;
    CHECK((second - Z.row(other).transpose()).norm() < 1e-3);

    const auto [grid_best2, grid_value2] = grid_argmax(spec, state.drawn(), -1.0, 5.0, 120);
    (void)grid_best2;
    CHECK(herd_objective(spec, state.drawn(), second.head<2>()) >= grid_value2 - 1e-6);
}

TEST_CASE("herd_sample is deterministic given the seed") {
    Rng rng(41);
    const Rkme spec = atom_spec(testutil::random_matrix(rng, 4, 2),
                                Eigen::VectorXd::Constant(4, 0.25), 1.5);
    HerdOptions opts;
    opts.seed = 9;
    const Eigen::MatrixXd a = herd_sample(spec, 25, opts);
    const Eigen::MatrixXd b = herd_sample(spec, 25, opts);
    CHECK(testutil::bitwise_equal(a, b));

    opts.seed = 10;
    const Eigen::MatrixXd c = herd_sample(spec, 25, opts);
    CHECK_FALSE(testutil::bitwise_equal(a, c));
}

TEST_CASE("herded points stay inside the inflated bounding box") {
    Rng rng(42);
    const double gamma = 2.0;
    const Rkme spec = atom_spec(testutil::random_matrix(rng, 5, 3),
                                Eigen::VectorXd::Constant(5, 0.2), gamma);
    const Eigen::MatrixXd sample = herd_sample(spec, 50);
    const double inflate = 5.0 / std::sqrt(gamma);
    for (Eigen::Index j = 0; j < 3; ++j) {
        CHECK(sample.col(j).minCoeff() >= spec.Z.col(j).minCoeff() - inflate);
        CHECK(sample.col(j).maxCoeff() <= spec.Z.col(j).maxCoeff() + inflate);
    }
    CHECK(sample.allFinite());
}

TEST_CASE("each draw greedily minimizes the next herding error") {
    Eigen::MatrixXd Z(3, 2);
    Z << 0.0, 0.0, 2.0, 0.5, -1.0, 1.5;
    Eigen::VectorXd beta(3);
    beta << 0.5, 0.3, 0.2;
    const Rkme spec = atom_spec(Z, beta, 1.0);

    // E_{T+1} as a function of the candidate appended after `drawn`
    const auto next_error = [&](const Eigen::MatrixXd& drawn, const Eigen::VectorXd& candidate) {
        Eigen::MatrixXd extended(drawn.rows() + 1, drawn.cols());
        extended.topRows(drawn.rows()) = drawn;
        extended.row(drawn.rows()) = candidate.transpose();
        const Eigen::VectorXd uniform =
            Eigen::VectorXd::Constant(extended.rows(), 1.0 / static_cast<double>(extended.rows()));
        return testutil::oracle_mmd_sq(spec.kernel, extended, uniform, spec.Z, spec.beta);
    };

    Rng rng(40);
    HerdState state(spec);
    for (int t = 0; t < 30; ++t) {
        const Eigen::VectorXd x = herd_next(state);
        const double achieved = next_error(state.drawn(), x);
        for (Eigen::Index m = 0; m < spec.size(); ++m) {
            CHECK(achieved <= next_error(state.drawn(), spec.Z.row(m).transpose()) + 1e-12);
        }
        for (int probe = 0; probe < 20; ++probe) {
            const Eigen::Vector2d random_point(rng.uniform(-2.0, 3.0), rng.uniform(-1.0, 2.5));
            CHECK(achieved <= next_error(state.drawn(), random_point) + 1e-12);
        }
        state.append(x);
    }
}

TEST_CASE("herding error trends down through cycle-aligned window medians") {
    // Greedy herding tracks the atom weights with rational frequencies, so
    // E_T saw-tooths within each visit cycle; medians are compared one full
    // cycle apart (weights 0.5/0.3/0.2 recur every 10 draws).
    Eigen::MatrixXd Z(3, 2);
    Z << 0.0, 0.0, 2.0, 0.5, -1.0, 1.5;
    Eigen::VectorXd beta(3);
    beta << 0.5, 0.3, 0.2;
    const Rkme spec = atom_spec(Z, beta, 1.0);

    const Eigen::Index total = 120;
    const Eigen::MatrixXd sample = herd_sample(spec, total);
    std::vector<double> errors;
    for (Eigen::Index t = 1; t <= total; ++t) {
        const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(t, 1.0 / static_cast<double>(t));
        errors.push_back(
            testutil::oracle_mmd_sq(spec.kernel, sample.topRows(t), uniform, spec.Z, spec.beta));
    }
    std::vector<double> medians;
    for (std::size_t t = 4; t < errors.size(); ++t) {
        medians.push_back(testutil::median({errors[t - 4], errors[t - 3], errors[t - 2],
                                            errors[t - 1], errors[t]}));
    }
    const std::size_t cycle = 10;
    for (std::size_t i = cycle; i < medians.size(); ++i) {
        CHECK(medians[i] <= medians[i - cycle] + 1e-12);
    }
}

TEST_CASE("herd_sample rejects a non-positive count") {
    Eigen::MatrixXd Z(1, 1);
    Z << 0.0;
    const Rkme spec = atom_spec(Z, Eigen::VectorXd::Ones(1), 1.0);
    CHECK_THROWS_AS(herd_sample(spec, 0), InputError);
}

} // TEST_SUITE

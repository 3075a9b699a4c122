#include <doctest.h>

#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "rkme/errors.hpp"
#include "rkme/models.hpp"
#include "rkme/synth.hpp"
#include "support/test_util.hpp"

using namespace rkme;

namespace {

const KernelConfig kCfg{KernelFamily::gaussian, 1.0};

Dataset labeled(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    Dataset d;
    d.X = X;
    d.y = y;
    return d;
}

} // namespace

TEST_SUITE("models") {

TEST_CASE("single-class training yields a constant predictor") {
    Rng rng(51);
    const Eigen::MatrixXd X = testutil::random_matrix(rng, 10, 2);
    const ModelRef model = train_krc(kCfg, labeled(X, Eigen::VectorXd::Constant(10, 3.0)));
    const Eigen::VectorXd out = predict(model, testutil::random_matrix(rng, 6, 2));
    CHECK((out.array() == 3.0).all());
}

TEST_CASE("well-separated blobs are classified like nearest centroid") {
    Rng rng(52);
    const Eigen::Index n = 100;
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const bool right = i % 2 == 0;
        X(i, 0) = (right ? 2.0 : -2.0) + 0.1 * rng.gaussian();
        X(i, 1) = 0.1 * rng.gaussian();
        y[i] = right ? 1.0 : 0.0;
    }
    const ModelRef model = train_krc(kCfg, labeled(X, y));
    const Eigen::VectorXd fitted = predict(model, X);
    CHECK((fitted.array() == y.array()).cast<double>().mean() == 1.0);

    // fresh points follow the nearest-centroid oracle
    const Eigen::MatrixXd probe = testutil::random_matrix(rng, 40, 2, 2.5);
    const Eigen::VectorXd out = predict(model, probe);
    for (Eigen::Index i = 0; i < probe.rows(); ++i) {
        const double d_right = (probe.row(i) - Eigen::RowVector2d(2.0, 0.0)).norm();
        const double d_left = (probe.row(i) - Eigen::RowVector2d(-2.0, 0.0)).norm();
        CHECK(out[i] == (d_right < d_left ? 1.0 : 0.0));
    }
}

TEST_CASE("toy providers reach 95 percent held-out accuracy") {
    ToyConfig cfg;
    cfg.seed = 5;
    cfg.per_provider = 300;
    const ToyProblem problem = make_toy(cfg);
    const KernelConfig model_cfg{KernelFamily::gaussian, 2.0};
    for (const Dataset& provider : problem.providers) {
        const Eigen::Index n_train = 200;
        Dataset train = labeled(provider.X.topRows(n_train), provider.y->head(n_train));
        const ModelRef model = train_krc(model_cfg, train);
        const Eigen::VectorXd out = predict(model, provider.X.bottomRows(100));
        const double accuracy =
            (out.array() == provider.y->tail(100).array()).cast<double>().mean();
        CHECK(accuracy >= 0.95);
    }
}

TEST_CASE("regressor fits constant labels") {
    Rng rng(53);
    const Eigen::MatrixXd X = testutil::random_matrix(rng, 12, 2);
    const ModelRef model = train_krr(kCfg, labeled(X, Eigen::VectorXd::Constant(12, 2.5)), 1e-6);
    const Eigen::VectorXd out = predict(model, X);
    CHECK((out.array() - 2.5).abs().maxCoeff() < 1e-3);
}

TEST_CASE("regressor interpolates targets in the kernel feature span") {
    Eigen::MatrixXd X(15, 2);
    Eigen::Index idx = 0;
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 3; ++j) X.row(idx++) << 1.5 * i, 1.5 * j;
    }
    Rng rng(54);
    const Eigen::MatrixXd G = gram(kCfg, X, X);
    const Eigen::VectorXd coef = testutil::random_matrix(rng, 15, 1).col(0);
    const Eigen::VectorXd y = G * coef;

    const ModelRef model = train_krr(kCfg, labeled(X, y), 1e-8);
    const Eigen::VectorXd fitted = predict(model, X);
    const double rmse = std::sqrt((fitted - y).squaredNorm() / 15.0);
    CHECK(rmse <= 1e-6);
}

TEST_CASE("regressor matches a dense solve oracle") {
    Rng rng(55);
    const Eigen::MatrixXd X = testutil::random_matrix(rng, 20, 3);
    const Eigen::VectorXd y = testutil::random_matrix(rng, 20, 1).col(0);
    const double ridge = 1e-3;
    const ModelRef model = train_krr(kCfg, labeled(X, y), ridge);

    const Eigen::MatrixXd G = gram(kCfg, X, X);
    Eigen::MatrixXd A = G;
    A.diagonal().array() += ridge;
    const Eigen::VectorXd alpha = Eigen::FullPivLU<Eigen::MatrixXd>(A).solve(y);
    const Eigen::VectorXd expected = G * alpha;
    const Eigen::VectorXd fitted = predict(model, X);
    CHECK((fitted - expected).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("predict is a pure function") {
    Rng rng(56);
    const Eigen::MatrixXd X = testutil::random_matrix(rng, 30, 2);
    Eigen::VectorXd y(30);
    for (Eigen::Index i = 0; i < 30; ++i) y[i] = static_cast<double>(i % 3);
    const ModelRef model = train_krc(kCfg, labeled(X, y));
    const Eigen::MatrixXd probe = testutil::random_matrix(rng, 10, 2);
    CHECK(testutil::bitwise_equal(predict(model, probe), predict(model, probe)));
}

TEST_CASE("classifier scores are invariant to label renaming") {
    Rng rng(57);
    const Eigen::MatrixXd X = testutil::random_matrix(rng, 40, 2);
    Eigen::VectorXd y(40);
    for (Eigen::Index i = 0; i < 40; ++i) y[i] = static_cast<double>(i % 3);
    // non-monotone renaming 0 -> 5, 1 -> 1, 2 -> 0
    const auto renamed_of = [](double v) { return v == 0.0 ? 5.0 : (v == 1.0 ? 1.0 : 0.0); };
    Eigen::VectorXd renamed(40);
    for (Eigen::Index i = 0; i < 40; ++i) renamed[i] = renamed_of(y[i]);

    const ModelRef original = train_krc(kCfg, labeled(X, y));
    const ModelRef permuted = train_krc(kCfg, labeled(X, renamed));
    const Eigen::MatrixXd probe = testutil::random_matrix(rng, 25, 2);
    const Eigen::VectorXd out_original = predict(original, probe);
    const Eigen::VectorXd out_permuted = predict(permuted, probe);
    for (Eigen::Index i = 0; i < probe.rows(); ++i) {
        CHECK(out_permuted[i] == renamed_of(out_original[i]));
    }
}

TEST_CASE("model JSON round trip preserves predictions") {
    Rng rng(58);
    const Eigen::MatrixXd X = testutil::random_matrix(rng, 25, 2);
    Eigen::VectorXd y(25);
    for (Eigen::Index i = 0; i < 25; ++i) y[i] = static_cast<double>(i % 2);
    const ModelRef model = train_krc(kCfg, labeled(X, y));

    const nlohmann::json j = model;
    CHECK(j.at("kind") == "kernel_ridge_classifier");
    const auto back = j.get<ModelRef>();
    const Eigen::MatrixXd probe = testutil::random_matrix(rng, 12, 2);
    CHECK(testutil::bitwise_equal(predict(model, probe), predict(back, probe)));

    testutil::TempDir dir("model-json");
    write_model_json(model, dir.path / "model.json");
    const ModelRef reread = read_model_json(dir.path / "model.json");
    CHECK(testutil::bitwise_equal(predict(model, probe), predict(reread, probe)));
}

TEST_CASE("training requires labels and sane inputs") {
    Rng rng(59);
    Dataset unlabeled;
    unlabeled.X = testutil::random_matrix(rng, 5, 2);
    CHECK_THROWS_AS(train_krc(kCfg, unlabeled), InputError);
    CHECK_THROWS_AS(train_krr(kCfg, unlabeled), InputError);
    CHECK_THROWS_AS(
        train_krc(kCfg, labeled(unlabeled.X, Eigen::VectorXd::Zero(5)), 0.0), InputError);

    const ModelRef model = train_krc(kCfg, labeled(unlabeled.X, Eigen::VectorXd::Zero(5)));
    CHECK_THROWS_AS(predict(model, testutil::random_matrix(rng, 3, 4)), InputError);
}

TEST_CASE("external model round trip through the line protocol") {
    const std::string fixture = testutil::echo_model_path();
    REQUIRE_FALSE(fixture.empty());

    ModelRef model;
    model.kind = ModelKind::external;
    model.output = OutputKind::real;
    model.dim = 3;
    model.params = ExternalParams{{fixture}};

    Rng rng(60);
    const Eigen::MatrixXd X = testutil::random_matrix(rng, 5, 3);
    const Eigen::VectorXd out = predict(model, X);
    CHECK((out - X.col(0)).cwiseAbs().maxCoeff() < 1e-12);

    // survives JSON round trip
    const auto back = nlohmann::json(model).get<ModelRef>();
    CHECK(testutil::bitwise_equal(predict(back, X), out));
}

TEST_CASE("external model failures carry diagnostics") {
    Rng rng(61);
    const Eigen::MatrixXd X = testutil::random_matrix(rng, 2, 1);

    ModelRef failing;
    failing.kind = ModelKind::external;
    failing.output = OutputKind::real;
    failing.dim = 1;
    failing.params = ExternalParams{{"/bin/false"}};
    CHECK_THROWS_AS(predict(failing, X), ExternalModelError);

    ModelRef missing;
    missing.kind = ModelKind::external;
    missing.output = OutputKind::real;
    missing.dim = 1;
    missing.params = ExternalParams{{"/nonexistent/model/binary"}};
    CHECK_THROWS_WITH_AS(predict(missing, X), doctest::Contains("exec failed"), ExternalModelError);
}

} // TEST_SUITE

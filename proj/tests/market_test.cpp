#include <doctest.h>

#include <fstream>

#include <nlohmann/json.hpp>

#include "rkme/errors.hpp"
#include "rkme/market.hpp"
#include "rkme/models.hpp"
#include "rkme/synth.hpp"
#include "support/test_util.hpp"

using namespace rkme;

namespace {

const KernelConfig kCfg{KernelFamily::gaussian, 2.0};

struct ToyPool {
    testutil::TempDir dir;
    ToyProblem problem;
    Pool pool;

    explicit ToyPool(const std::string& tag, Eigen::Index M = 5)
        : dir(tag), problem(make_toy(ToyConfig{})), pool(Pool::create(dir.path / "pool", kCfg)) {
        for (int i = 0; i < 3; ++i) {
            const Dataset& data = problem.providers[static_cast<std::size_t>(i)];
            const ModelRef model = train_krc(kCfg, data);
            UploadOptions opts;
            opts.reduce.seed = static_cast<std::uint64_t>(i);
            opts.created = "2026-02-03T04:05:06Z";
            pool.upload(data, model, M, "provider" + std::to_string(i),
                        EntryMeta{"provider" + std::to_string(i), "toy", opts.created}, opts);
        }
    }
};

} // namespace

TEST_SUITE("market") {

TEST_CASE("upload stores entries in insertion order") {
    ToyPool fixture("market-order");
    const auto infos = fixture.pool.list();
    REQUIRE(infos.size() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(infos[static_cast<std::size_t>(i)].id == "provider" + std::to_string(i));
        CHECK(infos[static_cast<std::size_t>(i)].reduced_size == 5);
        CHECK(infos[static_cast<std::size_t>(i)].dim == 2);
    }
}

TEST_CASE("pool reload round-trips bit-exact") {
    ToyPool fixture("market-roundtrip");
    const auto manifest_path = fixture.dir.path / "pool" / "manifest.json";
    const std::string manifest_before = testutil::read_all(manifest_path);

    const Pool reloaded = Pool::load(fixture.dir.path / "pool");
    reloaded.save_manifest();
    CHECK(testutil::read_all(manifest_path) == manifest_before);

    REQUIRE(reloaded.size() == 3);
    for (Eigen::Index i = 0; i < 3; ++i) {
        CHECK(testutil::bitwise_equal(reloaded.spec_at(i).Z, fixture.pool.spec_at(i).Z));
        CHECK(testutil::bitwise_equal(reloaded.spec_at(i).beta, fixture.pool.spec_at(i).beta));
        // entry files re-serialize to the exact bytes on disk
        const auto spec_path = fixture.dir.path / "pool" / reloaded.id_at(i) / "spec.json";
        CHECK(nlohmann::json(reloaded.spec_at(i)).dump(2) + "\n" == testutil::read_all(spec_path));
    }

    const LearnwareEntry& entry = reloaded.get("provider1");
    CHECK(entry.meta.provider == "provider1");
    CHECK(entry.model.dim == 2);
}

TEST_CASE("uploaded specifications stay close to the raw data") {
    ToyPool fixture("market-fidelity");
    for (int i = 0; i < 3; ++i) {
        const Dataset& raw = fixture.problem.providers[static_cast<std::size_t>(i)];
        CHECK(mmd_sq(raw, fixture.pool.spec_at(i)) <= 0.05);
    }
}

TEST_CASE("no reduced-set row reproduces a raw row") {
    ToyPool fixture("market-smoke");
    for (int i = 0; i < 3; ++i) {
        const Eigen::MatrixXd& Z = fixture.pool.spec_at(i).Z;
        const Eigen::MatrixXd& X = fixture.problem.providers[static_cast<std::size_t>(i)].X;
        for (Eigen::Index m = 0; m < Z.rows(); ++m) {
            for (Eigen::Index r = 0; r < X.rows(); ++r) {
                CHECK_FALSE((Z.row(m).array() == X.row(r).array()).all());
            }
        }
    }
}

TEST_CASE("empty pool lists nothing and rejects lookups") {
    testutil::TempDir dir("market-empty");
    Pool pool = Pool::create(dir.path / "pool", kCfg);
    CHECK(pool.list().empty());
    CHECK(pool.empty());
    CHECK_THROWS_AS(pool.get("anything"), NotFoundError);

    const Pool reloaded = Pool::load(dir.path / "pool");
    CHECK(reloaded.list().empty());
}

TEST_CASE("upload rejects duplicates, oversized M, and dimension mismatches") {
    testutil::TempDir dir("market-errors");
    Pool pool = Pool::create(dir.path / "pool", kCfg);
    Rng rng(71);
    Dataset data;
    data.X = testutil::random_matrix(rng, 20, 2);
    data.y = Eigen::VectorXd::Zero(20);
    for (Eigen::Index i = 0; i < 20; ++i) (*data.y)[i] = static_cast<double>(i % 2);
    const ModelRef model = train_krc(kCfg, data);

    pool.upload(data, model, 4, "alpha", EntryMeta{});
    CHECK_THROWS_AS(pool.upload(data, model, 4, "alpha", EntryMeta{}), ConflictError);
    CHECK_THROWS_AS(pool.upload(data, model, 21, "beta", EntryMeta{}), InputError);
    CHECK_THROWS_AS(pool.upload(data, model, 4, "bad/id", EntryMeta{}), InputError);

    Dataset skewed;
    skewed.X = testutil::random_matrix(rng, 10, 3);
    CHECK_THROWS_AS(pool.upload(skewed, model, 2, "gamma", EntryMeta{}), InputError);

    CHECK_THROWS_AS(Pool::create(dir.path / "pool", kCfg), ConflictError);
}

TEST_CASE("a held lock blocks uploads") {
    testutil::TempDir dir("market-lock");
    Pool pool = Pool::create(dir.path / "pool", kCfg);
    Rng rng(72);
    Dataset data;
    data.X = testutil::random_matrix(rng, 10, 2);
    data.y = Eigen::VectorXd::Zero(10);
    const ModelRef model = train_krc(kCfg, data);

    { std::ofstream lock(dir.path / "pool" / ".lock"); }
    CHECK_THROWS_AS(pool.upload(data, model, 2, "held", EntryMeta{}), ConflictError);
    std::filesystem::remove(dir.path / "pool" / ".lock");
    CHECK_NOTHROW(pool.upload(data, model, 2, "held", EntryMeta{}));
}

TEST_CASE("corrupt manifests and entries are rejected by name") {
    ToyPool fixture("market-corrupt");
    const auto pool_dir = fixture.dir.path / "pool";

    SUBCASE("tampered entry file") {
        auto spec_path = pool_dir / "provider1" / "spec.json";
        std::string bytes = testutil::read_all(spec_path);
        bytes[bytes.find("beta") + 1] = 'x';
        { std::ofstream out(spec_path, std::ios::binary); out << bytes; }
        CHECK_THROWS_WITH_AS(Pool::load(pool_dir), doctest::Contains("provider1"), IntegrityError);
    }
    SUBCASE("missing entry file") {
        std::filesystem::remove(pool_dir / "provider2" / "meta.json");
        CHECK_THROWS_WITH_AS(Pool::load(pool_dir), doctest::Contains("provider2"), IntegrityError);
    }
    SUBCASE("unparsable manifest") {
        { std::ofstream out(pool_dir / "manifest.json", std::ios::binary); out << "{nope"; }
        CHECK_THROWS_AS(Pool::load(pool_dir), IntegrityError);
    }
    SUBCASE("missing manifest") {
        std::filesystem::remove(pool_dir / "manifest.json");
        CHECK_THROWS_AS(Pool::load(pool_dir), InputError);
    }
}

} // TEST_SUITE

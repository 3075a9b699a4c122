#include "demo.hpp"

#include <filesystem>
#include <ostream>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "rkme/deploy.hpp"
#include "rkme/market.hpp"
#include "rkme/models.hpp"
#include "rkme/random.hpp"
#include "rkme/synth.hpp"

namespace rkme::tools {

namespace {

constexpr double kGamma = 2.0;
constexpr Eigen::Index kReducedSize = 5;
constexpr Eigen::Index kTestSize = 1000;
constexpr double kModelRidge = 1e-3;
constexpr const char* kPinnedStamp = "1970-01-01T00:00:00Z";

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
};

double accuracy(const Eigen::VectorXd& predicted, const Eigen::VectorXd& truth) {
    return (predicted.array() == truth.array()).cast<double>().mean();
}

nlohmann::json to_json_array(const Eigen::VectorXd& v) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

} // namespace

void run_toy_demo(std::uint64_t seed, std::ostream& out) {
    ToyConfig cfg;
    cfg.seed = seed;
    const ToyProblem problem = make_toy(cfg);
    const KernelConfig kernel{KernelFamily::gaussian, kGamma};

    char dir_name[64];
    std::snprintf(dir_name, sizeof dir_name, "rkme-demo-%016llx-%d",
                  static_cast<unsigned long long>(mix_seed(seed, 0xd3130ULL)), getpid());
    TempDir workspace{dir_name};
    Pool pool = Pool::create(workspace.path / "pool", kernel);

    for (int i = 0; i < cfg.n_providers; ++i) {
        const std::string id = "provider" + std::to_string(i);
        const ModelRef model = train_krc(kernel, problem.providers[static_cast<std::size_t>(i)],
                                         kModelRidge);
        UploadOptions opts;
        opts.reduce.seed = mix_seed(seed, 0x5a5a00ULL + static_cast<std::uint64_t>(i));
        opts.created = kPinnedStamp;
        pool.upload(problem.providers[static_cast<std::size_t>(i)], model, kReducedSize, id,
                    EntryMeta{id, "toy synthetic task", kPinnedStamp}, opts);
    }

    // Task-recurrent pass: the test distribution is provider 0's.
    const Dataset task_test = make_test(cfg, TestMode::task(0), kTestSize, mix_seed(seed, 0x7a01ULL));
    const TaskDeployResult task = deploy_task_recurrent(pool, task_test);

    // Instance-recurrent pass with a fixed ground-truth mixture.
    Eigen::VectorXd w_true = Eigen::VectorXd::Zero(cfg.n_providers);
    w_true[0] = 0.7;
    w_true[1] = 0.3;
    const Dataset mix_test =
        make_test(cfg, TestMode::instance(w_true), kTestSize, mix_seed(seed, 0x7a02ULL));
    DeployOptions deploy_opts;
    deploy_opts.seed = mix_seed(seed, 0x7a03ULL);
    const DeployResult instance = deploy_instance_recurrent(pool, mix_test, deploy_opts);

    const nlohmann::json report{
        {"seed", seed},
        {"task_recurrent",
         {{"selected_index", task.match.index},
          {"selected_id", pool.id_at(task.match.index)},
          {"expected_index", 0},
          {"per_entry_mmd", to_json_array(task.match.per_entry_mmd_sq)},
          {"accuracy", accuracy(task.predictions, *task_test.y)}}},
        {"instance_recurrent",
         {{"w_true", to_json_array(w_true)},
          {"w_hat", to_json_array(instance.diag.weights.w)},
          {"raw_w", to_json_array(instance.diag.weights.raw_w)},
          {"residual", instance.diag.weights.residual},
          {"mimic_size", instance.diag.mimic_size},
          {"accuracy", accuracy(instance.predictions, *mix_test.y)}}}};
    out << report.dump(2) << '\n';
}

} // namespace rkme::tools

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "demo.hpp"
#include "rkme/deploy.hpp"
#include "rkme/errors.hpp"
#include "rkme/herding.hpp"
#include "rkme/market.hpp"
#include "rkme/models.hpp"
#include "rkme/random.hpp"
#include "rkme/rkme.hpp"

namespace {

using namespace rkme;

constexpr const char* kPinnedStamp = "1970-01-01T00:00:00Z";

std::string fmt6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string format_full(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

nlohmann::json to_json_array(const Eigen::VectorXd& v) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw InputError("failed writing '" + path.string() + "'");
}

// Prediction CSV: one row per test point, chosen_model names the pool entry.
std::string predictions_csv(const Pool& pool, const Eigen::VectorXd& predictions,
                            const Eigen::VectorXi& chosen) {
    std::string out = "index,prediction,chosen_model\n";
    for (Eigen::Index i = 0; i < predictions.size(); ++i) {
        const Eigen::Index entry = chosen[i];
        const bool integral = pool.model_at(entry).output == OutputKind::class_index;
        out += std::to_string(i);
        out += ',';
        out += integral ? std::to_string(static_cast<long long>(std::llround(predictions[i])))
                        : format_full(predictions[i]);
        out += ',';
        out += pool.id_at(entry);
        out += '\n';
    }
    return out;
}

struct SpecBuildArgs {
    std::string data;
    std::string out;
    std::string kernel = "gaussian";
    double gamma = 1.0;
    Eigen::Index size = 1;
    int iters = 20;
    std::uint64_t seed = 0;
    bool seeded = false;
};

void cmd_spec_build(const SpecBuildArgs& args) {
    const Dataset data = read_dataset_csv(args.data);
    const KernelConfig cfg{kernel_family_from_string(args.kernel), args.gamma};
    ReduceOptions opts;
    opts.iterations = args.iters;
    opts.seed = args.seed;
    Rkme spec = reduce(cfg, data.X, args.size, opts);
    spec.meta.created = args.seeded ? kPinnedStamp : "";
    write_rkme_json(spec, args.out);
    std::cout << fmt6(spec.meta.objective) << '\n';
    std::cerr << "wrote " << args.out << " (M=" << spec.size() << ", d=" << spec.dim() << ")\n";
}

struct PoolAddArgs {
    std::string pool;
    std::string data;
    std::string id;
    Eigen::Index size = 1;
    std::string kernel = "gaussian";
    double gamma = 0.0; // 0 means "not supplied"
    std::string model_kind = "krc";
    double ridge = 1e-3;
    std::string model_file;
    std::string provider;
    std::string task;
    std::uint64_t seed = 0;
    bool seeded = false;
};

Pool open_or_create_pool(const std::string& root, const std::string& kernel_name, double gamma) {
    if (Pool::exists(root)) {
        Pool pool = Pool::load(root);
        if (gamma != 0.0) {
            const KernelConfig requested{kernel_family_from_string(kernel_name), gamma};
            if (!(requested == pool.kernel())) {
                throw ConfigError("requested kernel differs from the pool kernel; pools use one "
                                  "kernel for all entries");
            }
        }
        return pool;
    }
    if (gamma == 0.0) {
        throw InputError("pool '" + root + "' does not exist; pass --gamma (and --kernel) to create it");
    }
    return Pool::create(root, KernelConfig{kernel_family_from_string(kernel_name), gamma});
}

void cmd_pool_add(const PoolAddArgs& args) {
    Pool pool = open_or_create_pool(args.pool, args.kernel, args.gamma);
    const Dataset data = read_dataset_csv(args.data);

    ModelRef model;
    if (!args.model_file.empty()) {
        model = read_model_json(args.model_file);
    } else if (args.model_kind == "krc") {
        model = train_krc(pool.kernel(), data, args.ridge);
    } else if (args.model_kind == "krr") {
        model = train_krr(pool.kernel(), data, args.ridge);
    } else {
        throw InputError("unknown --model-kind '" + args.model_kind + "' (expected krc or krr)");
    }

    UploadOptions opts;
    opts.reduce.seed = args.seed;
    if (args.seeded) opts.created = kPinnedStamp;
    EntryMeta meta{args.provider.empty() ? args.id : args.provider, args.task, opts.created};
    const LearnwareEntry& entry = pool.upload(data, model, args.size, args.id, meta, opts);

    const nlohmann::json summary{{"id", entry.id},
                                 {"objective", entry.spec.meta.objective},
                                 {"reduced_size", entry.spec.size()}};
    std::cout << summary.dump() << '\n';
    std::cerr << "uploaded '" << entry.id << "' to " << args.pool << "\n";
}

void cmd_pool_list(const std::string& root) {
    const Pool pool = Pool::load(root);
    nlohmann::json out = nlohmann::json::array();
    for (const EntryInfo& info : pool.list()) {
        out.push_back(nlohmann::json{{"id", info.id},
                                     {"provider", info.meta.provider},
                                     {"task", info.meta.task},
                                     {"created", info.meta.created},
                                     {"dim", info.dim},
                                     {"reduced_size", info.reduced_size},
                                     {"hash", info.hash}});
    }
    std::cout << out.dump(2) << '\n';
}

void cmd_pool_show(const std::string& root, const std::string& id) {
    const Pool pool = Pool::load(root);
    const LearnwareEntry& entry = pool.get(id);
    const nlohmann::json out{{"id", entry.id},
                             {"meta",
                              {{"provider", entry.meta.provider},
                               {"task", entry.meta.task},
                               {"created", entry.meta.created}}},
                             {"spec", entry.spec},
                             {"model",
                              {{"kind", to_string(entry.model.kind)},
                               {"output", to_string(entry.model.output)},
                               {"dim", entry.model.dim}}}};
    std::cout << out.dump(2) << '\n';
}

struct DeployArgs {
    std::string pool;
    std::string test;
    std::string out;
    std::string diag;
    Eigen::Index mimic_size = 0;
    std::uint64_t seed = 0;
};

void emit_predictions(const std::string& out_path, const std::string& csv) {
    if (out_path.empty()) {
        std::cout << csv;
    } else {
        write_text(out_path, csv);
        std::cerr << "wrote " << out_path << "\n";
    }
}

void cmd_deploy_task(const DeployArgs& args) {
    const Pool pool = Pool::load(args.pool);
    const Dataset test = read_dataset_csv(args.test);
    const TaskDeployResult result = deploy_task_recurrent(pool, test);

    const Eigen::VectorXi chosen =
        Eigen::VectorXi::Constant(test.size(), static_cast<int>(result.match.index));
    emit_predictions(args.out, predictions_csv(pool, result.predictions, chosen));
    if (!args.diag.empty()) {
        const nlohmann::json diag{{"per_entry_mmd", to_json_array(result.match.per_entry_mmd_sq)},
                                  {"selected_index", result.match.index},
                                  {"selected_id", pool.id_at(result.match.index)}};
        write_text(args.diag, diag.dump(2) + "\n");
    }
    std::cerr << "matched entry '" << pool.id_at(result.match.index)
              << "' (mmd_sq=" << fmt6(result.match.per_entry_mmd_sq[result.match.index]) << ")\n";
}

void cmd_deploy_instance(const DeployArgs& args) {
    const Pool pool = Pool::load(args.pool);
    const Dataset test = read_dataset_csv(args.test);
    DeployOptions opts;
    opts.mimic_size = args.mimic_size;
    opts.seed = args.seed;
    const DeployResult result = deploy_instance_recurrent(pool, test, opts);

    emit_predictions(args.out, predictions_csv(pool, result.predictions, result.diag.chosen));
    if (!args.diag.empty()) {
        nlohmann::json chosen = nlohmann::json::array();
        for (Eigen::Index i = 0; i < result.diag.chosen.size(); ++i) {
            chosen.push_back(result.diag.chosen[i]);
        }
        const nlohmann::json diag{{"w", to_json_array(result.diag.weights.w)},
                                  {"raw_w", to_json_array(result.diag.weights.raw_w)},
                                  {"residual", result.diag.weights.residual},
                                  {"per_entry_mmd", to_json_array(result.diag.per_entry_mmd_sq)},
                                  {"condition", result.diag.weights.condition},
                                  {"degenerate", result.diag.weights.degenerate},
                                  {"mimic_size", result.diag.mimic_size},
                                  {"chosen", std::move(chosen)}};
        write_text(args.diag, diag.dump(2) + "\n");
    }
    std::cerr << "estimated weights: " << to_json_array(result.diag.weights.w).dump() << "\n";
}

void cmd_herd(const std::string& spec_path, Eigen::Index n, const std::string& out,
              std::uint64_t seed) {
    const Rkme spec = read_rkme_json(spec_path);
    HerdOptions opts;
    opts.seed = seed;
    Dataset points;
    points.X = herd_sample(spec, n, opts);
    write_dataset_csv(points, out);
    std::cerr << "wrote " << n << " herded points to " << out << "\n";
}

void cmd_weights(const std::string& pool_path, const std::string& test_path,
                 const std::string& diag_path) {
    const Pool pool = Pool::load(pool_path);
    const Dataset test = read_dataset_csv(test_path);
    const MixtureWeights weights = estimate_weights(pool, test);
    std::cout << to_json_array(weights.w).dump() << '\n';
    if (!diag_path.empty()) {
        const nlohmann::json diag{{"w", to_json_array(weights.w)},
                                  {"raw_w", to_json_array(weights.raw_w)},
                                  {"residual", weights.residual},
                                  {"condition", weights.condition},
                                  {"degenerate", weights.degenerate}};
        write_text(diag_path, diag.dump(2) + "\n");
    }
}

struct MmdArgs {
    std::string a;
    std::string b;
    std::string kernel = "gaussian";
    double gamma = 0.0;
};

bool is_spec_path(const std::string& path) {
    return path.size() > 5 && path.compare(path.size() - 5, 5, ".json") == 0;
}

void cmd_mmd(const MmdArgs& args) {
    const bool a_spec = is_spec_path(args.a);
    const bool b_spec = is_spec_path(args.b);

    KernelConfig cfg;
    if (a_spec || b_spec) {
        cfg = a_spec ? read_rkme_json(args.a).kernel : read_rkme_json(args.b).kernel;
    } else if (args.gamma != 0.0) {
        cfg = KernelConfig{kernel_family_from_string(args.kernel), args.gamma};
    } else {
        throw InputError("two CSV operands need --gamma (and optionally --kernel)");
    }

    const auto embedding_of = [&](const std::string& path, bool spec) {
        if (spec) return Embedding::of(read_rkme_json(path));
        return Embedding::of(read_dataset_csv(path), cfg);
    };
    const double value = mmd_sq(embedding_of(args.a, a_spec), embedding_of(args.b, b_spec));
    std::cout << fmt6(value) << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"learnware pool with reduced kernel mean embedding specifications"};
    app.require_subcommand(1);

    // spec build
    auto* spec_cmd = app.add_subcommand("spec", "specification construction");
    spec_cmd->require_subcommand(1);
    SpecBuildArgs spec_args;
    auto* spec_build = spec_cmd->add_subcommand("build", "reduce a dataset to an RKME specification");
    spec_build->add_option("--data", spec_args.data, "dataset CSV")->required();
    spec_build->add_option("--gamma", spec_args.gamma, "kernel bandwidth")->required();
    spec_build->add_option("--kernel", spec_args.kernel, "kernel family (gaussian|laplacian)");
    spec_build->add_option("--size", spec_args.size, "reduced set size M")->required();
    spec_build->add_option("--iters", spec_args.iters, "outer iterations");
    auto* spec_seed = spec_build->add_option("--seed", spec_args.seed, "deterministic seed");
    spec_build->add_option("--out", spec_args.out, "output spec JSON")->required();
    spec_build->callback([&] {
        spec_args.seeded = spec_seed->count() > 0;
        cmd_spec_build(spec_args);
    });

    // pool add|list|show
    auto* pool_cmd = app.add_subcommand("pool", "learnware pool management");
    pool_cmd->require_subcommand(1);
    PoolAddArgs add_args;
    auto* pool_add = pool_cmd->add_subcommand("add", "upload a learnware (spec is built here)");
    pool_add->add_option("--pool", add_args.pool, "pool directory")->required();
    pool_add->add_option("--data", add_args.data, "provider dataset CSV (labeled)")->required();
    pool_add->add_option("--id", add_args.id, "entry id")->required();
    pool_add->add_option("--size", add_args.size, "reduced set size M")->required();
    pool_add->add_option("--kernel", add_args.kernel, "kernel family for a new pool");
    pool_add->add_option("--gamma", add_args.gamma, "kernel bandwidth for a new pool");
    pool_add->add_option("--model-kind", add_args.model_kind, "builtin model to train (krc|krr)");
    pool_add->add_option("--ridge", add_args.ridge, "builtin model ridge");
    pool_add->add_option("--model", add_args.model_file, "use this model JSON instead of training");
    pool_add->add_option("--provider", add_args.provider, "provider name");
    pool_add->add_option("--task", add_args.task, "task description");
    auto* add_seed = pool_add->add_option("--seed", add_args.seed, "deterministic seed");
    pool_add->callback([&] {
        add_args.seeded = add_seed->count() > 0;
        cmd_pool_add(add_args);
    });

    std::string pool_root;
    auto* pool_list = pool_cmd->add_subcommand("list", "list pool entries");
    pool_list->add_option("--pool", pool_root, "pool directory")->required();
    pool_list->callback([&] { cmd_pool_list(pool_root); });

    std::string show_root;
    std::string show_id;
    auto* pool_show = pool_cmd->add_subcommand("show", "show one entry");
    pool_show->add_option("--pool", show_root, "pool directory")->required();
    pool_show->add_option("--id", show_id, "entry id")->required();
    pool_show->callback([&] { cmd_pool_show(show_root, show_id); });

    // deploy task|instance
    auto* deploy_cmd = app.add_subcommand("deploy", "predict a test set with pool models");
    deploy_cmd->require_subcommand(1);
    DeployArgs task_args;
    auto* deploy_task = deploy_cmd->add_subcommand("task", "task-recurrent deployment");
    deploy_task->add_option("--pool", task_args.pool, "pool directory")->required();
    deploy_task->add_option("--test", task_args.test, "test CSV")->required();
    deploy_task->add_option("--out", task_args.out, "predictions CSV (stdout if omitted)");
    deploy_task->add_option("--diag", task_args.diag, "diagnostics JSON path");
    deploy_task->add_option("--seed", task_args.seed, "deterministic seed");
    deploy_task->callback([&] { cmd_deploy_task(task_args); });

    DeployArgs inst_args;
    auto* deploy_inst = deploy_cmd->add_subcommand("instance", "instance-recurrent deployment");
    deploy_inst->add_option("--pool", inst_args.pool, "pool directory")->required();
    deploy_inst->add_option("--test", inst_args.test, "test CSV")->required();
    deploy_inst->add_option("--mimic-size", inst_args.mimic_size, "mimic sample size");
    deploy_inst->add_option("--seed", inst_args.seed, "deterministic seed");
    deploy_inst->add_option("--out", inst_args.out, "predictions CSV (stdout if omitted)");
    deploy_inst->add_option("--diag", inst_args.diag, "diagnostics JSON path");
    deploy_inst->callback([&] { cmd_deploy_instance(inst_args); });

    // herd
    std::string herd_spec;
    std::string herd_out;
    Eigen::Index herd_n = 1;
    std::uint64_t herd_seed = 0;
    auto* herd_cmd = app.add_subcommand("herd", "draw points from a specification");
    herd_cmd->add_option("--spec", herd_spec, "spec JSON")->required();
    herd_cmd->add_option("--n", herd_n, "number of points")->required();
    herd_cmd->add_option("--out", herd_out, "output CSV")->required();
    herd_cmd->add_option("--seed", herd_seed, "deterministic seed");
    herd_cmd->callback([&] { cmd_herd(herd_spec, herd_n, herd_out, herd_seed); });

    // weights
    std::string weights_pool;
    std::string weights_test;
    std::string weights_diag;
    auto* weights_cmd = app.add_subcommand("weights", "estimate mixture weights over pool entries");
    weights_cmd->add_option("--pool", weights_pool, "pool directory")->required();
    weights_cmd->add_option("--test", weights_test, "test CSV")->required();
    weights_cmd->add_option("--diag", weights_diag, "diagnostics JSON path");
    weights_cmd->callback([&] { cmd_weights(weights_pool, weights_test, weights_diag); });

    // mmd
    MmdArgs mmd_args;
    auto* mmd_cmd = app.add_subcommand("mmd", "squared MMD between specs and/or datasets");
    mmd_cmd->add_option("--a", mmd_args.a, "spec JSON or dataset CSV")->required();
    mmd_cmd->add_option("--b", mmd_args.b, "spec JSON or dataset CSV")->required();
    mmd_cmd->add_option("--gamma", mmd_args.gamma, "kernel bandwidth (CSV/CSV only)");
    mmd_cmd->add_option("--kernel", mmd_args.kernel, "kernel family (CSV/CSV only)");
    mmd_cmd->callback([&] { cmd_mmd(mmd_args); });

    // demo toy
    auto* demo_cmd = app.add_subcommand("demo", "built-in demonstrations");
    demo_cmd->require_subcommand(1);
    std::uint64_t demo_seed = 0;
    auto* demo_toy = demo_cmd->add_subcommand("toy", "synthetic three-provider walkthrough");
    demo_toy->add_option("--seed", demo_seed, "deterministic seed");
    demo_toy->callback([&] { rkme::tools::run_toy_demo(demo_seed, std::cout); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConflictError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const NotFoundError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IntegrityError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}

#include "rkme/models.hpp"

#include <algorithm>
#include <cerrno>
#include <csignal>
#include <cstring>
#include <fstream>
#include <set>

#include <sys/wait.h>
#include <unistd.h>

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

#include "base64.hpp"
#include "json_eigen.hpp"
#include "rkme/errors.hpp"

namespace rkme {

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::kernel_ridge_classifier: return "kernel_ridge_classifier";
        case ModelKind::kernel_ridge_regressor: return "kernel_ridge_regressor";
        case ModelKind::external: return "external";
    }
    return "?";
}

std::string to_string(OutputKind kind) {
    return kind == OutputKind::class_index ? "class_index" : "real";
}

namespace {

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "kernel_ridge_classifier") return ModelKind::kernel_ridge_classifier;
    if (s == "kernel_ridge_regressor") return ModelKind::kernel_ridge_regressor;
    if (s == "external") return ModelKind::external;
    throw InputError("unknown model kind '" + s + "'");
}

OutputKind output_kind_from_string(const std::string& s) {
    if (s == "class_index") return OutputKind::class_index;
    if (s == "real") return OutputKind::real;
    throw InputError("unknown model output kind '" + s + "'");
}

const Dataset& require_labels(const Dataset& data) {
    data.validate();
    if (!data.y) throw InputError("training data must carry labels");
    return data;
}

} // namespace

void to_json(nlohmann::json& j, const ModelRef& model) {
    nlohmann::json inner;
    if (const auto* kr = std::get_if<KernelRidgeParams>(&model.params)) {
        inner = nlohmann::json{{"kernel", kr->kernel},
                               {"basis", detail::matrix_to_json(kr->basis)},
                               {"alpha", detail::matrix_to_json(kr->alpha)},
                               {"classes", detail::vector_to_json(kr->classes)},
                               {"ridge", kr->ridge}};
    } else {
        inner = nlohmann::json{{"command", std::get<ExternalParams>(model.params).command}};
    }
    j = nlohmann::json{{"kind", to_string(model.kind)},
                       {"output", to_string(model.output)},
                       {"dim", model.dim},
                       {"params", detail::base64_encode(inner.dump())}};
}

void from_json(const nlohmann::json& j, ModelRef& model) {
    model.kind = model_kind_from_string(j.at("kind").get<std::string>());
    model.output = output_kind_from_string(j.at("output").get<std::string>());
    model.dim = j.at("dim").get<Eigen::Index>();
    nlohmann::json inner;
    try {
        inner = nlohmann::json::parse(detail::base64_decode(j.at("params").get<std::string>()));
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed model parameter blob: ") + e.what());
    }
    if (model.kind == ModelKind::external) {
        ExternalParams params;
        params.command = inner.at("command").get<std::vector<std::string>>();
        if (params.command.empty()) throw InputError("external model command must be non-empty");
        model.params = std::move(params);
    } else {
        KernelRidgeParams params;
        params.kernel = inner.at("kernel").get<KernelConfig>();
        params.basis = detail::matrix_from_json(inner.at("basis"), "model basis");
        params.alpha = detail::matrix_from_json(inner.at("alpha"), "model alpha");
        params.classes = detail::vector_from_json(inner.at("classes"), "model classes");
        params.ridge = inner.at("ridge").get<double>();
        if (params.basis.rows() != params.alpha.rows()) {
            throw InputError("model basis/alpha row mismatch");
        }
        model.params = std::move(params);
    }
}

ModelRef read_model_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open model file '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InputError("malformed model JSON in '" + path.string() + "': " + e.what());
    }
    return j.get<ModelRef>();
}

void write_model_json(const ModelRef& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
    out << nlohmann::json(model).dump(2) << '\n';
    if (!out) throw InputError("failed writing '" + path.string() + "'");
}

ModelRef train_krc(const KernelConfig& cfg, const Dataset& data, double ridge) {
    require_labels(data);
    if (!(ridge > 0.0)) throw InputError("ridge must be > 0");
    cfg.validate();

    std::set<double> distinct(data.y->begin(), data.y->end());
    Eigen::VectorXd classes(static_cast<Eigen::Index>(distinct.size()));
    Eigen::Index ci = 0;
    for (double c : distinct) classes[ci++] = c;

    ModelRef model;
    model.kind = ModelKind::kernel_ridge_classifier;
    model.output = OutputKind::class_index;
    model.dim = data.dim();

    KernelRidgeParams params;
    params.kernel = cfg;
    params.classes = classes;
    params.ridge = ridge;
    if (classes.size() == 1) {
        // Constant predictor: zero scores always select the single class.
        params.basis = Eigen::MatrixXd::Zero(1, data.dim());
        params.alpha = Eigen::MatrixXd::Zero(1, 1);
    } else {
        Eigen::MatrixXd G = gram(cfg, data.X, data.X);
        G.diagonal().array() += ridge;
        Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(data.size(), classes.size());
        for (Eigen::Index i = 0; i < data.size(); ++i) {
            for (Eigen::Index c = 0; c < classes.size(); ++c) {
                if ((*data.y)[i] == classes[c]) {
                    onehot(i, c) = 1.0;
                    break;
                }
            }
        }
        params.basis = data.X;
        params.alpha = G.ldlt().solve(onehot);
    }
    model.params = std::move(params);
    return model;
}

ModelRef train_krr(const KernelConfig& cfg, const Dataset& data, double ridge) {
    require_labels(data);
    if (!(ridge > 0.0)) throw InputError("ridge must be > 0");
    cfg.validate();

    Eigen::MatrixXd G = gram(cfg, data.X, data.X);
    G.diagonal().array() += ridge;

    ModelRef model;
    model.kind = ModelKind::kernel_ridge_regressor;
    model.output = OutputKind::real;
    model.dim = data.dim();

    KernelRidgeParams params;
    params.kernel = cfg;
    params.basis = data.X;
    params.alpha = G.ldlt().solve(data.y->matrix());
    params.ridge = ridge;
    model.params = std::move(params);
    return model;
}

// ---------------------------------------------------------------------------
// external model protocol

namespace {

std::string run_external_once(const std::vector<std::string>& command, const std::string& request) {
    // EPIPE is reported through write(); a SIGPIPE would kill the process.
    static const bool sigpipe_ignored = [] {
        std::signal(SIGPIPE, SIG_IGN);
        return true;
    }();
    (void)sigpipe_ignored;

    int to_child[2];
    int from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0) {
        throw ExternalModelError("failed to create pipes for external model");
    }

    const pid_t pid = fork();
    if (pid < 0) throw ExternalModelError("fork failed for external model");
    if (pid == 0) {
        dup2(to_child[0], STDIN_FILENO);
        dup2(from_child[1], STDOUT_FILENO);
        close(to_child[0]);
        close(to_child[1]);
        close(from_child[0]);
        close(from_child[1]);
        std::vector<char*> argv;
        argv.reserve(command.size() + 1);
        for (const auto& arg : command) argv.push_back(const_cast<char*>(arg.c_str()));
        argv.push_back(nullptr);
        execvp(argv[0], argv.data());
        _exit(127);
    }

    close(to_child[0]);
    close(from_child[1]);

    std::size_t written = 0;
    bool write_failed = false;
    while (written < request.size()) {
        const ssize_t n = write(to_child[1], request.data() + written, request.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            write_failed = true;
            break;
        }
        written += static_cast<std::size_t>(n);
    }
    close(to_child[1]);

    std::string output;
    char buf[4096];
    while (true) {
        const ssize_t n = read(from_child[0], buf, sizeof buf);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) break;
        output.append(buf, static_cast<std::size_t>(n));
    }
    close(from_child[0]);

    int status = 0;
    waitpid(pid, &status, 0);
    const std::string cmd = command.front();
    if (WIFSIGNALED(status)) {
        throw ExternalModelError("external model '" + cmd + "' killed by signal " +
                                 std::to_string(WTERMSIG(status)));
    }
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        throw ExternalModelError("external model '" + cmd + "' exited with status " +
                                 std::to_string(WEXITSTATUS(status)) +
                                 (WEXITSTATUS(status) == 127 ? " (exec failed)" : "") +
                                 "; output: " + output.substr(0, 200));
    }
    if (write_failed) {
        throw ExternalModelError("external model '" + cmd + "' closed stdin before reading the request");
    }
    return output;
}

Eigen::VectorXd predict_external(const ExternalParams& params,
                                 const Eigen::Ref<const Eigen::MatrixXd>& X) {
    const std::string request = nlohmann::json{{"X", detail::matrix_to_json(X)}}.dump() + "\n";
    const std::string output = run_external_once(params.command, request);
    const auto newline = output.find('\n');
    const std::string line = newline == std::string::npos ? output : output.substr(0, newline);
    nlohmann::json response;
    try {
        response = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
        throw ExternalModelError("external model '" + params.command.front() +
                                 "' returned unparsable output: " + line.substr(0, 200));
    }
    Eigen::VectorXd y = detail::vector_from_json(response.at("y"), "external model response");
    if (y.size() != X.rows()) {
        throw ExternalModelError("external model '" + params.command.front() + "' returned " +
                                 std::to_string(y.size()) + " labels for " + std::to_string(X.rows()) +
                                 " points");
    }
    return y;
}

} // namespace

Eigen::VectorXd predict(const ModelRef& model, const Eigen::Ref<const Eigen::MatrixXd>& X) {
    if (X.cols() != model.dim) {
        throw InputError("prediction input dimension " + std::to_string(X.cols()) +
                         " does not match model dimension " + std::to_string(model.dim));
    }
    if (X.rows() < 1) throw InputError("prediction input is empty");

    if (model.kind == ModelKind::external) {
        return predict_external(std::get<ExternalParams>(model.params), X);
    }

    const auto& params = std::get<KernelRidgeParams>(model.params);
    const Eigen::MatrixXd scores = gram(params.kernel, X, params.basis) * params.alpha;
    if (model.kind == ModelKind::kernel_ridge_regressor) {
        return scores.col(0);
    }
    Eigen::VectorXd labels(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index c = 1; c < scores.cols(); ++c) {
            if (scores(i, c) > scores(i, best)) best = c;
        }
        labels[i] = params.classes[best];
    }
    return labels;
}

} // namespace rkme

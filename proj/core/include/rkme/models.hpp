#ifndef RKME_MODELS_HPP
#define RKME_MODELS_HPP

#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "rkme/dataset.hpp"
#include "rkme/kernel.hpp"

namespace rkme {

enum class ModelKind { kernel_ridge_classifier, kernel_ridge_regressor, external };
enum class OutputKind { class_index, real };

std::string to_string(ModelKind kind);
std::string to_string(OutputKind kind);

// Parameters of the built-in kernel ridge family. For the classifier,
// alpha has one one-vs-rest column per class and classes holds the sorted
// distinct label values; for the regressor alpha is a single column and
// classes is empty.
struct KernelRidgeParams {
    KernelConfig kernel;
    Eigen::MatrixXd basis;
    Eigen::MatrixXd alpha;
    Eigen::VectorXd classes;
    double ridge = 0.0;
};

// Locator of an external model process speaking line-delimited JSON on
// stdin/stdout: request {"X": [[...]]} -> response {"y": [...]}.
struct ExternalParams {
    std::vector<std::string> command;
};

// A pre-trained model reference: predict is a pure function of (params, x).
struct ModelRef {
    ModelKind kind = ModelKind::kernel_ridge_classifier;
    OutputKind output = OutputKind::class_index;
    Eigen::Index dim = 0;
    std::variant<KernelRidgeParams, ExternalParams> params;
};

void to_json(nlohmann::json& j, const ModelRef& model);
void from_json(const nlohmann::json& j, ModelRef& model);

ModelRef read_model_json(const std::filesystem::path& path);
void write_model_json(const ModelRef& model, const std::filesystem::path& path);

// One-vs-rest kernel ridge classifier; predicted class is the argmax score,
// ties to the lowest class index. Single-class data yields a constant model.
ModelRef train_krc(const KernelConfig& cfg, const Dataset& data, double ridge = 1e-3);

// Kernel ridge regressor: coefficients solve (G + ridge I) alpha = y.
ModelRef train_krr(const KernelConfig& cfg, const Dataset& data, double ridge = 1e-3);

// Labels (class values or reals) for each row of X. Deterministic; external
// model failures raise ExternalModelError with captured diagnostics.
Eigen::VectorXd predict(const ModelRef& model, const Eigen::Ref<const Eigen::MatrixXd>& X);

} // namespace rkme

#endif

#ifndef RKME_SRC_JSON_EIGEN_HPP
#define RKME_SRC_JSON_EIGEN_HPP

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "rkme/errors.hpp"

namespace rkme::detail {

inline nlohmann::json matrix_to_json(const Eigen::Ref<const Eigen::MatrixXd>& M) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const char* what) {
    if (!j.is_array()) throw InputError(std::string(what) + ": expected an array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    if (rows == 0) return Eigen::MatrixXd(0, 0);
    const auto cols = static_cast<Eigen::Index>(j.at(0).size());
    Eigen::MatrixXd M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = j.at(i);
        if (static_cast<Eigen::Index>(row.size()) != cols) {
            throw InputError(std::string(what) + ": ragged rows");
        }
        for (Eigen::Index c = 0; c < cols; ++c) M(i, c) = row.at(c).get<double>();
    }
    return M;
}

inline nlohmann::json vector_to_json(const Eigen::Ref<const Eigen::VectorXd>& v) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& j, const char* what) {
    if (!j.is_array()) throw InputError(std::string(what) + ": expected an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j.at(i).get<double>();
    return v;
}

} // namespace rkme::detail

#endif

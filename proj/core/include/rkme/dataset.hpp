#ifndef RKME_DATASET_HPP
#define RKME_DATASET_HPP

#include <filesystem>
#include <iosfwd>
#include <optional>

#include <Eigen/Core>

namespace rkme {

// Feature matrix with optional labels. Labels are class indices or real
// values depending on the task; both are carried as doubles.
struct Dataset {
    Eigen::MatrixXd X;
    std::optional<Eigen::VectorXd> y;

    Eigen::Index size() const { return X.rows(); }
    Eigen::Index dim() const { return X.cols(); }

    // N >= 1, all rows finite, label length N when present.
    void validate() const;
};

// CSV with header "f0,...,f{d-1}[,label]", '.' decimal separator.
Dataset read_dataset_csv(const std::filesystem::path& path);
Dataset read_dataset_csv(std::istream& in, const std::string& origin = "<stream>");

void write_dataset_csv(const Dataset& data, const std::filesystem::path& path);
void write_dataset_csv(const Dataset& data, std::ostream& out);

} // namespace rkme

#endif

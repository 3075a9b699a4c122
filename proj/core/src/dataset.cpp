#include "rkme/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rkme/errors.hpp"

namespace rkme {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

double parse_double(const std::string& s, const std::string& origin, std::size_t line_no) {
    double value = 0.0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t' || *(end - 1) == '\r')) --end;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end) {
        throw InputError(origin + ":" + std::to_string(line_no) + ": cannot parse number '" + s + "'");
    }
    return value;
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

} // namespace

void Dataset::validate() const {
    if (X.rows() < 1) throw InputError("dataset must contain at least one point");
    if (X.cols() < 1) throw InputError("dataset must have dimension >= 1");
    if (!X.allFinite()) throw InputError("dataset contains non-finite coordinates");
    if (y && y->size() != X.rows()) {
        throw InputError("label vector length does not match number of points");
    }
}

Dataset read_dataset_csv(std::istream& in, const std::string& origin) {
    std::string line;
    if (!std::getline(in, line)) throw InputError(origin + ": empty file");
    const auto header = split_csv_line(strip_cr(line));

    bool has_label = !header.empty() && header.back() == "label";
    const std::size_t d = header.size() - (has_label ? 1 : 0);
    if (d < 1) throw InputError(origin + ": header must list at least one feature column");
    for (std::size_t j = 0; j < d; ++j) {
        if (header[j] != "f" + std::to_string(j)) {
            throw InputError(origin + ": expected header column 'f" + std::to_string(j) +
                             "', found '" + header[j] + "'");
        }
    }

    std::vector<double> values;
    std::vector<double> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw InputError(origin + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " fields, found " +
                             std::to_string(fields.size()));
        }
        for (std::size_t j = 0; j < d; ++j) values.push_back(parse_double(fields[j], origin, line_no));
        if (has_label) labels.push_back(parse_double(fields.back(), origin, line_no));
    }

    const std::size_t n = values.size() / d;
    if (n == 0) throw InputError(origin + ": no data rows");
    Dataset data;
    data.X = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        values.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    if (has_label) {
        data.y = Eigen::Map<const Eigen::VectorXd>(labels.data(), static_cast<Eigen::Index>(n));
    }
    data.validate();
    return data;
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open dataset file '" + path.string() + "'");
    return read_dataset_csv(in, path.string());
}

void write_dataset_csv(const Dataset& data, std::ostream& out) {
    data.validate();
    for (Eigen::Index j = 0; j < data.dim(); ++j) {
        if (j) out << ',';
        out << 'f' << j;
    }
    if (data.y) out << ",label";
    out << '\n';
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        for (Eigen::Index j = 0; j < data.dim(); ++j) {
            if (j) out << ',';
            out << format_double(data.X(i, j));
        }
        if (data.y) out << ',' << format_double((*data.y)[i]);
        out << '\n';
    }
}

void write_dataset_csv(const Dataset& data, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open '" + path.string() + "' for writing");
    write_dataset_csv(data, out);
    if (!out) throw InputError("failed writing '" + path.string() + "'");
}

} // namespace rkme

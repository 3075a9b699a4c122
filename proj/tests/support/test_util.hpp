#ifndef RKME_TESTS_SUPPORT_TEST_UTIL_HPP
#define RKME_TESTS_SUPPORT_TEST_UTIL_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include <Eigen/Core>

#include "rkme/kernel.hpp"
#include "rkme/random.hpp"

namespace testutil {

// Kernel evaluation independent of the library path: plain loops, direct
// distance computation. Used as the oracle side of dual-route checks.
inline double oracle_kernel(const rkme::KernelConfig& cfg, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& y) {
    double d2 = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double diff = x[i] - y[i];
        d2 += diff * diff;
    }
    if (cfg.family == rkme::KernelFamily::gaussian) return std::exp(-cfg.gamma * d2);
    return std::exp(-cfg.gamma * std::sqrt(d2));
}

// Squared RKHS distance between weighted point sets by explicit double loops.
inline double oracle_mmd_sq(const rkme::KernelConfig& cfg, const Eigen::MatrixXd& P,
                            const Eigen::VectorXd& u, const Eigen::MatrixXd& Q,
                            const Eigen::VectorXd& v) {
    double aa = 0.0;
    double bb = 0.0;
    double ab = 0.0;
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
        for (Eigen::Index j = 0; j < P.rows(); ++j) {
            aa += u[i] * u[j] * oracle_kernel(cfg, P.row(i), P.row(j));
        }
    }
    for (Eigen::Index i = 0; i < Q.rows(); ++i) {
        for (Eigen::Index j = 0; j < Q.rows(); ++j) {
            bb += v[i] * v[j] * oracle_kernel(cfg, Q.row(i), Q.row(j));
        }
    }
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
        for (Eigen::Index j = 0; j < Q.rows(); ++j) {
            ab += u[i] * v[j] * oracle_kernel(cfg, P.row(i), Q.row(j));
        }
    }
    return aa + bb - 2.0 * ab;
}

inline bool bitwise_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

inline Eigen::MatrixXd random_matrix(rkme::Rng& rng, Eigen::Index rows, Eigen::Index cols,
                                     double scale = 1.0) {
    Eigen::MatrixXd M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) M(i, j) = scale * rng.gaussian();
    }
    return M;
}

inline double median(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    double sx = 0.0;
    double sy = 0.0;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]);
        const double ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "rkme-test-%s-%d", tag.c_str(), getpid());
        path = std::filesystem::temp_directory_path() / buf;
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
};

struct CommandResult {
    int status = -1;
    std::string out;
    std::string err;
};

inline std::string read_all(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Runs a shell command, capturing stdout/stderr and the exit code.
inline CommandResult run_command(const std::string& command) {
    static int counter = 0;
    const auto base = std::filesystem::temp_directory_path() /
                      ("rkme-cmd-" + std::to_string(getpid()) + "-" + std::to_string(counter++));
    const auto out_path = base.string() + ".out";
    const auto err_path = base.string() + ".err";
    const std::string full = command + " >" + out_path + " 2>" + err_path;
    const int raw = std::system(full.c_str());
    CommandResult result;
    result.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    result.out = read_all(out_path);
    result.err = read_all(err_path);
    std::filesystem::remove(out_path);
    std::filesystem::remove(err_path);
    return result;
}

inline std::string cli_path() {
    const char* env = std::getenv("RKME_CLI_BIN");
    return env == nullptr ? "" : env;
}

inline std::string echo_model_path() {
    const char* env = std::getenv("RKME_ECHO_MODEL");
    return env == nullptr ? "" : env;
}

} // namespace testutil

#endif

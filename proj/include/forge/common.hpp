#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Dense>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace forge {

// Row-major matrices throughout: vertex/embedding tables are iterated row-wise
// and parallelized over rows.
using MatX3 = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using FacesX3 = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;
using MatX = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// User-facing error classes; the CLI maps these to exit codes
// (config 2, data 3, numeric 4).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Execution policy for the data-parallel kernels. Every parallel kernel has a
// serial twin that produces bitwise-identical results wherever the reduction
// order permits; tests compare the two paths.
enum class Exec { serial, parallel };

inline int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

template <class F>
inline void parallel_for(std::int64_t n, Exec exec, F&& fn) {
#ifdef _OPENMP
    if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
#else
    (void)exec;
#endif
    for (std::int64_t i = 0; i < n; ++i) fn(i);
}

// Variant that tells the body which thread slot it runs in, for kernels that
// accumulate into per-thread scratch buffers.
template <class F>
inline void parallel_for_threaded(std::int64_t n, Exec exec, int n_slots, F&& fn) {
#ifdef _OPENMP
    if (exec == Exec::parallel) {
#pragma omp parallel num_threads(n_slots)
        {
            const int slot = omp_get_thread_num();
#pragma omp for schedule(static)
            for (std::int64_t i = 0; i < n; ++i) fn(i, slot);
        }
        return;
    }
#else
    (void)exec;
    (void)n_slots;
#endif
    for (std::int64_t i = 0; i < n; ++i) fn(i, 0);
}

}  // namespace forge

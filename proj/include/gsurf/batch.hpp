#pragma once

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "gsurf/errors.hpp"

namespace gsurf {

// GSURF_THREADS overrides the hardware concurrency.
inline int worker_count() {
    if (const char* env = std::getenv("GSURF_THREADS")) {
        try {
            const int v = std::stoi(env);
            if (v >= 1) return v;
        } catch (const std::exception&) {
        }
        throw ConfigError(std::string("GSURF_THREADS must be a positive integer, got '") + env + "'");
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// Row-major table of per-path features.
class FeatureTable {
public:
    FeatureTable() = default;
    FeatureTable(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    double& at(std::size_t i, std::size_t c) { return data_[i * cols_ + c]; }
    double at(std::size_t i, std::size_t c) const { return data_[i * cols_ + c]; }
    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    std::vector<double> column(std::size_t c) const {
        std::vector<double> out(rows_);
        for (std::size_t i = 0; i < rows_; ++i) out[i] = data_[i * cols_ + c];
        return out;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Runs `make()` once per worker; each worker object is called as
// worker(index, row) on a contiguous block of rows. Row contents depend only
// on the index, so the table is identical for every worker count.
template <class MakeWorker>
FeatureTable map_rows(std::size_t rows, std::size_t cols, MakeWorker&& make, int threads = worker_count()) {
    FeatureTable table(rows, cols);
    const std::size_t T = std::max<std::size_t>(1, std::min<std::size_t>(threads, rows == 0 ? 1 : rows));
    std::exception_ptr failure;
    std::mutex failure_lock;
    auto run_block = [&](std::size_t t) {
        try {
            auto worker = make();
            const std::size_t lo = rows * t / T;
            const std::size_t hi = rows * (t + 1) / T;
            for (std::size_t i = lo; i < hi; ++i) worker(i, table.row(i));
        } catch (...) {
            std::lock_guard<std::mutex> g(failure_lock);
            if (!failure) failure = std::current_exception();
        }
    };
    if (T == 1) {
        run_block(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(T);
        for (std::size_t t = 0; t < T; ++t) pool.emplace_back(run_block, t);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
    return table;
}

}  // namespace gsurf

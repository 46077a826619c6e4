/*
 * Copyright 2026 The subpool Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Dense row-major and CSR sparse matrices over f64, plus the seedable
// random stream every stochastic component draws from.
//
// All reductions run in a fixed order (ascending column index inside a
// row) so identical inputs give bit-identical outputs.

#include "subpool/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace subpool {

using index_t = std::size_t;

// -----------------------------------------------------------------------------
// DenseMatrix
// -----------------------------------------------------------------------------

class DenseMatrix {
public:
    DenseMatrix() = default;

    DenseMatrix(index_t rows, index_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    DenseMatrix(index_t rows, index_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) {
            throw ShapeError("DenseMatrix: data length " + std::to_string(data_.size()) +
                             " != " + std::to_string(rows_) + "x" + std::to_string(cols_));
        }
    }

    /// Row-wise literal, e.g. `DenseMatrix{{1, 2}, {3, 4}}`.
    DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_) throw ShapeError("DenseMatrix: ragged initializer");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    index_t rows() const noexcept { return rows_; }
    index_t cols() const noexcept { return cols_; }
    index_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(index_t i, index_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(index_t i, index_t j) const noexcept { return data_[i * cols_ + j]; }

    std::span<double> row(index_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(index_t i) const noexcept {
        return {data_.data() + i * cols_, cols_};
    }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    bool same_shape(const DenseMatrix& other) const noexcept {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    bool all_finite() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
    index_t rows_ = 0;
    index_t cols_ = 0;
    std::vector<double> data_;
};

inline std::string shape_string(const DenseMatrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

/// A·B
inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: " + shape_string(a) + " * " + shape_string(b));
    }
    DenseMatrix out(a.rows(), b.cols());
    for (index_t i = 0; i < a.rows(); ++i) {
        auto o = out.row(i);
        for (index_t k = 0; k < a.cols(); ++k) {
            const double s = a(i, k);
            if (s == 0.0) continue;
            auto br = b.row(k);
            for (index_t j = 0; j < b.cols(); ++j) o[j] += s * br[j];
        }
    }
    return out;
}

/// Aᵀ·B
inline DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows()) {
        throw ShapeError("matmul_tn: " + shape_string(a) + "^T * " + shape_string(b));
    }
    DenseMatrix out(a.cols(), b.cols());
    for (index_t r = 0; r < a.rows(); ++r) {
        auto ar = a.row(r);
        auto br = b.row(r);
        for (index_t i = 0; i < a.cols(); ++i) {
            const double s = ar[i];
            if (s == 0.0) continue;
            auto o = out.row(i);
            for (index_t j = 0; j < b.cols(); ++j) o[j] += s * br[j];
        }
    }
    return out;
}

/// A·Bᵀ
inline DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.cols()) {
        throw ShapeError("matmul_nt: " + shape_string(a) + " * " + shape_string(b) + "^T");
    }
    DenseMatrix out(a.rows(), b.rows());
    for (index_t i = 0; i < a.rows(); ++i) {
        auto ar = a.row(i);
        for (index_t j = 0; j < b.rows(); ++j) {
            auto br = b.row(j);
            double acc = 0.0;
            for (index_t k = 0; k < a.cols(); ++k) acc += ar[k] * br[k];
            out(i, j) = acc;
        }
    }
    return out;
}

inline DenseMatrix transpose(const DenseMatrix& m) {
    DenseMatrix out(m.cols(), m.rows());
    for (index_t i = 0; i < m.rows(); ++i)
        for (index_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
    return out;
}

/// Adds `bias` to every row in place.
inline void add_row_vector(DenseMatrix& m, std::span<const double> bias) {
    if (bias.size() != m.cols()) throw ShapeError("add_row_vector: bias width mismatch");
    for (index_t i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        for (index_t j = 0; j < m.cols(); ++j) r[j] += bias[j];
    }
}

inline std::vector<double> column_sums(const DenseMatrix& m) {
    std::vector<double> out(m.cols(), 0.0);
    for (index_t i = 0; i < m.rows(); ++i) {
        auto r = m.row(i);
        for (index_t j = 0; j < m.cols(); ++j) out[j] += r[j];
    }
    return out;
}

inline double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
    if (!a.same_shape(b)) throw ShapeError("max_abs_diff: shape mismatch");
    double worst = 0.0;
    for (index_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
    return worst;
}

/// Scales every row to unit L1 norm; zero rows stay zero.
inline DenseMatrix row_normalize(const DenseMatrix& m) {
    DenseMatrix out = m;
    for (index_t i = 0; i < out.rows(); ++i) {
        auto r = out.row(i);
        double s = 0.0;
        for (double v : r) s += std::abs(v);
        if (s > 0.0)
            for (double& v : r) v /= s;
    }
    return out;
}

// -----------------------------------------------------------------------------
// SparseMatrix (CSR)
// -----------------------------------------------------------------------------

struct Triplet {
    index_t row;
    index_t col;
    double value;
};

class SparseMatrix {
public:
    SparseMatrix() : row_ptr_(1, 0) {}

    /// Takes ownership of raw CSR arrays and validates every structural invariant.
    SparseMatrix(index_t rows, index_t cols, std::vector<index_t> row_ptr,
                 std::vector<index_t> col_idx, std::vector<double> values)
        : rows_(rows), cols_(cols), row_ptr_(std::move(row_ptr)),
          col_idx_(std::move(col_idx)), values_(std::move(values)) {
        validate();
    }

    /// Builds from unordered entries. Duplicate (row, col) pairs are rejected.
    static SparseMatrix from_triplets(index_t rows, index_t cols, std::vector<Triplet> entries) {
        std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
            return std::tie(a.row, a.col) < std::tie(b.row, b.col);
        });
        std::vector<index_t> row_ptr(rows + 1, 0);
        std::vector<index_t> col_idx;
        std::vector<double> values;
        col_idx.reserve(entries.size());
        values.reserve(entries.size());
        for (const auto& t : entries) {
            if (t.row >= rows || t.col >= cols) {
                throw ShapeError("from_triplets: entry (" + std::to_string(t.row) + "," +
                                 std::to_string(t.col) + ") out of bounds");
            }
            ++row_ptr[t.row + 1];
            col_idx.push_back(t.col);
            values.push_back(t.value);
        }
        std::partial_sum(row_ptr.begin(), row_ptr.end(), row_ptr.begin());
        return SparseMatrix(rows, cols, std::move(row_ptr), std::move(col_idx), std::move(values));
    }

    static SparseMatrix identity(index_t n) {
        std::vector<index_t> row_ptr(n + 1);
        std::vector<index_t> col_idx(n);
        std::iota(row_ptr.begin(), row_ptr.end(), index_t{0});
        std::iota(col_idx.begin(), col_idx.end(), index_t{0});
        return SparseMatrix(n, n, std::move(row_ptr), std::move(col_idx),
                            std::vector<double>(n, 1.0));
    }

    index_t rows() const noexcept { return rows_; }
    index_t cols() const noexcept { return cols_; }
    index_t nnz() const noexcept { return col_idx_.size(); }

    std::span<const index_t> row_ptr() const noexcept { return row_ptr_; }
    std::span<const index_t> col_idx() const noexcept { return col_idx_; }
    std::span<const double> values() const noexcept { return values_; }

    std::span<const index_t> row_cols(index_t i) const noexcept {
        return {col_idx_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
    }
    std::span<const double> row_values(index_t i) const noexcept {
        return {values_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
    }
    index_t row_nnz(index_t i) const noexcept { return row_ptr_[i + 1] - row_ptr_[i]; }

    /// Stored value or 0 when absent.
    double at(index_t i, index_t j) const {
        auto cols = row_cols(i);
        auto it = std::lower_bound(cols.begin(), cols.end(), j);
        if (it == cols.end() || *it != j) return 0.0;
        return row_values(i)[static_cast<index_t>(it - cols.begin())];
    }

    SparseMatrix transposed() const {
        std::vector<index_t> row_ptr(cols_ + 1, 0);
        for (index_t c : col_idx_) ++row_ptr[c + 1];
        std::partial_sum(row_ptr.begin(), row_ptr.end(), row_ptr.begin());
        std::vector<index_t> cursor(row_ptr.begin(), row_ptr.end() - 1);
        std::vector<index_t> col_idx(nnz());
        std::vector<double> values(nnz());
        // Walking source rows in ascending order keeps output columns sorted.
        for (index_t i = 0; i < rows_; ++i) {
            for (index_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
                const index_t dst = cursor[col_idx_[p]]++;
                col_idx[dst] = i;
                values[dst] = values_[p];
            }
        }
        return SparseMatrix(cols_, rows_, std::move(row_ptr), std::move(col_idx),
                            std::move(values));
    }

    DenseMatrix to_dense() const {
        DenseMatrix out(rows_, cols_);
        for (index_t i = 0; i < rows_; ++i)
            for (index_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) out(i, col_idx_[p]) = values_[p];
        return out;
    }

    bool is_symmetric(double tol = 0.0) const {
        if (rows_ != cols_) return false;
        for (index_t i = 0; i < rows_; ++i) {
            auto cols = row_cols(i);
            auto vals = row_values(i);
            for (index_t p = 0; p < cols.size(); ++p) {
                if (std::abs(at(cols[p], i) - vals[p]) > tol) return false;
            }
        }
        return true;
    }

    friend bool operator==(const SparseMatrix&, const SparseMatrix&) = default;

private:
    void validate() const {
        if (row_ptr_.size() != rows_ + 1) throw ShapeError("SparseMatrix: row_ptr length != rows+1");
        if (row_ptr_.front() != 0) throw ShapeError("SparseMatrix: row_ptr[0] != 0");
        if (row_ptr_.back() != col_idx_.size() || col_idx_.size() != values_.size()) {
            throw ShapeError("SparseMatrix: row_ptr[rows] != nnz");
        }
        for (index_t i = 0; i < rows_; ++i) {
            if (row_ptr_[i] > row_ptr_[i + 1]) throw ShapeError("SparseMatrix: row_ptr decreasing");
            for (index_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
                if (col_idx_[p] >= cols_) throw ShapeError("SparseMatrix: column out of range");
                if (p > row_ptr_[i] && col_idx_[p] <= col_idx_[p - 1]) {
                    throw ShapeError("SparseMatrix: columns not strictly increasing in row " +
                                     std::to_string(i));
                }
            }
        }
    }

    index_t rows_ = 0;
    index_t cols_ = 0;
    std::vector<index_t> row_ptr_;
    std::vector<index_t> col_idx_;
    std::vector<double> values_;
};

/// S·D, each output row reduced in ascending column order.
inline DenseMatrix spmm(const SparseMatrix& s, const DenseMatrix& d) {
    if (s.cols() != d.rows()) {
        throw ShapeError("spmm: sparse " + std::to_string(s.rows()) + "x" +
                         std::to_string(s.cols()) + " * dense " + shape_string(d));
    }
    DenseMatrix out(s.rows(), d.cols());
    for (index_t i = 0; i < s.rows(); ++i) {
        auto o = out.row(i);
        auto cols = s.row_cols(i);
        auto vals = s.row_values(i);
        for (index_t p = 0; p < cols.size(); ++p) {
            auto src = d.row(cols[p]);
            const double w = vals[p];
            for (index_t j = 0; j < d.cols(); ++j) o[j] += w * src[j];
        }
    }
    return out;
}

/// Sᵀ·D without materialising the transpose. Contributions to each output row
/// arrive in ascending source-row order, which is exactly the order
/// `spmm(s.transposed(), d)` uses, so the two agree bit for bit.
inline DenseMatrix spmm_transpose(const SparseMatrix& s, const DenseMatrix& d) {
    if (s.rows() != d.rows()) {
        throw ShapeError("spmm_transpose: sparse " + std::to_string(s.rows()) + "x" +
                         std::to_string(s.cols()) + " ^T * dense " + shape_string(d));
    }
    DenseMatrix out(s.cols(), d.cols());
    for (index_t i = 0; i < s.rows(); ++i) {
        auto src = d.row(i);
        auto cols = s.row_cols(i);
        auto vals = s.row_values(i);
        for (index_t p = 0; p < cols.size(); ++p) {
            auto o = out.row(cols[p]);
            const double w = vals[p];
            for (index_t j = 0; j < d.cols(); ++j) o[j] += w * src[j];
        }
    }
    return out;
}

// -----------------------------------------------------------------------------
// RngStream
// -----------------------------------------------------------------------------

/// xoshiro256** seeded through splitmix64.
///
/// Seeding: x = global_seed XOR splitmix64_mix(stream_id + 0x9E3779B97F4A7C15);
/// the four state words are then successive splitmix64 outputs starting from x.
/// uniform_index uses rejection on the low residue, uniform01 takes the top
/// 53 bits, normal is a single Box-Muller draw (two uniforms per sample).
class RngStream {
public:
    RngStream(std::uint64_t global_seed, std::uint64_t stream_id)
        : seed_(global_seed), stream_id_(stream_id) {
        std::uint64_t x = global_seed ^ mix(stream_id + 0x9E3779B97F4A7C15ULL);
        for (auto& w : state_) w = splitmix_next(x);
        if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }

    /// Independent stream keyed by the same global seed.
    RngStream derive(std::uint64_t stream_id) const { return RngStream(seed_, stream_id); }

    std::uint64_t next_u64() noexcept {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    index_t uniform_index(index_t bound) {
        if (bound == 0) throw DomainError("uniform_index: bound must be >= 1");
        const std::uint64_t b = bound;
        const std::uint64_t threshold = (0 - b) % b;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return static_cast<index_t>(r % b);
        }
    }

    /// Uniform in [0, 1).
    double uniform01() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform01(); }

    double normal(double mean = 0.0, double sigma = 1.0) noexcept {
        const double u1 = 1.0 - uniform01(); // (0, 1]
        const double u2 = uniform01();
        constexpr double two_pi = 6.283185307179586476925286766559;
        return mean + sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

    bool bernoulli(double p) noexcept { return uniform01() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (index_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(i)]);
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }
    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    static constexpr std::uint64_t splitmix_next(std::uint64_t& x) noexcept {
        x += 0x9E3779B97F4A7C15ULL;
        return mix(x);
    }

    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t state_[4]{};
};

} // namespace subpool

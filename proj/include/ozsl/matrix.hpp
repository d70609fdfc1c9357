#ifndef OZSL_MATRIX_HPP
#define OZSL_MATRIX_HPP

#include "ozsl/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace ozsl {

/// Dense row-major matrix of doubles. Vectors are 1 x n (row) or n x 1 (column).
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_{rows}, cols_{cols}, data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data) : rows_{rows}, cols_{cols}, data_{std::move(data)} {
        if (data_.size() != rows_ * cols_) {
            throw dimension_error("matrix data length " + std::to_string(data_.size()) + " does not match " + shape_string(rows_, cols_));
        }
    }

    static Matrix row(std::vector<double> values) {
        const std::size_t n = values.size();
        return Matrix{1, n, std::move(values)};
    }

    static Matrix identity(std::size_t n) {
        Matrix m{n, n};
        for (std::size_t i = 0; i < n; ++i) {
            m(i, i) = 1.0;
        }
        return m;
    }

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    double &operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    [[nodiscard]] std::span<double> data() noexcept { return data_; }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }

    [[nodiscard]] std::span<double> row_span(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    [[nodiscard]] std::span<const double> row_span(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    [[nodiscard]] Matrix row_copy(std::size_t r) const {
        return Matrix{1, cols_, std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(r * cols_), data_.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols_))};
    }

    [[nodiscard]] bool same_shape(const Matrix &other) const noexcept { return rows_ == other.rows_ && cols_ == other.cols_; }

    [[nodiscard]] bool all_finite() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    [[nodiscard]] std::string shape() const { return shape_string(rows_, cols_); }

    friend bool operator==(const Matrix &, const Matrix &) = default;

    static std::string shape_string(std::size_t r, std::size_t c) { return std::to_string(r) + "x" + std::to_string(c); }

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline void require_same_shape(const Matrix &a, const Matrix &b, const char *what) {
    if (!a.same_shape(b)) {
        throw dimension_error(std::string{what} + ": shape mismatch " + a.shape() + " vs " + b.shape());
    }
}

inline void require_finite(const Matrix &m, const char *what) {
    if (!m.all_finite()) {
        throw numeric_error(std::string{what} + ": produced a non-finite value");
    }
}

inline Matrix matmul(const Matrix &a, const Matrix &b) {
    if (a.cols() != b.rows()) {
        throw dimension_error("matmul: inner dimensions differ " + a.shape() + " * " + b.shape());
    }
    Matrix out{a.rows(), b.cols()};
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double *out_row = out.row_span(i).data();
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) {
                continue;
            }
            const double *b_row = b.row_span(k).data();
            for (std::size_t j = 0; j < b.cols(); ++j) {
                out_row[j] += aik * b_row[j];
            }
        }
    }
    return out;
}

inline Matrix transpose(const Matrix &a) {
    Matrix out{a.cols(), a.rows()};
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            out(j, i) = a(i, j);
        }
    }
    return out;
}

template <typename F>
Matrix map(const Matrix &a, F f) {
    Matrix out{a.rows(), a.cols()};
    auto src = a.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = f(src[i]);
    }
    return out;
}

template <typename F>
Matrix zip(const Matrix &a, const Matrix &b, F f, const char *what) {
    require_same_shape(a, b, what);
    Matrix out{a.rows(), a.cols()};
    auto x = a.data();
    auto y = b.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
        dst[i] = f(x[i], y[i]);
    }
    return out;
}

inline Matrix operator+(const Matrix &a, const Matrix &b) {
    return zip(a, b, [](double x, double y) { return x + y; }, "add");
}

inline Matrix operator-(const Matrix &a, const Matrix &b) {
    return zip(a, b, [](double x, double y) { return x - y; }, "sub");
}

inline Matrix operator*(double s, const Matrix &a) {
    return map(a, [s](double x) { return s * x; });
}

inline Matrix hadamard(const Matrix &a, const Matrix &b) {
    return zip(a, b, [](double x, double y) { return x * y; }, "hadamard");
}

inline double sum(const Matrix &a) {
    double acc = 0.0;
    for (double v : a.data()) {
        acc += v;
    }
    return acc;
}

inline double squared_norm(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) {
        acc += x * x;
    }
    return acc;
}

inline double euclidean_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw dimension_error("distance: length mismatch " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

/// Stacks equally wide matrices on top of each other.
inline Matrix vstack(std::span<const Matrix> parts) {
    std::size_t rows = 0;
    std::size_t cols = 0;
    bool have_cols = false;
    for (const auto &p : parts) {
        if (p.rows() == 0) {
            continue;
        }
        if (have_cols && p.cols() != cols) {
            throw dimension_error("vstack: column mismatch");
        }
        cols = p.cols();
        have_cols = true;
        rows += p.rows();
    }
    std::vector<double> data;
    data.reserve(rows * cols);
    for (const auto &p : parts) {
        if (p.rows() != 0) {
            data.insert(data.end(), p.data().begin(), p.data().end());
        }
    }
    return Matrix{rows, cols, std::move(data)};
}

inline Matrix gather_rows(const Matrix &a, std::span<const std::size_t> indices) {
    Matrix out{indices.size(), a.cols()};
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= a.rows()) {
            throw dimension_error("gather_rows: index out of range");
        }
        std::copy_n(a.row_span(indices[i]).begin(), a.cols(), out.row_span(i).begin());
    }
    return out;
}

// --- OZSLMAT1 binary format --------------------------------------------------
// magic "OZSLMAT1", u32 rows, u32 cols (little-endian), rows*cols little-endian f64.

namespace detail {

inline constexpr char matrix_magic[8] = {'O', 'Z', 'S', 'L', 'M', 'A', 'T', '1'};

template <typename T>
T to_little_endian(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char bytes[sizeof(T)];
        std::memcpy(bytes, &v, sizeof(T));
        std::reverse(std::begin(bytes), std::end(bytes));
        std::memcpy(&v, bytes, sizeof(T));
    }
    return v;
}

template <typename T>
void write_le(std::ostream &out, T v) {
    v = to_little_endian(v);
    out.write(reinterpret_cast<const char *>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream &in) {
    T v{};
    in.read(reinterpret_cast<char *>(&v), sizeof(T));
    if (!in) {
        throw format_error("OZSLMAT1: truncated stream");
    }
    return to_little_endian(v);
}

}  // namespace detail

inline void write_matrix(std::ostream &out, const Matrix &m) {
    if (m.rows() > UINT32_MAX || m.cols() > UINT32_MAX) {
        throw dimension_error("OZSLMAT1: matrix too large");
    }
    out.write(detail::matrix_magic, sizeof(detail::matrix_magic));
    detail::write_le(out, static_cast<std::uint32_t>(m.rows()));
    detail::write_le(out, static_cast<std::uint32_t>(m.cols()));
    for (double v : m.data()) {
        detail::write_le(out, v);
    }
    if (!out) {
        throw format_error("OZSLMAT1: write failed");
    }
}

inline Matrix read_matrix(std::istream &in) {
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, detail::matrix_magic, sizeof(magic)) != 0) {
        throw format_error("OZSLMAT1: bad magic");
    }
    const auto rows = detail::read_le<std::uint32_t>(in);
    const auto cols = detail::read_le<std::uint32_t>(in);
    Matrix m{rows, cols};
    for (double &v : m.data()) {
        v = detail::read_le<double>(in);
    }
    if (!m.all_finite()) {
        throw format_error("OZSLMAT1: non-finite entry");
    }
    return m;
}

inline void save_matrix(const std::string &path, const Matrix &m) {
    std::ofstream out{path, std::ios::binary | std::ios::trunc};
    if (!out) {
        throw format_error("cannot open for writing: " + path);
    }
    write_matrix(out, m);
}

inline Matrix load_matrix(const std::string &path) {
    std::ifstream in{path, std::ios::binary};
    if (!in) {
        throw format_error("cannot open: " + path);
    }
    return read_matrix(in);
}

}  // namespace ozsl

#endif  // OZSL_MATRIX_HPP

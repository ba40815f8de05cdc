#ifndef SFP_MATRIX_HPP
#define SFP_MATRIX_HPP

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace sfp {

/// Dense real matrix, row-major. The single numeric substrate of the
/// project; everything from SVD to MLP training is expressed on it.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries);

    /// Row-wise literal: Matrix{{1,2},{3,4}}.
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    static Matrix diagonal(const std::vector<double>& values);
    /// Stacks `rows` (each of equal length) into a matrix.
    static Matrix from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    double* row_ptr(std::size_t r) noexcept { return data_.data() + r * cols_; }
    const double* row_ptr(std::size_t r) const noexcept { return data_.data() + r * cols_; }

    bool all_finite() const noexcept;
    bool is_zero(double tol = 0.0) const noexcept;

    Matrix transposed() const;
    Matrix col(std::size_t c) const;
    Matrix cols_range(std::size_t first, std::size_t count) const;
    Matrix rows_range(std::size_t first, std::size_t count) const;
    std::vector<double> row_vec(std::size_t r) const;

    Matrix& operator+=(const Matrix& other);
    Matrix& operator-=(const Matrix& other);
    Matrix& operator*=(double scalar);

    friend Matrix operator+(Matrix lhs, const Matrix& rhs) { return lhs += rhs; }
    friend Matrix operator-(Matrix lhs, const Matrix& rhs) { return lhs -= rhs; }
    friend Matrix operator*(Matrix lhs, double scalar) { return lhs *= scalar; }
    friend Matrix operator*(double scalar, Matrix rhs) { return rhs *= scalar; }

    double frobenius_norm() const noexcept;
    double max_abs() const noexcept;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// C = A * B. Throws InvalidInput on shape mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);
/// C = A^T * B without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// C = A * B^T without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

/// ||a - b||_F
double frobenius_distance(const Matrix& a, const Matrix& b);
/// ||a - b||_F / max(||b||_F, floor)
double relative_error(const Matrix& a, const Matrix& b, double floor = 1e-300);

}  // namespace sfp

#endif  // SFP_MATRIX_HPP

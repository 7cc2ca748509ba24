#pragma once

// Dense matrices over Q.

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "carpet/arith.hpp"

namespace carpet {

class QMatrix {
public:
    QMatrix() = default;
    QMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), a_(rows * cols) {}
    QMatrix(std::size_t rows, std::size_t cols, std::vector<Rational> row_major);

    static QMatrix identity(std::size_t n);
    static QMatrix column(const QVector& v);
    /// Columns of the result are the given vectors.
    static QMatrix from_columns(const std::vector<QVector>& cols, std::size_t rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool square() const { return rows_ == cols_; }

    Rational& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
    const Rational& operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

    QVector col(std::size_t j) const;
    QVector row(std::size_t i) const;
    QMatrix transpose() const;
    QMatrix block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const;
    /// [this | other]
    QMatrix hcat(const QMatrix& other) const;

    QMatrix operator*(const QMatrix& o) const;
    QVector operator*(const QVector& v) const;
    QMatrix operator+(const QMatrix& o) const;
    QMatrix operator-(const QMatrix& o) const;
    QMatrix operator*(const Rational& c) const;
    bool operator==(const QMatrix& o) const = default;

    bool is_zero() const;
    bool is_identity() const;

    Rational det() const;
    std::size_t rank() const;
    /// Throws ArithError when singular.
    QMatrix inverse() const;
    /// Columns form a basis of {v : A v = 0}; zero columns when trivial.
    QMatrix nullspace() const;
    /// Reduced row echelon form and the pivot columns.
    QMatrix rref(std::vector<std::size_t>* pivots = nullptr) const;
    /// Columns form a basis of the column space.
    QMatrix column_basis() const;

    /// Trace of a square matrix.
    Rational trace() const;

    Eigen::MatrixXd to_double() const;
    std::string str() const;

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<Rational> a_;
};

std::ostream& operator<<(std::ostream& os, const QMatrix& m);

/// a == c * b for some nonzero rational c.
bool projectively_equal(const QMatrix& a, const QMatrix& b);

/// Column space of b is contained in that of a.
bool span_contains(const QMatrix& a, const QMatrix& b);

/// Max over entries of |entry|_sigma, exact at a prime place.
Rational max_entry_abs(const QMatrix& m, const Place& sigma);

/// Spectral norm in double precision.
double spectral_norm(const QMatrix& m);

}  // namespace carpet

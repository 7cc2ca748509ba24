#include "carpet/qmatrix.hpp"

#include <ostream>
#include <sstream>

namespace carpet {

QMatrix::QMatrix(std::size_t rows, std::size_t cols, std::vector<Rational> row_major)
    : rows_(rows), cols_(cols), a_(std::move(row_major)) {
    if (a_.size() != rows * cols) throw ArithError("QMatrix: entry count does not match shape");
}

QMatrix QMatrix::identity(std::size_t n) {
    QMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = Rational(1);
    return m;
}

QMatrix QMatrix::column(const QVector& v) { return QMatrix(v.size(), 1, v); }

QMatrix QMatrix::from_columns(const std::vector<QVector>& cols, std::size_t rows) {
    QMatrix m(rows, cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j) {
        if (cols[j].size() != rows) throw ArithError("from_columns: ragged input");
        for (std::size_t i = 0; i < rows; ++i) m(i, j) = cols[j][i];
    }
    return m;
}

QVector QMatrix::col(std::size_t j) const {
    QVector v(rows_);
    for (std::size_t i = 0; i < rows_; ++i) v[i] = (*this)(i, j);
    return v;
}

QVector QMatrix::row(std::size_t i) const {
    return QVector(a_.begin() + static_cast<std::ptrdiff_t>(i * cols_),
                   a_.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols_));
}

QMatrix QMatrix::transpose() const {
    QMatrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

QMatrix QMatrix::block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
    if (r0 + nr > rows_ || c0 + nc > cols_) throw ArithError("block out of range");
    QMatrix b(nr, nc);
    for (std::size_t i = 0; i < nr; ++i)
        for (std::size_t j = 0; j < nc; ++j) b(i, j) = (*this)(r0 + i, c0 + j);
    return b;
}

QMatrix QMatrix::hcat(const QMatrix& o) const {
    if (cols_ == 0) return o;
    if (o.cols_ == 0) return *this;
    if (o.rows_ != rows_) throw ArithError("hcat: row mismatch");
    QMatrix m(rows_, cols_ + o.cols_);
    for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t j = 0; j < cols_; ++j) m(i, j) = (*this)(i, j);
        for (std::size_t j = 0; j < o.cols_; ++j) m(i, cols_ + j) = o(i, j);
    }
    return m;
}

QMatrix QMatrix::operator*(const QMatrix& o) const {
    if (cols_ != o.rows_) throw ArithError("matrix product: shape mismatch");
    QMatrix m(rows_, o.cols_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t k = 0; k < cols_; ++k) {
            const Rational& x = (*this)(i, k);
            if (x.is_zero()) continue;
            for (std::size_t j = 0; j < o.cols_; ++j)
                if (!o(k, j).is_zero()) m(i, j) += x * o(k, j);
        }
    return m;
}

QVector QMatrix::operator*(const QVector& v) const {
    if (cols_ != v.size()) throw ArithError("matrix-vector product: shape mismatch");
    QVector out(rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j)
            if (!(*this)(i, j).is_zero() && !v[j].is_zero()) out[i] += (*this)(i, j) * v[j];
    return out;
}

QMatrix QMatrix::operator+(const QMatrix& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_) throw ArithError("sum: shape mismatch");
    QMatrix m = *this;
    for (std::size_t i = 0; i < a_.size(); ++i) m.a_[i] += o.a_[i];
    return m;
}

QMatrix QMatrix::operator-(const QMatrix& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_) throw ArithError("difference: shape mismatch");
    QMatrix m = *this;
    for (std::size_t i = 0; i < a_.size(); ++i) m.a_[i] -= o.a_[i];
    return m;
}

QMatrix QMatrix::operator*(const Rational& c) const {
    QMatrix m = *this;
    for (auto& x : m.a_) x *= c;
    return m;
}

bool QMatrix::is_zero() const {
    for (const auto& x : a_)
        if (!x.is_zero()) return false;
    return true;
}

bool QMatrix::is_identity() const {
    if (!square()) return false;
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j)
            if ((*this)(i, j) != Rational(i == j ? 1 : 0)) return false;
    return true;
}

QMatrix QMatrix::rref(std::vector<std::size_t>* pivots) const {
    QMatrix m = *this;
    std::vector<std::size_t> piv;
    std::size_t r = 0;
    for (std::size_t c = 0; c < cols_ && r < rows_; ++c) {
        std::size_t p = r;
        while (p < rows_ && m(p, c).is_zero()) ++p;
        if (p == rows_) continue;
        if (p != r)
            for (std::size_t j = 0; j < cols_; ++j) std::swap(m(p, j), m(r, j));
        Rational inv = m(r, c).inverse();
        for (std::size_t j = c; j < cols_; ++j) m(r, j) *= inv;
        for (std::size_t i = 0; i < rows_; ++i) {
            if (i == r || m(i, c).is_zero()) continue;
            Rational f = m(i, c);
            for (std::size_t j = c; j < cols_; ++j)
                if (!m(r, j).is_zero()) m(i, j) -= f * m(r, j);
        }
        piv.push_back(c);
        ++r;
    }
    if (pivots) *pivots = std::move(piv);
    return m;
}

std::size_t QMatrix::rank() const {
    std::vector<std::size_t> piv;
    rref(&piv);
    return piv.size();
}

Rational QMatrix::det() const {
    if (!square()) throw ArithError("determinant of a non-square matrix");
    QMatrix m = *this;
    Rational d(1);
    for (std::size_t c = 0; c < cols_; ++c) {
        std::size_t p = c;
        while (p < rows_ && m(p, c).is_zero()) ++p;
        if (p == rows_) return Rational(0);
        if (p != c) {
            for (std::size_t j = 0; j < cols_; ++j) std::swap(m(p, j), m(c, j));
            d = -d;
        }
        d *= m(c, c);
        Rational inv = m(c, c).inverse();
        for (std::size_t i = c + 1; i < rows_; ++i) {
            if (m(i, c).is_zero()) continue;
            Rational f = m(i, c) * inv;
            for (std::size_t j = c; j < cols_; ++j) m(i, j) -= f * m(c, j);
        }
    }
    return d;
}

QMatrix QMatrix::inverse() const {
    if (!square()) throw ArithError("inverse of a non-square matrix");
    std::vector<std::size_t> piv;
    QMatrix r = hcat(identity(rows_)).rref(&piv);
    if (piv.size() < rows_ || piv[rows_ - 1] != rows_ - 1) throw ArithError("matrix is singular");
    return r.block(0, cols_, rows_, cols_);
}

QMatrix QMatrix::nullspace() const {
    std::vector<std::size_t> piv;
    QMatrix r = rref(&piv);
    std::vector<bool> is_piv(cols_, false);
    for (auto c : piv) is_piv[c] = true;
    std::vector<QVector> basis;
    for (std::size_t f = 0; f < cols_; ++f) {
        if (is_piv[f]) continue;
        QVector v(cols_);
        v[f] = Rational(1);
        for (std::size_t i = 0; i < piv.size(); ++i) v[piv[i]] = -r(i, f);
        basis.push_back(std::move(v));
    }
    return from_columns(basis, cols_);
}

QMatrix QMatrix::column_basis() const {
    std::vector<std::size_t> piv;
    rref(&piv);
    std::vector<QVector> cols;
    for (auto c : piv) cols.push_back(col(c));
    return from_columns(cols, rows_);
}

Rational QMatrix::trace() const {
    if (!square()) throw ArithError("trace of a non-square matrix");
    Rational t(0);
    for (std::size_t i = 0; i < rows_; ++i) t += (*this)(i, i);
    return t;
}

Eigen::MatrixXd QMatrix::to_double() const {
    Eigen::MatrixXd m(rows_, cols_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (*this)(i, j).to_double();
    return m;
}

std::string QMatrix::str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < rows_; ++i) {
        os << (i ? ", [" : "[");
        for (std::size_t j = 0; j < cols_; ++j) os << (j ? ", " : "") << (*this)(i, j);
        os << ']';
    }
    os << ']';
    return os.str();
}

std::ostream& operator<<(std::ostream& os, const QMatrix& m) { return os << m.str(); }

bool projectively_equal(const QMatrix& a, const QMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    // find the scale from the first nonzero entry of b
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) {
            if (b(i, j).is_zero()) {
                if (!a(i, j).is_zero()) return false;
                continue;
            }
            if (a(i, j).is_zero()) return false;
            Rational c = a(i, j) / b(i, j);
            return a == b * c;
        }
    return a.is_zero();
}

bool span_contains(const QMatrix& a, const QMatrix& b) {
    if (b.cols() == 0) return true;
    if (a.cols() == 0) return b.is_zero();
    return a.hcat(b).rank() == a.rank();
}

Rational max_entry_abs(const QMatrix& m, const Place& sigma) {
    Rational best(0);
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) {
            Rational v = abs_at_place(m(i, j), sigma).value;
            if (v > best) best = v;
        }
    return best;
}

double spectral_norm(const QMatrix& m) {
    if (m.rows() == 0 || m.cols() == 0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m.to_double());
    return svd.singularValues()(0);
}

}  // namespace carpet

#pragma once

// Unimodular lattices, x -> Lambda_x, diagonal flows and shortest vectors.

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "carpet/ifs.hpp"
#include "carpet/qmatrix.hpp"
#include "carpet/report.hpp"

namespace carpet {

class LatticeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;
using IVector = Eigen::Matrix<long long, Eigen::Dynamic, 1>;
using IMatrix = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>;

/// Basis vectors are the columns.
struct ExactLattice {
    QMatrix basis;
};

struct FlowLattice {
    RMatrix basis;
    double log_det_drift = 0.0;
};

/// u(x): identity with (x, 1) as last column.
QMatrix unipotent(const QVector& x);
ExactLattice embed(const QVector& x);
FlowLattice embed(const std::vector<double>& x);
FlowLattice to_flow(const ExactLattice& L);

struct WeightVector {
    std::vector<double> r;
    static WeightVector make(std::vector<double> r);
    static WeightVector equal(int d);
    int d() const { return static_cast<int>(r.size()); }
};

enum class NormKind { sup, euclidean, custom };

/// c_lo |v|_2 <= |v| <= c_hi |v|_2 on R^n.
struct NormSpec {
    NormKind kind = NormKind::euclidean;
    std::function<double(const RVector&)> custom;
    double c_lo = 1.0;
    double c_hi = 1.0;

    static NormSpec sup() { return {NormKind::sup, {}, 0.0, 1.0}; }
    static NormSpec euclidean() { return {NormKind::euclidean, {}, 1.0, 1.0}; }
    /// Spot-checks positivity and homogeneity on random vectors in R^n.
    static NormSpec make_custom(std::function<double(const RVector&)> f, double c_lo, double c_hi, int n);

    double operator()(const RVector& v) const;
    /// Equivalence constant below the Euclidean norm in R^n.
    double lower(int n) const;
    std::string name() const;
};

/// n -> (X_1, ..., X_{d+1}) with zero sum.
struct DiagonalSequence {
    std::function<std::vector<double>(double)> exponents;
    /// t -> (r_1 t, ..., r_d t, -t)
    static DiagonalSequence weighted(const WeightVector& r);
    static DiagonalSequence from(std::function<std::vector<double>(double)> f) { return {std::move(f)}; }
    std::vector<double> at(double t) const;
};

/// Left-multiplies by diag(e^{X(t)}); throws on |X_i| > 600.
FlowLattice flow(const FlowLattice& L, const DiagonalSequence& a, double t);
/// diag(e^{X}) applied directly.
FlowLattice apply_diag(const FlowLattice& L, const std::vector<double>& X);

/// Sum_j c_j b_j in a fixed evaluation order.
RVector lattice_vector(const RMatrix& B, const IVector& c);

struct ReducedBasis {
    RMatrix basis;
    IMatrix transform;  // basis = B * transform
};

/// LLL with delta = 0.99 on the columns of B.
ReducedBasis lll_reduce(const RMatrix& B, double delta = 0.99);

struct ShortestVector {
    RVector vector;
    IVector coeffs;  // in the input basis
    double length = 0.0;
};

/// Exact minimiser of the norm over nonzero lattice vectors.
ShortestVector shortest_vector(const RMatrix& B, const NormSpec& norm = NormSpec::euclidean());

/// Number of nonzero lattice vectors with Euclidean norm <= R.
std::size_t count_points(const RMatrix& B, double R);

/// Largest over smallest singular value.
double condition_number(const RMatrix& B);

struct DriftReport {
    bool drifts = false;
    std::vector<double> trace;  // floor(X^(n)) = min_{i<=d} X_i, n = 1..N
};

DriftReport drift_check(const DiagonalSequence& a, int d, int N, double threshold);

struct SystolePoint {
    double t = 0.0;
    double lambda1_euclid = 0.0;
    double lambda1_norm = 0.0;
};

/// lambda_1 of a_t Lambda_x along a time grid; the basis is kept reduced along the way.
std::vector<SystolePoint> systole_trace(const std::vector<double>& x, const DiagonalSequence& a,
                                        const std::vector<double>& times, const NormSpec& norm);

/// Mean over x ~ theta of #{v in a_t Lambda_x \ 0 : |v|_2 <= R}.
ExperimentReport siegel_statistic(const CarpetIFS& ifs, const DiagonalSequence& a, double t, double R,
                                  std::size_t n_samples, std::uint64_t seed, int threads = 1);

/// Volume of the Euclidean ball of radius R in R^n.
double ball_volume(int n, double R);

struct NondivRow {
    double eps = 0.0;
    double fraction = 0.0;
    double clt_bar = 0.0;
};

/// Fraction of x ~ theta with lambda_1(a_t Lambda_x) < eps for each eps.
std::vector<NondivRow> nondivergence_profile(const CarpetIFS& ifs, const DiagonalSequence& a, double t,
                                             const std::vector<double>& eps_ladder, std::size_t n_samples,
                                             std::uint64_t seed, int threads = 1);

}  // namespace carpet

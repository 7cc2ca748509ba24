#pragma once

// S-arithmetic random walk: places, walk matrices, adjoint action, growth and subalgebras.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "carpet/arith.hpp"
#include "carpet/ifs.hpp"
#include "carpet/qmatrix.hpp"

namespace carpet {

class SadicError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when the closed form for gamma(a, n, b) disagrees with the product.
class GammaIndexError : public SadicError {
public:
    GammaIndexError(const std::string& what, QVector product, QVector closed)
        : SadicError(what), product_y0(std::move(product)), closed_y0(std::move(closed)) {}
    QVector product_y0, closed_y0;
};

enum class PlaceType { ue, dt, tr };
std::string to_string(PlaceType t);

struct PlacePartition {
    std::vector<Place> S, ue, dt, tr;
    PlaceType type(const Place& p) const;
    bool contains(const Place& p) const;
};

PlacePartition derive_places(const CarpetIFS& ifs);

struct WalkElement {
    std::map<Place, QMatrix> mats;
    std::string label;

    const QMatrix& at(const Place& p) const;
    WalkElement operator*(const WalkElement& o) const;
    WalkElement inverse() const;
    /// Placewise equality modulo nonzero scalars.
    bool projectively_equal(const WalkElement& o) const;
    bool is_identity_at(const Place& p) const;
};

/// The same matrix at every place of S.
WalkElement diagonal_embedding(const QMatrix& g, const PlacePartition& P, std::string label = {});

struct Walk {
    int d = 1;
    Rational rho;
    PlacePartition places;
    std::vector<WalkElement> h, hbar, k, lambda;
    WalkElement b;
    /// Generators of the compact group F (the k_i); the closure is not computed.
    std::vector<WalkElement> F_generators;
};

Walk build_walk(const CarpetIFS& ifs, const PlacePartition& P);

/// g_{w_n} ... g_{w_1}
WalkElement forward_product(const std::vector<WalkElement>& gens, const Word& w);
/// g_{w_1} ... g_{w_n}
WalkElement backward_product(const std::vector<WalkElement>& gens, const Word& w);

struct IdentityFailure {
    Place place = Place::infinity();
    int index = 0;
    QMatrix lhs, rhs;
    std::string what;
};

struct IdentityCheck {
    bool ok = true;
    std::vector<IdentityFailure> failures;
};

/// h_i u(x) = u(f_i(x)) lambda_i at infinity and h_i = lambda_i at finite places, modulo scalars.
IdentityCheck verify_crucial_identity(const CarpetIFS& ifs, const Walk& walk, const QVector& x,
                                      const std::vector<WalkElement>* lambda_override = nullptr);
/// k_i hbar_i = h_i at every place.
IdentityCheck verify_k_factorisation(const Walk& walk);
/// hbar_i and h_i agree on S_ue.
IdentityCheck verify_ue_agreement(const Walk& walk);
/// h_i w = u_inf(y_i) (h_i w h_i^{-1}) lambda_i for w = (u(z_sigma))_sigma.
IdentityCheck verify_solenoid_identity(const CarpetIFS& ifs, const Walk& walk, const std::map<Place, QVector>& z);
/// rho a/(1-q) = a/q + a/(1-q) for rho = 1/q.
bool verify_series_identity(const Rational& a, const BigInt& q);

/// Traceless (d+1)x(d+1) matrices. Coordinates: u (E_{i,n}), off-diagonal gl_d,
/// diagonal H_i = E_ii - E_{i+1,i+1}, then u^- (E_{n,j}).
class LieModel {
public:
    explicit LieModel(int d);
    int d() const { return d_; }
    int n() const { return d_ + 1; }
    std::size_t dim() const { return basis_.size(); }
    const QMatrix& basis(std::size_t i) const { return basis_[i]; }

    QVector coords(const QMatrix& X) const;
    QMatrix element(const QVector& c) const;
    static QMatrix bracket(const QMatrix& X, const QMatrix& Y);

    std::vector<std::size_t> u_indices() const;
    std::vector<std::size_t> block_diagonal_indices() const;
    std::vector<std::size_t> p_indices() const;
    std::vector<std::size_t> u_minus_indices() const;
    std::vector<std::size_t> all_indices() const;
    /// Basis matrix (columns = unit coordinate vectors).
    QMatrix coordinate_subspace(const std::vector<std::size_t>& idx) const;

private:
    int d_;
    std::vector<QMatrix> basis_;
};

struct AdOperator {
    Place place = Place::infinity();
    QMatrix mat;
};

/// X -> g X g^{-1} in model coordinates; optionally checks brackets on all basis pairs.
AdOperator adjoint(const QMatrix& g, const Place& sigma, const LieModel& model, bool check_brackets = true);
AdOperator adjoint(const WalkElement& w, const Place& sigma, const LieModel& model, bool check_brackets = true);

struct OpNorm {
    Place place = Place::infinity();
    bool exact = false;
    Rational value_exact;  // finite places
    double value = 0.0;
    double log_value() const;
};

/// Max entry absolute value at a prime, spectral norm at infinity.
OpNorm op_norm(const AdOperator& A);
/// Same norm for a group matrix acting on Q_sigma^{d+1}.
OpNorm op_norm(const QMatrix& g, const Place& sigma);

struct GrowthRow {
    Place place = Place::infinity();
    int n = 0;
    std::size_t word = 0;
    double log_norm = 0.0;
    double bound_lo = 0.0, bound_hi = 0.0;
    bool exact = false;
};

struct GrowthAudit {
    std::vector<GrowthRow> rows;
    /// Smallest C with |log norm - n |log|rho|_sigma|| <= log C across all rows.
    std::map<Place, double> empirical_C;
};

/// log |Ad(hbar_1^n)|_sigma over random words, for sigma in S_ue and S_dt (and S_tr, where it is 0).
GrowthAudit growth_audit(const Walk& walk, const LieModel& model, const std::vector<int>& lengths,
                         std::size_t n_words, std::uint64_t seed);

struct GammaResult {
    WalkElement gamma;
    QVector y0;
    QVector y0_closed_form;
    bool identity_off_ue = true;
};

QVector gamma_closed_form(const CarpetIFS& ifs, const Word& a, const Word& b, int n);
GammaResult prefix_swap_gamma(const CarpetIFS& ifs, const Walk& walk, const Word& a, const Word& b, int n);

/// Basis of {X : Ad(g)X = X for every given operator}.
QMatrix centralizer(const std::vector<AdOperator>& ops, std::size_t dim);
QMatrix centralizer_at(const Walk& walk, const LieModel& model, const Place& sigma);

struct Certificate {
    std::string name;
    Place place = Place::infinity();
    bool ok = false;
};

struct SubalgebraSuite {
    /// place -> name -> basis matrix
    std::map<Place, std::map<std::string, QMatrix>> spaces;
    std::vector<Certificate> certificates;
    bool all_ok() const;
};

/// Builds u, p, u^-, h_fne, w_st, w_bc, V_ex, z at every place and checks the stated
/// invariances, containments, direct sums, dim p and the Ad eigenvalues of diag(rho,...,rho,1)^{-1}.
/// Throws SadicError naming the generator on the first failed certificate when `strict`.
SubalgebraSuite subalgebra_suite(const Walk& walk, const LieModel& model, bool strict = true);

/// Index sets S (ascending) spanning W^(r).
std::vector<std::vector<std::size_t>> exterior_subsets(const LieModel& model, int r);
/// r x r minors of A indexed by all r-subsets of {0..m-1} in lexicographic order.
QMatrix compound_matrix(const QMatrix& A, int r);
/// All r-subsets of {0..m-1}, lexicographic.
std::vector<std::vector<std::size_t>> all_subsets(std::size_t m, int r);

struct ExteriorResult {
    int r = 0;
    std::vector<std::vector<std::size_t>> basis;
    bool invariant = false;
};

ExteriorResult exterior_power_invariance(const Walk& walk, const LieModel& model, const Place& sigma, int r);

/// |v_perp| / |v| with sigma-norms, v_perp the part outside the coordinate subspace idx.
double projective_distance_to(const QVector& v, const std::vector<std::size_t>& idx, const Place& sigma);
/// |v ^ w| / (|v| |w|) with the max-norm on Plucker coordinates.
double wedge_distance(const QVector& v, const QVector& w, const Place& sigma);

struct DirectionResult {
    double fraction = 0.0;
    double clt_bar = 0.0;
    std::size_t n_words = 0;
    double median_distance = 0.0;
};

/// Fraction of words b with dist([Ad(hbar_1^m) v], u_sigma) < eta.
DirectionResult direction_test(const Walk& walk, const LieModel& model, const Place& sigma, const QVector& v, int m,
                               double eta, std::size_t n_words, std::uint64_t seed, const std::vector<double>& p);

}  // namespace carpet

#include "carpet/sadic.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "carpet/lattice.hpp"
#include "carpet/report.hpp"
#include "carpet/rng.hpp"

namespace carpet {

std::string to_string(PlaceType t) {
    switch (t) {
        case PlaceType::ue: return "ue";
        case PlaceType::dt: return "dt";
        default: return "tr";
    }
}

PlaceType PlacePartition::type(const Place& p) const {
    if (std::find(ue.begin(), ue.end(), p) != ue.end()) return PlaceType::ue;
    if (std::find(dt.begin(), dt.end(), p) != dt.end()) return PlaceType::dt;
    if (std::find(tr.begin(), tr.end(), p) != tr.end()) return PlaceType::tr;
    throw SadicError("place " + p.str() + " is not in S");
}

bool PlacePartition::contains(const Place& p) const { return std::find(S.begin(), S.end(), p) != S.end(); }

PlacePartition derive_places(const CarpetIFS& f) {
    BigInt r = f.rho.num(), q = f.rho.den();
    std::set<std::uint64_t> finite, ue, dt;
    for (auto p : prime_divisors(q)) {
        finite.insert(p);
        ue.insert(p);
    }
    if (r != 1 && r != -1)
        for (auto p : prime_divisors(r)) {
            finite.insert(p);
            dt.insert(p);
        }
    for (const auto& v : f.y)
        for (const auto& c : v)
            if (c.den() != 1)
                for (auto p : prime_divisors(c.den())) finite.insert(p);
    PlacePartition P;
    P.S.push_back(Place::infinity());
    P.dt.push_back(Place::infinity());
    for (auto p : finite) {
        Place pl = Place::prime(p);
        P.S.push_back(pl);
        if (ue.count(p)) P.ue.push_back(pl);
        else if (dt.count(p)) P.dt.push_back(pl);
        else P.tr.push_back(pl);
    }
    return P;
}

// ---------------------------------------------------------------------------

const QMatrix& WalkElement::at(const Place& p) const {
    auto it = mats.find(p);
    if (it == mats.end()) throw SadicError("walk element has no matrix at place " + p.str());
    return it->second;
}

WalkElement WalkElement::operator*(const WalkElement& o) const {
    WalkElement w;
    for (const auto& [p, m] : mats) w.mats.emplace(p, m * o.at(p));
    w.label = label.empty() || o.label.empty() ? label + o.label : label + "*" + o.label;
    return w;
}

WalkElement WalkElement::inverse() const {
    WalkElement w;
    for (const auto& [p, m] : mats) w.mats.emplace(p, m.inverse());
    w.label = label.empty() ? "" : "(" + label + ")^-1";
    return w;
}

bool WalkElement::projectively_equal(const WalkElement& o) const {
    if (mats.size() != o.mats.size()) return false;
    for (const auto& [p, m] : mats) {
        auto it = o.mats.find(p);
        if (it == o.mats.end() || !carpet::projectively_equal(m, it->second)) return false;
    }
    return true;
}

bool WalkElement::is_identity_at(const Place& p) const {
    const QMatrix& m = at(p);
    return carpet::projectively_equal(m, QMatrix::identity(m.rows()));
}

WalkElement diagonal_embedding(const QMatrix& g, const PlacePartition& P, std::string label) {
    WalkElement w;
    for (const auto& p : P.S) w.mats.emplace(p, g);
    w.label = std::move(label);
    return w;
}

namespace {

/// [[s I, -y], [0, 1]]
QMatrix affine(int d, const Rational& s, const QVector& y, bool negate = true) {
    QMatrix m = QMatrix::identity(static_cast<std::size_t>(d + 1));
    for (int i = 0; i < d; ++i) {
        m(static_cast<std::size_t>(i), static_cast<std::size_t>(i)) = s;
        m(static_cast<std::size_t>(i), static_cast<std::size_t>(d)) = negate ? -y[static_cast<std::size_t>(i)] : y[static_cast<std::size_t>(i)];
    }
    return m;
}

QMatrix diag_rho(int d, const Rational& s) { return affine(d, s, QVector(static_cast<std::size_t>(d))); }

}  // namespace

Walk build_walk(const CarpetIFS& f, const PlacePartition& P) {
    Walk w;
    w.d = f.d;
    w.rho = f.rho;
    w.places = P;
    const int d = f.d;
    const QMatrix id = QMatrix::identity(static_cast<std::size_t>(d + 1));
    for (int i = 1; i <= f.k(); ++i) {
        const QVector& y = f.y[static_cast<std::size_t>(i - 1)];
        WalkElement h, hb, k;
        std::string s = std::to_string(i);
        h.label = "h_" + s;
        hb.label = "hbar_" + s;
        k.label = "k_" + s;
        for (const auto& p : P.S) {
            PlaceType t = P.type(p);
            h.mats.emplace(p, p.is_infinite() ? diag_rho(d, f.rho) : affine(d, f.rho, y));
            switch (t) {
                case PlaceType::ue:
                    hb.mats.emplace(p, affine(d, f.rho, y));
                    k.mats.emplace(p, id);
                    break;
                case PlaceType::dt:
                    hb.mats.emplace(p, diag_rho(d, f.rho));
                    k.mats.emplace(p, p.is_infinite() ? id : affine(d, Rational(1), y));
                    break;
                case PlaceType::tr:
                    hb.mats.emplace(p, id);
                    k.mats.emplace(p, affine(d, f.rho, y));
                    break;
            }
        }
        w.h.push_back(std::move(h));
        w.hbar.push_back(std::move(hb));
        w.k.push_back(k);
        w.F_generators.push_back(std::move(k));
        w.lambda.push_back(diagonal_embedding(affine(d, f.rho, y), P, "lambda_" + s));
    }
    w.b.label = "b";
    for (const auto& p : P.S)
        w.b.mats.emplace(p, P.type(p) == PlaceType::ue ? diag_rho(d, f.rho.inverse()) : id);
    return w;
}

WalkElement forward_product(const std::vector<WalkElement>& gens, const Word& w) {
    if (gens.empty()) throw SadicError("no generators");
    WalkElement acc;
    for (const auto& [p, m] : gens.front().mats) acc.mats.emplace(p, QMatrix::identity(m.rows()));
    for (int c : w) {
        if (c < 1 || c > static_cast<int>(gens.size())) throw SadicError("word letter out of range");
        acc = gens[static_cast<std::size_t>(c - 1)] * acc;
    }
    acc.label = "word";
    return acc;
}

WalkElement backward_product(const std::vector<WalkElement>& gens, const Word& w) {
    Word r(w.rbegin(), w.rend());
    return forward_product(gens, r);
}

// ---------------------------------------------------------------------------

namespace {

void record(IdentityCheck& chk, const Place& p, int i, const QMatrix& lhs, const QMatrix& rhs, std::string what) {
    if (carpet::projectively_equal(lhs, rhs)) return;
    chk.ok = false;
    chk.failures.push_back({p, i, lhs, rhs, std::move(what)});
}

}  // namespace

IdentityCheck verify_crucial_identity(const CarpetIFS& f, const Walk& walk, const QVector& x,
                                      const std::vector<WalkElement>* lambda_override) {
    if (static_cast<int>(x.size()) != f.d) throw SadicError("point has wrong dimension");
    const auto& lambda = lambda_override ? *lambda_override : walk.lambda;
    IdentityCheck chk;
    for (int i = 1; i <= f.k(); ++i) {
        const auto& h = walk.h[static_cast<std::size_t>(i - 1)];
        const auto& lam = lambda.at(static_cast<std::size_t>(i - 1));
        QVector fx = f.apply(i, x);
        for (const auto& p : walk.places.S) {
            if (p.is_infinite())
                record(chk, p, i, h.at(p) * unipotent(x), unipotent(fx) * lam.at(p), "h_i u(x) = u(f_i(x)) lambda_i");
            else
                record(chk, p, i, h.at(p), lam.at(p), "h_i = lambda_i");
        }
    }
    return chk;
}

IdentityCheck verify_k_factorisation(const Walk& walk) {
    IdentityCheck chk;
    for (std::size_t i = 0; i < walk.h.size(); ++i)
        for (const auto& p : walk.places.S)
            record(chk, p, static_cast<int>(i + 1), walk.k[i].at(p) * walk.hbar[i].at(p), walk.h[i].at(p), "k_i hbar_i = h_i");
    return chk;
}

IdentityCheck verify_ue_agreement(const Walk& walk) {
    IdentityCheck chk;
    for (std::size_t i = 0; i < walk.h.size(); ++i)
        for (const auto& p : walk.places.ue)
            record(chk, p, static_cast<int>(i + 1), walk.hbar[i].at(p), walk.h[i].at(p), "hbar_i = h_i on S_ue");
    return chk;
}

IdentityCheck verify_solenoid_identity(const CarpetIFS& f, const Walk& walk, const std::map<Place, QVector>& z) {
    IdentityCheck chk;
    WalkElement w;
    for (const auto& p : walk.places.S) {
        auto it = z.find(p);
        w.mats.emplace(p, unipotent(it == z.end() ? QVector(static_cast<std::size_t>(f.d)) : it->second));
    }
    for (int i = 1; i <= f.k(); ++i) {
        const auto& h = walk.h[static_cast<std::size_t>(i - 1)];
        const auto& lam = walk.lambda[static_cast<std::size_t>(i - 1)];
        for (const auto& p : walk.places.S) {
            QMatrix u_inf = p.is_infinite() ? unipotent(f.y[static_cast<std::size_t>(i - 1)])
                                            : QMatrix::identity(static_cast<std::size_t>(f.d + 1));
            QMatrix conj = h.at(p) * w.at(p) * h.at(p).inverse();
            record(chk, p, i, h.at(p) * w.at(p), u_inf * conj * lam.at(p), "h_i w = u(y_i) (h_i w h_i^-1) lambda_i");
        }
    }
    return chk;
}

bool verify_series_identity(const Rational& a, const BigInt& q) {
    if (q == 0 || q == 1) throw SadicError("series identity needs q outside {0, 1}");
    Rational rho = Rational(BigInt(1), q);
    Rational z = a / (Rational(1) - Rational(q));
    return rho * z == a / Rational(q) + z;
}

// ---------------------------------------------------------------------------

LieModel::LieModel(int d) : d_(d) {
    if (d < 1) throw SadicError("dimension must be positive");
    const auto n = static_cast<std::size_t>(d + 1);
    auto E = [n](std::size_t i, std::size_t j) {
        QMatrix m(n, n);
        m(i, j) = Rational(1);
        return m;
    };
    const auto dd = static_cast<std::size_t>(d);
    for (std::size_t i = 0; i < dd; ++i) basis_.push_back(E(i, dd));
    for (std::size_t i = 0; i < dd; ++i)
        for (std::size_t j = 0; j < dd; ++j)
            if (i != j) basis_.push_back(E(i, j));
    for (std::size_t i = 0; i < dd; ++i) basis_.push_back(E(i, i) - E(i + 1, i + 1));
    for (std::size_t j = 0; j < dd; ++j) basis_.push_back(E(dd, j));
}

QVector LieModel::coords(const QMatrix& X) const {
    const auto dd = static_cast<std::size_t>(d_);
    if (X.rows() != dd + 1 || X.cols() != dd + 1) throw SadicError("matrix has wrong size for the Lie model");
    if (!X.trace().is_zero()) throw SadicError("matrix is not traceless");
    QVector c;
    c.reserve(dim());
    for (std::size_t i = 0; i < dd; ++i) c.push_back(X(i, dd));
    for (std::size_t i = 0; i < dd; ++i)
        for (std::size_t j = 0; j < dd; ++j)
            if (i != j) c.push_back(X(i, j));
    Rational acc(0);
    for (std::size_t i = 0; i < dd; ++i) {
        acc += X(i, i);
        c.push_back(acc);
    }
    for (std::size_t j = 0; j < dd; ++j) c.push_back(X(dd, j));
    return c;
}

QMatrix LieModel::element(const QVector& c) const {
    if (c.size() != dim()) throw SadicError("coordinate vector has wrong length");
    QMatrix X(static_cast<std::size_t>(d_ + 1), static_cast<std::size_t>(d_ + 1));
    for (std::size_t k = 0; k < c.size(); ++k)
        if (!c[k].is_zero()) X = X + basis_[k] * c[k];
    return X;
}

QMatrix LieModel::bracket(const QMatrix& X, const QMatrix& Y) { return X * Y - Y * X; }

std::vector<std::size_t> LieModel::u_indices() const {
    std::vector<std::size_t> v;
    for (int i = 0; i < d_; ++i) v.push_back(static_cast<std::size_t>(i));
    return v;
}

std::vector<std::size_t> LieModel::block_diagonal_indices() const {
    std::vector<std::size_t> v;
    for (int i = d_; i < d_ * d_ + d_; ++i) v.push_back(static_cast<std::size_t>(i));
    return v;
}

std::vector<std::size_t> LieModel::p_indices() const {
    std::vector<std::size_t> v;
    for (int i = 0; i < d_ * d_ + d_; ++i) v.push_back(static_cast<std::size_t>(i));
    return v;
}

std::vector<std::size_t> LieModel::u_minus_indices() const {
    std::vector<std::size_t> v;
    for (int i = d_ * d_ + d_; i < d_ * d_ + 2 * d_; ++i) v.push_back(static_cast<std::size_t>(i));
    return v;
}

std::vector<std::size_t> LieModel::all_indices() const {
    std::vector<std::size_t> v(dim());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = i;
    return v;
}

QMatrix LieModel::coordinate_subspace(const std::vector<std::size_t>& idx) const {
    QMatrix m(dim(), idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) m(idx[j], j) = Rational(1);
    return m;
}

AdOperator adjoint(const QMatrix& g, const Place& sigma, const LieModel& model, bool check_brackets) {
    QMatrix gi = g.inverse();
    const std::size_t m = model.dim();
    std::vector<QVector> cols;
    cols.reserve(m);
    for (std::size_t j = 0; j < m; ++j) cols.push_back(model.coords(g * model.basis(j) * gi));
    AdOperator A{sigma, QMatrix::from_columns(cols, m)};
    if (check_brackets) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i + 1; j < m; ++j) {
                QVector lhs = A.mat * model.coords(LieModel::bracket(model.basis(i), model.basis(j)));
                QVector rhs = model.coords(LieModel::bracket(model.element(cols[i]), model.element(cols[j])));
                if (lhs != rhs) throw SadicError("adjoint operator does not preserve brackets");
            }
    }
    return A;
}

AdOperator adjoint(const WalkElement& w, const Place& sigma, const LieModel& model, bool check_brackets) {
    return adjoint(w.at(sigma), sigma, model, check_brackets);
}

namespace {

double log_rational(const Rational& x) {
    long en = 0, ed = 0;
    double n = mpz_get_d_2exp(&en, x.num().get_mpz_t());
    double d = mpz_get_d_2exp(&ed, x.den().get_mpz_t());
    return std::log(n / d) + static_cast<double>(en - ed) * std::log(2.0);
}

/// |log |rho|_sigma|
double log_rate(const Rational& rho, const Place& p) {
    return std::abs(log_rational(abs_at_place(rho, p).value));
}

}  // namespace

double OpNorm::log_value() const { return exact ? log_rational(value_exact) : std::log(value); }

OpNorm op_norm(const QMatrix& g, const Place& sigma) {
    OpNorm n;
    n.place = sigma;
    if (sigma.is_infinite()) {
        n.value = spectral_norm(g);
    } else {
        n.exact = true;
        n.value_exact = max_entry_abs(g, sigma);
        n.value = n.value_exact.to_double();
    }
    return n;
}

OpNorm op_norm(const AdOperator& A) { return op_norm(A.mat, A.place); }

GrowthAudit growth_audit(const Walk& walk, const LieModel& model, const std::vector<int>& lengths, std::size_t n_words,
                         std::uint64_t seed) {
    if (lengths.empty() || n_words == 0) throw SadicError("growth audit needs lengths and words");
    std::vector<int> ls = lengths;
    std::sort(ls.begin(), ls.end());
    ls.erase(std::unique(ls.begin(), ls.end()), ls.end());
    if (ls.front() < 1) throw SadicError("word lengths must be positive");
    const int nmax = ls.back();
    const auto k = static_cast<std::uint64_t>(walk.hbar.size());

    // per-letter adjoint matrices at each place
    std::map<Place, std::vector<QMatrix>> ad;
    for (const auto& p : walk.places.S) {
        std::vector<QMatrix> v;
        for (const auto& hb : walk.hbar) v.push_back(adjoint(hb, p, model, false).mat);
        ad.emplace(p, std::move(v));
    }

    GrowthAudit audit;
    for (std::size_t wi = 0; wi < n_words; ++wi) {
        Rng rng(derive_seed(seed, wi));
        Word w(static_cast<std::size_t>(nmax));
        for (auto& c : w) c = static_cast<int>(rng.below(k)) + 1;
        for (const auto& p : walk.places.S) {
            QMatrix acc = QMatrix::identity(model.dim());
            std::size_t li = 0;
            for (int n = 1; n <= nmax; ++n) {
                if (n <= 60) acc = ad.at(p)[static_cast<std::size_t>(w[static_cast<std::size_t>(n - 1)] - 1)] * acc;
                if (li < ls.size() && ls[li] == n) {
                    AdOperator A{p, acc};
                    if (n > 60) {
                        // affine bookkeeping: the (d+1)-matrix product is exact and cheap
                        Word prefix(w.begin(), w.begin() + n);
                        A = adjoint(forward_product(walk.hbar, prefix), p, model, false);
                    }
                    OpNorm nrm = op_norm(A);
                    GrowthRow row;
                    row.place = p;
                    row.n = n;
                    row.word = wi;
                    row.log_norm = nrm.log_value();
                    row.exact = nrm.exact;
                    audit.rows.push_back(row);
                    ++li;
                }
            }
        }
    }
    for (const auto& p : walk.places.S) audit.empirical_C.emplace(p, 1.0);
    for (const auto& row : audit.rows) {
        double lead = row.n * (walk.places.type(row.place) == PlaceType::tr ? 0.0 : log_rate(walk.rho, row.place));
        double dev = std::exp(std::abs(row.log_norm - lead));
        double& c = audit.empirical_C.at(row.place);
        c = std::max(c, dev);
    }
    for (auto& row : audit.rows) {
        double lead = row.n * (walk.places.type(row.place) == PlaceType::tr ? 0.0 : log_rate(walk.rho, row.place));
        double c = std::log(audit.empirical_C.at(row.place));
        row.bound_lo = lead - c;
        row.bound_hi = lead + c;
    }
    return audit;
}

// ---------------------------------------------------------------------------

QVector gamma_closed_form(const CarpetIFS& f, const Word& a, const Word& b, int n) {
    if (n < 1 || static_cast<int>(a.size()) < n || static_cast<int>(b.size()) < n)
        throw SadicError("prefix swap needs words of length at least n");
    QVector y0(static_cast<std::size_t>(f.d));
    // sum_{j=1}^n rho^{n-j} (y_{b_{n-j+1}} - y_{a_j})
    for (int j = 1; j <= n; ++j) {
        Rational c = f.rho.pow(n - j);
        const QVector& yb = f.y.at(static_cast<std::size_t>(b[static_cast<std::size_t>(n - j)] - 1));
        const QVector& ya = f.y.at(static_cast<std::size_t>(a[static_cast<std::size_t>(j - 1)] - 1));
        for (std::size_t i = 0; i < y0.size(); ++i) y0[i] += c * (yb[i] - ya[i]);
    }
    return y0;
}

GammaResult prefix_swap_gamma(const CarpetIFS& f, const Walk& walk, const Word& a, const Word& b, int n) {
    QVector closed = gamma_closed_form(f, a, b, n);
    Word an(a.begin(), a.begin() + n), bn(b.begin(), b.begin() + n);
    GammaResult res;
    res.gamma = forward_product(walk.hbar, an) * backward_product(walk.hbar, bn).inverse();
    res.gamma.label = "gamma";
    res.y0_closed_form = closed;
    const auto dd = static_cast<std::size_t>(f.d);
    bool have_y0 = false;
    for (const auto& p : walk.places.S) {
        const QMatrix& g = res.gamma.at(p);
        if (walk.places.type(p) != PlaceType::ue) {
            if (!g.is_identity()) {
                res.identity_off_ue = false;
                throw SadicError("gamma is not the identity at place " + p.str());
            }
            continue;
        }
        QMatrix top = g.block(0, 0, dd, dd);
        bool unipotent = top.is_identity() && g(dd, dd) == Rational(1);
        for (std::size_t j = 0; j < dd; ++j) unipotent = unipotent && g(dd, j).is_zero();
        if (!unipotent) throw SadicError("gamma is not unipotent at place " + p.str());
        QVector y0 = g.col(dd);
        y0.pop_back();
        if (!have_y0) {
            res.y0 = y0;
            have_y0 = true;
        } else if (y0 != res.y0) {
            throw SadicError("gamma differs between S_ue places");
        }
    }
    if (!have_y0) res.y0 = QVector(dd);
    if (!walk.places.ue.empty() && res.y0 != closed)
        throw GammaIndexError("closed form for y0 disagrees with the matrix product", res.y0, closed);
    return res;
}

// ---------------------------------------------------------------------------

QMatrix centralizer(const std::vector<AdOperator>& ops, std::size_t dim) {
    if (ops.empty()) return QMatrix::identity(dim);
    QMatrix stacked(ops.size() * dim, dim);
    for (std::size_t k = 0; k < ops.size(); ++k) {
        QMatrix D = ops[k].mat - QMatrix::identity(dim);
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = 0; j < dim; ++j) stacked(k * dim + i, j) = D(i, j);
    }
    return stacked.nullspace();
}

QMatrix centralizer_at(const Walk& walk, const LieModel& model, const Place& sigma) {
    std::vector<AdOperator> ops;
    for (const auto& hb : walk.hbar) ops.push_back(adjoint(hb, sigma, model, false));
    return centralizer(ops, model.dim());
}

bool SubalgebraSuite::all_ok() const {
    return std::all_of(certificates.begin(), certificates.end(), [](const Certificate& c) { return c.ok; });
}

namespace {

bool invariant_under(const QMatrix& A, const QMatrix& V) { return V.cols() == 0 || span_contains(V, A * V); }

bool same_span(const QMatrix& a, const QMatrix& b) { return span_contains(a, b) && span_contains(b, a); }

std::size_t dim_of(const QMatrix& V) { return V.cols() == 0 ? 0 : V.rank(); }

}  // namespace

SubalgebraSuite subalgebra_suite(const Walk& walk, const LieModel& model, bool strict) {
    SubalgebraSuite suite;
    const std::size_t m = model.dim();
    auto add = [&](const std::string& name, const Place& p, bool ok, const std::string& generator = {}) {
        suite.certificates.push_back({name, p, ok});
        if (!ok && strict)
            throw SadicError("certificate '" + name + "' failed at place " + p.str() + (generator.empty() ? "" : " for " + generator));
    };
    const QMatrix none(m, 0);
    const QMatrix all = model.coordinate_subspace(model.all_indices());
    const QMatrix u = model.coordinate_subspace(model.u_indices());
    const QMatrix pp = model.coordinate_subspace(model.p_indices());
    const QMatrix um = model.coordinate_subspace(model.u_minus_indices());
    const QMatrix blk = model.coordinate_subspace(model.block_diagonal_indices());

    for (const auto& p : walk.places.S) {
        PlaceType t = walk.places.type(p);
        auto& sp = suite.spaces.try_emplace(p).first->second;
        sp["u"] = u;
        sp["p"] = pp;
        sp["u_minus"] = um;
        sp["h_fne"] = t == PlaceType::ue ? none : (t == PlaceType::dt ? pp : all);
        sp["w_st"] = t == PlaceType::ue ? u : all;
        sp["w_bc"] = t == PlaceType::ue ? u : (t == PlaceType::dt ? um : none);
        sp["V_ex"] = t == PlaceType::ue ? all : (t == PlaceType::dt ? um : none);
        sp["z"] = centralizer_at(walk, model, p);

        for (const auto& hb : walk.hbar) {
            QMatrix A = adjoint(hb, p, model, true).mat;
            for (const char* name : {"u", "h_fne", "w_st", "V_ex", "w_bc"})
                add(std::string("Ad-invariance of ") + name, p, invariant_under(A, sp[name]), hb.label);
            if (!hb.is_identity_at(p)) {
                bool scal = true;
                for (std::size_t j : model.u_indices()) {
                    QVector e(m);
                    e[j] = Rational(1);
                    QVector img = A * e;
                    for (auto& c : e) c *= walk.rho;
                    scal = scal && img == e;
                }
                add("Ad(hbar) acts on u by rho", p, scal, hb.label);
            }
        }
        add("z in h_fne", p, span_contains(sp["h_fne"], sp["z"]));
        add("h_fne in w_st", p, span_contains(sp["w_st"], sp["h_fne"]));
        QMatrix sum = sp["h_fne"].hcat(sp["w_bc"]);
        bool direct = dim_of(sum) == dim_of(sp["h_fne"]) + dim_of(sp["w_bc"]);
        add("w_st = h_fne + w_bc (direct)", p, direct && same_span(sum, sp["w_st"]));
        add("dim p = d^2 + d", p, dim_of(pp) == static_cast<std::size_t>(walk.d * walk.d + walk.d));
    }

    // Ad(diag(rho,...,rho,1)^{-1}) acts by rho^{-1}, 1, rho on u, block-diagonal, u^-
    QMatrix a = QMatrix::identity(static_cast<std::size_t>(walk.d + 1));
    for (int i = 0; i < walk.d; ++i) a(static_cast<std::size_t>(i), static_cast<std::size_t>(i)) = walk.rho;
    QMatrix A = adjoint(a.inverse(), Place::infinity(), model, true).mat;
    auto eigen_ok = [&](const std::vector<std::size_t>& idx, const Rational& lam) {
        for (std::size_t j : idx) {
            QVector e(m);
            e[j] = Rational(1);
            QVector img = A * e;
            for (auto& c : e) c *= lam;
            if (img != e) return false;
        }
        return true;
    };
    add("eigenvalue rho^-1 on u", Place::infinity(), eigen_ok(model.u_indices(), walk.rho.inverse()));
    add("eigenvalue 1 on block diagonal", Place::infinity(), eigen_ok(model.block_diagonal_indices(), Rational(1)));
    add("eigenvalue rho on u^-", Place::infinity(), eigen_ok(model.u_minus_indices(), walk.rho));
    return suite;
}

// ---------------------------------------------------------------------------

std::vector<std::vector<std::size_t>> all_subsets(std::size_t m, int r) {
    std::vector<std::vector<std::size_t>> out;
    if (r < 0 || static_cast<std::size_t>(r) > m) return out;
    std::vector<std::size_t> s(static_cast<std::size_t>(r));
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = i;
    for (;;) {
        out.push_back(s);
        int i = r - 1;
        while (i >= 0 && s[static_cast<std::size_t>(i)] == m - static_cast<std::size_t>(r) + static_cast<std::size_t>(i)) --i;
        if (i < 0) break;
        ++s[static_cast<std::size_t>(i)];
        for (auto j = static_cast<std::size_t>(i) + 1; j < s.size(); ++j) s[j] = s[j - 1] + 1;
    }
    return out;
}

std::vector<std::vector<std::size_t>> exterior_subsets(const LieModel& model, int r) {
    const int d = model.d();
    if (r < 1 || r > d * d + d) throw SadicError("exterior degree out of range");
    auto U = model.u_indices();
    if (r <= d) {
        std::vector<std::vector<std::size_t>> out;
        for (const auto& s : all_subsets(U.size(), r)) {
            std::vector<std::size_t> t;
            for (auto i : s) t.push_back(U[i]);
            out.push_back(t);
        }
        return out;
    }
    auto blk = model.block_diagonal_indices();
    std::vector<std::vector<std::size_t>> out;
    for (const auto& s : all_subsets(blk.size(), r - d)) {
        std::vector<std::size_t> t = U;
        for (auto i : s) t.push_back(blk[i]);
        std::sort(t.begin(), t.end());
        out.push_back(t);
    }
    return out;
}

namespace {

Rational minor(const QMatrix& A, const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) {
    QMatrix M(rows.size(), cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j) M(i, j) = A(rows[i], cols[j]);
    return M.det();
}

}  // namespace

QMatrix compound_matrix(const QMatrix& A, int r) {
    if (!A.square()) throw SadicError("compound of a non-square matrix");
    auto subs = all_subsets(A.rows(), r);
    QMatrix C(subs.size(), subs.size());
    for (std::size_t i = 0; i < subs.size(); ++i)
        for (std::size_t j = 0; j < subs.size(); ++j) C(i, j) = minor(A, subs[i], subs[j]);
    return C;
}

ExteriorResult exterior_power_invariance(const Walk& walk, const LieModel& model, const Place& sigma, int r) {
    if (walk.d > 2) throw SadicError("exterior powers are limited to d <= 2");
    if (walk.places.type(sigma) != PlaceType::ue) throw SadicError("exterior power suite runs at S_ue places");
    ExteriorResult res;
    res.r = r;
    res.basis = exterior_subsets(model, r);
    std::set<std::vector<std::size_t>> W(res.basis.begin(), res.basis.end());
    auto rows = all_subsets(model.dim(), r);
    res.invariant = true;
    for (const auto& hb : walk.hbar) {
        QMatrix A = adjoint(hb, sigma, model, false).mat;
        for (const auto& S : res.basis)
            for (const auto& T : rows)
                if (!W.count(T) && !minor(A, T, S).is_zero()) res.invariant = false;
    }
    return res;
}

namespace {

double place_norm(const QVector& v, const Place& sigma) {
    if (sigma.is_infinite()) return svec_norm(v, sigma);
    return svec_norm_exact(v, sigma).to_double();
}

}  // namespace

double projective_distance_to(const QVector& v, const std::vector<std::size_t>& idx, const Place& sigma) {
    double nv = place_norm(v, sigma);
    if (nv == 0.0) throw SadicError("distance of the zero vector is undefined");
    QVector perp = v;
    for (auto i : idx) perp.at(i) = Rational(0);
    return place_norm(perp, sigma) / nv;
}

double wedge_distance(const QVector& v, const QVector& w, const Place& sigma) {
    if (v.size() != w.size()) throw SadicError("vectors differ in length");
    QVector pl;
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = i + 1; j < v.size(); ++j) pl.push_back(v[i] * w[j] - v[j] * w[i]);
    double den = place_norm(v, sigma) * place_norm(w, sigma);
    if (den == 0.0) throw SadicError("distance of the zero vector is undefined");
    return pl.empty() ? 0.0 : place_norm(pl, sigma) / den;
}

DirectionResult direction_test(const Walk& walk, const LieModel& model, const Place& sigma, const QVector& v, int m,
                               double eta, std::size_t n_words, std::uint64_t seed, const std::vector<double>& p) {
    if (walk.places.type(sigma) != PlaceType::ue) throw SadicError("direction test runs at S_ue places");
    if (v.size() != model.dim()) throw SadicError("vector has wrong length");
    if (m < 1 || n_words == 0) throw SadicError("need m >= 1 and at least one word");
    if (p.size() != walk.hbar.size()) throw SadicError("probability vector length differs from the number of maps");
    std::vector<QMatrix> ad;
    for (const auto& hb : walk.hbar) ad.push_back(adjoint(hb, sigma, model, false).mat);
    auto U = model.u_indices();
    std::vector<double> dists;
    for (std::size_t wi = 0; wi < n_words; ++wi) {
        Rng rng(derive_seed(seed, wi));
        QVector x = v;
        for (int j = 0; j < m; ++j) x = ad[static_cast<std::size_t>(rng.categorical(p))] * x;
        dists.push_back(projective_distance_to(x, U, sigma));
    }
    DirectionResult res;
    res.n_words = n_words;
    std::size_t hits = 0;
    for (double d : dists)
        if (d < eta) ++hits;
    res.fraction = static_cast<double>(hits) / static_cast<double>(n_words);
    res.clt_bar = fraction_bar(res.fraction, n_words);
    std::sort(dists.begin(), dists.end());
    res.median_distance = dists[dists.size() / 2];
    return res;
}

}  // namespace carpet

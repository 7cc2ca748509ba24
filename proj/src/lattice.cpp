#include "carpet/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "carpet/parallel.hpp"

namespace carpet {

QMatrix unipotent(const QVector& x) {
    std::size_t n = x.size() + 1;
    QMatrix u = QMatrix::identity(n);
    for (std::size_t i = 0; i < x.size(); ++i) u(i, n - 1) = x[i];
    return u;
}

ExactLattice embed(const QVector& x) { return {unipotent(x)}; }

FlowLattice embed(const std::vector<double>& x) {
    const auto n = static_cast<Eigen::Index>(x.size() + 1);
    FlowLattice L;
    L.basis = RMatrix::Identity(n, n);
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        if (!std::isfinite(x[static_cast<std::size_t>(i)])) throw LatticeError("embedded point must be finite");
        L.basis(i, n - 1) = x[static_cast<std::size_t>(i)];
    }
    return L;
}

FlowLattice to_flow(const ExactLattice& L) { return {L.basis.to_double(), 0.0}; }

WeightVector WeightVector::make(std::vector<double> r) {
    if (r.empty()) throw LatticeError("weight vector must be non-empty");
    double s = 0.0;
    for (double ri : r) {
        if (!(ri > 0.0)) throw LatticeError("weights must be positive");
        s += ri;
    }
    if (std::abs(s - 1.0) > 1e-12) throw LatticeError("weights must sum to 1");
    return {std::move(r)};
}

WeightVector WeightVector::equal(int d) {
    return make(std::vector<double>(static_cast<std::size_t>(d), 1.0 / d));
}

NormSpec NormSpec::make_custom(std::function<double(const RVector&)> f, double c_lo, double c_hi, int n) {
    if (!(c_lo > 0.0) || !(c_hi >= c_lo)) throw LatticeError("custom norm needs equivalence constants 0 < c_lo <= c_hi");
    Rng rng(0x5eedULL);
    for (int trial = 0; trial < 32; ++trial) {
        RVector v(n);
        for (int i = 0; i < n; ++i) v(i) = 2.0 * rng.uniform() - 1.0;
        double nv = f(v);
        double e = v.norm();
        if (!(nv > 0.0)) throw LatticeError("custom norm is not positive");
        double s = 0.5 + 3.0 * rng.uniform();
        if (std::abs(f(s * v) - s * nv) > 1e-9 * s * nv) throw LatticeError("custom norm is not homogeneous");
        if (std::abs(f(-v) - nv) > 1e-9 * nv) throw LatticeError("custom norm is not symmetric");
        if (nv < c_lo * e * (1 - 1e-12) || nv > c_hi * e * (1 + 1e-12))
            throw LatticeError("custom norm violates its equivalence constants");
    }
    return {NormKind::custom, std::move(f), c_lo, c_hi};
}

double NormSpec::operator()(const RVector& v) const {
    switch (kind) {
        case NormKind::sup: return v.cwiseAbs().maxCoeff();
        case NormKind::euclidean: return v.norm();
        default: return custom(v);
    }
}

double NormSpec::lower(int n) const {
    if (kind == NormKind::sup) return 1.0 / std::sqrt(static_cast<double>(n));
    return c_lo;
}

std::string NormSpec::name() const {
    switch (kind) {
        case NormKind::sup: return "sup";
        case NormKind::euclidean: return "euclidean";
        default: return "custom";
    }
}

DiagonalSequence DiagonalSequence::weighted(const WeightVector& r) {
    auto w = r.r;
    return {[w](double t) {
        std::vector<double> X;
        for (double ri : w) X.push_back(ri * t);
        X.push_back(-t);
        return X;
    }};
}

std::vector<double> DiagonalSequence::at(double t) const {
    std::vector<double> X = exponents(t);
    double s = 0.0, m = 0.0;
    for (double x : X) {
        s += x;
        m = std::max(m, std::abs(x));
    }
    if (std::abs(s) > 1e-12 * std::max(1.0, m)) throw LatticeError("diagonal exponents are not trace-zero");
    return X;
}

FlowLattice apply_diag(const FlowLattice& L, const std::vector<double>& X) {
    if (static_cast<Eigen::Index>(X.size()) != L.basis.rows()) throw LatticeError("exponent vector has wrong size");
    FlowLattice out = L;
    for (std::size_t i = 0; i < X.size(); ++i) {
        if (std::abs(X[i]) > 600.0) throw LatticeError("flow exponent exceeds the overflow guard (600)");
        out.basis.row(static_cast<Eigen::Index>(i)) *= std::exp(X[i]);
    }
    return out;
}

FlowLattice flow(const FlowLattice& L, const DiagonalSequence& a, double t) { return apply_diag(L, a.at(t)); }

RVector lattice_vector(const RMatrix& B, const IVector& c) {
    RVector v = RVector::Zero(B.rows());
    for (Eigen::Index j = 0; j < B.cols(); ++j)
        if (c(j) != 0) v += static_cast<double>(c(j)) * B.col(j);
    return v;
}

double condition_number(const RMatrix& B) {
    Eigen::JacobiSVD<RMatrix> svd(B);
    const auto& s = svd.singularValues();
    double lo = s(s.size() - 1);
    return lo > 0.0 ? s(0) / lo : INFINITY;
}

namespace {

struct GramSchmidt {
    RMatrix mu;
    RVector norms2;
};

GramSchmidt gram_schmidt(const RMatrix& B) {
    const Eigen::Index n = B.cols();
    GramSchmidt gs{RMatrix::Zero(n, n), RVector::Zero(n)};
    RMatrix star = B;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) {
            gs.mu(i, j) = B.col(i).dot(star.col(j)) / gs.norms2(j);
            star.col(i) -= gs.mu(i, j) * star.col(j);
        }
        gs.norms2(i) = star.col(i).squaredNorm();
        if (!(gs.norms2(i) > 0.0)) throw LatticeError("lattice basis is degenerate");
    }
    return gs;
}

}  // namespace

ReducedBasis lll_reduce(const RMatrix& B0, double delta) {
    const Eigen::Index n = B0.cols();
    RMatrix B = B0;
    IMatrix U = IMatrix::Identity(n, n);
    GramSchmidt gs = gram_schmidt(B);
    Eigen::Index k = 1;
    long guard = 0;
    while (k < n) {
        if (++guard > 200000) throw LatticeError("LLL did not terminate");
        for (Eigen::Index j = k - 1; j >= 0; --j) {
            double q = std::round(gs.mu(k, j));
            if (q == 0.0) continue;
            if (std::abs(q) > 9e15) throw LatticeError("LLL coefficient overflow");
            auto qi = static_cast<long long>(q);
            B.col(k) -= q * B.col(j);
            U.col(k) -= qi * U.col(j);
            for (Eigen::Index l = 0; l < j; ++l) gs.mu(k, l) -= q * gs.mu(j, l);
            gs.mu(k, j) -= q;
        }
        double m = gs.mu(k, k - 1);
        if (gs.norms2(k) >= (delta - m * m) * gs.norms2(k - 1)) {
            ++k;
        } else {
            B.col(k).swap(B.col(k - 1));
            U.col(k).swap(U.col(k - 1));
            gs = gram_schmidt(B);
            k = std::max<Eigen::Index>(k - 1, 1);
        }
    }
    ReducedBasis r;
    r.transform = U;
    r.basis.resize(B0.rows(), n);
    for (Eigen::Index j = 0; j < n; ++j) r.basis.col(j) = lattice_vector(B0, U.col(j));
    return r;
}

namespace {

/// All nonzero c with |R c|_2^2 <= r2, R reduced; calls visit(c).
template <class Visit>
void enumerate(const RMatrix& R, double r2, Visit&& visit) {
    const Eigen::Index n = R.cols();
    GramSchmidt gs = gram_schmidt(R);
    std::vector<long long> c(static_cast<std::size_t>(n), 0);
    IVector cv(n);
    // recursive lambda over levels n-1 .. 0
    auto rec = [&](auto&& self, Eigen::Index i, double used) -> void {
        double centre = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) centre -= gs.mu(j, i) * static_cast<double>(c[static_cast<std::size_t>(j)]);
        double rem = r2 - used;
        if (rem < 0.0) return;
        double span = std::sqrt(rem / gs.norms2(i));
        auto lo = static_cast<long long>(std::ceil(centre - span));
        auto hi = static_cast<long long>(std::floor(centre + span));
        for (long long v = lo; v <= hi; ++v) {
            double off = static_cast<double>(v) - centre;
            double u = used + off * off * gs.norms2(i);
            if (u > r2) continue;
            c[static_cast<std::size_t>(i)] = v;
            if (i == 0) {
                bool nonzero = false;
                for (auto x : c) nonzero = nonzero || x != 0;
                if (nonzero) {
                    for (Eigen::Index j = 0; j < n; ++j) cv(j) = c[static_cast<std::size_t>(j)];
                    visit(cv);
                }
            } else {
                self(self, i - 1, u);
            }
        }
        c[static_cast<std::size_t>(i)] = 0;
    };
    rec(rec, n - 1, 0.0);
}

IVector canonical_sign(IVector c) {
    for (Eigen::Index i = 0; i < c.size(); ++i) {
        if (c(i) == 0) continue;
        if (c(i) < 0) c = -c;
        break;
    }
    return c;
}

bool lex_less(const IVector& a, const IVector& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i)
        if (a(i) != b(i)) return a(i) < b(i);
    return false;
}

}  // namespace

ShortestVector shortest_vector(const RMatrix& B, const NormSpec& norm) {
    if (B.rows() != B.cols() || B.rows() == 0) throw LatticeError("basis must be square");
    if (norm.kind == NormKind::custom && (!(norm.c_lo > 0.0) || !norm.custom))
        throw LatticeError("custom norm needs equivalence constants");
    ReducedBasis red = lll_reduce(B);
    if (condition_number(red.basis) > 1e12) throw LatticeError("basis condition number exceeds 1e12 after reduction");
    const int n = static_cast<int>(B.cols());

    ShortestVector best;
    best.length = INFINITY;
    auto consider = [&](const IVector& c_red) {
        IVector c = canonical_sign(red.transform * c_red);
        RVector v = lattice_vector(B, c);
        double len = norm(v);
        if (len < best.length || (len == best.length && lex_less(c, best.coeffs))) {
            best.length = len;
            best.coeffs = c;
            best.vector = v;
        }
    };
    for (Eigen::Index j = 0; j < n; ++j) consider(IVector::Unit(n, j));
    double radius = best.length / norm.lower(n) * (1.0 + 1e-9) + 1e-300;
    enumerate(red.basis, radius * radius, consider);
    return best;
}

std::size_t count_points(const RMatrix& B, double R) {
    if (R <= 0.0) return 0;
    ReducedBasis red = lll_reduce(B);
    double slack = R * (1.0 + 1e-9);
    std::size_t count = 0;
    enumerate(red.basis, slack * slack, [&](const IVector& c_red) {
        if (lattice_vector(B, red.transform * c_red).norm() <= R) ++count;
    });
    return count;
}

DriftReport drift_check(const DiagonalSequence& a, int d, int N, double threshold) {
    if (N < 1) throw LatticeError("horizon must be positive");
    DriftReport rep;
    for (int n = 1; n <= N; ++n) {
        std::vector<double> X = a.at(n);
        if (static_cast<int>(X.size()) != d + 1) throw LatticeError("exponent vector has wrong size");
        rep.trace.push_back(*std::min_element(X.begin(), X.begin() + d));
    }
    bool increasing = true;
    for (int n = std::max(1, N / 2); n < N; ++n)
        increasing = increasing && rep.trace[static_cast<std::size_t>(n)] > rep.trace[static_cast<std::size_t>(n - 1)];
    rep.drifts = increasing && rep.trace.back() > threshold;
    return rep;
}

std::vector<SystolePoint> systole_trace(const std::vector<double>& x, const DiagonalSequence& a,
                                        const std::vector<double>& times, const NormSpec& norm) {
    FlowLattice L = embed(x);
    const Eigen::Index n = L.basis.rows();
    std::vector<double> prev(static_cast<std::size_t>(n), 0.0);
    std::vector<SystolePoint> out;
    int steps = 0;
    for (double t : times) {
        std::vector<double> X = a.at(t), dX(X.size());
        for (std::size_t i = 0; i < X.size(); ++i) {
            if (std::abs(X[i]) > 600.0) throw LatticeError("flow exponent exceeds the overflow guard (600)");
            dX[i] = X[i] - prev[i];
        }
        prev = X;
        L = apply_diag(L, dX);
        L.basis = lll_reduce(L.basis).basis;
        if (++steps % 32 == 0) {
            double det = L.basis.determinant();
            L.log_det_drift += std::abs(std::log(std::abs(det)));
            L.basis /= std::pow(std::abs(det), 1.0 / static_cast<double>(n));
        }
        SystolePoint p;
        p.t = t;
        p.lambda1_euclid = shortest_vector(L.basis, NormSpec::euclidean()).length;
        p.lambda1_norm = norm.kind == NormKind::euclidean ? p.lambda1_euclid : shortest_vector(L.basis, norm).length;
        out.push_back(p);
    }
    return out;
}

double ball_volume(int n, double R) {
    double h = 0.5 * n;
    return std::pow(std::numbers::pi, h) / std::tgamma(h + 1.0) * std::pow(R, n);
}

namespace {

RMatrix flowed_basis(const std::vector<double>& x, const std::vector<double>& X) {
    return apply_diag(embed(x), X).basis;
}

}  // namespace

ExperimentReport siegel_statistic(const CarpetIFS& f, const DiagonalSequence& a, double t, double R,
                                  std::size_t n_samples, std::uint64_t seed, int threads) {
    if (n_samples == 0) throw LatticeError("need at least one sample");
    const std::vector<double> X = a.at(t);
    if (static_cast<int>(X.size()) != f.d + 1) throw LatticeError("exponent vector has wrong size");
    auto parts = map_chunks<RunningStats>(n_samples, kChunk, threads, [&](std::size_t c, std::size_t b, std::size_t e) {
        ThetaSampler s(f, 64, derive_seed(seed, c));
        std::vector<double> x(static_cast<std::size_t>(f.d));
        RunningStats st;
        for (std::size_t i = b; i < e; ++i) {
            s.next(x.data());
            st.add(static_cast<double>(count_points(flowed_basis(x, X), R)));
        }
        return st;
    });
    RunningStats total;
    for (const auto& p : parts) total.merge(p);
    ExperimentReport rep = ExperimentReport::from(total, seed);
    rep.extra["target"] = ball_volume(f.d + 1, R);
    rep.extra["t"] = t;
    rep.extra["R"] = R;
    return rep;
}

std::vector<NondivRow> nondivergence_profile(const CarpetIFS& f, const DiagonalSequence& a, double t,
                                             const std::vector<double>& eps_ladder, std::size_t n_samples,
                                             std::uint64_t seed, int threads) {
    if (n_samples == 0) throw LatticeError("need at least one sample");
    const std::vector<double> X = a.at(t);
    if (static_cast<int>(X.size()) != f.d + 1) throw LatticeError("exponent vector has wrong size");
    auto parts = map_chunks<std::vector<double>>(n_samples, kChunk, threads, [&](std::size_t c, std::size_t b, std::size_t e) {
        ThetaSampler s(f, 64, derive_seed(seed, c));
        std::vector<double> x(static_cast<std::size_t>(f.d)), l1;
        for (std::size_t i = b; i < e; ++i) {
            s.next(x.data());
            l1.push_back(shortest_vector(flowed_basis(x, X)).length);
        }
        return l1;
    });
    std::vector<NondivRow> rows;
    for (double eps : eps_ladder) {
        std::size_t below = 0;
        for (const auto& p : parts)
            for (double l : p)
                if (l < eps) ++below;
        double frac = static_cast<double>(below) / static_cast<double>(n_samples);
        rows.push_back({eps, frac, fraction_bar(frac, n_samples)});
    }
    return rows;
}

}  // namespace carpet

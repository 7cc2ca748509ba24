#include <doctest.h>

#include <cmath>

#include "carpet/rng.hpp"
#include "carpet/sadic.hpp"

using namespace carpet;

namespace {

const Place kInf = Place::infinity();
Place P(std::uint64_t p) { return Place::prime(p); }

QMatrix m2(Rational a, Rational b, Rational c, Rational d) { return QMatrix(2, 2, {a, b, c, d}); }

Word random_word(Rng& rng, int k, int n) {
    Word w;
    for (int i = 0; i < n; ++i) w.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(k))) + 1);
    return w;
}

// |.|_sigma of a rational as a double
double absd(const Rational& x, const Place& s) { return abs_at_place(x, s).to_double(); }

// Ad(diag(a)) scales E_ij by a_i / a_j and fixes the diagonal; norm = max(1, |a_i/a_j|).
double diag_ad_norm(const QMatrix& g, const Place& s) {
    double best = 1.0;
    for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.rows(); ++j)
            if (i != j) best = std::max(best, absd(g(i, i) / g(j, j), s));
    return best;
}

struct Fixture {
    CarpetIFS ifs;
    PlacePartition places;
    Walk walk;
    LieModel model;
    explicit Fixture(CarpetIFS f)
        : ifs(std::move(f)), places(derive_places(ifs)), walk(build_walk(ifs, places)), model(ifs.d) {}
};

}  // namespace

TEST_CASE("places for the three reference systems") {
    auto m = derive_places(middle_thirds());
    CHECK(m.S == std::vector<Place>{kInf, P(3)});
    CHECK(m.ue == std::vector<Place>{P(3)});
    CHECK(m.dt == std::vector<Place>{kInf});
    CHECK(m.tr.empty());
    auto r = derive_places(rho23_example());
    CHECK(r.S == std::vector<Place>{kInf, P(2), P(3), P(5)});
    CHECK(r.ue == std::vector<Place>{P(3)});
    CHECK(r.dt == std::vector<Place>{kInf, P(2)});
    CHECK(r.tr == std::vector<Place>{P(5)});
    CHECK(r.type(P(5)) == PlaceType::tr);
    CHECK_FALSE(r.contains(P(7)));
    auto l = derive_places(lebesgue_interval());
    CHECK(l.S == std::vector<Place>{kInf, P(2)});
    CHECK(l.ue == std::vector<Place>{P(2)});
}

TEST_CASE("walk matrices for the middle-thirds system") {
    Fixture f(middle_thirds());
    const auto& w = f.walk;
    Rational t(1, 3);
    CHECK(w.h[0].at(P(3)) == m2(t, 0, 0, 1));
    CHECK(w.h[0].at(kInf) == m2(t, 0, 0, 1));
    CHECK(w.h[1].at(P(3)) == m2(t, Rational(-2, 3), 0, 1));
    CHECK(w.h[1].at(kInf) == m2(t, 0, 0, 1));
    for (const auto& k : w.k)
        for (const auto& p : f.places.S) CHECK(k.is_identity_at(p));
    CHECK(w.b.at(P(3)) == m2(3, 0, 0, 1));
}

TEST_CASE("walk identities hold on every reference system") {
    for (const auto& ifs : {middle_thirds(), rho23_example(), lebesgue_interval(), sierpinski_carpet()}) {
        Fixture f(ifs);
        CHECK(verify_k_factorisation(f.walk).ok);
        CHECK(verify_ue_agreement(f.walk).ok);
        QVector x(static_cast<std::size_t>(ifs.d), Rational(1, 4));
        CHECK(verify_crucial_identity(ifs, f.walk, x).ok);
        QVector zero(static_cast<std::size_t>(ifs.d));
        CHECK(verify_crucial_identity(ifs, f.walk, zero).ok);
    }
}

TEST_CASE("crucial identity: corrupted lambda is caught") {
    Fixture f(middle_thirds());
    auto bad = f.walk.lambda;
    for (auto& [p, m] : bad[1].mats) m(0, 1) = -m(0, 1);
    auto chk = verify_crucial_identity(f.ifs, f.walk, {Rational(1, 4)}, &bad);
    CHECK_FALSE(chk.ok);
    REQUIRE_FALSE(chk.failures.empty());
    CHECK(chk.failures[0].index == 2);
    CHECK(chk.failures[0].lhs != chk.failures[0].rhs);
}

TEST_CASE("solenoid and series identities") {
    Fixture f(rho23_example());
    Rng rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        std::map<Place, QVector> z;
        for (const auto& p : f.places.S) z.emplace(p, QVector{Rational(rng.between(-50, 50), rng.between(1, 30))});
        CHECK(verify_solenoid_identity(f.ifs, f.walk, z).ok);
    }
    for (long q : {2L, 3L, -5L, 7L})
        for (long a : {1L, -4L, 9L}) CHECK(verify_series_identity(Rational(a), BigInt(q)));
    CHECK_THROWS_AS(verify_series_identity(Rational(1), BigInt(1)), SadicError);
}

TEST_CASE("walk elements compare projectively") {
    Fixture f(rho23_example());
    WalkElement w = f.walk.h[0] * f.walk.h[1];
    WalkElement c = w;
    for (auto& [p, m] : c.mats) m = m * Rational(-7, 3);
    CHECK(w.projectively_equal(c));
    CHECK_FALSE(w.projectively_equal(f.walk.h[1] * f.walk.h[0]));
    CHECK((w * w.inverse()).projectively_equal(diagonal_embedding(QMatrix::identity(2), f.places)));
}

TEST_CASE("word products follow the stated order") {
    Fixture f(middle_thirds());
    Word w{1, 2, 2};
    auto fw = forward_product(f.walk.h, w);
    auto bw = backward_product(f.walk.h, w);
    CHECK(fw.at(P(3)) == f.walk.h[1].at(P(3)) * f.walk.h[1].at(P(3)) * f.walk.h[0].at(P(3)));
    CHECK(bw.at(P(3)) == f.walk.h[0].at(P(3)) * f.walk.h[1].at(P(3)) * f.walk.h[1].at(P(3)));
}

TEST_CASE("Lie model and the adjoint action") {
    LieModel m1(1);
    CHECK(m1.dim() == 3);
    CHECK(m1.u_indices().size() == 1);
    CHECK(m1.p_indices().size() == 2);
    LieModel m2d(2);
    CHECK(m2d.dim() == 8);
    CHECK(m2d.p_indices().size() == 6);
    Rng rng(3);
    for (int i = 0; i < 10; ++i) {
        QVector c;
        for (std::size_t j = 0; j < m2d.dim(); ++j) c.push_back(Rational(rng.between(-9, 9), rng.between(1, 5)));
        CHECK(m2d.coords(m2d.element(c)) == c);
        CHECK(m2d.element(c).trace() == Rational(0));
    }

    auto id = adjoint(QMatrix::identity(2), kInf, m1);
    CHECK(id.mat.is_identity());
    // Ad(diag(rho,1)^{-1}) on (e, h, f)
    Rational rho(1, 3);
    auto A = adjoint(m2(rho, 0, 0, 1).inverse(), P(3), m1);
    CHECK(A.mat == QMatrix(3, 3, {rho.inverse(), 0, 0, 0, 1, 0, 0, 0, rho}));
}

TEST_CASE("adjoint is multiplicative") {
    Fixture f(sierpinski_carpet());
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        auto a = forward_product(f.walk.hbar, random_word(rng, f.ifs.k(), 3));
        auto b = forward_product(f.walk.h, random_word(rng, f.ifs.k(), 2));
        for (const auto& p : f.places.S) {
            auto lhs = adjoint(a * b, p, f.model, false).mat;
            auto rhs = adjoint(a, p, f.model, false).mat * adjoint(b, p, f.model, false).mat;
            CHECK(lhs == rhs);
        }
    }
}

TEST_CASE("operator norms: identity, exact growth and the direct product oracle") {
    Fixture f(middle_thirds());
    CHECK(op_norm(adjoint(QMatrix::identity(2), P(3), f.model)).value_exact == Rational(1));
    // hbar_1^n at 3 is diag(3^-n, 1)
    for (int n = 1; n <= 12; ++n) {
        auto g = forward_product(f.walk.hbar, Word(static_cast<std::size_t>(n), 1));
        auto nm = op_norm(adjoint(g, P(3), f.model));
        CHECK(nm.exact);
        CHECK(nm.value_exact == Rational(3).pow(n));
    }
    auto audit = growth_audit(f.walk, f.model, {1, 5, 10, 20, 40}, 30, 7);
    for (const auto& row : audit.rows)
        if (row.place == P(3)) CHECK(row.log_norm == doctest::Approx(row.n * std::log(3.0)).epsilon(1e-12));
    CHECK(audit.empirical_C.at(P(3)) == doctest::Approx(1.0));

    // rho = 2/3 at 2: hbar is diagonal there, so Ad has a closed-form norm
    Fixture g(rho23_example());
    Rng rng(9);
    for (int n = 1; n <= 20; ++n) {
        auto w = forward_product(g.walk.hbar, random_word(rng, 2, n));
        const QMatrix& m = w.at(P(2));
        double direct = diag_ad_norm(m, P(2));
        CHECK(direct == doctest::Approx(std::pow(2.0, n)));
        CHECK(op_norm(adjoint(w, P(2), g.model)).value == doctest::Approx(direct));
        // S_tr: trivial
        CHECK(op_norm(adjoint(w, P(5), g.model)).value == doctest::Approx(1.0));
    }
}

TEST_CASE("growth audit at infinity stays within a constant") {
    Fixture f(middle_thirds());
    auto audit = growth_audit(f.walk, f.model, {10, 20, 40, 80}, 40, 3);
    for (const auto& row : audit.rows) {
        CHECK(row.log_norm >= row.bound_lo - 1e-9);
        CHECK(row.log_norm <= row.bound_hi + 1e-9);
        if (row.place == kInf) CHECK(row.log_norm / row.n == doctest::Approx(std::log(3.0)).epsilon(0.2));
    }
    CHECK(audit.empirical_C.at(kInf) < 10.0);
}

TEST_CASE("prefix swap elements") {
    Fixture f(middle_thirds());
    // the product cancels when a_i = b_{n+1-i}: equal words at n = 1, palindromes, reversed pairs
    auto one = prefix_swap_gamma(f.ifs, f.walk, {2, 1}, {2, 2}, 1);
    auto pal = prefix_swap_gamma(f.ifs, f.walk, {1, 2, 1}, {1, 2, 1}, 3);
    auto rev = prefix_swap_gamma(f.ifs, f.walk, {1, 1, 2}, {2, 1, 1}, 3);
    for (const auto* r : {&one, &pal, &rev}) {
        for (const auto& p : f.places.S) CHECK(r->gamma.is_identity_at(p));
        CHECK(r->y0 == QVector{Rational(0)});
    }
    // equal non-palindromic prefixes do not cancel
    auto same = prefix_swap_gamma(f.ifs, f.walk, {1, 2}, {1, 2}, 2);
    CHECK_FALSE(same.gamma.is_identity_at(P(3)));
    CHECK(same.y0 == QVector{Rational(2, 9) - Rational(2, 3)});

    auto g = prefix_swap_gamma(f.ifs, f.walk, {1}, {2}, 1);
    CHECK(g.y0 == QVector{Rational(2, 3)});
    CHECK(g.y0_closed_form == g.y0);
    CHECK(op_norm(g.gamma.at(P(3)), P(3)).value_exact == Rational(3));
    CHECK(g.gamma.is_identity_at(kInf));

    Rng rng(11);
    for (const auto& ifs : {middle_thirds(), rho23_example(), sierpinski_carpet()}) {
        Fixture h(ifs);
        for (int trial = 0; trial < 100; ++trial) {
            int n = static_cast<int>(rng.between(1, 8));
            Word a = random_word(rng, ifs.k(), n + 2), b = random_word(rng, ifs.k(), n);
            auto r = prefix_swap_gamma(ifs, h.walk, a, b, n);
            CHECK(r.identity_off_ue);
            CHECK(r.y0 == r.y0_closed_form);
            for (const auto& p : h.places.S)
                if (h.places.type(p) != PlaceType::ue) CHECK(r.gamma.is_identity_at(p));
        }
    }
}

TEST_CASE("prefix swap norm is comparable to |rho|^n") {
    Fixture f(middle_thirds());
    Rng rng(4);
    for (int n = 1; n <= 8; ++n) {
        Word b = random_word(rng, 2, n);
        Rational best(0);
        for (std::uint64_t mask = 0; mask < (1u << n); ++mask) {
            Word a;
            for (int j = 0; j < n; ++j) a.push_back(static_cast<int>((mask >> j) & 1u) + 1);
            best = std::max(best, op_norm(prefix_swap_gamma(f.ifs, f.walk, a, b, n).gamma.at(P(3)), P(3)).value_exact);
        }
        double ratio = best.to_double() / std::pow(3.0, n);
        CHECK(ratio >= 1.0 / 3.0);
        CHECK(ratio <= 3.0);
    }
}

TEST_CASE("lambda words are trivial at all places or at none") {
    Fixture f(rho23_example());
    std::vector<WalkElement> gens = f.walk.lambda;
    for (const auto& l : f.walk.lambda) gens.push_back(l.inverse());
    Rng rng(8);
    int trivial = 0;
    for (int trial = 0; trial < 200; ++trial) {
        auto w = forward_product(gens, random_word(rng, static_cast<int>(gens.size()), static_cast<int>(rng.between(1, 6))));
        std::size_t ids = 0;
        for (const auto& p : f.places.S) ids += w.is_identity_at(p) ? 1 : 0;
        CHECK((ids == 0 || ids == f.places.S.size()));
        if (ids) ++trivial;
    }
    CHECK(trivial > 0);
}

TEST_CASE("centralizers") {
    Fixture f(middle_thirds());
    CHECK(centralizer_at(f.walk, f.model, P(3)).cols() == 0);
    auto zi = centralizer_at(f.walk, f.model, kInf);
    REQUIRE(zi.cols() == 1);
    // diagonal line: only the H coordinate
    CHECK(zi(0, 0) == Rational(0));
    CHECK(zi(2, 0) == Rational(0));
    Fixture r(rho23_example());
    CHECK(centralizer_at(r.walk, r.model, P(5)).cols() == 3);
    Fixture s(sierpinski_carpet());
    auto z2 = centralizer_at(s.walk, s.model, kInf);
    CHECK(z2.cols() == 4);
    auto bd = s.model.coordinate_subspace(s.model.block_diagonal_indices());
    CHECK(span_contains(bd, z2));
    CHECK(span_contains(z2, bd));
}

TEST_CASE("subalgebra suite") {
    for (const auto& ifs : {middle_thirds(), rho23_example(), lebesgue_interval(), sierpinski_carpet()}) {
        Fixture f(ifs);
        auto suite = subalgebra_suite(f.walk, f.model);
        CHECK(suite.all_ok());
        for (const auto& c : suite.certificates) {
            INFO(c.name, " at ", c.place.str());
            CHECK(c.ok);
        }
        const std::size_t d = static_cast<std::size_t>(ifs.d);
        for (const auto& p : f.places.S) {
            CHECK(suite.spaces.at(p).at("u").cols() == d);
            CHECK(suite.spaces.at(p).at("p").cols() == d * d + d);
        }
    }
    Fixture f(middle_thirds());
    auto suite = subalgebra_suite(f.walk, f.model);
    CHECK(suite.spaces.at(P(3)).at("w_bc") == suite.spaces.at(P(3)).at("u"));
    // Ad(hbar_i) multiplies u by rho
    QVector e{Rational(1), Rational(0), Rational(0)};
    for (const auto& hb : f.walk.hbar)
        CHECK(adjoint(hb, P(3), f.model).mat * e == QVector{Rational(1, 3), Rational(0), Rational(0)});
}

TEST_CASE("exterior powers") {
    Fixture f(middle_thirds());
    auto r1 = exterior_power_invariance(f.walk, f.model, P(3), 1);
    CHECK(r1.invariant);
    CHECK(r1.basis == std::vector<std::vector<std::size_t>>{{0}});
    auto r2 = exterior_power_invariance(f.walk, f.model, P(3), 2);
    CHECK(r2.invariant);
    CHECK(r2.basis.size() == 1);
    CHECK(all_subsets(4, 2).size() == 6);
    // compound of a product is the product of compounds
    QMatrix A(3, 3, {1, 2, 0, Rational(1, 2), -1, 3, 0, 4, 1});
    QMatrix B(3, 3, {2, 0, 1, 1, 1, 0, -3, 2, Rational(1, 3)});
    CHECK(compound_matrix(A * B, 2) == compound_matrix(A, 2) * compound_matrix(B, 2));
    CHECK(compound_matrix(A, 3)(0, 0) == A.det());
}

TEST_CASE("projective distances") {
    QVector v{Rational(1), Rational(0), Rational(0)};
    CHECK(projective_distance_to(v, {0}, P(3)) == 0.0);
    CHECK(wedge_distance(v, v, kInf) == 0.0);
    QVector w{Rational(0), Rational(1), Rational(0)};
    CHECK(wedge_distance(v, w, P(3)) == doctest::Approx(1.0));
    CHECK(projective_distance_to(w, {0}, kInf) == doctest::Approx(1.0));
}

TEST_CASE("directions converge to u at the unstable place") {
    Fixture f(middle_thirds());
    QVector fv{Rational(0), Rational(0), Rational(1)};
    auto r = direction_test(f.walk, f.model, P(3), fv, 25, std::pow(3.0, -5), 400, 6, {0.5, 0.5});
    CHECK(r.n_words == 400);
    CHECK(r.fraction >= 0.9);
}

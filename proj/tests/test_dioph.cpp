#include <doctest.h>

#include <cmath>
#include <limits>

#include "carpet/dioph.hpp"
#include "carpet/rng.hpp"

using namespace carpet;

namespace {

const WeightVector kOne = WeightVector::make({1.0});

// min over convergent denominators q_n <= T of q_n |q_n x - p_n|, from the continued fraction of x in (0,1)
long double convergent_min(const std::vector<long>& partial_quotients, long double x, long T) {
    long double best = std::numeric_limits<long double>::infinity();
    long qm2 = 0, qm1 = 1;  // q_{-2}, q_{-1}
    for (long a : partial_quotients) {
        long q = a * qm1 + qm2;
        if (q > T) break;
        long double v = static_cast<long double>(q) * x;
        best = std::min(best, static_cast<long double>(q) * std::fabs(v - std::round(v)));
        qm2 = qm1;
        qm1 = q;
    }
    return best;
}

double inf_systole(const std::vector<double>& x, const WeightVector& r, double T, const NormSpec& norm) {
    std::vector<double> times;
    for (double t = 0.0; t <= std::log(T); t += 0.01) times.push_back(t);
    double m = std::numeric_limits<double>::infinity();
    for (const auto& p : systole_trace(x, DiagonalSequence::weighted(r), times, norm)) m = std::min(m, p.lambda1_norm);
    return m;
}

struct PanelPoint {
    std::vector<double> x;
    bool rational;
};

std::vector<PanelPoint> panel(int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<PanelPoint> out;
    const long Ds[] = {2, 3, 5, 6, 7, 10, 11, 13};
    for (int i = 0; i < n; ++i) {
        if (i % 2 == 0) {
            long q = rng.between(2, 50), p = rng.between(1, q - 1);
            out.push_back({{static_cast<double>(p) / static_cast<double>(q)}, true});
        } else {
            long D = Ds[rng.below(8)];
            double v = std::sqrt(static_cast<double>(D));
            out.push_back({{v - std::floor(v)}, false});
        }
    }
    return out;
}

}  // namespace

TEST_CASE("coordinates parse exactly") {
    CHECK(std::get<Rational>(parse_coordinate("3/9")) == Rational(1, 3));
    CHECK(std::get<Rational>(parse_coordinate("0.125")) == Rational(1, 8));
    CHECK(std::get<Rational>(parse_coordinate("-2.5")) == Rational(-5, 2));
    auto g = parse_coordinate("q:-1/2:1/2:5");
    CHECK(to_double(g) == doctest::Approx((std::sqrt(5.0) - 1.0) / 2.0));
    CHECK_THROWS(parse_coordinate("q:1:1:4"));
    CHECK_THROWS(parse_coordinate("abc"));
}

TEST_CASE("ba_test: rational points and zero") {
    auto rep = ba_test(std::vector<Coordinate>{Rational(3, 7)}, kOne, 100);
    CHECK(rep.min_margin == 0.0);
    CHECK(rep.argmin_Q == 7);
    CHECK(ba_test(std::vector<double>{0.0}, kOne, 50).min_margin == 0.0);
    auto w = WeightVector::make({0.5, 0.5});
    CHECK(ba_test(std::vector<Coordinate>{Rational(1, 4), Rational(5, 6)}, w, 30).min_margin == 0.0);
    CHECK(ba_test(std::vector<Coordinate>{Rational(1, 4), Rational(5, 6)}, w, 11).min_margin > 0.0);
}

TEST_CASE("ba_test: running minimum is nonincreasing") {
    auto rep = ba_test(std::vector<double>{0.318309886}, kOne, 5000, {10, 100, 1000, 5000});
    for (std::size_t i = 1; i < rep.margin_trace.size(); ++i) {
        CHECK(rep.margin_trace[i].first > rep.margin_trace[i - 1].first);
        CHECK(rep.margin_trace[i].second < rep.margin_trace[i - 1].second);
    }
    REQUIRE(rep.checkpoints.size() == 4);
    for (std::size_t i = 1; i < 4; ++i) CHECK(rep.checkpoints[i].second <= rep.checkpoints[i - 1].second);
    CHECK(rep.checkpoints.back().second == rep.min_margin);
}

TEST_CASE("ba_test: golden ratio against its continued fraction") {
    auto rep = ba_test(std::vector<Coordinate>{parse_coordinate("q:-1/2:1/2:5")}, kOne, 10000);
    CHECK(rep.min_margin >= 0.2);
    long double x = (std::sqrt(5.0L) - 1.0L) / 2.0L;
    long double oracle = convergent_min(std::vector<long>(40, 1), x, 10000);
    CHECK(rep.min_margin == doctest::Approx(static_cast<double>(oracle)).epsilon(1e-9));
    // sqrt 2 - 1 = [0; 2, 2, 2, ...]
    auto s2 = ba_test(std::vector<Coordinate>{parse_coordinate("q:-1:1:2")}, kOne, 10000);
    long double o2 = convergent_min(std::vector<long>(40, 2), std::sqrt(2.0L) - 1.0L, 10000);
    CHECK(s2.min_margin == doctest::Approx(static_cast<double>(o2)).epsilon(1e-9));
}

TEST_CASE("ba_test: invariant under integer shifts") {
    Rng rng(6);
    auto w = WeightVector::make({0.3, 0.7});
    for (int i = 0; i < 20; ++i) {
        long q = rng.between(200, 5000);
        Rational a(rng.between(1, q - 1), q), b(rng.between(1, q - 1), q);
        auto r0 = ba_test(std::vector<Coordinate>{a, b}, w, 400);
        Rational sa = a + Rational(rng.between(-9, 9)), sb = b + Rational(rng.between(-9, 9));
        auto r1 = ba_test(std::vector<Coordinate>{sa, sb}, w, 400);
        CHECK(r0.min_margin == r1.min_margin);
        CHECK(r0.argmin_Q == r1.argmin_Q);
        CHECK(r0.margin_trace == r1.margin_trace);
    }
}

TEST_CASE("critical radius: sup and the hexagonal lattice") {
    for (int d = 1; d <= 4; ++d) {
        auto c = critical_radius(NormSpec::sup(), d);
        CHECK(c.epsilon_norm == 1.0);
        CHECK(c.provenance == RadiusProvenance::exact);
        // Z^{d+1} has no nonzero point in the open unit cube
        CHECK(shortest_vector(RMatrix::Identity(d + 1, d + 1), NormSpec::sup()).length == 1.0);
    }
    auto e = critical_radius(NormSpec::euclidean(), 1);
    CHECK(e.epsilon_norm == doctest::Approx(std::pow(4.0 / 3.0, 0.25)));
    // covolume-one hexagonal lattice, shortest vector by enumeration
    double s = std::sqrt(2.0 / std::sqrt(3.0));
    double best = 1e9;
    for (int i = -6; i <= 6; ++i)
        for (int j = -6; j <= 6; ++j)
            if (i || j) best = std::min(best, s * std::hypot(i + 0.5 * j, j * std::sqrt(3.0) / 2.0));
    CHECK(e.epsilon_norm == doctest::Approx(best).epsilon(1e-12));
    CHECK(critical_radius(NormSpec::euclidean(), 2).provenance == RadiusProvenance::lower_bound);
    auto l1 = NormSpec::make_custom([](const RVector& u) { return u.lpNorm<1>(); }, 1.0, std::sqrt(2.0), 2);
    CHECK_THROWS_AS(critical_radius(l1, 1), DiophError);
    CHECK(critical_radius(l1, 1, 1.3).provenance == RadiusProvenance::user_supplied);
}

TEST_CASE("dirichlet_test: rejects vacuous eps") {
    CHECK_THROWS_AS(dirichlet_test({0.3}, kOne, NormSpec::sup(), 1.0, 1.0, 5.0), DiophError);
    CHECK_THROWS_AS(dirichlet_test({0.3}, kOne, NormSpec::sup(), 0.5, 1.0, 5.0, 0.5), DiophError);
}

TEST_CASE("dirichlet_test: zero and the golden ratio") {
    // x = 0: e_2 shrinks like e^{-t}
    auto z = dirichlet_test({0.0}, kOne, NormSpec::sup(), 0.5, 1.0, 8.0);
    CHECK(z.always_below);
    auto g = dirichlet_test({(std::sqrt(5.0) - 1.0) / 2.0}, kOne, NormSpec::sup(), 0.5, 1.0, 12.0);
    CHECK_FALSE(g.always_below);
    REQUIRE(g.arithmetic_always_below.has_value());
    CHECK_FALSE(*g.arithmetic_always_below);
    auto ge = dirichlet_test({(std::sqrt(5.0) - 1.0) / 2.0}, kOne, NormSpec::euclidean(), 0.5, 1.0, 12.0);
    CHECK_FALSE(ge.always_below);
    CHECK_FALSE(ge.arithmetic_always_below.has_value());
}

TEST_CASE("sup Dirichlet: pointwise and interval forms agree") {
    Rng rng(12);
    for (int i = 0; i < 30; ++i) {
        std::vector<double> x{rng.uniform(), rng.uniform()};
        auto w = WeightVector::make({0.4, 0.6});
        double eps = 0.5 + 0.45 * rng.uniform();
        bool all = true;
        for (double t = 1.0; t <= 6.0; t += 0.01) all = all && sup_dirichlet_at(x, w, eps, t);
        bool cov = sup_dirichlet_covered(x, w, eps, 1.0, 6.0);
        // the interval form is exact, the grid can only miss gaps
        if (cov) CHECK(all);
    }
}

TEST_CASE("dynamical and arithmetic sup verdicts agree on a panel") {
    int agree = 0;
    auto pts = panel(50, 21);
    for (const auto& p : pts) {
        auto rep = dirichlet_test(p.x, kOne, NormSpec::sup(), 0.7, 1.0, 9.0);
        REQUIRE(rep.arithmetic_always_below.has_value());
        if (*rep.arithmetic_always_below == rep.always_below) ++agree;
        CHECK(*rep.grid_agreement >= 0.99);
    }
    CHECK(agree == 50);
}

TEST_CASE("BA margins and systole lower bounds agree on a panel") {
    const long T = 10000;
    for (const auto& p : panel(50, 33)) {
        double margin = ba_test(p.x, kOne, T).min_margin;
        double sys = inf_systole(p.x, kOne, static_cast<double>(T), NormSpec::sup());
        bool ba = margin >= 0.01, bounded = sys >= 0.05;
        CHECK(ba == bounded);
        CHECK(ba == !p.rational);
    }
}

TEST_CASE("badly approximable panel points are Dirichlet improvable up to the horizon") {
    for (const auto& p : panel(50, 33)) {
        if (ba_test(p.x, kOne, 10000).min_margin < 0.01) continue;
        bool some = false;
        for (double eps : {0.99, 0.95, 0.9}) some = some || sup_dirichlet_covered(p.x, kOne, eps, 1.0, std::log(1e4));
        CHECK(some);
    }
}

TEST_CASE("measure zero experiment: c = 0 and monotone fractions") {
    MeasureZeroOptions opt;
    opt.thresholds = {0.0, 0.01};
    opt.T_ladder = {100, 1000};
    opt.n_samples = 300;
    opt.seed = 4;
    auto rows = measure_zero_experiment(middle_thirds(), kOne, opt);
    REQUIRE(rows.size() == 6);
    double prev = 2.0;
    for (const auto& row : rows) {
        if (row.kind == "ba" && row.threshold == 0.0) CHECK(row.fraction == 1.0);
        if (row.kind == "ba" && row.threshold == 0.01) {
            CHECK(row.fraction <= prev);
            prev = row.fraction;
        }
    }
    opt.threads = 3;
    auto again = measure_zero_experiment(middle_thirds(), kOne, opt);
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(again[i].fraction == rows[i].fraction);
}

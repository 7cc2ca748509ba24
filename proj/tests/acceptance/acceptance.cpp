// Acceptance checks. One PASS/FAIL line per criterion; tolerances and time limits are pinned below.
//   acceptance        run every criterion
//   acceptance c3     run one

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "carpet/dioph.hpp"
#include "carpet/ifs.hpp"
#include "carpet/lattice.hpp"
#include "carpet/rng.hpp"
#include "carpet/sadic.hpp"
#include "carpet/shift.hpp"

using namespace carpet;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

Word random_word(Rng& rng, int k, int n) {
    Word w;
    for (int i = 0; i < n; ++i) w.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(k))) + 1);
    return w;
}

Rational random_rational(Rng& rng) { return Rational(rng.between(-99, 99), rng.between(1, 60)); }

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// ---------------------------------------------------------------------------

Verdict c1() {
    Rng rng(101);
    std::ostringstream why;
    bool ok = true;
    std::size_t checks = 0;
    for (const auto& ifs : {middle_thirds(), sierpinski_carpet(), rho23_example()}) {
        auto P = derive_places(ifs);
        auto walk = build_walk(ifs, P);
        LieModel model(ifs.d);
        for (int i = 0; i < 20; ++i) {
            QVector x;
            for (int j = 0; j < ifs.d; ++j) x.push_back(random_rational(rng));
            bool c = verify_crucial_identity(ifs, walk, x).ok;
            ok = ok && c;
            ++checks;
            if (!c) why << " crucial identity failed;";
        }
        if (!verify_k_factorisation(walk).ok) ok = false, why << " k factorisation failed;";
        for (int i = 0; i < 50; ++i) {
            auto a = forward_product(walk.hbar, random_word(rng, ifs.k(), static_cast<int>(rng.between(1, 6))));
            auto b = forward_product(walk.hbar, random_word(rng, ifs.k(), static_cast<int>(rng.between(1, 6))));
            for (const auto& p : P.S) {
                bool f = adjoint(a * b, p, model).mat == adjoint(a, p, model).mat * adjoint(b, p, model).mat;
                ok = ok && f;
                ++checks;
                if (!f) why << " Ad functoriality failed at " << p.str() << ";";
            }
        }
        auto suite = subalgebra_suite(walk, model, false);
        for (const auto& c : suite.certificates) {
            ++checks;
            if (!c.ok) ok = false, why << " certificate '" << c.name << "' failed at " << c.place.str() << ";";
        }
        for (int i = 0; i < 100; ++i) {
            int n = static_cast<int>(rng.between(1, 12));
            Word a = random_word(rng, ifs.k(), n), b = random_word(rng, ifs.k(), n);
            try {
                auto g = prefix_swap_gamma(ifs, walk, a, b, n);
                bool good = g.identity_off_ue && g.y0 == g.y0_closed_form;
                for (const auto& p : P.S) {
                    if (P.type(p) == PlaceType::ue) good = good && g.gamma.at(p) == unipotent(g.y0);
                    else good = good && g.gamma.is_identity_at(p);
                }
                ok = ok && good;
                if (!good) why << " gamma mismatch;";
            } catch (const SadicError& e) {
                ok = false;
                why << ' ' << e.what() << ';';
            }
            ++checks;
        }
    }
    return {ok, std::to_string(checks) + " exact checks on 3 systems" + why.str()};
}

Verdict c2() {
    auto ifs = middle_thirds();
    auto walk = build_walk(ifs, derive_places(ifs));
    LieModel model(1);
    Rng rng(202);
    const Place three = Place::prime(3);
    bool exact_ok = true;
    for (int n = 1; n <= 40; ++n)
        for (int w = 0; w < 5; ++w) {
            auto g = forward_product(walk.hbar, random_word(rng, 2, n));
            auto nm = op_norm(adjoint(g, three, model, false));
            exact_ok = exact_ok && nm.exact && nm.value_exact == Rational(3).pow(n);
        }
    std::vector<int> lengths;
    for (int n = 1; n <= 40; ++n) lengths.push_back(n);
    auto audit = growth_audit(walk, model, lengths, 50, 7);
    const double lo = std::log(3.0) - 0.2, hi = std::log(3.0) + 0.2;
    double worst_lo = 1e9, worst_hi = -1e9;
    bool inf_ok = true;
    for (const auto& row : audit.rows) {
        if (!row.place.is_infinite() || row.n < 10) continue;
        double rate = row.log_norm / row.n;
        worst_lo = std::min(worst_lo, rate);
        worst_hi = std::max(worst_hi, rate);
        inf_ok = inf_ok && rate >= lo && rate <= hi;
    }
    return {exact_ok && inf_ok, std::string("|Ad|_3 = 3^n exactly: ") + (exact_ok ? "yes" : "no") + "; rate at inf in [" +
                                    fmt("%.4f", worst_lo) + ", " + fmt("%.4f", worst_hi) + "], allowed [" + fmt("%.4f", lo) +
                                    ", " + fmt("%.4f", hi) + "]"};
}

Verdict c3() {
    auto B = ShiftSpace::uniform(2);
    ErgodicOptions ex;
    ex.reference = Reference::exact;
    ex.n_tails = 100;
    ex.seed = 303;
    bool cyl_ok = true;
    for (int depth = 1; depth <= 3; ++depth) {
        std::vector<CompletePrefixSet> sets;
        for (int n = depth; n <= 6; ++n) sets.push_back(CompletePrefixSet::uniform(2, n));
        Rng rng(static_cast<std::uint64_t>(depth));
        for (int c = 0; c < 3; ++c) {
            auto rows = ergodic_convergence_test(B, WordFunctional::cylinder(random_word(rng, 2, depth)), sets, ex);
            for (const auto& r : rows) cyl_ok = cyl_ok && r.exact && r.max_dev == 0.0;
        }
    }
    std::vector<CompletePrefixSet> sets;
    for (int n = 1; n <= 12; ++n) sets.push_back(CompletePrefixSet::uniform(2, n));
    ErgodicOptions mc;
    mc.reference = Reference::monte_carlo;
    mc.n_tails = 100;
    mc.ref_samples = 1000000;
    mc.seed = 303;
    auto rows = ergodic_convergence_test(B, WordFunctional::weighted_hits(1, 12), sets, mc);
    const auto& last = rows.back();
    bool lip_ok = last.n == 12 && last.max_dev <= 3.0 * last.clt_bar;
    return {cyl_ok && lip_ok, std::string("cylinder deviations all zero: ") + (cyl_ok ? "yes" : "no") +
                                  "; depth-12 max_dev " + fmt("%.3g", last.max_dev) + " vs 3 bars " +
                                  fmt("%.3g", 3.0 * last.clt_bar)};
}

Verdict c4() {
    bool ok = true;
    std::ostringstream why;
    for (const auto& ifs : {middle_thirds(), sierpinski_carpet(), rho23_example()}) {
        auto P = derive_places(ifs);
        auto walk = build_walk(ifs, P);
        LieModel model(ifs.d);
        for (const auto& p : P.ue) {
            auto z = centralizer_at(walk, model, p);
            if (z.cols() != 0) ok = false, why << " z at " << p.str() << " has dim " << z.cols() << ';';
        }
        auto z = centralizer_at(walk, model, Place::infinity());
        auto bd = model.coordinate_subspace(model.block_diagonal_indices());
        auto dd = static_cast<std::size_t>(ifs.d * ifs.d);
        bool same = z.cols() == dd && span_contains(bd, z) && span_contains(z, bd);
        if (!same) ok = false, why << " z at inf has dim " << z.cols() << " (want " << dd << ");";
        why << " d=" << ifs.d << ": dim z_inf " << z.cols() << ';';
    }
    return {ok, "z = 0 on S_ue, z_inf block diagonal." + why.str()};
}

Verdict c5() {
    auto ifs = middle_thirds();
    auto a = DiagonalSequence::weighted(WeightVector::make({1.0}));
    const double target = std::numbers::pi * 1.5 * 1.5;
    auto rep = siegel_statistic(ifs, a, 8.0, 1.5, 10000, 1);
    double rel = std::abs(rep.estimate - target) / target;
    bool within5 = rel <= 0.05, within3 = std::abs(rep.estimate - target) <= 3.0 * rep.clt_bar;
    auto nd = nondivergence_profile(ifs, a, 8.0, {0.05}, 10000, 1);
    bool nd_ok = nd[0].fraction < 0.05;
    // diagnostic only: the same statistic further along the flow
    auto later = siegel_statistic(ifs, a, 12.0, 1.5, 10000, 1);
    return {within5 && within3 && nd_ok,
            "t=8 estimate " + fmt("%.4f", rep.estimate) + " +- " + fmt("%.4f", rep.clt_bar) + " vs " + fmt("%.4f", target) +
                " (rel err " + fmt("%.3f", rel) + "); P[l1<0.05] = " + fmt("%.4f", nd[0].fraction) +
                "; diagnostic t=12 estimate " + fmt("%.4f", later.estimate) + " +- " + fmt("%.4f", later.clt_bar)};
}

Verdict c6() {
    MeasureZeroOptions opt;
    opt.thresholds = {0.01};
    opt.T_ladder = {100, 1000, 10000};
    opt.dirichlet_eps = 0.9 * critical_radius(NormSpec::sup(), 1).epsilon_norm;
    opt.dirichlet_t0 = 1.0;
    opt.n_samples = 2000;
    opt.seed = 606;
    auto rows = measure_zero_experiment(middle_thirds(), WeightVector::make({1.0}), opt);
    std::map<std::string, std::vector<DecayRow>> by;
    for (const auto& r : rows) by[r.kind].push_back(r);
    bool ok = true;
    std::ostringstream d;
    for (const auto& [kind, rs] : by) {
        d << ' ' << kind << ':';
        for (std::size_t i = 0; i < rs.size(); ++i) {
            d << ' ' << fmt("%.4f", rs[i].fraction);
            if (i == 0) continue;
            double bar = std::hypot(rs[i].clt_bar, rs[i - 1].clt_bar);
            ok = ok && rs[i].fraction <= rs[i - 1].fraction + 2.0 * bar;
        }
        d << ';';
    }
    return {ok, "fractions at T = 1e2, 1e3, 1e4:" + d.str()};
}

Verdict c7() {
    const long T = 10000;
    const WeightVector r = WeightVector::make({1.0});
    auto inf_systole = [&](double x) {
        std::vector<double> times;
        for (double t = 0.0; t <= std::log(static_cast<double>(T)); t += 0.01) times.push_back(t);
        double m = 1e9;
        for (const auto& p : systole_trace({x}, DiagonalSequence::weighted(r), times, NormSpec::sup()))
            m = std::min(m, p.lambda1_norm);
        return m;
    };
    auto golden = parse_coordinate("q:-1/2:1/2:5");
    double gm = ba_test(std::vector<Coordinate>{golden}, r, T).min_margin;
    double gs = inf_systole(to_double(golden));
    bool ok = gm >= 0.2 && gs >= 0.2;
    std::ostringstream d;
    d << "golden margin " << fmt("%.4f", gm) << ", inf systole " << fmt("%.4f", gs) << "; rationals:";
    Rng rng(707);
    for (int i = 0; i < 5; ++i) {
        long q = rng.between(2, 50), p = rng.between(1, q - 1);
        Rational x(p, q);
        double m = ba_test(std::vector<Coordinate>{x}, r, T).min_margin;
        double s = inf_systole(x.to_double());
        ok = ok && m == 0.0 && s < 0.2;
        d << ' ' << x.str() << " (margin " << m << ", systole " << fmt("%.2g", s) << ')';
    }
    return {ok, d.str()};
}

Verdict c8() {
    Rng rng(808);
    int mismatches = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const int n = trial % 2 ? 3 : 2;
        RMatrix B(n, n);
        do {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) B(i, j) = 2.0 * rng.uniform() - 1.0;
        } while (std::abs(B.determinant()) < 0.2 || condition_number(B) > 8.0);
        B /= std::pow(std::abs(B.determinant()), 1.0 / n);
        double fast = shortest_vector(B).length;
        double slow = 1e300;
        std::vector<int> c(static_cast<std::size_t>(n), -10);
        while (true) {
            RVector v = RVector::Zero(n);
            bool zero = true;
            for (int j = 0; j < n; ++j) {
                v += c[static_cast<std::size_t>(j)] * B.col(j);
                zero = zero && c[static_cast<std::size_t>(j)] == 0;
            }
            if (!zero) slow = std::min(slow, v.norm());
            int j = 0;
            while (j < n && c[static_cast<std::size_t>(j)] == 10) c[static_cast<std::size_t>(j++)] = -10;
            if (j == n) break;
            ++c[static_cast<std::size_t>(j)];
        }
        // same minimiser; only the summation order of its coordinates differs
        if (std::abs(fast - slow) > 1e-12 * slow) ++mismatches;
    }
    auto pc = sample_theta(middle_thirds(), 64, 808, 100000);
    RunningStats st;
    for (double x : pc.xs) st.add(x);
    bool mean_ok = std::abs(st.mean - 0.5) <= 3.0 * st.clt_bar();
    return {mismatches == 0 && mean_ok, std::to_string(mismatches) + " mismatches in 200 lattices; theta mean " +
                                            fmt("%.5f", st.mean) + " +- " + fmt("%.5f", st.clt_bar())};
}

Verdict c9() {
    auto f = middle_thirds();
    FriendlinessOptions dec;
    dec.n_samples = 200000;
    dec.n_scales = 6;
    dec.r0 = 1.0 / 3.0;
    dec.step = 3.0;
    dec.seed = 909;
    dec.hyperplane_normal = std::vector<double>{1.0};
    dec.hyperplane_point = std::vector<double>{0.0};
    auto e = estimate_friendliness(f, dec);
    const double target = std::log(2.0) / std::log(3.0);
    bool alpha_ok = std::abs(e.decay_alpha - target) <= 0.1;

    FriendlinessOptions a, b;
    a.n_samples = b.n_samples = 200000;
    a.seed = b.seed = 909;
    a.r0 = b.r0 = 0.25;
    a.step = 2.0;
    b.step = 4.0;
    double Da = estimate_friendliness(f, a).federer_D, Db = estimate_friendliness(f, b).federer_D;
    double ratio = std::max(Da, Db) / std::min(Da, Db);
    return {alpha_ok && ratio <= 1.5, "alpha " + fmt("%.4f", e.decay_alpha) + " vs " + fmt("%.4f", target) + "; D " +
                                          fmt("%.3f", Da) + " / " + fmt("%.3f", Db) + " (ratio " + fmt("%.3f", ratio) + ")"};
}

struct Criterion {
    const char* id;
    const char* what;
    double limit_s;
    std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all{
        {"c1", "exact identity suite", 1.0, c1},
        {"c2", "operator norm growth law", 10.0, c2},
        {"c3", "prefix ergodic averages", 30.0, c3},
        {"c4", "centralizer structure", 1.0, c4},
        {"c5", "equidistribution at t = 8", 120.0, c5},
        {"c6", "theta-null decay", 300.0, c6},
        {"c7", "arithmetic and dynamical panel", 30.0, c7},
        {"c8", "shortest vector oracle and theta mean", 60.0, c8},
        {"c9", "friendliness estimates", 60.0, c9},
    };
    std::string only = argc > 1 ? argv[1] : "";
    bool any_fail = false, matched = false;
    for (const auto& c : all) {
        if (!only.empty() && only != c.id) continue;
        matched = true;
        auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        bool in_time = secs <= c.limit_s;
        bool pass = v.pass && in_time;
        any_fail = any_fail || !pass;
        std::printf("%s %s %s: %s [%.2f s, limit %.0f s%s]\n", c.id, pass ? "PASS" : "FAIL", c.what, v.detail.c_str(), secs,
                    c.limit_s, in_time ? "" : ", over time");
        std::fflush(stdout);
    }
    if (!matched) {
        std::fprintf(stderr, "unknown criterion: %s\n", only.c_str());
        return 2;
    }
    return any_fail ? 1 : 0;
}

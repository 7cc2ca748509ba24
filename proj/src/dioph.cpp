#include "carpet/dioph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "carpet/parallel.hpp"

namespace carpet {

double QuadraticIrrational::value() const {
    return a.to_double() + b.to_double() * std::sqrt(static_cast<double>(D));
}

QuadraticIrrational QuadraticIrrational::parse(const std::string& text) {
    // q:a:b:D
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (;;) {
        auto pos = text.find(':', start);
        parts.push_back(text.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    if (parts.size() != 4 || parts[0] != "q") throw DiophError("quadratic irrational must look like q:a:b:D");
    QuadraticIrrational z;
    try {
        z.a = Rational::parse(parts[1]);
        z.b = Rational::parse(parts[2]);
        z.D = std::stol(parts[3]);
    } catch (const std::exception& e) {
        throw DiophError(std::string("bad quadratic irrational: ") + e.what());
    }
    if (z.D <= 1) throw DiophError("D must exceed 1");
    long s = static_cast<long>(std::llround(std::sqrt(static_cast<double>(z.D))));
    for (long c = std::max(0L, s - 1); c <= s + 1; ++c)
        if (c * c == z.D) throw DiophError("D must not be a perfect square");
    if (z.b.is_zero()) throw DiophError("b must be nonzero");
    return z;
}

Coordinate parse_coordinate(const std::string& text) {
    if (!text.empty() && text[0] == 'q') return QuadraticIrrational::parse(text);
    auto dot = text.find_first_of(".eE");
    if (dot == std::string::npos) {
        try {
            return Rational::parse(text);
        } catch (const ArithError& e) {
            throw DiophError(e.what());
        }
    }
    // decimal literal, taken at face value as an exact fraction
    std::string mant = text, expo;
    auto e = text.find_first_of("eE");
    if (e != std::string::npos) {
        mant = text.substr(0, e);
        expo = text.substr(e + 1);
    }
    auto p = mant.find('.');
    std::string digits = mant;
    long scale = 0;
    if (p != std::string::npos) {
        digits = mant.substr(0, p) + mant.substr(p + 1);
        scale = static_cast<long>(mant.size() - p - 1);
    }
    if (digits.empty() || digits == "-" || digits == "+") throw DiophError("bad decimal: " + text);
    long ex = 0;
    try {
        if (!expo.empty()) ex = std::stol(expo);
        Rational v = Rational::parse(digits);
        return v * Rational(10).pow(ex - scale);
    } catch (const std::exception&) {
        throw DiophError("bad decimal: " + text);
    }
}

double to_double(const Coordinate& c) {
    if (auto q = std::get_if<Rational>(&c)) return q->to_double();
    return std::get<QuadraticIrrational>(c).value();
}

namespace {

template <class Residual>
BAReport ba_scan(std::size_t d, const WeightVector& r, long T, const std::vector<long>& checkpoints, Residual residual) {
    if (T < 1) throw DiophError("horizon must be at least 1");
    if (static_cast<std::size_t>(r.d()) != d) throw DiophError("weight vector length differs from dimension");
    BAReport rep;
    rep.r = r.r;
    rep.horizon_T = T;
    rep.min_margin = std::numeric_limits<double>::infinity();
    std::vector<long> cps = checkpoints;
    std::sort(cps.begin(), cps.end());
    std::size_t next_cp = 0;
    std::vector<double> res(d);
    for (long Q = 1; Q <= T; ++Q) {
        residual(Q, res);
        double m = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            if (res[i] == 0.0) continue;
            m = std::max(m, std::pow(res[i], 1.0 / r.r[i]));
        }
        double margin = static_cast<double>(Q) * m;
        if (margin < rep.min_margin) {
            rep.min_margin = margin;
            rep.argmin_Q = Q;
            rep.margin_trace.emplace_back(Q, margin);
        }
        while (next_cp < cps.size() && cps[next_cp] == Q) rep.checkpoints.emplace_back(cps[next_cp++], rep.min_margin);
    }
    return rep;
}

}  // namespace

BAReport ba_test(const std::vector<Coordinate>& x, const WeightVector& r, long T, const std::vector<long>& checkpoints) {
    std::vector<double> xd;
    for (const auto& c : x) xd.push_back(to_double(c));
    BAReport rep = ba_scan(x.size(), r, T, checkpoints, [&](long Q, std::vector<double>& res) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (auto q = std::get_if<Rational>(&x[i])) {
                Rational v = *q * Rational(Q);
                res[i] = (v - Rational(v.round())).abs().to_double();
            } else {
                long double v = static_cast<long double>(Q) * static_cast<long double>(std::get<QuadraticIrrational>(x[i]).value());
                res[i] = static_cast<double>(std::abs(v - std::round(v)));
            }
        }
    });
    rep.x = xd;
    return rep;
}

BAReport ba_test(const std::vector<double>& x, const WeightVector& r, long T, const std::vector<long>& checkpoints) {
    BAReport rep = ba_scan(x.size(), r, T, checkpoints, [&](long Q, std::vector<double>& res) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            long double v = static_cast<long double>(Q) * static_cast<long double>(x[i]);
            res[i] = static_cast<double>(std::abs(v - std::round(v)));
        }
    });
    rep.x = x;
    return rep;
}

std::string to_string(RadiusProvenance p) {
    switch (p) {
        case RadiusProvenance::exact: return "exact";
        case RadiusProvenance::user_supplied: return "user-supplied";
        default: return "lower-bound";
    }
}

CriticalRadius critical_radius(const NormSpec& norm, int d, std::optional<double> user_value) {
    if (d < 1) throw DiophError("dimension must be positive");
    if (user_value && !(*user_value > 0.0)) throw DiophError("critical radius must be positive");
    if (norm.kind == NormKind::sup) return {norm, 1.0, RadiusProvenance::exact};
    if (norm.kind == NormKind::euclidean && d == 1) return {norm, std::pow(4.0 / 3.0, 0.25), RadiusProvenance::exact};
    if (user_value) return {norm, *user_value, RadiusProvenance::user_supplied};
    if (norm.kind == NormKind::euclidean) return {norm, 1.0, RadiusProvenance::lower_bound};
    throw DiophError("critical radius of a custom norm must be supplied by the user");
}

namespace {

struct SupInterval {
    double lo, hi;
};

SupInterval sup_interval(const std::vector<double>& x, const WeightVector& r, double eps, long Q) {
    SupInterval iv{std::log(static_cast<double>(Q) / eps), std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i < x.size(); ++i) {
        long double v = static_cast<long double>(Q) * static_cast<long double>(x[i]);
        double res = static_cast<double>(std::abs(v - std::round(v)));
        if (res > 0.0) iv.hi = std::min(iv.hi, std::log(eps / res) / r.r[i]);
    }
    return iv;
}

double systole_at(const std::vector<double>& x, const DiagonalSequence& a, double t, const NormSpec& norm) {
    return shortest_vector(flow(embed(x), a, t).basis, norm).length;
}

}  // namespace

bool sup_dirichlet_at(const std::vector<double>& x, const WeightVector& r, double eps, double t) {
    if (!(eps > 0.0 && eps < 1.0)) throw DiophError("sup-norm Dirichlet test needs 0 < eps < 1");
    if (t < 0.0) throw DiophError("times must be nonnegative");
    auto qmax = static_cast<long>(std::floor(eps * std::exp(t)));
    for (long Q = 1; Q <= qmax; ++Q) {
        SupInterval iv = sup_interval(x, r, eps, Q);
        if (iv.lo <= t && t <= iv.hi) return true;
    }
    return false;
}

bool sup_dirichlet_covered(const std::vector<double>& x, const WeightVector& r, double eps, double t0, double t1) {
    if (!(eps > 0.0 && eps < 1.0)) throw DiophError("sup-norm Dirichlet test needs 0 < eps < 1");
    if (t0 < 0.0 || t1 < t0) throw DiophError("need 0 <= t0 <= t1");
    // intervals arrive sorted by left end; `need` is the first point not yet covered
    double need = t0;
    for (long Q = 1;; ++Q) {
        SupInterval iv = sup_interval(x, r, eps, Q);
        if (iv.lo > need) return false;
        if (iv.hi >= need) need = iv.hi;
        if (need >= t1) return true;
    }
}

DirichletReport dirichlet_test(const std::vector<double>& x, const WeightVector& r, const NormSpec& norm, double eps,
                               double t0, double T, double dt) {
    const int d = static_cast<int>(x.size());
    if (r.d() != d) throw DiophError("weight vector length differs from dimension");
    if (!(dt > 0.0 && dt <= 0.1)) throw DiophError("grid step must lie in (0, 0.1]");
    if (t0 < 0.0 || T < t0) throw DiophError("need 0 <= t0 <= T");
    CriticalRadius crit = critical_radius(norm, d);
    if (!(eps > 0.0) || eps >= crit.epsilon_norm)
        throw DiophError("eps must satisfy 0 < eps < critical radius " + std::to_string(crit.epsilon_norm));

    DirichletReport rep;
    rep.x = x;
    rep.r = r.r;
    rep.norm = norm.name();
    rep.eps = eps;
    rep.t0 = t0;
    rep.T = T;
    rep.dt = dt;

    DiagonalSequence a = DiagonalSequence::weighted(r);
    std::vector<double> times;
    auto steps = static_cast<long>(std::floor((T - t0) / dt + 1e-9));
    for (long s = 0; s <= steps; ++s) times.push_back(t0 + static_cast<double>(s) * dt);
    if (times.back() < T - 1e-12) times.push_back(T);
    rep.systole_trace = systole_trace(x, a, times, norm);

    // local refinement where an excursion above eps could hide between grid points
    const double lip = std::max(1.0, *std::max_element(r.r.begin(), r.r.end()));
    std::vector<SystolePoint> extra;
    auto refine = [&](auto&& self, double ta, double la, double tb, double lb, int depth) -> void {
        if (la > eps || lb > eps || depth == 0) return;
        double peak = std::sqrt(la * lb * std::exp(lip * (tb - ta)));
        if (peak <= eps) return;
        double tm = 0.5 * (ta + tb);
        SystolePoint p;
        p.t = tm;
        p.lambda1_norm = systole_at(x, a, tm, norm);
        p.lambda1_euclid = norm.kind == NormKind::euclidean ? p.lambda1_norm : systole_at(x, a, tm, NormSpec::euclidean());
        extra.push_back(p);
        self(self, ta, la, tm, p.lambda1_norm, depth - 1);
        self(self, tm, p.lambda1_norm, tb, lb, depth - 1);
    };
    for (std::size_t i = 0; i + 1 < rep.systole_trace.size(); ++i) {
        const auto& A = rep.systole_trace[i];
        const auto& B = rep.systole_trace[i + 1];
        refine(refine, A.t, A.lambda1_norm, B.t, B.lambda1_norm, 8);
    }
    rep.systole_trace.insert(rep.systole_trace.end(), extra.begin(), extra.end());
    std::sort(rep.systole_trace.begin(), rep.systole_trace.end(), [](const auto& u, const auto& v) { return u.t < v.t; });

    rep.always_below = std::all_of(rep.systole_trace.begin(), rep.systole_trace.end(),
                                   [&](const SystolePoint& p) { return p.lambda1_norm <= eps; });
    if (norm.kind == NormKind::sup) {
        std::size_t agree = 0;
        bool all = true;
        for (const auto& p : rep.systole_trace) {
            bool arith = sup_dirichlet_at(x, r, eps, p.t);
            all = all && arith;
            if (arith == (p.lambda1_norm <= eps)) ++agree;
        }
        rep.arithmetic_always_below = all;
        rep.grid_agreement = static_cast<double>(agree) / static_cast<double>(rep.systole_trace.size());
    }
    return rep;
}

std::vector<DecayRow> measure_zero_experiment(const CarpetIFS& f, const WeightVector& r, const MeasureZeroOptions& opt) {
    if (r.d() != f.d) throw DiophError("weight vector length differs from dimension");
    if (opt.T_ladder.empty() || opt.n_samples == 0) throw DiophError("empty ladder or sample count");
    std::vector<long> ladder = opt.T_ladder;
    std::sort(ladder.begin(), ladder.end());
    const long Tmax = ladder.back();

    struct Sample {
        std::vector<double> margins;  // per ladder entry
        std::vector<char> dirichlet;  // per ladder entry
    };
    auto parts = map_chunks<std::vector<Sample>>(opt.n_samples, kChunk, opt.threads, [&](std::size_t c, std::size_t b, std::size_t e) {
        ThetaSampler s(f, 64, derive_seed(opt.seed, c));
        std::vector<Sample> out;
        std::vector<double> x(static_cast<std::size_t>(f.d));
        for (std::size_t i = b; i < e; ++i) {
            s.next(x.data());
            BAReport rep = ba_test(x, r, Tmax, ladder);
            Sample smp;
            for (const auto& cp : rep.checkpoints) smp.margins.push_back(cp.second);
            for (long T : ladder) {
                double t1 = std::log(static_cast<double>(T));
                smp.dirichlet.push_back(t1 >= opt.dirichlet_t0 && sup_dirichlet_covered(x, r, opt.dirichlet_eps, opt.dirichlet_t0, t1));
            }
            out.push_back(std::move(smp));
        }
        return out;
    });
    std::vector<DecayRow> rows;
    const auto n = static_cast<double>(opt.n_samples);
    for (std::size_t li = 0; li < ladder.size(); ++li) {
        for (double c : opt.thresholds) {
            std::size_t surv = 0;
            for (const auto& p : parts)
                for (const auto& s : p)
                    if (s.margins[li] >= c) ++surv;
            double fr = static_cast<double>(surv) / n;
            rows.push_back({ladder[li], "ba", c, fr, fraction_bar(fr, opt.n_samples)});
        }
        std::size_t di = 0;
        for (const auto& p : parts)
            for (const auto& s : p) di += s.dirichlet[li] ? 1 : 0;
        double fr = static_cast<double>(di) / n;
        rows.push_back({ladder[li], "dirichlet", opt.dirichlet_eps, fr, fraction_bar(fr, opt.n_samples)});
    }
    return rows;
}

}  // namespace carpet

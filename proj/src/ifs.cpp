#include "carpet/ifs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "carpet/parallel.hpp"
#include "carpet/report.hpp"

namespace carpet {

using nlohmann::json;

std::string to_string(Separation s) {
    switch (s) {
        case Separation::strong: return "strong";
        case Separation::open_set: return "open-set";
        default: return "unknown";
    }
}

Separation separation_from_string(const std::string& s) {
    if (s == "strong") return Separation::strong;
    if (s == "open-set") return Separation::open_set;
    if (s == "unknown") return Separation::unknown;
    throw IfsError("unknown separation tag: " + s);
}

CarpetIFS CarpetIFS::make(int d, Rational rho, std::vector<QVector> y, std::vector<double> p,
                          std::optional<Separation> assertion) {
    if (d < 1) throw IfsError("dimension must be positive");
    if (y.size() < 2) throw IfsError("a carpet IFS needs at least two maps");
    if (rho.is_zero() || rho.abs() >= Rational(1)) throw IfsError("contraction ratio must satisfy 0 < |rho| < 1");
    for (const auto& v : y)
        if (static_cast<int>(v.size()) != d) throw IfsError("translation has wrong dimension");
    if (p.size() != y.size()) throw IfsError("probability vector length differs from the number of maps");
    double sum = 0.0;
    for (double pi : p) {
        if (!(pi > 0.0) || !std::isfinite(pi)) throw IfsError("probabilities must be positive");
        sum += pi;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw IfsError("probabilities must sum to 1");
    CarpetIFS f;
    f.d = d;
    f.rho = std::move(rho);
    f.y = std::move(y);
    f.p = std::move(p);
    f.separation_assertion = assertion;
    f.cache();
    return f;
}

CarpetIFS CarpetIFS::uniform(int d, Rational rho, std::vector<QVector> y) {
    std::size_t k = y.size();
    if (k == 0) throw IfsError("a carpet IFS needs at least two maps");
    CarpetIFS f = make(d, std::move(rho), std::move(y), std::vector<double>(k, 1.0 / static_cast<double>(k)));
    f.p_exact = std::vector<Rational>(k, Rational(1, static_cast<long>(k)));
    return f;
}

void CarpetIFS::cache() {
    rho_double_ = rho.to_double();
    y_double_.clear();
    for (const auto& v : y) {
        std::vector<double> yd;
        for (const auto& c : v) yd.push_back(c.to_double());
        y_double_.push_back(std::move(yd));
    }
}

QVector CarpetIFS::apply(int i, const QVector& x) const {
    const QVector& yi = y.at(static_cast<std::size_t>(i - 1));
    QVector out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = rho * x[j] + yi[j];
    return out;
}

void CarpetIFS::apply(int i, double* x) const {
    const auto& yi = y_double_[static_cast<std::size_t>(i - 1)];
    for (int j = 0; j < d; ++j) x[j] = rho_double_ * x[j] + yi[static_cast<std::size_t>(j)];
}

QVector CarpetIFS::fixed_point(int i) const {
    Rational s = (Rational(1) - rho).inverse();
    QVector out = y.at(static_cast<std::size_t>(i - 1));
    for (auto& c : out) c *= s;
    return out;
}

CarpetIFS middle_thirds() { return CarpetIFS::uniform(1, Rational(1, 3), {{Rational(0)}, {Rational(2, 3)}}); }

CarpetIFS sierpinski_carpet() {
    std::vector<QVector> y;
    for (long a = 0; a < 3; ++a)
        for (long b = 0; b < 3; ++b)
            if (a != 1 || b != 1) y.push_back({Rational(a, 3), Rational(b, 3)});
    return CarpetIFS::uniform(2, Rational(1, 3), std::move(y));
}

CarpetIFS lebesgue_interval() { return CarpetIFS::uniform(1, Rational(1, 2), {{Rational(0)}, {Rational(1, 2)}}); }

CarpetIFS rho23_example() { return CarpetIFS::uniform(1, Rational(2, 3), {{Rational(0)}, {Rational(1, 5)}}); }

namespace {

Rational rational_field(const json& v, const char* what) {
    if (!v.is_string()) throw IfsError(std::string(what) + " must be a rational string such as \"1/3\"");
    try {
        return Rational::parse(v.get<std::string>());
    } catch (const ArithError& e) {
        throw IfsError(std::string(what) + ": " + e.what());
    }
}

}  // namespace

CarpetIFS ifs_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw IfsError(std::string("IFS file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw IfsError("IFS file must hold an object");
    for (const char* key : {"d", "rho", "translations"})
        if (!j.contains(key)) throw IfsError(std::string("IFS file lacks '") + key + "'");
    if (!j["d"].is_number_integer()) throw IfsError("'d' must be an integer");
    int d = j["d"].get<int>();
    Rational rho = rational_field(j["rho"], "rho");
    std::vector<QVector> y;
    if (!j["translations"].is_array()) throw IfsError("'translations' must be an array");
    for (const auto& t : j["translations"]) {
        if (!t.is_array()) throw IfsError("each translation must be an array");
        QVector v;
        for (const auto& c : t) v.push_back(rational_field(c, "translation entry"));
        y.push_back(std::move(v));
    }
    std::optional<Separation> assertion;
    if (j.contains("separation_assertion")) assertion = separation_from_string(j["separation_assertion"].get<std::string>());
    std::size_t k = y.size();
    if (!j.contains("probs")) {
        CarpetIFS f = CarpetIFS::uniform(d, rho, std::move(y));
        f.separation_assertion = assertion;
        return f;
    }
    if (!j["probs"].is_array()) throw IfsError("'probs' must be an array");
    std::vector<double> p;
    std::vector<Rational> pe;
    bool exact = true;
    for (const auto& c : j["probs"]) {
        if (c.is_string()) {
            Rational q = rational_field(c, "probability");
            pe.push_back(q);
            p.push_back(q.to_double());
        } else if (c.is_number()) {
            exact = false;
            p.push_back(c.get<double>());
        } else {
            throw IfsError("probabilities must be numbers or rational strings");
        }
    }
    if (p.size() != k) throw IfsError("probability vector length differs from the number of maps");
    CarpetIFS f = CarpetIFS::make(d, rho, std::move(y), p, assertion);
    if (exact) {
        Rational s(0);
        for (const auto& q : pe) s += q;
        if (s != Rational(1)) throw IfsError("exact probabilities must sum to 1");
        f.p_exact = pe;
    }
    return f;
}

CarpetIFS load_ifs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open IFS file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ifs_from_json(ss.str());
}

std::string ifs_to_json(const CarpetIFS& f) {
    json j;
    j["d"] = f.d;
    j["rho"] = f.rho.str();
    json ts = json::array();
    for (const auto& v : f.y) {
        json t = json::array();
        for (const auto& c : v) t.push_back(c.str());
        ts.push_back(t);
    }
    j["translations"] = ts;
    json ps = json::array();
    if (f.p_exact) {
        for (const auto& q : *f.p_exact) ps.push_back(q.str());
    } else {
        for (double q : f.p) ps.push_back(q);
    }
    j["probs"] = ps;
    if (f.separation_assertion) j["separation_assertion"] = to_string(*f.separation_assertion);
    return j.dump();
}

// ---------------------------------------------------------------------------

ValidationReport validate(const CarpetIFS& f) {
    ValidationReport rep;

    std::vector<QVector> diffs;
    for (int i = 1; i < f.k(); ++i) {
        QVector v(static_cast<std::size_t>(f.d));
        for (int c = 0; c < f.d; ++c) v[static_cast<std::size_t>(c)] = f.y[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] - f.y[0][static_cast<std::size_t>(c)];
        diffs.push_back(std::move(v));
    }
    rep.spanning_irreducible = QMatrix::from_columns(diffs, static_cast<std::size_t>(f.d)).rank() == static_cast<std::size_t>(f.d);

    Rational inv = f.rho.abs().inverse();
    bool digit = inv.is_integer();
    long b = digit && inv.num().fits_slong_p() ? inv.num().get_si() : 0;
    digit = digit && b >= 2;
    if (digit) {
        for (const auto& v : f.y) {
            std::vector<long> dv;
            for (const auto& c : v) {
                Rational s = c * Rational(b);
                if (f.rho.sign() < 0) s -= Rational(1);
                if (!s.is_integer() || s < Rational(0) || s >= Rational(b)) {
                    digit = false;
                    break;
                }
                dv.push_back(s.num().get_si());
            }
            if (!digit) break;
            rep.digits.push_back(std::move(dv));
        }
    }
    rep.digit_system = digit;
    if (!digit) {
        rep.digits.clear();
        rep.separation = f.separation_assertion.value_or(Separation::unknown);
        return rep;
    }
    rep.base = b;
    bool distinct = true, apart = true;
    for (std::size_t i = 0; i < rep.digits.size(); ++i)
        for (std::size_t j = i + 1; j < rep.digits.size(); ++j) {
            long gap = 0;
            for (std::size_t c = 0; c < rep.digits[i].size(); ++c)
                gap = std::max(gap, std::abs(rep.digits[i][c] - rep.digits[j][c]));
            if (gap == 0) distinct = false;
            if (gap < 2) apart = false;
        }
    rep.separation = !distinct ? Separation::unknown : (apart ? Separation::strong : Separation::open_set);
    return rep;
}

// ---------------------------------------------------------------------------

namespace {

double euclid(const QVector& v) {
    if (v.empty()) return 0.0;
    return svec_norm(v, Place::infinity());
}

}  // namespace

double diameter_bound(const CarpetIFS& f, const QVector& x0) {
    double m = 0.0;
    for (int i = 1; i <= f.k(); ++i) m = std::max(m, euclid(f.fixed_point(i)));
    return 2.0 * m + euclid(x0);
}

QVector cod_exact(const CarpetIFS& f, const Word& w, const QVector& x0) {
    if (w.empty()) throw IfsError("cod needs a non-empty word");
    if (static_cast<int>(x0.size()) != f.d) throw IfsError("base point has wrong dimension");
    QVector x = x0;
    for (auto it = w.rbegin(); it != w.rend(); ++it) {
        if (*it < 1 || *it > f.k()) throw IfsError("word letter out of range");
        x = f.apply(*it, x);
    }
    return x;
}

AttractorPoint cod(const CarpetIFS& f, const Word& w, const QVector& x0) {
    QVector x = cod_exact(f, w, x0);
    AttractorPoint pt;
    for (const auto& c : x) pt.coords.push_back(c.to_double());
    pt.truncation_error = std::pow(std::abs(f.rho_d()), static_cast<double>(w.size())) * diameter_bound(f, x0);
    return pt;
}

ThetaSampler::ThetaSampler(const CarpetIFS& ifs, int n_trunc, std::uint64_t seed)
    : ifs_(&ifs), n_trunc_(n_trunc), rng_(seed) {
    if (n_trunc < 1) throw IfsError("truncation length must be positive");
    err_ = std::pow(std::abs(ifs.rho_d()), n_trunc) * diameter_bound(ifs, QVector(static_cast<std::size_t>(ifs.d)));
}

Word ThetaSampler::next_word(int length) {
    Word w(static_cast<std::size_t>(length));
    for (auto& c : w) c = rng_.categorical(ifs_->p) + 1;
    return w;
}

void ThetaSampler::next(double* out) {
    const int d = ifs_->d;
    for (int c = 0; c < d; ++c) out[c] = 0.0;
    double pw = 1.0;
    const double rho = ifs_->rho_d();
    for (int j = 0; j < n_trunc_; ++j) {
        int i = rng_.categorical(ifs_->p) + 1;
        const auto& y = ifs_->y_double(i);
        for (int c = 0; c < d; ++c) out[c] += pw * y[static_cast<std::size_t>(c)];
        pw *= rho;
    }
}

AttractorPoint ThetaSampler::next() {
    AttractorPoint pt;
    pt.coords.resize(static_cast<std::size_t>(ifs_->d));
    next(pt.coords.data());
    pt.truncation_error = err_;
    return pt;
}

PointCloud sample_theta(const CarpetIFS& f, int n_trunc, std::uint64_t seed, std::size_t count, int threads) {
    auto chunks = map_chunks<std::vector<double>>(count, kChunk, threads, [&](std::size_t c, std::size_t b, std::size_t e) {
        ThetaSampler s(f, n_trunc, derive_seed(seed, c));
        std::vector<double> xs((e - b) * static_cast<std::size_t>(f.d));
        for (std::size_t i = 0; i < e - b; ++i) s.next(xs.data() + i * static_cast<std::size_t>(f.d));
        return xs;
    });
    PointCloud cloud;
    cloud.d = f.d;
    cloud.xs.reserve(count * static_cast<std::size_t>(f.d));
    for (auto& ch : chunks) cloud.xs.insert(cloud.xs.end(), ch.begin(), ch.end());
    return cloud;
}

CarpetIFS conjugate(const CarpetIFS& f, const Rational& c, const QVector& v) {
    if (c.is_zero()) throw IfsError("conjugating map must have nonzero scale");
    if (static_cast<int>(v.size()) != f.d) throw IfsError("conjugating translation has wrong dimension");
    std::vector<QVector> y;
    Rational one_minus = Rational(1) - f.rho;
    for (const auto& yi : f.y) {
        QVector t(yi.size());
        for (std::size_t j = 0; j < yi.size(); ++j) t[j] = c * yi[j] + one_minus * v[j];
        y.push_back(std::move(t));
    }
    CarpetIFS g = CarpetIFS::make(f.d, f.rho, std::move(y), f.p, f.separation_assertion);
    g.p_exact = f.p_exact;
    return g;
}

bool HalfSpace::contains(const double* x) const {
    double s = 0.0;
    for (std::size_t j = 0; j < normal.size(); ++j) s += normal[j] * x[j];
    return strict ? s < offset : s <= offset;
}

std::vector<RatioPoint> density_ratio_trace(const CarpetIFS& f, const HalfSpace& B, const Word& w,
                                            std::size_t n_samples, std::uint64_t seed) {
    if (n_samples == 0) throw IfsError("density ratio needs at least one sample");
    if (static_cast<int>(B.normal.size()) != f.d) throw IfsError("half-space has wrong dimension");
    for (int c : w)
        if (c < 1 || c > f.k()) throw IfsError("word letter out of range");
    PointCloud cloud = sample_theta(f, 64, seed, n_samples);
    std::vector<RatioPoint> out;
    std::vector<double> shift(static_cast<std::size_t>(f.d), 0.0), x(static_cast<std::size_t>(f.d));
    double scale = 1.0;
    for (std::size_t n = 1; n <= w.size(); ++n) {
        // f_{w_1..w_n}(z) = rho^n z + sum_{j<=n} rho^{j-1} y_{w_j}
        const auto& y = f.y_double(w[n - 1]);
        for (int c = 0; c < f.d; ++c) shift[static_cast<std::size_t>(c)] += scale * y[static_cast<std::size_t>(c)];
        scale *= f.rho_d();
        std::size_t hits = 0;
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            const double* z = cloud.at(i);
            for (int c = 0; c < f.d; ++c) x[static_cast<std::size_t>(c)] = scale * z[c] + shift[static_cast<std::size_t>(c)];
            if (B.contains(x.data())) ++hits;
        }
        double r = static_cast<double>(hits) / static_cast<double>(n_samples);
        out.push_back({static_cast<int>(n), r, fraction_bar(r, n_samples)});
    }
    return out;
}

namespace {

std::vector<double> random_unit_normal(Rng& rng, int d) {
    std::vector<double> a(static_cast<std::size_t>(d));
    double n2 = 0.0;
    while (n2 == 0.0) {
        n2 = 0.0;
        for (auto& c : a) {
            c = static_cast<double>(rng.between(-3, 3));
            n2 += c * c;
        }
    }
    for (auto& c : a) c /= std::sqrt(n2);
    return a;
}

double dist2(const double* a, const double* b, int d) {
    double s = 0.0;
    for (int c = 0; c < d; ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
    return s;
}

}  // namespace

FriendlinessEstimate estimate_friendliness(const CarpetIFS& f, const FriendlinessOptions& opt) {
    if (validate(f).separation == Separation::unknown)
        throw IfsError("friendliness estimates need a separated IFS (assert separation for non-digit systems)");
    if (opt.n_scales < 2) throw IfsError("need at least two scales");
    if (!(opt.r0 > 0.0) || !(opt.step > 1.0)) throw IfsError("scale ladder needs r0 > 0 and step > 1");
    const int d = f.d;
    PointCloud cloud = sample_theta(f, opt.n_trunc, derive_seed(opt.seed, 0), opt.n_samples, opt.threads);
    Rng rng(derive_seed(opt.seed, 1));
    ThetaSampler centres(f, opt.n_trunc, derive_seed(opt.seed, 2));

    std::vector<double> radii;
    for (int j = 0; j < opt.n_scales; ++j) radii.push_back(opt.r0 / std::pow(opt.step, j));

    FriendlinessEstimate est;
    est.sample_count = cloud.size();
    est.seed = opt.seed;

    // Federer constant
    std::vector<double> x(static_cast<std::size_t>(d));
    std::vector<double> dists(cloud.size());
    for (std::size_t c = 0; c < opt.n_centers; ++c) {
        centres.next(x.data());
        for (std::size_t i = 0; i < cloud.size(); ++i) dists[i] = std::sqrt(dist2(cloud.at(i), x.data(), d));
        for (double r : radii) {
            std::size_t inner = 0, outer = 0;
            for (double t : dists) {
                if (t <= r) ++inner;
                if (t <= 3.0 * r) ++outer;
            }
            if (inner == 0) throw IfsError("insufficient samples: a ball of radius " + std::to_string(r) + " received no hits");
            est.federer_D = std::max(est.federer_D, static_cast<double>(outer) / static_cast<double>(inner));
        }
    }

    // decay exponent: ratio theta(B n L^(eps)) / theta(B), B = B(point, r0)
    std::size_t n_planes = opt.hyperplane_normal ? 1 : opt.n_hyperplanes;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t npts = 0;
    for (std::size_t h = 0; h < n_planes; ++h) {
        std::vector<double> a, pt(static_cast<std::size_t>(d));
        if (opt.hyperplane_normal) {
            a = *opt.hyperplane_normal;
            if (static_cast<int>(a.size()) != d) throw IfsError("hyperplane normal has wrong dimension");
            double n2 = 0.0;
            for (double c : a) n2 += c * c;
            if (n2 == 0.0) throw IfsError("hyperplane normal must be nonzero");
            for (auto& c : a) c /= std::sqrt(n2);
            if (opt.hyperplane_point) pt = *opt.hyperplane_point;
            if (static_cast<int>(pt.size()) != d) throw IfsError("hyperplane point has wrong dimension");
        } else {
            a = random_unit_normal(rng, d);
            centres.next(pt.data());
        }
        const double r = opt.r0;
        std::size_t in_ball = 0;
        std::vector<double> offsets;
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            const double* z = cloud.at(i);
            if (dist2(z, pt.data(), d) > r * r) continue;
            ++in_ball;
            double s = 0.0;
            for (int c = 0; c < d; ++c) s += a[static_cast<std::size_t>(c)] * (z[c] - pt[static_cast<std::size_t>(c)]);
            offsets.push_back(std::abs(s));
        }
        if (in_ball == 0) throw IfsError("insufficient samples: decay ball received no hits");
        for (int j = 1; j <= opt.n_scales; ++j) {
            double eps = r / std::pow(opt.step, j);
            std::size_t hits = 0;
            for (double s : offsets)
                if (s <= eps) ++hits;
            double ratio = static_cast<double>(hits) / static_cast<double>(in_ball);
            est.decay_points.push_back({eps / r, ratio});
            if (hits == 0) continue;
            double lx = std::log(eps / r), ly = std::log(ratio);
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
            ++npts;
        }
    }
    double nn = static_cast<double>(npts);
    double den = nn * sxx - sx * sx;
    if (npts < 2 || den <= 0.0) throw IfsError("insufficient samples: decay regression is degenerate");
    est.decay_alpha = (nn * sxy - sx * sy) / den;
    est.decay_C = 0.0;
    for (const auto& p : est.decay_points)
        est.decay_C = std::max(est.decay_C, p.ratio / std::pow(p.eps_over_r, est.decay_alpha));
    if (est.decay_C <= 0.0) est.decay_C = 1.0;
    return est;
}

}  // namespace carpet

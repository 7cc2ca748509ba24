#include "cli.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ios>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "carpet/dioph.hpp"
#include "carpet/ifs.hpp"
#include "carpet/lattice.hpp"
#include "carpet/parallel.hpp"
#include "carpet/rng.hpp"
#include "carpet/sadic.hpp"
#include "carpet/shift.hpp"

namespace carpet::cli {

using json = nlohmann::json;

std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 failed");
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return os.str();
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<json>> rows;

    json as_json() const {
        json arr = json::array();
        for (const auto& r : rows) {
            json o = json::object();
            for (std::size_t i = 0; i < columns.size(); ++i) o[columns[i]] = r[i];
            arr.push_back(o);
        }
        return arr;
    }
};

std::string cell(const json& v) {
    if (v.is_number_float()) return format_double(v.get<double>());
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
    return v.dump();
}

struct Result {
    std::string default_format = "csv";
    Table table;
    json results;  // JSON body; the table when null
    bool failed = false;
};

struct State {
    // common
    std::uint64_t seed = 1;
    std::string out = "-";
    std::string format;
    int threads = 0;
    bool timing = false;
    std::string config;
    // inputs
    std::string ifs;
    std::vector<std::string> x;
    std::vector<double> weights;
    std::string norm = "sup";
    long n = 0;
    int trunc = 64;
    double t = 8.0, R = 1.5;
    double t0 = 0.0, T = 10.0, dt = 0.1;
    std::vector<double> eps;
    double eps_one = 0.9;
    long horizon = 10000;
    double c = 0.2;
    std::vector<long> ladder{100, 1000, 10000};
    std::vector<double> thresholds{0.01};
    int max_n = 40;
    long words = 200;
    int points = 20, pairs = 50, gammas = 100;
    std::vector<int> a, b;
    int gamma_n = 1;
    int k = 2;
    std::vector<std::string> p;
    int depth = 12;
    long tails = 100;
    std::string function = "weighted-hits";
    int symbol = 1;
    std::vector<int> cylinder{1};
    long ref_samples = 1000000;
    std::string reference = "mc";
};

const std::set<std::string> kUnhashed{"out", "format", "threads", "timing", "config", "help"};

std::string option_key(const CLI::Option* o) {
    std::string n = o->get_name(false, true);
    while (!n.empty() && n.front() == '-') n.erase(n.begin());
    return n;
}

json hashed_config(const CLI::App* leaf, const std::string& command, const std::optional<CarpetIFS>& ifs) {
    json opts = json::object();
    for (const CLI::Option* o : leaf->get_options()) {
        std::string key = option_key(o);
        if (kUnhashed.count(key) || o->count() == 0) continue;
        opts[key] = o->results();
    }
    if (ifs) opts["ifs"] = json::parse(ifs_to_json(*ifs));
    return json{{"command", command}, {"options", opts}};
}

std::vector<double> doubles_of(const std::vector<std::string>& xs) {
    std::vector<double> v;
    for (const auto& s : xs) v.push_back(to_double(parse_coordinate(s)));
    return v;
}

NormSpec norm_of(const std::string& name) {
    if (name == "sup") return NormSpec::sup();
    if (name == "euclidean") return NormSpec::euclidean();
    throw CLI::ValidationError("--norm", "expected sup or euclidean");
}

WeightVector weights_of(const State& s, int d) {
    if (s.weights.empty()) return WeightVector::equal(d);
    if (static_cast<int>(s.weights.size()) != d) throw std::invalid_argument("weights must have one entry per coordinate");
    return WeightVector::make(s.weights);
}

int threads_of(const State& s) { return s.threads > 0 ? s.threads : default_threads(); }

json rational_vec(const QVector& v) {
    json a = json::array();
    for (const auto& c : v) a.push_back(c.str());
    return a;
}

json matrix_json(const QMatrix& m) {
    json rows = json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) rows.push_back(rational_vec(m.row(i)));
    return rows;
}

// ---------------------------------------------------------------------------

Result cmd_ifs_validate(const CarpetIFS& f) {
    ValidationReport v = validate(f);
    Result r;
    r.default_format = "json";
    r.table.columns = {"separation", "spanning_irreducible", "digit_system", "base", "tag"};
    r.table.rows.push_back({to_string(v.separation), v.spanning_irreducible, v.digit_system, v.base, "exact"});
    r.results = {{"separation", to_string(v.separation)},
                 {"spanning_irreducible", v.spanning_irreducible},
                 {"digit_system", v.digit_system},
                 {"digits", v.digits},
                 {"base", v.base},
                 {"tag", "exact"}};
    return r;
}

Result cmd_ifs_sample(const CarpetIFS& f, const State& s) {
    if (s.n < 0) throw std::invalid_argument("--n must be nonnegative");
    PointCloud pc = sample_theta(f, s.trunc, s.seed, static_cast<std::size_t>(s.n), threads_of(s));
    double err = 0.0;
    {
        ThetaSampler one(f, s.trunc, s.seed);
        err = one.next().truncation_error;
    }
    Result r;
    for (int i = 1; i <= f.d; ++i) r.table.columns.push_back("x" + std::to_string(i));
    r.table.columns.push_back("truncation_error");
    for (std::size_t i = 0; i < pc.size(); ++i) {
        std::vector<json> row;
        for (int j = 0; j < f.d; ++j) row.push_back(pc.at(i)[j]);
        row.push_back(err);
        r.table.rows.push_back(std::move(row));
    }
    return r;
}

Result cmd_flow_trace(const State& s) {
    if (s.x.empty()) throw CLI::RequiredError("--x");
    std::vector<double> x = doubles_of(s.x);
    WeightVector w = weights_of(s, static_cast<int>(x.size()));
    NormSpec norm = norm_of(s.norm);
    if (!(s.dt > 0.0) || s.T < s.t0) throw std::invalid_argument("need dt > 0 and T >= t0");
    auto steps = static_cast<long>(std::floor((s.T - s.t0) / s.dt + 1e-9));
    std::vector<double> times;
    for (long i = 0; i <= steps; ++i) times.push_back(s.t0 + static_cast<double>(i) * s.dt);
    auto trace = systole_trace(x, DiagonalSequence::weighted(w), times, norm);
    Result r;
    r.table.columns = {"t", "lambda1_euclid", "lambda1_norm"};
    for (double e : s.eps) r.table.columns.push_back("in_K_" + format_double(e));
    r.table.columns.push_back("tag");
    for (const auto& pt : trace) {
        std::vector<json> row{pt.t, pt.lambda1_euclid, pt.lambda1_norm};
        for (double e : s.eps) row.push_back(pt.lambda1_norm >= e ? 1 : 0);
        row.push_back("fp");
        r.table.rows.push_back(std::move(row));
    }
    return r;
}

Result cmd_equi_siegel(const CarpetIFS& f, const State& s) {
    if (s.n < 1) throw std::invalid_argument("--n must be positive");
    WeightVector w = weights_of(s, f.d);
    ExperimentReport rep = siegel_statistic(f, DiagonalSequence::weighted(w), s.t, s.R, static_cast<std::size_t>(s.n), s.seed,
                                            threads_of(s));
    Result r;
    r.default_format = "json";
    r.table.columns = {"t", "R", "estimate", "clt_bar", "n_samples", "target"};
    r.table.rows.push_back({s.t, s.R, rep.estimate, rep.clt_bar, rep.n_samples, rep.extra["target"]});
    r.results = {{"estimate", rep.estimate}, {"clt_bar", rep.clt_bar}, {"n_samples", rep.n_samples},
                 {"target", rep.extra["target"]}, {"t", s.t}, {"R", s.R}};
    return r;
}

Result cmd_equi_nondiv(const CarpetIFS& f, const State& s) {
    if (s.n < 1) throw std::invalid_argument("--n must be positive");
    WeightVector w = weights_of(s, f.d);
    std::vector<double> ladder = s.eps.empty() ? std::vector<double>{0.01, 0.05, 0.1, 0.2} : s.eps;
    auto rows = nondivergence_profile(f, DiagonalSequence::weighted(w), s.t, ladder, static_cast<std::size_t>(s.n), s.seed,
                                      threads_of(s));
    Result r;
    r.table.columns = {"t", "eps", "fraction", "clt_bar"};
    for (const auto& row : rows) r.table.rows.push_back({s.t, row.eps, row.fraction, row.clt_bar});
    return r;
}

Result cmd_dioph_classify(const State& s) {
    if (s.x.empty()) throw CLI::RequiredError("--x");
    std::vector<Coordinate> xc;
    for (const auto& t : s.x) xc.push_back(parse_coordinate(t));
    std::vector<double> x;
    for (const auto& c : xc) x.push_back(to_double(c));
    const int d = static_cast<int>(x.size());
    WeightVector w = weights_of(s, d);
    NormSpec norm = norm_of(s.norm);
    if (s.horizon < 2) throw std::invalid_argument("--T must be at least 2");

    BAReport ba = ba_test(xc, w, s.horizon);
    const double tmax = std::log(static_cast<double>(s.horizon));
    std::vector<double> times;
    for (double t = 0.0; t <= tmax + 1e-12; t += 0.01) times.push_back(t);
    auto trace = systole_trace(x, DiagonalSequence::weighted(w), times, norm);
    double inf_sys = trace.front().lambda1_norm, arg_t = trace.front().t;
    for (const auto& pt : trace)
        if (pt.lambda1_norm < inf_sys) {
            inf_sys = pt.lambda1_norm;
            arg_t = pt.t;
        }
    CriticalRadius crit = critical_radius(norm, d);
    DirichletReport dr = dirichlet_test(x, w, norm, s.eps_one, s.t0, tmax);

    Result r;
    r.default_format = "json";
    r.results = {
        {"x", s.x},
        {"weights", w.r},
        {"norm", norm.name()},
        {"horizon_T", s.horizon},
        {"threshold", s.c},
        {"arithmetic",
         {{"min_margin", ba.min_margin},
          {"argmin_Q", ba.argmin_Q},
          {"verdict", ba.min_margin >= s.c ? "ba-up-to-horizon" : "not-ba"},
          {"tag", "exact"}}},
        {"dynamical",
         {{"inf_systole", inf_sys},
          {"argmin_t", arg_t},
          {"t_max", tmax},
          {"verdict", inf_sys >= s.c ? "ba-up-to-horizon" : "not-ba"},
          {"tag", "fp"}}},
        {"dirichlet",
         {{"eps", s.eps_one},
          {"t0", s.t0},
          {"always_below", dr.always_below},
          {"critical_radius", crit.epsilon_norm},
          {"critical_radius_provenance", to_string(crit.provenance)}}},
    };
    if (dr.arithmetic_always_below) r.results["dirichlet"]["arithmetic_always_below"] = *dr.arithmetic_always_below;
    if (dr.grid_agreement) r.results["dirichlet"]["grid_agreement"] = *dr.grid_agreement;
    r.table.columns = {"path", "value", "verdict", "tag"};
    r.table.rows.push_back({"arithmetic", ba.min_margin, r.results["arithmetic"]["verdict"], "exact"});
    r.table.rows.push_back({"dynamical", inf_sys, r.results["dynamical"]["verdict"], "fp"});
    r.table.rows.push_back({"dirichlet", s.eps_one, dr.always_below ? "improvable-on-window" : "not-improvable-on-window", "fp"});
    return r;
}

Result cmd_dioph_fractal(const CarpetIFS& f, const State& s) {
    MeasureZeroOptions opt;
    opt.T_ladder = s.ladder;
    opt.thresholds = s.thresholds;
    opt.dirichlet_eps = s.eps_one;
    opt.dirichlet_t0 = s.t0 > 0.0 ? s.t0 : 1.0;
    opt.n_samples = s.n > 0 ? static_cast<std::size_t>(s.n) : 2000;
    opt.seed = s.seed;
    opt.threads = threads_of(s);
    auto rows = measure_zero_experiment(f, weights_of(s, f.d), opt);
    Result r;
    r.table.columns = {"T", "kind", "threshold", "fraction", "clt_bar"};
    for (const auto& row : rows) r.table.rows.push_back({row.T, row.kind, row.threshold, row.fraction, row.clt_bar});
    return r;
}

Result cmd_sadic_places(const CarpetIFS& f) {
    PlacePartition P = derive_places(f);
    Result r;
    r.table.columns = {"place", "type", "tag"};
    for (const auto& p : P.S) r.table.rows.push_back({p.str(), to_string(P.type(p)), "exact"});
    return r;
}

QVector random_rational_vector(Rng& rng, int d) {
    QVector v;
    for (int i = 0; i < d; ++i) v.push_back(Rational(BigInt(static_cast<long>(rng.between(-60, 60))), BigInt(static_cast<long>(rng.between(1, 60)))));
    return v;
}

Word random_word(Rng& rng, int k, int len) {
    Word w(static_cast<std::size_t>(len));
    for (auto& c : w) c = static_cast<int>(rng.below(static_cast<std::uint64_t>(k))) + 1;
    return w;
}

Result cmd_sadic_verify(const CarpetIFS& f, const State& s, std::ostream& err) {
    Result r;
    r.table.columns = {"check", "place", "ok", "tag"};
    auto row = [&](const std::string& name, const std::string& place, bool ok, const std::string& detail = {}) {
        r.table.rows.push_back({name, place, ok ? "PASS" : "FAIL", "exact"});
        if (!ok) {
            r.failed = true;
            err << "FAIL " << name << " at place " << place << (detail.empty() ? "" : ": " + detail) << '\n';
        }
    };
    auto report = [&](const std::string& name, const IdentityCheck& chk, const PlacePartition& P) {
        std::map<Place, bool> ok;
        for (const auto& p : P.S) ok.emplace(p, true);
        for (const auto& fl : chk.failures) {
            if (ok.at(fl.place))
                err << "FAIL " << name << " at place " << fl.place.str() << " (map " << fl.index << "): " << fl.what << '\n';
            ok.at(fl.place) = false;
        }
        for (const auto& [p, good] : ok) {
            r.table.rows.push_back({name, p.str(), good ? "PASS" : "FAIL", "exact"});
            if (!good) r.failed = true;
        }
    };

    // declared separation against the computed one
    ValidationReport v = validate(f);
    if (f.separation_assertion && v.digit_system) {
        bool ok = *f.separation_assertion == Separation::strong ? v.separation == Separation::strong
                                                                  : v.separation != Separation::unknown;
        row("separation assertion", "-", ok,
            "declared " + to_string(*f.separation_assertion) + ", computed " + to_string(v.separation));
    }

    PlacePartition P = derive_places(f);
    Walk walk = build_walk(f, P);
    LieModel model(f.d);
    Rng rng(derive_seed(s.seed, 0));

    IdentityCheck crucial;
    for (int i = 0; i < s.points; ++i) {
        IdentityCheck c = verify_crucial_identity(f, walk, random_rational_vector(rng, f.d));
        crucial.ok = crucial.ok && c.ok;
        crucial.failures.insert(crucial.failures.end(), c.failures.begin(), c.failures.end());
    }
    report("crucial identity", crucial, P);
    report("k_i hbar_i = h_i", verify_k_factorisation(walk), P);
    report("hbar_i = h_i on S_ue", verify_ue_agreement(walk), P);
    {
        std::map<Place, QVector> z;
        for (const auto& p : P.S) z.emplace(p, random_rational_vector(rng, f.d));
        report("solenoid identity", verify_solenoid_identity(f, walk, z), P);
    }
    if (abs(f.rho.num()) == 1) {
        BigInt q = f.rho.den() * (f.rho.num() < 0 ? -1 : 1);
        row("series identity", "-", verify_series_identity(Rational(1), q));
    }

    // Ad is a homomorphism on random word pairs
    for (const auto& p : P.S) {
        bool ok = true;
        std::string detail;
        for (int i = 0; i < s.pairs && ok; ++i) {
            WalkElement g = forward_product(walk.hbar, random_word(rng, f.k(), 1 + static_cast<int>(rng.below(6))));
            WalkElement h = forward_product(walk.hbar, random_word(rng, f.k(), 1 + static_cast<int>(rng.below(6))));
            try {
                QMatrix lhs = adjoint(g * h, p, model, i == 0).mat;
                ok = lhs == adjoint(g, p, model, false).mat * adjoint(h, p, model, false).mat;
                if (!ok) detail = "Ad(gh) != Ad(g) Ad(h) for pair " + std::to_string(i);
            } catch (const SadicError& e) {
                ok = false;
                detail = e.what();
            }
        }
        row("Ad functoriality", p.str(), ok, detail);
    }

    SubalgebraSuite suite = subalgebra_suite(walk, model, false);
    std::map<std::pair<std::string, Place>, bool> certs;
    for (const auto& c : suite.certificates) {
        auto key = std::make_pair(c.name, c.place);
        auto it = certs.find(key);
        if (it == certs.end()) certs.emplace(key, c.ok);
        else it->second = it->second && c.ok;
    }
    for (const auto& [key, ok] : certs) row(key.first, key.second.str(), ok);

    for (const auto& p : P.ue) row("centralizer trivial", p.str(), centralizer_at(walk, model, p).cols() == 0);
    if (f.d <= 2)
        for (const auto& p : P.ue) {
            bool ok = true;
            for (int deg = 1; deg <= f.d * f.d + f.d; ++deg) ok = ok && exterior_power_invariance(walk, model, p, deg).invariant;
            row("exterior power invariance", p.str(), ok);
        }

    bool gamma_ok = true;
    std::string gamma_detail;
    for (int i = 0; i < s.gammas && gamma_ok; ++i) {
        int n = 1 + static_cast<int>(rng.below(12));
        Word a = random_word(rng, f.k(), n), b = random_word(rng, f.k(), n);
        try {
            prefix_swap_gamma(f, walk, a, b, n);
        } catch (const SadicError& e) {
            gamma_ok = false;
            gamma_detail = e.what();
        }
    }
    row("prefix swap gamma", "S", gamma_ok, gamma_detail);
    return r;
}

Result cmd_sadic_audit(const CarpetIFS& f, const State& s) {
    if (s.max_n < 1 || s.words < 1) throw std::invalid_argument("--max-n and --words must be positive");
    PlacePartition P = derive_places(f);
    Walk walk = build_walk(f, P);
    LieModel model(f.d);
    std::vector<int> lengths;
    for (int n = 1; n <= s.max_n; ++n) lengths.push_back(n);
    GrowthAudit audit = growth_audit(walk, model, lengths, static_cast<std::size_t>(s.words), s.seed);
    Result r;
    r.table.columns = {"place", "type", "n", "word", "log_norm", "bound_lo", "bound_hi", "tag"};
    for (const auto& row : audit.rows)
        r.table.rows.push_back({row.place.str(), to_string(P.type(row.place)), row.n, row.word, row.log_norm, row.bound_lo,
                                row.bound_hi, row.exact ? "exact" : "fp"});
    return r;
}

Result cmd_sadic_gamma(const CarpetIFS& f, const State& s) {
    PlacePartition P = derive_places(f);
    Walk walk = build_walk(f, P);
    LieModel model(f.d);
    GammaResult g = prefix_swap_gamma(f, walk, s.a, s.b, s.gamma_n);
    Result r;
    r.default_format = "json";
    r.results = {{"n", s.gamma_n}, {"y0", rational_vec(g.y0)}, {"y0_closed_form", rational_vec(g.y0_closed_form)},
                 {"identity_off_ue", g.identity_off_ue}};
    r.table.columns = {"place", "type", "op_norm", "ad_op_norm", "tag"};
    json places = json::array();
    auto norm_json = [](const OpNorm& nrm) { return nrm.exact ? json(nrm.value_exact.str()) : json(nrm.value); };
    for (const auto& p : P.S) {
        OpNorm g_norm = op_norm(g.gamma.at(p), p);
        OpNorm ad_norm = op_norm(adjoint(g.gamma, p, model, false));
        json e = {{"place", p.str()},
                  {"type", to_string(P.type(p))},
                  {"matrix", matrix_json(g.gamma.at(p))},
                  {"op_norm", norm_json(g_norm)},
                  {"ad_op_norm", norm_json(ad_norm)}};
        places.push_back(e);
        r.table.rows.push_back({p.str(), to_string(P.type(p)), e["op_norm"], e["ad_op_norm"], g_norm.exact ? "exact" : "fp"});
    }
    r.results["places"] = places;
    return r;
}

Result cmd_shift_ergodic(const State& s) {
    ShiftSpace B;
    if (s.p.empty()) {
        B = ShiftSpace::uniform(s.k);
    } else {
        std::vector<Rational> pe;
        for (const auto& t : s.p) {
            Coordinate c = parse_coordinate(t);
            if (!std::holds_alternative<Rational>(c)) throw std::invalid_argument("probabilities must be rational");
            pe.push_back(std::get<Rational>(c));
        }
        B = ShiftSpace::make_exact(pe);
        if (B.k != s.k) throw std::invalid_argument("--p length differs from --k");
    }
    WordFunctional f;
    if (s.function == "weighted-hits") f = WordFunctional::weighted_hits(s.symbol, s.depth);
    else if (s.function == "cylinder") f = WordFunctional::cylinder(s.cylinder);
    else throw CLI::ValidationError("--function", "expected weighted-hits or cylinder");
    if (s.depth < 1) throw std::invalid_argument("--depth must be positive");
    std::vector<CompletePrefixSet> sets;
    for (int n = 1; n <= s.depth; ++n) sets.push_back(CompletePrefixSet::uniform(B.k, n));
    ErgodicOptions opt;
    opt.n_tails = static_cast<std::size_t>(s.tails);
    opt.ref_samples = static_cast<std::size_t>(s.ref_samples);
    opt.seed = s.seed;
    opt.threads = threads_of(s);
    if (s.reference == "mc") opt.reference = Reference::monte_carlo;
    else if (s.reference == "exact") opt.reference = Reference::exact;
    else if (s.reference == "auto") opt.reference = Reference::automatic;
    else throw CLI::ValidationError("--reference", "expected mc, exact or auto");
    auto rows = ergodic_convergence_test(B, f, sets, opt);
    Result r;
    r.table.columns = {"n", "max_dev", "ref_value", "clt_bar"};
    for (const auto& row : rows)
        r.table.rows.push_back({row.n, row.max_dev, row.ref_value, row.exact ? json("exact") : json(row.clt_bar)});
    return r;
}

// ---------------------------------------------------------------------------

void emit(std::ostream& os, const Result& r, const std::string& format, const std::string& command, const std::string& hash,
          std::uint64_t seed, const json& config, std::optional<double> wall) {
    if (format == "csv") {
        os << "# command=" << command << '\n';
        os << "# config_hash=" << hash << '\n';
        os << "# seed=" << seed << '\n';
        os << "# version=" << CARPET_VERSION << '\n';
        if (wall) os << "# wall_time=" << format_double(*wall) << '\n';
        for (std::size_t i = 0; i < r.table.columns.size(); ++i) os << (i ? "," : "") << r.table.columns[i];
        os << '\n';
        for (const auto& row : r.table.rows) {
            for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << cell(row[i]);
            os << '\n';
        }
        return;
    }
    json j = {{"schema_version", 1},   {"version", CARPET_VERSION}, {"command", command},
              {"config_hash", hash},   {"seed", seed},              {"config", config},
              {"results", r.results.is_null() ? r.table.as_json() : r.results}};
    if (wall) j["wall_time"] = *wall;
    os << j.dump(2) << '\n';
}

/// Appends "--key value" for config-file keys not already given on the command line.
std::vector<std::string> apply_config(std::vector<std::string> args) {
    std::string path;
    for (std::size_t i = 0; i + 1 < args.size(); ++i)
        if (args[i] == "--config") path = args[i + 1];
    if (path.empty()) return args;
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open config file: " + path);
    json cfg;
    try {
        cfg = json::parse(in);
    } catch (const json::exception& e) {
        throw CLI::ValidationError("--config", e.what());
    }
    if (!cfg.is_object()) throw CLI::ValidationError("--config", "config must be a JSON object");
    static const std::map<std::string, std::string> alias{{"ifs_file", "ifs"}, {"n_samples", "n"}};
    for (const auto& [key, val] : cfg.items()) {
        std::string name = alias.count(key) ? alias.at(key) : key;
        for (auto& ch : name)
            if (ch == '_') ch = '-';
        std::string flag = "--" + name;
        if (std::find(args.begin(), args.end(), flag) != args.end()) continue;
        std::string text;
        if (val.is_array()) {
            for (std::size_t i = 0; i < val.size(); ++i) text += (i ? "," : "") + (val[i].is_string() ? val[i].get<std::string>() : val[i].dump());
        } else {
            text = val.is_string() ? val.get<std::string>() : val.dump();
        }
        args.push_back(flag);
        args.push_back(text);
    }
    return args;
}

}  // namespace

int run(const std::vector<std::string>& raw, std::ostream& out, std::ostream& err) {
    State s;
    CLI::App app{"Carpet fractals, lattice flows and S-adic random walks", "carpet"};
    app.set_version_flag("--version", CARPET_VERSION);
    app.require_subcommand(1);

    auto common = [&](CLI::App* c, bool seeded) {
        if (seeded) c->add_option("--seed", s.seed, "Master seed");
        c->add_option("--out", s.out, "Output path, - for stdout");
        c->add_option("--format", s.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
        c->add_option("--threads", s.threads, "Worker threads (default: CARPET_THREADS or hardware)");
        c->add_flag("--timing", s.timing, "Include wall time in the output");
        c->add_option("--config", s.config, "JSON file of option values");
    };
    auto with_ifs = [&](CLI::App* c) { c->add_option("--ifs", s.ifs, "IFS JSON file")->required(); };

    auto* ifs = app.add_subcommand("ifs", "Iterated function systems")->require_subcommand(1);
    auto* ifs_validate = ifs->add_subcommand("validate", "Separation and irreducibility checks");
    with_ifs(ifs_validate);
    common(ifs_validate, false);
    auto* ifs_sample = ifs->add_subcommand("sample", "Sample the Bernoulli measure");
    with_ifs(ifs_sample);
    ifs_sample->add_option("--n", s.n, "Number of points")->default_val(1000);
    ifs_sample->add_option("--trunc", s.trunc, "Word truncation length")->default_val(64);
    common(ifs_sample, true);

    auto* flow = app.add_subcommand("flow", "Diagonal flows on lattices")->require_subcommand(1);
    auto* flow_trace = flow->add_subcommand("trace", "Systole along a_t Lambda_x");
    flow_trace->add_option("--x", s.x, "Coordinates")->delimiter(',')->required();
    flow_trace->add_option("--weights", s.weights, "Weight vector")->delimiter(',');
    flow_trace->add_option("--norm", s.norm, "sup or euclidean");
    flow_trace->add_option("--t0", s.t0, "Start time");
    flow_trace->add_option("--T", s.T, "End time");
    flow_trace->add_option("--dt", s.dt, "Time step");
    flow_trace->add_option("--eps", s.eps, "Thresholds for K_eps flags")->delimiter(',');
    common(flow_trace, false);

    auto* equi = app.add_subcommand("equi", "Equidistribution experiments")->require_subcommand(1);
    auto* siegel = equi->add_subcommand("siegel", "Siegel transform statistic");
    with_ifs(siegel);
    siegel->add_option("--t", s.t, "Flow time");
    siegel->add_option("--R", s.R, "Ball radius");
    siegel->add_option("--n", s.n, "Samples")->default_val(10000);
    siegel->add_option("--weights", s.weights, "Weight vector")->delimiter(',');
    common(siegel, true);
    auto* nondiv = equi->add_subcommand("nondiv", "Nondivergence profile");
    with_ifs(nondiv);
    nondiv->add_option("--t", s.t, "Flow time");
    nondiv->add_option("--eps", s.eps, "Systole thresholds")->delimiter(',');
    nondiv->add_option("--n", s.n, "Samples")->default_val(10000);
    nondiv->add_option("--weights", s.weights, "Weight vector")->delimiter(',');
    common(nondiv, true);

    auto* dioph = app.add_subcommand("dioph", "Diophantine classification")->require_subcommand(1);
    auto* classify = dioph->add_subcommand("classify", "Arithmetic and dynamical verdicts for one point");
    classify->add_option("--x", s.x, "Coordinates: p/q, decimals or q:a:b:D")->delimiter(',')->required();
    classify->add_option("--weights", s.weights, "Weight vector")->delimiter(',');
    classify->add_option("--norm", s.norm, "sup or euclidean");
    classify->add_option("--eps", s.eps_one, "Dirichlet radius");
    classify->add_option("--t0", s.t0, "Dirichlet window start")->default_val(1.0);
    classify->add_option("--T", s.horizon, "Denominator horizon");
    classify->add_option("--c", s.c, "Threshold for the BA verdicts");
    common(classify, false);
    auto* fractal = dioph->add_subcommand("fractal-experiment", "BA and Dirichlet fractions over theta");
    with_ifs(fractal);
    fractal->add_option("--ladder", s.ladder, "Horizons T")->delimiter(',');
    fractal->add_option("--thresholds", s.thresholds, "Margin thresholds c")->delimiter(',');
    fractal->add_option("--eps", s.eps_one, "Dirichlet radius");
    fractal->add_option("--t0", s.t0, "Dirichlet window start")->default_val(1.0);
    fractal->add_option("--n", s.n, "Samples")->default_val(2000);
    fractal->add_option("--weights", s.weights, "Weight vector")->delimiter(',');
    common(fractal, true);

    auto* sadic = app.add_subcommand("sadic", "S-adic random walk")->require_subcommand(1);
    auto* places = sadic->add_subcommand("places", "The place partition");
    with_ifs(places);
    common(places, false);
    auto* verify = sadic->add_subcommand("verify", "Exact identity suite");
    with_ifs(verify);
    verify->add_option("--points", s.points, "Random rational points");
    verify->add_option("--pairs", s.pairs, "Random word pairs");
    verify->add_option("--gammas", s.gammas, "Random prefix swaps");
    common(verify, true);
    auto* audit = sadic->add_subcommand("audit", "Operator norm growth");
    with_ifs(audit);
    audit->add_option("--max-n", s.max_n, "Longest word");
    audit->add_option("--words", s.words, "Random words");
    common(audit, true);
    auto* gamma = sadic->add_subcommand("gamma", "Prefix swap element");
    with_ifs(gamma);
    gamma->add_option("--a", s.a, "Word a")->delimiter(',')->required();
    gamma->add_option("--b", s.b, "Word b")->delimiter(',')->required();
    gamma->add_option("--n", s.gamma_n, "Prefix length")->required();
    common(gamma, false);

    auto* shift = app.add_subcommand("shift", "Bernoulli shift")->require_subcommand(1);
    auto* ergodic = shift->add_subcommand("ergodic", "Prefix ergodic averages");
    ergodic->add_option("--k", s.k, "Alphabet size");
    ergodic->add_option("--p", s.p, "Rational probabilities")->delimiter(',');
    ergodic->add_option("--depth", s.depth, "Functional depth and longest prefix length");
    ergodic->add_option("--tails", s.tails, "Random tails");
    ergodic->add_option("--function", s.function, "weighted-hits or cylinder");
    ergodic->add_option("--symbol", s.symbol, "Symbol for weighted-hits");
    ergodic->add_option("--cylinder", s.cylinder, "Cylinder word")->delimiter(',');
    ergodic->add_option("--ref-samples", s.ref_samples, "Monte Carlo reference samples");
    ergodic->add_option("--reference", s.reference, "mc, exact or auto");
    common(ergodic, true);

    std::vector<std::string> args;
    try {
        args = apply_config(raw);
    } catch (const std::ios_base::failure& e) {
        err << "error: " << e.what() << '\n';
        return kIo;
    } catch (const CLI::Error& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }
    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::CallForVersion&) {
        out << CARPET_VERSION << '\n';
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n' << "run with --help for usage\n";
        return kUsage;
    }

    CLI::App* leaf = &app;
    std::string command;
    while (!leaf->get_subcommands().empty()) {
        leaf = leaf->get_subcommands().front();
        command += (command.empty() ? "" : " ") + leaf->get_name();
    }

    auto start = std::chrono::steady_clock::now();
    std::optional<CarpetIFS> f;
    Result res;
    try {
        if (!s.ifs.empty()) f = load_ifs(s.ifs);
        if (leaf == ifs_validate) res = cmd_ifs_validate(*f);
        else if (leaf == ifs_sample) res = cmd_ifs_sample(*f, s);
        else if (leaf == flow_trace) res = cmd_flow_trace(s);
        else if (leaf == siegel) res = cmd_equi_siegel(*f, s);
        else if (leaf == nondiv) res = cmd_equi_nondiv(*f, s);
        else if (leaf == classify) res = cmd_dioph_classify(s);
        else if (leaf == fractal) res = cmd_dioph_fractal(*f, s);
        else if (leaf == places) res = cmd_sadic_places(*f);
        else if (leaf == verify) res = cmd_sadic_verify(*f, s, err);
        else if (leaf == audit) res = cmd_sadic_audit(*f, s);
        else if (leaf == gamma) res = cmd_sadic_gamma(*f, s);
        else if (leaf == ergodic) res = cmd_shift_ergodic(s);
        else throw CLI::CallForHelp();
    } catch (const std::ios_base::failure& e) {
        err << "error: " << e.what() << '\n';
        return kIo;
    } catch (const CLI::Error& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const GammaIndexError& e) {
        err << "error: " << e.what() << '\n';
        return kVerifyFailed;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::domain_error& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kVerifyFailed;
    }
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    json config = hashed_config(leaf, command, f);
    std::string hash = sha256_hex(config.dump());
    std::string format = s.format.empty() ? res.default_format : s.format;
    std::optional<double> timing;
    if (s.timing) timing.emplace(wall);
    if (s.out == "-") {
        emit(out, res, format, command, hash, s.seed, config, timing);
    } else {
        std::ofstream file(s.out, std::ios::binary);
        if (!file) {
            err << "error: cannot write " << s.out << '\n';
            return kIo;
        }
        emit(file, res, format, command, hash, s.seed, config, timing);
        file.flush();
        if (!file) {
            err << "error: write failed for " << s.out << '\n';
            return kIo;
        }
    }
    return res.failed ? kVerifyFailed : kOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, out, err);
}

}  // namespace carpet::cli

#pragma once

// Weighted badly approximable and Dirichlet improvable tests, arithmetic and dynamical.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "carpet/arith.hpp"
#include "carpet/ifs.hpp"
#include "carpet/lattice.hpp"

namespace carpet {

class DiophError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// a + b sqrt(D), D > 0 not a square.
struct QuadraticIrrational {
    Rational a, b;
    long D = 5;
    double value() const;
    /// "q:a:b:D", e.g. "q:-1/2:1/2:5" for the golden ratio conjugate.
    static QuadraticIrrational parse(const std::string& text);
};

/// A coordinate is either exact or a quadratic irrational.
using Coordinate = std::variant<Rational, QuadraticIrrational>;

/// Accepts "p/q", decimal literals (converted exactly) and "q:a:b:D".
Coordinate parse_coordinate(const std::string& text);
double to_double(const Coordinate& c);

struct BAReport {
    std::vector<double> x;
    std::vector<double> r;
    long horizon_T = 0;
    /// (Q, margin) at each Q where the running minimum drops.
    std::vector<std::pair<long, double>> margin_trace;
    double min_margin = 0.0;
    long argmin_Q = 0;
    /// Running minimum at each checkpoint requested.
    std::vector<std::pair<long, double>> checkpoints;
};

/// Q max_i |Q x_i - P_i|^{1/r_i}, P_i = round(Q x_i), scanned over Q = 1..T.
BAReport ba_test(const std::vector<Coordinate>& x, const WeightVector& r, long T,
                 const std::vector<long>& checkpoints = {});
BAReport ba_test(const std::vector<double>& x, const WeightVector& r, long T,
                 const std::vector<long>& checkpoints = {});

enum class RadiusProvenance { exact, user_supplied, lower_bound };
std::string to_string(RadiusProvenance p);

struct CriticalRadius {
    NormSpec norm;
    double epsilon_norm = 1.0;
    RadiusProvenance provenance = RadiusProvenance::exact;
};

CriticalRadius critical_radius(const NormSpec& norm, int d, std::optional<double> user_value = std::nullopt);

struct DirichletReport {
    std::vector<double> x;
    std::vector<double> r;
    std::string norm;
    double eps = 0.0;
    double t0 = 0.0, T = 0.0, dt = 0.0;
    bool always_below = false;
    std::vector<SystolePoint> systole_trace;
    /// Sup norm only: the arithmetic scan on the same grid.
    std::optional<bool> arithmetic_always_below;
    std::optional<double> grid_agreement;
};

/// Grid evaluation of lambda_1(a_t Lambda_x) on [t0, T] with local refinement near eps.
DirichletReport dirichlet_test(const std::vector<double>& x, const WeightVector& r, const NormSpec& norm, double eps,
                               double t0, double T, double dt = 0.02);

/// Sup norm: closed intervals of t on which a given Q witnesses lambda_1(a_t Lambda_x) <= eps,
/// merged over Q; returns whether [t0, t1] is covered.
bool sup_dirichlet_covered(const std::vector<double>& x, const WeightVector& r, double eps, double t0, double t1);
/// Pointwise form at a single t.
bool sup_dirichlet_at(const std::vector<double>& x, const WeightVector& r, double eps, double t);

struct DecayRow {
    long T = 0;
    std::string kind;  // "ba" or "dirichlet"
    double threshold = 0.0;
    double fraction = 0.0;
    double clt_bar = 0.0;
};

struct MeasureZeroOptions {
    std::vector<double> thresholds{0.01};
    std::vector<long> T_ladder{100, 1000, 10000};
    double dirichlet_eps = 0.9;
    double dirichlet_t0 = 1.0;
    std::size_t n_samples = 2000;
    std::uint64_t seed = 1;
    int threads = 1;
};

/// BA survival and Dirichlet-up-to-horizon fractions over theta samples (sup norm).
std::vector<DecayRow> measure_zero_experiment(const CarpetIFS& ifs, const WeightVector& r,
                                              const MeasureZeroOptions& opt);

}  // namespace carpet

#pragma once

// Carpet iterated function systems f_i(x) = rho x + y_i and their Bernoulli measures.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "carpet/arith.hpp"
#include "carpet/qmatrix.hpp"
#include "carpet/rng.hpp"

namespace carpet {

class IfsError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Letters are 1-based, in 1..k.
using Word = std::vector<int>;

enum class Separation { strong, open_set, unknown };

std::string to_string(Separation s);
Separation separation_from_string(const std::string& s);

struct CarpetIFS {
    int d = 1;
    Rational rho;
    std::vector<QVector> y;
    std::vector<double> p;
    /// Set when the probabilities were given as exact fractions.
    std::optional<std::vector<Rational>> p_exact;
    std::optional<Separation> separation_assertion;

    /// Validating constructor; throws IfsError.
    static CarpetIFS make(int d, Rational rho, std::vector<QVector> y, std::vector<double> p,
                          std::optional<Separation> assertion = std::nullopt);
    /// Uniform probability vector, stored exactly.
    static CarpetIFS uniform(int d, Rational rho, std::vector<QVector> y);

    int k() const { return static_cast<int>(y.size()); }
    double rho_d() const { return rho_double_; }
    const std::vector<double>& y_double(int i) const { return y_double_[static_cast<std::size_t>(i - 1)]; }

    /// f_i(x), exact.
    QVector apply(int i, const QVector& x) const;
    /// f_i(x) in place, doubles.
    void apply(int i, double* x) const;
    /// Fixed point y_i / (1 - rho).
    QVector fixed_point(int i) const;

private:
    void cache();
    double rho_double_ = 0.0;
    std::vector<std::vector<double>> y_double_;
};

/// Middle-thirds Cantor set, equal weights.
CarpetIFS middle_thirds();
/// Sierpinski carpet: rho = 1/3, the eight digit cells around the centre.
CarpetIFS sierpinski_carpet();
/// rho = 1/2, y = {0, 1/2}; its Bernoulli measure is Lebesgue on [0, 1].
CarpetIFS lebesgue_interval();
/// rho = 2/3, y = {0, 1/5}.
CarpetIFS rho23_example();

/// JSON text {d, rho, translations, probs, separation_assertion?}.
CarpetIFS ifs_from_json(const std::string& text);
CarpetIFS load_ifs(const std::string& path);
std::string ifs_to_json(const CarpetIFS& ifs);

struct ValidationReport {
    Separation separation = Separation::unknown;
    bool spanning_irreducible = false;
    bool digit_system = false;
    /// Digit vectors b*y_i (shifted for negative rho) when digit_system.
    std::vector<std::vector<long>> digits;
    long base = 0;
};

ValidationReport validate(const CarpetIFS& ifs);

struct AttractorPoint {
    std::vector<double> coords;
    double truncation_error = 0.0;
};

/// 2 max_i |y_i / (1 - rho)| + |x0|.
double diameter_bound(const CarpetIFS& ifs, const QVector& x0);

/// f_{w_1} o ... o f_{w_n}(x0), exact.
QVector cod_exact(const CarpetIFS& ifs, const Word& w, const QVector& x0);
AttractorPoint cod(const CarpetIFS& ifs, const Word& w, const QVector& x0);

/// Samples of theta stored row-major, d doubles per point.
struct PointCloud {
    int d = 1;
    std::vector<double> xs;
    std::size_t size() const { return d > 0 ? xs.size() / static_cast<std::size_t>(d) : 0; }
    const double* at(std::size_t i) const { return xs.data() + i * static_cast<std::size_t>(d); }
};

/// Sequential sampler: i.i.d. words of length n_trunc pushed through cod(., 0).
class ThetaSampler {
public:
    ThetaSampler(const CarpetIFS& ifs, int n_trunc, std::uint64_t seed);
    AttractorPoint next();
    void next(double* out);
    Word next_word(int length);

private:
    const CarpetIFS* ifs_;
    int n_trunc_;
    Rng rng_;
    double err_;
};

/// `count` samples; chunked with derived seeds so the result is independent of `threads`.
PointCloud sample_theta(const CarpetIFS& ifs, int n_trunc, std::uint64_t seed, std::size_t count,
                        int threads = 1);

/// f o f_i o f^{-1} for f(x) = c x + v.
CarpetIFS conjugate(const CarpetIFS& ifs, const Rational& c, const QVector& v);

/// {x : normal . x <= offset} (or < when strict). A zero normal with offset >= 0 is everything.
struct HalfSpace {
    std::vector<double> normal;
    double offset = 0.0;
    bool strict = false;
    bool contains(const double* x) const;
    static HalfSpace everything(int d) { return {std::vector<double>(static_cast<std::size_t>(d), 0.0), 0.0, false}; }
};

struct RatioPoint {
    int n = 0;
    double ratio = 0.0;
    double clt_bar = 0.0;
};

/// theta(B n f_w1..wn(K)) / theta(f_w1..wn(K)) for n = 1..len(w).
std::vector<RatioPoint> density_ratio_trace(const CarpetIFS& ifs, const HalfSpace& B, const Word& w,
                                            std::size_t n_samples, std::uint64_t seed);

struct FriendlinessOptions {
    std::size_t n_samples = 200000;
    int n_scales = 6;
    std::uint64_t seed = 1;
    /// Ladder r_j = r0 / step^j, j = 0..n_scales-1.
    double r0 = 0.25;
    double step = 3.0;
    std::size_t n_centers = 128;
    std::size_t n_hyperplanes = 16;
    /// Fixed affine hyperplane {z : normal . (z - point) = 0}; random ones otherwise.
    std::optional<std::vector<double>> hyperplane_normal;
    std::optional<std::vector<double>> hyperplane_point;
    int n_trunc = 64;
    int threads = 1;
};

struct DecayPoint {
    double eps_over_r = 0.0;
    double ratio = 0.0;
};

struct FriendlinessEstimate {
    double federer_D = 1.0;
    double decay_C = 1.0;
    double decay_alpha = 0.0;
    std::size_t sample_count = 0;
    std::uint64_t seed = 0;
    std::vector<DecayPoint> decay_points;
};

FriendlinessEstimate estimate_friendliness(const CarpetIFS& ifs, const FriendlinessOptions& opt);

}  // namespace carpet

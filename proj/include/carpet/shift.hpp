#pragma once

// Bernoulli shift space, cylinder sets, complete prefix sets and prefix averages.

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "carpet/arith.hpp"
#include "carpet/ifs.hpp"
#include "carpet/rng.hpp"

namespace carpet {

class ShiftError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct ShiftSpace {
    int k = 2;
    std::vector<double> p;
    std::optional<std::vector<Rational>> p_exact;

    /// Throws ShiftError on a bad probability vector.
    static ShiftSpace make(std::vector<double> p);
    static ShiftSpace make_exact(std::vector<Rational> p);
    static ShiftSpace uniform(int k);
    static ShiftSpace of(const CarpetIFS& ifs);

    /// beta([a]) = prod p_{a_i}
    long double beta(const Word& a) const;
    std::optional<Rational> beta_exact(const Word& a) const;

    Word sample(Rng& rng, std::size_t len) const;
};

class CompletePrefixSet {
public:
    /// Checks letters, prefix-freeness and completeness (Kraft sum exactly 1); throws ShiftError.
    static CompletePrefixSet from_words(int k, std::vector<Word> words);
    /// All k^n words of length n.
    static CompletePrefixSet uniform(int k, int n);
    /// Words ending at the first occurrence of s, plus the s-free words of length L.
    static CompletePrefixSet first_hit(int k, int s, int L);

    int k() const { return k_; }
    const std::vector<Word>& words() const { return words_; }
    std::size_t size() const { return words_.size(); }
    int min_length() const { return min_len_; }
    int max_length() const { return max_len_; }

private:
    int k_ = 2;
    std::vector<Word> words_;
    int min_len_ = 0, max_len_ = 0;
};

/// A bounded function of infinite words that only reads the first `depth` letters.
struct WordFunctional {
    int depth = 0;
    std::function<double(const Word&)> eval;
    /// Exact values, when available.
    std::function<Rational(const Word&)> exact;

    static WordFunctional constant(const Rational& c);
    /// 1 on the cylinder [c].
    static WordFunctional cylinder(const Word& c);
    /// sum_{i <= depth} 2^{-i} 1{b_i = s}
    static WordFunctional weighted_hits(int s, int depth);
    /// g(b_{m+1} b_{m+2} ...)
    static WordFunctional shifted(const WordFunctional& g, int m);
};

struct PrefixAverage {
    double value = 0.0;
    std::optional<Rational> exact;
};

/// sum_{a in P} f(ab) beta([a]); the tail must hold at least f.depth - min length letters.
/// The exact sum is formed when f and p are exact and `want_exact` is set.
PrefixAverage prefix_average(const WordFunctional& f, const CompletePrefixSet& P, const ShiftSpace& B, const Word& tail,
                             bool want_exact = true);

struct ErgodicRow {
    int n = 0;  // min length of the prefix set
    double max_dev = 0.0;
    double ref_value = 0.0;
    double clt_bar = 0.0;  // of the reference; 0 when exact
    bool exact = false;    // deviations computed exactly against the exact integral
};

enum class Reference { monte_carlo, exact, automatic };

struct ErgodicOptions {
    /// automatic: exact when f and p are exact and k^depth <= 10^6, else Monte Carlo.
    Reference reference = Reference::monte_carlo;
    std::size_t n_tails = 100;
    std::size_t ref_samples = 1000000;
    std::uint64_t seed = 1;
    int threads = 1;
};

/// max over random tails b of |A_P f(b) - int f dbeta|, one row per prefix set.
std::vector<ErgodicRow> ergodic_convergence_test(const ShiftSpace& B, const WordFunctional& f,
                                                 const std::vector<CompletePrefixSet>& sets, const ErgodicOptions& opt);

}  // namespace carpet

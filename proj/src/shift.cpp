#include "carpet/shift.hpp"

#include <algorithm>
#include <cmath>

#include "carpet/parallel.hpp"
#include "carpet/report.hpp"

namespace carpet {

namespace {

constexpr double kMaxWords = 1e7;

void check_letters(int k, const Word& w) {
    for (int c : w)
        if (c < 1 || c > k) throw ShiftError("letter out of range 1.." + std::to_string(k));
}

/// Neumaier summation in long double.
struct KahanSum {
    long double sum = 0.0L, comp = 0.0L;
    void add(long double x) {
        long double t = sum + x;
        if (std::fabs(sum) >= std::fabs(x)) comp += (sum - t) + x;
        else comp += (x - t) + sum;
        sum = t;
    }
    long double value() const { return sum + comp; }
};

}  // namespace

ShiftSpace ShiftSpace::make(std::vector<double> p) {
    if (p.size() < 2) throw ShiftError("alphabet needs at least two letters");
    double sum = 0.0;
    for (double x : p) {
        if (!(x > 0.0) || !std::isfinite(x)) throw ShiftError("probabilities must be positive");
        sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw ShiftError("probabilities must sum to 1");
    ShiftSpace B;
    B.k = static_cast<int>(p.size());
    B.p = std::move(p);
    return B;
}

ShiftSpace ShiftSpace::make_exact(std::vector<Rational> p) {
    Rational sum(0);
    std::vector<double> pd;
    for (const auto& x : p) {
        if (x <= Rational(0)) throw ShiftError("probabilities must be positive");
        sum += x;
        pd.push_back(x.to_double());
    }
    if (sum != Rational(1)) throw ShiftError("probabilities must sum to exactly 1");
    ShiftSpace B = make(std::move(pd));
    B.p_exact = std::move(p);
    return B;
}

ShiftSpace ShiftSpace::uniform(int k) {
    if (k < 2) throw ShiftError("alphabet needs at least two letters");
    return make_exact(std::vector<Rational>(static_cast<std::size_t>(k), Rational(1, k)));
}

ShiftSpace ShiftSpace::of(const CarpetIFS& ifs) {
    if (ifs.p_exact) return make_exact(*ifs.p_exact);
    return make(ifs.p);
}

long double ShiftSpace::beta(const Word& a) const {
    check_letters(k, a);
    long double b = 1.0L;
    for (int c : a) b *= static_cast<long double>(p[static_cast<std::size_t>(c - 1)]);
    return b;
}

std::optional<Rational> ShiftSpace::beta_exact(const Word& a) const {
    if (!p_exact) return std::nullopt;
    check_letters(k, a);
    Rational b(1);
    for (int c : a) b *= (*p_exact)[static_cast<std::size_t>(c - 1)];
    return b;
}

Word ShiftSpace::sample(Rng& rng, std::size_t len) const {
    Word w(len);
    for (auto& c : w) c = rng.categorical(p) + 1;
    return w;
}

// ---------------------------------------------------------------------------

CompletePrefixSet CompletePrefixSet::from_words(int k, std::vector<Word> words) {
    if (k < 2) throw ShiftError("alphabet needs at least two letters");
    if (words.empty()) throw ShiftError("empty prefix set");
    for (const auto& w : words) {
        if (w.empty()) throw ShiftError("empty word in prefix set");
        check_letters(k, w);
    }
    std::sort(words.begin(), words.end());
    // in lexicographic order a prefix sorts immediately before some extension of it
    for (std::size_t i = 0; i + 1 < words.size(); ++i) {
        const Word& a = words[i];
        const Word& b = words[i + 1];
        if (a.size() <= b.size() && std::equal(a.begin(), a.end(), b.begin()))
            throw ShiftError("prefix set is not prefix-free");
    }
    // prefix-free and sum k^{-len} = 1 exactly <=> the cylinders partition the shift
    Rational kraft(0);
    for (const auto& w : words) kraft += Rational(1, k).pow(static_cast<long>(w.size()));
    if (kraft != Rational(1)) throw ShiftError("prefix set is not complete");
    CompletePrefixSet P;
    P.k_ = k;
    P.min_len_ = static_cast<int>(words.front().size());
    P.max_len_ = 0;
    for (const auto& w : words) {
        P.min_len_ = std::min(P.min_len_, static_cast<int>(w.size()));
        P.max_len_ = std::max(P.max_len_, static_cast<int>(w.size()));
    }
    P.words_ = std::move(words);
    return P;
}

CompletePrefixSet CompletePrefixSet::uniform(int k, int n) {
    if (k < 2) throw ShiftError("alphabet needs at least two letters");
    if (n < 1) throw ShiftError("prefix length must be at least 1");
    if (std::pow(static_cast<double>(k), n) > kMaxWords) throw ShiftError("prefix set exceeds 10^7 words");
    std::vector<Word> words;
    Word w(static_cast<std::size_t>(n), 1);
    for (;;) {
        words.push_back(w);
        int i = n - 1;
        while (i >= 0 && w[static_cast<std::size_t>(i)] == k) w[static_cast<std::size_t>(i--)] = 1;
        if (i < 0) break;
        ++w[static_cast<std::size_t>(i)];
    }
    return from_words(k, std::move(words));
}

CompletePrefixSet CompletePrefixSet::first_hit(int k, int s, int L) {
    if (k < 2) throw ShiftError("alphabet needs at least two letters");
    if (s < 1 || s > k) throw ShiftError("symbol out of range");
    if (L < 1) throw ShiftError("cap length must be at least 1");
    if (L * std::pow(static_cast<double>(k - 1), L) > kMaxWords) throw ShiftError("prefix set exceeds 10^7 words");
    std::vector<Word> words;
    std::vector<Word> free{Word{}};  // s-free words of the current length
    for (int len = 1; len <= L; ++len) {
        for (const auto& f : free) {
            Word w = f;
            w.push_back(s);
            words.push_back(std::move(w));
        }
        std::vector<Word> next;
        for (const auto& f : free)
            for (int c = 1; c <= k; ++c)
                if (c != s) {
                    Word w = f;
                    w.push_back(c);
                    next.push_back(std::move(w));
                }
        free = std::move(next);
    }
    for (auto& f : free) words.push_back(std::move(f));
    return from_words(k, std::move(words));
}

// ---------------------------------------------------------------------------

WordFunctional WordFunctional::constant(const Rational& c) {
    double v = c.to_double();
    return {0, [v](const Word&) { return v; }, [c](const Word&) { return c; }};
}

WordFunctional WordFunctional::cylinder(const Word& c) {
    auto hit = [c](const Word& w) { return std::equal(c.begin(), c.end(), w.begin()); };
    return {static_cast<int>(c.size()), [hit](const Word& w) { return hit(w) ? 1.0 : 0.0; },
            [hit](const Word& w) { return Rational(hit(w) ? 1 : 0); }};
}

WordFunctional WordFunctional::weighted_hits(int s, int depth) {
    if (depth < 1) throw ShiftError("depth must be at least 1");
    WordFunctional f;
    f.depth = depth;
    f.eval = [s, depth](const Word& w) {
        double v = 0.0, scale = 0.5;
        for (int i = 0; i < depth; ++i, scale *= 0.5)
            if (w[static_cast<std::size_t>(i)] == s) v += scale;
        return v;
    };
    f.exact = [s, depth](const Word& w) {
        Rational v(0), scale(1, 2);
        for (int i = 0; i < depth; ++i, scale = scale / Rational(2))
            if (w[static_cast<std::size_t>(i)] == s) v += scale;
        return v;
    };
    return f;
}

WordFunctional WordFunctional::shifted(const WordFunctional& g, int m) {
    if (m < 0) throw ShiftError("shift must be nonnegative");
    WordFunctional f;
    f.depth = g.depth + m;
    auto ge = g.eval;
    f.eval = [ge, m](const Word& w) { return ge(Word(w.begin() + m, w.end())); };
    if (g.exact) {
        auto gx = g.exact;
        f.exact = [gx, m](const Word& w) { return gx(Word(w.begin() + m, w.end())); };
    }
    return f;
}

PrefixAverage prefix_average(const WordFunctional& f, const CompletePrefixSet& P, const ShiftSpace& B, const Word& tail,
                             bool want_exact) {
    if (P.k() != B.k) throw ShiftError("prefix set and shift space have different alphabets");
    if (static_cast<int>(tail.size()) + P.min_length() < f.depth)
        throw ShiftError("tail too short for the functional depth");
    check_letters(B.k, tail);
    const bool exact = want_exact && B.p_exact && static_cast<bool>(f.exact);
    KahanSum acc;
    Rational ex(0);
    Word ab;
    for (const auto& a : P.words()) {
        ab = a;
        ab.insert(ab.end(), tail.begin(), tail.end());
        acc.add(static_cast<long double>(f.eval(ab)) * B.beta(a));
        if (exact) ex += f.exact(ab) * *B.beta_exact(a);
    }
    PrefixAverage r;
    if (exact) {
        r.exact = ex;
        r.value = ex.to_double();
    } else {
        r.value = static_cast<double>(acc.value());
    }
    return r;
}

std::vector<ErgodicRow> ergodic_convergence_test(const ShiftSpace& B, const WordFunctional& f,
                                                 const std::vector<CompletePrefixSet>& sets, const ErgodicOptions& opt) {
    if (sets.empty()) throw ShiftError("no prefix sets");
    for (std::size_t i = 0; i + 1 < sets.size(); ++i)
        if (sets[i + 1].min_length() <= sets[i].min_length())
            throw ShiftError("min lengths of the prefix sets must be strictly increasing");
    if (opt.n_tails == 0) throw ShiftError("need at least one tail");
    const auto depth = static_cast<std::size_t>(std::max(f.depth, 1));

    bool exact_ok = B.p_exact && f.exact && std::pow(static_cast<double>(B.k), f.depth) <= 1e6;
    bool use_exact = opt.reference == Reference::exact || (opt.reference == Reference::automatic && exact_ok);
    if (use_exact && !exact_ok) throw ShiftError("exact reference needs exact f, exact p and k^depth <= 10^6");

    double ref = 0.0, ref_bar = 0.0;
    Rational ref_exact(0);
    if (use_exact) {
        ref_exact = *prefix_average(f, CompletePrefixSet::uniform(B.k, std::max(f.depth, 1)), B, Word{}).exact;
        ref = ref_exact.to_double();
    } else {
        if (opt.ref_samples < 2) throw ShiftError("Monte Carlo reference needs at least two samples");
        std::uint64_t ref_seed = mix64(opt.seed ^ 0x7265666572656e63ULL);
        auto parts = map_chunks<RunningStats>(opt.ref_samples, kChunk, opt.threads, [&](std::size_t c, std::size_t b, std::size_t e) {
            Rng rng(derive_seed(ref_seed, c));
            RunningStats st;
            for (std::size_t i = b; i < e; ++i) st.add(f.eval(B.sample(rng, depth)));
            return st;
        });
        RunningStats all;
        for (const auto& s : parts) all.merge(s);
        ref = all.mean;
        ref_bar = all.clt_bar();
    }

    // per tail: deviation for every prefix set
    auto dev = map_chunks<std::vector<std::vector<double>>>(opt.n_tails, 4, opt.threads, [&](std::size_t, std::size_t b, std::size_t e) {
        std::vector<std::vector<double>> out;
        for (std::size_t i = b; i < e; ++i) {
            Rng rng(derive_seed(opt.seed, i));
            Word tail = B.sample(rng, depth);
            std::vector<double> row;
            for (const auto& P : sets) {
                PrefixAverage A = prefix_average(f, P, B, tail, use_exact);
                row.push_back(use_exact ? (*A.exact - ref_exact).abs().to_double() : std::abs(A.value - ref));
            }
            out.push_back(std::move(row));
        }
        return out;
    });

    std::vector<ErgodicRow> rows;
    for (std::size_t j = 0; j < sets.size(); ++j) {
        ErgodicRow r;
        r.n = sets[j].min_length();
        r.ref_value = ref;
        r.clt_bar = ref_bar;
        r.exact = use_exact;
        for (const auto& chunk : dev)
            for (const auto& row : chunk) r.max_dev = std::max(r.max_dev, row[j]);
        rows.push_back(r);
    }
    return rows;
}

}  // namespace carpet

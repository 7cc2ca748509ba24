#include "carpet/arith.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <ostream>

namespace carpet {

Rational::Rational(long long n) : q_(0) {
    q_.get_num() = BigInt(std::to_string(n), 10);
}

Rational::Rational(const BigInt& num, const BigInt& den) : q_(num, den) {
    if (den == 0) throw ArithError("rational with zero denominator");
    q_.canonicalize();
}

Rational Rational::parse(std::string_view text) {
    auto strip = [](std::string_view s) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
        return s;
    };
    auto parse_int = [&](std::string_view s) {
        s = strip(s);
        std::string digits(s);
        if (!digits.empty() && digits.front() == '+') digits.erase(0, 1);
        bool ok = !digits.empty();
        for (std::size_t i = 0; i < digits.size() && ok; ++i) {
            char c = digits[i];
            ok = std::isdigit(static_cast<unsigned char>(c)) || (i == 0 && c == '-' && digits.size() > 1);
        }
        if (!ok) throw ArithError("malformed rational: '" + std::string(text) + "'");
        return BigInt(digits, 10);
    };
    auto slash = text.find('/');
    if (slash == std::string_view::npos) return Rational(parse_int(text));
    return Rational(parse_int(text.substr(0, slash)), parse_int(text.substr(slash + 1)));
}

long double Rational::to_long_double() const {
    // Good enough for the sizes we meet: scale by a power of two first.
    long e_num = 0, e_den = 0;
    double n = mpz_get_d_2exp(&e_num, q_.get_num_mpz_t());
    double d = mpz_get_d_2exp(&e_den, q_.get_den_mpz_t());
    return std::ldexp(static_cast<long double>(n) / d, static_cast<int>(e_num - e_den));
}

Rational Rational::abs() const { return Rational(mpq_class(::abs(q_))); }

Rational Rational::inverse() const {
    if (is_zero()) throw ArithError("inverse of zero");
    return Rational(mpq_class(1 / q_));
}

Rational Rational::pow(long e) const {
    if (e < 0) return inverse().pow(-e);
    BigInt n, d;
    mpz_pow_ui(n.get_mpz_t(), q_.get_num_mpz_t(), static_cast<unsigned long>(e));
    mpz_pow_ui(d.get_mpz_t(), q_.get_den_mpz_t(), static_cast<unsigned long>(e));
    return Rational(n, d);
}

BigInt Rational::floor() const {
    BigInt r;
    mpz_fdiv_q(r.get_mpz_t(), q_.get_num_mpz_t(), q_.get_den_mpz_t());
    return r;
}

BigInt Rational::round() const {
    // floor(|x| + 1/2) with the sign restored
    mpq_class a = ::abs(q_) + mpq_class(1, 2);
    BigInt r;
    mpz_fdiv_q(r.get_mpz_t(), a.get_num_mpz_t(), a.get_den_mpz_t());
    return sign() < 0 ? BigInt(-r) : r;
}

Rational Rational::operator-() const { return Rational(mpq_class(-q_)); }

Rational& Rational::operator+=(const Rational& o) { q_ += o.q_; return *this; }
Rational& Rational::operator-=(const Rational& o) { q_ -= o.q_; return *this; }
Rational& Rational::operator*=(const Rational& o) { q_ *= o.q_; return *this; }
Rational& Rational::operator/=(const Rational& o) {
    if (o.is_zero()) throw ArithError("division by zero");
    q_ /= o.q_;
    return *this;
}

std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
    int c = cmp(a.q_, b.q_);
    if (c < 0) return std::strong_ordering::less;
    if (c > 0) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
}

std::ostream& operator<<(std::ostream& os, const Rational& x) { return os << x.str(); }

// ---------------------------------------------------------------------------

Place Place::prime(std::uint64_t p) {
    if (!is_prime(p)) throw ArithError("place tag " + std::to_string(p) + " is not prime");
    Place pl;
    pl.p_ = p;
    return pl;
}

Place Place::parse(std::string_view text) {
    if (text == "inf" || text == "infinity" || text == "oo") return infinity();
    std::uint64_t p = 0;
    for (char c : text) {
        if (!std::isdigit(static_cast<unsigned char>(c))) throw ArithError("bad place: " + std::string(text));
        p = p * 10 + static_cast<std::uint64_t>(c - '0');
    }
    return prime(p);
}

std::uint64_t Place::prime_value() const {
    if (is_infinite()) throw ArithError("archimedean place has no prime");
    return p_;
}

std::string Place::str() const { return is_infinite() ? "inf" : std::to_string(p_); }

// ---------------------------------------------------------------------------

bool is_prime(std::uint64_t n) {
    if (n < 2) return false;
    for (std::uint64_t p : {2u, 3u, 5u}) {
        if (n % p == 0) return n == p;
    }
    // 30-wheel
    static constexpr std::uint64_t offsets[] = {1, 7, 11, 13, 17, 19, 23, 29};
    for (std::uint64_t base = 0;; base += 30) {
        for (std::uint64_t off : offsets) {
            std::uint64_t f = base + off;
            if (f < 7) continue;
            if (f > n / f) return true;
            if (n % f == 0) return false;
        }
    }
}

bool is_prime(const BigInt& n) {
    if (n < 2) return false;
    if (n.fits_ulong_p()) return is_prime(static_cast<std::uint64_t>(n.get_ui()));
    return factorize(n).size() == 1;
}

std::vector<BigInt> factorize(const BigInt& n_in) {
    if (n_in < 1) throw ArithError("factorize expects a positive integer");
    std::vector<BigInt> out;
    BigInt n = n_in;
    auto strip = [&](unsigned long f) {
        while (mpz_divisible_ui_p(n.get_mpz_t(), f)) {
            out.emplace_back(f);
            mpz_divexact_ui(n.get_mpz_t(), n.get_mpz_t(), f);
        }
    };
    strip(2);
    strip(3);
    strip(5);
    static constexpr unsigned long offsets[] = {1, 7, 11, 13, 17, 19, 23, 29};
    for (unsigned long base = 0; n > 1; base += 30) {
        for (unsigned long off : offsets) {
            unsigned long f = base + off;
            if (f < 7) continue;
            if (BigInt(f) * f > n) {
                if (n > 1) out.push_back(n);
                n = 1;
                break;
            }
            strip(f);
        }
    }
    return out;
}

std::vector<std::uint64_t> prime_divisors(const BigInt& n) {
    std::vector<std::uint64_t> out;
    BigInt a = ::abs(n);
    if (a == 0) throw ArithError("prime divisors of zero");
    for (const BigInt& f : factorize(a)) {
        if (!f.fits_ulong_p()) throw ArithError("prime factor exceeds 64 bits");
        std::uint64_t p = f.get_ui();
        if (out.empty() || out.back() != p) out.push_back(p);
    }
    return out;
}

long valuation(const BigInt& n, std::uint64_t p) {
    if (n == 0) throw ArithError("valuation of zero");
    BigInt m = ::abs(n);
    BigInt pp(static_cast<unsigned long>(p));
    return static_cast<long>(mpz_remove(m.get_mpz_t(), m.get_mpz_t(), pp.get_mpz_t()));
}

long valuation(const Rational& x, std::uint64_t p) {
    if (x.is_zero()) throw ArithError("valuation of zero");
    return valuation(x.num(), p) - valuation(x.den(), p);
}

PlaceValue abs_at_place(const Rational& x, const Place& sigma) {
    if (sigma.is_infinite()) return {sigma, x.abs()};
    if (x.is_zero()) return {sigma, Rational(0)};
    long v = valuation(x, sigma.prime_value());
    return {sigma, Rational(static_cast<long>(sigma.prime_value())).pow(-v)};
}

Rational svec_norm_exact(std::span<const Rational> v, const Place& sigma) {
    if (sigma.is_infinite()) throw ArithError("exact Euclidean norm is not rational in general");
    Rational best(0);
    for (const auto& x : v) best = std::max(best, abs_at_place(x, sigma).value);
    return best;
}

double svec_norm(std::span<const Rational> v, const Place& sigma) {
    if (v.empty()) throw ArithError("norm of an empty vector");
    if (!sigma.is_infinite()) return svec_norm_exact(v, sigma).to_double();
    long double s = 0;
    for (const auto& x : v) {
        long double t = x.to_long_double();
        s += t * t;
    }
    return static_cast<double>(std::sqrt(s));
}

}  // namespace carpet

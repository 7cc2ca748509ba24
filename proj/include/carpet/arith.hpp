#pragma once

// Exact rationals, primes and per-place absolute values.

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <gmpxx.h>

namespace carpet {

using BigInt = mpz_class;

class ArithError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Reduced fraction num/den with den > 0; zero is 0/1.
class Rational {
public:
    Rational() = default;
    Rational(long n) : q_(n) {}
    Rational(int n) : q_(static_cast<long>(n)) {}
    Rational(long long n);
    Rational(const BigInt& n) : q_(n) {}
    Rational(const BigInt& num, const BigInt& den);
    Rational(long num, long den) : Rational(BigInt(num), BigInt(den)) {}

    /// Accepts "a", "-a", "a/b" with decimal integers.
    static Rational parse(std::string_view text);

    BigInt num() const { return q_.get_num(); }
    BigInt den() const { return q_.get_den(); }
    const mpq_class& raw() const { return q_; }

    bool is_zero() const { return sgn(q_) == 0; }
    bool is_integer() const { return q_.get_den() == 1; }
    int sign() const { return sgn(q_); }

    double to_double() const { return q_.get_d(); }
    long double to_long_double() const;
    std::string str() const { return q_.get_str(); }

    Rational abs() const;
    Rational inverse() const;
    Rational pow(long e) const;

    /// Nearest integer; ties round away from zero.
    BigInt round() const;
    BigInt floor() const;

    Rational operator-() const;
    Rational& operator+=(const Rational& o);
    Rational& operator-=(const Rational& o);
    Rational& operator*=(const Rational& o);
    Rational& operator/=(const Rational& o);

    friend Rational operator+(Rational a, const Rational& b) { return a += b; }
    friend Rational operator-(Rational a, const Rational& b) { return a -= b; }
    friend Rational operator*(Rational a, const Rational& b) { return a *= b; }
    friend Rational operator/(Rational a, const Rational& b) { return a /= b; }

    friend bool operator==(const Rational& a, const Rational& b) { return a.q_ == b.q_; }
    friend std::strong_ordering operator<=>(const Rational& a, const Rational& b);

private:
    explicit Rational(mpq_class q) : q_(std::move(q)) { q_.canonicalize(); }
    mpq_class q_{0};
};

std::ostream& operator<<(std::ostream& os, const Rational& x);

using QVector = std::vector<Rational>;

/// The archimedean place (tag 0) or a prime p.
class Place {
public:
    static Place infinity() { return Place{}; }
    /// Throws ArithError unless p is prime.
    static Place prime(std::uint64_t p);
    static Place parse(std::string_view text);

    bool is_infinite() const { return p_ == 0; }
    std::uint64_t prime_value() const;
    std::string str() const;

    friend bool operator==(const Place&, const Place&) = default;
    /// Infinity sorts first, then primes ascending.
    friend auto operator<=>(const Place&, const Place&) = default;

private:
    Place() = default;
    std::uint64_t p_ = 0;
};

struct PlaceValue {
    Place place = Place::infinity();
    Rational value;
    double to_double() const { return value.to_double(); }
};

bool is_prime(std::uint64_t n);
bool is_prime(const BigInt& n);

/// Prime factors with multiplicity, ascending. factorize(1) is empty.
std::vector<BigInt> factorize(const BigInt& n);

/// Distinct primes dividing n, ascending.
std::vector<std::uint64_t> prime_divisors(const BigInt& n);

/// Additive p-adic valuation; x must be nonzero.
long valuation(const Rational& x, std::uint64_t p);
long valuation(const BigInt& n, std::uint64_t p);

/// |x|_sigma: p^(-v_p(x)) at a prime, |x| at infinity.
PlaceValue abs_at_place(const Rational& x, const Place& sigma);

/// Max-norm at a prime place, Euclidean norm (double) at infinity.
double svec_norm(std::span<const Rational> v, const Place& sigma);

/// Exact max-norm at a prime place.
Rational svec_norm_exact(std::span<const Rational> v, const Place& sigma);

}  // namespace carpet

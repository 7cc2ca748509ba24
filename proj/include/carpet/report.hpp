#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>

namespace carpet {

/// Welford accumulator with a deterministic pairwise merge.
struct RunningStats {
    std::uint64_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void add(double x) {
        ++n;
        double delta = x - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (x - mean);
    }
    void merge(const RunningStats& o) {
        if (o.n == 0) return;
        if (n == 0) {
            *this = o;
            return;
        }
        double total = static_cast<double>(n + o.n);
        double delta = o.mean - mean;
        mean += delta * static_cast<double>(o.n) / total;
        m2 += o.m2 + delta * delta * static_cast<double>(n) * static_cast<double>(o.n) / total;
        n += o.n;
    }
    double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
    /// Sample standard deviation over sqrt(n).
    double clt_bar() const { return n > 0 ? std::sqrt(variance() / static_cast<double>(n)) : 0.0; }
};

/// Seeded Monte Carlo result.
struct ExperimentReport {
    double estimate = 0.0;
    double clt_bar = 0.0;
    std::uint64_t n_samples = 0;
    double wall_time = 0.0;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::map<std::string, double> extra;

    static ExperimentReport from(const RunningStats& s, std::uint64_t seed) {
        ExperimentReport r;
        r.estimate = s.mean;
        r.clt_bar = s.clt_bar();
        r.n_samples = s.n;
        r.seed = seed;
        return r;
    }
};

/// clt_bar of n indicator samples with mean f.
inline double fraction_bar(double f, std::uint64_t n) {
    return n > 1 ? std::sqrt(f * (1.0 - f) / static_cast<double>(n - 1)) : 0.0;
}

}  // namespace carpet

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace slabgas {

// Monte Carlo mean with standard error.
struct Estimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    long n = 0;

    double var() const { return stderr_ * stderr_ * static_cast<double>(n); }
};

// Streaming mean/variance accumulator (Welford). Merging is associative,
// so partial accumulators from workers can be combined in index order.
class Accumulator {
  public:
    void add(double x) {
        ++n_;
        double d = x - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (x - mean_);
    }
    void merge(const Accumulator& o) {
        if (o.n_ == 0) return;
        if (n_ == 0) { *this = o; return; }
        double nt = static_cast<double>(n_ + o.n_);
        double d = o.mean_ - mean_;
        m2_ += o.m2_ + d * d * static_cast<double>(n_) * static_cast<double>(o.n_) / nt;
        mean_ += d * static_cast<double>(o.n_) / nt;
        n_ += o.n_;
    }
    long count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
    Estimate estimate() const {
        if (n_ < 1) throw std::runtime_error("Accumulator: empty");
        return {mean_, n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0, n_};
    }

  private:
    long n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

// Two-sided Kolmogorov-Smirnov statistic of samples against a CDF.
template <typename Cdf>
double ks_statistic(std::vector<double> samples, Cdf cdf) {
    std::sort(samples.begin(), samples.end());
    const auto n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double f = cdf(samples[i]);
        d = std::max(d, std::abs(f - static_cast<double>(i) / n));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
    }
    return d;
}

// Asymptotic Kolmogorov survival function Q(lambda) = P(sqrt(n) D_n > lambda).
inline double kolmogorov_q(double lambda) {
    if (lambda <= 0.0) return 1.0;
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
        double term = 2.0 * ((k % 2 == 1) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
        s += term;
        if (std::abs(term) < 1e-16) break;
    }
    return std::clamp(s, 0.0, 1.0);
}

inline double ks_pvalue(double d, long n) {
    return kolmogorov_q(d * std::sqrt(static_cast<double>(n)));
}

// 99% critical value for the KS statistic: Q(1.6276) = 0.01.
inline double ks_critical_99(long n) { return 1.6276 / std::sqrt(static_cast<double>(n)); }

// Gauss-Legendre nodes/weights on [a, b], computed by Newton iteration.
struct Quadrature1D {
    std::vector<double> nodes;
    std::vector<double> weights;
};

inline Quadrature1D gauss_legendre(int n, double a, double b) {
    Quadrature1D q;
    q.nodes.resize(n);
    q.weights.resize(n);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (x * p0 - p1) / (x * x - 1.0);
            double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        double xm = 0.5 * (b + a), xl = 0.5 * (b - a);
        q.nodes[i] = xm - xl * x;
        q.nodes[n - 1 - i] = xm + xl * x;
        q.weights[i] = 2.0 * xl / ((1.0 - x * x) * pp * pp);
        q.weights[n - 1 - i] = q.weights[i];
    }
    return q;
}

// FNV-1a, used for config hashing and manifest fingerprints.
inline std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 1469598103934665603ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace slabgas

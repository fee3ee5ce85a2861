#include "slabgas/random.hpp"

#include <cmath>

namespace slabgas {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

namespace {
inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed;
    s_[0] = mix64(z ^ 0x2545f4914f6cdd1dULL);
    s_[1] = mix64(s_[0] ^ stream);
    s_[2] = mix64(s_[1] ^ mix64(stream));
    s_[3] = mix64(s_[2] + 0x9e3779b97f4a7c15ULL);
    for (int i = 0; i < 8; ++i) next_u64();
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double f = std::sqrt(-2.0 * std::log(s) / s);
    cached_ = v * f;
    has_cached_ = true;
    return u * f;
}

Vec3 Rng::gaussian3(double sigma) {
    return {sigma * gaussian(), sigma * gaussian(), sigma * gaussian()};
}

Vec3 Rng::unit_sphere() {
    double c = uniform(-1.0, 1.0);
    double phi = uniform(0.0, 2.0 * M_PI);
    double s = std::sqrt(std::max(0.0, 1.0 - c * c));
    return {c, s * std::cos(phi), s * std::sin(phi)};
}

Vec3 Rng::uniform_ball(double radius) {
    double r = radius * std::cbrt(uniform());
    return unit_sphere() * r;
}

Vec3 sample_diffuse_direction(Rng& rng, int sign) {
    double u = std::sqrt(rng.uniform());  // cosine has CDF u^2
    double phi = rng.uniform(0.0, 2.0 * M_PI);
    double s = std::sqrt(std::max(0.0, 1.0 - u * u));
    return {sign * u, s * std::cos(phi), s * std::sin(phi)};
}

Vec3 sample_maxwellian(Rng& rng, double beta) {
    if (beta <= 0.0) throw std::invalid_argument("sample_maxwellian: beta must be positive");
    return rng.gaussian3(1.0 / std::sqrt(beta));
}

Vec3 ReflectionRecord::lazy_entry(std::int64_t index, int sign) const {
    Rng rng(key_.sub(sign > 0 ? 0xf07aULL : 0xba5eULL, static_cast<std::uint64_t>(index)));
    return sample_diffuse_direction(rng, sign);
}

Vec3 ReflectionRecord::take_future() {
    if (!future_overlay_.empty()) {
        Vec3 w = future_overlay_.back();
        future_overlay_.pop_back();
        return w;
    }
    return lazy_entry(++future_taken_, +1);
}

Vec3 ReflectionRecord::take_past() {
    if (!past_overlay_.empty()) {
        Vec3 w = past_overlay_.back();
        past_overlay_.pop_back();
        return w;
    }
    if (!lazy_past_) throw std::logic_error("ReflectionRecord: past exhausted");
    return lazy_entry(++past_taken_, -1);
}

Vec3 ReflectionRecord::peek(std::int64_t j) const {
    if (j == 0) throw std::invalid_argument("ReflectionRecord: index 0");
    if (j > 0) {
        auto k = static_cast<std::size_t>(j - 1);
        if (k < future_overlay_.size()) return future_overlay_[future_overlay_.size() - 1 - k];
        return lazy_entry(future_taken_ + (j - static_cast<std::int64_t>(future_overlay_.size())), +1);
    }
    auto k = static_cast<std::size_t>(-j - 1);
    if (k < past_overlay_.size()) return past_overlay_[past_overlay_.size() - 1 - k];
    if (!lazy_past_) throw std::logic_error("ReflectionRecord: past exhausted");
    return lazy_entry(past_taken_ + (-j - static_cast<std::int64_t>(past_overlay_.size())), -1);
}

Vec3 ReflectionRecord::reflect_forward(const Vec3& v_in, int gamma) {
    double speed = v_in.norm();
    if (speed == 0.0) throw ZeroSpeed();
    Vec3 omega = take_future();
    past_overlay_.push_back(v_in * (gamma / speed));
    return omega * (speed * gamma);
}

Vec3 ReflectionRecord::reflect_backward(const Vec3& v_out, int gamma) {
    double speed = v_out.norm();
    if (speed == 0.0) throw ZeroSpeed();
    Vec3 omega = take_past();
    future_overlay_.push_back(v_out * (gamma / speed));
    return omega * (speed * gamma);
}

}  // namespace slabgas

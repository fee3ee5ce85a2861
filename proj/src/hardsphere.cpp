#include "slabgas/hardsphere.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace slabgas {

void apply_collision(Vec3& v_i, Vec3& v_j, const Vec3& nu) {
    double q = nu.dot(v_i - v_j);
    v_i -= nu * q;
    v_j += nu * q;
}

std::optional<PairContact> predict_pair_collision(const Vec3& d, const Vec3& w, double epsilon,
                                                  double horizon, double graze_tol,
                                                  long* graze_count) {
    if (horizon <= 0.0) return std::nullopt;
    const double a = w.norm2();
    if (a == 0.0) return std::nullopt;
    const double speed = std::sqrt(a);
    const double dist = d.norm();

    double best = horizon;
    std::optional<PairContact> hit;
    const int m_max = static_cast<int>(std::ceil(horizon * speed + dist + epsilon)) + 1;
    for (int m = 0; m <= m_max; ++m) {
        // images at L-inf shell m cannot produce a contact before this
        if (m >= 1 && (m - dist - epsilon) / speed > best) break;
        for (int k2 = -m; k2 <= m; ++k2) {
            for (int k3 = -m; k3 <= m; ++k3) {
                if (std::max(std::abs(k2), std::abs(k3)) != m) continue;
                Vec3 dk{d.x, d.y + k2, d.z + k3};
                double b = dk.dot(w);
                if (b >= 0.0) continue;  // receding
                double c = dk.norm2() - epsilon * epsilon;
                double disc = b * b - a * c;
                if (disc <= 0.0) continue;
                double sq = std::sqrt(disc);
                double t = (c <= 0.0) ? 0.0 : c / (-b + sq);
                if (t < 0.0 || t > best) continue;
                double normal_speed = (dk + w * t).dot(w) / epsilon;
                if (std::abs(normal_speed) < graze_tol) {
                    if (graze_count) ++(*graze_count);
                    continue;
                }
                best = t;
                hit = PairContact{t, dk + w * t};
            }
        }
    }
    return hit;
}

HardSphereSim::HardSphereSim(std::vector<Particle> particles, std::vector<ReflectionRecord> records,
                             double epsilon, double t_end, SimPolicy policy, bool backward_replay,
                             double start_time)
    : particles_(std::move(particles)),
      records_(std::move(records)),
      epsilon_(epsilon),
      time_(start_time),
      t_end_(t_end),
      policy_(policy),
      backward_replay_(backward_replay) {
    if (epsilon_ >= 0.5) throw std::invalid_argument("HardSphereSim: epsilon must be < 1/2");
    if (records_.size() != particles_.size())
        throw std::invalid_argument("HardSphereSim: one record per particle required");
    const int n = static_cast<int>(particles_.size());
    stamps_.assign(n, 0);
    stretch_.resize(n);
    for (int i = 0; i < n; ++i)
        stretch_[i] = {time_, particles_[i].v.norm(), 0};
    for (int i = 0; i < n; ++i) predict_wall(i);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) predict_pair(i, j);
}

double HardSphereSim::wall_time_abs(int i) const {
    auto hit = wall_hit_time(particles_[i].x, particles_[i].v);
    if (!hit) return std::numeric_limits<double>::infinity();
    return time_ + hit->time;
}

void HardSphereSim::predict_wall(int i) {
    auto hit = wall_hit_time(particles_[i].x, particles_[i].v);
    if (!hit) return;
    double t = time_ + hit->time;
    if (t > t_end_) return;
    queue_.push({t, 1, i, -1, hit->gamma, stamps_[i], 0});
}

void HardSphereSim::predict_pair(int i, int j) {
    const auto& pi = particles_[i];
    const auto& pj = particles_[j];
    double horizon = std::min({wall_time_abs(i), wall_time_abs(j), t_end_}) - time_;
    if (horizon <= 0.0) return;
    Vec3 d = minimum_image(pi.x, pj.x);
    Vec3 w = pj.v - pi.v;
    auto hit = predict_pair_collision(d, w, epsilon_, horizon, policy_.graze_tol,
                                      &diag_.graze_pair_skips);
    if (!hit) return;
    queue_.push({time_ + hit->time, 0, i, j, 0, stamps_[i], stamps_[j]});
}

void HardSphereSim::predict_all_for(int i) {
    predict_wall(i);
    for (int j = 0; j < static_cast<int>(particles_.size()); ++j) {
        if (j == i) continue;
        predict_pair(std::min(i, j), std::max(i, j));
    }
}

void HardSphereSim::advance_all(double t) {
    double dt = t - time_;
    if (dt == 0.0) return;
    for (auto& p : particles_) p.x = advect(p.x, p.v, dt);
    time_ = t;
}

void HardSphereSim::note_event(double t) {
    const auto cap = static_cast<std::size_t>(policy_.stuck_events);
    if (recent_events_.size() < cap) {
        recent_events_.push_back(t);
        return;
    }
    double oldest = recent_events_[recent_pos_];
    if (t - oldest < 1.0) throw StuckDetected();
    recent_events_[recent_pos_] = t;
    recent_pos_ = (recent_pos_ + 1) % cap;
}

std::optional<EventReport> HardSphereSim::step_to_next_event(double t_limit) {
    while (!queue_.empty()) {
        QEvent ev = queue_.top();
        if (ev.time > t_limit) break;
        queue_.pop();
        if (ev.stamp_i != stamps_[ev.i]) continue;
        if (ev.kind == 0 && ev.stamp_j != stamps_[ev.j]) continue;

        advance_all(ev.time);
        note_event(ev.time);
        EventReport report{ev.time, ev.kind == 0 ? EventKind::PairCollision : EventKind::WallReflection,
                           ev.i, ev.kind == 0 ? ev.j : -1, false};

        if (ev.kind == 1) {
            auto& p = particles_[ev.i];
            p.x.x1 = ev.gamma > 0 ? 0.0 : 1.0;  // snap roundoff onto the wall
            if (std::abs(p.v.x) < policy_.graze_tol) {
                p.v.x = -p.v.x;  // tangential contact: skip the stochastic reflection
                ++diag_.graze_wall_skips;
                report.grazed = true;
            } else {
                if (backward_replay_)
                    p.v = -records_[ev.i].reflect_backward(-p.v, ev.gamma);
                else
                    p.v = records_[ev.i].reflect_forward(p.v, ev.gamma);
                ++diag_.reflections;
                auto& st = stretch_[ev.i];
                ++st.reflections;
                if (policy_.check_reflection_bound &&
                    st.reflections > (ev.time - st.start) * st.speed + 1.0 + 1e-9)
                    throw ReflectionBoundViolated();
            }
            ++stamps_[ev.i];
            predict_all_for(ev.i);
        } else {
            auto& pi = particles_[ev.i];
            auto& pj = particles_[ev.j];
            Vec3 d = minimum_image(pi.x, pj.x);  // epsilon < 1/2: contact is nearest-image
            Vec3 nu = (d * -1.0).normalized();   // (x_i - x_j)/|x_i - x_j|
            if (std::abs(nu.dot(pi.v - pj.v)) < policy_.graze_tol) {
                ++diag_.graze_pair_skips;
                report.grazed = true;
            } else {
                apply_collision(pi.v, pj.v, nu);
                ++diag_.collisions;
                stretch_[ev.i] = {ev.time, pi.v.norm(), 0};
                stretch_[ev.j] = {ev.time, pj.v.norm(), 0};
            }
            ++stamps_[ev.i];
            ++stamps_[ev.j];
            predict_all_for(ev.i);
            predict_all_for(ev.j);
        }
        if (on_event_) on_event_(report);
        return report;
    }
    advance_all(t_limit);
    return std::nullopt;
}

void HardSphereSim::simulate(double t_end, std::span<const double> sample_times,
                             const std::function<void(double, const std::vector<Particle>&)>& observer) {
    if (t_end < time_) throw std::invalid_argument("simulate: t_end before current time");
    std::size_t next_sample = 0;
    while (next_sample < sample_times.size() && sample_times[next_sample] < time_) ++next_sample;
    for (;;) {
        double stop = t_end;
        bool sampling = next_sample < sample_times.size() && sample_times[next_sample] <= t_end;
        if (sampling) stop = sample_times[next_sample];
        while (step_to_next_event(stop)) {}
        if (!sampling) break;
        if (observer) observer(time_, particles_);
        ++next_sample;
    }
}

void HardSphereSim::run_to(double t_limit) {
    while (step_to_next_event(t_limit)) {}
}

void HardSphereSim::set_velocity(int i, const Vec3& v) {
    particles_[i].v = v;
    stretch_[i] = {time_, v.norm(), 0};
    ++stamps_[i];
    predict_all_for(i);
}

void HardSphereSim::add_particle(const Particle& p, ReflectionRecord record) {
    particles_.push_back(p);
    records_.push_back(std::move(record));
    stamps_.push_back(0);
    stretch_.push_back({time_, p.v.norm(), 0});
    predict_all_for(static_cast<int>(particles_.size()) - 1);
}

double HardSphereSim::kinetic_energy() const {
    double e = 0.0;
    for (const auto& p : particles_) e += 0.5 * p.v.norm2();
    return e;
}

double HardSphereSim::min_pair_distance() const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < particles_.size(); ++i)
        for (std::size_t j = i + 1; j < particles_.size(); ++j)
            best = std::min(best, slab_torus_distance(particles_[i].x, particles_[j].x));
    return best;
}

Estimate double_shock_fraction(int n_particles, double epsilon, double beta, double delta,
                               int replicas, RngKey key) {
    if (delta >= epsilon / 2.0)
        throw std::invalid_argument("double_shock_fraction: requires delta < epsilon/2");
    Accumulator acc;
    for (int rep = 0; rep < replicas; ++rep) {
        RngKey rk = key.sub(0xd5f, rep);
        auto init = sample_initial_configuration(
            rk, n_particles, epsilon,
            [](Rng& r) { return Position(r.uniform(), r.uniform(), r.uniform()); },
            [beta](Rng& r) { return sample_maxwellian(r, beta); });
        HardSphereSim sim(std::move(init.particles), std::move(init.records), epsilon, delta);
        int shocks = 0;
        while (shocks < 2 && sim.step_to_next_event(delta)) ++shocks;
        acc.add(shocks >= 2 ? 1.0 : 0.0);
    }
    return acc.estimate();
}

}  // namespace slabgas

#include "slabgas/pseudotrajectory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace slabgas {

namespace {

void validate(double t, std::span<const Particle> roots, const CollisionTree& tree,
              const CreationParams& params, std::size_t n_records) {
    if (static_cast<int>(roots.size()) != tree.s)
        throw std::invalid_argument("build_backward: root count != tree.s");
    if (static_cast<int>(tree.a.size()) != tree.r || static_cast<int>(tree.sigma.size()) != tree.r)
        throw std::invalid_argument("build_backward: tree labels sized != r");
    if (static_cast<int>(params.times.size()) != tree.r ||
        static_cast<int>(params.nu.size()) != tree.r ||
        static_cast<int>(params.vbar.size()) != tree.r)
        throw std::invalid_argument("build_backward: params sized != r");
    if (n_records != static_cast<std::size_t>(tree.s + tree.r))
        throw std::invalid_argument("build_backward: one record per particle required");
    double prev = t;
    for (int c = 0; c < tree.r; ++c) {
        if (!(params.times[c] < prev) || !(params.times[c] > 0.0))
            throw std::invalid_argument("build_backward: creation times must decrease in (0,t)");
        prev = params.times[c];
        if (tree.a[c] < 0 || tree.a[c] >= tree.s + c)
            throw std::invalid_argument("build_backward: progenitor out of range");
        if (tree.sigma[c] != 1 && tree.sigma[c] != -1)
            throw std::invalid_argument("build_backward: sigma must be +-1");
    }
}

double wall_distance(const Position& x) { return std::min(x.x1, 1.0 - x.x1); }

struct CreationVelocities {
    Vec3 prog_below, new_below;  // forward velocities just below the creation time
};

CreationVelocities scatter_at_creation(const Vec3& v_prog_above, const Vec3& vbar, const Vec3& nu,
                                       int sigma) {
    if (sigma == 1) {
        double q = nu.dot(v_prog_above - vbar);
        return {v_prog_above - nu * q, vbar + nu * q};
    }
    return {v_prog_above, vbar};
}

// Grazing payloads at a creation: forward velocities just above / below it,
// over the live set plus the incoming particle.
void fill_creation_payload(PseudoEvent& ev, const std::vector<Vec3>& v_above_all,
                           const Vec3& vbar, const CreationVelocities& below, int prog, int sigma) {
    const int live = static_cast<int>(v_above_all.size());
    double cos_min = std::numeric_limits<double>::infinity();
    double rel_min = std::numeric_limits<double>::infinity();
    struct Dev { Vec3 above, below; int idx; };
    std::vector<Dev> devs;
    devs.push_back({vbar, below.new_below, live});  // the created particle is always deviated
    if (sigma == 1) devs.push_back({v_above_all[prog], below.prog_below, prog});
    for (const auto& d : devs) {
        cos_min = std::min(cos_min, std::abs(d.below.x));
        for (int k = 0; k <= live; ++k) {
            if (k == d.idx) continue;
            Vec3 vk = k == live ? vbar : v_above_all[k];
            rel_min = std::min(rel_min, std::abs((d.above - vk).x));
        }
    }
    ev.dev_cos_min = cos_min;
    ev.dev_rel_e_min = rel_min;
}

}  // namespace

const char* to_string(DiscrepancyClass c) {
    switch (c) {
        case DiscrepancyClass::Clean: return "clean";
        case DiscrepancyClass::Shift: return "shift";
        case DiscrepancyClass::Recollision: return "recollision";
        case DiscrepancyClass::Overlap: return "overlap";
        case DiscrepancyClass::NearBoundaryCreation: return "near_boundary";
        case DiscrepancyClass::Grazing: return "grazing";
    }
    return "?";
}

double creation_weight(const CollisionTree& tree, const CreationParams& params,
                       std::span<const Vec3> v_progenitor_above) {
    double w = 1.0;
    for (int c = 0; c < tree.r; ++c) {
        double q = tree.sigma[c] * params.nu[c].dot(params.vbar[c] - v_progenitor_above[c]);
        w *= std::max(q, 0.0);
    }
    return w;
}

// ---------------------------------------------------------------------------
// epsilon mode: the hard-sphere engine runs the reversed-time flow

static BackwardResult build_epsilon(double t, std::span<const Particle> roots,
                                    const CollisionTree& tree, const CreationParams& params,
                                    std::vector<ReflectionRecord> records, double epsilon,
                                    const SimPolicy& policy) {
    BackwardResult res;
    res.roots_at_t.assign(roots.begin(), roots.end());
    res.weight = 1.0;

    std::vector<Particle> rev(roots.size());
    for (std::size_t i = 0; i < roots.size(); ++i) rev[i] = {roots[i].x, -roots[i].v};
    std::vector<ReflectionRecord> root_recs(records.begin(), records.begin() + tree.s);

    SimPolicy pol = policy;
    HardSphereSim sim(std::move(rev), std::move(root_recs), epsilon, t, pol, true);

    sim.set_event_callback([&](const EventReport& ev) {
        PseudoEvent pe;
        pe.tau = t - ev.time;
        pe.i = ev.i;
        pe.j = ev.j;
        if (ev.grazed) {
            pe.type = PseudoEvent::Type::GrazeSkip;
        } else if (ev.kind == EventKind::WallReflection) {
            pe.type = PseudoEvent::Type::Reflection;
            const auto& ps = sim.particles();
            pe.refl_cos = std::abs(ps[ev.i].v.x);
            double rel = std::numeric_limits<double>::infinity();
            for (int k = 0; k < static_cast<int>(ps.size()); ++k)
                if (k != ev.i) rel = std::min(rel, (ps[ev.i].v - ps[k].v).norm());
            pe.min_rel_speed = rel;
        } else {
            pe.type = PseudoEvent::Type::Recollision;
        }
        res.log.push_back(pe);
    });

    for (int c = 0; c < tree.r; ++c) {
        sim.run_to(t - params.times[c]);

        std::vector<ReflectionRecord::State> states;
        for (const auto& rec : sim.records()) states.push_back(rec.state());
        res.record_states.push_back(std::move(states));

        const auto& ps = sim.particles();
        const int prog = tree.a[c];
        const Position x_prog = ps[prog].x;

        PseudoEvent ev;
        ev.tau = params.times[c];
        ev.type = PseudoEvent::Type::Creation;
        ev.i = tree.s + c;
        ev.j = prog;
        ev.wall_dist = wall_distance(x_prog);
        double od = std::numeric_limits<double>::infinity();
        for (int m = 0; m < static_cast<int>(ps.size()); ++m)
            if (m != prog) od = std::min(od, slab_torus_distance(x_prog, ps[m].x));
        ev.other_dist = od;

        std::vector<Vec3> v_above(ps.size());
        for (std::size_t m = 0; m < ps.size(); ++m) v_above[m] = -ps[m].v;
        double q = tree.sigma[c] * params.nu[c].dot(params.vbar[c] - v_above[prog]);
        auto below = scatter_at_creation(v_above[prog], params.vbar[c], params.nu[c], tree.sigma[c]);
        fill_creation_payload(ev, v_above, params.vbar[c], below, prog, tree.sigma[c]);
        res.log.push_back(ev);

        if (q <= 0.0) {
            res.weight = 0.0;
            res.stop_reason = "sign";
            return res;
        }
        res.weight *= q;

        double nx1 = x_prog.x1 + epsilon * params.nu[c].x;
        if (nx1 < 0.0 || nx1 > 1.0) {
            res.weight = 0.0;
            res.stop_reason = "creation outside the slab";
            return res;
        }
        Position x_new(nx1, x_prog.x2 + epsilon * params.nu[c].y,
                       x_prog.x3 + epsilon * params.nu[c].z);
        for (int m = 0; m < static_cast<int>(ps.size()); ++m) {
            if (m == prog) continue;
            if (slab_torus_distance(x_new, ps[m].x) <= epsilon) {
                res.weight = 0.0;
                res.stop_reason = "creation overlaps a particle";
                return res;
            }
        }

        sim.set_velocity(prog, -below.prog_below);
        sim.add_particle({x_new, -below.new_below}, std::move(records[tree.s + c]));
    }

    sim.run_to(t);
    std::vector<ReflectionRecord::State> states;
    for (const auto& rec : sim.records()) states.push_back(rec.state());
    res.record_states.push_back(std::move(states));

    res.at_zero.resize(sim.particles().size());
    for (std::size_t i = 0; i < sim.particles().size(); ++i)
        res.at_zero[i] = {sim.particles()[i].x, -sim.particles()[i].v};
    res.complete = true;
    return res;
}

// ---------------------------------------------------------------------------
// zero mode: independent free flights with wall reflections; pairwise
// proximity is watched but never acted on

namespace {

struct ZeroDriver {
    double t;
    double epsilon;
    double graze_tol;
    std::vector<Particle> ps;  // reversed velocities
    std::vector<ReflectionRecord> recs;
    std::vector<bool> reflected_since_creation;
    std::vector<std::pair<int, int>> exempt_pairs;  // (created, progenitor)
    std::vector<std::vector<bool>> in_overlap;
    BackwardResult* res;

    double next_wall_abs(int i, double now) const {
        auto hit = wall_hit_time(ps[i].x, ps[i].v);
        if (!hit) return std::numeric_limits<double>::infinity();
        return now + hit->time;
    }

    bool pair_exempt(int p, int q) const {
        for (auto [a, b] : exempt_pairs) {
            if ((a == p && b == q) || (a == q && b == p))
                return !reflected_since_creation[p] && !reflected_since_creation[q];
        }
        return false;
    }

    void scan_overlaps(double u0, double du) {
        const int n = static_cast<int>(ps.size());
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                bool exempt = pair_exempt(p, q);
                Vec3 d0 = minimum_image(ps[p].x, ps[q].x);
                Vec3 w = ps[q].v - ps[p].v;
                double speed = w.norm();
                double dist0 = d0.norm();
                const int m_max = static_cast<int>(std::ceil(speed * du + dist0 + epsilon)) + 1;
                double first_cross = std::numeric_limits<double>::infinity();
                bool below_somewhere = false;
                for (int m = 0; m <= m_max; ++m) {
                    if (m >= 1 && speed * du < m - dist0 - epsilon) break;
                    for (int k2 = -m; k2 <= m; ++k2) {
                        for (int k3 = -m; k3 <= m; ++k3) {
                            if (std::max(std::abs(k2), std::abs(k3)) != m) continue;
                            if (exempt && k2 == 0 && k3 == 0) continue;
                            Vec3 dk{d0.x, d0.y + k2, d0.z + k3};
                            double c = dk.norm2() - epsilon * epsilon;
                            if (c <= 0.0) {
                                below_somewhere = true;
                                if (!in_overlap[p][q]) first_cross = std::min(first_cross, 0.0);
                                continue;
                            }
                            double b = dk.dot(w);
                            if (b >= 0.0) continue;
                            double a = w.norm2();
                            double disc = b * b - a * c;
                            if (disc <= 0.0) continue;
                            double ucr = c / (-b + std::sqrt(disc));
                            if (ucr <= du) {
                                below_somewhere = true;
                                if (!in_overlap[p][q]) first_cross = std::min(first_cross, ucr);
                            }
                        }
                    }
                }
                if (std::isfinite(first_cross)) {
                    PseudoEvent pe;
                    pe.tau = t - (u0 + first_cross);
                    pe.type = PseudoEvent::Type::Overlap;
                    pe.i = p;
                    pe.j = q;
                    res->log.push_back(pe);
                }
                in_overlap[p][q] = below_somewhere;
            }
        }
    }

    void advance(double du) {
        for (auto& p : ps) p.x = advect(p.x, p.v, du);
    }

    void reflect(int i, double u_now) {
        auto hit = wall_hit_time(ps[i].x, ps[i].v);
        int gamma = hit ? hit->gamma : +1;
        ps[i].x.x1 = gamma > 0 ? 0.0 : 1.0;
        PseudoEvent pe;
        pe.tau = t - u_now;
        pe.i = i;
        if (std::abs(ps[i].v.x) < graze_tol) {
            ps[i].v.x = -ps[i].v.x;
            pe.type = PseudoEvent::Type::GrazeSkip;
        } else {
            ps[i].v = -recs[i].reflect_backward(-ps[i].v, gamma);
            pe.type = PseudoEvent::Type::Reflection;
            pe.refl_cos = std::abs(ps[i].v.x);
            double rel = std::numeric_limits<double>::infinity();
            for (int k = 0; k < static_cast<int>(ps.size()); ++k)
                if (k != i) rel = std::min(rel, (ps[i].v - ps[k].v).norm());
            pe.min_rel_speed = rel;
            reflected_since_creation[i] = true;
        }
        res->log.push_back(pe);
    }
};

}  // namespace

static BackwardResult build_zero(double t, std::span<const Particle> roots,
                                 const CollisionTree& tree, const CreationParams& params,
                                 std::vector<ReflectionRecord> records, double epsilon,
                                 const SimPolicy& policy) {
    BackwardResult res;
    res.roots_at_t.assign(roots.begin(), roots.end());
    res.weight = 1.0;

    ZeroDriver zd;
    zd.t = t;
    zd.epsilon = epsilon;
    zd.graze_tol = policy.graze_tol;
    zd.res = &res;
    const int total = tree.s + tree.r;
    zd.ps.reserve(total);
    for (const auto& p : roots) zd.ps.push_back({p.x, -p.v});
    for (int i = 0; i < tree.s; ++i) zd.recs.push_back(std::move(records[i]));
    zd.reflected_since_creation.assign(total, false);
    zd.in_overlap.assign(total, std::vector<bool>(total, false));

    double u = 0.0;
    int next_creation = 0;
    while (u < t - 1e-15) {
        double u_stop = t;
        if (next_creation < tree.r) u_stop = std::min(u_stop, t - params.times[next_creation]);
        int wall_idx = -1;
        double u_wall = std::numeric_limits<double>::infinity();
        for (int i = 0; i < static_cast<int>(zd.ps.size()); ++i) {
            double w = zd.next_wall_abs(i, u);
            if (w < u_wall) { u_wall = w; wall_idx = i; }
        }
        bool wall_first = u_wall < u_stop;
        double u_next = wall_first ? u_wall : u_stop;

        zd.scan_overlaps(u, u_next - u);
        zd.advance(u_next - u);
        u = u_next;

        if (wall_first) {
            zd.reflect(wall_idx, u);
            continue;
        }
        if (next_creation < tree.r && u >= t - params.times[next_creation] - 1e-15) {
            const int c = next_creation++;
            std::vector<ReflectionRecord::State> states;
            for (const auto& rec : zd.recs) states.push_back(rec.state());
            res.record_states.push_back(std::move(states));

            const int prog = tree.a[c];
            const Position x_prog = zd.ps[prog].x;

            PseudoEvent ev;
            ev.tau = params.times[c];
            ev.type = PseudoEvent::Type::Creation;
            ev.i = tree.s + c;
            ev.j = prog;
            ev.wall_dist = wall_distance(x_prog);
            double od = std::numeric_limits<double>::infinity();
            for (int m = 0; m < static_cast<int>(zd.ps.size()); ++m)
                if (m != prog) od = std::min(od, slab_torus_distance(x_prog, zd.ps[m].x));
            ev.other_dist = od;

            std::vector<Vec3> v_above(zd.ps.size());
            for (std::size_t m = 0; m < zd.ps.size(); ++m) v_above[m] = -zd.ps[m].v;
            double q = tree.sigma[c] * params.nu[c].dot(params.vbar[c] - v_above[prog]);
            auto below = scatter_at_creation(v_above[prog], params.vbar[c], params.nu[c],
                                             tree.sigma[c]);
            fill_creation_payload(ev, v_above, params.vbar[c], below, prog, tree.sigma[c]);
            res.log.push_back(ev);

            if (q <= 0.0) {
                res.weight = 0.0;
                res.stop_reason = "sign";
                return res;
            }
            res.weight *= q;

            zd.ps[prog].v = -below.prog_below;
            zd.ps.push_back({x_prog, -below.new_below});  // created at the progenitor's point
            zd.recs.push_back(std::move(records[tree.s + c]));
            zd.exempt_pairs.push_back({tree.s + c, prog});
            zd.reflected_since_creation[prog] = false;
            zd.reflected_since_creation[tree.s + c] = false;
        }
    }

    std::vector<ReflectionRecord::State> states;
    for (const auto& rec : zd.recs) states.push_back(rec.state());
    res.record_states.push_back(std::move(states));

    res.at_zero.resize(zd.ps.size());
    for (std::size_t i = 0; i < zd.ps.size(); ++i) res.at_zero[i] = {zd.ps[i].x, -zd.ps[i].v};
    res.complete = true;
    return res;
}

BackwardResult build_backward(PseudoMode mode, double t, std::span<const Particle> roots,
                              const CollisionTree& tree, const CreationParams& params,
                              std::vector<ReflectionRecord> records, double epsilon,
                              const SimPolicy& policy) {
    validate(t, roots, tree, params, records.size());
    if (mode == PseudoMode::Epsilon)
        return build_epsilon(t, roots, tree, params, std::move(records), epsilon, policy);
    return build_zero(t, roots, tree, params, std::move(records), epsilon, policy);
}

DiscrepancyClass classify_discrepancy(const BackwardResult& eps_result,
                                      const BackwardResult& zero_result, double epsilon) {
    struct Candidate {
        double tau;
        int priority;
        DiscrepancyClass cls;
    };
    std::vector<Candidate> cands;
    const double vel_cut = std::pow(epsilon, 0.25);
    const double dist_cut = std::cbrt(epsilon);

    const double t_start = std::numeric_limits<double>::infinity();
    for (const auto& p : eps_result.roots_at_t)
        if (std::abs(p.v.x) <= vel_cut) cands.push_back({t_start, 4, DiscrepancyClass::Grazing});

    // shift: the first checkpoint at which the record states diverge
    const std::size_t ncp = std::min(eps_result.record_states.size(),
                                     zero_result.record_states.size());
    const int s = static_cast<int>(eps_result.roots_at_t.size());
    for (std::size_t c = 0; c < ncp; ++c) {
        if (eps_result.record_states[c] != zero_result.record_states[c]) {
            double tau = 0.0;
            for (const auto& ev : eps_result.log)
                if (ev.type == PseudoEvent::Type::Creation && ev.i == s + static_cast<int>(c))
                    tau = ev.tau;
            cands.push_back({tau, 0, DiscrepancyClass::Shift});
            break;
        }
    }

    auto scan_log = [&](const BackwardResult& r, bool is_eps) {
        for (const auto& ev : r.log) {
            switch (ev.type) {
                case PseudoEvent::Type::Recollision:
                    if (is_eps) cands.push_back({ev.tau, 1, DiscrepancyClass::Recollision});
                    break;
                case PseudoEvent::Type::Overlap:
                    if (!is_eps) cands.push_back({ev.tau, 2, DiscrepancyClass::Overlap});
                    break;
                case PseudoEvent::Type::GrazeSkip:
                    cands.push_back({ev.tau, 4, DiscrepancyClass::Grazing});
                    break;
                case PseudoEvent::Type::Reflection:
                    if (is_eps && (ev.refl_cos <= vel_cut || ev.min_rel_speed <= vel_cut))
                        cands.push_back({ev.tau, 4, DiscrepancyClass::Grazing});
                    break;
                case PseudoEvent::Type::Creation:
                    if (is_eps) {
                        if (ev.wall_dist < 2.0 * epsilon || ev.other_dist < 2.0 * epsilon)
                            cands.push_back({ev.tau, 3, DiscrepancyClass::NearBoundaryCreation});
                        if (ev.wall_dist < dist_cut || ev.other_dist < dist_cut ||
                            ev.dev_cos_min <= vel_cut || ev.dev_rel_e_min <= vel_cut)
                            cands.push_back({ev.tau, 4, DiscrepancyClass::Grazing});
                    }
                    break;
            }
        }
    };
    scan_log(eps_result, true);
    scan_log(zero_result, false);

    if (cands.empty()) {
        if (eps_result.complete && zero_result.complete) return DiscrepancyClass::Clean;
        return DiscrepancyClass::Grazing;  // borderline admissibility, below all detectors
    }
    auto best = std::max_element(cands.begin(), cands.end(),
                                 [](const Candidate& a, const Candidate& b) {
                                     if (a.tau != b.tau) return a.tau < b.tau;
                                     return a.priority > b.priority;
                                 });
    return best->cls;
}

double final_distance(std::span<const Particle> a, std::span<const Particle> b) {
    if (a.size() != b.size()) throw ParticleCountMismatch();
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        d = std::max(d, slab_torus_distance(a[i].x, b[i].x));
    return d;
}

std::string log_to_text(const BackwardResult& result) {
    std::ostringstream os;
    os.precision(17);
    for (const auto& ev : result.log) {
        const char* kind = "?";
        switch (ev.type) {
            case PseudoEvent::Type::Creation: kind = "creation"; break;
            case PseudoEvent::Type::Reflection: kind = "reflection"; break;
            case PseudoEvent::Type::Recollision: kind = "recollision"; break;
            case PseudoEvent::Type::Overlap: kind = "overlap"; break;
            case PseudoEvent::Type::GrazeSkip: kind = "graze_skip"; break;
        }
        os << ev.tau << ' ' << kind << ' ' << ev.i << ' ' << ev.j << '\n';
    }
    return os.str();
}

}  // namespace slabgas

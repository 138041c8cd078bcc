#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "dynamics.hpp"
#include "semiclassical_wigner.hpp"

namespace chordflow {

// Two tip trajectories of one chord and the four points x0 (old centre), x_tilde (new centre),
// x_prime / x_triple_prime (centres of the tip_- / tip_+ trajectory chords).
struct MatchedConfiguration {
    PhasePoint x0, x_tilde, x_prime, x_triple_prime;
    std::pair<TrajectorySegment, TrajectorySegment> tip_trajectories;  // (tip_-, tip_+)
    double delta4 = 0.0;
    std::pair<double, double> energies{0.0, 0.0};  // (E_+, E_-)
    double t = 0.0;
    bool zero_chord = false;
    double s_minus = 0.0, s_plus = 0.0;  // tip parameters on the initial leaf
};

struct CausticFlags {
    bool central = false;  // det(1 + M) changed sign or vanished on a tip trajectory
    bool chord = false;    // det(1 - M) changed sign or vanished (t = 0 excluded)
};

struct PropagatedBranch {
    WignerBranch branch0;
    Chord chord_t;
    double action_t = 0.0;
    double amplitude_t = 0.0;
    double indicator_t = 0.0;
    int maslov_index_t = 0;
    CausticFlags caustic_flags;
    bool crossed_wigner_caustic = false;  // tip-velocity product changed sign on the way
    bool amplitude_valid = false;

    double phase(double hbar) const {
        return branch0.orientation * action_t / hbar - std::numbers::pi / 4 - maslov_index_t * std::numbers::pi / 2;
    }
    double value(double hbar) const { return amplitude_t * std::cos(phase(hbar)); }
};

struct PropagationOptions {
    double tol = kDefaultTol;
    int checkpoints = 32;
    double caustic_threshold = kCausticThresholdLeaf;
};

// W0 at the backward image of x.
inline double liouville_value(const std::function<double(const PhasePoint&)>& W0, const HamiltonianModel& model, double t,
                              const PhasePoint& x, double tol = kDefaultTol) {
    if (t == 0.0) return W0(x);
    return W0(flow(model, x, -t, tol).end());
}

inline MatchedConfiguration tips_flow(const HamiltonianModel& model, const Chord& chord0, double t,
                                      const PropagationOptions& o = {}) {
    require_finite(chord0.tip_minus, "tips_flow");
    require_finite(chord0.tip_plus, "tips_flow");
    MatchedConfiguration c;
    c.t = t;
    c.zero_chord = chord0.zero_length();
    c.s_minus = chord0.s_minus;
    c.s_plus = chord0.s_plus;
    c.tip_trajectories.first = flow(model, chord0.tip_minus, t, o.tol, o.checkpoints);
    c.tip_trajectories.second = c.zero_chord ? c.tip_trajectories.first : flow(model, chord0.tip_plus, t, o.tol, o.checkpoints);
    const auto& m = c.tip_trajectories.first;
    const auto& p = c.tip_trajectories.second;
    c.x0 = 0.5 * (m.start() + p.start());
    c.x_tilde = 0.5 * (m.end() + p.end());
    c.x_prime = 0.5 * (m.start() + m.end());
    c.x_triple_prime = 0.5 * (p.start() + p.end());
    c.energies = {p.energy, m.energy};
    c.delta4 = quadrilateral_area(c.x_tilde, c.x_prime, c.x0, c.x_triple_prime, 1e-9 * std::max(1.0, norm(c.x_tilde)));
    return c;
}

// S_t = S0 + [area(tip_+ arc) - E_+ t] - [area(tip_- arc) - E_- t] + Delta4
inline double phase_transport(const MatchedConfiguration& cfg, double S0) {
    if (cfg.t == 0.0 || cfg.zero_chord) return S0;
    const auto& m = cfg.tip_trajectories.first;
    const auto& p = cfg.tip_trajectories.second;
    return S0 + arc_chord_area(p) - arc_chord_area(m) + cfg.delta4 - (cfg.energies.first - cfg.energies.second) * cfg.t;
}

struct AmplitudeTransport {
    double amplitude = 0.0;
    double indicator0 = 0.0, indicator_t = 0.0;
    CausticFlags flags;
    bool crossed_wigner_caustic = false;
};

namespace detail {
// True when f(M(tau)) vanishes on the segment: a sign change between checkpoints, or a local minimum of
// |f| that golden-section search drives below the caustic threshold (touching zeros, e.g. rigid rotations).
template <class F>
bool det_vanishes(const HamiltonianModel& model, const TrajectorySegment& seg, F&& f, std::size_t first, double tol) {
    auto sgn = [](double v) { return (v > 0) - (v < 0); };
    const std::size_t n = seg.size();
    for (std::size_t k = first; k < n; ++k) {
        const double d = f(seg.monodromy[k]);
        if (std::fabs(d) < kCausticThreshold) return true;
        if (k > first && sgn(d) != sgn(f(seg.monodromy[k - 1]))) return true;
    }
    for (std::size_t k = std::max<std::size_t>(first, 1); k + 1 < n; ++k) {
        const double dl = std::fabs(f(seg.monodromy[k - 1])), d = std::fabs(f(seg.monodromy[k])), dr = std::fabs(f(seg.monodromy[k + 1]));
        if (!(d <= dl && d <= dr)) continue;
        const double t0 = seg.times[k - 1];
        auto g = [&](double tau) {
            const auto loc = flow(model, seg.points[k - 1], tau - t0, tol);
            return std::fabs(f(loc.end_monodromy() * seg.monodromy[k - 1]));
        };
        double a = t0, b = seg.times[k + 1];
        const double r = 0.5 * (std::sqrt(5.0) - 1);
        double c = b - r * (b - a), e = a + r * (b - a), gc = g(c), ge = g(e);
        for (int it = 0; it < 60 && std::fabs(b - a) > 1e-12 * std::max(1.0, std::fabs(b)); ++it) {
            if (gc < ge) {
                b = e;
                e = c;
                ge = gc;
                c = b - r * (b - a);
                gc = g(c);
            } else {
                a = c;
                c = e;
                gc = ge;
                e = a + r * (b - a);
                ge = g(e);
            }
        }
        if (std::min(gc, ge) < kCausticThreshold) return true;
    }
    return false;
}
}  // namespace detail

inline AmplitudeTransport amplitude_transport(const MatchedConfiguration& cfg, const Leaf& leaf0, const Chord& chord0, double A0,
                                              const HamiltonianModel& model, double caustic_threshold = kCausticThresholdLeaf,
                                              double tol = kDefaultTol) {
    AmplitudeTransport r;
    const auto& m = cfg.tip_trajectories.first;
    const auto& p = cfg.tip_trajectories.second;
    const PhasePoint vm0 = leaf0.velocity(chord0.s_minus), vp0 = leaf0.velocity(chord0.s_plus);
    r.indicator0 = wedge(vp0, vm0);
    auto sgn = [](double v) { return (v > 0) - (v < 0); };
    for (const auto* seg : {&m, &p}) {
        if (detail::det_vanishes(model, *seg, central_caustic_det, 0, tol)) r.flags.central = true;
        if (detail::det_vanishes(model, *seg, chord_caustic_det, 1, tol)) r.flags.chord = true;
    }
    const std::size_t n = std::min(m.size(), p.size());
    int last_i = sgn(r.indicator0);
    for (std::size_t k = 1; k < n; ++k) {
        const int s = sgn(wedge(p.monodromy[k] * vp0, m.monodromy[k] * vm0));
        if (s != last_i) r.crossed_wigner_caustic = true;
        last_i = s;
    }
    const PhasePoint vm = m.end_monodromy() * vm0, vp = p.end_monodromy() * vp0;
    r.indicator_t = wedge(vp, vm);
    if (cfg.zero_chord || r.indicator0 == 0.0) {
        r.amplitude = A0;
        return r;
    }
    const double nn = norm(vp) * norm(vm);
    if (!(nn > 0) || std::fabs(r.indicator_t) / nn < caustic_threshold)
        throw CausticError("amplitude_transport: evolved chord lies on the Wigner caustic");
    r.amplitude = A0 * std::sqrt(std::fabs(r.indicator0) / std::fabs(r.indicator_t));
    return r;
}

inline PropagatedBranch propagate_branch(const Leaf& leaf0, double hbar, const WignerBranch& b0, const HamiltonianModel& model,
                                         double t, const PropagationOptions& o = {}) {
    PropagatedBranch pb;
    pb.branch0 = b0;
    const MatchedConfiguration cfg = tips_flow(model, b0.chord, t, o);
    pb.chord_t = make_chord(cfg.tip_trajectories.first.end(), cfg.tip_trajectories.second.end(), b0.chord.s_minus, b0.chord.s_plus);
    pb.action_t = phase_transport(cfg, b0.action);
    const double A0 = b0.amplitude_valid ? b0.amplitude : amplitude_from_indicator(leaf0.omega(), b0.caustic.indicator, hbar);
    try {
        const AmplitudeTransport at = amplitude_transport(cfg, leaf0, b0.chord, A0, model, o.caustic_threshold, o.tol);
        pb.amplitude_t = at.amplitude;
        pb.indicator_t = at.indicator_t;
        pb.caustic_flags = at.flags;
        pb.crossed_wigner_caustic = at.crossed_wigner_caustic;
        pb.amplitude_valid = b0.amplitude_valid && !cfg.zero_chord;
    } catch (const CausticError&) {
        pb.amplitude_valid = false;
        pb.crossed_wigner_caustic = true;
    }
    pb.maslov_index_t = default_maslov_index(b0.orientation, pb.indicator_t);
    return pb;
}

// Every chord of leaf0 at x0, carried along its tip trajectories.
inline std::vector<PropagatedBranch> propagate_point(const Leaf& leaf0, double hbar, const PhasePoint& x0,
                                                     const HamiltonianModel& model, double t, const PropagationOptions& o = {}) {
    const WignerEvaluation ev = evaluate(leaf0, hbar, x0);
    std::vector<PropagatedBranch> out;
    for (const auto& b : ev.branches) out.push_back(propagate_branch(leaf0, hbar, b, model, t, o));
    return out;
}

struct LeafEvolutionOptions {
    double tol = kDefaultTol;
    int initial_samples = 256;
    double max_segment = 0.01;  // absolute, in phase-space units
    double max_turn = 0.05;     // radians between consecutive segments
    int max_samples = 40000;
};

// Flows samples of leaf0 (with monodromy-transported velocities) and refines where the image is coarse.
inline Leaf leaf_evolution_engine(const Leaf& leaf0, const HamiltonianModel& model, double t, const LeafEvolutionOptions& o = {}) {
    if (o.initial_samples < 16) throw DomainError("leaf_evolution_engine: need at least 16 initial samples");
    struct S {
        double u;
        PhasePoint x, v;
    };
    auto make = [&](double u) {
        const TrajectorySegment seg = flow(model, leaf0.point(u), t, o.tol);
        return S{u, seg.end(), seg.end_monodromy() * leaf0.velocity(u)};
    };
    std::vector<S> pts;
    for (int k = 0; k < o.initial_samples; ++k) pts.push_back(make(static_cast<double>(k) / o.initial_samples));
    for (int pass = 0; pass < 40; ++pass) {
        const std::size_t n = pts.size();
        std::vector<char> split(n, 0);
        bool any = false;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = (i + 1) % n, h = (i + n - 1) % n;
            const PhasePoint d1 = pts[j].x - pts[i].x, d0 = pts[i].x - pts[h].x;
            const double turn = std::atan2(std::fabs(wedge(d0, d1)), dot(d0, d1));
            if (norm(d1) > o.max_segment) split[i] = 1;
            if (turn > o.max_turn) split[i] = split[h] = 1;
        }
        std::vector<S> next;
        for (std::size_t i = 0; i < n; ++i) {
            next.push_back(pts[i]);
            if (!split[i]) continue;
            any = true;
            const double u1 = i + 1 < n ? pts[i + 1].u : 1.0;
            next.push_back(make(0.5 * (pts[i].u + u1)));
        }
        if (static_cast<int>(next.size()) > o.max_samples)
            throw DomainError("leaf_evolution_engine: refinement exceeded max_samples");
        pts = std::move(next);
        if (!any) break;
    }
    std::vector<PhasePoint> xs, vs;
    std::vector<double> us;
    for (const auto& s : pts) {
        xs.push_back(s.x);
        vs.push_back(s.v);
        us.push_back(leaf0.origin_param(s.u));
    }
    Leaf out = Leaf::from_samples(xs, leaf0.omega(), vs, us);
    if (leaf0.quantum_number() && leaf0.hbar()) out.set_quantum_data(*leaf0.quantum_number(), *leaf0.hbar());
    return out;
}

// Tip parameters (a, b) on leaf0 whose images after time t have midpoint `target`.
inline std::pair<double, double> shoot_tips(const Leaf& leaf0, const HamiltonianModel& model, double t, const PhasePoint& target,
                                            double a, double b, const ShootOptions& o = {}) {
    auto eval = [&](double aa, double bb, TrajectorySegment& sa, TrajectorySegment& sb) {
        sa = flow(model, leaf0.point(aa), t, o.flow_tol);
        sb = flow(model, leaf0.point(bb), t, o.flow_tol);
        return 0.5 * (sa.end() + sb.end()) - target;
    };
    TrajectorySegment sa, sb;
    PhasePoint r = eval(a, b, sa, sb);
    for (int it = 0; it < o.max_iter && norm(r) > o.tol; ++it) {
        const PhasePoint ca = 0.5 * (sa.end_monodromy() * leaf0.tangent(a));
        const PhasePoint cb = 0.5 * (sb.end_monodromy() * leaf0.tangent(b));
        const Mat2 A{ca.p, cb.p, ca.q, cb.q};
        const double scale = norm(ca) * norm(cb);
        if (!(scale > 0) || std::fabs(A.det()) < kCausticThreshold * scale)
            throw CausticError("shoot_tips: evolved tips are parallel (Wigner caustic of the evolved leaf)");
        const PhasePoint d = -(A.inverse() * r);
        double lambda = 1.0;
        for (int k = 0; k < 30; ++k) {
            TrajectorySegment ta, tb;
            const PhasePoint rt = eval(a + lambda * d.p, b + lambda * d.q, ta, tb);
            if (norm(rt) < norm(r) || k == 29) {
                a += lambda * d.p;
                b += lambda * d.q;
                sa = std::move(ta);
                sb = std::move(tb);
                r = rt;
                break;
            }
            lambda *= 0.5;
        }
    }
    if (norm(r) > o.tol) throw RootFindError("shoot_tips: no convergence, residual " + std::to_string(norm(r)));
    return {Leaf::wrap01(a), Leaf::wrap01(b)};
}

struct TipsFieldValue {
    double value = 0.0;
    bool has_value = true;
    std::vector<PropagatedBranch> branches;
};

// Tips-of-the-chord field at an arbitrary x: chords of the evolved leaf seed the search, tips are pulled
// back to leaf0 and polished by shooting, then phase and amplitude are transported.
inline TipsFieldValue tips_field_value(const Leaf& leaf0, const Leaf& leaf_t, double hbar, const HamiltonianModel& model,
                                       double t, const PhasePoint& x, const PropagationOptions& o = {}) {
    TipsFieldValue out;
    const auto chords_t = find_chords(leaf_t, x);
    ShootOptions so;
    so.flow_tol = o.tol;
    for (const auto& ct : chords_t) {
        if (ct.zero_length()) {
            out.has_value = false;
            continue;
        }
        double a = leaf_t.origin_param(ct.s_minus), b = leaf_t.origin_param(ct.s_plus);
        try {
            std::tie(a, b) = shoot_tips(leaf0, model, t, x, a, b, so);
        } catch (const Error&) {
            out.has_value = false;
            continue;
        }
        WignerBranch b0 = make_branch(leaf0, make_chord(leaf0, a, b), hbar, -1, o.caustic_threshold);
        PropagatedBranch pb = propagate_branch(leaf0, hbar, b0, model, t, o);
        out.branches.push_back(pb);
    }
    for (const auto& pb : out.branches) {
        if (!pb.amplitude_valid) {
            out.has_value = false;
            continue;
        }
        out.value += pb.value(hbar);
    }
    if (!out.has_value) out.value = std::numeric_limits<double>::quiet_NaN();
    return out;
}

namespace detail {
// Chord area of leaf0 at the chord centred on y, following the chord with tip parameters near (a, b).
inline double leaf_action_near(const Leaf& leaf, const PhasePoint& y, double a, double b) {
    if (!refine_chord(leaf, y, a, b, 1e-11)) throw RootFindError("stationary_residual: chord not found near reference tips");
    return chord_area_params(leaf, a, b);
}
}  // namespace detail

// Max-norm of the gradients of Phi = S_psi0(x'') + S_t(x''') - S_t(x') + Delta4(x~, x', x'', x''') in the
// free points x'', x''' (x' = x~ + x'' - x''').  Near zero at a matched configuration.
inline double stationary_residual(const MatchedConfiguration& cfg, const Leaf& leaf0, const HamiltonianModel& model,
                                  const PhasePoint& dx2 = {0, 0}, const PhasePoint& dx3 = {0, 0}, double h = 1e-4) {
    if (cfg.t == 0.0 || cfg.zero_chord) return 0.0;
    const double t = cfg.t;
    const PhasePoint gm = cfg.tip_trajectories.first.start(), gp = cfg.tip_trajectories.second.start();
    ShootOptions so;
    so.tol = 1e-13;
    so.flow_tol = 1e-13;
    auto Phi = [&](const PhasePoint& x2, const PhasePoint& x3) {
        const PhasePoint x1 = cfg.x_tilde + x2 - x3;
        const double s2 = detail::leaf_action_near(leaf0, x2, cfg.s_minus, cfg.s_plus);
        const double s3 = central_action(center_shoot(model, x3, t, gp, so));
        const double s1 = central_action(center_shoot(model, x1, t, gm, so));
        return s2 + s3 - s1 + 2.0 * (wedge(cfg.x_tilde, x1) + wedge(x2, x3));
    };
    const PhasePoint x2 = cfg.x0 + dx2, x3 = cfg.x_triple_prime + dx3;
    double worst = 0;
    const PhasePoint e[2] = {{h, 0}, {0, h}};
    // five-point stencil; the three-point one leaves an O(h^2) floor near 1e-5 on short chords
    auto deriv = [&](auto&& f, const PhasePoint& d) { return (8 * (f(d) - f(-1.0 * d)) - (f(2.0 * d) - f(-2.0 * d))) / (12 * h); };
    for (const auto& d : e) {
        worst = std::max(worst, std::fabs(deriv([&](const PhasePoint& s) { return Phi(x2 + s, x3); }, d)));
        worst = std::max(worst, std::fabs(deriv([&](const PhasePoint& s) { return Phi(x2, x3 + s); }, d)));
    }
    return worst;
}

}  // namespace chordflow

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dop853.hpp"
#include "hamiltonian.hpp"
#include "phase_space.hpp"

namespace chordflow {

inline constexpr double kDefaultTol = 1e-11;
inline constexpr double kCausticThreshold = 1e-8;

// Time-sampled trajectory with monodromy M(t) and the running symplectic integral
// sigma(t) = (1/2) int_0^t x ^ xdot dt.
struct TrajectorySegment {
    double t0 = 0.0;
    double t1 = 0.0;
    std::vector<double> times;
    std::vector<PhasePoint> points;
    std::vector<Mat2> monodromy;
    std::vector<double> sigma;
    double energy = 0.0;

    std::size_t size() const { return points.size(); }
    const PhasePoint& start() const { return points.front(); }
    const PhasePoint& end() const { return points.back(); }
    const Mat2& end_monodromy() const { return monodromy.back(); }
    double duration() const { return t1 - t0; }
};

// Integrates xdot = J grad H together with Mdot = J Hess M and the sigma channel.
// With n_checkpoints > 0 the trajectory also lands on that many equally spaced interior times.
inline TrajectorySegment flow(const HamiltonianModel& model, const PhasePoint& x0, double t, double tol = kDefaultTol,
                              int n_checkpoints = 0) {
    if (!(tol > 0)) throw DomainError("flow: tol must be positive");
    require_finite(x0, "flow");
    if (!std::isfinite(t)) throw DomainError("flow: non-finite time");

    TrajectorySegment seg;
    seg.t0 = 0.0;
    seg.t1 = t;
    seg.energy = model.H(x0);
    auto record = [&seg](double tt, const std::array<double, 7>& y) {
        seg.times.push_back(tt);
        seg.points.push_back({y[0], y[1]});
        seg.monodromy.push_back({y[2], y[3], y[4], y[5]});
        seg.sigma.push_back(y[6]);
    };
    std::array<double, 7> y{x0.p, x0.q, 1, 0, 0, 1, 0};
    record(0.0, y);
    if (t == 0.0) return seg;

    auto rhs = [&model](const std::array<double, 7>& s) {
        const PhasePoint x{s[0], s[1]};
        const PhasePoint v = model.velocity(x);
        const Mat2 K = J * model.hess(x);
        const Mat2 M{s[2], s[3], s[4], s[5]};
        const Mat2 Md = K * M;
        return std::array<double, 7>{v.p, v.q, Md.a, Md.b, Md.c, Md.d, 0.5 * wedge(x, v)};
    };
    std::vector<double> stops;
    for (int i = 1; i < n_checkpoints + 1; ++i) stops.push_back(t * i / (n_checkpoints + 1));
    dop853::Options opt;
    opt.rtol = tol;
    opt.atol = tol;
    dop853::integrate<7>(rhs, 0.0, y, t, opt, record, stops);
    return seg;
}

// Symplectic area of the circuit: trajectory arc, then the straight chord from its end back to its start.
inline double arc_chord_area(const TrajectorySegment& seg) {
    if (seg.size() < 2 || seg.t0 == seg.t1) return 0.0;
    return seg.sigma.back() - seg.sigma.front() - 0.5 * wedge(seg.start(), seg.end());
}

// det(1 + M) and det(1 - M) for a unimodular M.
inline double central_caustic_det(const Mat2& M) { return (Mat2::identity() + M).det(); }
inline double chord_caustic_det(const Mat2& M) { return (Mat2::identity() - M).det(); }

struct ShootOptions {
    double tol = 1e-10;
    double flow_tol = kDefaultTol;
    int max_iter = 50;
};

namespace detail {
// Damped Newton on z -> residual(z); jac(M) builds the Jacobian from the end monodromy.
template <class Residual, class Jac>
TrajectorySegment newton_shoot(const HamiltonianModel& model, double t, PhasePoint z, const ShootOptions& o,
                               Residual&& residual, Jac&& jac, const char* caustic_what, const char* name) {
    TrajectorySegment seg = flow(model, z, t, o.flow_tol);
    PhasePoint r = residual(seg);
    for (int it = 0; it < o.max_iter; ++it) {
        if (norm(r) <= o.tol) return seg;
        const Mat2 A = jac(seg.end_monodromy());
        if (std::fabs(A.det()) < kCausticThreshold) throw CausticError(caustic_what);
        const PhasePoint dz = -(A.inverse() * r);
        double lambda = 1.0;
        for (int k = 0; k < 30; ++k) {
            TrajectorySegment trial = flow(model, z + lambda * dz, t, o.flow_tol);
            const PhasePoint rt = residual(trial);
            if (norm(rt) < norm(r) || k == 29) {
                z = z + lambda * dz;
                seg = std::move(trial);
                r = rt;
                break;
            }
            lambda *= 0.5;
        }
    }
    if (norm(r) <= o.tol) return seg;
    throw RootFindError(std::string(name) + ": no convergence, residual " + std::to_string(norm(r)));
}
}  // namespace detail

// Trajectory of duration t whose chord is centred on y: (x(0) + x(t))/2 = y.
inline TrajectorySegment center_shoot(const HamiltonianModel& model, const PhasePoint& y, double t,
                                      const PhasePoint& guess, const ShootOptions& o = {}) {
    require_finite(y, "center_shoot");
    if (t == 0.0) return flow(model, y, 0.0, o.flow_tol);
    auto residual = [&y](const TrajectorySegment& s) { return 0.5 * (s.start() + s.end()) - y; };
    auto jac = [](const Mat2& M) { return 0.5 * (Mat2::identity() + M); };
    return detail::newton_shoot(model, t, guess, o, residual, jac, "center_shoot: det(1+M) vanishes (center-map caustic)",
                                "center_shoot");
}

// Trajectory of duration t whose chord is xi: x(t) - x(0) = xi.
inline TrajectorySegment chord_shoot(const HamiltonianModel& model, const PhasePoint& xi, double t,
                                     const PhasePoint& guess, const ShootOptions& o = {}) {
    require_finite(xi, "chord_shoot");
    auto residual = [&xi](const TrajectorySegment& s) { return (s.end() - s.start()) - xi; };
    auto jac = [](const Mat2& M) { return M - Mat2::identity(); };
    return detail::newton_shoot(model, t, guess, o, residual, jac, "chord_shoot: det(1-M) vanishes (chord-map caustic)",
                                "chord_shoot");
}

// Central action S(y) = [area of arc + chord] - E t of the trajectory centred on y.
inline double central_action(const TrajectorySegment& seg) { return arc_chord_area(seg) - seg.energy * seg.duration(); }

// Chord action: Legendre transform xi ^ y - S(y) at the trajectory's own chord and centre.
inline double chord_action(const TrajectorySegment& seg) {
    const PhasePoint xi = seg.end() - seg.start();
    const PhasePoint y = 0.5 * (seg.start() + seg.end());
    return wedge(xi, y) - central_action(seg);
}

// Linearized map from the Hessian of the central action S(y).
// With B = Hess(S)/2 (the generating-function normalisation of S as an area), M = (1 - J B)(1 + J B)^-1.
inline Mat2 cayley_from_central(const Mat2& hessS) {
    const Mat2 K = J * (0.5 * hessS);
    const Mat2 P = Mat2::identity() + K;
    if (std::fabs(P.det()) < 1e-14) throw CausticError("cayley_from_central: singular 1 + J B");
    return (Mat2::identity() - K) * P.inverse();
}

// Linearized map from the Hessian of the chord action; B = 2 Hess, M = -(1 + J B)(1 - J B)^-1.
inline Mat2 cayley_from_chord(const Mat2& hessSt) {
    const Mat2 K = J * (2.0 * hessSt);
    const Mat2 P = Mat2::identity() - K;
    if (std::fabs(P.det()) < 1e-14) throw CausticError("cayley_from_chord: singular 1 - J B");
    return -1.0 * ((Mat2::identity() + K) * P.inverse());
}

// 2 (x ^ x' + x'' ^ x''') for four points obeying x - x' + x'' - x''' = 0.
inline double quadrilateral_area(const PhasePoint& x, const PhasePoint& x1, const PhasePoint& x2, const PhasePoint& x3,
                                 double tol = 1e-9) {
    const double res = norm(x - x1 + x2 - x3);
    if (res > tol) throw PreconditionError("quadrilateral_area: parallelogram constraint violated", res);
    return 2.0 * (wedge(x, x1) + wedge(x2, x3));
}

}  // namespace chordflow

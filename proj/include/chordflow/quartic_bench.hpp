#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

#include "propagation.hpp"

namespace chordflow {

// Tips x_- = (r_minus, alpha), x_+ = (r_plus, -beta) in polar form p = r cos, q = r sin.
struct QuarticChordSpec {
    double r_minus = 1.0, r_plus = 1.0;
    double alpha = 0.0, beta = 0.0;
    double t = 0.0;

    void validate() const {
        if (!(r_minus > 0) || !(r_plus > 0)) throw DomainError("QuarticChordSpec: radii must be positive");
        if (!std::isfinite(alpha) || !std::isfinite(beta) || !std::isfinite(t)) throw DomainError("QuarticChordSpec: non-finite entry");
    }
    PhasePoint tip_minus() const { return {r_minus * std::cos(alpha), r_minus * std::sin(alpha)}; }
    PhasePoint tip_plus() const { return {r_plus * std::cos(beta), -r_plus * std::sin(beta)}; }
};

inline double reduce_angle(double a) {
    a = std::remainder(a, 2 * std::numbers::pi);
    return a <= -std::numbers::pi ? a + 2 * std::numbers::pi : a;
}

inline std::pair<double, double> quartic_flow(double r0, double theta0, double t) {
    if (!(r0 >= 0)) throw DomainError("quartic_flow: r0 must be >= 0");
    return {r0, theta0 + r0 * r0 * t};
}

// Centre of the evolved chord; the alpha' branch is taken from the midpoint's transverse component.
inline std::pair<double, double> quartic_new_center(const QuarticChordSpec& s) {
    s.validate();
    const double phi = (s.r_plus * s.r_plus - s.r_minus * s.r_minus) * s.t - (s.alpha + s.beta);
    const double r2 = 0.25 * (s.r_minus * s.r_minus + s.r_plus * s.r_plus) + 0.5 * s.r_minus * s.r_plus * std::cos(phi);
    const double r = std::sqrt(std::max(0.0, r2));
    if (r < 1e-12 * std::max(s.r_minus, s.r_plus)) throw DegenerateCenterError("quartic_new_center: evolved tips are antipodal");
    const double ap = std::atan2(s.r_plus * std::sin(phi), s.r_minus + s.r_plus * std::cos(phi));
    return {r, reduce_angle(s.r_minus * s.r_minus * s.t + s.alpha + ap)};
}

// S_t(new centre) - S_0(old centre) for the chord tip_- -> tip_+.
inline double quartic_delta_S(const QuarticChordSpec& s) {
    s.validate();
    const double D = s.r_plus * s.r_plus - s.r_minus * s.r_minus;
    return s.t * (std::pow(s.r_plus, 4) - std::pow(s.r_minus, 4)) / 4 -
           s.r_plus * s.r_minus * std::sin(D * s.t / 2) * std::cos(D * s.t / 2 - (s.alpha + s.beta));
}

// Same expression with the opposite sign on the second term (kept for comparison only).
inline double quartic_delta_S_as_printed(const QuarticChordSpec& s) {
    s.validate();
    const double D = s.r_plus * s.r_plus - s.r_minus * s.r_minus;
    return s.t * (std::pow(s.r_plus, 4) - std::pow(s.r_minus, 4)) / 4 +
           s.r_plus * s.r_minus * std::sin(D * s.t / 2) * std::cos(D * s.t / 2 - (s.alpha + s.beta));
}

// Central action of the tip trajectory of duration sign * t, and the squared norm of its chord centre.
inline std::pair<double, double> quartic_central_action(double r, double t, int sign) {
    if (!(r > 0)) throw DomainError("quartic_central_action: r must be positive");
    if (sign != 1 && sign != -1) throw DomainError("quartic_central_action: sign must be +1 or -1");
    const double w = r * r * t;
    const double c = std::cos(w / 2);
    return {sign * r * r * (w - 2 * std::sin(w)) / 4, r * r * c * c};
}

struct QuarticBenchRow {
    QuarticChordSpec spec;
    double dS_closed = 0, dS_numeric = 0, abs_err = 0;
    double center_err = 0;  // |tips_flow midpoint - closed-form centre|
    bool caustic = false;   // a tip trajectory crosses det(1 +- M) = 0
    bool degenerate = false;
};

// wedge_sign = -1 flips the orientation of every area term of the transported phase (mutation check).
inline QuarticBenchRow quartic_bench_row(const QuarticChordSpec& s, double tol = kDefaultTol, int wedge_sign = 1) {
    QuarticBenchRow row;
    row.spec = s;
    const auto model = quartic_model();
    PropagationOptions o;
    o.tol = tol;
    const Chord c = make_chord(s.tip_minus(), s.tip_plus(), 0.0, 0.5);
    const MatchedConfiguration cfg = tips_flow(model, c, s.t, o);
    row.dS_closed = quartic_delta_S(s);
    row.dS_numeric = phase_transport(cfg, 0.0);
    if (wedge_sign != 1) {
        const double energy = (cfg.energies.first - cfg.energies.second) * cfg.t;
        row.dS_numeric = wedge_sign * (row.dS_numeric + energy) - energy;
    }
    row.abs_err = std::fabs(row.dS_closed - row.dS_numeric);
    for (const auto* seg : {&cfg.tip_trajectories.first, &cfg.tip_trajectories.second}) {
        if (detail::det_vanishes(model, *seg, central_caustic_det, 0, tol)) row.caustic = true;
        if (detail::det_vanishes(model, *seg, chord_caustic_det, 1, tol)) row.caustic = true;
    }
    try {
        const auto [r, th] = quartic_new_center(s);
        row.center_err = norm(cfg.x_tilde - PhasePoint{r * std::cos(th), r * std::sin(th)});
    } catch (const DegenerateCenterError&) {
        row.degenerate = true;
    }
    return row;
}

// r_pm uniform in [r_lo, r_hi], |alpha|, |beta| <= angle_max, |t| <= t_max.
inline std::vector<QuarticChordSpec> random_quartic_specs(int n, unsigned seed, double r_lo = 0.3, double r_hi = 2.0,
                                                          double angle_max = 1.0, double t_max = 1.0) {
    std::mt19937_64 g(seed);
    std::uniform_real_distribution<double> ur(r_lo, r_hi), ua(-angle_max, angle_max), ut(-t_max, t_max);
    std::vector<QuarticChordSpec> out;
    for (int k = 0; k < n; ++k) {
        QuarticChordSpec s;
        s.r_minus = ur(g);
        s.r_plus = ur(g);
        s.alpha = ua(g);
        s.beta = ua(g);
        s.t = ut(g);
        out.push_back(s);
    }
    return out;
}

struct ScalingPoint {
    double asymmetry = 0;   // r_plus - r_minus
    double discrepancy = 0; // S_psi_t(x_t) - S_psi_0(x_0)
};

struct ScalingResult {
    double exponent = 0, intercept = 0;
    std::vector<ScalingPoint> points;
};

// Circle through both tips with its centre on the perpendicular bisector, `offset` chord lengths from the
// chord midpoint, on the side of the origin.
inline Leaf scaling_leaf(const QuarticChordSpec& s, double offset = 0.5) {
    const PhasePoint a = s.tip_minus(), b = s.tip_plus(), m = 0.5 * (a + b), xi = b - a;
    PhasePoint nrm{-xi.q, xi.p};
    nrm = nrm / norm(nrm);
    if (dot(nrm, m) > 0) nrm = -1.0 * nrm;
    const PhasePoint c = m + offset * norm(xi) * nrm;
    return Leaf::circle(c, norm(a - c), 256);
}

// Phase difference between the tips-of-the-chord field at the Liouville image x_t of x_0 and the initial phase
// at x_0 (the phase Liouville transport would carry), on the chord family of `specs`; log-log slope against
// the tip asymmetry.
inline ScalingResult scaling_probe(const std::vector<QuarticChordSpec>& specs, double offset = 0.5) {
    const auto model = quartic_model();
    ScalingResult res;
    for (const auto& s : specs) {
        s.validate();
        const Leaf L = scaling_leaf(s, offset);
        const auto& circ = *L.circle_shape();
        auto param = [&](const PhasePoint& x) {
            return Leaf::wrap01(std::atan2(x.q - circ.center.q, x.p - circ.center.p) / (2 * std::numbers::pi));
        };
        Chord c0 = make_chord(L, param(s.tip_minus()), param(s.tip_plus()));
        c0 = canonical_chord(L, c0);
        const double S0 = chord_area(L, c0);
        const PhasePoint xt = flow(model, c0.center, s.t).end();
        ShootOptions so;
        so.tol = 1e-13;
        const auto [a, b] = shoot_tips(L, model, s.t, xt, c0.s_minus, c0.s_plus, so);
        const Chord c1 = make_chord(L, a, b);
        const double St = phase_transport(tips_flow(model, c1, s.t), chord_area(L, c1));
        res.points.push_back({s.r_plus - s.r_minus, St - S0});
    }
    std::vector<double> X, Y;
    for (const auto& p : res.points)
        if (p.asymmetry != 0 && p.discrepancy != 0) {
            X.push_back(std::log(std::fabs(p.asymmetry)));
            Y.push_back(std::log(std::fabs(p.discrepancy)));
        }
    if (X.size() < 3) throw FitError("scaling_probe: need at least 3 usable specs");
    const double n = static_cast<double>(X.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        sx += X[i];
        sy += Y[i];
        sxx += X[i] * X[i];
        sxy += X[i] * Y[i];
    }
    const double den = n * sxx - sx * sx;
    if (!(std::fabs(den) > 0)) throw FitError("scaling_probe: degenerate abscissae");
    res.exponent = (n * sxy - sx * sy) / den;
    res.intercept = (sy - res.exponent * sx) / n;
    return res;
}

// Radial family: alpha = beta = 0, r_plus + r_minus = 2 r_mean, asymmetries evenly spaced.
inline std::vector<QuarticChordSpec> radial_scaling_specs(double r_mean, double a_lo, double a_hi, int n, double t) {
    if (n < 2) throw DomainError("radial_scaling_specs: n must be >= 2");
    std::vector<QuarticChordSpec> out;
    for (int k = 0; k < n; ++k) {
        const double a = a_lo + (a_hi - a_lo) * k / (n - 1);
        out.push_back({r_mean - a / 2, r_mean + a / 2, 0.0, 0.0, t});
    }
    return out;
}

}  // namespace chordflow

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "leaf.hpp"

namespace chordflow {

inline constexpr double kCausticThresholdLeaf = 1e-8;

struct Chord {
    PhasePoint center;
    PhasePoint tip_minus;
    PhasePoint tip_plus;
    PhasePoint xi;
    double s_minus = 0.0;
    double s_plus = 0.0;

    bool zero_length() const { return s_minus == s_plus; }
};

inline Chord make_chord(const Leaf& leaf, double s_minus, double s_plus) {
    Chord c;
    c.s_minus = Leaf::wrap01(s_minus);
    c.s_plus = Leaf::wrap01(s_plus);
    c.tip_minus = leaf.point(c.s_minus);
    c.tip_plus = leaf.point(c.s_plus);
    c.center = 0.5 * (c.tip_minus + c.tip_plus);
    c.xi = c.tip_plus - c.tip_minus;
    return c;
}

// Chord from explicit tips that are known to lie on the leaf at the given parameters.
inline Chord make_chord(const PhasePoint& tip_minus, const PhasePoint& tip_plus, double s_minus, double s_plus) {
    Chord c;
    c.s_minus = s_minus;
    c.s_plus = s_plus;
    c.tip_minus = tip_minus;
    c.tip_plus = tip_plus;
    c.center = 0.5 * (tip_minus + tip_plus);
    c.xi = tip_plus - tip_minus;
    return c;
}

struct CausticReport {
    double indicator = 0.0;   // xdot_+ ^ xdot_-
    double normalized = 0.0;  // indicator / (|xdot_+| |xdot_-|)
    bool is_on_caustic = true;
    int chord_count = -1;
};

// Arc from s_minus to s_plus along the leaf, closed by the straight chord.  Not reduced modulo the
// enclosed area, so evolved (non-convex) leaves keep a continuous branch.
inline double chord_area_params(const Leaf& leaf, double s_minus, double s_plus) {
    if (Leaf::wrap01(s_minus) == Leaf::wrap01(s_plus)) return 0.0;
    return leaf.arc_sigma(s_minus, s_plus) - 0.5 * wedge(leaf.point(s_minus), leaf.point(s_plus));
}

inline double chord_area(const Leaf& leaf, const Chord& chord, double tol = 1e-8) {
    const double scale = std::max(1.0, norm(chord.center));
    const double em = norm(leaf.point(chord.s_minus) - chord.tip_minus);
    const double ep = norm(leaf.point(chord.s_plus) - chord.tip_plus);
    if (em > tol * scale || ep > tol * scale)
        throw DomainError("chord_area: chord tips are not on the leaf (offset " + std::to_string(std::max(em, ep)) + ")");
    if (chord.zero_length()) return 0.0;
    return leaf.arc_sigma(chord.s_minus, chord.s_plus) - 0.5 * wedge(chord.tip_minus, chord.tip_plus);
}

inline Chord complementary(const Chord& c) {
    Chord d = c;
    std::swap(d.tip_minus, d.tip_plus);
    std::swap(d.s_minus, d.s_plus);
    d.xi = -1.0 * c.xi;
    return d;
}

// Tip ordering: the arc tip_- -> tip_+ (along the orientation) is the one of smaller oriented area;
// ties go to the smaller parameter for tip_-.
inline Chord canonical_chord(const Leaf& leaf, const Chord& c) {
    if (c.zero_length()) return c;
    const double S = leaf.orientation() * chord_area_params(leaf, c.s_minus, c.s_plus);
    const double half = 0.5 * std::fabs(leaf.enclosed_area());
    const double eps = 1e-12 * std::max(1.0, half);
    if (S > half + eps) return complementary(c);
    if (std::fabs(S - half) <= eps && c.s_plus < c.s_minus) return complementary(c);
    return c;
}

inline CausticReport caustic_indicator(const Leaf& leaf, const Chord& chord, int chord_count = -1,
                                       double threshold = kCausticThresholdLeaf) {
    CausticReport r;
    r.chord_count = chord_count;
    const PhasePoint vp = leaf.velocity(chord.s_plus), vm = leaf.velocity(chord.s_minus);
    r.indicator = wedge(vp, vm);
    const double nn = norm(vp) * norm(vm);
    r.normalized = nn > 0 ? r.indicator / nn : 0.0;
    r.is_on_caustic = chord.zero_length() || std::fabs(r.normalized) < threshold;
    return r;
}

namespace detail {

inline double circ_dist(double a, double b) {
    double d = std::fabs(Leaf::wrap01(a) - Leaf::wrap01(b));
    return std::min(d, 1.0 - d);
}

// Newton on (x(a) + x(b))/2 = x.
inline bool refine_chord(const Leaf& leaf, const PhasePoint& x, double& a, double& b, double tol) {
    for (int it = 0; it < 60; ++it) {
        const PhasePoint F = 0.5 * (leaf.point(a) + leaf.point(b)) - x;
        if (norm(F) <= 0.05 * tol) return true;
        const PhasePoint ta = leaf.tangent(a), tb = leaf.tangent(b);
        const double det = wedge(ta, tb);
        if (det == 0.0 || !std::isfinite(det)) break;
        const PhasePoint v = -2.0 * F;
        double da = wedge(v, tb) / det, db = wedge(ta, v) / det;
        const double big = std::max(std::fabs(da), std::fabs(db));
        if (big > 0.02) {
            da *= 0.02 / big;
            db *= 0.02 / big;
        }
        a = Leaf::wrap01(a + da);
        b = Leaf::wrap01(b + db);
    }
    return norm(0.5 * (leaf.point(a) + leaf.point(b)) - x) <= tol;
}

// Closest leaf parameter to x among polyline vertices near x; returns distance (or +inf if none nearby).
inline double nearest_param(const Leaf& leaf, const PhasePoint& x, double& s_out) {
    const auto& P = leaf.polyline();
    const int n = static_cast<int>(P.pts.size());
    const int ci = static_cast<int>(std::floor((x.p - P.pmin) / P.cell));
    const int cj = static_cast<int>(std::floor((x.q - P.qmin) / P.cell));
    double best = 1e300;
    int kbest = -1;
    for (int i = ci - 1; i <= ci + 1; ++i)
        for (int j = cj - 1; j <= cj + 1; ++j) {
            if (i < 0 || j < 0 || i >= P.nx || j >= P.ny) continue;
            for (int k : P.buckets[static_cast<std::size_t>(i) * P.ny + j]) {
                const double d = norm(P.pts[k] - x);
                if (d < best) {
                    best = d;
                    kbest = k;
                }
            }
        }
    if (kbest < 0) return 1e300;
    double s = static_cast<double>(kbest) / n;
    // Newton on g(s) = t(s).(x(s) - x)
    for (int it = 0; it < 30; ++it) {
        const double h = 1e-6;
        auto g = [&](double u) { return dot(leaf.tangent(u), leaf.point(u) - x); };
        const double g0 = g(s), dg = (g(s + h) - g(s - h)) / (2 * h);
        if (dg <= 0) break;
        double ds = -g0 / dg;
        ds = std::clamp(ds, -2.0 / n, 2.0 / n);
        s = Leaf::wrap01(s + ds);
        if (std::fabs(ds) < 1e-15) break;
    }
    s_out = s;
    return norm(leaf.point(s) - x);
}

}  // namespace detail

// All chords of the leaf centred on x (within tol), each once, canonically ordered and sorted by s_minus.
inline std::vector<Chord> find_chords(const Leaf& leaf, const PhasePoint& x, double tol = 1e-10) {
    require_finite(x, "find_chords");
    if (!(tol > 0)) throw DomainError("find_chords: tol must be positive");
    if (leaf.is_circle()) {
        const auto& c = *leaf.circle_shape();
        if (norm(x - c.center) <= std::max(tol, 1e-12 * c.R))
            throw DegenerateCenterError("find_chords: x is the centre of a circular leaf (infinitely many chords)");
    }
    const auto& P = leaf.polyline();
    const int n = static_cast<int>(P.pts.size());
    std::vector<std::pair<double, double>> seeds;
    std::vector<int> stamp(static_cast<std::size_t>(n), -1);
    for (int k = 0; k < n; ++k) {
        const PhasePoint a = 2.0 * x - P.pts[k], b = 2.0 * x - P.pts[(k + 1) % n];
        int i0 = static_cast<int>(std::floor((std::min(a.p, b.p) - P.pmin) / P.cell));
        int i1 = static_cast<int>(std::floor((std::max(a.p, b.p) - P.pmin) / P.cell));
        int j0 = static_cast<int>(std::floor((std::min(a.q, b.q) - P.qmin) / P.cell));
        int j1 = static_cast<int>(std::floor((std::max(a.q, b.q) - P.qmin) / P.cell));
        if (i1 < 0 || j1 < 0 || i0 >= P.nx || j0 >= P.ny) continue;
        i0 = std::max(i0, 0);
        j0 = std::max(j0, 0);
        i1 = std::min(i1, P.nx - 1);
        j1 = std::min(j1, P.ny - 1);
        const PhasePoint ab = b - a;
        for (int i = i0; i <= i1; ++i)
            for (int j = j0; j <= j1; ++j)
                for (int m : P.buckets[static_cast<std::size_t>(i) * P.ny + j]) {
                    if (stamp[m] == k) continue;
                    stamp[m] = k;
                    const PhasePoint c = P.pts[m], d = P.pts[(m + 1) % n];
                    const PhasePoint cd = d - c;
                    const double den = wedge(ab, cd);
                    if (den == 0.0) continue;
                    const double al = wedge(c - a, cd) / den, be = wedge(c - a, ab) / den;
                    if (al < -1e-9 || al > 1 + 1e-9 || be < -1e-9 || be > 1 + 1e-9) continue;
                    seeds.emplace_back((k + al) / n, (m + be) / n);
                }
    }
    if (!leaf.is_circle() && seeds.size() > static_cast<std::size_t>(n) / 4) {
        // reflected curve coincides with the leaf?
        int hits = 0;
        for (int k = 0; k < 32; ++k) {
            double s;
            if (detail::nearest_param(leaf, 2.0 * x - leaf.point(k / 32.0), s) <= 1e3 * tol) ++hits;
        }
        if (hits == 32) throw DegenerateCenterError("find_chords: leaf is point-symmetric about x");
    }

    std::vector<Chord> out;
    double s_on = 0;
    const double d_leaf = detail::nearest_param(leaf, x, s_on);
    if (d_leaf <= tol) {
        out.push_back(make_chord(leaf, s_on, s_on));
    } else if (d_leaf < 8 * P.spacing) {
        for (double k : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) seeds.emplace_back(s_on - k / n, s_on + k / n);
    }

    for (auto [a, b] : seeds) {
        if (!detail::refine_chord(leaf, x, a, b, tol)) continue;
        if (detail::circ_dist(a, b) < 1e-9) continue;
        const Chord c = canonical_chord(leaf, make_chord(leaf, a, b));
        bool dup = false;
        for (const auto& o : out)
            if (detail::circ_dist(o.s_minus, c.s_minus) < 1e-7 && detail::circ_dist(o.s_plus, c.s_plus) < 1e-7) dup = true;
        if (!dup) out.push_back(c);
    }
    std::sort(out.begin(), out.end(), [](const Chord& u, const Chord& v) { return u.s_minus < v.s_minus; });
    return out;
}

// Locus of midpoints of tip pairs with parallel or anti-parallel tangents.
inline std::vector<PhasePoint> wigner_caustic_trace(const Leaf& leaf, int n_scan = 256) {
    if (n_scan < 64) throw DomainError("wigner_caustic_trace: n_scan must be >= 64");
    std::vector<PhasePoint> T(static_cast<std::size_t>(n_scan));
    for (int j = 0; j < n_scan; ++j) T[j] = leaf.tangent(static_cast<double>(j) / n_scan);
    std::vector<PhasePoint> raw;
    for (int i = 0; i < n_scan; ++i) {
        const double sa = static_cast<double>(i) / n_scan;
        const PhasePoint ta = T[i];
        for (int jj = 2; jj < n_scan - 2; ++jj) {
            const int j0 = (i + jj) % n_scan, j1 = (i + jj + 1) % n_scan;
            const double g0 = wedge(ta, T[j0]), g1 = wedge(ta, T[j1]);
            if (g0 == 0.0 || (g0 > 0) != (g1 > 0)) {
                double lo = static_cast<double>(i + jj) / n_scan, hi = static_cast<double>(i + jj + 1) / n_scan;
                double glo = g0;
                for (int it = 0; it < 60 && g0 != 0.0; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    const double gm = wedge(ta, leaf.tangent(mid));
                    if ((gm > 0) == (glo > 0)) {
                        lo = mid;
                        glo = gm;
                    } else {
                        hi = mid;
                    }
                }
                const double sb = g0 == 0.0 ? lo : 0.5 * (lo + hi);
                raw.push_back(0.5 * (leaf.point(sa) + leaf.point(sb)));
            }
        }
    }
    double scale = 0;
    for (const auto& s : leaf.samples()) scale = std::max(scale, norm(s));
    const double merge = 1e-9 * std::max(1.0, scale);
    std::vector<PhasePoint> out;
    for (const auto& p : raw) {
        bool dup = false;
        for (const auto& o : out)
            if (norm(o - p) <= merge) {
                dup = true;
                break;
            }
        if (!dup) out.push_back(p);
    }
    return out;
}

}  // namespace chordflow

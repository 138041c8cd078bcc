#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "parallel.hpp"
#include "propagation.hpp"

namespace chordflow {

// Distance from x to the nearest caustic of the leaf: its Wigner-caustic trace or the leaf itself.
inline double caustic_distance(const Leaf& leaf, const std::vector<PhasePoint>& trace, const PhasePoint& x) {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& p : trace) d = std::min(d, norm(p - x));
    double s = 0;
    return std::min(d, detail::nearest_param(leaf, x, s));
}

// sqrt(sum (a - b)^2 / sum b^2)
inline double relative_l2(const std::vector<double>& approx, const std::vector<double>& exact) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < approx.size(); ++i) {
        num += (approx[i] - exact[i]) * (approx[i] - exact[i]);
        den += exact[i] * exact[i];
    }
    return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

// One initial point x0: the tips engine sends its value to the new centre, Liouville to the flowed point.
struct TransportSample {
    PhasePoint x0, x_tips, x_liouville;
    double w_tips = 0, w_liouville = 0;
    double exact_tips = 0, exact_liouville = 0;
    double d_tips = 0, d_liouville = 0;  // caustic distances on the evolved leaf
    bool usable = false;                 // single off-caustic chord before and after
};

struct TransportComparison {
    std::vector<TransportSample> samples;
    double err_tips = 0, err_liouville = 0;  // over usable samples beyond the margin
    double err_tips_all = 0, err_liouville_all = 0;
    int used = 0, usable = 0;
};

struct AnnulusSpec {
    PhasePoint center;
    double r_inner = 0.3, r_outer = 0.8;  // absolute radii
    int samples = 1000;
    unsigned seed = 1;
};

inline std::vector<PhasePoint> annulus_points(const AnnulusSpec& a) {
    if (!(a.r_outer > a.r_inner) || !(a.r_inner >= 0) || a.samples < 1) throw DomainError("annulus: empty region");
    std::mt19937_64 g(a.seed);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<PhasePoint> out;
    for (int k = 0; k < a.samples; ++k) {
        const double r = std::sqrt(a.r_inner * a.r_inner + (a.r_outer * a.r_outer - a.r_inner * a.r_inner) * u(g));
        const double th = 2 * std::numbers::pi * u(g);
        out.push_back(a.center + PhasePoint{r * std::cos(th), r * std::sin(th)});
    }
    return out;
}

// Both propagated fields against an exact W_t, each at its own destination points.  Samples with several
// chords, caustic flags, or within `margin` of a caustic of the evolved leaf are left out of the main metric.
inline TransportComparison compare_transport(const Leaf& leaf0, const Leaf& leaf_t, double hbar, const HamiltonianModel& model,
                                             double t, const std::vector<PhasePoint>& x0s,
                                             const std::function<double(const PhasePoint&)>& exact, double margin,
                                             int threads = 1, const PropagationOptions& o = {}) {
    TransportComparison out;
    out.samples.resize(x0s.size());
    const auto trace = wigner_caustic_trace(leaf_t, 1024);
    parallel_for(x0s.size(), threads, [&](std::size_t i) {
        TransportSample s;
        s.x0 = x0s[i];
        const auto br = propagate_point(leaf0, hbar, s.x0, model, t, o);
        s.x_liouville = flow(model, s.x0, t, o.tol).end();
        if (br.size() == 1 && br[0].amplitude_valid && !br[0].crossed_wigner_caustic) {
            s.x_tips = br[0].chord_t.center;
            if (find_chords(leaf_t, s.x_tips).size() == 1) {
                s.usable = true;
                s.w_tips = br[0].value(hbar);
                s.w_liouville = br[0].branch0.value(hbar);
                s.exact_tips = exact(s.x_tips);
                s.exact_liouville = exact(s.x_liouville);
                s.d_tips = caustic_distance(leaf_t, trace, s.x_tips);
                s.d_liouville = caustic_distance(leaf_t, trace, s.x_liouville);
            }
        }
        out.samples[i] = s;
    });
    std::vector<double> a, b, c, d, a2, b2, c2, d2;
    for (const auto& s : out.samples) {
        if (!s.usable) continue;
        ++out.usable;
        a2.push_back(s.w_tips);
        b2.push_back(s.exact_tips);
        c2.push_back(s.w_liouville);
        d2.push_back(s.exact_liouville);
        if (s.d_tips <= margin || s.d_liouville <= margin) continue;
        ++out.used;
        a.push_back(s.w_tips);
        b.push_back(s.exact_tips);
        c.push_back(s.w_liouville);
        d.push_back(s.exact_liouville);
    }
    out.err_tips = relative_l2(a, b);
    out.err_liouville = relative_l2(c, d);
    out.err_tips_all = relative_l2(a2, b2);
    out.err_liouville_all = relative_l2(c2, d2);
    return out;
}

}  // namespace chordflow

#pragma once

#include <cmath>
#include <fstream>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "io.hpp"
#include "periodic_spline.hpp"
#include "phase_space.hpp"

namespace chordflow {

// Closed oriented curve, parameter s in [0,1).  Circles are represented exactly; everything else by
// periodic cubic splines through the samples, parametrised by cumulative chord length.
class Leaf {
public:
    struct Circle {
        PhasePoint center;
        double R = 1.0;
        double phase0 = 0.0;
    };

    // Dense polyline plus a uniform bucket grid over its segments.
    struct Polyline {
        std::vector<PhasePoint> pts;  // pts[k] = x(k / n)
        double pmin = 0, qmin = 0, cell = 1;
        int nx = 1, ny = 1;
        std::vector<std::vector<int>> buckets;
        double spacing = 0;
    };

    static Leaf circle(const PhasePoint& center, double R, int n_samples, int orientation = 1, double phase0 = 0.0) {
        if (!(R > 0) || !std::isfinite(R)) throw DomainError("make_circle_leaf: radius must be positive");
        if (n_samples < 16) throw DomainError("make_circle_leaf: need at least 16 samples");
        if (orientation != 1 && orientation != -1) throw DomainError("orientation must be +1 or -1");
        require_finite(center, "make_circle_leaf");
        Leaf L;
        L.circle_ = Circle{center, R, phase0};
        L.orientation_ = orientation;
        L.omega_ = 1.0;
        L.generator_center_ = center;
        L.has_generator_ = true;
        for (int k = 0; k < n_samples; ++k) {
            const double s = static_cast<double>(k) / n_samples;
            L.params_.push_back(s);
            L.samples_.push_back(L.point(s));
            L.origin_params_.push_back(s);
        }
        L.area_ = orientation * std::numbers::pi * R * R;
        L.build_polyline();
        return L;
    }

    // Spline leaf through `pts` (closed, no repeated endpoint).  Optional per-sample flow velocities and
    // parameters of the generating leaf from which the samples descend.
    static Leaf from_samples(const std::vector<PhasePoint>& pts, double omega = 1.0,
                             std::vector<PhasePoint> velocities = {}, std::vector<double> origin_params = {}) {
        const std::size_t n = pts.size();
        if (n < 4) throw DomainError("leaf: need at least 4 samples");
        for (const auto& x : pts) require_finite(x, "leaf sample");
        Leaf L;
        L.omega_ = omega;
        std::vector<double> u(n);
        double acc = 0;
        for (std::size_t i = 0; i < n; ++i) {
            u[i] = acc;
            const double d = norm(pts[(i + 1) % n] - pts[i]);
            if (!(d > 0)) throw DomainError("leaf: repeated consecutive samples");
            acc += d;
        }
        std::vector<double> ps(n), qs(n);
        for (std::size_t i = 0; i < n; ++i) {
            ps[i] = pts[i].p;
            qs[i] = pts[i].q;
        }
        L.sp_ = PeriodicSpline(u, ps, acc);
        L.sq_ = PeriodicSpline(u, qs, acc);
        if (!velocities.empty()) {
            if (velocities.size() != n) throw DomainError("leaf: velocity count mismatch");
            std::vector<double> vp(n), vq(n);
            for (std::size_t i = 0; i < n; ++i) {
                vp[i] = velocities[i].p;
                vq[i] = velocities[i].q;
            }
            L.svp_ = PeriodicSpline(u, vp, acc);
            L.svq_ = PeriodicSpline(u, vq, acc);
            L.has_velocity_samples_ = true;
        }
        L.samples_ = pts;
        for (std::size_t i = 0; i < n; ++i) L.params_.push_back(u[i] / acc);
        if (!origin_params.empty()) {
            if (origin_params.size() != n) throw DomainError("leaf: origin parameter count mismatch");
            L.origin_params_ = std::move(origin_params);
        } else {
            L.origin_params_ = L.params_;
        }
        L.area_ = L.arc_sigma(0.0, 1.0);
        L.orientation_ = L.area_ >= 0 ? 1 : -1;
        L.build_polyline();
        return L;
    }

    bool is_circle() const { return circle_.has_value(); }
    const std::optional<Circle>& circle_shape() const { return circle_; }
    int orientation() const { return orientation_; }
    double enclosed_area() const { return area_; }
    double omega() const { return omega_; }
    const std::vector<PhasePoint>& samples() const { return samples_; }
    const std::vector<double>& sample_params() const { return params_; }
    const std::vector<double>& origin_params() const { return origin_params_; }
    std::optional<int> quantum_number() const { return quantum_number_; }
    std::optional<double> hbar() const { return hbar_; }
    void set_quantum_data(int n, double hbar) {
        quantum_number_ = n;
        hbar_ = hbar;
    }
    void set_omega(double w) { omega_ = w; }
    const Polyline& polyline() const { return *poly_; }

    static double wrap01(double s) {
        double v = s - std::floor(s);
        return v >= 1.0 ? 0.0 : v;
    }

    PhasePoint point(double s) const {
        s = wrap01(s);
        if (circle_) {
            const double th = angle(s);
            return circle_->center + circle_->R * PhasePoint{std::cos(th), std::sin(th)};
        }
        const double u = s * sp_.period();
        return {sp_.eval(u).y, sq_.eval(u).y};
    }

    // dx/ds
    PhasePoint tangent(double s) const {
        s = wrap01(s);
        if (circle_) {
            const double th = angle(s), w = orientation_ * 2 * std::numbers::pi * circle_->R;
            return {-w * std::sin(th), w * std::cos(th)};
        }
        const double L = sp_.period(), u = s * L;
        return {sp_.eval(u).dy * L, sq_.eval(u).dy * L};
    }

    // Flow velocity of the generating contour where known, else the unit tangent.
    PhasePoint velocity(double s) const {
        if (circle_ && has_generator_) {
            const PhasePoint d = point(s) - generator_center_;
            return omega_ * PhasePoint{-d.q, d.p};
        }
        if (has_velocity_samples_) {
            const double u = wrap01(s) * sp_.period();
            return {svp_.eval(u).y, svq_.eval(u).y};
        }
        const PhasePoint t = tangent(s);
        return t / norm(t);
    }
    bool has_flow_velocity() const { return (circle_ && has_generator_) || has_velocity_samples_; }

    // (1/2) int x ^ dx along the leaf from sa forward to sb (wrapping once if sb < sa).
    double arc_sigma(double sa, double sb) const {
        if (sb == 1.0 && sa == 0.0) return full_sigma();
        sa = wrap01(sa);
        sb = wrap01(sb);
        if (sa == sb) return 0.0;
        if (circle_) {
            double ds = sb - sa;
            if (ds < 0) ds += 1.0;
            const double th_a = angle(sa), th_b = angle(sb);
            const double dth = orientation_ * 2 * std::numbers::pi * ds;
            const PhasePoint ua{std::cos(th_a), std::sin(th_a)}, ub{std::cos(th_b), std::sin(th_b)};
            return 0.5 * (circle_->R * circle_->R * dth + circle_->R * wedge(circle_->center, ub - ua));
        }
        const double L = sp_.period();
        double ua = sa * L, ub = sb * L;
        if (ub <= ua) ub += L;
        return spline_sigma(ua, ub);
    }

    // Parameter of the generating leaf at parameter s of this one (identity unless the leaf was evolved).
    double origin_param(double s) const {
        s = wrap01(s);
        const std::size_t n = params_.size();
        auto it = std::upper_bound(params_.begin(), params_.end(), s);
        const std::size_t i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - params_.begin()) - 1));
        const std::size_t j = (i + 1) % n;
        const double s0 = params_[i], s1 = j == 0 ? 1.0 : params_[j];
        double o0 = origin_params_[i], o1 = origin_params_[j];
        // unwrap in the direction of the sample ordering
        if (o1 < o0 - 0.5) o1 += 1.0;
        if (o1 > o0 + 0.5) o1 -= 1.0;
        const double w = (s - s0) / (s1 - s0);
        return wrap01(o0 + w * (o1 - o0));
    }

    Leaf with_orientation_reversed() const {
        if (circle_) {
            Leaf L = circle(circle_->center, circle_->R, static_cast<int>(samples_.size()), -orientation_,
                            circle_->phase0);
            L.quantum_number_ = quantum_number_;
            L.hbar_ = hbar_;
            L.omega_ = omega_;
            return L;
        }
        std::vector<PhasePoint> pts(samples_.rbegin(), samples_.rend());
        std::vector<PhasePoint> vel;
        if (has_velocity_samples_)
            for (auto it = params_.rbegin(); it != params_.rend(); ++it) vel.push_back(velocity(*it));
        std::vector<double> org(origin_params_.rbegin(), origin_params_.rend());
        Leaf L = from_samples(pts, omega_, vel, org);
        L.quantum_number_ = quantum_number_;
        L.hbar_ = hbar_;
        return L;
    }

private:
    double angle(double s) const { return circle_->phase0 + orientation_ * 2 * std::numbers::pi * s; }

    double full_sigma() const {
        if (circle_) return orientation_ * std::numbers::pi * circle_->R * circle_->R;
        return spline_sigma(sp_.knots()[0], sp_.knots()[0] + sp_.period());
    }

    // exact for cubic pieces: 3-point Gauss-Legendre on each knot interval
    double spline_sigma(double ua, double ub) const {
        static const double gx[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
        static const double gw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
        const auto& knots = sp_.knots();
        const auto& widths = sp_.widths();
        const std::size_t n = knots.size();
        double total = 0;
        double uu = ua;
        std::size_t i = sp_.segment_of(uu);
        double tau = uu - knots[i];
        double remaining = ub - ua;
        while (remaining > 0) {
            const double span = std::min(widths[i] - tau, remaining);
            if (span > 0) {
                double acc = 0;
                for (int g = 0; g < 3; ++g) {
                    const double tt = tau + 0.5 * span * (1 + gx[g]);
                    const auto vp = sp_.eval_segment(i, tt), vq = sq_.eval_segment(i, tt);
                    acc += gw[g] * (vp.y * vq.dy - vq.y * vp.dy);
                }
                total += 0.25 * span * acc;
            }
            remaining -= std::max(span, 0.0);
            i = (i + 1) % n;
            tau = 0;
        }
        return total;
    }

    void build_polyline() {
        auto P = std::make_shared<Polyline>();
        const int n = static_cast<int>(std::max<std::size_t>(512, std::min<std::size_t>(8 * samples_.size(), 60000)));
        P->pts.resize(n);
        double pmin = 1e300, pmax = -1e300, qmin = 1e300, qmax = -1e300, len = 0;
        for (int k = 0; k < n; ++k) {
            P->pts[k] = point(static_cast<double>(k) / n);
            pmin = std::min(pmin, P->pts[k].p);
            pmax = std::max(pmax, P->pts[k].p);
            qmin = std::min(qmin, P->pts[k].q);
            qmax = std::max(qmax, P->pts[k].q);
            if (k > 0) len += norm(P->pts[k] - P->pts[k - 1]);
        }
        len += norm(P->pts[0] - P->pts[n - 1]);
        P->spacing = len / n;
        const double ext = std::max(pmax - pmin, qmax - qmin);
        P->cell = std::max(4 * P->spacing, ext / 256);
        P->pmin = pmin - P->cell;
        P->qmin = qmin - P->cell;
        P->nx = static_cast<int>((pmax - P->pmin) / P->cell) + 2;
        P->ny = static_cast<int>((qmax - P->qmin) / P->cell) + 2;
        P->buckets.assign(static_cast<std::size_t>(P->nx) * P->ny, {});
        for (int k = 0; k < n; ++k) {
            const PhasePoint a = P->pts[k], b = P->pts[(k + 1) % n];
            const int i0 = static_cast<int>((std::min(a.p, b.p) - P->pmin) / P->cell);
            const int i1 = static_cast<int>((std::max(a.p, b.p) - P->pmin) / P->cell);
            const int j0 = static_cast<int>((std::min(a.q, b.q) - P->qmin) / P->cell);
            const int j1 = static_cast<int>((std::max(a.q, b.q) - P->qmin) / P->cell);
            for (int i = i0; i <= i1; ++i)
                for (int j = j0; j <= j1; ++j) P->buckets[static_cast<std::size_t>(i) * P->ny + j].push_back(k);
        }
        poly_ = P;
    }

    std::optional<Circle> circle_;
    PeriodicSpline sp_, sq_, svp_, svq_;
    bool has_velocity_samples_ = false;
    bool has_generator_ = false;
    PhasePoint generator_center_;
    int orientation_ = 1;
    double area_ = 0.0;
    double omega_ = 1.0;
    std::vector<PhasePoint> samples_;
    std::vector<double> params_;
    std::vector<double> origin_params_;
    std::optional<int> quantum_number_;
    std::optional<double> hbar_;
    std::shared_ptr<const Polyline> poly_;
};

inline Leaf make_circle_leaf(const PhasePoint& center, double R, int n_samples, int orientation = 1) {
    return Leaf::circle(center, R, n_samples, orientation);
}

// Circle of area 2 pi hbar (n + 1/2).
inline Leaf make_bohr_sommerfeld_leaf(const PhasePoint& center, int n, double hbar, int n_samples = 256) {
    if (n < 0 || !(hbar > 0)) throw DomainError("Bohr-Sommerfeld leaf: need n >= 0 and hbar > 0");
    Leaf L = Leaf::circle(center, std::sqrt((2.0 * n + 1.0) * hbar), n_samples);
    L.set_quantum_data(n, hbar);
    return L;
}

inline void write_leaf_csv(const Leaf& leaf, std::ostream& os) {
    os << "s,p,q\n";
    const auto& pts = leaf.samples();
    const auto& s = leaf.sample_params();
    for (std::size_t i = 0; i < pts.size(); ++i) os << fmt17(s[i]) << ',' << fmt17(pts[i].p) << ',' << fmt17(pts[i].q) << '\n';
}

inline Leaf read_leaf_csv(std::istream& is, double omega = 1.0) {
    const auto rows = read_numeric_csv(is, {"s", "p", "q"});
    std::vector<PhasePoint> pts;
    for (const auto& r : rows) pts.push_back({r[1], r[2]});
    return Leaf::from_samples(pts, omega);
}

}  // namespace chordflow

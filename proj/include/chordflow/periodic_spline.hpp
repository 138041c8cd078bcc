#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "errors.hpp"

namespace chordflow {

// Periodic cubic interpolating spline on increasing knots u_0 < ... < u_{N-1}, period L.
class PeriodicSpline {
public:
    PeriodicSpline() = default;
    PeriodicSpline(std::vector<double> u, std::vector<double> y, double period)
        : u_(std::move(u)), y_(std::move(y)), L_(period) {
        const std::size_t n = u_.size();
        if (n < 3 || y_.size() != n) throw DomainError("PeriodicSpline: need >= 3 knots");
        h_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            h_[i] = (i + 1 < n ? u_[i + 1] : u_[0] + L_) - u_[i];
            if (!(h_[i] > 0)) throw DomainError("PeriodicSpline: knots not strictly increasing");
        }
        solve_moments();
    }

    struct Value {
        double y, dy, d2y;
    };

    std::size_t segment_of(double& u) const {
        u = wrap(u);
        auto it = std::upper_bound(u_.begin(), u_.end(), u);
        return static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - u_.begin()) - 1));
    }

    Value eval(double u) const {
        const std::size_t i = segment_of(u);
        return eval_segment(i, u - u_[i]);
    }

    // tau measured from the left knot of segment i
    Value eval_segment(std::size_t i, double tau) const {
        const std::size_t j = (i + 1) % u_.size();
        const double h = h_[i];
        const double A = (h - tau) / h, B = tau / h;
        const double y = A * y_[i] + B * y_[j] + ((A * A * A - A) * m_[i] + (B * B * B - B) * m_[j]) * h * h / 6.0;
        const double dy = (y_[j] - y_[i]) / h - (3 * A * A - 1) * h * m_[i] / 6.0 + (3 * B * B - 1) * h * m_[j] / 6.0;
        const double d2y = A * m_[i] + B * m_[j];
        return {y, dy, d2y};
    }

    double wrap(double u) const {
        double v = std::fmod(u - u_[0], L_);
        if (v < 0) v += L_;
        if (v >= L_) v = 0;
        return u_[0] + v;
    }

    const std::vector<double>& knots() const { return u_; }
    const std::vector<double>& widths() const { return h_; }
    double period() const { return L_; }

private:
    // Cyclic tridiagonal solve for the second-derivative moments (Sherman-Morrison).
    void solve_moments() {
        const std::size_t n = u_.size();
        std::vector<double> a(n), b(n), c(n), r(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t im = (i + n - 1) % n, ip = (i + 1) % n;
            const double hm = h_[im], hp = h_[i];
            a[i] = hm;
            b[i] = 2 * (hm + hp);
            c[i] = hp;
            r[i] = 6 * ((y_[ip] - y_[i]) / hp - (y_[i] - y_[im]) / hm);
        }
        const double alpha = c[n - 1], beta = a[0];
        const double gamma = -b[0];
        std::vector<double> bb = b;
        bb[0] = b[0] - gamma;
        bb[n - 1] = b[n - 1] - alpha * beta / gamma;
        auto thomas = [&](const std::vector<double>& rhs) {
            std::vector<double> cp(n), dp(n), x(n);
            cp[0] = c[0] / bb[0];
            dp[0] = rhs[0] / bb[0];
            for (std::size_t i = 1; i < n; ++i) {
                const double den = bb[i] - a[i] * cp[i - 1];
                cp[i] = c[i] / den;
                dp[i] = (rhs[i] - a[i] * dp[i - 1]) / den;
            }
            x[n - 1] = dp[n - 1];
            for (std::size_t i = n - 1; i-- > 0;) x[i] = dp[i] - cp[i] * x[i + 1];
            return x;
        };
        std::vector<double> uvec(n, 0.0);
        uvec[0] = gamma;
        uvec[n - 1] = alpha;
        const std::vector<double> x = thomas(r), z = thomas(uvec);
        const double fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
        m_.resize(n);
        for (std::size_t i = 0; i < n; ++i) m_[i] = x[i] - fact * z[i];
    }

    std::vector<double> u_, y_, h_, m_;
    double L_ = 1.0;
};

}  // namespace chordflow

#pragma once

#include <array>
#include <cmath>

#include "errors.hpp"

namespace chordflow {

// A point x = (p, q) of the phase plane.
struct PhasePoint {
    double p = 0.0;
    double q = 0.0;

    constexpr PhasePoint() = default;
    constexpr PhasePoint(double p_, double q_) : p(p_), q(q_) {}

    constexpr PhasePoint& operator+=(const PhasePoint& o) { p += o.p; q += o.q; return *this; }
    constexpr PhasePoint& operator-=(const PhasePoint& o) { p -= o.p; q -= o.q; return *this; }
    constexpr PhasePoint& operator*=(double s) { p *= s; q *= s; return *this; }
    bool finite() const { return std::isfinite(p) && std::isfinite(q); }
};

constexpr PhasePoint operator+(PhasePoint a, const PhasePoint& b) { return a += b; }
constexpr PhasePoint operator-(PhasePoint a, const PhasePoint& b) { return a -= b; }
constexpr PhasePoint operator-(const PhasePoint& a) { return {-a.p, -a.q}; }
constexpr PhasePoint operator*(double s, PhasePoint a) { return a *= s; }
constexpr PhasePoint operator*(PhasePoint a, double s) { return a *= s; }
constexpr PhasePoint operator/(PhasePoint a, double s) { return {a.p / s, a.q / s}; }

constexpr double dot(const PhasePoint& a, const PhasePoint& b) { return a.p * b.p + a.q * b.q; }
inline double norm(const PhasePoint& a) { return std::hypot(a.p, a.q); }

// Symplectic product p_x q_y - q_x p_y.
constexpr double wedge(const PhasePoint& x, const PhasePoint& y) { return x.p * y.q - x.q * y.p; }

inline void require_finite(const PhasePoint& x, const char* what) {
    if (!x.finite()) throw DomainError(std::string(what) + ": non-finite phase point");
}

// Row-major 2x2 matrix acting on (p, q).
struct Mat2 {
    double a = 0, b = 0, c = 0, d = 0;

    static constexpr Mat2 identity() { return {1, 0, 0, 1}; }
    static constexpr Mat2 zero() { return {0, 0, 0, 0}; }

    constexpr double det() const { return a * d - b * c; }
    constexpr double trace() const { return a + d; }
    constexpr Mat2 transpose() const { return {a, c, b, d}; }
    Mat2 inverse() const {
        const double D = det();
        if (D == 0.0 || !std::isfinite(D)) throw DomainError("singular 2x2 matrix");
        return {d / D, -b / D, -c / D, a / D};
    }
    double max_abs() const { return std::fmax(std::fmax(std::fabs(a), std::fabs(b)), std::fmax(std::fabs(c), std::fabs(d))); }
};

constexpr Mat2 operator*(const Mat2& x, const Mat2& y) {
    return {x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d, x.c * y.a + x.d * y.c, x.c * y.b + x.d * y.d};
}
constexpr PhasePoint operator*(const Mat2& m, const PhasePoint& v) { return {m.a * v.p + m.b * v.q, m.c * v.p + m.d * v.q}; }
constexpr Mat2 operator+(const Mat2& x, const Mat2& y) { return {x.a + y.a, x.b + y.b, x.c + y.c, x.d + y.d}; }
constexpr Mat2 operator-(const Mat2& x, const Mat2& y) { return {x.a - y.a, x.b - y.b, x.c - y.c, x.d - y.d}; }
constexpr Mat2 operator*(double s, const Mat2& x) { return {s * x.a, s * x.b, s * x.c, s * x.d}; }

// J = [[0,-1],[1,0]]; wedge(x, y) = dot(J x, y).
struct SymplecticForm {
    static constexpr Mat2 J{0, -1, 1, 0};
    static constexpr const char* convention = "x=(p,q); wedge(x,y)=p_x q_y - q_x p_y; xdot = J grad H";
    static constexpr double wedge(const PhasePoint& x, const PhasePoint& y) { return chordflow::wedge(x, y); }
};

constexpr Mat2 J = SymplecticForm::J;

// max-norm residual of M^T J M - J
inline double symplectic_defect(const Mat2& M) {
    const Mat2 r = M.transpose() * J * M - J;
    return r.max_abs();
}

}  // namespace chordflow

#pragma once

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <istream>
#include <mutex>
#include <numbers>
#include <ostream>
#include <vector>

#include "hamiltonian.hpp"
#include "io.hpp"
#include "phase_space.hpp"

namespace chordflow {

using cplx = std::complex<double>;

struct GridWavefunction {
    double q_min = -1, q_max = 1;
    int n = 0;
    std::vector<cplx> values;
    double hbar = 1;

    double dq() const { return (q_max - q_min) / n; }
    double q(int j) const { return q_min + j * dq(); }
    double norm2() const {
        double s = 0;
        for (const auto& v : values) s += std::norm(v);
        return s * dq();
    }
    void normalize() {
        const double s = std::sqrt(norm2());
        if (!(s > 0)) throw DomainError("normalize: zero wavefunction");
        for (auto& v : values) v /= s;
    }
    template <class F>
    static GridWavefunction sample(double q_min, double q_max, int n, double hbar, F&& f) {
        if (n < 4 || !(q_max > q_min) || !(hbar > 0)) throw DomainError("GridWavefunction: bad grid");
        GridWavefunction g{q_min, q_max, n, std::vector<cplx>(static_cast<std::size_t>(n)), hbar};
        for (int j = 0; j < n; ++j) g.values[j] = f(g.q(j));
        return g;
    }
};

struct FockCoefficients {
    std::vector<cplx> coeffs;
    double hbar = 1;
    int n_max() const { return static_cast<int>(coeffs.size()) - 1; }
    double norm2() const {
        double s = 0;
        for (const auto& c : coeffs) s += std::norm(c);
        return s;
    }
};

// p along the first axis: values[j * p.size() + i] = W(p[i], q[j]).
struct WignerGrid {
    std::vector<double> p, q;
    std::vector<double> values;
    double hbar = 1;

    double at(std::size_t i, std::size_t j) const { return values[j * p.size() + i]; }
    double dp() const { return p[1] - p[0]; }
    double dq() const { return q[1] - q[0]; }
    double integral() const {
        double s = 0;
        for (double v : values) s += v;
        return s * dp() * dq();
    }
    std::vector<double> q_marginal() const {
        std::vector<double> m(q.size(), 0.0);
        for (std::size_t j = 0; j < q.size(); ++j)
            for (std::size_t i = 0; i < p.size(); ++i) m[j] += at(i, j) * dp();
        return m;
    }
    std::vector<double> p_marginal() const {
        std::vector<double> m(p.size(), 0.0);
        for (std::size_t j = 0; j < q.size(); ++j)
            for (std::size_t i = 0; i < p.size(); ++i) m[i] += at(i, j) * dq();
        return m;
    }
    // Catmull-Rom bicubic; zero outside the grid.
    double interpolate(double pp, double qq) const {
        const double fi = (pp - p[0]) / dp(), fj = (qq - q[0]) / dq();
        const int i = static_cast<int>(std::floor(fi)), j = static_cast<int>(std::floor(fj));
        const double u = fi - i, v = fj - j;
        auto w = [](double t, int k) {
            switch (k) {
                case 0: return 0.5 * (-t + 2 * t * t - t * t * t);
                case 1: return 0.5 * (2 - 5 * t * t + 3 * t * t * t);
                case 2: return 0.5 * (t + 4 * t * t - 3 * t * t * t);
                default: return 0.5 * (-t * t + t * t * t);
            }
        };
        double s = 0;
        const int np = static_cast<int>(p.size()), nq = static_cast<int>(q.size());
        for (int b = 0; b < 4; ++b)
            for (int a = 0; a < 4; ++a) {
                const int ii = i - 1 + a, jj = j - 1 + b;
                if (ii < 0 || jj < 0 || ii >= np || jj >= nq) continue;
                s += w(u, a) * w(v, b) * at(ii, jj);
            }
        return s;
    }
};

namespace detail {
inline std::mutex& fftw_plan_mutex() {
    static std::mutex m;
    return m;
}
// In-place unnormalised DFT of length n; sign = FFTW_FORWARD (e^{-i}) or FFTW_BACKWARD (e^{+i}).
inline void dft_inplace(std::vector<cplx>& a, int sign) {
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        plan = fftw_plan_dft_1d(static_cast<int>(a.size()), reinterpret_cast<fftw_complex*>(a.data()),
                                reinterpret_cast<fftw_complex*>(a.data()), sign, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    fftw_destroy_plan(plan);
}
}  // namespace detail

// Eigenfunctions of (p^2 + q^2)/2 at q, n = 0..n_max, by the three-term recurrence.
inline std::vector<double> hermite_functions(int n_max, double hbar, double q) {
    std::vector<double> phi(static_cast<std::size_t>(n_max) + 1, 0.0);
    const double xi = q / std::sqrt(hbar);
    phi[0] = std::pow(std::numbers::pi * hbar, -0.25) * std::exp(-0.5 * xi * xi);
    if (n_max >= 1) phi[1] = std::sqrt(2.0) * xi * phi[0];
    for (int k = 1; k < n_max; ++k)
        phi[k + 1] = std::sqrt(2.0 / (k + 1)) * xi * phi[k] - std::sqrt(static_cast<double>(k) / (k + 1)) * phi[k - 1];
    return phi;
}

inline FockCoefficients fock_project(const GridWavefunction& psi, int n_max, double tail_tol = 1e-10) {
    if (n_max < 0) throw DomainError("fock_project: n_max must be >= 0");
    FockCoefficients c{std::vector<cplx>(static_cast<std::size_t>(n_max) + 1, 0.0), psi.hbar};
    const double dq = psi.dq();
    for (int j = 0; j < psi.n; ++j) {
        const auto phi = hermite_functions(n_max, psi.hbar, psi.q(j));
        for (int k = 0; k <= n_max; ++k) c.coeffs[k] += phi[k] * psi.values[j] * dq;
    }
    if (std::norm(c.coeffs.back()) >= tail_tol)
        throw TruncationError("fock_project: |c_nmax|^2 = " + std::to_string(std::norm(c.coeffs.back())) +
                              " exceeds the truncation tolerance");
    return c;
}

inline cplx psi_at(const FockCoefficients& c, double q) {
    const auto phi = hermite_functions(c.n_max(), c.hbar, q);
    cplx s = 0;
    for (int k = 0; k <= c.n_max(); ++k) s += c.coeffs[k] * phi[k];
    return s;
}

inline GridWavefunction synthesize(const FockCoefficients& c, double q_min, double q_max, int n) {
    return GridWavefunction::sample(q_min, q_max, n, c.hbar, [&](double q) { return psi_at(c, q); });
}

// exp(-i E_n t / hbar) with E_n = hbar^2 (n + 1/2)^2
inline FockCoefficients quartic_exact_evolve(const FockCoefficients& c, double t) {
    FockCoefficients o = c;
    for (int k = 0; k <= c.n_max(); ++k) o.coeffs[k] *= std::polar(1.0, -c.hbar * (k + 0.5) * (k + 0.5) * t);
    return o;
}

// exp(-i (n + 1/2) t)
inline FockCoefficients harmonic_exact_evolve(const FockCoefficients& c, double t) {
    FockCoefficients o = c;
    for (int k = 0; k <= c.n_max(); ++k) o.coeffs[k] *= std::polar(1.0, -(k + 0.5) * t);
    return o;
}

inline FockCoefficients exact_evolve(const std::string& model, const FockCoefficients& c, double t) {
    if (model == "quartic") return quartic_exact_evolve(c, t);
    if (model == "harmonic") return harmonic_exact_evolve(c, t);
    throw DomainError("exact_evolve: model '" + model + "' is not diagonal in the oscillator basis");
}

// Free evolution under p^2/2 on the periodic grid (spectral).
inline GridWavefunction free_exact_evolve(const GridWavefunction& psi, double t) {
    std::vector<cplx> a = psi.values;
    detail::dft_inplace(a, FFTW_FORWARD);
    const int n = psi.n;
    const double dk = 2 * std::numbers::pi / (n * psi.dq());
    for (int k = 0; k < n; ++k) {
        const int kk = k <= n / 2 ? k : k - n;
        const double p = psi.hbar * kk * dk;
        a[k] *= std::polar(1.0, -p * p * t / (2 * psi.hbar)) / static_cast<double>(n);
    }
    detail::dft_inplace(a, FFTW_BACKWARD);
    GridWavefunction o = psi;
    o.values = std::move(a);
    return o;
}

// W(p, q_j) = (pi hbar)^-1 sum_m conj(psi(q_j + m dq)) psi(q_j - m dq) e^{2 i p m dq / hbar} dq on the
// momentum axis p_i = (i - np/2) pi hbar / (np dq), for which the q-marginal is exact.
inline WignerGrid wigner_transform(const GridWavefunction& psi, int np = 0) {
    if (np <= 0) np = psi.n;
    const double dq = psi.dq();
    const double dp = std::numbers::pi * psi.hbar / (np * dq);
    WignerGrid W;
    W.hbar = psi.hbar;
    for (int i = 0; i < np; ++i) W.p.push_back((i - np / 2) * dp);
    for (int j = 0; j < psi.n; ++j) W.q.push_back(psi.q(j));
    W.values.assign(static_cast<std::size_t>(np) * psi.n, 0.0);
    std::vector<cplx> g(static_cast<std::size_t>(np));
    for (int j = 0; j < psi.n; ++j) {
        std::fill(g.begin(), g.end(), cplx(0, 0));
        for (int m = -np / 2; m < np - np / 2; ++m) {
            const int a = j + m, b = j - m;
            if (a < 0 || b < 0 || a >= psi.n || b >= psi.n) continue;
            g[((m % np) + np) % np] = std::conj(psi.values[a]) * psi.values[b];
        }
        detail::dft_inplace(g, FFTW_BACKWARD);
        for (int i = 0; i < np; ++i) {
            const int k = ((i - np / 2) % np + np) % np;
            W.values[static_cast<std::size_t>(j) * np + i] = g[k].real() * dq / (std::numbers::pi * psi.hbar);
        }
    }
    return W;
}

// Worst marginal mismatch; large values signal aliasing.
inline double wigner_marginal_defect(const WignerGrid& W, const GridWavefunction& psi) {
    const auto m = W.q_marginal();
    double worst = 0;
    for (int j = 0; j < psi.n; ++j) worst = std::max(worst, std::fabs(m[j] - std::norm(psi.values[j])));
    return worst;
}

struct WignerAtOptions {
    double dy = 0.0;     // quadrature step; default from hbar and n_max
    double y_max = 0.0;  // half-width; default from the classical turning point
};

// Wigner function of a Fock-expanded state at an arbitrary point, by direct quadrature over y.
inline double wigner_at(const FockCoefficients& c, const PhasePoint& x, WignerAtOptions o = {}) {
    const double hb = c.hbar;
    const double turn = std::sqrt((2.0 * c.n_max() + 1.0) * hb);
    if (o.y_max <= 0) o.y_max = turn + 6 * std::sqrt(hb) + std::fabs(x.q);
    if (o.dy <= 0) o.dy = std::numbers::pi * hb / (2.0 * (turn + std::fabs(x.p))) * 0.5;
    const int m = static_cast<int>(std::ceil(o.y_max / o.dy));
    double s = 0;
    for (int k = -m; k <= m; ++k) {
        const double y = k * o.dy;
        s += (std::conj(psi_at(c, x.q + y)) * psi_at(c, x.q - y) * std::polar(1.0, 2 * x.p * y / hb)).real();
    }
    return s * o.dy / (std::numbers::pi * hb);
}

// psi(q) = exp(i p0 q / hbar) phi_k(q - q0): the k-th eigenstate displaced to (p0, q0).
inline GridWavefunction displaced_fock_state(int k, const PhasePoint& center, double hbar, double q_min, double q_max, int n) {
    return GridWavefunction::sample(q_min, q_max, n, hbar, [&](double q) {
        return std::polar(hermite_functions(k, hbar, q - center.q)[k], center.p * q / hbar);
    });
}

inline GridWavefunction read_wavefunction_csv(std::istream& is, double hbar) {
    const auto rows = read_numeric_csv(is, {"q", "re", "im"});
    if (rows.size() < 4) throw DomainError("wavefunction csv: need at least 4 rows");
    const double dq = rows[1][0] - rows[0][0];
    for (std::size_t j = 1; j < rows.size(); ++j)
        if (std::fabs(rows[j][0] - rows[j - 1][0] - dq) > 1e-9 * std::max(1.0, std::fabs(dq)))
            throw DomainError("wavefunction csv: q must be uniformly spaced");
    GridWavefunction g;
    g.n = static_cast<int>(rows.size());
    g.q_min = rows[0][0];
    g.q_max = g.q_min + g.n * dq;
    g.hbar = hbar;
    for (const auto& r : rows) g.values.emplace_back(r[1], r[2]);
    return g;
}

inline void write_wigner_csv(const WignerGrid& W, std::ostream& os) {
    CsvWriter w(os, {"p", "q", "W"});
    for (std::size_t j = 0; j < W.q.size(); ++j)
        for (std::size_t i = 0; i < W.p.size(); ++i) w.row(W.p[i], W.q[j], W.at(i, j));
}

// ---------------------------------------------------------------------------------------------
// Moyal product by double quadrature on the lattice x = h (i - N/2, j - N/2), h^2 = pi hbar / N.
// On this lattice the kernel's oscillations are exactly periodic, so 1 * B = B holds to rounding.

struct MoyalGrid {
    int N = 32;
    double hbar = 1;
    double h() const { return std::sqrt(std::numbers::pi * hbar / N); }
    PhasePoint point(int i, int j) const { return {h() * (i - N / 2), h() * (j - N / 2)}; }
    template <class F>
    std::vector<cplx> sample(F&& f) const {
        std::vector<cplx> v(static_cast<std::size_t>(N) * N);
        for (int j = 0; j < N; ++j)
            for (int i = 0; i < N; ++i) v[static_cast<std::size_t>(j) * N + i] = f(point(i, j));
        return v;
    }
};

// [A B](x) = (pi hbar)^-2 sum A(x') B(x'') exp(-i D / hbar) h^4, D = 2 (x^x' + x'^x'' + x''^x).
inline std::vector<cplx> moyal_product_numeric(const std::vector<cplx>& A, const std::vector<cplx>& B, const MoyalGrid& g,
                                               int max_n = 64) {
    const int N = g.N;
    if (N > max_n) throw CostGuardError("moyal_product_numeric: N = " + std::to_string(N) + " exceeds the cap " + std::to_string(max_n));
    if (A.size() != static_cast<std::size_t>(N) * N || B.size() != A.size()) throw DomainError("moyal_product_numeric: size mismatch");
    const double h = g.h(), c = 2.0 * h * h / g.hbar;  // = 2 pi / N
    auto idx = [N](int i, int j) { return static_cast<std::size_t>(j) * N + i; };
    // Ahat(k, l) = sum_{x'} A(x') exp(-i c (x'/h) ^ (k, l))
    std::vector<cplx> Ahat(static_cast<std::size_t>(N) * N, 0.0);
    for (int l = 0; l < N; ++l)
        for (int k = 0; k < N; ++k) {
            cplx s = 0;
            for (int j = 0; j < N; ++j)
                for (int i = 0; i < N; ++i) {
                    const double w = static_cast<double>(i - N / 2) * l - static_cast<double>(j - N / 2) * k;
                    s += A[idx(i, j)] * std::polar(1.0, -c * w);
                }
            Ahat[idx(k, l)] = s;
        }
    const double norm = std::pow(h, 4) / std::pow(std::numbers::pi * g.hbar, 2);
    std::vector<cplx> out(static_cast<std::size_t>(N) * N, 0.0);
    for (int j = 0; j < N; ++j)
        for (int i = 0; i < N; ++i) {
            cplx s = 0;
            for (int jj = 0; jj < N; ++jj)
                for (int ii = 0; ii < N; ++ii) {
                    const int k = ((ii - i) % N + N) % N, l = ((jj - j) % N + N) % N;
                    // x'' ^ x in lattice units
                    const double w = static_cast<double>(ii - N / 2) * (j - N / 2) - static_cast<double>(jj - N / 2) * (i - N / 2);
                    s += B[idx(ii, jj)] * Ahat[idx(k, l)] * std::polar(1.0, -c * w);
                }
            out[idx(i, j)] = norm * s;
        }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Poisson-bracket check: exact d/dt W from oscillator-basis evolution of an ensemble of pure states,
// against {H, W} by finite differences.

struct EnsembleMember {
    double weight = 1.0;
    FockCoefficients state;
};

// Displaced thermal state with Wigner variance s2 per coordinate: geometric weights over displaced
// eigenstates, mean occupation s2/hbar - 1/2, truncated where the remaining weight drops below tail.
inline std::vector<EnsembleMember> displaced_thermal_ensemble(const PhasePoint& center, double s2, double hbar, double q_min,
                                                              double q_max, int n_grid, int n_max, double tail = 1e-12) {
    const double nbar = s2 / hbar - 0.5;
    if (!(nbar > 0)) throw DomainError("thermal ensemble: variance must exceed hbar/2");
    const double x = nbar / (nbar + 1);
    std::vector<EnsembleMember> out;
    double remaining = 1.0;
    for (int k = 0; remaining > tail; ++k) {
        const double w = (1 - x) * std::pow(x, k);
        out.push_back({w, fock_project(displaced_fock_state(k, center, hbar, q_min, q_max, n_grid), n_max)});
        remaining -= w;
    }
    return out;
}

struct PoissonCheckOptions {
    double q_min = -4, q_max = 4;
    int n_grid = 2048;              // q grid for the Wigner quadrature
    PhasePoint box_center{0, 0};
    double box_half = 1.0;
    int box_n = 10;                 // check points per side
    int stencil = 1;                // finite-difference step in q grid units
};

struct PoissonCheckResult {
    double discrepancy = 0;  // relative L2 of dW/dt - {H, W}
    double abs_l2 = 0;
    double dwdt_l2 = 0;
};

inline PoissonCheckResult poisson_evolution_check(const HamiltonianModel& model, const std::vector<EnsembleMember>& ensemble,
                                                  double dt, const PoissonCheckOptions& o = {}) {
    if (!(dt > 0)) throw DomainError("poisson_evolution_check: dt must be positive");
    const int n = o.n_grid;
    const double dq = (o.q_max - o.q_min) / n;
    const double delta = o.stencil * dq;
    struct Pt {
        double p;
        int j;
    };
    std::vector<Pt> pts;
    for (int a = 0; a < o.box_n; ++a)
        for (int b = 0; b < o.box_n; ++b) {
            const double fp = o.box_n > 1 ? -1 + 2.0 * a / (o.box_n - 1) : 0, fq = o.box_n > 1 ? -1 + 2.0 * b / (o.box_n - 1) : 0;
            const double q = o.box_center.q + o.box_half * fq;
            pts.push_back({o.box_center.p + o.box_half * fp, static_cast<int>(std::lround((q - o.q_min) / dq))});
        }
    const double hb = ensemble.front().state.hbar;
    auto w_row = [&](const std::vector<cplx>& psi, double p, int j) {
        double s = 0;
        for (int m = -n; m <= n; ++m) {
            const int a = j + m, b = j - m;
            if (a < 0 || b < 0 || a >= n || b >= n) continue;
            s += (std::conj(psi[a]) * psi[b] * std::polar(1.0, 2 * p * m * dq / hb)).real();
        }
        return s * dq / (std::numbers::pi * hb);
    };
    const std::size_t K = pts.size();
    std::vector<double> dwdt(K, 0.0), wp(K, 0.0), wq(K, 0.0);
    for (const auto& mem : ensemble) {
        const auto g0 = synthesize(mem.state, o.q_min, o.q_max, n).values;
        const auto gp = synthesize(exact_evolve(model.name, mem.state, dt), o.q_min, o.q_max, n).values;
        const auto gm = synthesize(exact_evolve(model.name, mem.state, -dt), o.q_min, o.q_max, n).values;
        for (std::size_t k = 0; k < K; ++k) {
            const auto [p, j] = pts[k];
            dwdt[k] += mem.weight * (w_row(gp, p, j) - w_row(gm, p, j)) / (2 * dt);
            const int s = o.stencil;
            wp[k] += mem.weight * (-w_row(g0, p + 2 * delta, j) + 8 * w_row(g0, p + delta, j) - 8 * w_row(g0, p - delta, j) +
                                   w_row(g0, p - 2 * delta, j)) / (12 * delta);
            wq[k] += mem.weight * (-w_row(g0, p, j + 2 * s) + 8 * w_row(g0, p, j + s) - 8 * w_row(g0, p, j - s) +
                                   w_row(g0, p, j - 2 * s)) / (12 * delta);
        }
    }
    PoissonCheckResult r;
    double num = 0, den = 0;
    for (std::size_t k = 0; k < K; ++k) {
        const PhasePoint x{pts[k].p, o.q_min + pts[k].j * dq};
        const PhasePoint g = model.grad(x);
        const double pb = g.q * wp[k] - g.p * wq[k];  // {H, W} = H_q W_p - H_p W_q
        num += (dwdt[k] - pb) * (dwdt[k] - pb);
        den += dwdt[k] * dwdt[k];
    }
    r.abs_l2 = std::sqrt(num / K);
    r.dwdt_l2 = std::sqrt(den / K);
    r.discrepancy = den > 0 ? std::sqrt(num / den) : std::sqrt(num);
    return r;
}

}  // namespace chordflow

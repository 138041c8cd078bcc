#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "chordflow/quantum_oracle.hpp"

using namespace chordflow;
using Catch::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

GridWavefunction coherent(const PhasePoint& c, double hbar, double qa, double qb, int n) {
    return displaced_fock_state(0, c, hbar, qa, qb, n);
}

double poisson_weight(double lambda, int k) { return std::exp(-lambda + k * std::log(lambda) - std::lgamma(k + 1.0)); }

}  // namespace

TEST_CASE("hermite functions are orthonormal on a fine grid", "[oracle]") {
    const double hb = 0.05;
    const int nmax = 40;
    std::vector<std::vector<double>> rows;
    const int n = 4000;
    const double qa = -3, qb = 3, dq = (qb - qa) / n;
    std::vector<double> gram((nmax + 1) * (nmax + 1), 0.0);
    for (int j = 0; j < n; ++j) {
        const auto phi = hermite_functions(nmax, hb, qa + j * dq);
        for (int a = 0; a <= nmax; ++a)
            for (int b = 0; b <= nmax; ++b) gram[a * (nmax + 1) + b] += phi[a] * phi[b] * dq;
    }
    for (int a = 0; a <= nmax; ++a)
        for (int b = 0; b <= nmax; ++b) CHECK(gram[a * (nmax + 1) + b] == Approx(a == b ? 1.0 : 0.0).margin(1e-10));
}

TEST_CASE("wigner transform of low eigenstates", "[oracle]") {
    const double hb = 1.0;
    for (int k : {0, 1}) {
        auto psi = displaced_fock_state(k, {0, 0}, hb, -10, 10, 256);
        const auto W = wigner_transform(psi, 256);
        const std::size_t i0 = 128, j0 = 128;
        REQUIRE(W.p[i0] == Approx(0.0).margin(1e-14));
        REQUIRE(W.q[j0] == Approx(0.0).margin(1e-14));
        CHECK(W.at(i0, j0) == Approx((k ? -1.0 : 1.0) / kPi).margin(1e-10));
        CHECK(W.integral() == Approx(1.0).margin(1e-6));
        CHECK(wigner_marginal_defect(W, psi) < 1e-12);
    }
}

TEST_CASE("momentum marginal of a displaced ground state", "[oracle]") {
    const double hb = 0.5;
    const PhasePoint c{0.7, -0.4};
    auto psi = coherent(c, hb, -8, 8, 256);
    const auto W = wigner_transform(psi, 512);
    const auto m = W.p_marginal();
    double worst = 0;
    for (std::size_t i = 0; i < W.p.size(); ++i) {
        const double exact = std::exp(-(W.p[i] - c.p) * (W.p[i] - c.p) / hb) / std::sqrt(kPi * hb);
        worst = std::max(worst, std::fabs(m[i] - exact));
    }
    CHECK(worst < 1e-6);
    CHECK(W.integral() == Approx(1.0).margin(1e-6));
}

TEST_CASE("fock projection", "[oracle]") {
    const double hb = 0.1;
    SECTION("ground state") {
        auto c = fock_project(coherent({0, 0}, hb, -5, 5, 1024), 20);
        CHECK(std::abs(c.coeffs[0]) == Approx(1.0).margin(1e-10));
        for (int k = 1; k <= 20; ++k) CHECK(std::abs(c.coeffs[k]) < 1e-10);
    }
    SECTION("displaced ground state has Poisson weights") {
        const PhasePoint d{0.3, 0.5};
        const double lambda = dot(d, d) / (2 * hb);
        auto c = fock_project(coherent(d, hb, -5, 5, 1024), 60);
        for (int k = 0; k <= 20; ++k) CHECK(std::norm(c.coeffs[k]) == Approx(poisson_weight(lambda, k)).margin(1e-10));
        CHECK(c.norm2() == Approx(1.0).margin(1e-10));
        auto back = synthesize(c, -5, 5, 1024);
        auto orig = coherent(d, hb, -5, 5, 1024);
        double worst = 0;
        for (int j = 0; j < 1024; ++j) worst = std::max(worst, std::abs(back.values[j] - orig.values[j]));
        CHECK(worst < 1e-8);
    }
    SECTION("truncation is reported") {
        CHECK_THROWS_AS(fock_project(coherent({1.0, 1.0}, hb, -5, 5, 1024), 10), TruncationError);
    }
}

TEST_CASE("exact evolutions", "[oracle]") {
    const double hb = 0.1;
    auto c = fock_project(coherent({0.4, 0.6}, hb, -5, 5, 1024), 60);
    SECTION("unitarity") {
        CHECK(quartic_exact_evolve(c, 3.7).norm2() == Approx(c.norm2()).margin(1e-12));
        CHECK(harmonic_exact_evolve(c, 3.7).norm2() == Approx(c.norm2()).margin(1e-12));
    }
    SECTION("two-level relative phase under the quartic Hamiltonian") {
        FockCoefficients s{{1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)}, hb};
        const double t = 0.9;
        auto e = quartic_exact_evolve(s, t);
        const cplx rel = e.coeffs[1] / e.coeffs[0];
        CHECK(std::arg(rel) == Approx(std::remainder(-2 * hb * t, 2 * kPi)).margin(1e-12));
    }
    SECTION("harmonic evolution rotates the Wigner function rigidly") {
        const double h1 = 1.0, t = 0.7;
        auto c1 = fock_project(displaced_fock_state(1, {0.0, 1.5}, h1, -12, 12, 384), 60);
        const auto W0 = wigner_transform(synthesize(c1, -12, 12, 384), 1536);
        const auto Wt = wigner_transform(synthesize(harmonic_exact_evolve(c1, t), -12, 12, 384), 1536);
        double worst = 0;
        for (std::size_t j = 100; j < 284; j += 7)
            for (std::size_t i = 400; i < 1136; i += 13) {
                const PhasePoint x{Wt.p[i], Wt.q[j]};
                // counter-clockwise flow: pull back by the inverse rotation
                const PhasePoint back{std::cos(t) * x.p + std::sin(t) * x.q, -std::sin(t) * x.p + std::cos(t) * x.q};
                worst = std::max(worst, std::fabs(Wt.at(i, j) - W0.interpolate(back.p, back.q)));
            }
        CHECK(worst < 1e-4);
    }
    SECTION("harmonic evolution moves the centroid counter-clockwise") {
        auto cg = fock_project(coherent({1.0, 0.0}, hb, -5, 5, 1024), 80);
        auto g = synthesize(harmonic_exact_evolve(cg, kPi / 2), -5, 5, 1024);
        double mq = 0;
        for (int j = 0; j < g.n; ++j) mq += g.q(j) * std::norm(g.values[j]) * g.dq();
        CHECK(mq == Approx(1.0).margin(1e-8));
    }
    SECTION("free evolution spreads a Gaussian") {
        const double t = 2.0;
        auto g = coherent({0, 0}, hb, -10, 10, 1024);
        auto e = free_exact_evolve(g, t);
        double var = 0;
        for (int j = 0; j < e.n; ++j) var += e.q(j) * e.q(j) * std::norm(e.values[j]) * e.dq();
        CHECK(var == Approx(0.5 * hb * (1 + t * t)).epsilon(1e-10));
    }
    SECTION("non-diagonal model rejected") { CHECK_THROWS_AS(exact_evolve("shear", c, 1.0), DomainError); }
}

TEST_CASE("wigner_at agrees with the grid transform", "[oracle]") {
    const double hb = 0.1;
    auto c = fock_project(displaced_fock_state(3, {0.2, -0.3}, hb, -6, 6, 1024), 60);
    const auto W = wigner_transform(synthesize(c, -6, 6, 1024), 1024);
    for (std::size_t j : {400, 470, 512, 600})
        for (std::size_t i : {380, 450, 512, 560}) CHECK(wigner_at(c, {W.p[i], W.q[j]}) == Approx(W.at(i, j)).margin(1e-9));
}

TEST_CASE("moyal product on the lattice", "[oracle]") {
    SECTION("unit is exact") {
        MoyalGrid g{32, 1.0};
        auto one = g.sample([](const PhasePoint&) { return cplx(1, 0); });
        auto B = g.sample([](const PhasePoint& x) { return cplx(std::exp(-0.5 * dot(x, x)) * (1 + x.q), x.p * 0.1); });
        auto r = moyal_product_numeric(one, B, g);
        for (std::size_t k = 0; k < r.size(); ++k) CHECK(std::abs(r[k] - B[k]) < 1e-10);
    }
    SECTION("gaussian closed form") {
        const double hb = 1.0, a = 0.8;
        MoyalGrid g{48, hb};
        auto G = g.sample([&](const PhasePoint& x) { return cplx(std::exp(-a * dot(x, x)), 0); });
        auto r = moyal_product_numeric(G, G, g);
        const double s = 1 + a * a * hb * hb;
        double worst = 0;
        for (int j = 0; j < g.N; ++j)
            for (int i = 0; i < g.N; ++i) {
                const auto x = g.point(i, j);
                worst = std::max(worst, std::abs(r[j * g.N + i] - std::exp(-2 * a * dot(x, x) / s) / s));
            }
        CHECK(worst < 1e-8);
    }
    SECTION("windowed q * p approaches i hbar / 2 at the origin") {
        const double hb = 1.0, sg = 1.5;
        MoyalGrid g{64, hb};
        auto A = g.sample([&](const PhasePoint& x) { return x.q * std::exp(-dot(x, x) / (2 * sg * sg)); });
        auto B = g.sample([&](const PhasePoint& x) { return x.p * std::exp(-dot(x, x) / (2 * sg * sg)); });
        auto r = moyal_product_numeric(A, B, g);
        auto rr = moyal_product_numeric(B, A, g);
        const std::size_t o = static_cast<std::size_t>(g.N / 2) * g.N + g.N / 2;
        const double beta = 1 / (2 * sg * sg) + 2 * sg * sg / (hb * hb);
        const double expect = 2 * std::pow(sg, 4) / (hb * hb * hb * beta * beta);
        CHECK(r[o].real() == Approx(0.0).margin(1e-8));
        CHECK(r[o].imag() == Approx(expect).epsilon(1e-6));
        CHECK((r[o] - rr[o]).imag() == Approx(2 * expect).epsilon(1e-6));
    }
    SECTION("trace of a product equals the integral of the pointwise product") {
        MoyalGrid g{40, 0.5};
        auto A = g.sample([](const PhasePoint& x) { return cplx(std::exp(-dot(x, x)) * (1 + x.p), 0); });
        auto B = g.sample([](const PhasePoint& x) { return cplx(std::exp(-0.7 * dot(x - PhasePoint{0.3, 0}, x - PhasePoint{0.3, 0})), 0); });
        auto r = moyal_product_numeric(A, B, g);
        cplx lhs = 0, rhs = 0;
        for (std::size_t k = 0; k < r.size(); ++k) {
            lhs += r[k];
            rhs += A[k] * B[k];
        }
        CHECK(std::abs(lhs - rhs) < 1e-9 * std::abs(rhs));
    }
    SECTION("cost guard") {
        MoyalGrid g{80, 1.0};
        std::vector<cplx> A(80 * 80, 1.0);
        CHECK_THROWS_AS(moyal_product_numeric(A, A, g), CostGuardError);
    }
}

TEST_CASE("poisson check vanishes for the harmonic oscillator", "[oracle][slow]") {
    const double hb = 0.04;
    PoissonCheckOptions o;
    o.q_min = -3;
    o.q_max = 3;
    o.n_grid = 1536;
    o.box_center = {0.8, 0.0};
    o.box_half = 0.4;
    auto ens = displaced_thermal_ensemble({0.8, 0.0}, 0.1, hb, o.q_min, o.q_max, o.n_grid, 160, 1e-10);
    auto r = poisson_evolution_check(harmonic_model(), ens, 1e-4, o);
    CHECK(r.discrepancy < 1e-5);
}

TEST_CASE("poisson check discrepancy scales as hbar^2 for smooth states only", "[oracle][slow]") {
    double smooth[2], osc[2];
    const double hbs[2] = {0.04, 0.02};
    for (int k = 0; k < 2; ++k) {
        const double hb = hbs[k];
        PoissonCheckOptions o;
        o.q_min = -3;
        o.q_max = 3;
        o.n_grid = 1536;
        o.box_center = {0.8, 0.0};
        o.box_half = 0.4;
        const int nmax = static_cast<int>(6.0 / hb) + 60;
        auto ens = displaced_thermal_ensemble({0.8, 0.0}, 0.1, hb, o.q_min, o.q_max, o.n_grid, nmax, 1e-10);
        smooth[k] = poisson_evolution_check(quartic_model(), ens, 1e-4, o).discrepancy;
        const int n = k == 0 ? 10 : 20;
        std::vector<EnsembleMember> pure{{1.0, fock_project(displaced_fock_state(n, {0.8, 0.0}, hb, o.q_min, o.q_max, o.n_grid), nmax)}};
        o.box_half = 0.9 * std::sqrt((2 * n + 1) * hb);
        osc[k] = poisson_evolution_check(quartic_model(), pure, 1e-4, o).discrepancy;
    }
    INFO("smooth " << smooth[0] << " " << smooth[1] << " oscillatory " << osc[0] << " " << osc[1]);
    CHECK(smooth[0] / smooth[1] == Approx(4.0).margin(0.5));
    CHECK(osc[1] > 0.1);
    CHECK(osc[0] / osc[1] < 2.0);
}

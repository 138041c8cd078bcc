#pragma once

// Adaptive Dormand-Prince 8(5,3) Runge-Kutta for small autonomous systems.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "errors.hpp"

namespace chordflow::dop853 {

namespace coef {
constexpr double c2 = 0.526001519587677318785587544488e-01, c3 = 0.789002279381515978178381316732e-01,
                 c4 = 0.118350341907227396726757197510e+00, c5 = 0.281649658092772603273242802490e+00,
                 c6 = 0.333333333333333333333333333333e+00, c7 = 0.25e+00, c8 = 0.307692307692307692307692307692e+00,
                 c9 = 0.651282051282051282051282051282e+00, c10 = 0.6e+00, c11 = 0.857142857142857142857142857142e+00;
constexpr double a21 = 5.26001519587677318785587544488e-2, a31 = 1.97250569845378994544595329183e-2,
                 a32 = 5.91751709536136983633785987549e-2, a41 = 2.95875854768068491816892993775e-2,
                 a43 = 8.87627564304205475450678981324e-2, a51 = 2.41365134159266685502369798665e-1,
                 a53 = -8.84549479328286085344864962717e-1, a54 = 9.24834003261792003115737966543e-1,
                 a61 = 3.7037037037037037037037037037e-2, a64 = 1.70828608729473871279604482173e-1,
                 a65 = 1.25467687566822425016691814123e-1, a71 = 3.7109375e-2,
                 a74 = 1.70252211019544039314978060272e-1, a75 = 6.02165389804559606850219397283e-2,
                 a76 = -1.7578125e-2, a81 = 3.70920001185047927108779319836e-2,
                 a84 = 1.70383925712239993810214054705e-1, a85 = 1.07262030446373284651809199168e-1,
                 a86 = -1.53194377486244017527936158236e-2, a87 = 8.27378916381402288758473766002e-3,
                 a91 = 6.24110958716075717114429577812e-1, a94 = -3.36089262944694129406857109825e0,
                 a95 = -8.68219346841726006818189891453e-1, a96 = 2.75920996994467083049415600797e1,
                 a97 = 2.01540675504778934086186788979e1, a98 = -4.34898841810699588477366255144e1,
                 a101 = 4.77662536438264365890433908527e-1, a104 = -2.48811461997166764192642586468e0,
                 a105 = -5.90290826836842996371446475743e-1, a106 = 2.12300514481811942347288949897e1,
                 a107 = 1.52792336328824235832596922938e1, a108 = -3.32882109689848629194453265587e1,
                 a109 = -2.03312017085086261358222928593e-2, a111 = -9.3714243008598732571704021658e-1,
                 a114 = 5.18637242884406370830023853209e0, a115 = 1.09143734899672957818500254654e0,
                 a116 = -8.14978701074692612513997267357e0, a117 = -1.85200656599969598641566180701e1,
                 a118 = 2.27394870993505042818970056734e1, a119 = 2.49360555267965238987089396762e0,
                 a1110 = -3.0467644718982195003823669022e0, a121 = 2.27331014751653820792359768449e0,
                 a124 = -1.05344954667372501984066689879e1, a125 = -2.00087205822486249909675718444e0,
                 a126 = -1.79589318631187989172765950534e1, a127 = 2.79488845294199600508499808837e1,
                 a128 = -2.85899827713502369474065508674e0, a129 = -8.87285693353062954433549289258e0,
                 a1210 = 1.23605671757943030647266201528e1, a1211 = 6.43392746015763530355970484046e-1;
constexpr double b1 = 5.42937341165687622380535766363e-2, b6 = 4.45031289275240888144113950566e0,
                 b7 = 1.89151789931450038304281599044e0, b8 = -5.8012039600105847814672114227e0,
                 b9 = 3.1116436695781989440891606237e-1, b10 = -1.52160949662516078556178806805e-1,
                 b11 = 2.01365400804030348374776537501e-1, b12 = 4.47106157277725905176885569043e-2;
constexpr double bhh1 = 0.244094488188976377952755905512e+00, bhh2 = 0.733846688281611857341361741547e+00,
                 bhh3 = 0.220588235294117647058823529412e-01;
constexpr double er1 = 0.1312004499419488073250102996e-01, er6 = -0.1225156446376204440720569753e+01,
                 er7 = -0.4957589496572501915214079952e+00, er8 = 0.1664377182454986536961530415e+01,
                 er9 = -0.3503288487499736816886487290e+00, er10 = 0.3341791187130174790297318841e+00,
                 er11 = 0.8192320648511571246570742613e-01, er12 = -0.2235530786388629525884427845e-01;
}  // namespace coef

struct Options {
    double rtol = 1e-10;
    double atol = 1e-10;
    std::size_t max_steps = 2'000'000;
};

// Integrates y' = f(y) from t0 to t1 (either direction).  The integrator lands exactly on every time in
// `stops` lying strictly between t0 and t1, and on t1.  `observe(t, y)` fires after each accepted step.
template <std::size_t N, class F, class Obs>
std::array<double, N> integrate(F&& f, double t0, std::array<double, N> y, double t1, const Options& opt,
                                Obs&& observe, std::vector<double> stops = {}) {
    using V = std::array<double, N>;
    using namespace coef;
    if (t1 == t0) return y;
    const double dir = t1 > t0 ? 1.0 : -1.0;
    stops.push_back(t1);
    std::sort(stops.begin(), stops.end(), [dir](double a, double b) { return dir * a < dir * b; });
    std::size_t next_stop = 0;
    while (next_stop < stops.size() && dir * (stops[next_stop] - t0) <= 0) ++next_stop;

    auto axpy = [](V& out, const V& base, double h, std::initializer_list<std::pair<double, const V*>> terms) {
        for (std::size_t i = 0; i < N; ++i) {
            double s = 0;
            for (auto& [c, k] : terms) s += c * (*k)[i];
            out[i] = base[i] + h * s;
        }
    };
    auto scale_of = [&](const V& a, const V& b, std::size_t i) {
        return opt.atol + opt.rtol * std::max(std::fabs(a[i]), std::fabs(b[i]));
    };

    V k1 = f(y), k2{}, k3{}, k4{}, k5{}, k6{}, k7{}, k8{}, k9{}, k10{}, yy{};
    double t = t0;

    // initial step guess
    double h;
    {
        double dnf = 0, dny = 0;
        for (std::size_t i = 0; i < N; ++i) {
            const double sk = opt.atol + opt.rtol * std::fabs(y[i]);
            dnf += (k1[i] / sk) * (k1[i] / sk);
            dny += (y[i] / sk) * (y[i] / sk);
        }
        h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : std::sqrt(dny / dnf) * 0.01;
        h = std::min(h, std::fabs(t1 - t0));
        for (std::size_t i = 0; i < N; ++i) yy[i] = y[i] + dir * h * k1[i];
        k2 = f(yy);
        double der2 = 0;
        for (std::size_t i = 0; i < N; ++i) {
            const double sk = opt.atol + opt.rtol * std::fabs(y[i]);
            der2 += ((k2[i] - k1[i]) / sk) * ((k2[i] - k1[i]) / sk);
        }
        der2 = std::sqrt(der2) / h;
        const double der12 = std::max(std::fabs(der2), std::sqrt(dnf));
        const double h1 = der12 <= 1e-15 ? std::max(1e-6, std::fabs(h) * 1e-3) : std::pow(0.01 / der12, 1.0 / 8.0);
        h = std::min({100 * std::fabs(h), h1, std::fabs(t1 - t0)});
    }

    bool last_rejected = false;
    for (std::size_t step = 0;; ++step) {
        if (step >= opt.max_steps) throw IntegrationError("dop853: step budget exhausted", t);
        const double target = stops[next_stop];
        bool hits_stop = false;
        if (std::fabs(h) >= std::fabs(target - t) * (1 - 1e-13)) {
            h = std::fabs(target - t);
            hits_stop = true;
        }
        if (h < 1e-14 * std::max(1.0, std::fabs(t)) && !hits_stop)
            throw IntegrationError("dop853: step size underflow", t);
        const double hs = dir * h;

        axpy(yy, y, hs, {{a21, &k1}});
        k2 = f(yy);
        axpy(yy, y, hs, {{a31, &k1}, {a32, &k2}});
        k3 = f(yy);
        axpy(yy, y, hs, {{a41, &k1}, {a43, &k3}});
        k4 = f(yy);
        axpy(yy, y, hs, {{a51, &k1}, {a53, &k3}, {a54, &k4}});
        k5 = f(yy);
        axpy(yy, y, hs, {{a61, &k1}, {a64, &k4}, {a65, &k5}});
        k6 = f(yy);
        axpy(yy, y, hs, {{a71, &k1}, {a74, &k4}, {a75, &k5}, {a76, &k6}});
        k7 = f(yy);
        axpy(yy, y, hs, {{a81, &k1}, {a84, &k4}, {a85, &k5}, {a86, &k6}, {a87, &k7}});
        k8 = f(yy);
        axpy(yy, y, hs, {{a91, &k1}, {a94, &k4}, {a95, &k5}, {a96, &k6}, {a97, &k7}, {a98, &k8}});
        k9 = f(yy);
        axpy(yy, y, hs, {{a101, &k1}, {a104, &k4}, {a105, &k5}, {a106, &k6}, {a107, &k7}, {a108, &k8}, {a109, &k9}});
        k10 = f(yy);
        axpy(yy, y, hs,
             {{a111, &k1}, {a114, &k4}, {a115, &k5}, {a116, &k6}, {a117, &k7}, {a118, &k8}, {a119, &k9}, {a1110, &k10}});
        const V k11 = f(yy);
        axpy(yy, y, hs,
             {{a121, &k1}, {a124, &k4}, {a125, &k5}, {a126, &k6}, {a127, &k7}, {a128, &k8}, {a129, &k9}, {a1210, &k10},
              {a1211, &k11}});
        const V k12 = f(yy);

        V incr{}, ynew{};
        for (std::size_t i = 0; i < N; ++i) {
            incr[i] = b1 * k1[i] + b6 * k6[i] + b7 * k7[i] + b8 * k8[i] + b9 * k9[i] + b10 * k10[i] + b11 * k11[i] +
                      b12 * k12[i];
            ynew[i] = y[i] + hs * incr[i];
        }
        double err = 0, err2 = 0;
        for (std::size_t i = 0; i < N; ++i) {
            const double sk = scale_of(y, ynew, i);
            const double e3 = incr[i] - bhh1 * k1[i] - bhh2 * k9[i] - bhh3 * k12[i];
            const double e5 = er1 * k1[i] + er6 * k6[i] + er7 * k7[i] + er8 * k8[i] + er9 * k9[i] + er10 * k10[i] +
                              er11 * k11[i] + er12 * k12[i];
            err2 += (e3 / sk) * (e3 / sk);
            err += (e5 / sk) * (e5 / sk);
        }
        double deno = err + 0.01 * err2;
        if (deno <= 0) deno = 1;
        err = h * err * std::sqrt(1.0 / (static_cast<double>(N) * deno));
        if (!std::isfinite(err)) err = 1e10;

        const double fac11 = std::pow(err, 0.125);
        const double fac = std::clamp(fac11 / 0.9, 1.0 / 6.0, 1.0 / 0.333);
        double hnew = h / fac;

        if (err <= 1.0) {
            t = hits_stop ? target : t + hs;
            y = ynew;
            k1 = f(y);
            observe(t, y);
            if (hits_stop) {
                ++next_stop;
                if (next_stop >= stops.size()) return y;
            }
            if (last_rejected) hnew = std::min(hnew, h);
            last_rejected = false;
            h = hnew;
        } else {
            h = h / std::min(1.0 / 0.333, fac11 / 0.9);
            last_rejected = true;
        }
    }
}

}  // namespace chordflow::dop853

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "phase_space.hpp"

namespace chordflow {

// An autonomous one-degree-of-freedom Hamiltonian.  grad returns (dH/dp, dH/dq).
struct HamiltonianModel {
    std::string name;
    std::function<double(const PhasePoint&)> H;
    std::function<PhasePoint(const PhasePoint&)> grad;
    std::function<Mat2(const PhasePoint&)> hess;

    // Hamiltonian vector field J grad H = (-H_q, H_p).
    PhasePoint velocity(const PhasePoint& x) const {
        const PhasePoint g = grad(x);
        return {-g.q, g.p};
    }
};

inline HamiltonianModel harmonic_model() {
    return {"harmonic",
            [](const PhasePoint& x) { return 0.5 * (x.p * x.p + x.q * x.q); },
            [](const PhasePoint& x) { return x; },
            [](const PhasePoint&) { return Mat2::identity(); }};
}

// H = (p^2 + q^2)^2 / 4
inline HamiltonianModel quartic_model() {
    return {"quartic",
            [](const PhasePoint& x) {
                const double r2 = x.p * x.p + x.q * x.q;
                return 0.25 * r2 * r2;
            },
            [](const PhasePoint& x) {
                const double r2 = x.p * x.p + x.q * x.q;
                return PhasePoint{r2 * x.p, r2 * x.q};
            },
            [](const PhasePoint& x) {
                const double r2 = x.p * x.p + x.q * x.q;
                return Mat2{r2 + 2 * x.p * x.p, 2 * x.p * x.q, 2 * x.p * x.q, r2 + 2 * x.q * x.q};
            }};
}

inline HamiltonianModel shear_model() {
    return {"shear",
            [](const PhasePoint& x) { return 0.5 * x.p * x.p; },
            [](const PhasePoint& x) { return PhasePoint{x.p, 0.0}; },
            [](const PhasePoint&) { return Mat2{1, 0, 0, 0}; }};
}

inline std::vector<std::string> builtin_model_names() { return {"harmonic", "quartic", "shear"}; }

inline HamiltonianModel model_by_name(const std::string& name) {
    if (name == "harmonic") return harmonic_model();
    if (name == "quartic") return quartic_model();
    if (name == "shear") return shear_model();
    throw DomainError("unknown model '" + name + "'");
}

}  // namespace chordflow

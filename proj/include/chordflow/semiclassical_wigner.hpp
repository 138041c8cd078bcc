#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include "chords.hpp"

namespace chordflow {

struct WignerBranch {
    Chord chord;
    double action = 0.0;      // chord_area on the leaf (signed with the leaf orientation)
    int orientation = 1;
    double amplitude = 0.0;
    int maslov_index = 0;     // extra quarter-periods beyond the base pi/4
    CausticReport caustic;
    bool amplitude_valid = false;

    double maslov_offset() const { return std::numbers::pi / 4 + maslov_index * std::numbers::pi / 2; }
    double phase(double hbar) const { return orientation * action / hbar - maslov_offset(); }
    double value(double hbar) const { return amplitude * std::cos(phase(hbar)); }
};

struct WignerEvaluation {
    double value = 0.0;  // NaN when on a caustic
    bool has_value = true;
    bool on_caustic = false;
    std::vector<WignerBranch> branches;
    std::complex<double> w_plus{0, 0}, w_minus{0, 0};
    int chord_count() const { return static_cast<int>(branches.size()); }
};

struct EvaluateOptions {
    double tol = 1e-10;
    double caustic_threshold = kCausticThresholdLeaf;
    // per-branch Maslov integers, by branch order; default rule otherwise
    std::optional<std::vector<int>> maslov_override;
};

// Default rule: one extra quarter period when the oriented tip-velocity product is positive.
inline int default_maslov_index(int orientation, double indicator) { return orientation * indicator > 0 ? 1 : 0; }

inline double amplitude_from_indicator(double omega, double indicator, double hbar) {
    return (2.0 * omega / std::numbers::pi) / std::sqrt(2.0 * std::numbers::pi * hbar * std::fabs(indicator));
}

inline double branch_amplitude(const Leaf& leaf, const Chord& chord, double hbar,
                               double caustic_threshold = kCausticThresholdLeaf) {
    if (!(hbar > 0)) throw DomainError("branch_amplitude: hbar must be positive");
    const CausticReport r = caustic_indicator(leaf, chord, -1, caustic_threshold);
    if (r.is_on_caustic) throw CausticError("branch_amplitude: chord lies on the Wigner caustic");
    return amplitude_from_indicator(leaf.omega(), r.indicator, hbar);
}

inline WignerBranch make_branch(const Leaf& leaf, const Chord& c, double hbar, int chord_count,
                                double caustic_threshold = kCausticThresholdLeaf) {
    WignerBranch b;
    b.chord = c;
    b.action = chord_area(leaf, c);
    b.orientation = leaf.orientation();
    b.caustic = caustic_indicator(leaf, c, chord_count, caustic_threshold);
    b.maslov_index = default_maslov_index(b.orientation, b.caustic.indicator);
    if (!b.caustic.is_on_caustic) {
        b.amplitude = amplitude_from_indicator(leaf.omega(), b.caustic.indicator, hbar);
        b.amplitude_valid = true;
    }
    return b;
}

inline void sum_branches(WignerEvaluation& ev, double hbar) {
    ev.value = 0;
    ev.w_plus = ev.w_minus = {0, 0};
    ev.on_caustic = false;
    for (const auto& b : ev.branches) {
        if (!b.amplitude_valid) {
            ev.on_caustic = true;
            continue;
        }
        const double ph = b.phase(hbar);
        ev.w_plus += b.amplitude * std::polar(1.0, ph);
        ev.w_minus += b.amplitude * std::polar(1.0, -ph);
        ev.value += b.value(hbar);
    }
    ev.has_value = !ev.on_caustic;
    if (ev.on_caustic) ev.value = std::numeric_limits<double>::quiet_NaN();
}

inline WignerEvaluation evaluate(const Leaf& leaf, double hbar, const PhasePoint& x, const EvaluateOptions& opt = {}) {
    if (!(hbar > 0)) throw DomainError("evaluate: hbar must be positive");
    const auto chords = find_chords(leaf, x, opt.tol);
    WignerEvaluation ev;
    const int n = static_cast<int>(chords.size());
    for (int j = 0; j < n; ++j) {
        WignerBranch b = make_branch(leaf, chords[j], hbar, n, opt.caustic_threshold);
        if (opt.maslov_override && j < static_cast<int>(opt.maslov_override->size())) b.maslov_index = (*opt.maslov_override)[j];
        ev.branches.push_back(b);
    }
    sum_branches(ev, hbar);
    return ev;
}

// W+- = sum_j A_j exp(+-i(S_j/hbar - offset_j)); (W+ + W-)/2 is the real value.
inline std::pair<std::complex<double>, std::complex<double>> split_half_branches(const WignerEvaluation& ev, double hbar) {
    std::complex<double> wp{0, 0}, wm{0, 0};
    for (const auto& b : ev.branches) {
        if (!b.amplitude_valid) continue;
        wp += b.amplitude * std::polar(1.0, b.phase(hbar));
        wm += b.amplitude * std::polar(1.0, -b.phase(hbar));
    }
    return {wp, wm};
}

}  // namespace chordflow

#pragma once

namespace vikin::model {

/// Rounds a double to the nearest IEEE binary16 value (ties to even) and returns it widened.
/// Magnitudes at or beyond 65520 become infinity; subnormals are kept.
double round_to_half(double x);

/// FP16 datapath emulation. When disabled every helper is the identity.
struct HalfPrecisionPolicy {
    bool enabled = false;

    double round(double x) const { return enabled ? round_to_half(x) : x; }
    double mul(double a, double b) const { return round(a * b); }
    double add(double a, double b) const { return round(a + b); }
};

}  // namespace vikin::model

#pragma once

#include <cmath>

namespace warpcone {

/// Truncated Taylor jet carrying a value with its first two derivatives
/// along one variable. Arithmetic propagates derivatives exactly.
struct Jet2 {
    double v = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;

    static constexpr Jet2 constant(double c) { return {c, 0.0, 0.0}; }
    static constexpr Jet2 variable(double x) { return {x, 1.0, 0.0}; }
};

inline Jet2 operator+(Jet2 a, Jet2 b) { return {a.v + b.v, a.d1 + b.d1, a.d2 + b.d2}; }
inline Jet2 operator-(Jet2 a, Jet2 b) { return {a.v - b.v, a.d1 - b.d1, a.d2 - b.d2}; }
inline Jet2 operator-(Jet2 a) { return {-a.v, -a.d1, -a.d2}; }
inline Jet2 operator*(Jet2 a, Jet2 b) {
    return {a.v * b.v, a.d1 * b.v + a.v * b.d1, a.d2 * b.v + 2.0 * a.d1 * b.d1 + a.v * b.d2};
}

// Chain rule for a scalar function g with g(x), g'(x), g''(x) supplied.
inline Jet2 compose(Jet2 a, double g0, double g1, double g2) {
    return {g0, g1 * a.d1, g2 * a.d1 * a.d1 + g1 * a.d2};
}

inline Jet2 reciprocal(Jet2 a) {
    const double inv = 1.0 / a.v;
    return compose(a, inv, -inv * inv, 2.0 * inv * inv * inv);
}
inline Jet2 operator/(Jet2 a, Jet2 b) { return a * reciprocal(b); }

inline Jet2 exp(Jet2 a) {
    const double e = std::exp(a.v);
    return compose(a, e, e, e);
}
inline Jet2 log(Jet2 a) { return compose(a, std::log(a.v), 1.0 / a.v, -1.0 / (a.v * a.v)); }
inline Jet2 sqrt(Jet2 a) {
    const double s = std::sqrt(a.v);
    return compose(a, s, 0.5 / s, -0.25 / (s * a.v));
}
inline Jet2 sin(Jet2 a) { return compose(a, std::sin(a.v), std::cos(a.v), -std::sin(a.v)); }
inline Jet2 cos(Jet2 a) { return compose(a, std::cos(a.v), -std::sin(a.v), -std::cos(a.v)); }
inline Jet2 tan(Jet2 a) {
    const double t = std::tan(a.v);
    const double s = 1.0 + t * t;
    return compose(a, t, s, 2.0 * t * s);
}
inline Jet2 sinh(Jet2 a) { return compose(a, std::sinh(a.v), std::cosh(a.v), std::sinh(a.v)); }
inline Jet2 cosh(Jet2 a) { return compose(a, std::cosh(a.v), std::sinh(a.v), std::cosh(a.v)); }
inline Jet2 tanh(Jet2 a) {
    const double t = std::tanh(a.v);
    const double s = 1.0 - t * t;
    return compose(a, t, s, -2.0 * t * s);
}
inline Jet2 atan(Jet2 a) {
    const double s = 1.0 / (1.0 + a.v * a.v);
    return compose(a, std::atan(a.v), s, -2.0 * a.v * s * s);
}

/// a^b. Integer-valued constant exponents are handled without logarithms so
/// negative bases work.
inline Jet2 pow(Jet2 a, Jet2 b) {
    if (b.d1 == 0.0 && b.d2 == 0.0) {
        const double p = b.v;
        if (p == std::floor(p) && std::abs(p) <= 16.0) {
            Jet2 out = Jet2::constant(1.0);
            for (int i = 0; i < static_cast<int>(std::abs(p)); ++i) out = out * a;
            return p < 0.0 ? reciprocal(out) : out;
        }
        return compose(a, std::pow(a.v, p), p * std::pow(a.v, p - 1.0),
                       p * (p - 1.0) * std::pow(a.v, p - 2.0));
    }
    return exp(b * log(a));
}

}  // namespace warpcone

#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "warpcone/jet.hpp"

namespace warpcone {

/// A scalar expression in the single variable `r`, parsed once and evaluated
/// with exact first and second derivatives.
///
/// Grammar: numbers, `r`, `pi`, `e`, the operators `+ - * / ^`, parentheses
/// and the functions sin, cos, tan, atan, exp, log, sqrt, sinh, cosh, tanh,
/// plus the two-argument pow(a, b).
class Expression {
public:
    /// Throws InputError on malformed text.
    static Expression parse(std::string_view text);

    Jet2 evaluate(Jet2 r) const;
    double operator()(double r) const { return evaluate(Jet2::constant(r)).v; }

    const std::string& text() const { return text_; }

    struct Node;

private:
    std::string text_;
    std::shared_ptr<const Node> root_;
};

}  // namespace warpcone

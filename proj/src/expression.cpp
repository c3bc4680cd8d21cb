#include "warpcone/expression.hpp"

#include <cctype>
#include <charconv>
#include <numbers>
#include <vector>

#include "warpcone/error.hpp"

namespace warpcone {

struct Expression::Node {
    enum class Op { Number, Var, Add, Sub, Mul, Div, Pow, Neg, Call };
    Op op = Op::Number;
    double number = 0.0;
    std::string func;
    std::vector<std::shared_ptr<const Node>> args;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Op = Expression::Node::Op;

NodePtr make(Op op, std::vector<NodePtr> args = {}, double number = 0.0, std::string func = {}) {
    auto n = std::make_shared<Expression::Node>();
    n->op = op;
    n->number = number;
    n->func = std::move(func);
    n->args = std::move(args);
    return n;
}

class Parser {
public:
    explicit Parser(std::string_view s) : s_(s) {}

    NodePtr parse_all() {
        NodePtr n = expr();
        skip();
        if (pos_ != s_.size()) fail("unexpected trailing input");
        return n;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw InputError("expression '" + std::string(s_) + "': " + what + " at offset " +
                         std::to_string(pos_));
    }

    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) fail(std::string("expected '") + c + "'");
    }

    NodePtr expr() {
        NodePtr lhs = term();
        for (;;) {
            if (accept('+')) lhs = make(Op::Add, {lhs, term()});
            else if (accept('-')) lhs = make(Op::Sub, {lhs, term()});
            else return lhs;
        }
    }

    NodePtr term() {
        NodePtr lhs = unary();
        for (;;) {
            if (accept('*')) lhs = make(Op::Mul, {lhs, unary()});
            else if (accept('/')) lhs = make(Op::Div, {lhs, unary()});
            else return lhs;
        }
    }

    NodePtr unary() {
        if (accept('-')) return make(Op::Neg, {unary()});
        if (accept('+')) return unary();
        return power();
    }

    NodePtr power() {
        NodePtr base = primary();
        if (accept('^')) return make(Op::Pow, {base, unary()});
        return base;
    }

    NodePtr primary() {
        skip();
        if (pos_ >= s_.size()) fail("unexpected end of input");
        const char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            double value = 0.0;
            auto [ptr, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), value);
            if (ec != std::errc()) fail("bad number");
            pos_ = static_cast<std::size_t>(ptr - s_.data());
            return make(Op::Number, {}, value);
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            const std::size_t start = pos_;
            while (pos_ < s_.size() &&
                   (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_'))
                ++pos_;
            const std::string name(s_.substr(start, pos_ - start));
            if (name == "r") return make(Op::Var);
            if (name == "pi") return make(Op::Number, {}, std::numbers::pi);
            if (name == "e") return make(Op::Number, {}, std::numbers::e);
            static const char* const unary_funcs[] = {"sin",  "cos",  "tan",  "atan", "exp",
                                                      "log",  "sqrt", "sinh", "cosh", "tanh"};
            for (const char* f : unary_funcs) {
                if (name == f) {
                    expect('(');
                    NodePtr arg = expr();
                    expect(')');
                    return make(Op::Call, {arg}, 0.0, name);
                }
            }
            if (name == "pow") {
                expect('(');
                NodePtr a = expr();
                expect(',');
                NodePtr b = expr();
                expect(')');
                return make(Op::Pow, {a, b});
            }
            pos_ = start;
            fail("unknown identifier '" + name + "'");
        }
        if (accept('(')) {
            NodePtr n = expr();
            expect(')');
            return n;
        }
        fail(std::string("unexpected character '") + c + "'");
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

Jet2 eval(const Expression::Node& n, Jet2 r) {
    switch (n.op) {
        case Op::Number: return Jet2::constant(n.number);
        case Op::Var: return r;
        case Op::Add: return eval(*n.args[0], r) + eval(*n.args[1], r);
        case Op::Sub: return eval(*n.args[0], r) - eval(*n.args[1], r);
        case Op::Mul: return eval(*n.args[0], r) * eval(*n.args[1], r);
        case Op::Div: return eval(*n.args[0], r) / eval(*n.args[1], r);
        case Op::Pow: return pow(eval(*n.args[0], r), eval(*n.args[1], r));
        case Op::Neg: return -eval(*n.args[0], r);
        case Op::Call: {
            const Jet2 a = eval(*n.args[0], r);
            const std::string& f = n.func;
            if (f == "sin") return sin(a);
            if (f == "cos") return cos(a);
            if (f == "tan") return tan(a);
            if (f == "atan") return atan(a);
            if (f == "exp") return exp(a);
            if (f == "log") return log(a);
            if (f == "sqrt") return sqrt(a);
            if (f == "sinh") return sinh(a);
            if (f == "cosh") return cosh(a);
            return tanh(a);
        }
    }
    return {};
}

}  // namespace

Expression Expression::parse(std::string_view text) {
    Expression e;
    e.text_ = std::string(text);
    e.root_ = Parser(text).parse_all();
    return e;
}

Jet2 Expression::evaluate(Jet2 r) const { return eval(*root_, r); }

}  // namespace warpcone

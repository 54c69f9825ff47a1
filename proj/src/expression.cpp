#include "nlpert/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <stdexcept>

namespace nlpert {

class Expression::Parser {
public:
    Parser(const std::string& s, std::vector<Instr>& out) : s_(s), out_(out) {}

    void run() {
        expr();
        skip();
        if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    }

private:
    const std::string& s_;
    std::vector<Instr>& out_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& why) const {
        throw std::invalid_argument("expression \"" + s_ + "\": " + why + " at position " + std::to_string(pos_));
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
    void emit(Op op, double v = 0.0) { out_.push_back({op, v}); }

    void expr() {
        term();
        for (;;) {
            if (accept('+')) {
                term();
                emit(Op::Add);
            } else if (accept('-')) {
                term();
                emit(Op::Sub);
            } else {
                return;
            }
        }
    }
    void term() {
        unary();
        for (;;) {
            if (accept('*')) {
                unary();
                emit(Op::Mul);
            } else if (accept('/')) {
                unary();
                emit(Op::Div);
            } else {
                return;
            }
        }
    }
    void unary() {
        if (accept('-')) {
            unary();
            emit(Op::Neg);
        } else if (accept('+')) {
            unary();
        } else {
            power();
        }
    }
    // right associative; binds tighter than unary minus on its left: -x^2 = -(x^2)
    void power() {
        primary();
        if (accept('^')) {
            unary();
            emit(Op::Pow);
        }
    }
    void primary() {
        skip();
        if (pos_ >= s_.size()) fail("unexpected end");
        const char c = s_[pos_];
        if (accept('(')) {
            expr();
            if (!accept(')')) fail("missing ')'");
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* begin = s_.c_str() + pos_;
            char* end = nullptr;
            const double v = std::strtod(begin, &end);
            if (end == begin) fail("bad number");
            pos_ += static_cast<std::size_t>(end - begin);
            emit(Op::Const, v);
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            std::size_t start = pos_;
            while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            const std::string name = s_.substr(start, pos_ - start);
            if (name == "x") return emit(Op::Var);
            if (name == "pi") return emit(Op::Const, std::numbers::pi);
            Op f;
            if (name == "abs") f = Op::Abs;
            else if (name == "sqrt") f = Op::Sqrt;
            else if (name == "exp") f = Op::Exp;
            else if (name == "log") f = Op::Log;
            else if (name == "sin") f = Op::Sin;
            else if (name == "cos") f = Op::Cos;
            else fail("unknown name '" + name + "'");
            if (!accept('(')) fail("expected '(' after " + name);
            expr();
            if (!accept(')')) fail("missing ')'");
            emit(f);
            return;
        }
        fail("unexpected '" + std::string(1, c) + "'");
    }
};

Expression Expression::parse(const std::string& text) {
    Expression e;
    e.text_ = text;
    Parser(text, e.program_).run();
    int depth = 0;
    for (const Instr& in : e.program_) {
        switch (in.op) {
            case Op::Const:
            case Op::Var: ++depth; break;
            case Op::Add:
            case Op::Sub:
            case Op::Mul:
            case Op::Div:
            case Op::Pow: --depth; break;
            default: break;
        }
        e.max_stack_ = std::max(e.max_stack_, depth);
    }
    return e;
}

double Expression::operator()(double x) const {
    double small[32] = {};
    std::vector<double> big;
    double* st = small;
    if (max_stack_ > 32) {
        big.resize(static_cast<std::size_t>(max_stack_));
        st = big.data();
    }
    int sp = 0;
    for (const Instr& in : program_) {
        switch (in.op) {
            case Op::Const: st[sp++] = in.value; break;
            case Op::Var: st[sp++] = x; break;
            case Op::Add: --sp; st[sp - 1] += st[sp]; break;
            case Op::Sub: --sp; st[sp - 1] -= st[sp]; break;
            case Op::Mul: --sp; st[sp - 1] *= st[sp]; break;
            case Op::Div: --sp; st[sp - 1] /= st[sp]; break;
            case Op::Pow: --sp; st[sp - 1] = std::pow(st[sp - 1], st[sp]); break;
            case Op::Neg: st[sp - 1] = -st[sp - 1]; break;
            case Op::Abs: st[sp - 1] = std::abs(st[sp - 1]); break;
            case Op::Sqrt: st[sp - 1] = std::sqrt(st[sp - 1]); break;
            case Op::Exp: st[sp - 1] = std::exp(st[sp - 1]); break;
            case Op::Log: st[sp - 1] = std::log(st[sp - 1]); break;
            case Op::Sin: st[sp - 1] = std::sin(st[sp - 1]); break;
            case Op::Cos: st[sp - 1] = std::cos(st[sp - 1]); break;
        }
    }
    return st[0];
}

}  // namespace nlpert

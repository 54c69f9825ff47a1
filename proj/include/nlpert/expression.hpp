#pragma once

#include <string>
#include <vector>

namespace nlpert {

/// Arithmetic in one variable x: numbers, pi, + - * / ^, parentheses, unary minus and
/// abs, sqrt, exp, log, sin, cos. Compiled to a postfix program.
class Expression {
public:
    static Expression parse(const std::string& text);

    double operator()(double x) const;
    const std::string& text() const { return text_; }

private:
    enum class Op { Const, Var, Add, Sub, Mul, Div, Pow, Neg, Abs, Sqrt, Exp, Log, Sin, Cos };
    struct Instr {
        Op op;
        double value;
    };
    class Parser;

    std::string text_;
    std::vector<Instr> program_;
    int max_stack_ = 0;
};

}  // namespace nlpert

#include "homog/expr.hpp"

#include "homog/error.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

namespace homog {

namespace {

using Op = ScalarFieldExpr::Op;

bool is_unary_function(Op op) {
    return op == Op::Sin || op == Op::Cos || op == Op::Exp || op == Op::Sqrt || op == Op::Abs ||
           op == Op::Log || op == Op::Neg;
}

bool is_binary(Op op) {
    return op == Op::Add || op == Op::Sub || op == Op::Mul || op == Op::Div || op == Op::Pow;
}

double apply_unary(Op op, double a) {
    switch (op) {
        case Op::Neg: return -a;
        case Op::Sin: return std::sin(a);
        case Op::Cos: return std::cos(a);
        case Op::Exp: return std::exp(a);
        case Op::Sqrt: return std::sqrt(a);
        case Op::Abs: return std::fabs(a);
        case Op::Log: return std::log(a);
        default: return a;
    }
}

double apply_binary(Op op, double a, double b) {
    switch (op) {
        case Op::Add: return a + b;
        case Op::Sub: return a - b;
        case Op::Mul: return a * b;
        case Op::Div: return a / b;
        case Op::Pow: return std::pow(a, b);
        default: return a;
    }
}

struct FunctionEntry {
    const char* name;
    Op op;
};

constexpr std::array<FunctionEntry, 6> kFunctions{{{"sin", Op::Sin},
                                                   {"cos", Op::Cos},
                                                   {"exp", Op::Exp},
                                                   {"sqrt", Op::Sqrt},
                                                   {"abs", Op::Abs},
                                                   {"log", Op::Log}}};

const char* function_name(Op op) {
    for (const auto& f : kFunctions)
        if (f.op == op) return f.name;
    return "?";
}

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

class ExprParser {
public:
    ExprParser(std::string_view src, std::span<const std::string> vars) : src_(src) {
        expr_.variables_.assign(vars.begin(), vars.end());
    }

    ScalarFieldExpr run() {
        skip_ws();
        if (pos_ >= src_.size())
            throw ParseError(ParseError::Kind::Syntax, pos_, "empty expression");
        parse_sum();
        skip_ws();
        if (pos_ < src_.size())
            throw ParseError(ParseError::Kind::Syntax, pos_,
                             std::string("unexpected character '") + src_[pos_] + "'");
        expr_.finalize();
        return std::move(expr_);
    }

private:
    int push(ScalarFieldExpr::Node n) {
        expr_.nodes_.push_back(n);
        return static_cast<int>(expr_.nodes_.size()) - 1;
    }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c))
            throw ParseError(ParseError::Kind::Syntax, pos_, std::string("expected '") + c + "'");
    }

    // sum := product (('+'|'-') product)*
    int parse_sum() {
        int lhs = parse_product();
        for (;;) {
            if (accept('+')) {
                int rhs = parse_product();
                lhs = push({Op::Add, 0.0, -1, lhs, rhs});
            } else if (accept('-')) {
                int rhs = parse_product();
                lhs = push({Op::Sub, 0.0, -1, lhs, rhs});
            } else {
                return lhs;
            }
        }
    }

    // product := unary (('*'|'/') unary)*
    int parse_product() {
        int lhs = parse_unary();
        for (;;) {
            if (accept('*')) {
                int rhs = parse_unary();
                lhs = push({Op::Mul, 0.0, -1, lhs, rhs});
            } else if (accept('/')) {
                int rhs = parse_unary();
                lhs = push({Op::Div, 0.0, -1, lhs, rhs});
            } else {
                return lhs;
            }
        }
    }

    // unary := ('-'|'+') unary | power.  Unary minus binds looser than '^', so -2^2 = -4.
    int parse_unary() {
        if (accept('-')) {
            int a = parse_unary();
            return push({Op::Neg, 0.0, -1, a, -1});
        }
        if (accept('+')) return parse_unary();
        return parse_power();
    }

    // power := primary ('^' unary)?   (right associative)
    int parse_power() {
        int base = parse_primary();
        if (accept('^')) {
            int exponent = parse_unary();
            return push({Op::Pow, 0.0, -1, base, exponent});
        }
        return base;
    }

    int parse_primary() {
        skip_ws();
        if (pos_ >= src_.size())
            throw ParseError(ParseError::Kind::Syntax, pos_, "unexpected end of expression");
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            int inner = parse_sum();
            expect(')');
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
        throw ParseError(ParseError::Kind::Syntax, pos_, std::string("unexpected character '") + c + "'");
    }

    int parse_number() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.'))
            ++pos_;
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t p = pos_ + 1;
            if (p < src_.size() && (src_[p] == '+' || src_[p] == '-')) ++p;
            if (p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p]))) {
                pos_ = p;
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
            }
        }
        const std::string text(src_.substr(start, pos_ - start));
        std::size_t used = 0;
        double value = 0.0;
        try {
            value = std::stod(text, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != text.size())
            throw ParseError(ParseError::Kind::Syntax, start, "malformed number '" + text + "'");
        return push({Op::Const, value, -1, -1, -1});
    }

    int parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        const std::string name(src_.substr(start, pos_ - start));

        for (const auto& f : kFunctions) {
            if (name != f.name) continue;
            if (!accept('('))
                throw ParseError(ParseError::Kind::WrongArity, pos_,
                                 "function '" + name + "' expects one argument in parentheses");
            skip_ws();
            if (pos_ < src_.size() && src_[pos_] == ')')
                throw ParseError(ParseError::Kind::WrongArity, pos_, "function '" + name + "' expects 1 argument, got 0");
            int arg = parse_sum();
            skip_ws();
            if (pos_ < src_.size() && src_[pos_] == ',')
                throw ParseError(ParseError::Kind::WrongArity, pos_,
                                 "function '" + name + "' expects 1 argument, got more");
            expect(')');
            return push({f.op, 0.0, -1, arg, -1});
        }
        if (name == "pi") return push({Op::Const, std::numbers::pi, -1, -1, -1});
        const auto& vars = expr_.variables_;
        for (std::size_t i = 0; i < vars.size(); ++i)
            if (vars[i] == name) return push({Op::Var, 0.0, static_cast<int>(i), -1, -1});
        throw ParseError(ParseError::Kind::UnknownIdentifier, start, "unknown identifier '" + name + "'");
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    ScalarFieldExpr expr_;
};

ScalarFieldExpr parse_expr(std::string_view source, std::span<const std::string> variables) {
    return ExprParser(source, variables).run();
}

ScalarFieldExpr ScalarFieldExpr::constant(double value, std::vector<std::string> variables) {
    ScalarFieldExpr e;
    e.variables_ = std::move(variables);
    e.nodes_.push_back({Op::Const, value, -1, -1, -1});
    e.finalize();
    return e;
}

void ScalarFieldExpr::finalize() {
    // Postfix evaluation depth and constant folding flag.
    int depth = 0;
    stack_depth_ = 0;
    constant_ = true;
    for (const auto& n : nodes_) {
        if (n.op == Op::Var) constant_ = false;
        if (n.op == Op::Const || n.op == Op::Var)
            ++depth;
        else if (is_binary(n.op))
            --depth;
        stack_depth_ = std::max(stack_depth_, depth);
    }
    if (constant_ && !nodes_.empty()) {
        constant_value_ = eval({});
    }
}

double ScalarFieldExpr::eval(std::span<const double> vars) const {
    if (nodes_.empty()) return 0.0;
    // Children precede parents, so one forward sweep with a value stack suffices.
    constexpr int kInline = 64;
    double inline_stack[kInline];
    std::vector<double> heap;
    double* stack = inline_stack;
    if (stack_depth_ > kInline) {
        heap.resize(static_cast<std::size_t>(stack_depth_));
        stack = heap.data();
    }
    int top = 0;
    for (const auto& n : nodes_) {
        switch (n.op) {
            case Op::Const: stack[top++] = n.value; break;
            case Op::Var: stack[top++] = vars[static_cast<std::size_t>(n.var)]; break;
            default:
                if (is_binary(n.op)) {
                    const double b = stack[--top];
                    stack[top - 1] = apply_binary(n.op, stack[top - 1], b);
                } else {
                    stack[top - 1] = apply_unary(n.op, stack[top - 1]);
                }
        }
    }
    return stack[0];
}

std::string ScalarFieldExpr::str() const {
    if (nodes_.empty()) return "0";
    std::vector<std::string> text(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto& n = nodes_[i];
        switch (n.op) {
            case Op::Const:
                if (n.value < 0)
                    text[i] = "(-" + format_number(-n.value) + ")";
                else
                    text[i] = format_number(n.value);
                break;
            case Op::Var: text[i] = variables_[static_cast<std::size_t>(n.var)]; break;
            case Op::Neg: text[i] = "(-" + text[static_cast<std::size_t>(n.lhs)] + ")"; break;
            case Op::Add: text[i] = "(" + text[n.lhs] + "+" + text[n.rhs] + ")"; break;
            case Op::Sub: text[i] = "(" + text[n.lhs] + "-" + text[n.rhs] + ")"; break;
            case Op::Mul: text[i] = "(" + text[n.lhs] + "*" + text[n.rhs] + ")"; break;
            case Op::Div: text[i] = "(" + text[n.lhs] + "/" + text[n.rhs] + ")"; break;
            case Op::Pow: text[i] = "(" + text[n.lhs] + "^" + text[n.rhs] + ")"; break;
            default:
                text[i] = std::string(function_name(n.op)) + "(" + text[static_cast<std::size_t>(n.lhs)] + ")";
        }
    }
    return text.back();
}

namespace {

bool nodes_equal(const ScalarFieldExpr& a, int ia, const ScalarFieldExpr& b, int ib) {
    const auto& na = a.nodes()[static_cast<std::size_t>(ia)];
    const auto& nb = b.nodes()[static_cast<std::size_t>(ib)];
    if (na.op != nb.op) return false;
    switch (na.op) {
        case Op::Const: return na.value == nb.value;
        case Op::Var: return na.var == nb.var;
        default: break;
    }
    if (!nodes_equal(a, na.lhs, b, nb.lhs)) return false;
    if (is_binary(na.op)) return nodes_equal(a, na.rhs, b, nb.rhs);
    return is_unary_function(na.op);
}

}  // namespace

bool operator==(const ScalarFieldExpr& a, const ScalarFieldExpr& b) {
    if (a.nodes_.empty() || b.nodes_.empty()) return a.nodes_.empty() && b.nodes_.empty();
    return nodes_equal(a, static_cast<int>(a.nodes_.size()) - 1, b, static_cast<int>(b.nodes_.size()) - 1);
}

std::vector<std::string> cell_variables(int dim) {
    std::vector<std::string> v;
    for (int i = 1; i <= dim; ++i) v.push_back("y" + std::to_string(i));
    return v;
}

std::vector<std::string> physical_variables(int dim) {
    std::vector<std::string> v;
    for (int i = 1; i <= dim; ++i) v.push_back("x" + std::to_string(i));
    return v;
}

}  // namespace homog

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace homog {

/// Expression tree over a fixed variable list (e.g. y1,y2 for cell coefficients,
/// x1,x2 for problem data). Supports + - * / ^, unary minus, the constant `pi`
/// and the unary functions sin, cos, exp, sqrt, abs, log.
///
/// Nodes live in a flat vector; children always precede their parent, so the
/// node vector is already a valid postfix program.
class ScalarFieldExpr {
public:
    enum class Op : std::uint8_t {
        Const, Var, Add, Sub, Mul, Div, Pow, Neg, Sin, Cos, Exp, Sqrt, Abs, Log
    };

    struct Node {
        Op op = Op::Const;
        double value = 0.0;
        int var = -1;
        int lhs = -1;
        int rhs = -1;
    };

    ScalarFieldExpr() = default;
    static ScalarFieldExpr constant(double value, std::vector<std::string> variables = {});

    double eval(std::span<const double> vars) const;

    /// Fully parenthesised text form; parsing it back yields an identical tree.
    std::string str() const;

    bool is_constant() const noexcept { return constant_; }
    /// Value of a constant expression (only meaningful when is_constant()).
    double constant_value() const noexcept { return constant_value_; }
    bool is_zero() const noexcept { return constant_ && constant_value_ == 0.0; }

    const std::vector<Node>& nodes() const noexcept { return nodes_; }
    const std::vector<std::string>& variables() const noexcept { return variables_; }
    bool empty() const noexcept { return nodes_.empty(); }

    /// Structural equality (same tree shape, ops, constants and variable slots).
    friend bool operator==(const ScalarFieldExpr& a, const ScalarFieldExpr& b);

private:
    friend class ExprParser;
    void finalize();

    std::vector<Node> nodes_;
    std::vector<std::string> variables_;
    int stack_depth_ = 0;
    bool constant_ = true;
    double constant_value_ = 0.0;
};

/// Parses `source` with the given variable names in scope.
/// Throws ParseError (syntax error, unknown identifier, wrong arity) with a byte offset.
ScalarFieldExpr parse_expr(std::string_view source, std::span<const std::string> variables);

/// Variable list {"y1",...,"yd"} used by cell coefficients.
std::vector<std::string> cell_variables(int dim);
/// Variable list {"x1",...,"xd"} used by problem data on the physical domain.
std::vector<std::string> physical_variables(int dim);

}  // namespace homog

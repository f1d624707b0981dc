#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "ratekit/errors.hpp"

namespace ratekit::expr {

enum class NodeKind { Literal, Variable, Unary, Binary, Call };

enum class BinOp { Add, Sub, Mul, Div, Pow };

enum class Func { Sin, Cos, Tan, Exp, Ln, Tanh, Sech, Sqrt, Abs };

/// Value plus exact first derivatives with respect to every declared
/// variable, in declaration order.
struct DualValue {
    double value = 0.0;
    std::vector<double> partials;
};

/// Immutable expression tree over a fixed list of named variables.
/// Nodes live in a flat arena; evaluation is re-entrant and safe to call
/// concurrently.
class ExprAst {
public:
    struct Node {
        NodeKind kind;
        double literal = 0.0;
        int var = -1;
        BinOp bin_op = BinOp::Add;
        Func func = Func::Sin;
        int lhs = -1;
        int rhs = -1;
        std::size_t offset = 0;  // byte offset in the source text
    };

    /// Parses standard infix notation with precedence ^ > unary- > */ > +-,
    /// right-associative ^, parentheses and function application f(expr).
    /// Identifiers are [a-zA-Z][a-zA-Z0-9_]* and must appear in `variables`.
    static ExprAst parse(const std::string& source, const std::vector<std::string>& variables);

    /// Evaluates with values bound by declaration order.
    double eval(std::span<const double> values) const;
    double eval(const std::map<std::string, double>& point) const;

    /// Evaluates value and exact first derivatives (dual numbers).
    DualValue eval_dual(std::span<const double> values) const;
    DualValue eval_dual(const std::map<std::string, double>& point) const;

    /// Pretty-prints with minimal parentheses; re-parsing the result yields
    /// a structurally identical tree.
    std::string print() const;

    bool same_structure(const ExprAst& other) const;

    const std::vector<std::string>& variables() const { return vars_; }
    const std::string& source() const { return source_; }
    int depth() const;
    std::size_t node_count() const { return nodes_.size(); }

private:
    ExprAst() = default;

    std::vector<double> bind(const std::map<std::string, double>& point) const;
    double eval_node(int idx, std::span<const double> values) const;
    void dual_node(int idx, std::span<const double> values, double& v,
                   std::vector<double>& d) const;
    void print_node(int idx, std::string& out) const;
    int depth_node(int idx) const;

    std::vector<Node> nodes_;
    int root_ = -1;
    std::vector<std::string> vars_;
    std::string source_;

    friend class Parser;
};

}  // namespace ratekit::expr

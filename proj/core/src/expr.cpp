#include "ratekit/expr.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace ratekit::expr {

namespace {

const char* func_name(Func f) {
    switch (f) {
        case Func::Sin: return "sin";
        case Func::Cos: return "cos";
        case Func::Tan: return "tan";
        case Func::Exp: return "exp";
        case Func::Ln: return "ln";
        case Func::Tanh: return "tanh";
        case Func::Sech: return "sech";
        case Func::Sqrt: return "sqrt";
        case Func::Abs: return "abs";
    }
    return "?";
}

bool lookup_func(const std::string& name, Func& out) {
    static const std::pair<const char*, Func> table[] = {
        {"sin", Func::Sin},   {"cos", Func::Cos},   {"tan", Func::Tan},
        {"exp", Func::Exp},   {"ln", Func::Ln},     {"tanh", Func::Tanh},
        {"sech", Func::Sech}, {"sqrt", Func::Sqrt}, {"abs", Func::Abs},
    };
    for (const auto& [n, f] : table) {
        if (name == n) {
            out = f;
            return true;
        }
    }
    return false;
}

bool all_zero(const std::vector<double>& d) {
    return std::all_of(d.begin(), d.end(), [](double x) { return x == 0.0; });
}

}  // namespace

class Parser {
public:
    Parser(const std::string& src, const std::vector<std::string>& vars) : src_(src) {
        ast_.vars_ = vars;
        ast_.source_ = src;
    }

    ExprAst run() {
        if (src_.empty()) throw ParseError("empty expression", 0);
        skip_ws();
        if (pos_ >= src_.size()) throw ParseError("empty expression", pos_);
        ast_.root_ = parse_add();
        skip_ws();
        if (pos_ < src_.size())
            throw ParseError("unexpected trailing input", pos_);
        return std::move(ast_);
    }

private:
    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool peek(char c) {
        skip_ws();
        return pos_ < src_.size() && src_[pos_] == c;
    }

    bool accept(char c) {
        if (peek(c)) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c, const char* what) {
        if (!accept(c)) throw ParseError(std::string("expected ") + what, pos_);
    }

    int add_node(ExprAst::Node n) {
        ast_.nodes_.push_back(n);
        return static_cast<int>(ast_.nodes_.size()) - 1;
    }

    // add/sub level, left-associative
    int parse_add() {
        int lhs = parse_mul();
        for (;;) {
            skip_ws();
            std::size_t off = pos_;
            if (accept('+')) {
                int rhs = parse_mul();
                lhs = add_node({NodeKind::Binary, 0, -1, BinOp::Add, Func::Sin, lhs, rhs, off});
            } else if (accept('-')) {
                int rhs = parse_mul();
                lhs = add_node({NodeKind::Binary, 0, -1, BinOp::Sub, Func::Sin, lhs, rhs, off});
            } else {
                return lhs;
            }
        }
    }

    int parse_mul() {
        int lhs = parse_unary();
        for (;;) {
            skip_ws();
            std::size_t off = pos_;
            if (accept('*')) {
                int rhs = parse_unary();
                lhs = add_node({NodeKind::Binary, 0, -1, BinOp::Mul, Func::Sin, lhs, rhs, off});
            } else if (accept('/')) {
                int rhs = parse_unary();
                lhs = add_node({NodeKind::Binary, 0, -1, BinOp::Div, Func::Sin, lhs, rhs, off});
            } else {
                return lhs;
            }
        }
    }

    // unary minus binds looser than ^
    int parse_unary() {
        skip_ws();
        std::size_t off = pos_;
        if (accept('-')) {
            int child = parse_unary();
            return add_node({NodeKind::Unary, 0, -1, BinOp::Add, Func::Sin, child, -1, off});
        }
        return parse_pow();
    }

    int parse_pow() {
        int base = parse_atom();
        skip_ws();
        std::size_t off = pos_;
        if (accept('^')) {
            int exponent = parse_unary();  // right-associative, allows x^-2
            return add_node({NodeKind::Binary, 0, -1, BinOp::Pow, Func::Sin, base, exponent, off});
        }
        return base;
    }

    int parse_atom() {
        skip_ws();
        if (pos_ >= src_.size()) throw ParseError("expected operand", pos_);
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            int inner = parse_add();
            expect(')', "')'");
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c))) return parse_identifier();
        throw ParseError("expected operand", pos_);
    }

    int parse_number() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t mark = pos_;
            ++pos_;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
            if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
            } else {
                pos_ = mark;  // 'e' belongs to the next token
            }
        }
        const std::string text = src_.substr(start, pos_ - start);
        char* end = nullptr;
        const double value = std::strtod(text.c_str(), &end);
        if (end == text.c_str() || !std::isfinite(value))
            throw ParseError("malformed number", start);
        return add_node({NodeKind::Literal, value, -1, BinOp::Add, Func::Sin, -1, -1, start});
    }

    int parse_identifier() {
        const std::size_t start = pos_;
        ++pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        const std::string name = src_.substr(start, pos_ - start);
        if (peek('(')) {
            Func f;
            if (!lookup_func(name, f)) throw ParseError("unknown function '" + name + "'", start);
            expect('(', "'('");
            int arg = parse_add();
            expect(')', "')'");
            return add_node({NodeKind::Call, 0, -1, BinOp::Add, f, arg, -1, start});
        }
        for (std::size_t i = 0; i < ast_.vars_.size(); ++i) {
            if (ast_.vars_[i] == name)
                return add_node({NodeKind::Variable, 0, static_cast<int>(i), BinOp::Add,
                                 Func::Sin, -1, -1, start});
        }
        throw ParseError("unknown identifier '" + name + "'", start);
    }

    const std::string& src_;
    std::size_t pos_ = 0;
    ExprAst ast_;
};

ExprAst ExprAst::parse(const std::string& source, const std::vector<std::string>& variables) {
    return Parser(source, variables).run();
}

std::vector<double> ExprAst::bind(const std::map<std::string, double>& point) const {
    std::vector<double> values(vars_.size(), 0.0);
    for (std::size_t i = 0; i < vars_.size(); ++i) {
        auto it = point.find(vars_[i]);
        if (it == point.end())
            throw EvalError("unbound variable '" + vars_[i] + "'", 0);
        values[i] = it->second;
    }
    return values;
}

double ExprAst::eval(const std::map<std::string, double>& point) const {
    return eval(bind(point));
}

DualValue ExprAst::eval_dual(const std::map<std::string, double>& point) const {
    return eval_dual(bind(point));
}

double ExprAst::eval(std::span<const double> values) const {
    return eval_node(root_, values);
}

double ExprAst::eval_node(int idx, std::span<const double> values) const {
    const Node& n = nodes_[idx];
    switch (n.kind) {
        case NodeKind::Literal: return n.literal;
        case NodeKind::Variable: return values[n.var];
        case NodeKind::Unary: return -eval_node(n.lhs, values);
        case NodeKind::Binary: {
            const double a = eval_node(n.lhs, values);
            const double b = eval_node(n.rhs, values);
            double r = 0;
            switch (n.bin_op) {
                case BinOp::Add: r = a + b; break;
                case BinOp::Sub: r = a - b; break;
                case BinOp::Mul: r = a * b; break;
                case BinOp::Div:
                    if (b == 0.0) throw EvalError("division by zero", n.offset);
                    r = a / b;
                    break;
                case BinOp::Pow:
                    if (a == 0.0 && b < 0.0) throw EvalError("0^negative", n.offset);
                    if (a < 0.0 && b != std::floor(b))
                        throw EvalError("negative base with non-integer exponent", n.offset);
                    r = std::pow(a, b);
                    break;
            }
            if (!std::isfinite(r)) throw EvalError("non-finite result", n.offset);
            return r;
        }
        case NodeKind::Call: {
            const double a = eval_node(n.lhs, values);
            double r = 0;
            switch (n.func) {
                case Func::Sin: r = std::sin(a); break;
                case Func::Cos: r = std::cos(a); break;
                case Func::Tan: r = std::tan(a); break;
                case Func::Exp: r = std::exp(a); break;
                case Func::Ln:
                    if (a <= 0.0) throw EvalError("ln of non-positive", n.offset);
                    r = std::log(a);
                    break;
                case Func::Tanh: r = std::tanh(a); break;
                case Func::Sech: r = 1.0 / std::cosh(a); break;
                case Func::Sqrt:
                    if (a < 0.0) throw EvalError("sqrt of negative", n.offset);
                    r = std::sqrt(a);
                    break;
                case Func::Abs: r = std::fabs(a); break;
            }
            if (!std::isfinite(r)) throw EvalError("non-finite result", n.offset);
            return r;
        }
    }
    throw EvalError("corrupt node", n.offset);
}

DualValue ExprAst::eval_dual(std::span<const double> values) const {
    DualValue out;
    out.partials.assign(vars_.size(), 0.0);
    dual_node(root_, values, out.value, out.partials);
    return out;
}

void ExprAst::dual_node(int idx, std::span<const double> values, double& v,
                        std::vector<double>& d) const {
    const Node& n = nodes_[idx];
    switch (n.kind) {
        case NodeKind::Literal:
            v = n.literal;
            std::fill(d.begin(), d.end(), 0.0);
            return;
        case NodeKind::Variable:
            v = values[n.var];
            std::fill(d.begin(), d.end(), 0.0);
            d[n.var] = 1.0;
            return;
        case NodeKind::Unary: {
            dual_node(n.lhs, values, v, d);
            v = -v;
            for (double& x : d) x = -x;
            return;
        }
        case NodeKind::Binary: {
            double av, bv;
            std::vector<double> ad(d.size()), bd(d.size());
            dual_node(n.lhs, values, av, ad);
            dual_node(n.rhs, values, bv, bd);
            switch (n.bin_op) {
                case BinOp::Add:
                    v = av + bv;
                    for (std::size_t i = 0; i < d.size(); ++i) d[i] = ad[i] + bd[i];
                    break;
                case BinOp::Sub:
                    v = av - bv;
                    for (std::size_t i = 0; i < d.size(); ++i) d[i] = ad[i] - bd[i];
                    break;
                case BinOp::Mul:
                    v = av * bv;
                    for (std::size_t i = 0; i < d.size(); ++i) d[i] = ad[i] * bv + av * bd[i];
                    break;
                case BinOp::Div: {
                    if (bv == 0.0) throw EvalError("division by zero", n.offset);
                    v = av / bv;
                    const double inv2 = 1.0 / (bv * bv);
                    for (std::size_t i = 0; i < d.size(); ++i)
                        d[i] = (ad[i] * bv - av * bd[i]) * inv2;
                    break;
                }
                case BinOp::Pow: {
                    if (av == 0.0 && bv < 0.0) throw EvalError("0^negative", n.offset);
                    if (av < 0.0 && bv != std::floor(bv))
                        throw EvalError("negative base with non-integer exponent", n.offset);
                    v = std::pow(av, bv);
                    const bool exp_varies = !all_zero(bd);
                    if (exp_varies && av <= 0.0)
                        throw EvalError("derivative of a^b needs a>0 when b varies", n.offset);
                    // d(a^b) = a^b (b' ln a + b a'/a); the base term written as
                    // b a^(b-1) a' stays finite at a=0 for b>=1
                    double base_factor = 0.0;
                    if (!all_zero(ad)) {
                        if (av == 0.0) {
                            if (bv < 1.0)
                                throw EvalError("derivative of a^b at a=0 with b<1", n.offset);
                            base_factor = (bv == 1.0) ? 1.0 : 0.0;
                        } else {
                            base_factor = bv * std::pow(av, bv - 1.0);
                        }
                    }
                    const double exp_factor = exp_varies ? v * std::log(av) : 0.0;
                    for (std::size_t i = 0; i < d.size(); ++i)
                        d[i] = base_factor * ad[i] + exp_factor * bd[i];
                    break;
                }
            }
            if (!std::isfinite(v)) throw EvalError("non-finite result", n.offset);
            return;
        }
        case NodeKind::Call: {
            double av;
            dual_node(n.lhs, values, av, d);
            double factor = 0.0;
            switch (n.func) {
                case Func::Sin: v = std::sin(av); factor = std::cos(av); break;
                case Func::Cos: v = std::cos(av); factor = -std::sin(av); break;
                case Func::Tan: v = std::tan(av); factor = 1.0 + v * v; break;
                case Func::Exp: v = std::exp(av); factor = v; break;
                case Func::Ln:
                    if (av <= 0.0) throw EvalError("ln of non-positive", n.offset);
                    v = std::log(av);
                    factor = 1.0 / av;
                    break;
                case Func::Tanh: {
                    v = std::tanh(av);
                    factor = 1.0 - v * v;
                    break;
                }
                case Func::Sech: {
                    v = 1.0 / std::cosh(av);
                    factor = -v * std::tanh(av);
                    break;
                }
                case Func::Sqrt:
                    if (av < 0.0) throw EvalError("sqrt of negative", n.offset);
                    if (av == 0.0) {
                        if (!all_zero(d))
                            throw EvalError("derivative of sqrt at 0", n.offset);
                        v = 0.0;
                        factor = 0.0;
                    } else {
                        v = std::sqrt(av);
                        factor = 0.5 / v;
                    }
                    break;
                case Func::Abs:
                    if (av == 0.0 && !all_zero(d))
                        throw EvalError("derivative of abs at 0", n.offset);
                    v = std::fabs(av);
                    factor = (av > 0.0) ? 1.0 : (av < 0.0 ? -1.0 : 0.0);
                    break;
            }
            if (!std::isfinite(v)) throw EvalError("non-finite result", n.offset);
            for (double& x : d) x *= factor;
            return;
        }
    }
    throw EvalError("corrupt node", n.offset);
}

namespace {

// precedence levels used by the printer; mirror the parser
int level(const ExprAst::Node& n) {
    switch (n.kind) {
        case NodeKind::Binary:
            switch (n.bin_op) {
                case BinOp::Add:
                case BinOp::Sub: return 1;
                case BinOp::Mul:
                case BinOp::Div: return 2;
                case BinOp::Pow: return 4;
            }
            return 1;
        case NodeKind::Unary: return 3;
        default: return 5;  // atoms never need parentheses
    }
}

}  // namespace

void ExprAst::print_node(int idx, std::string& out) const {
    const Node& n = nodes_[idx];
    auto child = [&](int c, bool parens) {
        if (parens) out += '(';
        print_node(c, out);
        if (parens) out += ')';
    };
    switch (n.kind) {
        case NodeKind::Literal: {
            char buf[40];
            std::snprintf(buf, sizeof buf, "%.17g", n.literal);
            out += buf;
            return;
        }
        case NodeKind::Variable:
            out += vars_[n.var];
            return;
        case NodeKind::Unary:
            out += '-';
            child(n.lhs, level(nodes_[n.lhs]) < 3);
            return;
        case NodeKind::Binary: {
            const int lv = level(n);
            const char* op = nullptr;
            switch (n.bin_op) {
                case BinOp::Add: op = " + "; break;
                case BinOp::Sub: op = " - "; break;
                case BinOp::Mul: op = "*"; break;
                case BinOp::Div: op = "/"; break;
                case BinOp::Pow: op = "^"; break;
            }
            if (n.bin_op == BinOp::Pow) {
                // right-associative; exponent position accepts unary minus
                child(n.lhs, level(nodes_[n.lhs]) <= 4);
                out += op;
                child(n.rhs, level(nodes_[n.rhs]) == 4);
            } else {
                child(n.lhs, level(nodes_[n.lhs]) < lv);
                out += op;
                child(n.rhs, level(nodes_[n.rhs]) <= lv);
            }
            return;
        }
        case NodeKind::Call:
            out += func_name(n.func);
            out += '(';
            print_node(n.lhs, out);
            out += ')';
            return;
    }
}

std::string ExprAst::print() const {
    std::string out;
    print_node(root_, out);
    return out;
}

bool ExprAst::same_structure(const ExprAst& other) const {
    // iterative pair walk over both arenas
    std::vector<std::pair<int, int>> stack{{root_, other.root_}};
    while (!stack.empty()) {
        auto [ia, ib] = stack.back();
        stack.pop_back();
        if ((ia < 0) != (ib < 0)) return false;
        if (ia < 0) continue;
        const Node& na = nodes_[ia];
        const Node& nb = other.nodes_[ib];
        if (na.kind != nb.kind) return false;
        switch (na.kind) {
            case NodeKind::Literal:
                if (na.literal != nb.literal) return false;
                break;
            case NodeKind::Variable:
                if (na.var != nb.var) return false;
                break;
            case NodeKind::Binary:
                if (na.bin_op != nb.bin_op) return false;
                break;
            case NodeKind::Call:
                if (na.func != nb.func) return false;
                break;
            case NodeKind::Unary: break;
        }
        stack.push_back({na.lhs, nb.lhs});
        stack.push_back({na.rhs, nb.rhs});
    }
    return true;
}

int ExprAst::depth_node(int idx) const {
    if (idx < 0) return -1;
    const Node& n = nodes_[idx];
    if (n.kind == NodeKind::Literal || n.kind == NodeKind::Variable) return 0;
    return 1 + std::max(depth_node(n.lhs), depth_node(n.rhs));
}

int ExprAst::depth() const { return depth_node(root_); }

}  // namespace ratekit::expr

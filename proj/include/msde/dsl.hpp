#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "msde/core.hpp"

namespace msde::dsl {

/// Byte range of a node in its source text; line and col are 1-based.
struct Span {
    std::size_t offset = 0;
    std::size_t length = 0;
    std::size_t line = 1;
    std::size_t col = 1;

    [[nodiscard]] std::string describe() const;  // "line:col"
};

/// Syntax and name errors; the message starts with "line:col:".
class ParseError : public ConfigError {
public:
    ParseError(const std::string& message, Span span);
    [[nodiscard]] const Span& span() const noexcept { return span_; }

private:
    Span span_;
};

/// Division by zero or a non-finite intermediate during evaluation.
class EvalError : public NumericError {
public:
    EvalError(const std::string& message, Span span);
    [[nodiscard]] const Span& span() const noexcept { return span_; }

private:
    Span span_;
};

enum class NodeKind : std::uint8_t { Literal, Time, SlowVar, FastVar, Neg, Sin, Cos, Exp, Tanh, Abs, Add, Sub, Mul, Div, Pow };

inline constexpr std::size_t kMaxDepth = 64;

/// Nodes live in a flat arena; children are indices into it.
struct Node {
    NodeKind kind = NodeKind::Literal;
    double value = 0.0;          // Literal
    std::uint32_t index = 0;     // SlowVar, FastVar (0-based)
    std::uint32_t exponent = 0;  // Pow
    std::int32_t lhs = -1;
    std::int32_t rhs = -1;
    Span span;
};

/// Declared dimensions the variables x1..x_d1, y1..y_d2 refer to.
struct Signature {
    std::size_t d1 = 1;
    std::size_t d2 = 1;
    bool allow_t = true;
    bool allow_y = true;
};

struct Ast {
    std::vector<Node> nodes;
    std::int32_t root = -1;
    Signature signature;

    [[nodiscard]] const Node& at(std::int32_t i) const { return nodes[static_cast<std::size_t>(i)]; }
    [[nodiscard]] std::size_t depth() const;
};

/// Structural equality ignoring source spans.
[[nodiscard]] bool same_structure(const Ast& a, const Ast& b);

/// Grammar (standard precedence, '^' right associative, exponent a constant
/// nonnegative integer):
///   expr  := term (('+' | '-') term)*
///   term  := unary (('*' | '/') unary)*
///   unary := '-' unary | power
///   power := primary ('^' unary)?
///   primary := number | variable | func '(' expr ')' | '(' expr ')'
[[nodiscard]] Ast parse(std::string_view src, const Signature& sig = {});

/// Minimal-parenthesis rendering; parse(print(a)) is structurally equal to a.
[[nodiscard]] std::string print(const Ast& ast);

struct Usage {
    bool t = false;
    std::vector<bool> x;
    std::vector<bool> y;

    [[nodiscard]] bool any_x() const;
    [[nodiscard]] bool any_y() const;
};
[[nodiscard]] Usage usage(const Ast& ast);

/// Recursive interpretation of the tree.
[[nodiscard]] double eval_tree(const Ast& ast, double t, std::span<const double> x, std::span<const double> y);

/// Flat postfix program with constant subtrees folded. Evaluation performs no
/// allocation and is reentrant.
class Compiled {
public:
    explicit Compiled(const Ast& ast);

    [[nodiscard]] double operator()(double t, std::span<const double> x, std::span<const double> y) const;
    [[nodiscard]] const Signature& signature() const noexcept { return sig_; }
    [[nodiscard]] std::size_t program_size() const noexcept { return code_.size(); }
    [[nodiscard]] bool is_constant() const noexcept { return code_.size() == 1 && code_[0].kind == NodeKind::Literal; }

private:
    struct Instr {
        NodeKind kind;
        std::uint32_t arg;
        double value;
        Span span;
    };
    void emit(const Ast& ast, std::int32_t i, const std::vector<char>& has_var);

    Signature sig_;
    std::vector<Instr> code_;
};

}  // namespace msde::dsl

#include "msde/dsl.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace msde::dsl {

std::string Span::describe() const { return fmt::format("{}:{}", line, col); }

ParseError::ParseError(const std::string& message, Span span)
    : ConfigError(fmt::format("{}: {}", span.describe(), message)), span_(span) {}

EvalError::EvalError(const std::string& message, Span span)
    : NumericError(fmt::format("{} (at {}, length {})", message, span.describe(), span.length)), span_(span) {}

namespace {

bool is_unary(NodeKind k) { return k >= NodeKind::Neg && k <= NodeKind::Abs; }

struct FunctionName {
    std::string_view name;
    NodeKind kind;
};
constexpr std::array<FunctionName, 5> kFunctions{{{"sin", NodeKind::Sin},
                                                  {"cos", NodeKind::Cos},
                                                  {"exp", NodeKind::Exp},
                                                  {"tanh", NodeKind::Tanh},
                                                  {"abs", NodeKind::Abs}}};

std::string_view function_name(NodeKind k) {
    for (const auto& f : kFunctions) {
        if (f.kind == k) return f.name;
    }
    return "?";
}

double ipow(double base, std::uint32_t n) {
    double result = 1.0;
    double b = base;
    while (n > 0) {
        if (n & 1U) result *= b;
        n >>= 1U;
        if (n > 0) b *= b;
    }
    return result;
}

double apply_unary(NodeKind k, double v) {
    switch (k) {
        case NodeKind::Neg: return -v;
        case NodeKind::Sin: return std::sin(v);
        case NodeKind::Cos: return std::cos(v);
        case NodeKind::Exp: return std::exp(v);
        case NodeKind::Tanh: return std::tanh(v);
        case NodeKind::Abs: return std::abs(v);
        default: return v;
    }
}

double apply_binary(NodeKind k, double a, double b, const Span& span) {
    switch (k) {
        case NodeKind::Add: return a + b;
        case NodeKind::Sub: return a - b;
        case NodeKind::Mul: return a * b;
        case NodeKind::Div:
            if (b == 0.0) throw EvalError("division by zero", span);
            return a / b;
        default: return a;
    }
}

double checked(double v, const Span& span) {
    if (!std::isfinite(v)) throw EvalError("non-finite intermediate value", span);
    return v;
}

// Lexer -------------------------------------------------------------------------

enum class Tok { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, End };

struct Token {
    Tok kind = Tok::End;
    std::string_view text;
    double number = 0.0;
    Span span;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    Token next() {
        skip_space();
        Token tok;
        tok.span = {pos_, 0, line_, col_};
        if (pos_ >= src_.size()) return tok;
        const char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number(tok);
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t end = pos_;
            while (end < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[end])) || src_[end] == '_')) {
                ++end;
            }
            tok.kind = Tok::Ident;
            return finish(tok, end);
        }
        switch (c) {
            case '+': tok.kind = Tok::Plus; break;
            case '-': tok.kind = Tok::Minus; break;
            case '*': tok.kind = Tok::Star; break;
            case '/': tok.kind = Tok::Slash; break;
            case '^': tok.kind = Tok::Caret; break;
            case '(': tok.kind = Tok::LParen; break;
            case ')': tok.kind = Tok::RParen; break;
            default:
                tok.span.length = 1;
                throw ParseError(fmt::format("unexpected character '{}'", printable(c)), tok.span);
        }
        return finish(tok, pos_ + 1);
    }

private:
    static std::string printable(char c) {
        const auto u = static_cast<unsigned char>(c);
        return u >= 0x20 && u < 0x7f ? std::string(1, c) : fmt::format("\\x{:02x}", u);
    }

    void skip_space() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) {
            if (src_[pos_] == '\n') {
                ++line_;
                col_ = 1;
            } else {
                ++col_;
            }
            ++pos_;
        }
    }

    Token finish(Token tok, std::size_t end) {
        tok.text = src_.substr(pos_, end - pos_);
        tok.span.length = end - pos_;
        col_ += end - pos_;
        pos_ = end;
        return tok;
    }

    Token number(Token tok) {
        std::size_t end = pos_;
        auto digits = [&] {
            while (end < src_.size() && std::isdigit(static_cast<unsigned char>(src_[end]))) ++end;
        };
        digits();
        if (end < src_.size() && src_[end] == '.') {
            ++end;
            digits();
        }
        if (end < src_.size() && (src_[end] == 'e' || src_[end] == 'E')) {
            std::size_t save = end++;
            if (end < src_.size() && (src_[end] == '+' || src_[end] == '-')) ++end;
            if (end < src_.size() && std::isdigit(static_cast<unsigned char>(src_[end]))) {
                digits();
            } else {
                end = save;
            }
        }
        const std::string_view text = src_.substr(pos_, end - pos_);
        tok.span.length = end - pos_;
        double v = 0.0;
        const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
        if (res.ec == std::errc::result_out_of_range) {
            throw ParseError(fmt::format("numeric literal '{}' out of range", text), tok.span);
        }
        if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
            throw ParseError(fmt::format("malformed numeric literal '{}'", text), tok.span);
        }
        tok.kind = Tok::Number;
        tok.number = v;
        return finish(tok, end);
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t col_ = 1;
};

double eval_node(const Ast& ast, std::int32_t i, double t, std::span<const double> x, std::span<const double> y);

// Parser ------------------------------------------------------------------------

constexpr std::size_t kMaxNesting = 256;

class Parser {
public:
    Parser(std::string_view src, const Signature& sig) : lex_(src), sig_(sig) {
        ast_.signature = sig;
        advance();
    }

    Ast run() {
        if (cur_.kind == Tok::End) throw ParseError("empty expression", cur_.span);
        const std::int32_t root = expr();
        if (cur_.kind != Tok::End) {
            throw ParseError(fmt::format("unexpected '{}'; expected one of: operator, end of input", cur_.text),
                             cur_.span);
        }
        ast_.root = root;
        return std::move(ast_);
    }

private:
    void advance() { cur_ = lex_.next(); }

    static Span join(const Span& a, const Span& b) {
        Span s = a;
        s.length = b.offset + b.length - a.offset;
        return s;
    }

    std::int32_t add(Node n) {
        std::size_t d = 1;
        if (n.lhs >= 0) d = std::max(d, 1 + depth_[static_cast<std::size_t>(n.lhs)]);
        if (n.rhs >= 0) d = std::max(d, 1 + depth_[static_cast<std::size_t>(n.rhs)]);
        if (d > kMaxDepth) throw ParseError(fmt::format("expression tree deeper than {}", kMaxDepth), n.span);
        ast_.nodes.push_back(n);
        depth_.push_back(d);
        return static_cast<std::int32_t>(ast_.nodes.size() - 1);
    }

    const Span& span_of(std::int32_t i) const { return ast_.nodes[static_cast<std::size_t>(i)].span; }

    std::int32_t binary(NodeKind k, std::int32_t l, std::int32_t r) {
        Node n;
        n.kind = k;
        n.lhs = l;
        n.rhs = r;
        n.span = join(span_of(l), span_of(r));
        return add(n);
    }

    void enter(const Span& at) {
        if (++nesting_ > kMaxNesting) throw ParseError("expression nested too deeply", at);
    }

    std::int32_t expr() {
        enter(cur_.span);
        std::int32_t lhs = term();
        while (cur_.kind == Tok::Plus || cur_.kind == Tok::Minus) {
            const NodeKind k = cur_.kind == Tok::Plus ? NodeKind::Add : NodeKind::Sub;
            advance();
            lhs = binary(k, lhs, term());
        }
        --nesting_;
        return lhs;
    }

    std::int32_t term() {
        std::int32_t lhs = unary();
        while (cur_.kind == Tok::Star || cur_.kind == Tok::Slash) {
            const NodeKind k = cur_.kind == Tok::Star ? NodeKind::Mul : NodeKind::Div;
            advance();
            lhs = binary(k, lhs, unary());
        }
        return lhs;
    }

    std::int32_t unary() {
        if (cur_.kind == Tok::Minus) {
            enter(cur_.span);
            const Span start = cur_.span;
            advance();
            Node n;
            n.kind = NodeKind::Neg;
            n.lhs = unary();
            n.span = join(start, span_of(n.lhs));
            --nesting_;
            return add(n);
        }
        return power();
    }

    std::int32_t power() {
        const std::int32_t base = primary();
        if (cur_.kind != Tok::Caret) return base;
        advance();
        enter(cur_.span);
        const std::int32_t e = unary();
        --nesting_;
        Ast sub;
        sub.nodes = ast_.nodes;
        sub.root = e;
        sub.signature = sig_;
        const Usage u = usage(sub);
        const Span& es = span_of(e);
        if (u.t || u.any_x() || u.any_y()) throw ParseError("exponent must be a constant", es);
        const double v = eval_node(sub, e, 0.0, {}, {});
        if (!(v >= 0.0) || v != std::floor(v) || v > 1024.0) {
            throw ParseError(fmt::format("exponent must be a nonnegative integer <= 1024, got {}", v), es);
        }
        // The exponent subtree is the arena tail; drop it.
        ast_.nodes.resize(first_of(e));
        depth_.resize(ast_.nodes.size());
        Node n;
        n.kind = NodeKind::Pow;
        n.lhs = base;
        n.exponent = static_cast<std::uint32_t>(v);
        n.span = join(span_of(base), es);
        return add(n);
    }

    // Nodes are appended in post-order, so a subtree occupies a contiguous
    // index range ending at its root.
    std::size_t first_of(std::int32_t root) const {
        std::size_t lo = static_cast<std::size_t>(root);
        const Node& n = ast_.nodes[lo];
        if (n.lhs >= 0) lo = std::min(lo, first_of(n.lhs));
        if (n.rhs >= 0) lo = std::min(lo, first_of(n.rhs));
        return lo;
    }

    std::string valid_names() const {
        std::string s;
        if (sig_.allow_t) s += "t";
        for (std::size_t i = 1; i <= sig_.d1; ++i) s += fmt::format("{}x{}", s.empty() ? "" : ", ", i);
        if (sig_.allow_y) {
            for (std::size_t i = 1; i <= sig_.d2; ++i) s += fmt::format(", y{}", i);
        }
        for (const auto& f : kFunctions) s += fmt::format(", {}", f.name);
        return s;
    }

    bool variable(std::string_view name, Node& n) const {
        if (name == "t" && sig_.allow_t) {
            n.kind = NodeKind::Time;
            return true;
        }
        if (name.size() < 2 || (name[0] != 'x' && name[0] != 'y')) return false;
        std::uint32_t idx = 0;
        const auto res = std::from_chars(name.data() + 1, name.data() + name.size(), idx);
        if (res.ec != std::errc() || res.ptr != name.data() + name.size() || idx == 0 || name[1] == '0') return false;
        if (name[0] == 'x') {
            if (idx > sig_.d1) return false;
            n.kind = NodeKind::SlowVar;
        } else {
            if (!sig_.allow_y || idx > sig_.d2) return false;
            n.kind = NodeKind::FastVar;
        }
        n.index = idx - 1;
        return true;
    }

    std::int32_t primary() {
        const Token tok = cur_;
        switch (tok.kind) {
            case Tok::Number: {
                advance();
                Node n;
                n.kind = NodeKind::Literal;
                n.value = tok.number;
                n.span = tok.span;
                return add(n);
            }
            case Tok::LParen: {
                advance();
                const std::int32_t inner = expr();
                if (cur_.kind != Tok::RParen) {
                    throw ParseError(fmt::format("expected ')' to close '(' at {}", tok.span.describe()), cur_.span);
                }
                advance();
                return inner;
            }
            case Tok::Ident: {
                advance();
                for (const auto& f : kFunctions) {
                    if (tok.text != f.name) continue;
                    if (cur_.kind != Tok::LParen) {
                        throw ParseError(fmt::format("expected '(' after '{}'", f.name), cur_.span);
                    }
                    advance();
                    Node n;
                    n.kind = f.kind;
                    n.lhs = expr();
                    if (cur_.kind != Tok::RParen) {
                        throw ParseError(fmt::format("expected ')' to close '{}('", f.name), cur_.span);
                    }
                    n.span = join(tok.span, cur_.span);
                    advance();
                    return add(n);
                }
                Node n;
                n.span = tok.span;
                if (!variable(tok.text, n)) {
                    throw ParseError(fmt::format("unknown identifier '{}'; valid names: {}", tok.text, valid_names()),
                                     tok.span);
                }
                return add(n);
            }
            case Tok::End:
                throw ParseError("unexpected end of input; expected one of: number, identifier, '(', '-'", tok.span);
            default:
                throw ParseError(
                    fmt::format("unexpected '{}'; expected one of: number, identifier, '(', '-'", tok.text), tok.span);
        }
    }

    Lexer lex_;
    Signature sig_;
    Token cur_;
    Ast ast_;
    std::vector<std::size_t> depth_;
    std::size_t nesting_ = 0;
};

// Printer -----------------------------------------------------------------------

int precedence(NodeKind k) {
    switch (k) {
        case NodeKind::Add:
        case NodeKind::Sub: return 1;
        case NodeKind::Mul:
        case NodeKind::Div: return 2;
        case NodeKind::Neg: return 3;
        case NodeKind::Pow: return 4;
        default: return 5;
    }
}

void print_node(const Ast& ast, std::int32_t i, std::string& out) {
    const Node& n = ast.at(i);
    auto child = [&](std::int32_t c, bool parens) {
        if (parens) out += '(';
        print_node(ast, c, out);
        if (parens) out += ')';
    };
    switch (n.kind) {
        case NodeKind::Literal: out += fmt::format("{}", n.value); return;
        case NodeKind::Time: out += 't'; return;
        case NodeKind::SlowVar: out += fmt::format("x{}", n.index + 1); return;
        case NodeKind::FastVar: out += fmt::format("y{}", n.index + 1); return;
        case NodeKind::Neg:
            out += '-';
            child(n.lhs, precedence(ast.at(n.lhs).kind) < 3);
            return;
        case NodeKind::Pow:
            child(n.lhs, precedence(ast.at(n.lhs).kind) < 5);
            out += fmt::format("^{}", n.exponent);
            return;
        default: break;
    }
    if (is_unary(n.kind)) {
        out += function_name(n.kind);
        child(n.lhs, true);
        return;
    }
    const int p = precedence(n.kind);
    child(n.lhs, precedence(ast.at(n.lhs).kind) < p);
    switch (n.kind) {
        case NodeKind::Add: out += " + "; break;
        case NodeKind::Sub: out += " - "; break;
        case NodeKind::Mul: out += " * "; break;
        default: out += " / "; break;
    }
    child(n.rhs, precedence(ast.at(n.rhs).kind) <= p);
}

double eval_node(const Ast& ast, std::int32_t i, double t, std::span<const double> x, std::span<const double> y) {
    const Node& n = ast.at(i);
    switch (n.kind) {
        case NodeKind::Literal: return n.value;
        case NodeKind::Time: return t;
        case NodeKind::SlowVar: return x[n.index];
        case NodeKind::FastVar: return y[n.index];
        case NodeKind::Pow: return checked(ipow(eval_node(ast, n.lhs, t, x, y), n.exponent), n.span);
        default: break;
    }
    if (is_unary(n.kind)) return checked(apply_unary(n.kind, eval_node(ast, n.lhs, t, x, y)), n.span);
    const double a = eval_node(ast, n.lhs, t, x, y);
    const double b = eval_node(ast, n.rhs, t, x, y);
    return checked(apply_binary(n.kind, a, b, n.span), n.span);
}

bool same_node(const Ast& a, std::int32_t i, const Ast& b, std::int32_t j) {
    if ((i < 0) != (j < 0)) return false;
    if (i < 0) return true;
    const Node& p = a.at(i);
    const Node& q = b.at(j);
    if (p.kind != q.kind) return false;
    switch (p.kind) {
        case NodeKind::Literal:
            if (std::bit_cast<std::uint64_t>(p.value) != std::bit_cast<std::uint64_t>(q.value)) return false;
            break;
        case NodeKind::SlowVar:
        case NodeKind::FastVar:
            if (p.index != q.index) return false;
            break;
        case NodeKind::Pow:
            if (p.exponent != q.exponent) return false;
            break;
        default: break;
    }
    return same_node(a, p.lhs, b, q.lhs) && same_node(a, p.rhs, b, q.rhs);
}

void check_dims(const Signature& sig, std::span<const double> x, std::span<const double> y) {
    if (x.size() != sig.d1 || (sig.allow_y && y.size() != sig.d2)) {
        throw ContractViolation(fmt::format("expression expects x of size {} and y of size {}, got {} and {}",
                                            sig.d1, sig.d2, x.size(), y.size()));
    }
}

}  // namespace

std::size_t Ast::depth() const {
    std::vector<std::size_t> d(nodes.size(), 1);
    std::size_t best = 0;
    // Children precede parents in the arena.
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const Node& n = nodes[i];
        if (n.lhs >= 0) d[i] = std::max(d[i], 1 + d[static_cast<std::size_t>(n.lhs)]);
        if (n.rhs >= 0) d[i] = std::max(d[i], 1 + d[static_cast<std::size_t>(n.rhs)]);
        best = std::max(best, d[i]);
    }
    return root >= 0 ? d[static_cast<std::size_t>(root)] : best;
}

bool same_structure(const Ast& a, const Ast& b) { return same_node(a, a.root, b, b.root); }

Ast parse(std::string_view src, const Signature& sig) { return Parser(src, sig).run(); }

std::string print(const Ast& ast) {
    std::string out;
    if (ast.root >= 0) print_node(ast, ast.root, out);
    return out;
}

bool Usage::any_x() const { return std::find(x.begin(), x.end(), true) != x.end(); }
bool Usage::any_y() const { return std::find(y.begin(), y.end(), true) != y.end(); }

Usage usage(const Ast& ast) {
    Usage u;
    u.x.assign(ast.signature.d1, false);
    u.y.assign(ast.signature.d2, false);
    std::vector<std::int32_t> stack;
    if (ast.root >= 0) stack.push_back(ast.root);
    while (!stack.empty()) {
        const Node& n = ast.at(stack.back());
        stack.pop_back();
        if (n.kind == NodeKind::Time) u.t = true;
        if (n.kind == NodeKind::SlowVar) u.x[n.index] = true;
        if (n.kind == NodeKind::FastVar) u.y[n.index] = true;
        if (n.lhs >= 0) stack.push_back(n.lhs);
        if (n.rhs >= 0) stack.push_back(n.rhs);
    }
    return u;
}

double eval_tree(const Ast& ast, double t, std::span<const double> x, std::span<const double> y) {
    check_dims(ast.signature, x, y);
    return eval_node(ast, ast.root, t, x, y);
}

Compiled::Compiled(const Ast& ast) : sig_(ast.signature) {
    if (ast.root < 0) throw ContractViolation("compiling an empty expression");
    if (ast.depth() > kMaxDepth) throw ContractViolation("expression tree too deep to compile");
    // Children precede parents in the arena.
    std::vector<char> has_var(ast.nodes.size(), 0);
    for (std::size_t i = 0; i < ast.nodes.size(); ++i) {
        const Node& n = ast.nodes[i];
        has_var[i] = n.kind == NodeKind::Time || n.kind == NodeKind::SlowVar || n.kind == NodeKind::FastVar ||
                     (n.lhs >= 0 && has_var[static_cast<std::size_t>(n.lhs)]) ||
                     (n.rhs >= 0 && has_var[static_cast<std::size_t>(n.rhs)]);
    }
    emit(ast, ast.root, has_var);
}

void Compiled::emit(const Ast& ast, std::int32_t i, const std::vector<char>& has_var) {
    const Node& n = ast.at(i);
    if (!has_var[static_cast<std::size_t>(i)]) {
        code_.push_back({NodeKind::Literal, 0, eval_node(ast, i, 0.0, {}, {}), n.span});
        return;
    }
    if (n.lhs >= 0) emit(ast, n.lhs, has_var);
    if (n.rhs >= 0) emit(ast, n.rhs, has_var);
    const std::uint32_t arg = n.kind == NodeKind::Pow ? n.exponent : n.index;
    code_.push_back({n.kind, arg, n.value, n.span});
}

double Compiled::operator()(double t, std::span<const double> x, std::span<const double> y) const {
    check_dims(sig_, x, y);
    std::array<double, kMaxDepth + 2> stack;
    std::size_t sp = 0;
    for (const Instr& in : code_) {
        switch (in.kind) {
            case NodeKind::Literal: stack[sp++] = in.value; break;
            case NodeKind::Time: stack[sp++] = t; break;
            case NodeKind::SlowVar: stack[sp++] = x[in.arg]; break;
            case NodeKind::FastVar: stack[sp++] = y[in.arg]; break;
            case NodeKind::Pow: stack[sp - 1] = checked(ipow(stack[sp - 1], in.arg), in.span); break;
            case NodeKind::Add:
            case NodeKind::Sub:
            case NodeKind::Mul:
            case NodeKind::Div:
                --sp;
                stack[sp - 1] = checked(apply_binary(in.kind, stack[sp - 1], stack[sp], in.span), in.span);
                break;
            default: stack[sp - 1] = checked(apply_unary(in.kind, stack[sp - 1]), in.span); break;
        }
    }
    return stack[0];
}

}  // namespace msde::dsl

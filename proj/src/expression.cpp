#include "embedflow/expression.hpp"

#include <charconv>
#include <cctype>
#include <cmath>
#include <numbers>

namespace embedflow::expr {

namespace {

struct FuncInfo {
  const char* name;
  Func func;
};

constexpr FuncInfo kFuncs[] = {{"sin", Func::sin}, {"cos", Func::cos},   {"tan", Func::tan},
                               {"exp", Func::exp}, {"log", Func::log},   {"sqrt", Func::sqrt}};

const char* func_name(Func f) {
  for (const auto& fi : kFuncs)
    if (fi.func == f) return fi.name;
  return "?";
}

double apply(Func f, double x) {
  switch (f) {
    case Func::sin: return std::sin(x);
    case Func::cos: return std::cos(x);
    case Func::tan: return std::tan(x);
    case Func::exp: return std::exp(x);
    case Func::log: return std::log(x);
    case Func::sqrt: return std::sqrt(x);
  }
  return 0.0;
}

Ptr make(Node n) { return std::make_shared<const Node>(std::move(n)); }

Ptr num(double v) {
  Node n;
  n.kind = Kind::number;
  n.value = v;
  return make(std::move(n));
}

Ptr binary(Kind k, Ptr a, Ptr b) {
  Node n;
  n.kind = k;
  n.a = std::move(a);
  n.b = std::move(b);
  return make(std::move(n));
}

Ptr unary(Kind k, Ptr a) {
  Node n;
  n.kind = k;
  n.a = std::move(a);
  return make(std::move(n));
}

Ptr call(Func f, Ptr a) {
  Node n;
  n.kind = Kind::call;
  n.func = f;
  n.a = std::move(a);
  return make(std::move(n));
}

bool is_num(const Ptr& e, double v) { return e->kind == Kind::number && e->value == v; }

// Constructors with constant folding of the trivial cases, used by derivative().
Ptr s_add(Ptr a, Ptr b) {
  if (is_num(a, 0.0)) return b;
  if (is_num(b, 0.0)) return a;
  if (a->kind == Kind::number && b->kind == Kind::number) return num(a->value + b->value);
  return binary(Kind::add, std::move(a), std::move(b));
}

Ptr s_neg(Ptr a) {
  if (a->kind == Kind::number) return num(-a->value);
  if (a->kind == Kind::neg) return a->a;
  return unary(Kind::neg, std::move(a));
}

Ptr s_sub(Ptr a, Ptr b) {
  if (is_num(b, 0.0)) return a;
  if (is_num(a, 0.0)) return s_neg(std::move(b));
  if (a->kind == Kind::number && b->kind == Kind::number) return num(a->value - b->value);
  return binary(Kind::sub, std::move(a), std::move(b));
}

Ptr s_mul(Ptr a, Ptr b) {
  if (is_num(a, 0.0) || is_num(b, 0.0)) return num(0.0);
  if (is_num(a, 1.0)) return b;
  if (is_num(b, 1.0)) return a;
  if (a->kind == Kind::number && b->kind == Kind::number) return num(a->value * b->value);
  return binary(Kind::mul, std::move(a), std::move(b));
}

Ptr s_div(Ptr a, Ptr b) {
  if (is_num(a, 0.0)) return num(0.0);
  if (is_num(b, 1.0)) return a;
  return binary(Kind::div, std::move(a), std::move(b));
}

Ptr s_pow(Ptr a, Ptr b) {
  if (is_num(b, 0.0)) return num(1.0);
  if (is_num(b, 1.0)) return a;
  return binary(Kind::pow, std::move(a), std::move(b));
}

bool depends_on_variables(const Ptr& e) {
  if (!e) return false;
  if (e->kind == Kind::variable) return true;
  return depends_on_variables(e->a) || depends_on_variables(e->b);
}

class Parser {
 public:
  Parser(const std::string& text, const std::vector<std::string>& vars) : s_(text), vars_(vars) {}

  Ptr run() {
    Ptr e = expression();
    skip();
    if (pos_ != s_.size()) fail(std::string("unexpected character '") + s_[pos_] + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, pos_); }
  [[noreturn]] void fail_at(const std::string& what, std::size_t at) const { throw ParseError(what, at); }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Ptr expression() {
    Ptr e = term();
    while (true) {
      if (eat('+')) e = binary(Kind::add, e, term());
      else if (eat('-')) e = binary(Kind::sub, e, term());
      else return e;
    }
  }

  Ptr term() {
    Ptr e = signed_factor();
    while (true) {
      if (eat('*')) e = binary(Kind::mul, e, signed_factor());
      else if (eat('/')) e = binary(Kind::div, e, signed_factor());
      else return e;
    }
  }

  Ptr signed_factor() {
    if (eat('-')) return unary(Kind::neg, signed_factor());
    if (eat('+')) return signed_factor();
    return power();
  }

  Ptr power() {
    Ptr base = primary();
    if (eat('^')) return binary(Kind::pow, base, signed_factor());
    return base;
  }

  Ptr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of expression");
    const char c = s_[pos_];
    if (eat('(')) {
      Ptr e = expression();
      if (!eat(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail(std::string("unexpected character '") + c + "'");
  }

  Ptr number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    };
    digits();
    if (pos_ < s_.size() && s_[pos_] == '.') {
      ++pos_;
      digits();
    }
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < s_.size() && (s_[p] == '+' || s_[p] == '-')) ++p;
      if (p < s_.size() && std::isdigit(static_cast<unsigned char>(s_[p]))) {
        pos_ = p;
        digits();
      }
    }
    double v = 0.0;
    const auto res = std::from_chars(s_.data() + start, s_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != s_.data() + pos_) fail_at("malformed number", start);
    return num(v);
  }

  Ptr identifier() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    const std::string id = s_.substr(start, pos_ - start);
    skip();
    if (pos_ < s_.size() && s_[pos_] == '(') {
      const FuncInfo* fi = nullptr;
      for (const auto& f : kFuncs)
        if (id == f.name) fi = &f;
      if (!fi) fail_at("unknown function '" + id + "'", start);
      ++pos_;
      std::vector<Ptr> args;
      if (!eat(')')) {
        do args.push_back(expression());
        while (eat(','));
        if (!eat(')')) fail("expected ')' after function arguments");
      }
      if (args.size() != 1) {
        fail_at("function '" + id + "' takes 1 argument, got " + std::to_string(args.size()), start);
      }
      return call(fi->func, args[0]);
    }
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      if (vars_[i] == id) {
        Node n;
        n.kind = Kind::variable;
        n.name = id;
        n.var = static_cast<int>(i);
        return make(std::move(n));
      }
    }
    if (id == "pi" || id == "e") {
      Node n;
      n.kind = Kind::constant;
      n.name = id;
      n.value = id == "pi" ? std::numbers::pi : std::numbers::e;
      return make(std::move(n));
    }
    fail_at("undefined identifier '" + id + "'", start);
  }

  const std::string& s_;
  const std::vector<std::string>& vars_;
  std::size_t pos_ = 0;
};

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, std::abs(v));
  std::string s(buf, res.ptr);
  return v < 0.0 || std::signbit(v) ? "(-" + s + ")" : s;
}

}  // namespace

bool equal(const Ptr& x, const Ptr& y) {
  if (!x || !y) return !x && !y;
  if (x->kind != y->kind) return false;
  switch (x->kind) {
    case Kind::number: return x->value == y->value;
    case Kind::constant: return x->name == y->name;
    case Kind::variable: return x->var == y->var;
    case Kind::call: return x->func == y->func && equal(x->a, y->a);
    case Kind::neg: return equal(x->a, y->a);
    default: return equal(x->a, y->a) && equal(x->b, y->b);
  }
}

Ptr parse(const std::string& text, const std::vector<std::string>& variables) {
  return Parser(text, variables).run();
}

std::string print(const Ptr& e) {
  switch (e->kind) {
    case Kind::number: return format_number(e->value);
    case Kind::constant:
    case Kind::variable: return e->name;
    case Kind::neg: return "(-" + print(e->a) + ")";
    case Kind::call: return std::string(func_name(e->func)) + "(" + print(e->a) + ")";
    case Kind::add: return "(" + print(e->a) + " + " + print(e->b) + ")";
    case Kind::sub: return "(" + print(e->a) + " - " + print(e->b) + ")";
    case Kind::mul: return "(" + print(e->a) + " * " + print(e->b) + ")";
    case Kind::div: return "(" + print(e->a) + " / " + print(e->b) + ")";
    case Kind::pow: return "(" + print(e->a) + " ^ " + print(e->b) + ")";
  }
  return "";
}

Ptr derivative(const Ptr& e, int i) {
  switch (e->kind) {
    case Kind::number:
    case Kind::constant: return num(0.0);
    case Kind::variable: return num(e->var == i ? 1.0 : 0.0);
    case Kind::add: return s_add(derivative(e->a, i), derivative(e->b, i));
    case Kind::sub: return s_sub(derivative(e->a, i), derivative(e->b, i));
    case Kind::neg: return s_neg(derivative(e->a, i));
    case Kind::mul: return s_add(s_mul(derivative(e->a, i), e->b), s_mul(e->a, derivative(e->b, i)));
    case Kind::div:
      return s_div(s_sub(s_mul(derivative(e->a, i), e->b), s_mul(e->a, derivative(e->b, i))), s_pow(e->b, num(2.0)));
    case Kind::pow: {
      const Ptr da = derivative(e->a, i);
      if (!depends_on_variables(e->b)) {
        const Ptr exponent = e->b->kind == Kind::number ? num(e->b->value - 1.0) : s_sub(e->b, num(1.0));
        return s_mul(s_mul(e->b, s_pow(e->a, exponent)), da);
      }
      // d(a^b) = a^b (b' log a + b a' / a)
      const Ptr db = derivative(e->b, i);
      return s_mul(e, s_add(s_mul(db, call(Func::log, e->a)), s_div(s_mul(e->b, da), e->a)));
    }
    case Kind::call: {
      const Ptr da = derivative(e->a, i);
      if (is_num(da, 0.0)) return da;
      switch (e->func) {
        case Func::sin: return s_mul(call(Func::cos, e->a), da);
        case Func::cos: return s_neg(s_mul(call(Func::sin, e->a), da));
        case Func::tan: return s_div(da, s_pow(call(Func::cos, e->a), num(2.0)));
        case Func::exp: return s_mul(e, da);
        case Func::log: return s_div(da, e->a);
        case Func::sqrt: return s_div(da, s_mul(num(2.0), e));
      }
    }
  }
  return num(0.0);
}

double evaluate(const Ptr& e, const std::vector<double>& x) {
  switch (e->kind) {
    case Kind::number:
    case Kind::constant: return e->value;
    case Kind::variable: return x.at(static_cast<std::size_t>(e->var));
    case Kind::add: return evaluate(e->a, x) + evaluate(e->b, x);
    case Kind::sub: return evaluate(e->a, x) - evaluate(e->b, x);
    case Kind::mul: return evaluate(e->a, x) * evaluate(e->b, x);
    case Kind::div: return evaluate(e->a, x) / evaluate(e->b, x);
    case Kind::pow: return std::pow(evaluate(e->a, x), evaluate(e->b, x));
    case Kind::neg: return -evaluate(e->a, x);
    case Kind::call: return apply(e->func, evaluate(e->a, x));
  }
  return 0.0;
}

namespace {

void compile(const Ptr& e, std::vector<Program::Op>& ops, std::size_t depth, std::size_t& max_depth) {
  max_depth = std::max(max_depth, depth + 1);
  switch (e->kind) {
    case Kind::number:
    case Kind::constant: ops.push_back({Kind::number, e->value, -1, Func::sin}); return;
    case Kind::variable: ops.push_back({Kind::variable, 0.0, e->var, Func::sin}); return;
    case Kind::neg:
    case Kind::call:
      compile(e->a, ops, depth, max_depth);
      ops.push_back({e->kind, 0.0, -1, e->func});
      return;
    default:
      compile(e->a, ops, depth, max_depth);
      compile(e->b, ops, depth + 1, max_depth);
      ops.push_back({e->kind, 0.0, -1, Func::sin});
  }
}

}  // namespace

Program::Program(const Ptr& e) { compile(e, ops_, 0, depth_); }

double Program::operator()(const double* x) const {
  double small[32] = {};
  std::vector<double> big;
  double* st = small;
  if (depth_ > 32) {
    big.resize(depth_);
    st = big.data();
  }
  std::size_t top = 0;
  for (const Op& op : ops_) {
    switch (op.kind) {
      case Kind::number: st[top++] = op.value; break;
      case Kind::variable: st[top++] = x[op.var]; break;
      case Kind::neg: st[top - 1] = -st[top - 1]; break;
      case Kind::call: st[top - 1] = apply(op.func, st[top - 1]); break;
      case Kind::add: --top; st[top - 1] += st[top]; break;
      case Kind::sub: --top; st[top - 1] -= st[top]; break;
      case Kind::mul: --top; st[top - 1] *= st[top]; break;
      case Kind::div: --top; st[top - 1] /= st[top]; break;
      case Kind::pow: --top; st[top - 1] = std::pow(st[top - 1], st[top]); break;
      case Kind::constant: break;
    }
  }
  return st[0];
}

ChartExpression parse_chart(const std::vector<std::string>& coords, const std::vector<std::string>& variables) {
  if (coords.empty()) throw ParseError("chart needs at least one coordinate expression", 0);
  if (variables.empty()) throw ParseError("chart needs at least one variable", 0);
  ChartExpression ce;
  ce.variables = variables;
  const int k = static_cast<int>(variables.size());
  for (const std::string& text : coords) {
    Ptr e = parse(text, variables);
    std::vector<Ptr> d1;
    std::vector<std::vector<Ptr>> d2;
    for (int i = 0; i < k; ++i) {
      d1.push_back(derivative(e, i));
      std::vector<Ptr> row;
      for (int j = 0; j < k; ++j) row.push_back(derivative(d1.back(), j));
      d2.push_back(std::move(row));
    }
    ce.coords.push_back(std::move(e));
    ce.first.push_back(std::move(d1));
    ce.second.push_back(std::move(d2));
  }
  return ce;
}

std::vector<std::string> split_tuple(const std::string& text) {
  std::string s = text;
  auto trim = [](std::string v) {
    const auto b = v.find_first_not_of(" \t\n\r");
    const auto e = v.find_last_not_of(" \t\n\r");
    return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
  };
  s = trim(s);
  // Strip one pair of outer parentheses if they enclose the whole text.
  if (s.size() >= 2 && s.front() == '(' && s.back() == ')') {
    int depth = 0;
    bool encloses = true;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '(') ++depth;
      else if (s[i] == ')' && --depth == 0 && i + 1 != s.size()) encloses = false;
    }
    if (encloses) s = s.substr(1, s.size() - 2);
  }
  std::vector<std::string> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '(') ++depth;
    else if (s[i] == ')') --depth;
    else if (s[i] == ',' && depth == 0) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  out.push_back(trim(s.substr(start)));
  return out;
}

std::shared_ptr<Chart> make_chart(const ChartExpression& ce, ChartDomain domain, DerivativeMode mode, double h) {
  const int k = static_cast<int>(ce.variables.size());
  const int n = static_cast<int>(ce.coords.size());
  if (domain.dim() != k) throw std::invalid_argument("domain dimension does not match the chart variables");
  struct Compiled {
    std::vector<Program> x;
    std::vector<Program> dx;   // [coord * k + i]
    std::vector<Program> ddx;  // [(coord * k + i) * k + j]
  };
  auto c = std::make_shared<Compiled>();
  for (int a = 0; a < n; ++a) {
    c->x.emplace_back(ce.coords[static_cast<std::size_t>(a)]);
    for (int i = 0; i < k; ++i) {
      c->dx.emplace_back(ce.first[static_cast<std::size_t>(a)][static_cast<std::size_t>(i)]);
      for (int j = 0; j < k; ++j) {
        c->ddx.emplace_back(ce.second[static_cast<std::size_t>(a)][static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
      }
    }
  }
  ChartFunctions f;
  f.map = [c, n](const Vec& q) {
    Vec x(n);
    for (int a = 0; a < n; ++a) x(a) = c->x[static_cast<std::size_t>(a)](q.data());
    return x;
  };
  f.jacobian = [c, n, k](const Vec& q) {
    Mat J(n, k);
    for (int a = 0; a < n; ++a)
      for (int i = 0; i < k; ++i) J(a, i) = c->dx[static_cast<std::size_t>(a * k + i)](q.data());
    return J;
  };
  f.hessian = [c, n, k](const Vec& q) {
    SecondDerivatives H(k, n);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j)
        for (int a = 0; a < n; ++a) H(i, j)(a) = c->ddx[static_cast<std::size_t>((a * k + i) * k + j)](q.data());
    return H;
  };
  return std::make_shared<ParametricChart>(std::move(domain), n, std::move(f), mode, h);
}

}  // namespace embedflow::expr

#include "ridgemm/expr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>

namespace ridgemm {

ParseError::ParseError(const std::string& what, int line, int column)
    : std::runtime_error(what + " at line " + std::to_string(line) + ", column " +
                         std::to_string(column)),
      line_(line),
      column_(column) {}

namespace {

bool IsKink(NodeKind k) { return k == NodeKind::kAbs || k == NodeKind::kMin || k == NodeKind::kMax; }

int Arity(NodeKind k) {
  switch (k) {
    case NodeKind::kConst:
    case NodeKind::kVarX:
    case NodeKind::kVarY:
      return 0;
    case NodeKind::kNeg:
    case NodeKind::kPow:
    case NodeKind::kAbs:
      return 1;
    default:
      return 2;
  }
}

}  // namespace

ExprProgram::ExprProgram(std::vector<Node> nodes, int dim_x, int dim_y)
    : nodes_(std::move(nodes)), dim_x_(dim_x), dim_y_(dim_y) {
  if (dim_x < 0 || dim_y < 0) throw DimensionError("negative block dimension");
  if (nodes_.empty()) throw std::invalid_argument("empty expression");
  kink_ids_.assign(nodes_.size(), -1);
  std::vector<int> parents(nodes_.size(), 0);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    const int arity = Arity(n.kind);
    const int me = static_cast<int>(i);
    auto check_child = [&](int c) {
      if (c < 0 || c >= me) throw std::invalid_argument("child must precede its parent");
      ++parents[static_cast<std::size_t>(c)];
    };
    if (arity >= 1) check_child(n.lhs);
    if (arity == 2) check_child(n.rhs);
    if (n.kind == NodeKind::kVarX && (n.index < 0 || n.index >= dim_x_))
      throw DimensionError("x index " + std::to_string(n.index) + " out of range");
    if (n.kind == NodeKind::kVarY && (n.index < 0 || n.index >= dim_y_))
      throw DimensionError("y index " + std::to_string(n.index) + " out of range");
    if (n.kind == NodeKind::kPow && n.index < 1)
      throw std::invalid_argument("pow exponent must be a positive integer");
    if (IsKink(n.kind)) kink_ids_[i] = kink_count_++;
  }
  // Tree shape: every non-root node has exactly one parent.
  for (std::size_t i = 0; i + 1 < nodes_.size(); ++i) {
    if (parents[i] != 1) throw std::invalid_argument("expression nodes must form a tree");
  }
  if (parents.back() != 0) throw std::invalid_argument("root must not have a parent");
}

bool operator==(const ExprProgram& a, const ExprProgram& b) {
  if (a.dim_x_ != b.dim_x_ || a.dim_y_ != b.dim_y_) return false;
  std::function<bool(int, int)> same = [&](int i, int j) {
    const Node& p = a.nodes_[static_cast<std::size_t>(i)];
    const Node& q = b.nodes_[static_cast<std::size_t>(j)];
    if (p.kind != q.kind) return false;
    switch (p.kind) {
      case NodeKind::kConst:
        return p.value == q.value && std::signbit(p.value) == std::signbit(q.value);
      case NodeKind::kVarX:
      case NodeKind::kVarY:
        return p.index == q.index;
      case NodeKind::kPow:
        return p.index == q.index && same(p.lhs, q.lhs);
      default:
        break;
    }
    const int arity = Arity(p.kind);
    if (arity >= 1 && !same(p.lhs, q.lhs)) return false;
    if (arity == 2 && !same(p.rhs, q.rhs)) return false;
    return true;
  };
  return same(a.root(), b.root());
}

// ---------------------------------------------------------------------------
// Parser

namespace {

class Parser {
 public:
  Parser(std::string_view text, int dim_x, int dim_y) : text_(text), dim_x_(dim_x), dim_y_(dim_y) {}

  ExprProgram Run() {
    SkipSpace();
    ParseExpr();
    SkipSpace();
    if (pos_ != text_.size()) Fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return ExprProgram(std::move(nodes_), dim_x_, dim_y_);
  }

 private:
  [[noreturn]] void Fail(const std::string& msg) const { throw ParseError(msg, line_, col_); }
  [[noreturn]] void FailAt(const std::string& msg, int line, int col) const {
    throw ParseError(msg, line, col);
  }

  char Peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void Advance() {
    if (text_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void SkipSpace() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) Advance();
  }

  void Expect(char c) {
    SkipSpace();
    if (Peek() != c) {
      if (pos_ >= text_.size()) Fail(std::string("expected '") + c + "' but reached end of input");
      Fail(std::string("expected '") + c + "'");
    }
    Advance();
  }

  int Push(Node n) {
    nodes_.push_back(n);
    return static_cast<int>(nodes_.size()) - 1;
  }

  int ParseExpr() {
    int lhs = ParseTerm();
    for (;;) {
      SkipSpace();
      const char c = Peek();
      if (c != '+' && c != '-') return lhs;
      Advance();
      const int rhs = ParseTerm();
      lhs = Push({c == '+' ? NodeKind::kAdd : NodeKind::kSub, 0.0, 0, lhs, rhs});
    }
  }

  int ParseTerm() {
    int lhs = ParseFactor();
    for (;;) {
      SkipSpace();
      if (Peek() != '*') return lhs;
      Advance();
      const int rhs = ParseFactor();
      lhs = Push({NodeKind::kMul, 0.0, 0, lhs, rhs});
    }
  }

  int ParseFactor() {
    SkipSpace();
    if (Peek() == '-') {
      Advance();
      SkipSpace();
      const int child = ParseAtom();
      return Push({NodeKind::kNeg, 0.0, 0, child, -1});
    }
    return ParseAtom();
  }

  // Reads [0-9]+ ( '.' [0-9]* )? ( [eE] [+-]? [0-9]+ )?
  std::string_view ScanNumber(bool* integral) {
    const std::size_t start = pos_;
    *integral = true;
    while (std::isdigit(static_cast<unsigned char>(Peek()))) Advance();
    if (Peek() == '.') {
      *integral = false;
      Advance();
      while (std::isdigit(static_cast<unsigned char>(Peek()))) Advance();
    }
    if (Peek() == 'e' || Peek() == 'E') {
      *integral = false;
      Advance();
      if (Peek() == '+' || Peek() == '-') Advance();
      if (!std::isdigit(static_cast<unsigned char>(Peek()))) Fail("malformed exponent in number");
      while (std::isdigit(static_cast<unsigned char>(Peek()))) Advance();
    }
    return text_.substr(start, pos_ - start);
  }

  int ParseAtom() {
    SkipSpace();
    const int line = line_;
    const int col = col_;
    const char c = Peek();
    if (c == '\0') Fail("unexpected end of input");
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      if (c == '.') Fail("number must start with a digit");
      bool integral = false;
      const std::string_view tok = ScanNumber(&integral);
      double v = 0.0;
      const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (res.ec != std::errc()) FailAt("invalid number '" + std::string(tok) + "'", line, col);
      return Push({NodeKind::kConst, v, 0, -1, -1});
    }
    if (c == '(') {
      Advance();
      const int inner = ParseExpr();
      Expect(')');
      return inner;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (std::isalpha(static_cast<unsigned char>(Peek()))) Advance();
      const std::string_view word = text_.substr(start, pos_ - start);
      if (word == "x" || word == "y") {
        if (!std::isdigit(static_cast<unsigned char>(Peek())))
          Fail("expected variable index after '" + std::string(word) + "'");
        const std::size_t istart = pos_;
        while (std::isdigit(static_cast<unsigned char>(Peek()))) Advance();
        int idx = 0;
        const std::string_view digits = text_.substr(istart, pos_ - istart);
        const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), idx);
        if (res.ec != std::errc()) FailAt("variable index too large", line, col);
        const bool is_x = word == "x";
        const int dim = is_x ? dim_x_ : dim_y_;
        if (idx >= dim) {
          FailAt("variable " + std::string(word) + std::to_string(idx) + " out of range (dimension " +
                     std::to_string(dim) + ")",
                 line, col);
        }
        return Push({is_x ? NodeKind::kVarX : NodeKind::kVarY, 0.0, idx, -1, -1});
      }
      if (word == "abs") {
        Expect('(');
        const int a = ParseExpr();
        Expect(')');
        return Push({NodeKind::kAbs, 0.0, 0, a, -1});
      }
      if (word == "min" || word == "max") {
        Expect('(');
        const int a = ParseExpr();
        Expect(',');
        const int b = ParseExpr();
        Expect(')');
        return Push({word == "min" ? NodeKind::kMin : NodeKind::kMax, 0.0, 0, a, b});
      }
      if (word == "pow") {
        Expect('(');
        const int a = ParseExpr();
        Expect(',');
        SkipSpace();
        const int eline = line_;
        const int ecol = col_;
        if (Peek() == '-') FailAt("pow exponent must be a positive integer", eline, ecol);
        if (!std::isdigit(static_cast<unsigned char>(Peek())))
          FailAt("expected integer exponent", eline, ecol);
        bool integral = false;
        const std::string_view tok = ScanNumber(&integral);
        if (!integral) FailAt("non-integer exponent '" + std::string(tok) + "'", eline, ecol);
        int e = 0;
        const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), e);
        if (res.ec != std::errc() || e < 1)
          FailAt("pow exponent must be a positive integer", eline, ecol);
        Expect(')');
        return Push({NodeKind::kPow, 0.0, e, a, -1});
      }
      FailAt("unknown identifier '" + std::string(word) + "'", line, col);
    }
    Fail("unexpected '" + std::string(1, c) + "'");
  }

  std::string_view text_;
  int dim_x_;
  int dim_y_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
  std::vector<Node> nodes_;
};

// Precedence levels used by the printer: 0 sum, 1 product, 2 factor, 3 atom.
int Level(const Node& n) {
  switch (n.kind) {
    case NodeKind::kAdd:
    case NodeKind::kSub:
      return 0;
    case NodeKind::kMul:
      return 1;
    case NodeKind::kNeg:
      return 2;
    case NodeKind::kConst:
      return std::signbit(n.value) ? 2 : 3;
    default:
      return 3;
  }
}

std::string FormatNumber(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

ExprProgram parse(std::string_view text, int dim_x, int dim_y) {
  return Parser(text, dim_x, dim_y).Run();
}

std::string print(const ExprProgram& prog) {
  const auto nodes = prog.nodes();
  std::function<std::string(int, int)> render = [&](int id, int ctx) -> std::string {
    const Node& n = nodes[static_cast<std::size_t>(id)];
    std::string s;
    switch (n.kind) {
      case NodeKind::kConst:
        s = std::signbit(n.value) ? "-" + FormatNumber(-n.value) : FormatNumber(n.value);
        break;
      case NodeKind::kVarX:
        s = "x" + std::to_string(n.index);
        break;
      case NodeKind::kVarY:
        s = "y" + std::to_string(n.index);
        break;
      case NodeKind::kAdd:
        s = render(n.lhs, 0) + " + " + render(n.rhs, 1);
        break;
      case NodeKind::kSub:
        s = render(n.lhs, 0) + " - " + render(n.rhs, 1);
        break;
      case NodeKind::kMul:
        s = render(n.lhs, 1) + "*" + render(n.rhs, 2);
        break;
      case NodeKind::kNeg:
        s = "-" + render(n.lhs, 3);
        break;
      case NodeKind::kPow:
        s = "pow(" + render(n.lhs, 0) + ", " + std::to_string(n.index) + ")";
        break;
      case NodeKind::kAbs:
        s = "abs(" + render(n.lhs, 0) + ")";
        break;
      case NodeKind::kMin:
        s = "min(" + render(n.lhs, 0) + ", " + render(n.rhs, 0) + ")";
        break;
      case NodeKind::kMax:
        s = "max(" + render(n.lhs, 0) + ", " + render(n.rhs, 0) + ")";
        break;
    }
    if (Level(n) < ctx) s = "(" + s + ")";
    return s;
  };
  return render(prog.root(), 0);
}

// ---------------------------------------------------------------------------
// Evaluation and differentiation

namespace {

void CheckDims(const ExprProgram& prog, const Vec& x, const Vec& y) {
  if (x.size() != prog.dim_x() || y.size() != prog.dim_y()) {
    throw DimensionError("point has dims (" + std::to_string(x.size()) + ", " +
                         std::to_string(y.size()) + "), program expects (" +
                         std::to_string(prog.dim_x()) + ", " + std::to_string(prog.dim_y()) + ")");
  }
}

double IntPow(double base, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

std::vector<double> Forward(const ExprProgram& prog, const Vec& x, const Vec& y) {
  const auto nodes = prog.nodes();
  std::vector<double> val(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& n = nodes[i];
    auto a = [&] { return val[static_cast<std::size_t>(n.lhs)]; };
    auto b = [&] { return val[static_cast<std::size_t>(n.rhs)]; };
    switch (n.kind) {
      case NodeKind::kConst: val[i] = n.value; break;
      case NodeKind::kVarX: val[i] = x[n.index]; break;
      case NodeKind::kVarY: val[i] = y[n.index]; break;
      case NodeKind::kAdd: val[i] = a() + b(); break;
      case NodeKind::kSub: val[i] = a() - b(); break;
      case NodeKind::kMul: val[i] = a() * b(); break;
      case NodeKind::kNeg: val[i] = -a(); break;
      case NodeKind::kPow: val[i] = IntPow(a(), n.index); break;
      case NodeKind::kAbs: val[i] = std::fabs(a()); break;
      case NodeKind::kMin: val[i] = std::min(a(), b()); break;
      case NodeKind::kMax: val[i] = std::max(a(), b()); break;
    }
  }
  return val;
}

// Kink argument: the child of abs, or lhs - rhs for min/max.
std::vector<double> KinkArgs(const ExprProgram& prog, const std::vector<double>& val) {
  std::vector<double> args(static_cast<std::size_t>(prog.kink_count()));
  const auto nodes = prog.nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const int k = prog.kink_id(static_cast<int>(i));
    if (k < 0) continue;
    const Node& n = nodes[i];
    args[static_cast<std::size_t>(k)] =
        n.kind == NodeKind::kAbs ? val[static_cast<std::size_t>(n.lhs)]
                                 : val[static_cast<std::size_t>(n.lhs)] - val[static_cast<std::size_t>(n.rhs)];
  }
  return args;
}

// Reverse sweep with one sign per kink. min/max use the abs identities
// min(a,b) = (a + b - |a-b|)/2 and max(a,b) = (a + b + |a-b|)/2.
void Backward(const ExprProgram& prog, const std::vector<double>& val, const std::vector<double>& signs,
              Vec* u, Vec* v) {
  const auto nodes = prog.nodes();
  std::vector<double> adj(nodes.size(), 0.0);
  adj.back() = 1.0;
  u->setZero(prog.dim_x());
  v->setZero(prog.dim_y());
  for (std::size_t ii = nodes.size(); ii-- > 0;) {
    const Node& n = nodes[ii];
    const double g = adj[ii];
    if (g == 0.0) continue;
    const auto l = static_cast<std::size_t>(n.lhs);
    const auto r = static_cast<std::size_t>(n.rhs);
    switch (n.kind) {
      case NodeKind::kConst: break;
      case NodeKind::kVarX: (*u)[n.index] += g; break;
      case NodeKind::kVarY: (*v)[n.index] += g; break;
      case NodeKind::kAdd: adj[l] += g; adj[r] += g; break;
      case NodeKind::kSub: adj[l] += g; adj[r] -= g; break;
      case NodeKind::kMul: adj[l] += g * val[r]; adj[r] += g * val[l]; break;
      case NodeKind::kNeg: adj[l] -= g; break;
      case NodeKind::kPow: adj[l] += g * n.index * IntPow(val[l], n.index - 1); break;
      case NodeKind::kAbs: {
        const double s = signs[static_cast<std::size_t>(prog.kink_id(static_cast<int>(ii)))];
        adj[l] += g * s;
        break;
      }
      case NodeKind::kMin: {
        const double s = signs[static_cast<std::size_t>(prog.kink_id(static_cast<int>(ii)))];
        adj[l] += g * 0.5 * (1.0 - s);
        adj[r] += g * 0.5 * (1.0 + s);
        break;
      }
      case NodeKind::kMax: {
        const double s = signs[static_cast<std::size_t>(prog.kink_id(static_cast<int>(ii)))];
        adj[l] += g * 0.5 * (1.0 + s);
        adj[r] += g * 0.5 * (1.0 - s);
        break;
      }
    }
  }
}

double PolicySign(TiePolicy p) {
  switch (p) {
    case TiePolicy::kLeft: return -1.0;
    case TiePolicy::kRight: return 1.0;
    case TiePolicy::kZero: return 0.0;
  }
  return 0.0;
}

char SignChar(double s) { return s < 0 ? '-' : (s > 0 ? '+' : '0'); }

}  // namespace

double eval(const ExprProgram& prog, const Vec& x, const Vec& y) {
  CheckDims(prog, x, y);
  return Forward(prog, x, y).back();
}

int active_kink_count(const ExprProgram& prog, const Vec& x, const Vec& y, double kink_eps) {
  CheckDims(prog, x, y);
  const auto args = KinkArgs(prog, Forward(prog, x, y));
  return static_cast<int>(
      std::count_if(args.begin(), args.end(), [&](double a) { return std::fabs(a) <= kink_eps; }));
}

GradElement grad_select(const ExprProgram& prog, const Vec& x, const Vec& y, TiePolicy policy,
                        double kink_eps) {
  CheckDims(prog, x, y);
  const auto val = Forward(prog, x, y);
  const auto args = KinkArgs(prog, val);
  std::vector<double> signs(args.size());
  GradElement out;
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (std::fabs(args[k]) <= kink_eps) {
      signs[k] = PolicySign(policy);
      out.branch_id.push_back(SignChar(signs[k]));
    } else {
      signs[k] = args[k] > 0 ? 1.0 : -1.0;
    }
  }
  Backward(prog, val, signs, &out.u, &out.v);
  return out;
}

SubdiffSample subdiff_sample(const ExprProgram& prog, const Vec& x, const Vec& y,
                             std::size_t max_branches, double kink_eps) {
  if (max_branches < 1) throw std::invalid_argument("max_branches must be >= 1");
  CheckDims(prog, x, y);
  const auto val = Forward(prog, x, y);
  const auto args = KinkArgs(prog, val);

  std::vector<std::size_t> active;
  std::vector<double> signs(args.size());
  for (std::size_t k = 0; k < args.size(); ++k) {
    if (std::fabs(args[k]) <= kink_eps) {
      active.push_back(k);
    } else {
      signs[k] = args[k] > 0 ? 1.0 : -1.0;
    }
  }

  SubdiffSample out;
  out.active_kinks = static_cast<int>(active.size());
  const std::size_t m = active.size();
  std::vector<std::uint64_t> patterns;
  const bool fits = m < 63 && (std::uint64_t{1} << m) <= max_branches;
  if (fits) {
    const std::uint64_t total = std::uint64_t{1} << m;
    for (std::uint64_t b = 0; b < total; ++b) patterns.push_back(b);
  } else {
    out.incomplete = true;
    const std::uint64_t all_plus = m >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << m) - 1;
    for (std::uint64_t b = 0; b + 1 < max_branches; ++b) patterns.push_back(b);
    patterns.push_back(all_plus);
  }

  for (const std::uint64_t b : patterns) {
    GradElement e;
    for (std::size_t t = 0; t < m; ++t) {
      const bool plus = t < 64 && ((b >> t) & 1U);
      signs[active[t]] = plus ? 1.0 : -1.0;
      e.branch_id.push_back(plus ? '+' : '-');
    }
    Backward(prog, val, signs, &e.u, &e.v);
    const bool dup = std::any_of(out.elements.begin(), out.elements.end(), [&](const GradElement& o) {
      return o.u == e.u && o.v == e.v;
    });
    if (!dup) out.elements.push_back(std::move(e));
  }
  return out;
}

namespace {

std::vector<int> KinkSigns(const ExprProgram& prog, const Vec& x, const Vec& y) {
  const auto args = KinkArgs(prog, Forward(prog, x, y));
  std::vector<int> s(args.size());
  for (std::size_t k = 0; k < args.size(); ++k) s[k] = args[k] > 0 ? 1 : (args[k] < 0 ? -1 : 0);
  return s;
}

}  // namespace

bool crosses_kink(const ExprProgram& prog, const Vec& x, const Vec& y, double h) {
  CheckDims(prog, x, y);
  const auto center = KinkSigns(prog, x, y);
  if (std::find(center.begin(), center.end(), 0) != center.end()) return true;
  for (int i = 0; i < prog.dim_x() + prog.dim_y(); ++i) {
    for (const double step : {-h, h}) {
      Vec xs = x;
      Vec ys = y;
      if (i < prog.dim_x()) {
        xs[i] += step;
      } else {
        ys[i - prog.dim_x()] += step;
      }
      if (KinkSigns(prog, xs, ys) != center) return true;
    }
  }
  return false;
}

double fd_check(const ExprProgram& prog, const Vec& x, const Vec& y, double h) {
  const GradElement g = grad_select(prog, x, y, TiePolicy::kZero);
  const int p = prog.dim_x();
  const int n = p + prog.dim_y();
  Vec full(n);
  full << g.u, g.v;
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    Vec xp = x, xm = x, yp = y, ym = y;
    if (i < p) {
      xp[i] += h;
      xm[i] -= h;
    } else {
      yp[i - p] += h;
      ym[i - p] -= h;
    }
    const double fd = (eval(prog, xp, yp) - eval(prog, xm, ym)) / (2.0 * h);
    worst = std::max(worst, std::fabs(fd - full[i]));
  }
  return worst / std::max(1.0, full.lpNorm<Eigen::Infinity>());
}

}  // namespace ridgemm

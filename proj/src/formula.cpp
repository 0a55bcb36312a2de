#include "stlmon/formula.hpp"

#include <algorithm>
#include <charconv>
#include <unordered_map>

namespace stlmon {

bool Formula::is_unary() const {
  switch (kind) {
    case Kind::Not:
    case Kind::Next:
    case Kind::WeakNext:
    case Kind::Eventually:
    case Kind::Globally:
    case Kind::Yesterday:
    case Kind::WeakYesterday:
    case Kind::Once:
    case Kind::Historically:
      return true;
    default:
      return false;
  }
}

bool Formula::is_binary() const {
  switch (kind) {
    case Kind::And:
    case Kind::Or:
    case Kind::Until:
    case Kind::Release:
    case Kind::Since:
    case Kind::Triggers:
      return true;
    default:
      return false;
  }
}

bool Formula::has_interval() const {
  switch (kind) {
    case Kind::Until:
    case Kind::Release:
    case Kind::Eventually:
    case Kind::Globally:
    case Kind::Since:
    case Kind::Triggers:
    case Kind::Once:
    case Kind::Historically:
      return true;
    default:
      return false;
  }
}

bool is_future_kind(Kind k) {
  switch (k) {
    case Kind::Next:
    case Kind::WeakNext:
    case Kind::Until:
    case Kind::Release:
    case Kind::Eventually:
    case Kind::Globally:
      return true;
    default:
      return false;
  }
}

bool is_temporal_kind(Kind k) {
  switch (k) {
    case Kind::Not:
    case Kind::And:
    case Kind::Or:
    case Kind::True:
    case Kind::Atom:
      return false;
    default:
      return true;
  }
}

FormulaPtr f_true() {
  static const FormulaPtr t = std::make_shared<Formula>(Formula{Kind::True, {}, {}, nullptr, nullptr});
  return t;
}

FormulaPtr f_atom(Atom a) {
  if (a.terms.empty()) throw std::invalid_argument("atom needs at least one term");
  return std::make_shared<Formula>(Formula{Kind::Atom, std::move(a), {}, nullptr, nullptr});
}

FormulaPtr f_atom(std::string var, int index, Cmp cmp, double threshold) {
  Atom a;
  a.terms.push_back({std::move(var), index, 1.0});
  a.cmp = cmp;
  a.threshold = threshold;
  return f_atom(std::move(a));
}

FormulaPtr f_not(FormulaPtr a) {
  return std::make_shared<Formula>(Formula{Kind::Not, {}, {}, std::move(a), nullptr});
}

FormulaPtr f_and(FormulaPtr a, FormulaPtr b) {
  return std::make_shared<Formula>(Formula{Kind::And, {}, {}, std::move(a), std::move(b)});
}

FormulaPtr f_or(FormulaPtr a, FormulaPtr b) {
  return std::make_shared<Formula>(Formula{Kind::Or, {}, {}, std::move(a), std::move(b)});
}

FormulaPtr f_unary(Kind k, FormulaPtr a, Interval i) {
  Formula f{k, {}, i, std::move(a), nullptr};
  if (!f.is_unary()) throw std::invalid_argument("not a unary kind");
  return std::make_shared<Formula>(std::move(f));
}

FormulaPtr f_binary(Kind k, FormulaPtr a, FormulaPtr b, Interval i) {
  Formula f{k, {}, i, std::move(a), std::move(b)};
  if (!f.is_binary()) throw std::invalid_argument("not a binary kind");
  return std::make_shared<Formula>(std::move(f));
}

std::size_t formula_size(const Formula& f) {
  std::size_t s = 1;
  if (f.lhs) s += formula_size(*f.lhs);
  if (f.rhs) s += formula_size(*f.rhs);
  return s;
}

std::size_t formula_height(const Formula& f) {
  std::size_t h = 0;
  if (f.lhs) h = formula_height(*f.lhs);
  if (f.rhs) h = std::max(h, formula_height(*f.rhs));
  return h + 1;
}

namespace {

bool pure_past(const Formula& f) {
  if (is_future_kind(f.kind)) return false;
  if (f.lhs && !pure_past(*f.lhs)) return false;
  if (f.rhs && !pure_past(*f.rhs)) return false;
  return true;
}

}  // namespace

Fragment fragment_of(const Formula& f) {
  if (pure_past(f)) return Fragment::PurePast;
  if (f.kind == Kind::Globally && f.interval.is_default() && pure_past(*f.lhs))
    return Fragment::SafetyG;
  if (f.kind == Kind::Eventually && f.interval.is_default() && pure_past(*f.lhs))
    return Fragment::CosafetyF;
  return Fragment::Full;
}

FormulaPtr rewrite_to_core(const FormulaPtr& f) {
  const Formula& n = *f;
  switch (n.kind) {
    case Kind::True:
      return f;
    case Kind::Atom: {
      // f < c  ->  !(f >= c);  f <= c  ->  -f >= -c;  f > c  ->  !(-f >= -c)
      if (n.atom.cmp == Cmp::Ge) return f;
      Atom a = n.atom;
      a.cmp = Cmp::Ge;
      if (n.atom.cmp == Cmp::Le || n.atom.cmp == Cmp::Gt) {
        for (auto& t : a.terms) t.weight = -t.weight;
        a.threshold = -a.threshold;
      }
      FormulaPtr core = f_atom(std::move(a));
      if (n.atom.cmp == Cmp::Lt || n.atom.cmp == Cmp::Gt) core = f_not(core);
      return core;
    }
    case Kind::Not: {
      auto c = rewrite_to_core(n.lhs);
      return f_not(c);
    }
    case Kind::Or:
      return f_or(rewrite_to_core(n.lhs), rewrite_to_core(n.rhs));
    case Kind::And:
      return f_not(f_or(f_not(rewrite_to_core(n.lhs)), f_not(rewrite_to_core(n.rhs))));
    case Kind::Next:
      return f_unary(Kind::Next, rewrite_to_core(n.lhs));
    case Kind::WeakNext:
      return f_not(f_unary(Kind::Next, f_not(rewrite_to_core(n.lhs))));
    case Kind::Yesterday:
      return f_unary(Kind::Yesterday, rewrite_to_core(n.lhs));
    case Kind::WeakYesterday:
      return f_not(f_unary(Kind::Yesterday, f_not(rewrite_to_core(n.lhs))));
    case Kind::Until:
      return f_binary(Kind::Until, rewrite_to_core(n.lhs), rewrite_to_core(n.rhs), n.interval);
    case Kind::Since:
      return f_binary(Kind::Since, rewrite_to_core(n.lhs), rewrite_to_core(n.rhs), n.interval);
    case Kind::Release:
      return f_not(f_binary(Kind::Until, f_not(rewrite_to_core(n.lhs)),
                            f_not(rewrite_to_core(n.rhs)), n.interval));
    case Kind::Triggers:
      return f_not(f_binary(Kind::Since, f_not(rewrite_to_core(n.lhs)),
                            f_not(rewrite_to_core(n.rhs)), n.interval));
    case Kind::Eventually:
      return f_binary(Kind::Until, f_true(), rewrite_to_core(n.lhs), n.interval);
    case Kind::Globally:
      return f_not(f_binary(Kind::Until, f_true(), f_not(rewrite_to_core(n.lhs)), n.interval));
    case Kind::Once:
      return f_binary(Kind::Since, f_true(), rewrite_to_core(n.lhs), n.interval);
    case Kind::Historically:
      return f_not(f_binary(Kind::Since, f_true(), f_not(rewrite_to_core(n.lhs)), n.interval));
  }
  throw std::logic_error("unreachable");
}

FormulaPtr safety_wrap(const FormulaPtr& f) {
  if (fragment_of(*f) != Fragment::PurePast)
    throw std::invalid_argument("safety_wrap requires a pure-past formula");
  return f_unary(Kind::Globally, f_not(f));
}

FormulaPtr bind_variables(const FormulaPtr& f, const std::vector<std::string>& names) {
  const Formula& n = *f;
  if (n.kind == Kind::Atom) {
    Atom a = n.atom;
    for (auto& t : a.terms) {
      auto it = std::find(names.begin(), names.end(), t.var);
      if (it == names.end()) throw std::invalid_argument("unknown variable name: " + t.var);
      t.index = static_cast<int>(it - names.begin());
    }
    return f_atom(std::move(a));
  }
  FormulaPtr l = n.lhs ? bind_variables(n.lhs, names) : nullptr;
  FormulaPtr r = n.rhs ? bind_variables(n.rhs, names) : nullptr;
  if (l == n.lhs && r == n.rhs) return f;
  return std::make_shared<Formula>(Formula{n.kind, {}, n.interval, std::move(l), std::move(r)});
}

int max_var_index(const Formula& f) {
  int mx = -1;
  if (f.kind == Kind::Atom)
    for (const auto& t : f.atom.terms) mx = std::max(mx, t.index);
  if (f.lhs) mx = std::max(mx, max_var_index(*f.lhs));
  if (f.rhs) mx = std::max(mx, max_var_index(*f.rhs));
  return mx;
}

bool equal(const Formula& a, const Formula& b) {
  if (a.kind != b.kind) return false;
  if (a.has_interval() && a.interval != b.interval) return false;
  if (a.kind == Kind::Atom) {
    if (a.atom.cmp != b.atom.cmp || a.atom.threshold != b.atom.threshold ||
        a.atom.terms.size() != b.atom.terms.size())
      return false;
    for (std::size_t i = 0; i < a.atom.terms.size(); ++i) {
      const auto& x = a.atom.terms[i];
      const auto& y = b.atom.terms[i];
      if (x.var != y.var || x.weight != y.weight) return false;
    }
  }
  if (static_cast<bool>(a.lhs) != static_cast<bool>(b.lhs)) return false;
  if (static_cast<bool>(a.rhs) != static_cast<bool>(b.rhs)) return false;
  if (a.lhs && !equal(*a.lhs, *b.lhs)) return false;
  if (a.rhs && !equal(*a.rhs, *b.rhs)) return false;
  return true;
}

std::string format_number(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::string interval_suffix(const Interval& i) {
  if (i.is_default()) return "";
  std::string s = "[" + std::to_string(i.lo) + ",";
  s += i.unbounded() ? "inf" : std::to_string(i.hi);
  return s + "]";
}

std::string unary_op(Kind k) {
  switch (k) {
    case Kind::Not: return "!";
    case Kind::Next: return "X";
    case Kind::WeakNext: return "wX";
    case Kind::Eventually: return "F";
    case Kind::Globally: return "G";
    case Kind::Yesterday: return "Y";
    case Kind::WeakYesterday: return "wY";
    case Kind::Once: return "O";
    case Kind::Historically: return "H";
    default: throw std::logic_error("not unary");
  }
}

std::string binary_op(Kind k) {
  switch (k) {
    case Kind::And: return "&";
    case Kind::Or: return "|";
    case Kind::Until: return "U";
    case Kind::Release: return "R";
    case Kind::Since: return "S";
    case Kind::Triggers: return "T";
    default: throw std::logic_error("not binary");
  }
}

std::string print_atom(const Atom& a) {
  std::string s;
  for (std::size_t i = 0; i < a.terms.size(); ++i) {
    const auto& t = a.terms[i];
    double w = t.weight;
    if (i == 0) {
      if (w < 0) { s += "-"; w = -w; }
    } else {
      s += w < 0 ? " - " : " + ";
      if (w < 0) w = -w;
    }
    if (w != 1.0) s += format_number(w) + " * ";
    s += t.var;
  }
  switch (a.cmp) {
    case Cmp::Ge: s += " >= "; break;
    case Cmp::Gt: s += " > "; break;
    case Cmp::Le: s += " <= "; break;
    case Cmp::Lt: s += " < "; break;
  }
  return s + format_number(a.threshold);
}

}  // namespace

std::string print(const Formula& f) {
  switch (f.kind) {
    case Kind::True:
      return "TRUE";
    case Kind::Atom:
      return print_atom(f.atom);
    default:
      break;
  }
  if (f.is_unary()) {
    std::string op = unary_op(f.kind);
    if (f.has_interval()) op += interval_suffix(f.interval);
    return op + "(" + print(*f.lhs) + ")";
  }
  std::string op = binary_op(f.kind);
  if (f.has_interval()) op += interval_suffix(f.interval);
  return "(" + print(*f.lhs) + " " + op + " " + print(*f.rhs) + ")";
}

std::string print(const FormulaPtr& f) { return print(*f); }

// ---------------------------------------------------------------------------
// Parser: recursive descent over the published grammar.
// Precedence (loosest to tightest): | , & , binary temporal {U R S T}, unary.
// ---------------------------------------------------------------------------

namespace {

enum class Tok {
  End, Ident, Number, LParen, RParen, LBracket, RBracket, Comma,
  And, Or, Not, Star, Plus, Minus, Ge, Gt, Le, Lt,
};

struct Token {
  Tok type;
  std::string text;
  double num = 0.0;
  int line = 1, col = 1;
};

struct Lexer {
  const std::string& src;
  std::size_t pos = 0;
  int line = 1, col = 1;

  explicit Lexer(const std::string& s) : src(s) {}

  void advance(std::size_t n) {
    for (std::size_t i = 0; i < n && pos < src.size(); ++i, ++pos) {
      if (src[pos] == '\n') { ++line; col = 1; } else { ++col; }
    }
  }

  Token next() {
    while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) advance(1);
    Token t;
    t.line = line;
    t.col = col;
    if (pos >= src.size()) { t.type = Tok::End; return t; }
    char c = src[pos];
    auto one = [&](Tok ty) { t.type = ty; advance(1); return t; };
    switch (c) {
      case '(': return one(Tok::LParen);
      case ')': return one(Tok::RParen);
      case '[': return one(Tok::LBracket);
      case ']': return one(Tok::RBracket);
      case ',': return one(Tok::Comma);
      case '&': return one(Tok::And);
      case '|': return one(Tok::Or);
      case '!': return one(Tok::Not);
      case '*': return one(Tok::Star);
      case '+': return one(Tok::Plus);
      case '-': return one(Tok::Minus);
      case '>':
      case '<': {
        bool eq = pos + 1 < src.size() && src[pos + 1] == '=';
        t.type = c == '>' ? (eq ? Tok::Ge : Tok::Gt) : (eq ? Tok::Le : Tok::Lt);
        advance(eq ? 2 : 1);
        return t;
      }
      default:
        break;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = src.data() + pos;
      const char* end = src.data() + src.size();
      double v;
      auto res = std::from_chars(begin, end, v);
      if (res.ec != std::errc{}) throw ParseError("bad number", line, col);
      t.type = Tok::Number;
      t.num = v;
      t.text.assign(begin, res.ptr);
      advance(static_cast<std::size_t>(res.ptr - begin));
      return t;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos;
      while (pos < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_'))
        advance(1);
      t.type = Tok::Ident;
      t.text = src.substr(start, pos - start);
      return t;
    }
    throw ParseError(std::string("unexpected character '") + c + "'", line, col);
  }
};

bool reserved_unary(const std::string& s, Kind& k) {
  static const std::unordered_map<std::string, Kind> m = {
      {"X", Kind::Next}, {"wX", Kind::WeakNext}, {"Y", Kind::Yesterday},
      {"wY", Kind::WeakYesterday}, {"F", Kind::Eventually}, {"G", Kind::Globally},
      {"O", Kind::Once}, {"H", Kind::Historically}};
  auto it = m.find(s);
  if (it == m.end()) return false;
  k = it->second;
  return true;
}

bool reserved_binary(const std::string& s, Kind& k) {
  static const std::unordered_map<std::string, Kind> m = {
      {"U", Kind::Until}, {"R", Kind::Release}, {"S", Kind::Since}, {"T", Kind::Triggers}};
  auto it = m.find(s);
  if (it == m.end()) return false;
  k = it->second;
  return true;
}

bool is_reserved(const std::string& s) {
  Kind k;
  return s == "TRUE" || reserved_unary(s, k) || reserved_binary(s, k);
}

struct Parser {
  Lexer lex;
  Token cur;

  explicit Parser(const std::string& s) : lex(s) { cur = lex.next(); }

  [[noreturn]] void fail(const std::string& msg) { throw ParseError(msg, cur.line, cur.col); }

  Token eat(Tok ty, const char* what) {
    if (cur.type != ty) fail(std::string("expected ") + what);
    Token t = cur;
    cur = lex.next();
    return t;
  }

  Interval interval_opt() {
    Interval i;
    if (cur.type != Tok::LBracket) return i;
    eat(Tok::LBracket, "[");
    Token lo = eat(Tok::Number, "interval lower bound");
    if (lo.num != static_cast<std::uint32_t>(lo.num)) fail("interval bound must be a natural");
    i.lo = static_cast<std::uint32_t>(lo.num);
    eat(Tok::Comma, ",");
    if (cur.type == Tok::Ident && cur.text == "inf") {
      i.hi = Interval::inf;
      cur = lex.next();
    } else {
      Token hi = eat(Tok::Number, "interval upper bound");
      if (hi.num != static_cast<std::uint32_t>(hi.num)) fail("interval bound must be a natural");
      i.hi = static_cast<std::uint32_t>(hi.num);
    }
    if (!i.unbounded() && i.lo > i.hi) fail("malformed interval: lower bound exceeds upper bound");
    eat(Tok::RBracket, "]");
    return i;
  }

  FormulaPtr formula() { return or_expr(); }

  FormulaPtr or_expr() {
    FormulaPtr l = and_expr();
    while (cur.type == Tok::Or) {
      cur = lex.next();
      l = f_or(l, and_expr());
    }
    return l;
  }

  FormulaPtr and_expr() {
    FormulaPtr l = temporal();
    while (cur.type == Tok::And) {
      cur = lex.next();
      l = f_and(l, temporal());
    }
    return l;
  }

  FormulaPtr temporal() {
    FormulaPtr l = unary();
    Kind k;
    while (cur.type == Tok::Ident && reserved_binary(cur.text, k)) {
      cur = lex.next();
      Interval i = interval_opt();
      l = f_binary(k, l, unary(), i);
    }
    return l;
  }

  FormulaPtr unary() {
    if (cur.type == Tok::Not) {
      cur = lex.next();
      return f_not(unary());
    }
    Kind k;
    if (cur.type == Tok::Ident && reserved_unary(cur.text, k)) {
      cur = lex.next();
      Interval i = interval_opt();
      return f_unary(k, unary(), i);
    }
    return primary();
  }

  FormulaPtr primary() {
    if (cur.type == Tok::LParen) {
      cur = lex.next();
      FormulaPtr f = formula();
      eat(Tok::RParen, ")");
      return f;
    }
    if (cur.type == Tok::Ident && cur.text == "TRUE") {
      cur = lex.next();
      return f_true();
    }
    return atom();
  }

  // term := ['-'] (NUMBER '*' IDENT | IDENT)
  Atom::Term term(bool negated) {
    Atom::Term t;
    t.weight = negated ? -1.0 : 1.0;
    if (cur.type == Tok::Number) {
      t.weight *= cur.num;
      cur = lex.next();
      eat(Tok::Star, "*");
    }
    Token id = eat(Tok::Ident, "variable name");
    if (is_reserved(id.text)) throw ParseError("reserved word used as variable: " + id.text, id.line, id.col);
    t.var = id.text;
    return t;
  }

  FormulaPtr atom() {
    if (cur.type != Tok::Ident && cur.type != Tok::Number && cur.type != Tok::Minus)
      fail("expected formula");
    Atom a;
    bool neg = cur.type == Tok::Minus;
    if (neg) cur = lex.next();
    a.terms.push_back(term(neg));
    while (cur.type == Tok::Plus || cur.type == Tok::Minus) {
      bool minus = cur.type == Tok::Minus;
      cur = lex.next();
      a.terms.push_back(term(minus));
    }
    switch (cur.type) {
      case Tok::Ge: a.cmp = Cmp::Ge; break;
      case Tok::Gt: a.cmp = Cmp::Gt; break;
      case Tok::Le: a.cmp = Cmp::Le; break;
      case Tok::Lt: a.cmp = Cmp::Lt; break;
      default: fail("expected comparison operator");
    }
    cur = lex.next();
    bool tneg = cur.type == Tok::Minus;
    if (tneg) cur = lex.next();
    Token n = eat(Tok::Number, "threshold");
    a.threshold = tneg ? -n.num : n.num;
    return f_atom(std::move(a));
  }
};

}  // namespace

namespace {

void collect_names(const Formula& f, std::vector<std::string>& names) {
  if (f.kind == Kind::Atom)
    for (const auto& t : f.atom.terms)
      if (std::find(names.begin(), names.end(), t.var) == names.end()) names.push_back(t.var);
  if (f.lhs) collect_names(*f.lhs, names);
  if (f.rhs) collect_names(*f.rhs, names);
}

}  // namespace

FormulaPtr parse(const std::string& text) {
  Parser p(text);
  FormulaPtr f = p.formula();
  if (p.cur.type != Tok::End) p.fail("trailing input");
  // without a header to bind against, indices follow first appearance
  std::vector<std::string> names;
  collect_names(*f, names);
  return names.empty() ? f : bind_variables(f, names);
}

FormulaPtr parse(const std::string& text, const std::vector<std::string>& variables) {
  Parser p(text);
  FormulaPtr f = p.formula();
  if (p.cur.type != Tok::End) p.fail("trailing input");
  try {
    return bind_variables(f, variables);
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what(), 1, 1);
  }
}

}  // namespace stlmon

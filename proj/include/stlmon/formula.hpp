#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace stlmon {

/// Discrete time interval [lo, hi], hi may be infinity.
struct Interval {
  static constexpr std::uint32_t inf = std::numeric_limits<std::uint32_t>::max();

  std::uint32_t lo = 0;
  std::uint32_t hi = inf;

  bool unbounded() const { return hi == inf; }
  bool is_default() const { return lo == 0 && hi == inf; }

  friend bool operator==(const Interval&, const Interval&) = default;
};

enum class Cmp { Ge, Gt, Le, Lt };

/// Linear-inequality atom: sum of weighted variables compared to a threshold.
/// Canonical form is ">="; the other comparators survive parsing and are
/// eliminated by rewrite_to_core.
struct Atom {
  struct Term {
    std::string var;    // variable name as written
    int index = -1;     // column index, -1 until bound to a header
    double weight = 1.0;
  };

  std::vector<Term> terms;
  Cmp cmp = Cmp::Ge;
  double threshold = 0.0;
};

enum class Kind {
  True,
  Atom,
  Not,
  And,
  Or,
  Next,
  WeakNext,
  Until,
  Release,
  Eventually,
  Globally,
  Yesterday,
  WeakYesterday,
  Since,
  Triggers,
  Once,
  Historically,
};

enum class Fragment { PurePast, SafetyG, CosafetyF, Full };

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

/// Immutable STL formula node. Shared freely between threads.
struct Formula {
  Kind kind;
  Atom atom;          // Kind::Atom only
  Interval interval;  // temporal kinds only
  FormulaPtr lhs;     // first child
  FormulaPtr rhs;     // second child (binary kinds)

  bool is_unary() const;
  bool is_binary() const;
  bool has_interval() const;
};

FormulaPtr f_true();
FormulaPtr f_atom(Atom a);
FormulaPtr f_atom(std::string var, int index, Cmp cmp, double threshold);
FormulaPtr f_not(FormulaPtr a);
FormulaPtr f_and(FormulaPtr a, FormulaPtr b);
FormulaPtr f_or(FormulaPtr a, FormulaPtr b);
FormulaPtr f_unary(Kind k, FormulaPtr a, Interval i = {});
FormulaPtr f_binary(Kind k, FormulaPtr a, FormulaPtr b, Interval i = {});

bool is_future_kind(Kind k);
bool is_temporal_kind(Kind k);

/// Number of symbols in the formula.
std::size_t formula_size(const Formula& f);

/// Height of the syntax tree; a lone atom has height 1.
std::size_t formula_height(const Formula& f);

/// Most specific fragment tag for f.
Fragment fragment_of(const Formula& f);

/// Rewrites f so only {True, Atom(>=), Not, Or, Next, Until, Yesterday,
/// Since} remain, following the shortcut definitions. Robustness-preserving.
FormulaPtr rewrite_to_core(const FormulaPtr& f);

/// G(!f); f must be pure past.
FormulaPtr safety_wrap(const FormulaPtr& f);

/// Resolves atom variable names against a header; throws on unknown names.
FormulaPtr bind_variables(const FormulaPtr& f, const std::vector<std::string>& names);

/// Largest variable index referenced, or -1 if none.
int max_var_index(const Formula& f);

/// Structural equality; variable binding state is ignored, names are not.
bool equal(const Formula& a, const Formula& b);

/// Grammar-conformant text; parse(print(f)) is structurally equal to f.
std::string print(const Formula& f);
std::string print(const FormulaPtr& f);

/// Shortest round-trip decimal rendering of a double.
std::string format_number(double v);

struct ParseError : std::runtime_error {
  int line;
  int column;
  ParseError(const std::string& msg, int line_, int col_)
      : std::runtime_error(msg + " at line " + std::to_string(line_) + ", column " + std::to_string(col_)),
        line(line_), column(col_) {}
};

/// Parses the textual grammar. Variable indices are left unresolved unless
/// a header is supplied.
FormulaPtr parse(const std::string& text);
FormulaPtr parse(const std::string& text, const std::vector<std::string>& variables);

}  // namespace stlmon

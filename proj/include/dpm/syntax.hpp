#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dpm/error.hpp"
#include "dpm/ids.hpp"

namespace dpm {

using Rational = boost::multiprecision::cpp_rational;

enum class Primitive : std::uint8_t {
  Flip,
  UniformDraw,
  Multinomial,
  Not,
  IsEq,
  IsEqual,
  NumEq,
  Less,
  Greater,
  LessEq,
  GreaterEq,
  Add,
  Sub,
  Mul,
  Div,
  List,
  ListRef,
  Length,
  Map,
  Repeat,
  Sum,
  IsNull,
  Car,
  Cdr,
  Cons,
};

std::optional<Primitive> primitiveByName(std::string_view name);
std::string_view primitiveName(Primitive p);
bool isRandomPrimitive(Primitive p);

enum class ValueKind : std::uint8_t {
  Boolean,
  Number,
  Symbol,
  String,
  Nil,
  Pair,
  Closure,     // a: lambda expression, b: environment
  RecClosure,  // a: define-sequence expression, b: environment, c: binding index
  Primitive,
};

// Structural record of a value. Children are ids of already interned values
// (or payload indices), so hashing and equality are O(1).
struct ValueNode {
  ValueKind kind = ValueKind::Nil;
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  std::uint32_t c = 0;

  friend bool operator==(const ValueNode&, const ValueNode&) = default;
};

enum class ExprKind : std::uint8_t {
  Constant,
  Variable,
  Lambda,
  Application,
  If,
  DefineSequence,
  Quote,
};

// children layout per kind:
//   Lambda:          [body], names = parameters
//   Application:     [operator, operands...]
//   If:              [test, consequent, alternative]
//   DefineSequence:  [binding_0 .. binding_{n-1}, body_0 .. body_m], names = defined names
struct Expr {
  ExprKind kind = ExprKind::Constant;
  std::vector<ExprId> children;
  std::vector<SymbolId> names;
  ValueId constant;  // Constant, Quote
  SymbolId symbol;   // Variable
  SourceSpan span;   // first occurrence

  [[nodiscard]] std::size_t bindingCount() const { return kind == ExprKind::DefineSequence ? names.size() : 0; }
};

// Reader output: an s-expression with source positions.
struct Datum {
  enum class Kind : std::uint8_t { Atom, String, List };
  Kind kind = Kind::Atom;
  std::string text;
  std::vector<Datum> items;
  SourceSpan span;
};

struct TopLevelForm {
  std::optional<SymbolId> defines;
  ExprId expr;
};

struct Program {
  std::vector<TopLevelForm> forms;
  // The whole file as one define-sequence; the initial interpreter argument.
  ExprId entry;
};

// Append-only interning tables for symbols, values, environments and
// expressions. Equal structures share one id.
class Store {
 public:
  Store();
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  SymbolId symbol(std::string_view name);
  [[nodiscard]] const std::string& symbolName(SymbolId s) const { return symbolNames_[s.index]; }

  // Values.
  ValueId intern(const ValueNode& node);
  ValueId boolean(bool b) { return b ? true_ : false_; }
  ValueId number(const Rational& r);
  ValueId number(long long n) { return number(Rational(n)); }
  ValueId symbolValue(SymbolId s) { return intern({ValueKind::Symbol, s.index}); }
  ValueId symbolValue(std::string_view name) { return symbolValue(symbol(name)); }
  ValueId string(std::string_view s);
  [[nodiscard]] ValueId nil() const { return nil_; }
  ValueId cons(ValueId car, ValueId cdr) { return intern({ValueKind::Pair, car.index, cdr.index}); }
  ValueId list(std::span<const ValueId> items);
  ValueId closure(ExprId lambda, EnvId env) { return intern({ValueKind::Closure, lambda.index, env.index}); }
  ValueId recClosure(ExprId sequence, std::uint32_t index, EnvId env) {
    return intern({ValueKind::RecClosure, sequence.index, env.index, index});
  }
  ValueId primitive(Primitive p) { return intern({ValueKind::Primitive, static_cast<std::uint32_t>(p)}); }

  [[nodiscard]] const ValueNode& node(ValueId v) const { return values_[v.index]; }
  [[nodiscard]] ValueKind kind(ValueId v) const { return values_[v.index].kind; }
  [[nodiscard]] bool isTrue(ValueId v) const { return v != false_; }
  [[nodiscard]] const Rational& numberOf(ValueId v) const { return numbers_[values_[v.index].a]; }
  [[nodiscard]] const std::string& stringOf(ValueId v) const { return strings_[values_[v.index].a]; }
  [[nodiscard]] SymbolId symbolOf(ValueId v) const { return SymbolId(values_[v.index].a); }
  [[nodiscard]] ValueId car(ValueId v) const { return ValueId(values_[v.index].a); }
  [[nodiscard]] ValueId cdr(ValueId v) const { return ValueId(values_[v.index].b); }
  [[nodiscard]] Primitive primitiveOf(ValueId v) const { return static_cast<Primitive>(values_[v.index].a); }
  [[nodiscard]] std::size_t valueCount() const { return values_.size(); }

  // Proper list to vector; nullopt for improper lists.
  [[nodiscard]] std::optional<std::vector<ValueId>> listItems(ValueId v) const;

  // Canonical s-expression text: #t/#f, exact p/q numbers, (a b . c) pairs.
  [[nodiscard]] std::string show(ValueId v) const;

  // Environments: sorted symbol -> value bindings.
  using Binding = std::pair<SymbolId, ValueId>;
  [[nodiscard]] EnvId emptyEnv() const { return emptyEnv_; }
  EnvId internEnv(std::vector<Binding> bindings);
  EnvId extend(EnvId env, SymbolId name, ValueId value);
  EnvId restrict(EnvId env, std::span<const SymbolId> keep);
  [[nodiscard]] std::optional<ValueId> lookup(EnvId env, SymbolId name) const;
  [[nodiscard]] const std::vector<Binding>& bindings(EnvId env) const { return envs_[env.index]; }
  [[nodiscard]] std::size_t envCount() const { return envs_.size(); }

  // Expressions.
  ExprId internExpr(Expr e);
  [[nodiscard]] const Expr& expr(ExprId e) const { return exprs_[e.index]; }
  [[nodiscard]] std::size_t exprCount() const { return exprs_.size(); }

  // Free variables, sorted by symbol id, memoized per expression.
  const std::vector<SymbolId>& freeVariables(ExprId e);

  // Datum -> quoted value.
  ValueId datumValue(const Datum& d);

 private:
  struct KeyHash {
    std::size_t operator()(const std::vector<std::uint32_t>& key) const noexcept;
  };
  struct NodeHash {
    std::size_t operator()(const ValueNode& n) const noexcept;
  };

  std::vector<std::string> symbolNames_;
  std::unordered_map<std::string, SymbolId> symbols_;

  std::deque<ValueNode> values_;
  std::unordered_map<ValueNode, ValueId, NodeHash> valueIndex_;
  std::deque<Rational> numbers_;
  std::map<Rational, std::uint32_t> numberIndex_;
  std::deque<std::string> strings_;
  std::unordered_map<std::string, std::uint32_t> stringIndex_;

  std::deque<std::vector<Binding>> envs_;
  std::unordered_map<std::vector<std::uint32_t>, EnvId, KeyHash> envIndex_;

  std::deque<Expr> exprs_;
  std::unordered_map<std::vector<std::uint32_t>, ExprId, KeyHash> exprIndex_;
  std::unordered_map<ExprId, std::vector<SymbolId>> freeVars_;

  ValueId true_, false_, nil_;
  EnvId emptyEnv_;
};

// Reads s-expressions; `;` starts a line comment. Brackets pair like parens.
std::vector<Datum> readData(std::string_view text);

// Parses a program: zero or more defines followed by one or more
// expressions. Expands let, and, or and query.
Program parse(Store& store, std::string_view text);

// Parses a single expression (no top-level defines).
ExprId parseExpression(Store& store, std::string_view text);

// Reserved name bound by query expansion; cannot be written in source.
inline constexpr std::string_view kQueryLoopName = "#query-loop";

}  // namespace dpm

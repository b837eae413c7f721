#include "dpm/syntax.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>

namespace dpm {

SyntaxError::SyntaxError(const std::string& message, std::size_t line, std::size_t column)
    : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + message), line(line), column(column) {}

RuntimeError::RuntimeError(const std::string& message, SourceSpan span)
    : Error(span.line ? std::to_string(span.line) + ":" + std::to_string(span.column) + ": " + message : message),
      span(span) {}

namespace {

struct PrimitiveEntry {
  std::string_view name;
  Primitive op;
};

constexpr std::array kPrimitives{
    PrimitiveEntry{"flip", Primitive::Flip},
    PrimitiveEntry{"uniform-draw", Primitive::UniformDraw},
    PrimitiveEntry{"multinomial", Primitive::Multinomial},
    PrimitiveEntry{"not", Primitive::Not},
    PrimitiveEntry{"eq?", Primitive::IsEq},
    PrimitiveEntry{"equal?", Primitive::IsEqual},
    PrimitiveEntry{"=", Primitive::NumEq},
    PrimitiveEntry{"<", Primitive::Less},
    PrimitiveEntry{">", Primitive::Greater},
    PrimitiveEntry{"<=", Primitive::LessEq},
    PrimitiveEntry{">=", Primitive::GreaterEq},
    PrimitiveEntry{"+", Primitive::Add},
    PrimitiveEntry{"-", Primitive::Sub},
    PrimitiveEntry{"*", Primitive::Mul},
    PrimitiveEntry{"/", Primitive::Div},
    PrimitiveEntry{"list", Primitive::List},
    PrimitiveEntry{"list-ref", Primitive::ListRef},
    PrimitiveEntry{"length", Primitive::Length},
    PrimitiveEntry{"map", Primitive::Map},
    PrimitiveEntry{"repeat", Primitive::Repeat},
    PrimitiveEntry{"sum", Primitive::Sum},
    PrimitiveEntry{"null?", Primitive::IsNull},
    PrimitiveEntry{"car", Primitive::Car},
    PrimitiveEntry{"cdr", Primitive::Cdr},
    PrimitiveEntry{"cons", Primitive::Cons},
};

std::size_t mix(std::size_t seed, std::size_t v) {
  return seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
}

}  // namespace

std::optional<Primitive> primitiveByName(std::string_view name) {
  for (const auto& entry : kPrimitives) {
    if (entry.name == name) return entry.op;
  }
  return std::nullopt;
}

std::string_view primitiveName(Primitive p) {
  for (const auto& entry : kPrimitives) {
    if (entry.op == p) return entry.name;
  }
  return "?";
}

bool isRandomPrimitive(Primitive p) {
  return p == Primitive::Flip || p == Primitive::UniformDraw || p == Primitive::Multinomial;
}

std::size_t Store::KeyHash::operator()(const std::vector<std::uint32_t>& key) const noexcept {
  std::size_t h = key.size();
  for (auto k : key) h = mix(h, k);
  return h;
}

std::size_t Store::NodeHash::operator()(const ValueNode& n) const noexcept {
  std::size_t h = static_cast<std::size_t>(n.kind);
  h = mix(h, n.a);
  h = mix(h, n.b);
  return mix(h, n.c);
}

Store::Store() {
  nil_ = intern({ValueKind::Nil});
  false_ = intern({ValueKind::Boolean, 0});
  true_ = intern({ValueKind::Boolean, 1});
  emptyEnv_ = internEnv({});
}

SymbolId Store::symbol(std::string_view name) {
  auto it = symbols_.find(std::string(name));
  if (it != symbols_.end()) return it->second;
  SymbolId id(static_cast<std::uint32_t>(symbolNames_.size()));
  symbolNames_.emplace_back(name);
  symbols_.emplace(std::string(name), id);
  return id;
}

ValueId Store::intern(const ValueNode& node) {
  auto it = valueIndex_.find(node);
  if (it != valueIndex_.end()) return it->second;
  ValueId id(static_cast<std::uint32_t>(values_.size()));
  values_.push_back(node);
  valueIndex_.emplace(node, id);
  return id;
}

ValueId Store::number(const Rational& r) {
  auto it = numberIndex_.find(r);
  std::uint32_t slot;
  if (it == numberIndex_.end()) {
    slot = static_cast<std::uint32_t>(numbers_.size());
    numbers_.push_back(r);
    numberIndex_.emplace(r, slot);
  } else {
    slot = it->second;
  }
  return intern({ValueKind::Number, slot});
}

ValueId Store::string(std::string_view s) {
  std::string key(s);
  auto it = stringIndex_.find(key);
  std::uint32_t slot;
  if (it == stringIndex_.end()) {
    slot = static_cast<std::uint32_t>(strings_.size());
    strings_.push_back(key);
    stringIndex_.emplace(std::move(key), slot);
  } else {
    slot = it->second;
  }
  return intern({ValueKind::String, slot});
}

ValueId Store::list(std::span<const ValueId> items) {
  ValueId out = nil_;
  for (auto it = items.rbegin(); it != items.rend(); ++it) out = cons(*it, out);
  return out;
}

std::optional<std::vector<ValueId>> Store::listItems(ValueId v) const {
  std::vector<ValueId> out;
  while (kind(v) == ValueKind::Pair) {
    out.push_back(car(v));
    v = cdr(v);
  }
  if (kind(v) != ValueKind::Nil) return std::nullopt;
  return out;
}

namespace {

std::string showNumber(const Rational& r) {
  using boost::multiprecision::denominator;
  using boost::multiprecision::numerator;
  if (denominator(r) == 1) return numerator(r).str();
  return numerator(r).str() + "/" + denominator(r).str();
}

std::string quoteString(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    switch (ch) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      default: out += ch;
    }
  }
  return out + "\"";
}

}  // namespace

std::string Store::show(ValueId v) const {
  const ValueNode& n = node(v);
  switch (n.kind) {
    case ValueKind::Boolean: return n.a ? "#t" : "#f";
    case ValueKind::Number: return showNumber(numberOf(v));
    case ValueKind::Symbol: return symbolName(symbolOf(v));
    case ValueKind::String: return quoteString(stringOf(v));
    case ValueKind::Nil: return "()";
    case ValueKind::Pair: {
      std::string out = "(" + show(car(v));
      ValueId rest = cdr(v);
      while (kind(rest) == ValueKind::Pair) {
        out += " " + show(car(rest));
        rest = cdr(rest);
      }
      if (kind(rest) != ValueKind::Nil) out += " . " + show(rest);
      return out + ")";
    }
    case ValueKind::Closure: {
      const SourceSpan& s = expr(ExprId(n.a)).span;
      return "#<lambda:" + std::to_string(s.line) + ":" + std::to_string(s.column) + ">";
    }
    case ValueKind::RecClosure:
      return "#<procedure:" + symbolName(expr(ExprId(n.a)).names[n.c]) + ">";
    case ValueKind::Primitive: return "#<primitive:" + std::string(primitiveName(primitiveOf(v))) + ">";
  }
  return "?";
}

EnvId Store::internEnv(std::vector<Binding> bindings) {
  std::vector<std::uint32_t> key;
  key.reserve(bindings.size() * 2);
  for (const auto& [name, value] : bindings) {
    key.push_back(name.index);
    key.push_back(value.index);
  }
  auto it = envIndex_.find(key);
  if (it != envIndex_.end()) return it->second;
  EnvId id(static_cast<std::uint32_t>(envs_.size()));
  envs_.push_back(std::move(bindings));
  envIndex_.emplace(std::move(key), id);
  return id;
}

EnvId Store::extend(EnvId env, SymbolId name, ValueId value) {
  std::vector<Binding> out = envs_[env.index];
  auto it = std::lower_bound(out.begin(), out.end(), name, [](const Binding& b, SymbolId s) { return b.first < s; });
  if (it != out.end() && it->first == name) {
    it->second = value;
  } else {
    out.insert(it, {name, value});
  }
  return internEnv(std::move(out));
}

EnvId Store::restrict(EnvId env, std::span<const SymbolId> keep) {
  const auto& current = envs_[env.index];
  std::vector<Binding> out;
  out.reserve(std::min(current.size(), keep.size()));
  // Both sides are sorted by symbol id.
  auto k = keep.begin();
  for (const auto& binding : current) {
    while (k != keep.end() && *k < binding.first) ++k;
    if (k == keep.end()) break;
    if (*k == binding.first) out.push_back(binding);
  }
  if (out.size() == current.size()) return env;
  return internEnv(std::move(out));
}

std::optional<ValueId> Store::lookup(EnvId env, SymbolId name) const {
  const auto& b = envs_[env.index];
  auto it = std::lower_bound(b.begin(), b.end(), name, [](const Binding& x, SymbolId s) { return x.first < s; });
  if (it != b.end() && it->first == name) return it->second;
  return std::nullopt;
}

ExprId Store::internExpr(Expr e) {
  std::vector<std::uint32_t> key;
  key.reserve(4 + e.children.size() + e.names.size());
  key.push_back(static_cast<std::uint32_t>(e.kind));
  key.push_back(e.constant.index);
  key.push_back(e.symbol.index);
  key.push_back(static_cast<std::uint32_t>(e.children.size()));
  for (auto c : e.children) key.push_back(c.index);
  for (auto n : e.names) key.push_back(n.index);
  auto it = exprIndex_.find(key);
  if (it != exprIndex_.end()) return it->second;
  ExprId id(static_cast<std::uint32_t>(exprs_.size()));
  exprs_.push_back(std::move(e));
  exprIndex_.emplace(std::move(key), id);
  return id;
}

const std::vector<SymbolId>& Store::freeVariables(ExprId e) {
  if (auto it = freeVars_.find(e); it != freeVars_.end()) return it->second;
  std::set<SymbolId> out;
  const Expr ex = exprs_[e.index];
  switch (ex.kind) {
    case ExprKind::Constant:
    case ExprKind::Quote:
      break;
    case ExprKind::Variable:
      out.insert(ex.symbol);
      break;
    case ExprKind::Lambda:
    case ExprKind::Application:
    case ExprKind::If:
    case ExprKind::DefineSequence:
      for (auto child : ex.children) {
        const auto& sub = freeVariables(child);
        out.insert(sub.begin(), sub.end());
      }
      for (auto bound : ex.names) out.erase(bound);
      break;
  }
  return freeVars_.emplace(e, std::vector<SymbolId>(out.begin(), out.end())).first->second;
}

// ---------------------------------------------------------------------------
// Reader

namespace {

class Reader {
 public:
  explicit Reader(std::string_view text) : text_(text) {
    lineStarts_.push_back(0);
    for (std::size_t i = 0; i < text.size(); ++i) {
      if (text[i] == '\n') lineStarts_.push_back(i + 1);
    }
  }

  std::vector<Datum> readAll() {
    std::vector<Datum> out;
    for (;;) {
      skipSpace();
      if (pos_ >= text_.size()) break;
      out.push_back(readDatum());
    }
    return out;
  }

  SourceSpan span(std::size_t begin, std::size_t end) const {
    auto it = std::upper_bound(lineStarts_.begin(), lineStarts_.end(), begin);
    std::size_t line = static_cast<std::size_t>(it - lineStarts_.begin());
    return {begin, end, line, begin - lineStarts_[line - 1] + 1};
  }

 private:
  [[noreturn]] void fail(const std::string& message, std::size_t at) const {
    SourceSpan s = span(at, at);
    throw SyntaxError(message, s.line, s.column);
  }

  void skipSpace() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == ';') {
        while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  static bool isDelimiter(char c) {
    return std::isspace(static_cast<unsigned char>(c)) || c == '(' || c == ')' || c == '[' || c == ']' || c == ';' ||
           c == '"' || c == '\'';
  }

  Datum readDatum() {
    skipSpace();
    if (pos_ >= text_.size()) fail("unexpected end of input", pos_);
    std::size_t start = pos_;
    char c = text_[pos_];
    if (c == '(' || c == '[') {
      char close = c == '(' ? ')' : ']';
      ++pos_;
      Datum d;
      d.kind = Datum::Kind::List;
      for (;;) {
        skipSpace();
        if (pos_ >= text_.size()) fail("unbalanced parenthesis: list is never closed", start);
        char n = text_[pos_];
        if (n == ')' || n == ']') {
          if (n != close) fail(std::string("mismatched '") + n + "'", pos_);
          ++pos_;
          break;
        }
        d.items.push_back(readDatum());
      }
      d.span = span(start, pos_);
      return d;
    }
    if (c == ')' || c == ']') fail(std::string("unbalanced parenthesis: unexpected '") + c + "'", pos_);
    if (c == '\'') {
      ++pos_;
      Datum quoted = readDatum();
      Datum d;
      d.kind = Datum::Kind::List;
      Datum head;
      head.text = "quote";
      head.span = span(start, start + 1);
      d.items.push_back(std::move(head));
      d.items.push_back(std::move(quoted));
      d.span = span(start, pos_);
      return d;
    }
    if (c == '"') {
      ++pos_;
      Datum d;
      d.kind = Datum::Kind::String;
      for (;;) {
        if (pos_ >= text_.size()) fail("unterminated string", start);
        char ch = text_[pos_++];
        if (ch == '"') break;
        if (ch == '\\') {
          if (pos_ >= text_.size()) fail("unterminated string", start);
          char esc = text_[pos_++];
          d.text += esc == 'n' ? '\n' : esc == 't' ? '\t' : esc;
        } else {
          d.text += ch;
        }
      }
      d.span = span(start, pos_);
      return d;
    }
    while (pos_ < text_.size() && !isDelimiter(text_[pos_])) ++pos_;
    Datum d;
    d.text = std::string(text_.substr(start, pos_ - start));
    d.span = span(start, pos_);
    return d;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::vector<std::size_t> lineStarts_;
};

std::optional<Rational> parseNumber(std::string_view t) {
  std::size_t i = 0;
  bool negative = false;
  if (i < t.size() && (t[i] == '+' || t[i] == '-')) {
    negative = t[i] == '-';
    ++i;
  }
  auto digits = [&](std::size_t& at) {
    std::size_t from = at;
    while (at < t.size() && std::isdigit(static_cast<unsigned char>(t[at]))) ++at;
    return t.substr(from, at - from);
  };
  std::string_view whole = digits(i);
  Rational value;
  if (i < t.size() && t[i] == '/') {
    if (whole.empty()) return std::nullopt;
    ++i;
    std::string_view den = digits(i);
    if (den.empty() || i != t.size()) return std::nullopt;
    boost::multiprecision::cpp_int d{std::string(den)};
    if (d == 0) return std::nullopt;
    value = Rational(boost::multiprecision::cpp_int(std::string(whole)), d);
  } else {
    std::string_view frac;
    bool dot = false;
    if (i < t.size() && t[i] == '.') {
      dot = true;
      ++i;
      frac = digits(i);
    }
    if (i != t.size() || (whole.empty() && frac.empty())) return std::nullopt;
    if (dot && frac.empty() && whole.empty()) return std::nullopt;
    boost::multiprecision::cpp_int num{whole.empty() ? std::string("0") : std::string(whole)};
    boost::multiprecision::cpp_int den = 1;
    for (char ch : frac) {
      num = num * 10 + (ch - '0');
      den *= 10;
    }
    value = Rational(num, den);
  }
  return negative ? Rational(-value) : value;
}

std::optional<bool> parseBoolean(std::string_view t) {
  if (t == "#t" || t == "#true" || t == "true") return true;
  if (t == "#f" || t == "#false" || t == "false") return false;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Datum -> Expr

class Parser {
 public:
  explicit Parser(Store& store) : store_(store) {}

  Program program(const std::vector<Datum>& data) {
    Program p;
    std::vector<SymbolId> names;
    std::vector<ExprId> bindings;
    std::vector<ExprId> body;
    for (const Datum& d : data) {
      if (isForm(d, "define")) {
        if (!body.empty()) fail("define is only allowed at the head of a body", d);
        auto [name, value] = define(d);
        names.push_back(name);
        bindings.push_back(value);
        p.forms.push_back({name, value});
      } else {
        ExprId e = expr(d);
        body.push_back(e);
        p.forms.push_back({std::nullopt, e});
      }
    }
    if (body.empty()) throw SyntaxError("program has no expression to evaluate", 1, 1);
    SourceSpan whole = data.empty() ? SourceSpan{} : data.front().span;
    if (!data.empty()) whole.end = data.back().span.end;
    p.entry = sequence(std::move(names), std::move(bindings), std::move(body), whole);
    return p;
  }

  ExprId expr(const Datum& d) {
    switch (d.kind) {
      case Datum::Kind::String:
        return constant(store_.string(d.text), d.span);
      case Datum::Kind::Atom:
        return atom(d);
      case Datum::Kind::List:
        break;
    }
    if (d.items.empty()) fail("empty application '()'", d);
    const Datum& head = d.items.front();
    if (head.kind == Datum::Kind::Atom) {
      const std::string& h = head.text;
      if (h == "quote") return quote(d);
      if (h == "lambda" || h == "\xCE\xBB") return lambda(d);
      if (h == "if") return ifForm(d);
      if (h == "define") fail("define is only allowed at the head of a body", d);
      if (h == "let") return let(d);
      if (h == "and") return andForm(d, 1);
      if (h == "or") return orForm(d, 1);
      if (h == "query") return query(d);
    }
    Expr e;
    e.kind = ExprKind::Application;
    for (const Datum& item : d.items) e.children.push_back(expr(item));
    e.span = d.span;
    return store_.internExpr(std::move(e));
  }

 private:
  [[noreturn]] static void fail(const std::string& message, const Datum& at) {
    throw SyntaxError(message, at.span.line, at.span.column);
  }

  static bool isForm(const Datum& d, std::string_view name) {
    return d.kind == Datum::Kind::List && !d.items.empty() && d.items.front().kind == Datum::Kind::Atom &&
           d.items.front().text == name;
  }

  ExprId constant(ValueId v, SourceSpan span) {
    Expr e;
    e.kind = ExprKind::Constant;
    e.constant = v;
    e.span = span;
    return store_.internExpr(std::move(e));
  }

  ExprId variable(SymbolId s, SourceSpan span) {
    Expr e;
    e.kind = ExprKind::Variable;
    e.symbol = s;
    e.span = span;
    return store_.internExpr(std::move(e));
  }

  ExprId atom(const Datum& d) {
    if (auto n = parseNumber(d.text)) return constant(store_.number(*n), d.span);
    if (auto b = parseBoolean(d.text)) return constant(store_.boolean(*b), d.span);
    if (!d.text.empty() && d.text.front() == '#') fail("bad '#' syntax: " + d.text, d);
    if (d.text == ".") fail("unexpected '.'", d);
    return variable(store_.symbol(d.text), d.span);
  }

  SymbolId identifier(const Datum& d) {
    if (d.kind != Datum::Kind::Atom || d.text.empty() || parseNumber(d.text) || parseBoolean(d.text) ||
        d.text.front() == '#') {
      fail("expected an identifier", d);
    }
    return store_.symbol(d.text);
  }

  ExprId quote(const Datum& d) {
    if (d.items.size() != 2) fail("quote expects exactly one datum", d);
    Expr e;
    e.kind = ExprKind::Quote;
    e.constant = store_.datumValue(d.items[1]);
    e.span = d.span;
    return store_.internExpr(std::move(e));
  }

  std::vector<SymbolId> parameters(const Datum& list) {
    if (list.kind != Datum::Kind::List) fail("expected a parameter list", list);
    std::vector<SymbolId> out;
    for (const Datum& p : list.items) {
      SymbolId s = identifier(p);
      if (std::find(out.begin(), out.end(), s) != out.end()) fail("duplicate parameter", p);
      out.push_back(s);
    }
    return out;
  }

  ExprId makeLambda(std::vector<SymbolId> params, ExprId body, SourceSpan span) {
    Expr e;
    e.kind = ExprKind::Lambda;
    e.names = std::move(params);
    e.children = {body};
    e.span = span;
    return store_.internExpr(std::move(e));
  }

  ExprId lambda(const Datum& d) {
    if (d.items.size() < 3) fail("lambda expects parameters and a body", d);
    auto params = parameters(d.items[1]);
    return makeLambda(std::move(params), body(std::span(d.items).subspan(2), d), d.span);
  }

  ExprId ifForm(const Datum& d) {
    if (d.items.size() != 4) fail("if expects exactly three subforms", d);
    return makeIf(expr(d.items[1]), expr(d.items[2]), expr(d.items[3]), d.span);
  }

  ExprId makeIf(ExprId test, ExprId then, ExprId otherwise, SourceSpan span) {
    Expr e;
    e.kind = ExprKind::If;
    e.children = {test, then, otherwise};
    e.span = span;
    return store_.internExpr(std::move(e));
  }

  ExprId let(const Datum& d) {
    if (d.items.size() < 3 || d.items[1].kind != Datum::Kind::List) fail("let expects bindings and a body", d);
    std::vector<SymbolId> names;
    Expr app;
    app.kind = ExprKind::Application;
    app.span = d.span;
    app.children.push_back(ExprId{});
    for (const Datum& b : d.items[1].items) {
      if (b.kind != Datum::Kind::List || b.items.size() != 2) fail("let binding must be (name expr)", b);
      SymbolId s = identifier(b.items[0]);
      if (std::find(names.begin(), names.end(), s) != names.end()) fail("duplicate let binding", b);
      names.push_back(s);
      app.children.push_back(expr(b.items[1]));
    }
    app.children[0] = makeLambda(std::move(names), body(std::span(d.items).subspan(2), d), d.span);
    return store_.internExpr(std::move(app));
  }

  // (and) => #t, (and a) => a, (and a b ...) => (if a (and b ...) #f)
  ExprId andForm(const Datum& d, std::size_t from) {
    if (from == d.items.size()) return constant(store_.boolean(true), d.span);
    ExprId first = expr(d.items[from]);
    if (from + 1 == d.items.size()) return first;
    return makeIf(first, andForm(d, from + 1), constant(store_.boolean(false), d.span), d.span);
  }

  // (or) => #f, (or a) => a, (or a b ...) => (if a #t (or b ...))
  ExprId orForm(const Datum& d, std::size_t from) {
    if (from == d.items.size()) return constant(store_.boolean(false), d.span);
    ExprId first = expr(d.items[from]);
    if (from + 1 == d.items.size()) return first;
    return makeIf(first, constant(store_.boolean(true), d.span), orForm(d, from + 1), d.span);
  }

  // (query defs... value condition) expands to a self-recursive rejection
  // loop that re-runs the model until the condition holds:
  //   (define (#query-loop) defs... (if condition value (#query-loop)))
  //   (#query-loop)
  ExprId query(const Datum& d) {
    std::vector<SymbolId> names;
    std::vector<ExprId> bindings;
    std::vector<ExprId> exprs;
    for (std::size_t i = 1; i < d.items.size(); ++i) {
      const Datum& item = d.items[i];
      if (isForm(item, "define")) {
        if (!exprs.empty()) fail("define is only allowed at the head of a query", item);
        auto [name, value] = define(item);
        names.push_back(name);
        bindings.push_back(value);
      } else {
        exprs.push_back(expr(item));
      }
    }
    if (exprs.size() != 2) fail("query expects definitions, a query expression and a condition", d);
    SymbolId loop = store_.symbol(kQueryLoopName);
    Expr call;
    call.kind = ExprKind::Application;
    call.children = {variable(loop, d.span)};
    call.span = d.span;
    ExprId recurse = store_.internExpr(std::move(call));
    ExprId test = makeIf(exprs[1], exprs[0], recurse, d.span);
    ExprId inner = sequence(std::move(names), std::move(bindings), {test}, d.span);
    ExprId loopLambda = makeLambda({}, inner, d.span);
    return sequence({loop}, {loopLambda}, {recurse}, d.span);
  }

  std::pair<SymbolId, ExprId> define(const Datum& d) {
    if (d.items.size() < 3) fail("define expects a name and a value", d);
    const Datum& target = d.items[1];
    if (target.kind == Datum::Kind::List) {
      if (target.items.empty()) fail("define expects a procedure name", target);
      SymbolId name = identifier(target.items[0]);
      Datum params = target;
      params.items.erase(params.items.begin());
      auto ps = parameters(params);
      return {name, makeLambda(std::move(ps), body(std::span(d.items).subspan(2), d), d.span)};
    }
    if (d.items.size() != 3) fail("define expects exactly one value expression", d);
    return {identifier(target), expr(d.items[2])};
  }

  ExprId body(std::span<const Datum> items, const Datum& owner) {
    std::vector<SymbolId> names;
    std::vector<ExprId> bindings;
    std::vector<ExprId> exprs;
    for (const Datum& item : items) {
      if (isForm(item, "define")) {
        if (!exprs.empty()) fail("define is only allowed at the head of a body", item);
        auto [name, value] = define(item);
        names.push_back(name);
        bindings.push_back(value);
      } else {
        exprs.push_back(expr(item));
      }
    }
    if (exprs.empty()) fail("body has no expression", owner);
    return sequence(std::move(names), std::move(bindings), std::move(exprs), owner.span);
  }

  ExprId sequence(std::vector<SymbolId> names, std::vector<ExprId> bindings, std::vector<ExprId> exprs,
                  SourceSpan span) {
    if (names.empty() && exprs.size() == 1) return exprs.front();
    Expr e;
    e.kind = ExprKind::DefineSequence;
    e.names = std::move(names);
    e.children = std::move(bindings);
    e.children.insert(e.children.end(), exprs.begin(), exprs.end());
    e.span = span;
    return store_.internExpr(std::move(e));
  }

  Store& store_;
};

}  // namespace

ValueId Store::datumValue(const Datum& d) {
  switch (d.kind) {
    case Datum::Kind::String:
      return string(d.text);
    case Datum::Kind::Atom:
      if (auto n = parseNumber(d.text)) return number(*n);
      if (d.text == "#t" || d.text == "#true") return boolean(true);
      if (d.text == "#f" || d.text == "#false") return boolean(false);
      return symbolValue(d.text);
    case Datum::Kind::List:
      break;
  }
  std::vector<ValueId> items;
  items.reserve(d.items.size());
  for (const Datum& item : d.items) items.push_back(datumValue(item));
  return list(items);
}

std::vector<Datum> readData(std::string_view text) { return Reader(text).readAll(); }

Program parse(Store& store, std::string_view text) { return Parser(store).program(readData(text)); }

ExprId parseExpression(Store& store, std::string_view text) {
  auto data = readData(text);
  if (data.size() != 1) throw SyntaxError("expected exactly one expression", 1, 1);
  return Parser(store).expr(data.front());
}

}  // namespace dpm

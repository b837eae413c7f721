#include "dpm/interp.hpp"

#include <algorithm>
#include <set>
#include <string>

namespace dpm {

struct Frame {
  enum class Kind : std::uint8_t { Test, Operands, Sequence, MapStep, RepeatStep };

  Kind kind = Kind::Test;
  ExprId expr;
  EnvId env;
  std::uint32_t index = 0;
  std::vector<ValueId> values;
  ValueId proc;
  ValueId rest;
  SourceSpan site;
  Continuation next;
};

struct Interpreter::State {
  enum class Mode : std::uint8_t { Eval, Return, Apply };

  Mode mode = Mode::Eval;
  ExprId expr;
  EnvId env;
  ValueId value;
  ValueId proc;
  std::vector<ValueId> args;
  SourceSpan site;
  Continuation k;
};

namespace {

std::string describe(const Store& store, ValueId v) {
  std::string text = store.show(v);
  if (text.size() > 60) text = text.substr(0, 57) + "...";
  return text;
}

const Rational& requireNumber(const Store& store, ValueId v, std::string_view who, SourceSpan where) {
  if (store.kind(v) != ValueKind::Number) {
    throw RuntimeError(std::string(who) + ": expected a number, got " + describe(store, v), where);
  }
  return store.numberOf(v);
}

std::vector<ValueId> requireList(const Store& store, ValueId v, std::string_view who, SourceSpan where) {
  auto items = store.listItems(v);
  if (!items) throw RuntimeError(std::string(who) + ": expected a list, got " + describe(store, v), where);
  return *items;
}

void requireArity(std::span<const ValueId> args, std::size_t lo, std::size_t hi, std::string_view who,
                  SourceSpan where) {
  if (args.size() < lo || args.size() > hi) {
    std::string expected = lo == hi ? std::to_string(lo) : std::to_string(lo) + ".." + std::to_string(hi);
    if (hi == static_cast<std::size_t>(-1)) expected = "at least " + std::to_string(lo);
    throw RuntimeError(std::string(who) + ": wrong number of arguments (expected " + expected + ", got " +
                           std::to_string(args.size()) + ")",
                       where);
  }
}

std::size_t requireIndex(const Store& store, ValueId v, std::string_view who, SourceSpan where) {
  const Rational& r = requireNumber(store, v, who, where);
  if (boost::multiprecision::denominator(r) != 1 || r < 0) {
    throw RuntimeError(std::string(who) + ": expected a non-negative integer, got " + describe(store, v), where);
  }
  return boost::multiprecision::numerator(r).convert_to<std::size_t>();
}

constexpr std::size_t kMany = static_cast<std::size_t>(-1);

// Accumulates exact masses per value in first-occurrence order.
Support finishSupport(std::vector<std::pair<ValueId, Rational>>& masses) {
  Rational total = 0;
  for (const auto& entry : masses) total += entry.second;
  Support out;
  for (const auto& [value, mass] : masses) {
    if (mass == 0) continue;
    out.values.push_back(value);
    out.probs.push_back(static_cast<double>(Rational(mass / total)));
  }
  return out;
}

void addMass(std::vector<std::pair<ValueId, Rational>>& masses, ValueId v, const Rational& m) {
  for (auto& entry : masses) {
    if (entry.first == v) {
      entry.second += m;
      return;
    }
  }
  masses.emplace_back(v, m);
}

}  // namespace

Support erpSupport(Store& store, Primitive p, std::span<const ValueId> args, SourceSpan where) {
  std::vector<std::pair<ValueId, Rational>> masses;
  switch (p) {
    case Primitive::Flip: {
      requireArity(args, 0, 1, "flip", where);
      Rational prob = args.empty() ? Rational(1, 2) : requireNumber(store, args[0], "flip", where);
      if (prob < 0 || prob > 1) throw RuntimeError("flip: probability outside [0, 1]: " + store.show(args[0]), where);
      masses = {{store.boolean(true), prob}, {store.boolean(false), Rational(1 - prob)}};
      break;
    }
    case Primitive::UniformDraw: {
      requireArity(args, 1, 1, "uniform-draw", where);
      auto items = requireList(store, args[0], "uniform-draw", where);
      if (items.empty()) throw RuntimeError("uniform-draw: empty list", where);
      for (ValueId v : items) addMass(masses, v, Rational(1));
      break;
    }
    case Primitive::Multinomial: {
      requireArity(args, 2, 2, "multinomial", where);
      auto items = requireList(store, args[0], "multinomial", where);
      auto weights = requireList(store, args[1], "multinomial", where);
      if (items.empty()) throw RuntimeError("multinomial: empty list", where);
      if (items.size() != weights.size()) throw RuntimeError("multinomial: value and weight lists differ in length", where);
      Rational total = 0;
      for (std::size_t i = 0; i < items.size(); ++i) {
        const Rational& w = requireNumber(store, weights[i], "multinomial", where);
        if (w < 0) throw RuntimeError("multinomial: negative weight " + store.show(weights[i]), where);
        total += w;
        addMass(masses, items[i], w);
      }
      if (total == 0) throw RuntimeError("multinomial: weights sum to zero", where);
      break;
    }
    default:
      throw RuntimeError("not a random primitive: " + std::string(primitiveName(p)), where);
  }
  return finishSupport(masses);
}

ValueId applyPrimitive(Store& store, Primitive p, std::span<const ValueId> args, SourceSpan where) {
  const std::string_view who = primitiveName(p);
  auto compare = [&](auto cmp) {
    requireArity(args, 2, kMany, who, where);
    for (std::size_t i = 0; i + 1 < args.size(); ++i) {
      if (!cmp(requireNumber(store, args[i], who, where), requireNumber(store, args[i + 1], who, where))) {
        return store.boolean(false);
      }
    }
    return store.boolean(true);
  };
  switch (p) {
    case Primitive::Not:
      requireArity(args, 1, 1, who, where);
      return store.boolean(!store.isTrue(args[0]));
    case Primitive::IsEq:
    case Primitive::IsEqual:
      requireArity(args, 2, 2, who, where);
      return store.boolean(args[0] == args[1]);
    case Primitive::NumEq: return compare([](const Rational& a, const Rational& b) { return a == b; });
    case Primitive::Less: return compare([](const Rational& a, const Rational& b) { return a < b; });
    case Primitive::Greater: return compare([](const Rational& a, const Rational& b) { return a > b; });
    case Primitive::LessEq: return compare([](const Rational& a, const Rational& b) { return a <= b; });
    case Primitive::GreaterEq: return compare([](const Rational& a, const Rational& b) { return a >= b; });
    case Primitive::Add: {
      Rational acc = 0;
      for (ValueId a : args) acc += requireNumber(store, a, who, where);
      return store.number(acc);
    }
    case Primitive::Mul: {
      Rational acc = 1;
      for (ValueId a : args) acc *= requireNumber(store, a, who, where);
      return store.number(acc);
    }
    case Primitive::Sub: {
      requireArity(args, 1, kMany, who, where);
      Rational acc = requireNumber(store, args[0], who, where);
      if (args.size() == 1) return store.number(Rational(-acc));
      for (std::size_t i = 1; i < args.size(); ++i) acc -= requireNumber(store, args[i], who, where);
      return store.number(acc);
    }
    case Primitive::Div: {
      requireArity(args, 1, kMany, who, where);
      Rational acc = requireNumber(store, args[0], who, where);
      if (args.size() == 1) {
        if (acc == 0) throw RuntimeError("/: division by zero", where);
        return store.number(Rational(1 / acc));
      }
      for (std::size_t i = 1; i < args.size(); ++i) {
        const Rational& d = requireNumber(store, args[i], who, where);
        if (d == 0) throw RuntimeError("/: division by zero", where);
        acc /= d;
      }
      return store.number(acc);
    }
    case Primitive::List: return store.list(args);
    case Primitive::ListRef: {
      requireArity(args, 2, 2, who, where);
      auto items = requireList(store, args[0], who, where);
      std::size_t i = requireIndex(store, args[1], who, where);
      if (i >= items.size()) throw RuntimeError("list-ref: index " + std::to_string(i) + " out of range", where);
      return items[i];
    }
    case Primitive::Length:
      requireArity(args, 1, 1, who, where);
      return store.number(static_cast<long long>(requireList(store, args[0], who, where).size()));
    case Primitive::Sum: {
      requireArity(args, 1, 1, who, where);
      Rational acc = 0;
      for (ValueId v : requireList(store, args[0], who, where)) acc += requireNumber(store, v, who, where);
      return store.number(acc);
    }
    case Primitive::IsNull:
      requireArity(args, 1, 1, who, where);
      return store.boolean(store.kind(args[0]) == ValueKind::Nil);
    case Primitive::Car:
    case Primitive::Cdr:
      requireArity(args, 1, 1, who, where);
      if (store.kind(args[0]) != ValueKind::Pair) {
        throw RuntimeError(std::string(who) + ": expected a pair, got " + describe(store, args[0]), where);
      }
      return p == Primitive::Car ? store.car(args[0]) : store.cdr(args[0]);
    case Primitive::Cons:
      requireArity(args, 2, 2, who, where);
      return store.cons(args[0], args[1]);
    case Primitive::Flip:
    case Primitive::UniformDraw:
    case Primitive::Multinomial:
    case Primitive::Map:
    case Primitive::Repeat:
      break;
  }
  throw RuntimeError(std::string(who) + " cannot be applied as a deterministic primitive", where);
}

InterpreterArg Interpreter::entry(ExprId program) const {
  return {program, store_.restrict(store_.emptyEnv(), store_.freeVariables(program))};
}

PartialResult Interpreter::interpret(const InterpreterArg& arg) const {
  State s;
  s.mode = State::Mode::Eval;
  s.expr = arg.expression;
  s.env = arg.environment;
  return run(std::move(s));
}

PartialResult Interpreter::resume(const Continuation& k, ValueId v) const {
  State s;
  s.mode = State::Mode::Return;
  s.value = v;
  s.k = k;
  return run(std::move(s));
}

namespace {

Continuation push(Frame f) { return std::make_shared<const Frame>(std::move(f)); }

// Bounds of the run of consecutive lambda bindings containing `index`.
std::pair<std::uint32_t, std::uint32_t> lambdaGroup(const Store& store, const Expr& seq, std::uint32_t index) {
  auto isLambda = [&](std::uint32_t i) { return store.expr(seq.children[i]).kind == ExprKind::Lambda; };
  std::uint32_t lo = index;
  std::uint32_t hi = index + 1;
  while (lo > 0 && isLambda(lo - 1)) --lo;
  while (hi < seq.names.size() && isLambda(hi)) ++hi;
  return {lo, hi};
}

// Environment captured by a group of mutually recursive procedures: the
// bindings of `env` used by any member, minus the members themselves.
EnvId groupEnvironment(Store& store, ExprId seqId, std::uint32_t lo, std::uint32_t hi, EnvId env) {
  const Expr& seq = store.expr(seqId);
  std::set<SymbolId> free;
  for (std::uint32_t m = lo; m < hi; ++m) {
    const auto& fv = store.freeVariables(seq.children[m]);
    free.insert(fv.begin(), fv.end());
  }
  for (std::uint32_t m = lo; m < hi; ++m) free.erase(seq.names[m]);
  std::vector<SymbolId> keep(free.begin(), free.end());
  return store.restrict(env, keep);
}

}  // namespace

PartialResult Interpreter::run(State s) const {
  Store& store = store_;
  std::uint64_t steps = 0;

  auto returnValue = [&](ValueId v, Continuation k) {
    s.mode = State::Mode::Return;
    s.value = v;
    s.k = std::move(k);
  };
  auto evaluate = [&](ExprId e, EnvId env, Continuation k) {
    s.mode = State::Mode::Eval;
    s.expr = e;
    s.env = env;
    s.k = std::move(k);
  };
  auto apply = [&](ValueId proc, std::vector<ValueId> args, SourceSpan site, Continuation k) {
    s.mode = State::Mode::Apply;
    s.proc = proc;
    s.args = std::move(args);
    s.site = site;
    s.k = std::move(k);
  };

  // Walks the bindings of a define-sequence starting at `index`. Runs of
  // lambda bindings are bound at once as a recursive group; other bindings
  // are evaluated in order, each seeing the ones before it.
  auto continueSequence = [&](ExprId seqId, EnvId env, std::uint32_t index, Continuation k) {
    const Expr& seq = store.expr(seqId);
    const auto bindingCount = static_cast<std::uint32_t>(seq.names.size());
    while (index < bindingCount) {
      if (store.expr(seq.children[index]).kind != ExprKind::Lambda) {
        Frame f;
        f.kind = Frame::Kind::Sequence;
        f.expr = seqId;
        f.env = env;
        f.index = index;
        f.next = std::move(k);
        evaluate(seq.children[index], env, push(std::move(f)));
        return;
      }
      auto [lo, hi] = lambdaGroup(store, seq, index);
      EnvId captured = groupEnvironment(store, seqId, lo, hi, env);
      for (std::uint32_t m = lo; m < hi; ++m) env = store.extend(env, seq.names[m], store.recClosure(seqId, m, captured));
      index = hi;
    }
    const auto last = static_cast<std::uint32_t>(seq.children.size() - 1);
    if (index == last) {
      evaluate(seq.children[index], env, std::move(k));
      return;
    }
    Frame f;
    f.kind = Frame::Kind::Sequence;
    f.expr = seqId;
    f.env = env;
    f.index = index;
    f.next = std::move(k);
    evaluate(seq.children[index], env, push(std::move(f)));
  };

  for (;;) {
    if (++steps > stepBudget_) {
      throw StepBudgetExceeded("deterministic step budget of " + std::to_string(stepBudget_) +
                               " reductions exceeded without a random choice or call");
    }
    switch (s.mode) {
      case State::Mode::Eval: {
        const Expr& e = store.expr(s.expr);
        switch (e.kind) {
          case ExprKind::Constant:
          case ExprKind::Quote:
            returnValue(e.constant, std::move(s.k));
            break;
          case ExprKind::Variable: {
            if (auto v = store.lookup(s.env, e.symbol)) {
              returnValue(*v, std::move(s.k));
            } else if (auto p = primitiveByName(store.symbolName(e.symbol))) {
              returnValue(store.primitive(*p), std::move(s.k));
            } else {
              throw RuntimeError("unbound variable: " + store.symbolName(e.symbol), e.span);
            }
            break;
          }
          case ExprKind::Lambda:
            returnValue(store.closure(s.expr, store.restrict(s.env, store.freeVariables(s.expr))), std::move(s.k));
            break;
          case ExprKind::If: {
            Frame f;
            f.kind = Frame::Kind::Test;
            f.expr = s.expr;
            f.env = s.env;
            f.next = std::move(s.k);
            evaluate(e.children[0], s.env, push(std::move(f)));
            break;
          }
          case ExprKind::Application: {
            Frame f;
            f.kind = Frame::Kind::Operands;
            f.expr = s.expr;
            f.env = s.env;
            f.index = 1;
            f.next = std::move(s.k);
            evaluate(e.children[0], s.env, push(std::move(f)));
            break;
          }
          case ExprKind::DefineSequence:
            continueSequence(s.expr, s.env, 0, std::move(s.k));
            break;
        }
        break;
      }

      case State::Mode::Return: {
        if (!s.k) return Terminal{s.value};
        const Frame& f = *s.k;
        switch (f.kind) {
          case Frame::Kind::Test: {
            const Expr& e = store.expr(f.expr);
            evaluate(store.isTrue(s.value) ? e.children[1] : e.children[2], f.env, f.next);
            break;
          }
          case Frame::Kind::Operands: {
            const Expr& e = store.expr(f.expr);
            std::vector<ValueId> values = f.values;
            values.push_back(s.value);
            if (f.index < e.children.size()) {
              Frame g;
              g.kind = Frame::Kind::Operands;
              g.expr = f.expr;
              g.env = f.env;
              g.index = f.index + 1;
              g.values = std::move(values);
              g.next = f.next;
              ExprId operand = e.children[f.index];
              EnvId env = f.env;
              evaluate(operand, env, push(std::move(g)));
            } else {
              ValueId proc = values.front();
              values.erase(values.begin());
              apply(proc, std::move(values), e.span, f.next);
            }
            break;
          }
          case Frame::Kind::Sequence: {
            const Expr& e = store.expr(f.expr);
            EnvId env = f.env;
            if (f.index < e.names.size()) env = store.extend(env, e.names[f.index], s.value);
            continueSequence(f.expr, env, f.index + 1, f.next);
            break;
          }
          case Frame::Kind::MapStep: {
            std::vector<ValueId> acc = f.values;
            acc.push_back(s.value);
            if (store.kind(f.rest) == ValueKind::Nil) {
              returnValue(store.list(acc), f.next);
              break;
            }
            Frame g = f;
            g.values = std::move(acc);
            g.rest = store.cdr(f.rest);
            ValueId item = store.car(f.rest);
            ValueId proc = f.proc;
            apply(proc, {item}, f.site, push(std::move(g)));
            break;
          }
          case Frame::Kind::RepeatStep: {
            std::vector<ValueId> acc = f.values;
            acc.push_back(s.value);
            if (f.index == 0) {
              returnValue(store.list(acc), f.next);
              break;
            }
            Frame g = f;
            g.values = std::move(acc);
            g.index = f.index - 1;
            ValueId proc = f.proc;
            apply(proc, {}, f.site, push(std::move(g)));
            break;
          }
        }
        break;
      }

      case State::Mode::Apply: {
        const ValueNode& callee = store.node(s.proc);
        switch (callee.kind) {
          case ValueKind::Primitive: {
            Primitive p = store.primitiveOf(s.proc);
            if (isRandomPrimitive(p)) {
              Support support = erpSupport(store, p, s.args, s.site);
              return RandomChoice{std::move(s.k), std::move(support.values), std::move(support.probs)};
            }
            if (p == Primitive::Map) {
              requireArity(s.args, 2, 2, "map", s.site);
              ValueId items = s.args[1];
              requireList(store, items, "map", s.site);
              if (store.kind(items) == ValueKind::Nil) {
                returnValue(store.nil(), std::move(s.k));
                break;
              }
              Frame g;
              g.kind = Frame::Kind::MapStep;
              g.proc = s.args[0];
              g.rest = store.cdr(items);
              g.next = std::move(s.k);
              ValueId proc = s.args[0];
              ValueId first = store.car(items);
              SourceSpan site = s.site;
              g.site = site;
              apply(proc, {first}, site, push(std::move(g)));
              break;
            }
            if (p == Primitive::Repeat) {
              requireArity(s.args, 2, 2, "repeat", s.site);
              std::size_t n = requireIndex(store, s.args[0], "repeat", s.site);
              if (n == 0) {
                returnValue(store.nil(), std::move(s.k));
                break;
              }
              Frame g;
              g.kind = Frame::Kind::RepeatStep;
              g.proc = s.args[1];
              g.index = static_cast<std::uint32_t>(n - 1);
              g.next = std::move(s.k);
              ValueId proc = s.args[1];
              SourceSpan site = s.site;
              g.site = site;
              apply(proc, {}, site, push(std::move(g)));
              break;
            }
            returnValue(applyPrimitive(store, p, s.args, s.site), std::move(s.k));
            break;
          }
          case ValueKind::Closure: {
            const ExprId lambdaId(callee.a);
            const Expr& lambda = store.expr(lambdaId);
            if (lambda.names.size() != s.args.size()) {
              throw RuntimeError("procedure expects " + std::to_string(lambda.names.size()) + " arguments, got " +
                                     std::to_string(s.args.size()),
                                 s.site);
            }
            EnvId env(callee.b);
            for (std::size_t i = 0; i < s.args.size(); ++i) env = store.extend(env, lambda.names[i], s.args[i]);
            ExprId body = lambda.children[0];
            env = store.restrict(env, store.freeVariables(body));
            return Subcall{std::move(s.k), {body, env}};
          }
          case ValueKind::RecClosure: {
            const ExprId seqId(callee.a);
            const EnvId captured(callee.b);
            const std::uint32_t member = callee.c;
            const Expr& seq = store.expr(seqId);
            const Expr& lambda = store.expr(seq.children[member]);
            if (lambda.names.size() != s.args.size()) {
              throw RuntimeError(store.symbolName(seq.names[member]) + " expects " +
                                     std::to_string(lambda.names.size()) + " arguments, got " +
                                     std::to_string(s.args.size()),
                                 s.site);
            }
            auto [lo, hi] = lambdaGroup(store, seq, member);
            EnvId env = captured;
            for (std::uint32_t m = lo; m < hi; ++m) env = store.extend(env, seq.names[m], store.recClosure(seqId, m, captured));
            for (std::size_t i = 0; i < s.args.size(); ++i) env = store.extend(env, lambda.names[i], s.args[i]);
            ExprId body = lambda.children[0];
            env = store.restrict(env, store.freeVariables(body));
            return Subcall{std::move(s.k), {body, env}};
          }
          default:
            throw RuntimeError("attempt to apply a non-procedure: " + describe(store, s.proc), s.site);
        }
        break;
      }
    }
  }
}

}  // namespace dpm

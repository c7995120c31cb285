#include "pwabs/logic.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <queue>
#include <sstream>

#include "pwabs/error.hpp"

namespace pwabs {

// ---------------------------------------------------------------- printing

bool Ltl::propositional() const {
  switch (op) {
    case LtlOp::True:
    case LtlOp::False:
    case LtlOp::Atom:
      return true;
    case LtlOp::Not:
    case LtlOp::And:
    case LtlOp::Or:
      return std::all_of(args.begin(), args.end(), [](const Ltl& a) { return a.propositional(); });
    default:
      return false;
  }
}

std::string Ltl::to_string(std::span<const std::string> names) const {
  auto name = [&](int i) {
    return i >= 0 && static_cast<std::size_t>(i) < names.size() ? names[static_cast<std::size_t>(i)]
                                                                 : "a" + std::to_string(i);
  };
  switch (op) {
    case LtlOp::True: return "true";
    case LtlOp::False: return "false";
    case LtlOp::Atom: return name(atom);
    case LtlOp::Not: return "!" + args[0].to_string(names);
    case LtlOp::And: return "(" + args[0].to_string(names) + " & " + args[1].to_string(names) + ")";
    case LtlOp::Or: return "(" + args[0].to_string(names) + " | " + args[1].to_string(names) + ")";
    case LtlOp::Next: return "X " + args[0].to_string(names);
    case LtlOp::Until: return "(" + args[0].to_string(names) + " U " + args[1].to_string(names) + ")";
    case LtlOp::Eventually: return "F " + args[0].to_string(names);
    case LtlOp::Always: return "G " + args[0].to_string(names);
  }
  return "?";
}

// ---------------------------------------------------------------- parser

namespace {

enum class Tok { Ident, LParen, RParen, Not, And, Or, Implies, Always, Eventually, Next, Until, True, False, End };

struct Token {
  Tok kind;
  std::string text;
  int column;  // 1-based
};

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    const int col = static_cast<int>(i) + 1;
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    auto two = [&](const char* t) { return s.substr(i, 2) == t; };
    if (two("[]")) { out.push_back({Tok::Always, "[]", col}); i += 2; continue; }
    if (two("<>")) { out.push_back({Tok::Eventually, "<>", col}); i += 2; continue; }
    if (two("->")) { out.push_back({Tok::Implies, "->", col}); i += 2; continue; }
    if (two("&&")) { out.push_back({Tok::And, "&&", col}); i += 2; continue; }
    if (two("||")) { out.push_back({Tok::Or, "||", col}); i += 2; continue; }
    switch (c) {
      case '(': out.push_back({Tok::LParen, "(", col}); ++i; continue;
      case ')': out.push_back({Tok::RParen, ")", col}); ++i; continue;
      case '!':
      case '~': out.push_back({Tok::Not, std::string(1, c), col}); ++i; continue;
      case '&': out.push_back({Tok::And, "&", col}); ++i; continue;
      case '|': out.push_back({Tok::Or, "|", col}); ++i; continue;
      default: break;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) ++j;
      std::string word(s.substr(i, j - i));
      Tok kind = Tok::Ident;
      if (word == "G") kind = Tok::Always;
      else if (word == "F") kind = Tok::Eventually;
      else if (word == "X") kind = Tok::Next;
      else if (word == "U") kind = Tok::Until;
      else if (word == "true") kind = Tok::True;
      else if (word == "false") kind = Tok::False;
      out.push_back({kind, word, col});
      i = j;
      continue;
    }
    throw SyntaxError(std::string("unexpected character '") + c + "'", col);
  }
  out.push_back({Tok::End, "", static_cast<int>(s.size()) + 1});
  return out;
}

class Parser {
 public:
  Parser(std::vector<Token> toks, std::span<const std::string> names) : toks_(std::move(toks)), names_(names) {}

  Ltl parse() {
    Ltl f = implication();
    if (peek().kind != Tok::End) throw SyntaxError("unexpected '" + peek().text + "'", peek().column);
    return f;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  Token take() { return toks_[pos_++]; }

  Ltl implication() {
    Ltl lhs = disjunction();
    if (peek().kind == Tok::Implies) {
      take();
      Ltl rhs = implication();
      return Ltl::binary(LtlOp::Or, Ltl::unary(LtlOp::Not, std::move(lhs)), std::move(rhs));
    }
    return lhs;
  }

  Ltl disjunction() {
    Ltl lhs = conjunction();
    while (peek().kind == Tok::Or) {
      take();
      lhs = Ltl::binary(LtlOp::Or, std::move(lhs), conjunction());
    }
    return lhs;
  }

  Ltl conjunction() {
    Ltl lhs = until();
    while (peek().kind == Tok::And) {
      take();
      lhs = Ltl::binary(LtlOp::And, std::move(lhs), until());
    }
    return lhs;
  }

  Ltl until() {
    Ltl lhs = unary();
    if (peek().kind == Tok::Until) {
      take();
      return Ltl::binary(LtlOp::Until, std::move(lhs), until());
    }
    return lhs;
  }

  Ltl unary() {
    const Token t = take();
    switch (t.kind) {
      case Tok::Not: return Ltl::unary(LtlOp::Not, unary());
      case Tok::Always: return Ltl::unary(LtlOp::Always, unary());
      case Tok::Eventually: return Ltl::unary(LtlOp::Eventually, unary());
      case Tok::Next: return Ltl::unary(LtlOp::Next, unary());
      case Tok::True: return Ltl::constant(true);
      case Tok::False: return Ltl::constant(false);
      case Tok::LParen: {
        Ltl inner = implication();
        if (peek().kind != Tok::RParen)
          throw SyntaxError(peek().kind == Tok::End ? "unbalanced parenthesis" : "expected ')'", peek().column);
        take();
        return inner;
      }
      case Tok::Ident: {
        const auto it = std::find(names_.begin(), names_.end(), t.text);
        if (it == names_.end()) throw UndeclaredAtom("undeclared atom '" + t.text + "'");
        return Ltl::prop(static_cast<int>(it - names_.begin()));
      }
      case Tok::End: throw SyntaxError("unexpected end of formula", t.column);
      default: throw SyntaxError("unexpected '" + t.text + "'", t.column);
    }
  }

  std::vector<Token> toks_;
  std::span<const std::string> names_;
  std::size_t pos_ = 0;
};

}  // namespace

Ltl parse_ltl(std::string_view text, std::span<const std::string> atom_names) {
  return Parser(tokenize(text), atom_names).parse();
}

Ltl parse_ltl(std::string_view text, std::span<const Atom> atoms) {
  std::vector<std::string> names;
  for (const auto& a : atoms) names.push_back(a.name);
  return parse_ltl(text, std::span<const std::string>(names));
}

// ---------------------------------------------------------------- NNF

namespace {

Ltl nnf(const Ltl& f, bool negate) {
  switch (f.op) {
    case LtlOp::True:
    case LtlOp::False:
      return Ltl::constant((f.op == LtlOp::True) != negate);
    case LtlOp::Atom:
      return negate ? Ltl::unary(LtlOp::Not, f) : f;
    case LtlOp::Not:
      return nnf(f.args[0], !negate);
    case LtlOp::And:
    case LtlOp::Or: {
      const bool is_and = (f.op == LtlOp::And) != negate;
      return Ltl::binary(is_and ? LtlOp::And : LtlOp::Or, nnf(f.args[0], negate), nnf(f.args[1], negate));
    }
    case LtlOp::Next:
      return Ltl::unary(LtlOp::Next, nnf(f.args[0], negate));
    case LtlOp::Eventually:
      return Ltl::unary(negate ? LtlOp::Always : LtlOp::Eventually, nnf(f.args[0], negate));
    case LtlOp::Always:
      return Ltl::unary(negate ? LtlOp::Eventually : LtlOp::Always, nnf(f.args[0], negate));
    case LtlOp::Until:
      if (!negate) return Ltl::binary(LtlOp::Until, nnf(f.args[0], false), nnf(f.args[1], false));
      // !(a U b) has no U-only NNF without release; keep the negation on top.
      return Ltl::unary(LtlOp::Not, Ltl::binary(LtlOp::Until, nnf(f.args[0], false), nnf(f.args[1], false)));
  }
  return f;
}

}  // namespace

Ltl to_nnf(const Ltl& f) { return nnf(f, false); }

bool eval_propositional(const Ltl& f, Letter letter) {
  switch (f.op) {
    case LtlOp::True: return true;
    case LtlOp::False: return false;
    case LtlOp::Atom: return ((letter >> f.atom) & 1U) != 0;
    case LtlOp::Not: return !eval_propositional(f.args[0], letter);
    case LtlOp::And: return eval_propositional(f.args[0], letter) && eval_propositional(f.args[1], letter);
    case LtlOp::Or: return eval_propositional(f.args[0], letter) || eval_propositional(f.args[1], letter);
    default: throw PreconditionViolation("eval_propositional on a temporal formula");
  }
}

// ---------------------------------------------------------------- automata

bool BuchiAutomaton::accepts_lasso(std::span<const Letter> prefix, std::span<const Letter> cycle) const {
  if (cycle.empty()) throw PreconditionViolation("lasso cycle must be nonempty");
  int q = initial;
  for (Letter a : prefix) q = next(q, a);
  std::map<int, int> seen;  // state at the start of a cycle iteration -> iteration
  std::vector<bool> iteration_hits;
  for (int it = 0;; ++it) {
    if (auto f = seen.find(q); f != seen.end()) {
      for (int j = f->second; j < it; ++j)
        if (iteration_hits[static_cast<std::size_t>(j)]) return true;
      return false;
    }
    seen[q] = it;
    bool hit = accepting[static_cast<std::size_t>(q)];
    for (Letter a : cycle) {
      q = next(q, a);
      hit = hit || accepting[static_cast<std::size_t>(q)];
    }
    iteration_hits.push_back(hit);
  }
}

std::string BuchiAutomaton::to_dot(std::span<const std::string> atom_names) const {
  std::ostringstream os;
  os << "digraph buchi {\n  rankdir=LR;\n  init [shape=point];\n";
  for (int s = 0; s < size(); ++s)
    os << "  s" << s << " [label=\"" << names[static_cast<std::size_t>(s)] << "\" shape="
       << (accepting[static_cast<std::size_t>(s)] ? "doublecircle" : "circle") << "];\n";
  os << "  init -> s" << initial << ";\n";
  auto letter_label = [&](Letter a) {
    std::string out;
    for (int i = 0; i < num_atoms; ++i) {
      if (!out.empty()) out += "&";
      const std::string nm = static_cast<std::size_t>(i) < atom_names.size() ? atom_names[static_cast<std::size_t>(i)]
                                                                              : "a" + std::to_string(i);
      out += ((a >> i) & 1U) ? nm : "!" + nm;
    }
    return out.empty() ? std::string("true") : out;
  };
  for (int s = 0; s < size(); ++s) {
    std::map<int, std::vector<std::string>> by_target;
    for (int a = 0; a < alphabet_size(); ++a)
      by_target[next(s, static_cast<Letter>(a))].push_back(letter_label(static_cast<Letter>(a)));
    for (const auto& [t, labels] : by_target) {
      std::string lab;
      for (const auto& l : labels) lab += (lab.empty() ? "" : " | ") + l;
      os << "  s" << s << " -> s" << t << " [label=\"" << lab << "\"];\n";
    }
  }
  os << "}\n";
  return os.str();
}

namespace {

// One deterministic pattern automaton. `sink` is a rejecting absorbing state
// (or -1). Safety components accept every run that avoids the sink; Büchi
// components additionally need `accepting` infinitely often.
struct Component {
  bool buchi = false;
  int initial = 0;
  int sink = -1;
  std::vector<std::string> names;
  std::vector<bool> accepting;
  std::vector<std::vector<int>> delta;  // [state][letter]
};

Component make_component(int n_states, int n_letters) {
  Component c;
  c.delta.assign(static_cast<std::size_t>(n_states), std::vector<int>(static_cast<std::size_t>(n_letters), 0));
  c.accepting.assign(static_cast<std::size_t>(n_states), false);
  return c;
}

Component always(const Ltl& p, int letters) {
  Component c = make_component(2, letters);
  c.names = {"safe", "sink"};
  c.sink = 1;
  c.accepting = {true, false};
  for (int a = 0; a < letters; ++a) {
    c.delta[0][static_cast<std::size_t>(a)] = eval_propositional(p, static_cast<Letter>(a)) ? 0 : 1;
    c.delta[1][static_cast<std::size_t>(a)] = 1;
  }
  return c;
}

Component recurrence(const Ltl& p, int letters) {
  Component c = make_component(2, letters);
  c.buchi = true;
  c.names = {"wait", "seen"};
  c.accepting = {false, true};
  for (int s = 0; s < 2; ++s)
    for (int a = 0; a < letters; ++a)
      c.delta[static_cast<std::size_t>(s)][static_cast<std::size_t>(a)] =
          eval_propositional(p, static_cast<Letter>(a)) ? 1 : 0;
  return c;
}

Component eventually(const Ltl& p, int letters) {
  Component c = make_component(2, letters);
  c.buchi = true;
  c.names = {"wait", "done"};
  c.accepting = {false, true};
  for (int a = 0; a < letters; ++a) {
    c.delta[0][static_cast<std::size_t>(a)] = eval_propositional(p, static_cast<Letter>(a)) ? 1 : 0;
    c.delta[1][static_cast<std::size_t>(a)] = 1;
  }
  return c;
}

Component until(const Ltl& p, const Ltl& q, int letters) {
  Component c = make_component(3, letters);
  c.buchi = true;
  c.names = {"wait", "done", "sink"};
  c.sink = 2;
  c.accepting = {false, true, false};
  for (int a = 0; a < letters; ++a) {
    const auto l = static_cast<Letter>(a);
    c.delta[0][static_cast<std::size_t>(a)] = eval_propositional(q, l) ? 1 : (eval_propositional(p, l) ? 0 : 2);
    c.delta[1][static_cast<std::size_t>(a)] = 1;
    c.delta[2][static_cast<std::size_t>(a)] = 2;
  }
  return c;
}

Component first_letter(const Ltl& p, int letters) {
  Component c = make_component(3, letters);
  c.buchi = true;
  c.names = {"init", "done", "sink"};
  c.sink = 2;
  c.accepting = {false, true, false};
  for (int a = 0; a < letters; ++a) {
    c.delta[0][static_cast<std::size_t>(a)] = eval_propositional(p, static_cast<Letter>(a)) ? 1 : 2;
    c.delta[1][static_cast<std::size_t>(a)] = 1;
    c.delta[2][static_cast<std::size_t>(a)] = 2;
  }
  return c;
}

void flatten_and(const Ltl& f, std::vector<Ltl>& out) {
  if (f.op == LtlOp::And) {
    flatten_and(f.args[0], out);
    flatten_and(f.args[1], out);
  } else {
    out.push_back(f);
  }
}

[[noreturn]] void unsupported(const Ltl& f, std::span<const std::string> names, const char* why) {
  throw UnsupportedFragment("formula outside the supported fragment: " + f.to_string(names) + " (" + why + ")");
}

// Body of a G: conjunction of p, F p, G p, G F p, F G F p.
void collect_always(const Ltl& body, int letters, std::vector<Component>& out, std::span<const std::string> names) {
  std::vector<Ltl> parts;
  flatten_and(body, parts);
  for (const auto& p : parts) {
    if (p.propositional()) {
      out.push_back(always(p, letters));
    } else if (p.op == LtlOp::Always) {
      collect_always(p.args[0], letters, out, names);
    } else if (p.op == LtlOp::Eventually && p.args[0].propositional()) {
      out.push_back(recurrence(p.args[0], letters));
    } else if (p.op == LtlOp::Eventually && p.args[0].op == LtlOp::Always && p.args[0].args[0].op == LtlOp::Eventually &&
               p.args[0].args[0].args[0].propositional()) {
      out.push_back(recurrence(p.args[0].args[0].args[0], letters));
    } else if (p.op == LtlOp::Eventually && p.args[0].op == LtlOp::Always) {
      unsupported(p, names, "persistence F G is not deterministic-Büchi expressible");
    } else {
      unsupported(p, names, "expected a propositional formula or F of one under G");
    }
  }
}

void collect_top(const Ltl& f, int letters, std::vector<Component>& out, std::span<const std::string> names) {
  std::vector<Ltl> parts;
  flatten_and(f, parts);
  for (const auto& p : parts) {
    if (p.propositional()) {
      out.push_back(first_letter(p, letters));
    } else if (p.op == LtlOp::Always) {
      collect_always(p.args[0], letters, out, names);
    } else if (p.op == LtlOp::Eventually) {
      const Ltl& inner = p.args[0];
      if (inner.propositional()) {
        out.push_back(eventually(inner, letters));
      } else if (inner.op == LtlOp::Always && inner.args[0].op == LtlOp::Eventually &&
                 inner.args[0].args[0].propositional()) {
        out.push_back(recurrence(inner.args[0].args[0], letters));
      } else if (inner.op == LtlOp::Always) {
        unsupported(p, names, "persistence F G is not deterministic-Büchi expressible");
      } else {
        unsupported(p, names, "F must apply to a propositional formula");
      }
    } else if (p.op == LtlOp::Until) {
      if (!p.args[0].propositional()) unsupported(p.args[0], names, "U operands must be propositional");
      if (!p.args[1].propositional()) unsupported(p.args[1], names, "U operands must be propositional");
      out.push_back(until(p.args[0], p.args[1], letters));
    } else {
      unsupported(p, names, "no pattern matches");
    }
  }
}

}  // namespace

BuchiAutomaton to_dba(const Ltl& formula, int num_atoms, std::span<const std::string> atom_names) {
  if (num_atoms < 0 || num_atoms > 16) throw PreconditionViolation("to_dba supports at most 16 atoms");
  const Ltl f = to_nnf(formula);
  const int letters = 1 << num_atoms;
  std::vector<Component> comps;
  collect_top(f, letters, comps, atom_names);

  std::vector<int> buchi_idx;
  for (std::size_t i = 0; i < comps.size(); ++i)
    if (comps[i].buchi) buchi_idx.push_back(static_cast<int>(i));
  const int k = std::max<int>(1, static_cast<int>(buchi_idx.size()));

  // Product state: component states + degeneralization counter; any
  // component sink collapses into one global sink.
  using Key = std::vector<int>;
  std::map<Key, int> index;
  std::vector<Key> keys;
  const Key sink_key{-1};
  auto is_sink = [&](const Key& key) {
    for (std::size_t i = 0; i < comps.size(); ++i)
      if (key[i] == comps[i].sink) return true;
    return false;
  };
  auto comp_accepting = [&](const Key& key, int which) {
    if (buchi_idx.empty()) return true;
    const auto ci = static_cast<std::size_t>(buchi_idx[static_cast<std::size_t>(which)]);
    return static_cast<bool>(comps[ci].accepting[static_cast<std::size_t>(key[ci])]);
  };
  auto intern = [&](const Key& key) {
    const Key norm = is_sink(key) || key == sink_key ? sink_key : key;
    auto [it, inserted] = index.emplace(norm, static_cast<int>(keys.size()));
    if (inserted) keys.push_back(norm);
    return it->second;
  };

  Key init;
  for (const auto& c : comps) init.push_back(c.initial);
  init.push_back(0);
  BuchiAutomaton out;
  out.num_atoms = num_atoms;
  out.initial = intern(init);

  for (std::size_t s = 0; s < keys.size(); ++s) {
    const Key key = keys[s];
    std::vector<int> row(static_cast<std::size_t>(letters));
    for (int a = 0; a < letters; ++a) {
      if (key == sink_key) {
        row[static_cast<std::size_t>(a)] = intern(sink_key);
        continue;
      }
      Key nxt(key.size());
      for (std::size_t i = 0; i < comps.size(); ++i)
        nxt[i] = comps[i].delta[static_cast<std::size_t>(key[i])][static_cast<std::size_t>(a)];
      const int counter = key.back();
      nxt.back() = comp_accepting(key, counter) ? (counter + 1) % k : counter;
      row[static_cast<std::size_t>(a)] = intern(nxt);
    }
    out.delta.push_back(std::move(row));
  }

  const bool single_counter = k == 1;
  for (const auto& key : keys) {
    if (key == sink_key) {
      out.names.push_back("sink");
      out.accepting.push_back(false);
      continue;
    }
    std::string name;
    for (std::size_t i = 0; i < comps.size(); ++i) {
      if (!name.empty()) name += ",";
      name += comps[i].names[static_cast<std::size_t>(key[i])];
    }
    if (!single_counter) name += "#" + std::to_string(key.back());
    if (name.empty()) name = "accept";
    out.names.push_back(name);
    out.accepting.push_back(key.back() == 0 && comp_accepting(key, 0));
  }
  return out;
}

// ---------------------------------------------------------------- atoms

std::vector<Truth> eval_atoms(const Region& region, std::span<const Atom> atoms) {
  std::vector<Truth> out;
  for (const auto& atom : atoms) {
    bool all_inside = true;
    bool all_outside = true;
    for (const auto& piece : region.pieces()) {
      if (is_empty(piece)) continue;
      if (!inside_halfspace(piece, atom.h, atom.k)) all_inside = false;
      if (!is_empty(piece.with_halfspace(atom.h, atom.k))) all_outside = false;
      if (!all_inside && !all_outside) break;
    }
    out.push_back(all_inside ? Truth::True : (all_outside ? Truth::False : Truth::Mixed));
  }
  return out;
}

Letter letter_of(std::span<const Truth> truths) {
  Letter l = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    if (truths[i] == Truth::Mixed) throw PreconditionViolation("letter_of: atom value is mixed");
    if (truths[i] == Truth::True) l |= (Letter{1} << i);
  }
  return l;
}

}  // namespace pwabs

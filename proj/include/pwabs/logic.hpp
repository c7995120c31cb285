#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pwabs/geometry.hpp"

namespace pwabs {

/// Named open halfspace h.x < k over the continuous state.
struct Atom {
  std::string name;
  Vec h;
  double k = 0.0;
};

enum class LtlOp { True, False, Atom, Not, And, Or, Next, Until, Eventually, Always };

struct Ltl {
  LtlOp op = LtlOp::True;
  int atom = -1;  // index into the declared atom list
  std::vector<Ltl> args;

  static Ltl constant(bool v) { return Ltl{v ? LtlOp::True : LtlOp::False, -1, {}}; }
  static Ltl prop(int index) { return Ltl{LtlOp::Atom, index, {}}; }
  static Ltl unary(LtlOp op, Ltl a) { return Ltl{op, -1, {std::move(a)}}; }
  static Ltl binary(LtlOp op, Ltl a, Ltl b) { return Ltl{op, -1, {std::move(a), std::move(b)}}; }

  bool propositional() const;
  std::string to_string(std::span<const std::string> names) const;
  friend bool operator==(const Ltl&, const Ltl&) = default;
};

/// Grammar: G/[] (always), F/<> (eventually), X, U, &, |, !, ->, parentheses,
/// true/false and atom identifiers. Throws SyntaxError (1-based column) or
/// UndeclaredAtom.
Ltl parse_ltl(std::string_view text, std::span<const std::string> atom_names);
Ltl parse_ltl(std::string_view text, std::span<const Atom> atoms);

/// Negation normal form: negations pushed onto atoms.
Ltl to_nnf(const Ltl& f);

/// Letter = bitmask of atoms that hold.
using Letter = std::uint32_t;

bool eval_propositional(const Ltl& f, Letter letter);

struct BuchiAutomaton {
  int num_atoms = 0;
  int initial = 0;
  std::vector<std::string> names;
  std::vector<std::vector<int>> delta;  // [state][letter]
  std::vector<bool> accepting;

  int size() const { return static_cast<int>(delta.size()); }
  int alphabet_size() const { return 1 << num_atoms; }
  int next(int state, Letter letter) const { return delta[static_cast<std::size_t>(state)][letter]; }
  /// Acceptance of the ultimately periodic word prefix . cycle^omega.
  bool accepts_lasso(std::span<const Letter> prefix, std::span<const Letter> cycle) const;
  std::string to_dot(std::span<const std::string> atom_names) const;
};

/// Deterministic complete Büchi automaton for the supported fragment:
/// conjunctions of G p, F p, G F p, p U q, plain p (p, q propositional), with
/// G distributing over conjunctions so G(p & F q) is covered. F G p has no
/// deterministic Büchi automaton and is rejected like anything else outside
/// the fragment (UnsupportedFragment naming the subformula).
BuchiAutomaton to_dba(const Ltl& f, int num_atoms, std::span<const std::string> atom_names = {});

enum class Truth { True, False, Mixed };

/// Per atom: True if the region lies inside the halfspace, False if it misses
/// it, Mixed otherwise.
std::vector<Truth> eval_atoms(const Region& region, std::span<const Atom> atoms);

/// Letter of a region whose atom values are all definite.
Letter letter_of(std::span<const Truth> truths);

}  // namespace pwabs

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wavespec Authors

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "wavespec/basis_mixture.hpp"
#include "wavespec/errors.hpp"
#include "wavespec/spectral_ops.hpp"
#include "wavespec/training.hpp"
#include "wavespec/wavelet.hpp"

namespace wavespec {

// ---------------------------------------------------------------------------
// Rule language
// ---------------------------------------------------------------------------
//
//   program   := rule*
//   rule      := "IF" cond ("AND" cond)* "THEN" ident ":=" verb
//   cond      := "c_" label ["." stat] cmp number
//   stat      := mean_abs | energy | max_abs      (default mean_abs)
//   cmp       := "<" | "<=" | ">" | ">="
//   verb      := ACTIVATE | DEACTIVATE
//
// Whitespace (including newlines) is insignificant; '#' starts a line comment.

enum class Stat { mean_abs, energy, max_abs };
enum class Cmp { lt, le, gt, ge };
enum class Verb { activate, deactivate };

inline std::string_view to_string(Stat s) {
  switch (s) {
    case Stat::mean_abs:
      return "mean_abs";
    case Stat::energy:
      return "energy";
    case Stat::max_abs:
      return "max_abs";
  }
  return "?";
}

inline std::string_view to_string(Cmp c) {
  switch (c) {
    case Cmp::lt:
      return "<";
    case Cmp::le:
      return "<=";
    case Cmp::gt:
      return ">";
    case Cmp::ge:
      return ">=";
  }
  return "?";
}

inline std::string_view to_string(Verb v) { return v == Verb::activate ? "ACTIVATE" : "DEACTIVATE"; }

inline bool compare(double lhs, Cmp c, double rhs) {
  switch (c) {
    case Cmp::lt:
      return lhs < rhs;
    case Cmp::le:
      return lhs <= rhs;
    case Cmp::gt:
      return lhs > rhs;
    case Cmp::ge:
      return lhs >= rhs;
  }
  return false;
}

struct Condition {
  Subband subband = Subband::aaa;
  Stat stat = Stat::mean_abs;
  Cmp cmp = Cmp::gt;
  double threshold = 0.0;

  bool operator==(const Condition&) const = default;
};

struct Rule {
  std::vector<Condition> conditions;
  std::string target;
  Verb verb = Verb::activate;
  std::size_t line = 0;  // source position; not part of structural equality

  bool operator==(const Rule& o) const {
    return conditions == o.conditions && target == o.target && verb == o.verb;
  }
};

struct RuleProgram {
  std::vector<Rule> rules;
  std::string source;

  bool operator==(const RuleProgram& o) const { return rules == o.rules; }
};

enum class ParseErrorKind {
  invalid_character,
  unexpected_token,
  unexpected_end,
  missing_if,
  missing_then,
  missing_assign,
  malformed_comparator,
  missing_comparator,
  bad_number,
  unknown_subband,
  unknown_stat,
  bad_target,
  unknown_verb,
};

inline std::string_view to_string(ParseErrorKind k) {
  switch (k) {
    case ParseErrorKind::invalid_character:
      return "invalid character";
    case ParseErrorKind::unexpected_token:
      return "unexpected token";
    case ParseErrorKind::unexpected_end:
      return "unexpected end of input";
    case ParseErrorKind::missing_if:
      return "expected IF";
    case ParseErrorKind::missing_then:
      return "expected AND or THEN";
    case ParseErrorKind::missing_assign:
      return "expected ':='";
    case ParseErrorKind::malformed_comparator:
      return "malformed comparator";
    case ParseErrorKind::missing_comparator:
      return "expected comparator";
    case ParseErrorKind::bad_number:
      return "invalid number";
    case ParseErrorKind::unknown_subband:
      return "unknown subband";
    case ParseErrorKind::unknown_stat:
      return "unknown statistic";
    case ParseErrorKind::bad_target:
      return "expected basis name";
    case ParseErrorKind::unknown_verb:
      return "expected ACTIVATE or DEACTIVATE";
  }
  return "?";
}

/// Positioned parse failure; line and column are 1-based.
class ParseError : public Error {
 public:
  ParseError(ParseErrorKind kind, std::size_t line, std::size_t column, const std::string& detail)
      : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + std::string(to_string(kind)) +
              (detail.empty() ? "" : " (" + detail + ")")),
        kind_(kind),
        line_(line),
        column_(column) {}

  ParseErrorKind kind() const { return kind_; }
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  ParseErrorKind kind_;
  std::size_t line_;
  std::size_t column_;
};

namespace detail {

enum class TokKind { word, number, op, assign, end };

struct Token {
  TokKind kind = TokKind::end;
  std::string text;
  std::size_t line = 1;
  std::size_t column = 1;
};

inline bool is_word_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
inline bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
}

inline std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  std::size_t i = 0, line = 1, col = 1;
  const auto advance = [&](std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  while (i < src.size()) {
    const char c = src[i];
    if (c == '#') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    Token t;
    t.line = line;
    t.column = col;
    std::size_t j = i;
    if (is_word_start(c)) {
      while (j < src.size() && is_word_char(src[j])) ++j;
      t.kind = TokKind::word;
    } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '+' || c == '-' ||
               (c == '.' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      ++j;
      while (j < src.size()) {
        const char d = src[j];
        const bool exp_sign = (d == '+' || d == '-') && (src[j - 1] == 'e' || src[j - 1] == 'E');
        if (std::isalnum(static_cast<unsigned char>(d)) || d == '.' || exp_sign) {
          ++j;
        } else {
          break;
        }
      }
      t.kind = TokKind::number;
    } else if (c == ':' && i + 1 < src.size() && src[i + 1] == '=') {
      j += 2;
      t.kind = TokKind::assign;
    } else if (c == '<' || c == '>' || c == '=' || c == '!') {
      while (j < src.size() && (src[j] == '<' || src[j] == '>' || src[j] == '=' || src[j] == '!')) ++j;
      t.kind = TokKind::op;
    } else {
      const auto byte = static_cast<unsigned>(static_cast<unsigned char>(c));
      std::ostringstream d;
      d << "byte 0x" << std::hex << byte;
      throw ParseError(ParseErrorKind::invalid_character, line, col, d.str());
    }
    t.text = std::string(src.substr(i, j - i));
    advance(j - i);
    out.push_back(std::move(t));
  }
  Token end;
  end.line = line;
  end.column = col;
  out.push_back(end);
  return out;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  std::vector<Rule> program() {
    std::vector<Rule> rules;
    while (peek().kind != TokKind::end) rules.push_back(rule());
    return rules;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_ == toks_.size() - 1 ? pos_ : pos_++]; }

  [[noreturn]] void fail(ParseErrorKind k, const Token& t, const std::string& detail = {}) const {
    if (t.kind == TokKind::end && k != ParseErrorKind::unexpected_end) {
      throw ParseError(ParseErrorKind::unexpected_end, t.line, t.column, std::string(to_string(k)));
    }
    throw ParseError(k, t.line, t.column, detail.empty() && t.kind != TokKind::end ? "'" + t.text + "'" : detail);
  }

  bool is_word(const Token& t, std::string_view w) const { return t.kind == TokKind::word && t.text == w; }

  Rule rule() {
    const Token& head = next();
    if (!is_word(head, "IF")) fail(ParseErrorKind::missing_if, head);
    Rule r;
    r.line = head.line;
    r.conditions.push_back(condition());
    while (true) {
      const Token& t = next();
      if (is_word(t, "AND")) {
        r.conditions.push_back(condition());
      } else if (is_word(t, "THEN")) {
        break;
      } else {
        fail(ParseErrorKind::missing_then, t);
      }
    }
    const Token& target = next();
    if (target.kind != TokKind::word || target.text == "IF" || target.text == "AND" || target.text == "THEN") {
      fail(ParseErrorKind::bad_target, target);
    }
    r.target = target.text;
    const Token& assign = next();
    if (assign.kind != TokKind::assign) fail(ParseErrorKind::missing_assign, assign);
    const Token& verb = next();
    if (is_word(verb, "ACTIVATE")) {
      r.verb = Verb::activate;
    } else if (is_word(verb, "DEACTIVATE")) {
      r.verb = Verb::deactivate;
    } else {
      fail(ParseErrorKind::unknown_verb, verb);
    }
    return r;
  }

  Condition condition() {
    Condition c;
    const Token& lhs = next();
    if (lhs.kind != TokKind::word || lhs.text.rfind("c_", 0) != 0) {
      fail(ParseErrorKind::unexpected_token, lhs, "expected c_<subband>, got '" + lhs.text + "'");
    }
    const std::string body = lhs.text.substr(2);
    const auto dot = body.find('.');
    const std::string label = body.substr(0, dot);
    const auto sb = subband_from_label(label);
    if (!sb) fail(ParseErrorKind::unknown_subband, lhs, "'" + label + "'");
    c.subband = *sb;
    if (dot != std::string::npos) {
      const std::string stat = body.substr(dot + 1);
      if (stat == "mean_abs") {
        c.stat = Stat::mean_abs;
      } else if (stat == "energy") {
        c.stat = Stat::energy;
      } else if (stat == "max_abs") {
        c.stat = Stat::max_abs;
      } else {
        fail(ParseErrorKind::unknown_stat, lhs, "'" + stat + "'");
      }
    }
    const Token& op = next();
    if (op.kind != TokKind::op) fail(ParseErrorKind::missing_comparator, op);
    if (op.text == "<") {
      c.cmp = Cmp::lt;
    } else if (op.text == "<=") {
      c.cmp = Cmp::le;
    } else if (op.text == ">") {
      c.cmp = Cmp::gt;
    } else if (op.text == ">=") {
      c.cmp = Cmp::ge;
    } else {
      fail(ParseErrorKind::malformed_comparator, op);
    }
    const Token& num = next();
    if (num.kind != TokKind::number) fail(ParseErrorKind::bad_number, num);
    c.threshold = parse_number(num);
    return c;
  }

  double parse_number(const Token& t) const {
    std::string_view s = t.text;
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) fail(ParseErrorKind::bad_number, t);
    return v;
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

inline std::string format_number(double v) {
  std::array<char, 64> buf{};
  const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), r.ptr);
}

}  // namespace detail

inline RuleProgram parse_rules(std::string_view text) {
  detail::Parser p(detail::lex(text));
  RuleProgram prog;
  prog.rules = p.program();
  prog.source = std::string(text);
  return prog;
}

inline std::string render(const Condition& c) {
  std::string s = "c_" + std::string(label(c.subband));
  if (c.stat != Stat::mean_abs) s += "." + std::string(to_string(c.stat));
  return s + " " + std::string(to_string(c.cmp)) + " " + detail::format_number(c.threshold);
}

inline std::string render(const Rule& r) {
  std::string s = "IF ";
  for (std::size_t i = 0; i < r.conditions.size(); ++i) {
    if (i > 0) s += " AND ";
    s += render(r.conditions[i]);
  }
  return s + " THEN " + r.target + " := " + std::string(to_string(r.verb));
}

/// Canonical text, one rule per line; thresholds use shortest round-trip form.
inline std::string render(const RuleProgram& p) {
  std::string s;
  for (const auto& r : p.rules) s += render(r) + "\n";
  return s;
}

// ---------------------------------------------------------------------------
// Rule evaluation
// ---------------------------------------------------------------------------

inline double subband_stat(const Volume& v, Stat stat) {
  switch (stat) {
    case Stat::mean_abs: {
      double s = 0.0;
      for (double x : v.values()) s += std::abs(x);
      return s / static_cast<double>(v.size());
    }
    case Stat::energy:
      return v.sum_squares();
    case Stat::max_abs:
      return v.max_abs();
  }
  return 0.0;
}

struct ConditionTrace {
  Condition condition;
  double value = 0.0;
  bool holds = false;
};

struct RuleTrace {
  std::size_t rule_index = 0;
  bool fired = false;
  std::vector<ConditionTrace> conditions;
  std::string action;  // "", "ACTIVATE db2", ...
  bool applied = false;  // false when fired but refused (deactivating the last basis) or a no-op
  std::string note;
};

inline std::string to_string(const RuleTrace& t) {
  std::ostringstream o;
  o << "rule " << t.rule_index << ": ";
  for (std::size_t i = 0; i < t.conditions.size(); ++i) {
    const auto& c = t.conditions[i];
    if (i > 0) o << " AND ";
    o << "c_" << label(c.condition.subband) << "." << to_string(c.condition.stat) << "=" << detail::format_number(c.value)
      << " " << to_string(c.condition.cmp) << " " << detail::format_number(c.condition.threshold) << " ["
      << (c.holds ? "true" : "false") << "]";
  }
  o << (t.fired ? " => " + t.action : " => not fired");
  if (!t.note.empty()) o << " (" << t.note << ")";
  return o.str();
}

/// Evaluates rules in order on the level-1 subbands of `coeffs`; each fired rule
/// updates the bank's active mask before the next rule is evaluated.
inline std::vector<RuleTrace> eval_rules(const RuleProgram& program, const WaveletCoeffs& coeffs, BasisBank& bank) {
  if (coeffs.levels.empty()) throw EvalError("eval_rules: empty coefficient set");
  const WaveletLevel& level = coeffs.levels.front();
  std::vector<RuleTrace> trace;
  for (std::size_t i = 0; i < program.rules.size(); ++i) {
    const Rule& r = program.rules[i];
    RuleTrace t;
    t.rule_index = i;
    t.fired = true;
    for (const Condition& c : r.conditions) {
      if (!level.has(c.subband)) {
        throw EvalError("rule " + std::to_string(i) + " references subband '" + std::string(label(c.subband)) +
                        "', which is not present at level 1");
      }
      const double v = subband_stat(level.at(c.subband), c.stat);
      const bool holds = compare(v, c.cmp, c.threshold);
      t.conditions.push_back({c, v, holds});
      t.fired = t.fired && holds;
    }
    if (t.fired) {
      t.action = std::string(to_string(r.verb)) + " " + r.target;
      const std::size_t k = bank.find(r.target);
      if (k == BasisBank::npos) throw EvalError("rule " + std::to_string(i) + " targets unknown basis '" + r.target + "'");
      const bool want = r.verb == Verb::activate;
      if (bank.is_active(k) == want) {
        t.note = "already " + std::string(want ? "active" : "inactive");
      } else if (bank.set_active(k, want)) {
        t.applied = true;
      } else {
        t.note = "refused: last active basis";
      }
    }
    trace.push_back(std::move(t));
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Cascades
// ---------------------------------------------------------------------------

struct CascadeLayer {
  std::array<double, 8> energy_in{};   // per subband, canonical order, before the nonlinearity
  std::array<double, 8> energy_out{};  // after the nonlinearity
};

struct CascadeResult {
  Volume output;
  std::vector<CascadeLayer> layers;
};

/// x^(l+1) = IDWT(phi^(l)(DWT(x^(l)))) for l = 0..depth-1 with the state's
/// hard-selected basis. Layer l uses layer_params[l] when given, otherwise the
/// basis' trained parameters.
inline CascadeResult cascade(const Volume& x, const ModelState& state, std::size_t depth,
                             std::span<const SpectralParams> layer_params = {}) {
  if (depth == 0) throw ContractError("cascade depth must be >= 1");
  if (!layer_params.empty() && layer_params.size() != depth) {
    throw ContractError("cascade: " + std::to_string(layer_params.size()) + " layer parameter sets for depth " +
                        std::to_string(depth));
  }
  const std::size_t k = state.bank.hard_select();
  const FilterBank& fb = state.bank.basis(k);
  CascadeResult r;
  r.output = x;
  for (std::size_t l = 0; l < depth; ++l) {
    const SpectralParams& p = layer_params.empty() ? state.params_for(k) : layer_params[l];
    const auto c = dwt3d(r.output, fb, state.config.boundary, state.dilation);
    const auto shrunk = apply_nonlinearity(c, p);
    CascadeLayer layer;
    c.for_each_block([&](std::size_t, Subband s, const Volume& v) {
      layer.energy_in[static_cast<std::size_t>(s)] += v.sum_squares();
    });
    shrunk.for_each_block([&](std::size_t, Subband s, const Volume& v) {
      layer.energy_out[static_cast<std::size_t>(s)] += v.sum_squares();
    });
    r.output = idwt3d(shrunk, fb);
    r.layers.push_back(layer);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Spectral memory
// ---------------------------------------------------------------------------

using SpectralKey = std::vector<double>;

inline constexpr std::size_t kSpectralKeyDim = 8;

/// Per-subband energies (summed over levels) in canonical order, keeping the k
/// largest; ties go to the earlier subband.
inline SpectralKey spectral_key(const WaveletCoeffs& coeffs, std::size_t k) {
  if (k > kSpectralKeyDim) {
    throw ContractError("spectral_key: k=" + std::to_string(k) + " exceeds the " + std::to_string(kSpectralKeyDim) +
                        " subbands");
  }
  SpectralKey e(kSpectralKeyDim, 0.0);
  coeffs.for_each_block([&](std::size_t, Subband s, const Volume& v) { e[static_cast<std::size_t>(s)] += v.sum_squares(); });
  std::array<std::size_t, kSpectralKeyDim> order{};
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return e[a] > e[b]; });
  SpectralKey key(kSpectralKeyDim, 0.0);
  for (std::size_t i = 0; i < k; ++i) key[order[i]] = e[order[i]];
  return key;
}

inline double key_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("key dimension mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

/// Append-only key/value store with a fixed key dimension.
template <class Value>
class SpectralMemory {
 public:
  struct Entry {
    SpectralKey key;
    Value value;
  };

  std::size_t insert(SpectralKey key, Value value) {
    if (!entries_.empty() && key.size() != entries_.front().key.size()) {
      throw ShapeError("memory key has dimension " + std::to_string(key.size()) + ", expected " +
                       std::to_string(entries_.front().key.size()));
    }
    for (double v : key) {
      if (!std::isfinite(v)) throw NumericalError("memory key contains a non-finite entry");
    }
    entries_.push_back({std::move(key), std::move(value)});
    return entries_.size() - 1;
  }

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
};

template <class Value>
struct LookupResult {
  std::size_t index = 0;
  const Value* value = nullptr;
  double distance = 0.0;
};

/// Euclidean nearest neighbour; the lowest insertion index wins ties.
template <class Value>
LookupResult<Value> memory_lookup(const SpectralMemory<Value>& mem, std::span<const double> key) {
  if (mem.empty()) throw LookupError("memory_lookup on an empty memory");
  LookupResult<Value> best;
  best.distance = INFINITY;
  for (std::size_t i = 0; i < mem.size(); ++i) {
    const double d = key_distance(mem.entries()[i].key, key);
    if (d < best.distance) {
      best.index = i;
      best.distance = d;
    }
  }
  best.value = &mem.entries()[best.index].value;
  return best;
}

struct ConditionedResult {
  Volume x_hat;
  SpectralKey key;
  std::size_t entry = 0;
  double distance = 0.0;
};

/// Retrieves the SpectralParams stored under the nearest key of x's spectrum
/// (hard-selected basis) and runs the forward pass with them on every basis.
inline ConditionedResult memory_conditioned_forward(const Volume& x, const ModelState& state,
                                                    const SpectralMemory<SpectralParams>& mem, std::size_t k) {
  const std::size_t b = state.bank.hard_select();
  ConditionedResult r;
  r.key = spectral_key(dwt3d(x, state.bank.basis(b), state.config.boundary, state.dilation), k);
  const auto hit = memory_lookup(mem, r.key);
  r.entry = hit.index;
  r.distance = hit.distance;
  ModelState conditioned = state;
  for (auto& p : conditioned.params) p = *hit.value;
  r.x_hat = forward(x, conditioned).x_hat;
  return r;
}

}  // namespace wavespec

#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "nestrank/intset.hpp"

namespace nestrank {

// Affine form over named loop variables; parameters are already folded into
// the constant. Loop bounds, steps and array subscripts are all NamedExpr.
struct NamedExpr {
  std::map<std::string, std::int64_t> terms;
  std::int64_t cst = 0;

  static NamedExpr constant(std::int64_t c) { return NamedExpr{{}, c}; }
  static NamedExpr var(const std::string& v) { return NamedExpr{{{v, 1}}, 0}; }

  bool is_constant() const { return terms.empty(); }

  NamedExpr& add(const NamedExpr& o, std::int64_t scale = 1) {
    for (const auto& [v, c] : o.terms) {
      terms[v] += c * scale;
      if (terms[v] == 0) terms.erase(v);
    }
    cst += o.cst * scale;
    return *this;
  }

  NamedExpr scaled(std::int64_t s) const {
    NamedExpr r;
    r.cst = cst * s;
    if (s != 0)
      for (const auto& [v, c] : terms) r.terms[v] = c * s;
    return r;
  }

  std::int64_t eval(const std::map<std::string, std::int64_t>& env) const {
    std::int64_t v = cst;
    for (const auto& [name, c] : terms) {
      auto it = env.find(name);
      if (it == env.end()) throw Error("unbound variable in expression: " + name);
      v += c * it->second;
    }
    return v;
  }

  LinearExpr to_linear(const std::map<std::string, int>& dim_index, int ndims) const {
    LinearExpr e;
    e.coef.assign(static_cast<std::size_t>(ndims), 0);
    e.cst = cst;
    for (const auto& [name, c] : terms) {
      auto it = dim_index.find(name);
      if (it == dim_index.end()) throw Error("variable not in space: " + name);
      e.coef[static_cast<std::size_t>(it->second)] += c;
    }
    return e;
  }

  std::string str() const {
    std::string out;
    for (const auto& [v, c] : terms) {
      if (c == 0) continue;
      if (out.empty()) {
        if (c == -1) out += "-";
        else if (c != 1) out += std::to_string(c) + " * ";
      } else {
        out += c > 0 ? " + " : " - ";
        std::int64_t a = c > 0 ? c : -c;
        if (a != 1) out += std::to_string(a) + " * ";
      }
      out += v;
    }
    if (out.empty()) return std::to_string(cst);
    if (cst > 0) out += " + " + std::to_string(cst);
    if (cst < 0) out += " - " + std::to_string(-cst);
    return out;
  }

  friend bool operator==(const NamedExpr& a, const NamedExpr& b) {
    return a.terms == b.terms && a.cst == b.cst;
  }
};

enum class LoopTag { NORMAL, MICROKERNEL_BAND };

// One loop: inclusive affine lower bound, exclusive upper bounds (more than
// one upper bound means their minimum; tiling introduces the second one),
// positive constant step.
struct Loop {
  std::string var;
  NamedExpr lower;
  std::vector<NamedExpr> uppers;
  std::int64_t step = 1;
  LoopTag tag = LoopTag::NORMAL;

  friend bool operator==(const Loop& a, const Loop& b) {
    return a.var == b.var && a.lower == b.lower && a.uppers == b.uppers && a.step == b.step &&
           a.tag == b.tag;
  }
};

enum class AccessMode { READ, WRITE };

struct ArrayRef {
  std::string array;
  std::vector<NamedExpr> index_exprs;
  AccessMode mode = AccessMode::READ;

  std::string str() const {
    std::string s = array;
    for (const NamedExpr& e : index_exprs) s += "[" + e.str() + "]";
    return s;
  }
  friend bool operator==(const ArrayRef& a, const ArrayRef& b) {
    return a.array == b.array && a.index_exprs == b.index_exprs && a.mode == b.mode;
  }
};

struct Statement {
  std::string id;
  std::vector<ArrayRef> reads;
  std::vector<ArrayRef> writes;
  std::string body_text;  // verbatim statement text for emission; may be empty

  friend bool operator==(const Statement& a, const Statement& b) {
    return a.id == b.id && a.reads == b.reads && a.writes == b.writes &&
           a.body_text == b.body_text;
  }
};

struct MicrokernelSpec {
  std::string callee;
  std::vector<std::string> band_loop_vars;
  std::vector<std::string> call_args;  // verbatim argument expressions

  friend bool operator==(const MicrokernelSpec& a, const MicrokernelSpec& b) {
    return a.callee == b.callee && a.band_loop_vars == b.band_loop_vars &&
           a.call_args == b.call_args;
  }
};

struct LoopNest {
  std::vector<Loop> loops;
  Statement stmt;
  std::map<std::string, std::int64_t> params;
  std::vector<std::string> annotations;
  std::optional<MicrokernelSpec> microkernel;

  std::vector<std::string> loop_vars() const {
    std::vector<std::string> v;
    v.reserve(loops.size());
    for (const Loop& l : loops) v.push_back(l.var);
    return v;
  }

  std::size_t band_begin() const {
    std::size_t b = loops.size();
    while (b > 0 && loops[b - 1].tag == LoopTag::MICROKERNEL_BAND) --b;
    return b;
  }

  // Reads first, then writes; the stable reference order used everywhere.
  std::vector<const ArrayRef*> all_refs() const {
    std::vector<const ArrayRef*> v;
    for (const ArrayRef& r : stmt.reads) v.push_back(&r);
    for (const ArrayRef& r : stmt.writes) v.push_back(&r);
    return v;
  }

  friend bool operator==(const LoopNest& a, const LoopNest& b) {
    return a.loops == b.loops && a.stmt == b.stmt && a.annotations == b.annotations &&
           a.microkernel == b.microkernel;
  }
};

// ---------------------------------------------------------------------------
// Affine expression parsing (used by the nest format)

namespace detail {

class ExprParser {
 public:
  // Grammar: expr := term (('+'|'-') term)*; term := factor (('*'|'/') factor)*;
  // factor := INT | IDENT | '(' expr ')' | '-' factor. Multiplication needs a
  // constant side; division needs two constant sides and must be exact.
  ExprParser(const std::string& text, const std::map<std::string, std::int64_t>& params,
             const std::set<std::string>& allowed_vars, int line)
      : text_(text), params_(params), vars_(allowed_vars), line_(line) {}

  NamedExpr parse() {
    NamedExpr e = expr();
    skip_ws();
    if (pos_ != text_.size())
      throw ParseError("line " + std::to_string(line_) + ": trailing characters in expression '" +
                       text_ + "'");
    return e;
  }

 private:
  NamedExpr expr() {
    NamedExpr acc = term();
    while (true) {
      skip_ws();
      if (peek() == '+') { ++pos_; acc.add(term()); }
      else if (peek() == '-') { ++pos_; acc.add(term(), -1); }
      else break;
    }
    return acc;
  }

  NamedExpr term() {
    NamedExpr acc = factor();
    while (true) {
      skip_ws();
      if (peek() == '*') {
        ++pos_;
        NamedExpr rhs = factor();
        if (acc.is_constant()) acc = rhs.scaled(acc.cst);
        else if (rhs.is_constant()) acc = acc.scaled(rhs.cst);
        else
          throw NonAffineExpressionError("line " + std::to_string(line_) +
                                         ": product of two variables in '" + text_ + "'");
      } else if (peek() == '/') {
        ++pos_;
        NamedExpr rhs = factor();
        if (!acc.is_constant() || !rhs.is_constant())
          throw NonAffineExpressionError("line " + std::to_string(line_) +
                                         ": division must be between constants in '" + text_ +
                                         "'");
        if (rhs.cst == 0)
          throw ParseError("line " + std::to_string(line_) + ": division by zero");
        if (acc.cst % rhs.cst != 0)
          throw NonAffineExpressionError("line " + std::to_string(line_) +
                                         ": non-exact constant division in '" + text_ + "'");
        acc = NamedExpr::constant(acc.cst / rhs.cst);
      } else {
        break;
      }
    }
    return acc;
  }

  NamedExpr factor() {
    skip_ws();
    char c = peek();
    if (c == '(') {
      ++pos_;
      NamedExpr e = expr();
      skip_ws();
      if (peek() != ')')
        throw ParseError("line " + std::to_string(line_) + ": expected ')' in '" + text_ + "'");
      ++pos_;
      return e;
    }
    if (c == '-') { ++pos_; return factor().scaled(-1); }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::int64_t v = 0;
      while (std::isdigit(static_cast<unsigned char>(peek()))) v = v * 10 + (text_[pos_++] - '0');
      return NamedExpr::constant(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string name;
      while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_')
        name += text_[pos_++];
      auto p = params_.find(name);
      if (p != params_.end()) return NamedExpr::constant(p->second);
      if (vars_.count(name)) return NamedExpr::var(name);
      throw UnboundParameterError("line " + std::to_string(line_) + ": unbound parameter '" +
                                  name + "'");
    }
    throw ParseError("line " + std::to_string(line_) + ": unexpected character '" +
                     std::string(1, c) + "' in expression '" + text_ + "'");
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  const std::string& text_;
  const std::map<std::string, std::int64_t>& params_;
  const std::set<std::string>& vars_;
  int line_;
  std::size_t pos_ = 0;
};

inline NamedExpr parse_expr(const std::string& text,
                            const std::map<std::string, std::int64_t>& params,
                            const std::set<std::string>& vars, int line) {
  return ExprParser(text, params, vars, line).parse();
}

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string t;
  while (is >> t) out.push_back(t);
  return out;
}

// Splits "a, b ,c" or "a b c" into names.
inline std::vector<std::string> split_names(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',' || std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) { out.push_back(cur); cur.clear(); }
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Nest-description parsing

// Parses the textual nest format:
//
//   param M = 4                       # parameters, bound to integers
//   loop i lower 0 upper M step 1     # outermost first
//   stmt S
//   read A[i][k]
//   write C[i][j]
//   body C[i][j] += A[i][k] * B[k][j];   # optional, verbatim emission text
//   microkernel gemm_kernel           # optional
//   band oi ofm ifm                   #   band loops (contiguous innermost)
//   arg &C[i][0]                      #   verbatim call arguments
//   annotation #pragma omp parallel for
//
// Lines whose first non-blank character is '#' are comments. annotation/arg/
// body keep the rest of the line verbatim.
inline LoopNest parse_nest(const std::string& text) {
  LoopNest nest;
  std::set<std::string> declared_vars;
  bool saw_stmt = false;
  bool in_microkernel = false;
  std::optional<MicrokernelSpec> mk;

  std::istringstream is(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    std::string line = detail::trim(raw);
    if (line.empty() || line[0] == '#') continue;

    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    std::string rest = detail::trim(line.substr(kw.size()));

    if (kw == "param") {
      auto toks = detail::split_ws(rest);
      if (toks.size() == 3 && toks[1] == "=") toks.erase(toks.begin() + 1);
      if (toks.size() != 2)
        throw ParseError("line " + std::to_string(lineno) + ": expected 'param NAME = INT'");
      try {
        nest.params[toks[0]] = std::stoll(toks[1]);
      } catch (const std::logic_error&) {
        throw ParseError("line " + std::to_string(lineno) + ": bad parameter value '" + toks[1] +
                         "'");
      }
    } else if (kw == "loop") {
      if (saw_stmt)
        throw ParseError("line " + std::to_string(lineno) + ": loops must precede the statement");
      auto toks = detail::split_ws(rest);
      if (toks.empty())
        throw ParseError("line " + std::to_string(lineno) + ": expected loop variable name");
      Loop loop;
      loop.var = toks[0];
      if (declared_vars.count(loop.var))
        throw ParseError("line " + std::to_string(lineno) + ": duplicate loop variable '" +
                         loop.var + "'");
      // Collect the segments between the lower/upper/step keywords so bound
      // expressions may contain spaces.
      std::map<std::string, std::string> segs;
      std::string current;
      for (std::size_t i = 1; i < toks.size(); ++i) {
        if (toks[i] == "lower" || toks[i] == "upper" || toks[i] == "step") {
          current = toks[i];
          if (segs.count(current))
            throw ParseError("line " + std::to_string(lineno) + ": duplicate '" + current + "'");
          segs[current] = "";
        } else if (current.empty()) {
          throw ParseError("line " + std::to_string(lineno) + ": unexpected token '" + toks[i] +
                           "'");
        } else {
          segs[current] += (segs[current].empty() ? "" : " ") + toks[i];
        }
      }
      if (!segs.count("lower") || !segs.count("upper"))
        throw ParseError("line " + std::to_string(lineno) +
                         ": loop needs 'lower' and 'upper' bounds");
      loop.lower = detail::parse_expr(segs["lower"], nest.params, declared_vars, lineno);
      loop.uppers = {detail::parse_expr(segs["upper"], nest.params, declared_vars, lineno)};
      if (segs.count("step")) {
        NamedExpr st = detail::parse_expr(segs["step"], nest.params, declared_vars, lineno);
        if (!st.is_constant() || st.cst < 1)
          throw ParseError("line " + std::to_string(lineno) +
                           ": loop step must be a positive integer constant");
        loop.step = st.cst;
      }
      declared_vars.insert(loop.var);
      nest.loops.push_back(std::move(loop));
    } else if (kw == "stmt") {
      if (saw_stmt)
        throw NotSupportedError("line " + std::to_string(lineno) +
                                ": multi-statement nests are not supported");
      auto toks = detail::split_ws(rest);
      if (toks.size() != 1)
        throw ParseError("line " + std::to_string(lineno) + ": expected 'stmt NAME'");
      nest.stmt.id = toks[0];
      saw_stmt = true;
    } else if (kw == "read" || kw == "write") {
      if (!saw_stmt)
        throw ParseError("line " + std::to_string(lineno) + ": reference before 'stmt'");
      ArrayRef ref;
      ref.mode = kw == "read" ? AccessMode::READ : AccessMode::WRITE;
      std::size_t br = rest.find('[');
      std::string array = detail::trim(br == std::string::npos ? rest : rest.substr(0, br));
      if (array.empty())
        throw ParseError("line " + std::to_string(lineno) + ": expected array name");
      ref.array = array;
      std::size_t pos = br;
      while (pos != std::string::npos && pos < rest.size()) {
        if (rest[pos] != '[')
          throw ParseError("line " + std::to_string(lineno) + ": expected '[' in reference");
        int depth = 1;
        std::size_t end = pos + 1;
        while (end < rest.size() && depth > 0) {
          if (rest[end] == '[') ++depth;
          if (rest[end] == ']') --depth;
          ++end;
        }
        if (depth != 0)
          throw ParseError("line " + std::to_string(lineno) + ": unbalanced ']' in reference");
        std::string inner = rest.substr(pos + 1, end - pos - 2);
        ref.index_exprs.push_back(detail::parse_expr(inner, nest.params, declared_vars, lineno));
        pos = end;
        while (pos < rest.size() && std::isspace(static_cast<unsigned char>(rest[pos]))) ++pos;
        if (pos >= rest.size()) break;
      }
      if (ref.index_exprs.empty())
        throw ParseError("line " + std::to_string(lineno) + ": reference has no subscripts");
      (ref.mode == AccessMode::READ ? nest.stmt.reads : nest.stmt.writes).push_back(std::move(ref));
    } else if (kw == "body") {
      if (!saw_stmt)
        throw ParseError("line " + std::to_string(lineno) + ": 'body' before 'stmt'");
      nest.stmt.body_text = rest;
    } else if (kw == "microkernel") {
      auto toks = detail::split_ws(rest);
      if (toks.size() != 1)
        throw ParseError("line " + std::to_string(lineno) + ": expected 'microkernel CALLEE'");
      mk = MicrokernelSpec{};
      mk->callee = toks[0];
      in_microkernel = true;
    } else if (kw == "band") {
      if (!in_microkernel)
        throw ParseError("line " + std::to_string(lineno) + ": 'band' outside microkernel block");
      mk->band_loop_vars = detail::split_names(rest);
      if (mk->band_loop_vars.empty())
        throw ParseError("line " + std::to_string(lineno) + ": empty band");
    } else if (kw == "arg") {
      if (!in_microkernel)
        throw ParseError("line " + std::to_string(lineno) + ": 'arg' outside microkernel block");
      mk->call_args.push_back(rest);
    } else if (kw == "annotation") {
      nest.annotations.push_back(rest);
    } else {
      throw ParseError("line " + std::to_string(lineno) + ": unknown directive '" + kw + "'");
    }
  }

  if (nest.loops.empty()) throw ParseError("nest has no loops");
  if (!saw_stmt) throw ParseError("nest has no statement");
  if (nest.stmt.reads.empty() && nest.stmt.writes.empty())
    throw ParseError("statement has no references");

  // Array arity must be consistent across references.
  std::map<std::string, std::size_t> arity;
  for (const ArrayRef* r : nest.all_refs()) {
    auto [it, inserted] = arity.emplace(r->array, r->index_exprs.size());
    if (!inserted && it->second != r->index_exprs.size())
      throw ParseError("array '" + r->array + "' referenced with inconsistent arity");
  }

  if (mk) {
    if (mk->band_loop_vars.empty())
      throw ParseError("microkernel block needs a 'band' line");
    std::size_t b = mk->band_loop_vars.size();
    if (b > nest.loops.size())
      throw ParseError("microkernel band has more loops than the nest");
    for (std::size_t i = 0; i < b; ++i) {
      Loop& loop = nest.loops[nest.loops.size() - b + i];
      if (loop.var != mk->band_loop_vars[i])
        throw ParseError("microkernel band loops must be the contiguous innermost loops "
                         "in band order; got '" +
                         loop.var + "' where '" + mk->band_loop_vars[i] + "' was declared");
      loop.tag = LoopTag::MICROKERNEL_BAND;
    }
    nest.microkernel = std::move(mk);
  }
  return nest;
}

// ---------------------------------------------------------------------------
// Polyhedral views of a nest

namespace detail {

inline std::map<std::string, int> dim_index_of(const std::vector<std::string>& vars) {
  std::map<std::string, int> m;
  for (std::size_t i = 0; i < vars.size(); ++i) m[vars[i]] = static_cast<int>(i);
  return m;
}

// Constraints of the iteration space over the nest's own loop dimensions,
// optionally shifted to live inside a wider space (used to constrain the in
// or out half of a relation).
inline void append_nest_constraints(const LoopNest& n, const std::map<std::string, int>& dim_index,
                                    int ndims, int shift, std::vector<Constraint>& out) {
  for (const Loop& loop : n.loops) {
    int d = dim_index.at(loop.var) + shift;
    LinearExpr lower = loop.lower.to_linear(dim_index, ndims - shift);
    // var - lower >= 0
    Constraint ge;
    ge.kind = ConstraintKind::GE;
    ge.expr.coef.assign(static_cast<std::size_t>(ndims), 0);
    for (std::size_t j = 0; j < lower.coef.size(); ++j)
      ge.expr.coef[j + static_cast<std::size_t>(shift)] = -lower.coef[j];
    ge.expr.coef[static_cast<std::size_t>(d)] += 1;
    ge.expr.cst = -lower.cst;
    out.push_back(ge);
    // upper - var - 1 >= 0 for every upper bound
    for (const NamedExpr& u : loop.uppers) {
      LinearExpr upper = u.to_linear(dim_index, ndims - shift);
      Constraint lt;
      lt.kind = ConstraintKind::GE;
      lt.expr.coef.assign(static_cast<std::size_t>(ndims), 0);
      for (std::size_t j = 0; j < upper.coef.size(); ++j)
        lt.expr.coef[j + static_cast<std::size_t>(shift)] = upper.coef[j];
      lt.expr.coef[static_cast<std::size_t>(d)] -= 1;
      lt.expr.cst = upper.cst - 1;
      out.push_back(lt);
    }
    // (var - lower) mod step == 0
    if (loop.step > 1) {
      Constraint md;
      md.kind = ConstraintKind::MOD;
      md.modulus = loop.step;
      md.expr.coef.assign(static_cast<std::size_t>(ndims), 0);
      for (std::size_t j = 0; j < lower.coef.size(); ++j)
        md.expr.coef[j + static_cast<std::size_t>(shift)] = -lower.coef[j];
      md.expr.coef[static_cast<std::size_t>(d)] += 1;
      md.expr.cst = -lower.cst;
      out.push_back(md);
    }
  }
}

}  // namespace detail

inline Space iteration_space_of(const LoopNest& n) {
  return Space{n.stmt.id, n.loop_vars()};
}

inline Space array_space_of(const std::string& array, std::size_t arity) {
  std::vector<std::string> dims;
  dims.reserve(arity);
  for (std::size_t i = 0; i < arity; ++i) dims.push_back("a" + std::to_string(i));
  return Space{array, dims};
}

// One point per dynamic execution of the statement, outermost dimension
// first. Non-unit steps keep only the executed values.
inline IntSet iteration_space(const LoopNest& n) {
  auto dim_index = detail::dim_index_of(n.loop_vars());
  int nd = static_cast<int>(n.loops.size());
  BasicSet bs;
  detail::append_nest_constraints(n, dim_index, nd, 0, bs.constraints);
  return IntSet(iteration_space_of(n), {bs});
}

// Access relation of one reference plus the reference itself.
struct RefRelation {
  int ref_index = 0;  // index into LoopNest::all_refs order
  ArrayRef ref;
  IntRel rel;
};

struct AccessRelations {
  std::vector<RefRelation> all;

  std::vector<const RefRelation*> reads() const { return by_mode(AccessMode::READ); }
  std::vector<const RefRelation*> writes() const { return by_mode(AccessMode::WRITE); }

 private:
  std::vector<const RefRelation*> by_mode(AccessMode m) const {
    std::vector<const RefRelation*> v;
    for (const RefRelation& r : all)
      if (r.ref.mode == m) v.push_back(&r);
    return v;
  }
};

// Iteration -> array element relation per reference, with domain restricted
// to the iteration space.
inline AccessRelations access_relations(const LoopNest& n) {
  AccessRelations out;
  auto dim_index = detail::dim_index_of(n.loop_vars());
  int nin = static_cast<int>(n.loops.size());
  Space in = iteration_space_of(n);

  int ref_index = 0;
  for (const ArrayRef* r : n.all_refs()) {
    int nout = static_cast<int>(r->index_exprs.size());
    int nd = nin + nout;
    BasicSet bs;
    detail::append_nest_constraints(n, dim_index, nd, 0, bs.constraints);
    for (int j = 0; j < nout; ++j) {
      LinearExpr idx = r->index_exprs[static_cast<std::size_t>(j)].to_linear(dim_index, nin);
      Constraint eq;
      eq.kind = ConstraintKind::EQ;
      eq.expr.coef.assign(static_cast<std::size_t>(nd), 0);
      for (std::size_t k = 0; k < idx.coef.size(); ++k) eq.expr.coef[k] = -idx.coef[k];
      eq.expr.coef[static_cast<std::size_t>(nin + j)] = 1;
      eq.expr.cst = -idx.cst;
      bs.constraints.push_back(eq);
    }
    out.all.push_back(RefRelation{
        ref_index, *r,
        IntRel(in, array_space_of(r->array, r->index_exprs.size()), {bs})});
    ++ref_index;
  }
  return out;
}

// Distinct array elements touched by a range of iteration points, evaluated
// directly from the subscript expressions. Counts are per array coordinate;
// byte conversion happens at cache-fitting time.
struct Footprint {
  std::map<std::string, std::vector<Point>> elements;  // sorted, unique

  std::int64_t total() const {
    std::int64_t t = 0;
    for (const auto& [arr, pts] : elements) t += static_cast<std::int64_t>(pts.size());
    return t;
  }
};

namespace detail {

// Deduplicates flat tuples of fixed arity. When the coordinate ranges fit in
// 63 bits the tuples are bit-packed and sorted as plain integers; otherwise
// a generic tuple sort runs. Returns the distinct tuples, lex sorted.
inline std::vector<Point> unique_tuples(std::vector<std::int64_t>& flat, std::size_t arity) {
  std::vector<Point> out;
  if (arity == 0 || flat.empty()) return out;
  std::size_t count = flat.size() / arity;

  std::vector<std::int64_t> lo(arity), hi(arity);
  for (std::size_t j = 0; j < arity; ++j) lo[j] = hi[j] = flat[j];
  for (std::size_t i = 1; i < count; ++i)
    for (std::size_t j = 0; j < arity; ++j) {
      std::int64_t v = flat[i * arity + j];
      lo[j] = std::min(lo[j], v);
      hi[j] = std::max(hi[j], v);
    }
  int total_bits = 0;
  std::vector<int> bits(arity);
  for (std::size_t j = 0; j < arity; ++j) {
    std::uint64_t span = static_cast<std::uint64_t>(hi[j] - lo[j]);
    bits[j] = span == 0 ? 0 : 64 - __builtin_clzll(span);
    total_bits += bits[j];
  }

  if (total_bits <= 63) {
    std::vector<std::uint64_t> keys(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::uint64_t k = 0;
      for (std::size_t j = 0; j < arity; ++j)
        k = (k << bits[j]) | static_cast<std::uint64_t>(flat[i * arity + j] - lo[j]);
      keys[i] = k;
    }
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
    out.reserve(keys.size());
    for (std::uint64_t k : keys) {
      Point p(arity);
      for (std::size_t j = arity; j-- > 0;) {
        std::uint64_t mask = bits[j] >= 64 ? ~0ULL : ((1ULL << bits[j]) - 1);
        p[j] = static_cast<std::int64_t>(k & mask) + lo[j];
        k >>= bits[j];
      }
      out.push_back(std::move(p));
    }
    return out;
  }

  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(i * arity),
                     flat.begin() + static_cast<std::ptrdiff_t>((i + 1) * arity));
  sort_unique(out);
  return out;
}

}  // namespace detail

namespace detail {

// Subscript expression with only the nonzero coefficients kept.
struct SparseExpr {
  std::vector<std::pair<int, std::int64_t>> terms;
  std::int64_t cst = 0;

  static SparseExpr from(const NamedExpr& e, const std::map<std::string, int>& dim_index) {
    SparseExpr s;
    s.cst = e.cst;
    for (const auto& [name, c] : e.terms)
      if (c != 0) s.terms.emplace_back(dim_index.at(name), c);
    return s;
  }

  std::int64_t eval(const Point& p) const {
    std::int64_t v = cst;
    for (const auto& [d, c] : terms) v += c * p[static_cast<std::size_t>(d)];
    return v;
  }
};

}  // namespace detail

inline Footprint footprint_of(const LoopNest& n, std::span<const Point> iter_points) {
  Footprint fp;
  const auto refs = n.all_refs();
  auto dim_index = detail::dim_index_of(n.loop_vars());
  struct Resolved { const ArrayRef* ref; std::vector<detail::SparseExpr> idx; };
  std::vector<Resolved> resolved;
  for (const ArrayRef* r : refs) {
    Resolved res{r, {}};
    for (const NamedExpr& e : r->index_exprs)
      res.idx.push_back(detail::SparseExpr::from(e, dim_index));
    resolved.push_back(std::move(res));
  }
  std::map<std::string, std::vector<std::int64_t>> flat;
  for (const Resolved& res : resolved) {
    auto& bucket = flat[res.ref->array];
    bucket.reserve(bucket.size() + iter_points.size() * res.idx.size());
    for (const Point& p : iter_points)
      for (std::size_t j = 0; j < res.idx.size(); ++j) bucket.push_back(res.idx[j].eval(p));
  }
  for (auto& [arr, tuples] : flat) {
    std::size_t arity = 0;
    for (const Resolved& res : resolved)
      if (res.ref->array == arr) { arity = res.idx.size(); break; }
    fp.elements[arr] = detail::unique_tuples(tuples, arity);
  }
  return fp;
}

// ---------------------------------------------------------------------------
// Microkernel restoration (post-processing pass)

// The analyzed nest minus its band loops, with the call put back.
struct RestoredNest {
  std::vector<Loop> outer_loops;
  MicrokernelSpec call;
  std::vector<std::string> annotations;
  std::map<std::string, std::int64_t> params;
};

inline RestoredNest restore_microkernel(const LoopNest& n) {
  if (!n.microkernel || n.band_begin() == n.loops.size())
    throw MissingMicrokernelSpecError("nest has no microkernel band to restore");
  RestoredNest r;
  r.outer_loops.assign(n.loops.begin(), n.loops.begin() + static_cast<std::ptrdiff_t>(n.band_begin()));
  r.call = *n.microkernel;
  r.annotations = n.annotations;
  r.params = n.params;
  return r;
}

// Conservative per-loop value intervals from affine interval propagation,
// outermost inward. Exact for rectangular loops; an over-approximation is
// fine for the bounding uses these feed.
inline std::vector<std::pair<std::int64_t, std::int64_t>> loop_var_boxes(const LoopNest& n) {
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> box;
  auto eval_lo = [&](const NamedExpr& e) {
    std::int64_t v = e.cst;
    for (const auto& [name, c] : e.terms) {
      const auto& b = box.at(name);
      v += c > 0 ? c * b.first : c * b.second;
    }
    return v;
  };
  auto eval_hi = [&](const NamedExpr& e) {
    std::int64_t v = e.cst;
    for (const auto& [name, c] : e.terms) {
      const auto& b = box.at(name);
      v += c > 0 ? c * b.second : c * b.first;
    }
    return v;
  };
  std::vector<std::pair<std::int64_t, std::int64_t>> out;
  for (const Loop& l : n.loops) {
    std::int64_t lo = eval_lo(l.lower);
    std::int64_t hi = INT64_MAX;
    for (const NamedExpr& u : l.uppers) hi = std::min(hi, eval_hi(u) - 1);
    if (hi < lo) hi = lo;  // empty loop; keep the box degenerate but valid
    box[l.var] = {lo, hi};
    out.emplace_back(lo, hi);
  }
  return out;
}

// Constant trip count when both bounds are constants (single upper bound).
inline std::optional<std::int64_t> constant_trip_count(const Loop& l) {
  if (!l.lower.is_constant() || l.uppers.size() != 1 || !l.uppers[0].is_constant())
    return std::nullopt;
  std::int64_t span = l.uppers[0].cst - l.lower.cst;
  if (span <= 0) return 0;
  return ceil_div(span, l.step);
}

}  // namespace nestrank

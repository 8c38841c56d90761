#pragma once

#include <sstream>
#include <string>

#include "nestrank/loopnest.hpp"

namespace nestrank {

namespace emit_detail {

inline std::string indent(int depth) { return std::string(static_cast<std::size_t>(depth) * 2, ' '); }

// C rendering of an affine bound.
inline std::string expr_c(const NamedExpr& e) { return e.str(); }

inline std::string body_line(const Statement& s) {
  if (!s.body_text.empty()) return s.body_text;
  // No verbatim body in the source document: synthesize a placeholder
  // statement that still shows every reference.
  std::string out;
  for (std::size_t w = 0; w < s.writes.size(); ++w) {
    if (w) out += " ";
    out += s.writes[w].str() + " = f(";
    for (std::size_t r = 0; r < s.reads.size(); ++r) {
      if (r) out += ", ";
      out += s.reads[r].str();
    }
    out += ");";
  }
  if (out.empty()) {
    out = "f(";
    for (std::size_t r = 0; r < s.reads.size(); ++r) {
      if (r) out += ", ";
      out += s.reads[r].str();
    }
    out += ");";
  }
  return out;
}

// The intra-tile loop of a tiled-with-remainder pair carries two upper
// bounds: [tile-local end, original end]. Its controlling tile variable is
// the single variable of its lower bound.
inline bool is_remainder_intra(const Loop& l) { return l.uppers.size() == 2; }

inline std::string tile_var_of(const Loop& intra) {
  if (intra.lower.terms.size() != 1)
    throw Error("intra-tile loop '" + intra.var + "' has unexpected lower bound");
  return intra.lower.terms.begin()->first;
}

}  // namespace emit_detail

// Emits C-like source for the nest. When the nest carries a microkernel
// spec, the band loops are replaced with the single call; otherwise the body
// is emitted inline. A tiled loop whose size does not divide the trip count
// is emitted as full tiles followed by a separate remainder loop, so no
// min() shows up in bounds. Output is byte-stable for identical nests.
inline std::string emit_source(const LoopNest& n) {
  using namespace emit_detail;
  std::ostringstream os;
  for (const std::string& a : n.annotations) os << a << "\n";

  std::size_t band = n.band_begin();
  bool use_call = n.microkernel.has_value() && band < n.loops.size();

  // remainder_mode: per tile variable, whether the current emission branch is
  // inside the remainder block (the intra loop then runs to the original
  // bound instead of the tile-local one).
  std::map<std::string, bool> remainder_mode;

  auto rec = [&](auto&& self, std::size_t d, int depth) -> void {
    if (d == (use_call ? band : n.loops.size())) {
      if (use_call) {
        os << indent(depth) << n.microkernel->callee << "(";
        for (std::size_t i = 0; i < n.microkernel->call_args.size(); ++i) {
          if (i) os << ", ";
          os << n.microkernel->call_args[i];
        }
        os << ");\n";
      } else {
        os << indent(depth) << body_line(n.stmt) << "\n";
      }
      return;
    }

    const Loop& l = n.loops[d];
    std::string step_text = l.step == 1 ? "++" + l.var : l.var + " += " + std::to_string(l.step);

    // Does a tiled-with-remainder intra loop deeper in the nest hang off this
    // tile variable? If so, split here: full tiles, then the remainder tile.
    const Loop* rem_intra = nullptr;
    for (std::size_t j = d + 1; j < n.loops.size(); ++j) {
      if (is_remainder_intra(n.loops[j]) && tile_var_of(n.loops[j]) == l.var) {
        rem_intra = &n.loops[j];
        break;
      }
    }

    if (rem_intra != nullptr) {
      std::int64_t tile = rem_intra->lower.terms.at(l.var);
      std::int64_t lo = rem_intra->lower.cst;
      std::int64_t hi = rem_intra->uppers[1].cst;
      std::int64_t full = (hi - lo) / tile;
      os << indent(depth) << "for (int " << l.var << " = 0; " << l.var << " < " << full << "; "
         << step_text << ") {\n";
      remainder_mode[l.var] = false;
      self(self, d + 1, depth + 1);
      os << indent(depth) << "}\n";
      os << indent(depth) << "{\n";
      os << indent(depth + 1) << "const int " << l.var << " = " << full << ";\n";
      remainder_mode[l.var] = true;
      self(self, d + 1, depth + 1);
      remainder_mode.erase(l.var);
      os << indent(depth) << "}\n";
      return;
    }

    std::string upper_text;
    if (is_remainder_intra(l)) {
      bool rem = remainder_mode.count(tile_var_of(l)) && remainder_mode.at(tile_var_of(l));
      upper_text = expr_c(l.uppers[rem ? 1 : 0]);
    } else {
      upper_text = expr_c(l.uppers[0]);
    }
    os << indent(depth) << "for (int " << l.var << " = " << expr_c(l.lower) << "; " << l.var
       << " < " << upper_text << "; " << step_text << ") {\n";
    self(self, d + 1, depth + 1);
    os << indent(depth) << "}\n";
  };
  rec(rec, 0, 0);
  return os.str();
}

}  // namespace nestrank

#pragma once

#include <string>
#include <vector>

#include "nestrank/loopnest.hpp"
#include "nestrank/variants.hpp"

namespace nestrank {

// Built-in 2-D convolution with the GEMM microkernel band innermost: data
// tiled on input/output channels, microkernel over (oi, ofm, ifm).
struct ConvPreset {
  std::int64_t nImg = 2;
  std::int64_t nOfm = 32;
  std::int64_t nIfm = 32;
  std::int64_t ofh = 4;
  std::int64_t ofw = 4;
  std::int64_t kh = 3;
  std::int64_t kw = 3;
  std::int64_t stride_h = 1;
  std::int64_t stride_w = 1;
  std::int64_t gemm_block = 16;

  // "conv:nImg,nOfm,nIfm,ofh,ofw,kh,kw,stride_h,stride_w,gemm_block"
  static ConvPreset parse(const std::string& csv) {
    std::vector<std::int64_t> v;
    std::string cur;
    for (char c : csv + ",") {
      if (c == ',') {
        if (!cur.empty()) {
          try {
            v.push_back(std::stoll(cur));
          } catch (const std::logic_error&) {
            throw ConfigRejectedError("bad conv preset value '" + cur + "'");
          }
          cur.clear();
        }
      } else if (!std::isspace(static_cast<unsigned char>(c))) {
        cur += c;
      }
    }
    if (v.size() != 10)
      throw ConfigRejectedError("conv preset needs 10 integers, got " + std::to_string(v.size()));
    ConvPreset p;
    p.nImg = v[0]; p.nOfm = v[1]; p.nIfm = v[2]; p.ofh = v[3]; p.ofw = v[4];
    p.kh = v[5]; p.kw = v[6]; p.stride_h = v[7]; p.stride_w = v[8]; p.gemm_block = v[9];
    p.validate();
    return p;
  }

  void validate() const {
    const std::int64_t all[] = {nImg, nOfm, nIfm, ofh, ofw, kh, kw, stride_h, stride_w, gemm_block};
    for (std::int64_t v : all)
      if (v < 1) throw ConfigRejectedError("conv preset values must be positive");
    if (nOfm % gemm_block != 0 || nIfm % gemm_block != 0)
      throw ConfigRejectedError("conv preset: channel widths must be divisible by gemm_block");
  }

  LoopNest build() const {
    validate();
    LoopNest n;
    n.params = {{"nImg", nImg},   {"nOfm", nOfm}, {"nIfm", nIfm},          {"ofh", ofh},
                {"ofw", ofw},     {"kh", kh},     {"kw", kw},              {"STRIDE_H", stride_h},
                {"STRIDE_W", stride_w},           {"GEMM_BLOCK", gemm_block}};

    auto cloop = [](const std::string& var, std::int64_t upper, LoopTag tag) {
      Loop l;
      l.var = var;
      l.lower = NamedExpr::constant(0);
      l.uppers = {NamedExpr::constant(upper)};
      l.tag = tag;
      return l;
    };
    n.loops = {
        cloop("img", nImg, LoopTag::NORMAL),
        cloop("ofm_tile", nOfm / gemm_block, LoopTag::NORMAL),
        cloop("ifm_tile", nIfm / gemm_block, LoopTag::NORMAL),
        cloop("oj", ofh, LoopTag::NORMAL),
        cloop("kj", kh, LoopTag::NORMAL),
        cloop("ki", kw, LoopTag::NORMAL),
        cloop("oi", ofw, LoopTag::MICROKERNEL_BAND),
        cloop("ofm", gemm_block, LoopTag::MICROKERNEL_BAND),
        cloop("ifm", gemm_block, LoopTag::MICROKERNEL_BAND),
    };

    auto v = [](const std::string& name) { return NamedExpr::var(name); };
    NamedExpr ij = v("oj").scaled(stride_h);
    ij.add(v("kj"));
    NamedExpr ii = v("oi").scaled(stride_w);
    ii.add(v("ki"));

    ArrayRef out_r{"output", {v("img"), v("ofm_tile"), v("oj"), v("oi"), v("ofm")}, AccessMode::READ};
    ArrayRef flt_r{"filter",
                   {v("ofm_tile"), v("ifm_tile"), v("kj"), v("ki"), v("ifm"), v("ofm")},
                   AccessMode::READ};
    ArrayRef in_r{"input", {v("img"), v("ifm_tile"), ij, ii, v("ifm")}, AccessMode::READ};
    ArrayRef out_w = out_r;
    out_w.mode = AccessMode::WRITE;

    auto idx_text = [](const std::string& out_var, std::int64_t stride, const std::string& k_var) {
      std::string s = out_var;
      if (stride != 1) s += " * " + std::to_string(stride);
      return s + " + " + k_var;
    };
    std::string ij_txt = idx_text("oj", stride_h, "kj");
    std::string ii_txt = idx_text("oi", stride_w, "ki");

    n.stmt.id = "S";
    n.stmt.reads = {out_r, flt_r, in_r};
    n.stmt.writes = {out_w};
    n.stmt.body_text = "output[img][ofm_tile][oj][oi][ofm] += "
                       "filter[ofm_tile][ifm_tile][kj][ki][ifm][ofm] * input[img][ifm_tile][" +
                       ij_txt + "][" + ii_txt + "][ifm];";

    MicrokernelSpec mk;
    mk.callee = "gemm_microkernel";
    mk.band_loop_vars = {"oi", "ofm", "ifm"};
    mk.call_args = {
        "&output[img][ofm_tile][oj][0][0]",
        "&filter[ofm_tile][ifm_tile][kj][ki][0][0]",
        "&input[img][ifm_tile][" + ij_txt + "][ki][0]",
    };
    n.microkernel = std::move(mk);
    n.annotations = {"#pragma omp parallel for private(ofm_tile, ifm_tile, oj, kj, ki)"};
    return n;
  }

  // Default tuning space: every legal order of the five loops between the
  // image loop and the band, with the output-row loop optionally tiled.
  VariantConfig default_variant_config(const LoopNest& nest) const {
    VariantConfig cfg = default_variant_config_base(nest);
    cfg.tile_candidates["oj"] = {0, 2, 4};
    cfg.max_variants = 64;
    return cfg;
  }

 private:
  static VariantConfig default_variant_config_base(const LoopNest& nest) {
    return nestrank::default_variant_config(nest);
  }
};

// Fig.-4-shaped matrix multiplication: C[i][j] += A[i][k] * B[k][j].
inline LoopNest make_matmul_nest(std::int64_t M, std::int64_t N, std::int64_t K) {
  LoopNest n;
  n.params = {{"M", M}, {"N", N}, {"K", K}};
  auto cloop = [](const std::string& var, std::int64_t upper) {
    Loop l;
    l.var = var;
    l.lower = NamedExpr::constant(0);
    l.uppers = {NamedExpr::constant(upper)};
    return l;
  };
  n.loops = {cloop("i", M), cloop("j", N), cloop("k", K)};
  auto v = [](const std::string& name) { return NamedExpr::var(name); };
  n.stmt.id = "S";
  n.stmt.reads = {ArrayRef{"C", {v("i"), v("j")}, AccessMode::READ},
                  ArrayRef{"A", {v("i"), v("k")}, AccessMode::READ},
                  ArrayRef{"B", {v("k"), v("j")}, AccessMode::READ}};
  n.stmt.writes = {ArrayRef{"C", {v("i"), v("j")}, AccessMode::WRITE}};
  n.stmt.body_text = "C[i][j] += A[i][k] * B[k][j];";
  return n;
}

}  // namespace nestrank

#pragma once

#include <string>
#include <vector>

#include "leformer/eval/report.hpp"
#include "leformer/model/config.hpp"

namespace leformer {

// Per-layer parameter and multiply-accumulate counts at a stated input size.
// Counting convention: convs cost Cout*H'*W'*(Cin/groups)*Kh*Kw, linears cost
// out*in*positions, attention costs N*(N/R^2)*C for the score term and again
// for the value mix; pooling, norms, activations and upsampling count zero.
struct ComplexityRow {
  std::string name;
  int64_t params = 0;
  int64_t macs = 0;
};

struct ComplexityReport {
  std::vector<ComplexityRow> rows;

  int64_t total_params() const {
    int64_t s = 0;
    for (const auto& r : rows) s += r.params;
    return s;
  }
  int64_t total_macs() const {
    int64_t s = 0;
    for (const auto& r : rows) s += r.macs;
    return s;
  }
  double total_macs_g() const { return static_cast<double>(total_macs()) / 1e9; }
  double total_params_m() const { return static_cast<double>(total_params()) / 1e6; }

  // Sum of MACs over rows whose name contains the given fragment.
  int64_t macs_matching(std::string_view fragment) const {
    int64_t s = 0;
    for (const auto& r : rows)
      if (r.name.find(fragment) != std::string::npos) s += r.macs;
    return s;
  }

  ReportTable table() const {
    ReportTable t;
    for (const auto& r : rows)
      t.rows.push_back({r.name, r.params, static_cast<double>(r.macs) / 1e9, {}, {}, {}, {}});
    t.rows.push_back({"total", total_params(), total_macs_g(), {}, {}, {}, {}});
    return t;
  }
};

namespace detail {

class ComplexityWalker {
 public:
  ComplexityWalker(const ModelConfig& cfg, int64_t h, int64_t w) : cfg_(cfg), in_h_(h), in_w_(w) {}

  ComplexityReport run() {
    int64_t cin = 3;
    if (cfg_.use_ce) {
      for (int i = 0; i < 4; ++i) {
        ce_stage(i, cin);
        cin = cfg_.stages[i].c;
      }
    }
    if (cfg_.use_te) {
      cin = 3;
      for (int i = 0; i < 4; ++i) {
        te_stage(i, cin);
        cin = cfg_.stages[i].c;
      }
    }
    if (cfg_.use_ce && cfg_.use_te)
      for (int i = 0; i < 4; ++i) {
        const auto [h, w] = stage_hw(i);
        const int64_t c = cfg_.stages[i].c;
        conv(str_cat("cef/stage", i + 1, "/fuse"), 2 * c, c, 1, h * w, 1, true);
      }
    decoder();
    return std::move(report_);
  }

 private:
  std::pair<int64_t, int64_t> stage_hw(int i) const {
    return {in_h_ >> (i + 2), in_w_ >> (i + 2)};
  }

  void row(std::string name, int64_t params, int64_t macs) {
    report_.rows.push_back({std::move(name), params, macs});
  }

  void conv(const std::string& name, int64_t cin, int64_t cout, int64_t k, int64_t positions,
            int64_t groups, bool bias) {
    const int64_t params = cout * (cin / groups) * k * k + (bias ? cout : 0);
    row(name, params, cout * positions * (cin / groups) * k * k);
  }

  void linear(const std::string& name, int64_t in, int64_t out, int64_t positions, bool bias) {
    row(name, out * in + (bias ? out : 0), out * in * positions);
  }

  void norm(const std::string& name, int64_t c) { row(name, 2 * c, 0); }

  void cbam(const std::string& name, int64_t c, int64_t positions) {
    const int64_t hidden = std::max<int64_t>(1, c / cfg_.cbam_reduction);
    // shared MLP runs twice (avg- and max-pooled vectors)
    linear(name + "/fc1", c, hidden, 2, true);
    linear(name + "/fc2", hidden, c, 2, true);
    conv(name + "/spatial", 2, 1, 7, positions, 1, true);
  }

  void ce_stage(int i, int64_t cin) {
    const auto& st = cfg_.stages[i];
    const auto [h, w] = stage_hw(i);
    const int64_t pos = h * w;
    const std::string p = str_cat("ce/stage", i + 1);
    conv(p + "/dw/depthwise", cin, cin, st.k, pos, cin, true);
    conv(p + "/dw/pointwise", cin, st.c, 1, pos, 1, true);
    if (cfg_.use_msca) {
      for (int d = 1; d <= 4; ++d)
        conv(str_cat(p, "/msca/dilated", d), st.c, st.c, 3, pos, st.c, true);
      cbam(p + "/msca/cbam", 4 * st.c, pos);
      conv(p + "/msca/proj", 4 * st.c, st.c, 1, pos, 1, true);
    }
  }

  void te_stage(int i, int64_t cin) {
    const auto& st = cfg_.stages[i];
    const auto [h, w] = stage_hw(i);
    const int64_t n = h * w;
    const std::string p = str_cat("te/stage", i + 1);
    conv(p + "/patch", cin, st.c, st.k, n, 1, false);
    norm(p + "/patch_norm", st.c);
    const bool ptl = i < cfg_.ptl_stages;
    for (int64_t b = 1; b <= st.l; ++b) {
      const std::string bp = str_cat(p, "/block", b);
      norm(bp + "/ln1", st.c);
      if (!ptl) {
        const int64_t n_red = n / (st.r * st.r);
        linear(bp + "/attn/q", st.c, st.c, n, true);
        if (st.r > 1) {
          conv(bp + "/attn/sr", st.c, st.c, st.r, n_red, 1, false);
          norm(bp + "/attn/sr_norm", st.c);
        }
        linear(bp + "/attn/k", st.c, st.c, n_red, true);
        linear(bp + "/attn/v", st.c, st.c, n_red, true);
        row(bp + "/attn/scores", 0, n * n_red * st.c);
        row(bp + "/attn/mix", 0, n * n_red * st.c);
        linear(bp + "/attn/proj", st.c, st.c, n, true);
      }
      norm(bp + "/ln2", st.c);
      const int64_t hidden = st.c * cfg_.mlp_ratio;
      linear(bp + "/ffn/fc1", st.c, hidden, n, true);
      conv(bp + "/ffn/dwconv", hidden, hidden, 3, n, hidden, true);
      linear(bp + "/ffn/fc2", hidden, st.c, n, true);
    }
    norm(p + "/norm", st.c);
  }

  void decoder() {
    const auto [h0, w0] = stage_hw(0);
    for (int i = 0; i < 4; ++i) {
      const auto [h, w] = stage_hw(i);
      conv(str_cat("decoder/proj", i + 1), cfg_.stages[i].c, cfg_.decoder_dim, 1, h * w, 1, true);
    }
    conv("decoder/fuse", 4 * cfg_.decoder_dim, cfg_.decoder_dim, 1, h0 * w0, 1, true);
    conv("decoder/classifier", cfg_.decoder_dim, cfg_.num_classes, 1, h0 * w0, 1, true);
  }

  ModelConfig cfg_;
  int64_t in_h_, in_w_;
  ComplexityReport report_;
};

}  // namespace detail

inline ComplexityReport count_macs(const ModelConfig& cfg, int64_t h, int64_t w) {
  if (h % 32 != 0 || w % 32 != 0)
    throw ValueError(str_cat("input size ", h, "x", w, " not divisible by 32"));
  return detail::ComplexityWalker(cfg.resolved(), h, w).run();
}

inline ComplexityReport count_macs(const ModelConfig& cfg, int64_t size) {
  return count_macs(cfg, size, size);
}

// Table-2/Table-3 style comparison of several configurations.
inline ReportTable compare_configs(const std::vector<std::pair<std::string, ModelConfig>>& configs,
                                   int64_t input_size) {
  ReportTable t;
  for (const auto& [name, cfg] : configs) {
    const auto rep = count_macs(cfg, input_size);
    t.rows.push_back({name, rep.total_params(), rep.total_macs_g(), {}, {}, {}, {}});
  }
  return t;
}

}  // namespace leformer

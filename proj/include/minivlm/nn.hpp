#pragma once

// Dense layers with explicit backward passes. Every *_backward accumulates
// (+=) parameter gradients into the optional grad argument and returns the
// gradient with respect to the layer input.

#include "minivlm/tensor.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace minivlm {

/// y = x * w + b with w of shape (in, out) and b of shape (1, out).
struct LinearParams {
  Mat w;
  Mat b;

  static LinearParams init(Eigen::Index in, Eigen::Index out, Rng& rng);
  static LinearParams zeros_like(const LinearParams& p);
};

struct LayerNormParams {
  Mat gamma;
  Mat beta;

  static LayerNormParams init(Eigen::Index dim);
};

struct QkvParams {
  LinearParams q;
  LinearParams k;
  LinearParams v;
};

/// Two-layer GELU MLP.
struct FfnParams {
  LinearParams fc1;
  LinearParams fc2;
};

Mat linear(const Mat& x, const LinearParams& p);
Mat linear_backward(const Mat& x, const LinearParams& p, const Mat& dy, LinearParams* grad);

struct LayerNormCache {
  Mat xhat;
  Eigen::VectorXd rstd;
};

inline constexpr double kLayerNormEps = 1e-5;

Mat layer_norm(const Mat& x, const LayerNormParams& p, LayerNormCache* cache = nullptr);
Mat layer_norm_backward(const Mat& dy, const LayerNormParams& p, const LayerNormCache& cache,
                        LayerNormParams* grad);

/// tanh approximation of GELU.
Mat gelu(const Mat& x);
Mat gelu_backward(const Mat& x, const Mat& dy);

struct FfnCache {
  Mat x;
  Mat pre;
  Mat act;
};

Mat ffn(const Mat& x, const FfnParams& p, FfnCache* cache = nullptr);
Mat ffn_backward(const Mat& dy, const FfnParams& p, const FfnCache& cache, FfnParams* grad);

/// Rotates consecutive feature pairs of every head by position * base^(-2j/head_dim).
/// `inverse` rotates by the negated angle, which is also the backward pass.
void apply_rotary(Mat& x, std::span<const std::int64_t> positions, int n_heads, double base,
                  bool inverse = false);

struct AttentionCache {
  Mat q;
  Mat k;
  Mat v;
  std::vector<Mat> probs;  // one (n, n) matrix per head; zero above the diagonal when causal
};

/// Multi-head scaled dot-product attention over pre-projected q, k, v.
Mat attention(const Mat& q, const Mat& k, const Mat& v, int n_heads, bool causal,
              AttentionCache* cache = nullptr);

struct AttentionGrads {
  Mat dq;
  Mat dk;
  Mat dv;
};

AttentionGrads attention_backward(const Mat& dctx, int n_heads, const AttentionCache& cache);

/// Const view of a pre-norm transformer block. `expert_qkv` is the second
/// QKV route used by tokens whose route tag is 1; FFN and output are shared.
struct BlockWeights {
  const LayerNormParams& ln1;
  const QkvParams& qkv;
  const QkvParams* expert_qkv;
  const LinearParams& attn_out;
  const LayerNormParams& ln2;
  const FfnParams& ffn;
};

struct BlockGrads {
  LayerNormParams* ln1 = nullptr;
  QkvParams* qkv = nullptr;
  QkvParams* expert_qkv = nullptr;
  LinearParams* attn_out = nullptr;
  LayerNormParams* ln2 = nullptr;
  FfnParams* ffn = nullptr;
};

struct BlockOptions {
  int n_heads = 1;
  bool causal = false;
  std::span<const std::uint8_t> routes;      // empty: every token uses route 0
  std::span<const std::int64_t> positions;   // empty: no rotary encoding
  double rope_base = 10000.0;
};

struct BlockCache {
  Mat x;
  LayerNormCache ln1;
  Mat h1n;
  AttentionCache attn;
  Mat ctx;
  Mat h1;
  LayerNormCache ln2;
  Mat h2n;
  FfnCache ffn;
};

/// x + attn(ln1(x)), then h + ffn(ln2(h)).
Mat block_forward(const Mat& x, const BlockWeights& w, const BlockOptions& opt,
                  BlockCache* cache = nullptr);
Mat block_backward(const Mat& dy, const BlockWeights& w, const BlockOptions& opt,
                   const BlockCache& cache, const BlockGrads& grad);

}  // namespace minivlm

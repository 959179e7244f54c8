#include "minivlm/nn.hpp"

#include "minivlm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace minivlm {

LinearParams LinearParams::init(Eigen::Index in, Eigen::Index out, Rng& rng) {
  LinearParams p{Mat(in, out), Mat::Zero(1, out)};
  init_uniform_fan_in(p.w, in, rng);
  return p;
}

LinearParams LinearParams::zeros_like(const LinearParams& p) {
  return LinearParams{Mat::Zero(p.w.rows(), p.w.cols()), Mat::Zero(1, p.b.cols())};
}

LayerNormParams LayerNormParams::init(Eigen::Index dim) {
  return LayerNormParams{Mat::Ones(1, dim), Mat::Zero(1, dim)};
}

Mat linear(const Mat& x, const LinearParams& p) {
  if (x.cols() != p.w.rows()) throw ContractError("linear: input width does not match weight rows");
  Mat y = x * p.w;
  y.rowwise() += p.b.row(0);
  return y;
}

Mat linear_backward(const Mat& x, const LinearParams& p, const Mat& dy, LinearParams* grad) {
  if (grad != nullptr) {
    grad->w.noalias() += x.transpose() * dy;
    grad->b += dy.colwise().sum();
  }
  return dy * p.w.transpose();
}

Mat layer_norm(const Mat& x, const LayerNormParams& p, LayerNormCache* cache) {
  const auto d = static_cast<double>(x.cols());
  Mat xhat(x.rows(), x.cols());
  Eigen::VectorXd rstd(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mean = x.row(i).sum() / d;
    const auto centered = (x.row(i).array() - mean).eval();
    const double var = centered.square().sum() / d;
    rstd(i) = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(i) = centered * rstd(i);
  }
  Mat y = (xhat.array().rowwise() * p.gamma.row(0).array()).matrix();
  y.rowwise() += p.beta.row(0);
  if (cache != nullptr) {
    cache->xhat = std::move(xhat);
    cache->rstd = std::move(rstd);
  }
  return y;
}

Mat layer_norm_backward(const Mat& dy, const LayerNormParams& p, const LayerNormCache& cache,
                        LayerNormParams* grad) {
  if (grad != nullptr) {
    grad->gamma += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
    grad->beta += dy.colwise().sum();
  }
  const auto d = static_cast<double>(dy.cols());
  const Mat dxhat = (dy.array().rowwise() * p.gamma.row(0).array()).matrix();
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double mean_dxhat = dxhat.row(i).sum() / d;
    const double mean_dxhat_xhat = dxhat.row(i).dot(cache.xhat.row(i)) / d;
    dx.row(i) = cache.rstd(i) *
                (dxhat.row(i).array() - mean_dxhat - cache.xhat.row(i).array() * mean_dxhat_xhat)
                    .matrix();
  }
  return dx;
}

namespace {

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

}  // namespace

Mat gelu(const Mat& x) {
  return x.unaryExpr([](double v) {
    return 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
  });
}

Mat gelu_backward(const Mat& x, const Mat& dy) {
  const Mat slope = x.unaryExpr([](double v) {
    const double t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
    const double dt = (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
    return 0.5 * (1.0 + t) + 0.5 * v * dt;
  });
  return (slope.array() * dy.array()).matrix();
}

Mat ffn(const Mat& x, const FfnParams& p, FfnCache* cache) {
  Mat pre = linear(x, p.fc1);
  Mat act = gelu(pre);
  Mat y = linear(act, p.fc2);
  if (cache != nullptr) {
    cache->x = x;
    cache->pre = std::move(pre);
    cache->act = std::move(act);
  }
  return y;
}

Mat ffn_backward(const Mat& dy, const FfnParams& p, const FfnCache& cache, FfnParams* grad) {
  const Mat dact = linear_backward(cache.act, p.fc2, dy, grad ? &grad->fc2 : nullptr);
  const Mat dpre = gelu_backward(cache.pre, dact);
  return linear_backward(cache.x, p.fc1, dpre, grad ? &grad->fc1 : nullptr);
}

void apply_rotary(Mat& x, std::span<const std::int64_t> positions, int n_heads, double base,
                  bool inverse) {
  if (static_cast<Eigen::Index>(positions.size()) != x.rows()) {
    throw ContractError("apply_rotary: one position id per row is required");
  }
  const Eigen::Index head_dim = x.cols() / n_heads;
  if (head_dim * n_heads != x.cols() || head_dim % 2 != 0) {
    throw ContractError("apply_rotary: head dimension must be even");
  }
  const Eigen::Index pairs = head_dim / 2;
  std::vector<double> inv_freq(static_cast<std::size_t>(pairs));
  for (Eigen::Index j = 0; j < pairs; ++j) {
    inv_freq[static_cast<std::size_t>(j)] =
        std::pow(base, -2.0 * static_cast<double>(j) / static_cast<double>(head_dim));
  }
  const double sign = inverse ? -1.0 : 1.0;
  std::vector<double> cs(static_cast<std::size_t>(pairs));
  std::vector<double> sn(static_cast<std::size_t>(pairs));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto pos = static_cast<double>(positions[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < pairs; ++j) {
      const double angle = pos * inv_freq[static_cast<std::size_t>(j)];
      cs[static_cast<std::size_t>(j)] = std::cos(angle);
      sn[static_cast<std::size_t>(j)] = sign * std::sin(angle);
    }
    double* row = x.row(i).data();
    for (int h = 0; h < n_heads; ++h) {
      double* head = row + h * head_dim;
      for (Eigen::Index j = 0; j < pairs; ++j) {
        const double a = head[2 * j];
        const double b = head[2 * j + 1];
        const double c = cs[static_cast<std::size_t>(j)];
        const double s = sn[static_cast<std::size_t>(j)];
        head[2 * j] = a * c - b * s;
        head[2 * j + 1] = a * s + b * c;
      }
    }
  }
}

namespace {

constexpr Eigen::Index kCausalBlock = 128;

void softmax_rows_inplace(Eigen::Ref<Mat> s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    auto row = s.row(i);
    const double mx = row.maxCoeff();
    row = (row.array() - mx).exp().matrix();
    row /= row.sum();
  }
}

}  // namespace

Mat attention(const Mat& q, const Mat& k, const Mat& v, int n_heads, bool causal,
              AttentionCache* cache) {
  const Eigen::Index n = q.rows();
  const Eigen::Index d = q.cols();
  if (k.rows() != n || v.rows() != n || k.cols() != d || v.cols() != d) {
    throw ContractError("attention: q, k, v shapes differ");
  }
  if (n_heads < 1 || d % n_heads != 0) throw ContractError("attention: width not divisible by heads");
  const Eigen::Index dh = d / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Mat ctx(n, d);
  if (cache != nullptr) {
    cache->q = q;
    cache->k = k;
    cache->v = v;
    cache->probs.assign(static_cast<std::size_t>(n_heads), Mat());
  }
  for (int h = 0; h < n_heads; ++h) {
    const auto qh = q.middleCols(h * dh, dh);
    const auto kh = k.middleCols(h * dh, dh);
    const auto vh = v.middleCols(h * dh, dh);
    Mat* probs = nullptr;
    if (cache != nullptr) {
      probs = &cache->probs[static_cast<std::size_t>(h)];
      *probs = Mat::Zero(n, n);
    }
    if (!causal) {
      Mat s = (qh * kh.transpose()) * scale;
      softmax_rows_inplace(s);
      ctx.middleCols(h * dh, dh).noalias() = s * vh;
      if (probs != nullptr) *probs = std::move(s);
      continue;
    }
    // Row block [r0, r1) only sees keys [0, r1).
    for (Eigen::Index r0 = 0; r0 < n; r0 += kCausalBlock) {
      const Eigen::Index rows = std::min(kCausalBlock, n - r0);
      const Eigen::Index keys = r0 + rows;
      Mat s = (qh.middleRows(r0, rows) * kh.topRows(keys).transpose()) * scale;
      for (Eigen::Index i = 0; i < rows; ++i) {
        const Eigen::Index first_masked = r0 + i + 1;
        if (first_masked < keys) {
          s.row(i).tail(keys - first_masked).setConstant(-std::numeric_limits<double>::infinity());
        }
      }
      softmax_rows_inplace(s);
      ctx.block(r0, h * dh, rows, dh).noalias() = s * vh.topRows(keys);
      if (probs != nullptr) probs->block(r0, 0, rows, keys) = s;
    }
  }
  return ctx;
}

AttentionGrads attention_backward(const Mat& dctx, int n_heads, const AttentionCache& cache) {
  const Eigen::Index n = cache.q.rows();
  const Eigen::Index d = cache.q.cols();
  const Eigen::Index dh = d / n_heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  AttentionGrads g{Mat(n, d), Mat(n, d), Mat(n, d)};
  for (int h = 0; h < n_heads; ++h) {
    const Mat& p = cache.probs[static_cast<std::size_t>(h)];
    const auto dout = dctx.middleCols(h * dh, dh);
    g.dv.middleCols(h * dh, dh).noalias() = p.transpose() * dout;
    Mat dp = dout * cache.v.middleCols(h * dh, dh).transpose();
    // Softmax backward: ds = p * (dp - rowsum(p * dp)). Masked entries have p = 0.
    const Eigen::VectorXd inner = (p.array() * dp.array()).rowwise().sum();
    Mat ds = (p.array() * (dp.array().colwise() - inner.array())).matrix() * scale;
    g.dq.middleCols(h * dh, dh).noalias() = ds * cache.k.middleCols(h * dh, dh);
    g.dk.middleCols(h * dh, dh).noalias() = ds.transpose() * cache.q.middleCols(h * dh, dh);
  }
  return g;
}

namespace {

struct RouteIndex {
  std::vector<Eigen::Index> rows[2];
};

RouteIndex route_index(std::span<const std::uint8_t> routes) {
  RouteIndex idx;
  for (std::size_t i = 0; i < routes.size(); ++i) {
    idx.rows[routes[i] != 0 ? 1 : 0].push_back(static_cast<Eigen::Index>(i));
  }
  return idx;
}

const QkvParams& route_params(const BlockWeights& w, int route) {
  if (route == 0) return w.qkv;
  if (w.expert_qkv == nullptr) throw ContractError("block: expert route used without expert QKV");
  return *w.expert_qkv;
}

struct Qkv {
  Mat q;
  Mat k;
  Mat v;
};

Qkv routed_qkv(const Mat& hn, const BlockWeights& w, std::span<const std::uint8_t> routes) {
  if (routes.empty()) return Qkv{linear(hn, w.qkv.q), linear(hn, w.qkv.k), linear(hn, w.qkv.v)};
  const RouteIndex idx = route_index(routes);
  const Eigen::Index d = w.qkv.q.w.cols();
  Qkv out{Mat(hn.rows(), d), Mat(hn.rows(), d), Mat(hn.rows(), d)};
  for (int r = 0; r < 2; ++r) {
    const auto& rows = idx.rows[r];
    if (rows.empty()) continue;
    const QkvParams& p = route_params(w, r);
    const Mat sub = hn(rows, Eigen::all);
    out.q(rows, Eigen::all) = linear(sub, p.q);
    out.k(rows, Eigen::all) = linear(sub, p.k);
    out.v(rows, Eigen::all) = linear(sub, p.v);
  }
  return out;
}

Mat routed_qkv_backward(const Mat& hn, const BlockWeights& w, std::span<const std::uint8_t> routes,
                        const AttentionGrads& g, const BlockGrads& grad) {
  auto qkv_back = [](const Mat& x, const QkvParams& p, const Mat& dq, const Mat& dk,
                     const Mat& dv, QkvParams* gp) {
    Mat dx = linear_backward(x, p.q, dq, gp ? &gp->q : nullptr);
    dx += linear_backward(x, p.k, dk, gp ? &gp->k : nullptr);
    dx += linear_backward(x, p.v, dv, gp ? &gp->v : nullptr);
    return dx;
  };
  if (routes.empty()) return qkv_back(hn, w.qkv, g.dq, g.dk, g.dv, grad.qkv);
  const RouteIndex idx = route_index(routes);
  Mat dhn(hn.rows(), hn.cols());
  for (int r = 0; r < 2; ++r) {
    const auto& rows = idx.rows[r];
    if (rows.empty()) continue;
    const QkvParams& p = route_params(w, r);
    QkvParams* gp = r == 0 ? grad.qkv : grad.expert_qkv;
    const Mat sub = hn(rows, Eigen::all);
    dhn(rows, Eigen::all) =
        qkv_back(sub, p, g.dq(rows, Eigen::all), g.dk(rows, Eigen::all),
                 g.dv(rows, Eigen::all), gp);
  }
  return dhn;
}

}  // namespace

Mat block_forward(const Mat& x, const BlockWeights& w, const BlockOptions& opt, BlockCache* cache) {
  if (!opt.routes.empty() && static_cast<Eigen::Index>(opt.routes.size()) != x.rows()) {
    throw ContractError("block: one route tag per token is required");
  }
  LayerNormCache ln1_cache;
  Mat h1n = layer_norm(x, w.ln1, cache ? &ln1_cache : nullptr);
  Qkv qkv = routed_qkv(h1n, w, opt.routes);
  if (!opt.positions.empty()) {
    apply_rotary(qkv.q, opt.positions, opt.n_heads, opt.rope_base);
    apply_rotary(qkv.k, opt.positions, opt.n_heads, opt.rope_base);
  }
  Mat ctx = attention(qkv.q, qkv.k, qkv.v, opt.n_heads, opt.causal, cache ? &cache->attn : nullptr);
  Mat h1 = x + linear(ctx, w.attn_out);
  LayerNormCache ln2_cache;
  Mat h2n = layer_norm(h1, w.ln2, cache ? &ln2_cache : nullptr);
  Mat y = h1 + ffn(h2n, w.ffn, cache ? &cache->ffn : nullptr);
  if (cache != nullptr) {
    cache->x = x;
    cache->ln1 = std::move(ln1_cache);
    cache->h1n = std::move(h1n);
    cache->ctx = std::move(ctx);
    cache->h1 = std::move(h1);
    cache->ln2 = std::move(ln2_cache);
    cache->h2n = std::move(h2n);
  }
  return y;
}

Mat block_backward(const Mat& dy, const BlockWeights& w, const BlockOptions& opt,
                   const BlockCache& cache, const BlockGrads& grad) {
  // y = h1 + ffn(ln2(h1))
  Mat dh1 = dy;
  dh1 += layer_norm_backward(ffn_backward(dy, w.ffn, cache.ffn, grad.ffn), w.ln2, cache.ln2,
                             grad.ln2);
  // h1 = x + attn_out(ctx)
  const Mat dctx = linear_backward(cache.ctx, w.attn_out, dh1, grad.attn_out);
  AttentionGrads g = attention_backward(dctx, opt.n_heads, cache.attn);
  if (!opt.positions.empty()) {
    apply_rotary(g.dq, opt.positions, opt.n_heads, opt.rope_base, /*inverse=*/true);
    apply_rotary(g.dk, opt.positions, opt.n_heads, opt.rope_base, /*inverse=*/true);
  }
  const Mat dh1n = routed_qkv_backward(cache.h1n, w, opt.routes, g, grad);
  Mat dx = dh1;
  dx += layer_norm_backward(dh1n, w.ln1, cache.ln1, grad.ln1);
  return dx;
}

}  // namespace minivlm

#include "core/toy_lm.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace specvoc {
namespace {

constexpr double kNormEps = 1e-6;

struct BlockCache {
  DenseMatrix normed;
  DenseMatrix u;
  DenseMatrix mixed;  // windowed sum feeding the mix matrix
  DenseMatrix pre;    // ff_in pre-activation
  Vector inv_rms;
};

// out += v * W  (v: 1 x rows, W: rows x cols)
void add_vecmat(std::span<const double> v, const DenseMatrix& W, std::span<double> out) {
  const std::size_t cols = W.cols();
  const double* base = W.data().data();
  for (std::size_t i = 0; i < W.rows(); ++i) {
    const double vi = v[i];
    if (vi == 0.0) continue;
    const double* row = base + i * cols;
    for (std::size_t j = 0; j < cols; ++j) out[j] += vi * row[j];
  }
}

// out += W * g  (out_i += sum_j W(i,j) g_j)
void add_matvec_t(const DenseMatrix& W, std::span<const double> g, std::span<double> out) {
  const std::size_t cols = W.cols();
  const double* base = W.data().data();
  for (std::size_t i = 0; i < W.rows(); ++i) {
    const double* row = base + i * cols;
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += row[j] * g[j];
    out[i] += s;
  }
}

// G += a^T b
void add_outer(DenseMatrix& G, std::span<const double> a, std::span<const double> b) {
  const std::size_t cols = G.cols();
  double* base = G.data().data();
  for (std::size_t i = 0; i < G.rows(); ++i) {
    const double ai = a[i];
    if (ai == 0.0) continue;
    double* row = base + i * cols;
    for (std::size_t j = 0; j < cols; ++j) row[j] += ai * b[j];
  }
}

// Computes rows [from, n) of the block output. Rows below `from` are left
// zero; rows below from - (window - 1) of x are never read.
void block_forward(const BlockParams& p, const DenseMatrix& x, std::size_t from, DenseMatrix& y,
                   BlockCache* cache) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  const std::size_t window = p.mix_offsets.size();
  const std::size_t hidden = p.ff_in.cols();
  const std::size_t u_from = from >= window - 1 ? from - (window - 1) : 0;

  BlockCache local;
  BlockCache& c = cache ? *cache : local;
  c.normed = DenseMatrix(n, d);
  c.u = DenseMatrix(n, d);
  c.mixed = DenseMatrix(n, d);
  c.pre = DenseMatrix(n, hidden);
  c.inv_rms.assign(n, 0.0);
  y = DenseMatrix(n, d);

  for (std::size_t t = u_from; t < n; ++t) {
    const auto xt = x.row(t);
    double ss = 0.0;
    for (double v : xt) ss += v * v;
    const double inv = 1.0 / std::sqrt(ss / static_cast<double>(d) + kNormEps);
    c.inv_rms[t] = inv;
    auto nt = c.normed.row(t);
    auto ut = c.u.row(t);
    for (std::size_t i = 0; i < d; ++i) {
      nt[i] = xt[i] * inv;
      ut[i] = p.norm_scale[i] * nt[i];
    }
  }

  Vector m(d), f(d), act(hidden);
  for (std::size_t t = from; t < n; ++t) {
    auto at = c.mixed.row(t);
    const std::size_t kmax = std::min(window - 1, t);
    for (std::size_t k = 0; k <= kmax; ++k) {
      const double ck = p.mix_offsets[k];
      const auto us = c.u.row(t - k);
      for (std::size_t i = 0; i < d; ++i) at[i] += ck * us[i];
    }
    std::fill(m.begin(), m.end(), 0.0);
    add_vecmat(at, p.mix, m);

    auto pre = c.pre.row(t);
    add_vecmat(c.u.row(t), p.ff_in, pre);
    for (std::size_t j = 0; j < hidden; ++j) {
      pre[j] += p.ff_in_bias[j];
      act[j] = pre[j] > 0.0 ? pre[j] : 0.0;
    }
    std::fill(f.begin(), f.end(), 0.0);
    add_vecmat(act, p.ff_out, f);

    const auto xt = x.row(t);
    auto yt = y.row(t);
    for (std::size_t i = 0; i < d; ++i) yt[i] = xt[i] + m[i] + (f[i] + p.ff_out_bias[i]);
  }
}

// Full-sequence backward (forward must have run with from = 0).
void block_backward(const BlockParams& p, const BlockCache& c, const DenseMatrix& dy,
                    DenseMatrix& dx, BlockParams& grad) {
  const std::size_t n = dy.rows();
  const std::size_t d = dy.cols();
  const std::size_t window = p.mix_offsets.size();
  const std::size_t hidden = p.ff_in.cols();
  dx = dy;
  DenseMatrix du(n, d);
  Vector da(d), dq(hidden), dp(hidden), act(hidden);

  for (std::size_t t = 0; t < n; ++t) {
    const auto dyt = dy.row(t);
    // mix branch
    add_outer(grad.mix, c.mixed.row(t), dyt);
    std::fill(da.begin(), da.end(), 0.0);
    add_matvec_t(p.mix, dyt, da);
    const std::size_t kmax = std::min(window - 1, t);
    for (std::size_t k = 0; k <= kmax; ++k) {
      const auto us = c.u.row(t - k);
      grad.mix_offsets[k] += dot(da, us);
      auto dus = du.row(t - k);
      const double ck = p.mix_offsets[k];
      for (std::size_t i = 0; i < d; ++i) dus[i] += ck * da[i];
    }
    // feed-forward branch
    const auto pre = c.pre.row(t);
    for (std::size_t j = 0; j < hidden; ++j) act[j] = pre[j] > 0.0 ? pre[j] : 0.0;
    add_outer(grad.ff_out, act, dyt);
    for (std::size_t i = 0; i < d; ++i) grad.ff_out_bias[i] += dyt[i];
    std::fill(dq.begin(), dq.end(), 0.0);
    add_matvec_t(p.ff_out, dyt, dq);
    for (std::size_t j = 0; j < hidden; ++j) dp[j] = pre[j] > 0.0 ? dq[j] : 0.0;
    add_outer(grad.ff_in, c.u.row(t), dp);
    for (std::size_t j = 0; j < hidden; ++j) grad.ff_in_bias[j] += dp[j];
    add_matvec_t(p.ff_in, dp, du.row(t));
  }

  Vector dn(d);
  for (std::size_t t = 0; t < n; ++t) {
    const auto dut = du.row(t);
    const auto nt = c.normed.row(t);
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      grad.norm_scale[i] += dut[i] * nt[i];
      dn[i] = dut[i] * p.norm_scale[i];
      s += dn[i] * nt[i];
    }
    s /= static_cast<double>(d);
    auto dxt = dx.row(t);
    for (std::size_t i = 0; i < d; ++i) dxt[i] += (dn[i] - nt[i] * s) * c.inv_rms[t];
  }
}

BlockParams random_block(std::size_t d, std::size_t window, SeededRng& rng) {
  BlockParams b = BlockParams::zeros(d, window);
  std::fill(b.norm_scale.begin(), b.norm_scale.end(), 1.0);
  std::fill(b.mix_offsets.begin(), b.mix_offsets.end(), 1.0 / static_cast<double>(window));
  const double s_in = 1.0 / std::sqrt(static_cast<double>(d));
  const double s_out = 0.5 / std::sqrt(static_cast<double>(4 * d));
  for (double& v : b.mix.data()) v = 0.5 * s_in * rng.normal();
  for (double& v : b.ff_in.data()) v = s_in * rng.normal();
  for (double& v : b.ff_out.data()) v = s_out * rng.normal();
  return b;
}

void round_block(BlockParams& b) {
  b.for_each_tensor([](const char*, std::span<double> t) { round_to_float(t); });
}

void round_model(ToyModelPair& m) {
  round_to_float(m.embedding.data());
  round_to_float(m.lm_head.data());
  for (auto& b : m.target_blocks) round_block(b);
  round_to_float(m.draft_proj.data());
  round_block(m.draft_block);
}

DenseMatrix embed(const ToyModelPair& model, std::span<const TokenId> tokens) {
  const std::size_t d = model.hidden_dim();
  DenseMatrix x(tokens.size(), d);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const auto e = model.embedding_of(tokens[t]);
    std::copy(e.begin(), e.end(), x.row(t).begin());
  }
  return x;
}

// Cross-entropy of softmax(logits) against `label`; writes d(loss)/d(logits)
// scaled by `scale` into dlogits.
double softmax_xent(std::span<const double> logits, std::size_t label, double scale,
                    std::span<double> dlogits) {
  const Vector probs = softmax(logits);
  for (std::size_t j = 0; j < probs.size(); ++j) dlogits[j] = scale * probs[j];
  dlogits[label] -= scale;
  return -std::log(std::max(probs[label], 1e-300));
}

// Flat list of mutable tensors for clipping and the SGD update.
using TensorList = std::vector<std::span<double>>;

void collect_target(ToyModelPair& m, TensorList& out) {
  out.push_back(m.embedding.data());
  out.push_back(m.lm_head.data());
  for (auto& b : m.target_blocks) {
    b.for_each_tensor([&](const char*, std::span<double> t) { out.push_back(t); });
  }
}

void collect_drafter(ToyModelPair& m, TensorList& out) {
  out.push_back(m.draft_proj.data());
  m.draft_block.for_each_tensor([&](const char*, std::span<double> t) { out.push_back(t); });
}

void sgd_step(TensorList& params, TensorList& grads, double lr, double clip_norm) {
  double sq = 0.0;
  for (const auto& g : grads) {
    for (double v : g) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) fail(ErrorCode::kNonFiniteLoss, "non-finite gradient norm");
  const double scale = norm > clip_norm ? clip_norm / norm : 1.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    const auto& g = grads[k];
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * scale * g[i];
  }
}

struct TargetGrad {
  DenseMatrix embedding;
  DenseMatrix lm_head;
  std::vector<BlockParams> blocks;
};

// Accumulates the gradient of (mean per-token loss * weight) for one sequence.
double target_sequence_grad(const ToyModelPair& model, std::span<const TokenId> seq,
                            double weight, TargetGrad& g) {
  const std::size_t n = seq.size();
  if (n < 2) return 0.0;
  const std::size_t d = model.hidden_dim();
  const std::size_t L = model.target_blocks.size();
  std::vector<DenseMatrix> xs(L + 1);
  std::vector<BlockCache> caches(L);
  xs[0] = embed(model, seq);
  for (std::size_t b = 0; b < L; ++b) block_forward(model.target_blocks[b], xs[b], 0, xs[b + 1], &caches[b]);

  const double scale = weight / static_cast<double>(n - 1);
  DenseMatrix dh(n, d);
  Vector dlogits(model.vocab_size());
  double loss = 0.0;
  for (std::size_t t = 0; t + 1 < n; ++t) {
    const Vector logits = matvec(xs[L].row(t), model.lm_head);
    loss += softmax_xent(logits, static_cast<std::size_t>(seq[t + 1]), scale, dlogits);
    add_outer(g.lm_head, xs[L].row(t), dlogits);
    add_matvec_t(model.lm_head, dlogits, dh.row(t));
  }
  DenseMatrix dx;
  for (std::size_t b = L; b-- > 0;) {
    block_backward(model.target_blocks[b], caches[b], dh, dx, g.blocks[b]);
    dh = std::move(dx);
  }
  for (std::size_t t = 0; t < n; ++t) {
    auto row = g.embedding.row(static_cast<std::size_t>(seq[t]));
    const auto src = dh.row(t);
    for (std::size_t i = 0; i < d; ++i) row[i] += src[i];
  }
  return loss / static_cast<double>(n - 1);
}

struct DraftExample {
  std::size_t seq;
  std::size_t pos;
};

struct DraftTargets {
  std::vector<DenseMatrix> hidden;               // per sequence, n x d
  std::vector<std::vector<std::size_t>> greedy;  // per sequence, argmax next token
};

DraftTargets compute_draft_targets(const ToyModelPair& model, std::span<const Sequence> corpus) {
  DraftTargets out;
  out.hidden.reserve(corpus.size());
  out.greedy.reserve(corpus.size());
  for (const auto& seq : corpus) {
    TargetOutput fwd = target_forward(model, seq);
    std::vector<std::size_t> labels(seq.size());
    for (std::size_t t = 0; t < seq.size(); ++t) {
      labels[t] = argmax(matvec(fwd.hidden.row(t), model.lm_head));
    }
    out.hidden.push_back(std::move(fwd.hidden));
    out.greedy.push_back(std::move(labels));
  }
  return out;
}

Vector draft_input(const ToyModelPair& model, std::span<const double> prev, TokenId token) {
  const std::size_t d = model.hidden_dim();
  Vector v(2 * d);
  std::copy(prev.begin(), prev.end(), v.begin());
  const auto e = model.embedding_of(token);
  std::copy(e.begin(), e.end(), v.begin() + static_cast<std::ptrdiff_t>(d));
  return v;
}

}  // namespace

BlockParams BlockParams::zeros(std::size_t hidden_dim, std::size_t window) {
  BlockParams b;
  b.norm_scale.assign(hidden_dim, 0.0);
  b.mix_offsets.assign(window, 0.0);
  b.mix = DenseMatrix(hidden_dim, hidden_dim);
  b.ff_in = DenseMatrix(hidden_dim, 4 * hidden_dim);
  b.ff_in_bias.assign(4 * hidden_dim, 0.0);
  b.ff_out = DenseMatrix(4 * hidden_dim, hidden_dim);
  b.ff_out_bias.assign(hidden_dim, 0.0);
  return b;
}

bool BlockParams::all_finite() const {
  bool ok = true;
  for_each_tensor([&](const char*, std::span<const double> t) {
    for (double v : t) ok = ok && std::isfinite(v);
  });
  return ok;
}

std::span<const double> ToyModelPair::embedding_of(TokenId token) const {
  if (token < 0 || static_cast<std::size_t>(token) >= config.vocab_size) {
    fail(ErrorCode::kInvalidToken, "token " + std::to_string(token) + " outside vocabulary of size " +
                                       std::to_string(config.vocab_size));
  }
  return embedding.row(static_cast<std::size_t>(token));
}

void validate_tokens(std::span<const TokenId> tokens, std::size_t vocab_size) {
  for (TokenId t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= vocab_size) {
      fail(ErrorCode::kInvalidToken,
           "token " + std::to_string(t) + " outside vocabulary of size " + std::to_string(vocab_size));
    }
  }
}

ToyModelPair init_pair(const ModelConfig& config) {
  require(config.vocab_size >= 2 && config.hidden_dim >= 1 && config.window >= 1 &&
              config.target_blocks >= 1,
          ErrorCode::kConfigError, "model dimensions must be positive (vocab >= 2)");
  const std::size_t V = config.vocab_size;
  const std::size_t d = config.hidden_dim;
  ToyModelPair m;
  m.config = config;
  SeededRng rng = SeededRng::stream(config.seed, 1);
  m.embedding = DenseMatrix(V, d);
  for (double& v : m.embedding.data()) v = rng.normal();
  m.lm_head = DenseMatrix(d, V);
  const double s_head = 1.0 / std::sqrt(static_cast<double>(d));
  for (double& v : m.lm_head.data()) v = s_head * rng.normal();
  for (std::size_t b = 0; b < config.target_blocks; ++b) {
    m.target_blocks.push_back(random_block(d, config.window, rng));
  }
  SeededRng draft_rng = SeededRng::stream(config.seed, 2);
  m.draft_proj = DenseMatrix(2 * d, d);
  const double s_proj = 1.0 / std::sqrt(static_cast<double>(2 * d));
  for (double& v : m.draft_proj.data()) v = s_proj * draft_rng.normal();
  m.draft_block = random_block(d, config.window, draft_rng);
  round_model(m);
  return m;
}

std::size_t receptive_field(const ModelConfig& config) {
  return config.target_blocks * (config.window - 1) + 1;
}

TargetOutput target_forward(const ToyModelPair& model, std::span<const TokenId> prefix) {
  require(!prefix.empty(), ErrorCode::kEmptyInput, "target_forward: empty prefix");
  validate_tokens(prefix, model.vocab_size());
  DenseMatrix x = embed(model, prefix);
  DenseMatrix y;
  for (const auto& block : model.target_blocks) {
    block_forward(block, x, 0, y, nullptr);
    x = std::move(y);
  }
  TargetOutput out;
  out.next_dist = softmax(matvec(x.row(x.rows() - 1), model.lm_head));
  out.hidden = std::move(x);
  return out;
}

DenseMatrix target_hidden_tail(const ToyModelPair& model, std::span<const TokenId> prefix,
                               std::size_t count) {
  require(!prefix.empty(), ErrorCode::kEmptyInput, "target_hidden_tail: empty prefix");
  require(count >= 1 && count <= prefix.size(), ErrorCode::kShapeError,
          "target_hidden_tail: count outside [1, prefix length]");
  validate_tokens(prefix, model.vocab_size());
  const std::size_t L = model.target_blocks.size();
  const std::size_t reach = model.config.window - 1;
  const std::size_t m = std::min(prefix.size(), count + L * reach);
  const auto tail = prefix.subspan(prefix.size() - m);
  DenseMatrix x = embed(model, tail);
  DenseMatrix y;
  for (std::size_t b = 0; b < L; ++b) {
    const std::size_t lag = count + (L - 1 - b) * reach;
    const std::size_t from = m > lag ? m - lag : 0;
    block_forward(model.target_blocks[b], x, from, y, nullptr);
    x = std::move(y);
  }
  const std::size_t d = model.hidden_dim();
  DenseMatrix out(count, d);
  for (std::size_t r = 0; r < count; ++r) {
    const auto src = x.row(m - count + r);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

Vector target_next_distribution(const ToyModelPair& model, std::span<const TokenId> prefix) {
  const DenseMatrix h = target_hidden_tail(model, prefix, 1);
  return softmax(matvec(h.row(0), model.lm_head));
}

Vector draft_forward(const ToyModelPair& model, std::span<const double> prev_hidden,
                     TokenId token) {
  const std::size_t d = model.hidden_dim();
  require(prev_hidden.size() == d, ErrorCode::kShapeError, "draft_forward: prev_hidden length != d");
  const Vector v = draft_input(model, prev_hidden, token);
  DenseMatrix x(1, d);
  add_vecmat(v, model.draft_proj, x.row(0));
  DenseMatrix y;
  block_forward(model.draft_block, x, 0, y, nullptr);
  return Vector(y.row(0).begin(), y.row(0).end());
}

Vector draft_logits(const ToyModelPair& model, std::span<const double> hidden,
                    std::span<const TokenId> shortlist) {
  return gathered_matvec(hidden, model.lm_head, shortlist);
}

void train_target(ToyModelPair& model, std::span<const Sequence> corpus) {
  const TrainConfig& cfg = model.train;
  if (cfg.target_steps == 0) return;
  require(!corpus.empty(), ErrorCode::kEmptyInput, "train_target: empty corpus");
  for (const auto& s : corpus) validate_tokens(s, model.vocab_size());
  SeededRng rng = SeededRng::stream(cfg.seed, 11);
  const std::size_t d = model.hidden_dim();
  TargetGrad g;
  g.embedding = DenseMatrix(model.vocab_size(), d);
  g.lm_head = DenseMatrix(d, model.vocab_size());
  for (std::size_t b = 0; b < model.target_blocks.size(); ++b) {
    g.blocks.push_back(BlockParams::zeros(d, model.config.window));
  }
  TensorList params, grads;
  collect_target(model, params);
  grads.push_back(g.embedding.data());
  grads.push_back(g.lm_head.data());
  for (auto& b : g.blocks) b.for_each_tensor([&](const char*, std::span<double> t) { grads.push_back(t); });

  const std::size_t batch = std::max<std::size_t>(1, cfg.target_batch);
  for (std::size_t step = 0; step < cfg.target_steps; ++step) {
    for (auto& t : grads) std::fill(t.begin(), t.end(), 0.0);
    double loss = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const auto& seq = corpus[rng.uniform_index(corpus.size())];
      loss += target_sequence_grad(model, seq, 1.0 / static_cast<double>(batch), g);
    }
    if (!std::isfinite(loss)) {
      fail(ErrorCode::kNonFiniteLoss, "target loss diverged at step " + std::to_string(step));
    }
    sgd_step(params, grads, cfg.target_lr, cfg.clip_norm);
  }
}

void train_drafter(ToyModelPair& model, std::span<const Sequence> corpus) {
  const TrainConfig& cfg = model.train;
  if (cfg.draft_steps == 0) return;
  require(!corpus.empty(), ErrorCode::kEmptyInput, "train_drafter: empty corpus");
  const DraftTargets targets = compute_draft_targets(model, corpus);
  std::vector<DraftExample> examples;
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    for (std::size_t t = 0; t < corpus[s].size(); ++t) examples.push_back({s, t});
  }
  require(!examples.empty(), ErrorCode::kEmptyInput, "train_drafter: no positions");

  SeededRng rng = SeededRng::stream(cfg.seed, 12);
  const std::size_t d = model.hidden_dim();
  DenseMatrix g_proj(2 * d, d);
  BlockParams g_block = BlockParams::zeros(d, model.config.window);
  TensorList params, grads;
  collect_drafter(model, params);
  grads.push_back(g_proj.data());
  g_block.for_each_tensor([&](const char*, std::span<double> t) { grads.push_back(t); });

  const std::size_t batch = std::max<std::size_t>(1, cfg.draft_batch);
  const double w = 1.0 / static_cast<double>(batch);
  const Vector zeros(d, 0.0);
  Vector dlogits(model.vocab_size());
  for (std::size_t step = 0; step < cfg.draft_steps; ++step) {
    for (auto& t : grads) std::fill(t.begin(), t.end(), 0.0);
    double loss = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const DraftExample ex = examples[rng.uniform_index(examples.size())];
      const auto& hidden = targets.hidden[ex.seq];
      const std::span<const double> prev =
          ex.pos > 0 ? hidden.row(ex.pos - 1) : std::span<const double>(zeros);
      const Vector v = draft_input(model, prev, corpus[ex.seq][ex.pos]);
      DenseMatrix x(1, d);
      add_vecmat(v, model.draft_proj, x.row(0));
      DenseMatrix y;
      BlockCache cache;
      block_forward(model.draft_block, x, 0, y, &cache);

      const auto h = y.row(0);
      const Vector logits = matvec(h, model.lm_head);
      loss += w * softmax_xent(logits, targets.greedy[ex.seq][ex.pos], w, dlogits);
      DenseMatrix dy(1, d);
      add_matvec_t(model.lm_head, dlogits, dy.row(0));
      const auto ht = hidden.row(ex.pos);
      const double reg = cfg.hidden_regression_weight / static_cast<double>(d);
      for (std::size_t i = 0; i < d; ++i) {
        const double diff = h[i] - ht[i];
        loss += w * reg * diff * diff;
        dy(0, i) += w * reg * 2.0 * diff;
      }
      DenseMatrix dx;
      block_backward(model.draft_block, cache, dy, dx, g_block);
      add_outer(g_proj, v, dx.row(0));
    }
    if (!std::isfinite(loss)) {
      fail(ErrorCode::kNonFiniteLoss, "drafter loss diverged at step " + std::to_string(step));
    }
    sgd_step(params, grads, cfg.draft_lr, cfg.clip_norm);
  }
}

ToyModelPair train_pair(std::span<const Sequence> corpus, const ModelConfig& model_config,
                        const TrainConfig& train_config, TrainReport* report,
                        std::span<const Sequence> heldout) {
  ToyModelPair model = init_pair(model_config);
  model.train = train_config;
  const auto eval_set = heldout.empty() ? corpus : heldout;
  if (report) {
    report->target_loss_before = target_cross_entropy(model, corpus);
    report->heldout_loss_before = target_cross_entropy(model, eval_set);
  }
  train_target(model, corpus);
  round_model(model);
  if (report) report->draft_agreement_before = drafter_agreement(model, eval_set);
  train_drafter(model, corpus);
  round_model(model);
  for (std::size_t v = 0; v < model.vocab_size(); ++v) {
    double sq = 0.0;
    for (std::size_t i = 0; i < model.hidden_dim(); ++i) sq += model.lm_head(i, v) * model.lm_head(i, v);
    require(sq > 0.0, ErrorCode::kDegenerateColumn, "trained LM head has a zero column");
  }
  if (report) {
    report->target_loss_after = target_cross_entropy(model, corpus);
    report->heldout_loss_after = target_cross_entropy(model, eval_set);
    report->draft_agreement_after = drafter_agreement(model, eval_set);
  }
  return model;
}

double target_cross_entropy(const ToyModelPair& model, std::span<const Sequence> sequences) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& seq : sequences) {
    if (seq.size() < 2) continue;
    const TargetOutput fwd = target_forward(model, seq);
    for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
      const Vector lp = log_softmax(matvec(fwd.hidden.row(t), model.lm_head));
      total -= lp[static_cast<std::size_t>(seq[t + 1])];
      ++count;
    }
  }
  require(count > 0, ErrorCode::kEmptyInput, "target_cross_entropy: no positions");
  return total / static_cast<double>(count);
}

double drafter_agreement(const ToyModelPair& model, std::span<const Sequence> sequences) {
  std::size_t agree = 0;
  std::size_t count = 0;
  const Vector zeros(model.hidden_dim(), 0.0);
  for (const auto& seq : sequences) {
    if (seq.empty()) continue;
    const TargetOutput fwd = target_forward(model, seq);
    for (std::size_t t = 0; t < seq.size(); ++t) {
      const std::span<const double> prev =
          t > 0 ? fwd.hidden.row(t - 1) : std::span<const double>(zeros);
      const Vector h = draft_forward(model, prev, seq[t]);
      const std::size_t draft_top = argmax(matvec(h, model.lm_head));
      const std::size_t target_top = argmax(matvec(fwd.hidden.row(t), model.lm_head));
      agree += draft_top == target_top ? 1 : 0;
      ++count;
    }
  }
  require(count > 0, ErrorCode::kEmptyInput, "drafter_agreement: no positions");
  return static_cast<double>(agree) / static_cast<double>(count);
}

std::uint64_t matrix_hash(const DenseMatrix& m) {
  const auto bytes = encode_f32(m.data());
  return fnv1a64(bytes);
}

std::uint64_t model_hash(const ToyModelPair& model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::span<const double> t) { h = fnv1a64(encode_f32(t), h); };
  mix(model.embedding.data());
  mix(model.lm_head.data());
  for (const auto& b : model.target_blocks) b.for_each_tensor([&](const char*, std::span<const double> t) { mix(t); });
  mix(model.draft_proj.data());
  model.draft_block.for_each_tensor([&](const char*, std::span<const double> t) { mix(t); });
  return h;
}

double drafter_core_flops(const ModelConfig& c) {
  const double d = static_cast<double>(c.hidden_dim);
  // projection 2d x d, mix d x d, feed-forward d x 4d x 2; two flops per multiply-add
  return 2.0 * (2.0 * d * d + d * d + 8.0 * d * d);
}

double target_flops_per_token(const ModelConfig& c) {
  const double d = static_cast<double>(c.hidden_dim);
  const double V = static_cast<double>(c.vocab_size);
  return 2.0 * (static_cast<double>(c.target_blocks) * 9.0 * d * d + d * V);
}

}  // namespace specvoc

#include "core/draft_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "core/error.hpp"

namespace specvoc {
namespace {

struct Beam {
  std::vector<TokenId> path;  // drafted tokens so far
  Vector prev_hidden;
  TokenId token = 0;
  double score = 0.0;
  std::ptrdiff_t node = -1;
};

struct StepOutput {
  Vector hidden;
  Shortlist shortlist;
  Vector log_probs;
};

void validate_session(const DraftSession& s, const ToyModelPair& model) {
  require(s.policy != nullptr, ErrorCode::kConfigError, "draft session has no shortlist policy");
  require(!s.prefix.empty(), ErrorCode::kEmptyInput, "draft session has an empty prefix");
  if (s.gamma < 1) fail(ErrorCode::kInvalidBudget, "speculation length must be >= 1");
  if (s.k_t < 1) fail(ErrorCode::kInvalidBudget, "token budget k_t must be >= 1");
  require(s.anchor_hidden.size() == model.hidden_dim(), ErrorCode::kShapeError,
          "anchor hidden state length != d");
  require(s.policy->vocab_size() == model.vocab_size(), ErrorCode::kShapeError,
          "policy vocabulary does not match the model");
  validate_tokens(s.prefix, model.vocab_size());
}

StepOutput run_step(const DraftSession& s, const ToyModelPair& model, const Beam& beam,
                    std::size_t step) {
  StepOutput out;
  if (s.drafter == DrafterKind::kTargetOracle) {
    std::vector<TokenId> seq = s.prefix;
    seq.insert(seq.end(), beam.path.begin(), beam.path.end());
    const DenseMatrix h = target_hidden_tail(model, seq, 1);
    out.hidden.assign(h.row(0).begin(), h.row(0).end());
  } else {
    out.hidden = draft_forward(model, beam.prev_hidden, beam.token);
  }
  ShortlistContext ctx{beam.prev_hidden, model.embedding_of(beam.token)};
  out.shortlist = s.policy->shortlist(ctx, step);
  out.log_probs = log_softmax(draft_logits(model, out.hidden, out.shortlist.tokens));
  return out;
}

Vector embed_distribution(std::span<const TokenId> shortlist, std::span<const double> log_probs,
                          std::size_t vocab_size) {
  Vector q(vocab_size, 0.0);
  for (std::size_t i = 0; i < shortlist.size(); ++i) {
    q[static_cast<std::size_t>(shortlist[i])] = std::exp(log_probs[i]);
  }
  return q;
}

}  // namespace

DraftSession make_session(const ToyModelPair& model, std::span<const TokenId> prefix,
                          std::size_t gamma, std::size_t k_t, const ShortlistPolicy& policy,
                          DrafterKind drafter) {
  require(!prefix.empty(), ErrorCode::kEmptyInput, "make_session: empty prefix");
  DraftSession s;
  s.prefix.assign(prefix.begin(), prefix.end());
  s.gamma = gamma;
  s.k_t = k_t;
  s.policy = &policy;
  s.drafter = drafter;
  if (prefix.size() >= 2) {
    const DenseMatrix h = target_hidden_tail(model, prefix.first(prefix.size() - 1), 1);
    s.anchor_hidden.assign(h.row(0).begin(), h.row(0).end());
  } else {
    s.anchor_hidden.assign(model.hidden_dim(), 0.0);
  }
  return s;
}

DraftResult draft_cycle(const DraftSession& session, const ToyModelPair& model) {
  validate_session(session, model);
  DraftResult result;
  std::vector<DraftCandidate> cands;
  std::vector<Beam> beams(1);
  beams[0].prev_hidden = session.anchor_hidden;
  beams[0].token = session.prefix.back();

  for (std::size_t j = 0; j < session.gamma; ++j) {
    // Expansion bookkeeping: the child's hidden state is its parent's output.
    std::vector<std::size_t> exp_beam;
    std::vector<std::size_t> exp_cand;
    std::vector<Vector> beam_hidden;
    for (std::size_t b = 0; b < beams.size(); ++b) {
      StepOutput so = run_step(session, model, beams[b], j);
      if (session.k_t > so.shortlist.tokens.size()) {
        fail(ErrorCode::kInvalidBudget, "k_t=" + std::to_string(session.k_t) +
                                            " exceeds shortlist size " +
                                            std::to_string(so.shortlist.tokens.size()));
      }
      const TopK top = top_k(so.log_probs, session.k_t);
      const std::size_t eval_index = result.evals.size();
      for (std::size_t i = 0; i < top.indices.size(); ++i) {
        DraftCandidate c;
        c.token = so.shortlist.tokens[top.indices[i]];
        c.score = beams[b].score + top.values[i];
        c.step = j;
        c.parent = beams[b].node;
        c.eval = eval_index;
        exp_beam.push_back(b);
        exp_cand.push_back(cands.size());
        cands.push_back(c);
      }
      result.evals.push_back(DraftEval{j, so.shortlist.budget, std::move(so.shortlist.tokens),
                                       std::move(so.shortlist.clusters), std::move(so.log_probs)});
      beam_hidden.push_back(std::move(so.hidden));
    }
    if (j + 1 == session.gamma) break;

    Vector exp_scores(exp_cand.size());
    for (std::size_t e = 0; e < exp_cand.size(); ++e) exp_scores[e] = cands[exp_cand[e]].score;
    const TopK keep = top_k(exp_scores, std::min(session.k_t, exp_scores.size()));
    std::vector<Beam> next;
    next.reserve(keep.indices.size());
    for (std::size_t e : keep.indices) {
      const Beam& parent = beams[exp_beam[e]];
      const DraftCandidate& c = cands[exp_cand[e]];
      Beam nb;
      nb.path = parent.path;
      nb.path.push_back(c.token);
      nb.prev_hidden = beam_hidden[exp_beam[e]];
      nb.token = c.token;
      nb.score = c.score;
      nb.node = static_cast<std::ptrdiff_t>(exp_cand[e]);
      next.push_back(std::move(nb));
    }
    beams = std::move(next);
  }

  // Re-rank: score descending, then earlier step, then lower token id.
  std::vector<std::size_t> order(cands.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = cands[a];
    const auto& y = cands[b];
    if (x.score != y.score) return x.score > y.score;
    if (x.step != y.step) return x.step < y.step;
    return x.token < y.token;
  });
  std::vector<std::ptrdiff_t> new_index(cands.size());
  for (std::size_t r = 0; r < order.size(); ++r) new_index[order[r]] = static_cast<std::ptrdiff_t>(r);
  result.candidates.reserve(cands.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    DraftCandidate c = cands[order[r]];
    if (c.parent >= 0) c.parent = new_index[static_cast<std::size_t>(c.parent)];
    result.candidates.push_back(c);
  }

  // Greedy path: best node at depth 0, then the best child at each depth.
  std::ptrdiff_t current = -1;
  for (std::size_t depth = 0; depth < session.gamma; ++depth) {
    std::ptrdiff_t best = -1;
    for (std::size_t r = 0; r < result.candidates.size(); ++r) {
      const auto& c = result.candidates[r];
      if (c.step == depth && c.parent == current) {
        best = static_cast<std::ptrdiff_t>(r);
        break;
      }
    }
    if (best < 0) break;
    result.chain.push_back(static_cast<std::size_t>(best));
    current = best;
  }
  return result;
}

std::vector<TokenId> DraftResult::chain_tokens() const {
  std::vector<TokenId> out;
  out.reserve(chain.size());
  for (std::size_t i : chain) out.push_back(candidates[i].token);
  return out;
}

Vector DraftResult::chain_distribution(std::size_t i, std::size_t vocab_size) const {
  require(i < chain.size(), ErrorCode::kIndexOutOfRange, "chain_distribution: position out of range");
  const DraftEval& e = evals[candidates[chain[i]].eval];
  return embed_distribution(e.shortlist, e.log_probs, vocab_size);
}

std::vector<std::size_t> DraftResult::shortlist_sizes() const {
  std::vector<std::size_t> out;
  out.reserve(evals.size());
  for (const auto& e : evals) out.push_back(e.shortlist.size());
  return out;
}

SampledChain draft_chain_sampled(const DraftSession& session, const ToyModelPair& model,
                                 SeededRng& rng) {
  validate_session(session, model);
  SampledChain out;
  Beam beam;
  beam.prev_hidden = session.anchor_hidden;
  beam.token = session.prefix.back();
  for (std::size_t j = 0; j < session.gamma; ++j) {
    StepOutput so = run_step(session, model, beam, j);
    Vector probs(so.log_probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = std::exp(so.log_probs[i]);
    const TokenId token = so.shortlist.tokens[rng.categorical(probs)];
    out.tokens.push_back(token);
    out.dists.push_back(embed_distribution(so.shortlist.tokens, so.log_probs, model.vocab_size()));
    out.shortlist_sizes.push_back(so.shortlist.tokens.size());
    beam.path.push_back(token);
    beam.prev_hidden = std::move(so.hidden);
    beam.token = token;
  }
  return out;
}

DraftCost draft_cost(std::span<const std::size_t> shortlist_sizes, const CostDims& dims) {
  DraftCost c;
  for (std::size_t b : shortlist_sizes) {
    c.head_flops += 2.0 * static_cast<double>(dims.hidden_dim) * static_cast<double>(b);
  }
  c.core_flops = static_cast<double>(shortlist_sizes.size()) * dims.core_flops_per_eval;
  const double total = c.head_flops + c.core_flops;
  c.vocab_dependent_fraction = total > 0.0 ? c.head_flops / total : 0.0;
  return c;
}

DraftCost draft_cost(const DraftResult& result, const CostDims& dims) {
  const auto sizes = result.shortlist_sizes();
  return draft_cost(sizes, dims);
}

}  // namespace specvoc

#include "core/verifier.hpp"

#include <algorithm>

#include "core/error.hpp"

namespace specvoc {

TargetDistributionFn target_distribution_fn(const ToyModelPair& model) {
  return [&model](std::span<const TokenId> seq) { return target_next_distribution(model, seq); };
}

VerificationOutcome verify_chain_lossless(const TargetDistributionFn& target,
                                          std::span<const TokenId> prefix,
                                          std::span<const TokenId> chain,
                                          std::span<const Vector> drafter_dists, SeededRng& rng) {
  require(chain.size() == drafter_dists.size(), ErrorCode::kShapeError,
          "verify_chain_lossless: one drafter distribution per chain token required");
  VerificationOutcome out;
  out.mode = VerifyMode::kLossless;
  std::vector<TokenId> seq(prefix.begin(), prefix.end());
  for (std::size_t i = 0; i < chain.size(); ++i) {
    const Vector p = target(seq);
    const Vector& q = drafter_dists[i];
    require(q.size() == p.size(), ErrorCode::kShapeError, "drafter distribution length != |V|");
    const auto x = static_cast<std::size_t>(chain[i]);
    require(x < p.size(), ErrorCode::kInvalidToken, "chain token outside the vocabulary");
    if (!(q[x] > 0.0)) {
      fail(ErrorCode::kInvalidProposal,
           "drafter assigned zero probability to proposed token " + std::to_string(x));
    }
    // Accept with probability min(1, p/q).
    if (rng.uniform() * q[x] < p[x]) {
      out.accepted.push_back(true);
      out.committed.push_back(chain[i]);
      seq.push_back(chain[i]);
      ++out.accepted_count;
      continue;
    }
    out.accepted.push_back(false);
    Vector residual(p.size());
    for (std::size_t v = 0; v < p.size(); ++v) residual[v] = std::max(0.0, p[v] - q[v]);
    out.committed.push_back(static_cast<TokenId>(rng.categorical(residual)));
    return out;
  }
  const Vector p = target(seq);
  out.committed.push_back(static_cast<TokenId>(rng.categorical(p)));
  return out;
}

VerificationOutcome verify_tree_greedy(const TargetDistributionFn& target,
                                       std::span<const TokenId> prefix, const DraftResult& draft) {
  VerificationOutcome out;
  out.mode = VerifyMode::kGreedy;
  std::vector<TokenId> seq(prefix.begin(), prefix.end());
  std::ptrdiff_t node = -1;
  for (std::size_t depth = 0;; ++depth) {
    const Vector p = target(seq);
    const auto best = static_cast<TokenId>(argmax(p));
    std::ptrdiff_t match = -1;
    for (std::size_t r = 0; r < draft.candidates.size(); ++r) {
      const auto& c = draft.candidates[r];
      if (c.step == depth && c.parent == node && c.token == best) {
        match = static_cast<std::ptrdiff_t>(r);
        break;
      }
    }
    seq.push_back(best);
    out.committed.push_back(best);
    if (match < 0) {
      // Bonus token after a full match is not a rejection.
      bool has_children = false;
      for (const auto& c : draft.candidates) {
        if (c.step == depth && c.parent == node) {
          has_children = true;
          break;
        }
      }
      if (has_children) out.accepted.push_back(false);
      return out;
    }
    out.accepted.push_back(true);
    ++out.accepted_count;
    node = match;
  }
}

double mean_accepted_length(std::span<const VerificationOutcome> outcomes) {
  if (outcomes.empty()) fail(ErrorCode::kEmptyInput, "mean_accepted_length: no outcomes");
  double total = 0.0;
  for (const auto& o : outcomes) total += static_cast<double>(o.committed.size());
  return total / static_cast<double>(outcomes.size());
}

}  // namespace specvoc

#include "core/theory.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace specvoc {
namespace {

void check_token(TokenId x, std::size_t n) {
  if (x < 0 || static_cast<std::size_t>(x) >= n) {
    fail(ErrorCode::kInvalidToken, "token " + std::to_string(x) + " outside [0, " +
                                       std::to_string(n) + ")");
  }
}

}  // namespace

double omega(double alpha, std::size_t gamma) {
  if (alpha >= 1.0) return static_cast<double>(gamma + 1);
  return (1.0 - std::pow(alpha, static_cast<double>(gamma + 1))) / (1.0 - alpha);
}

double speedup(double t_target, double t_draft, double t_verify, double alpha, std::size_t gamma) {
  return t_target * omega(alpha, gamma) / (static_cast<double>(gamma) * t_draft + t_verify);
}

double beta(std::span<const double> p, std::span<const double> q) {
  require(p.size() == q.size(), ErrorCode::kShapeError, "beta: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::min(p[i], q[i]);
  return s;
}

double subset_mass(std::span<const double> p, std::span<const TokenId> subset) {
  double s = 0.0;
  for (TokenId x : subset) {
    check_token(x, p.size());
    s += p[static_cast<std::size_t>(x)];
  }
  return s;
}

TopKMass top_k_mass(std::span<const double> p, std::size_t k) {
  const TopK top = top_k(p, k);
  TopKMass out;
  for (std::size_t i : top.indices) out.tokens.push_back(static_cast<TokenId>(i));
  std::sort(out.tokens.begin(), out.tokens.end());
  for (double v : top.values) out.mass += v;
  return out;
}

Vector best_restricted_q(std::span<const double> p, std::span<const TokenId> subset) {
  const double mass = subset_mass(p, subset);
  if (!(mass > 0.0)) fail(ErrorCode::kZeroMassSubset, "best_restricted_q: subset has zero mass");
  Vector q(p.size(), 0.0);
  for (TokenId x : subset) {
    q[static_cast<std::size_t>(x)] = p[static_cast<std::size_t>(x)] / mass;
  }
  return q;
}

OracleVsStatic oracle_vs_static(std::span<const WeightedContext> ensemble, std::size_t k,
                                bool require_exhaustive) {
  require(!ensemble.empty(), ErrorCode::kEmptyInput, "oracle_vs_static: empty ensemble");
  const std::size_t n = ensemble.front().p.size();
  if (k < 1 || k > n) fail(ErrorCode::kInvalidBudget, "oracle_vs_static: k outside [1, |V|]");
  for (const auto& c : ensemble) {
    require(c.p.size() == n, ErrorCode::kShapeError, "oracle_vs_static: ragged ensemble");
  }

  OracleVsStatic out;
  Vector expected(n, 0.0);
  for (const auto& c : ensemble) {
    out.oracle_mean += c.weight * top_k_mass(c.p, k).mass;
    for (std::size_t x = 0; x < n; ++x) expected[x] += c.weight * c.p[x];
  }

  if (n <= kMaxExhaustiveVocab) {
    // Enumerate k-subsets in lexicographic order; ties keep the first.
    std::vector<TokenId> subset(k);
    for (std::size_t i = 0; i < k; ++i) subset[i] = static_cast<TokenId>(i);
    double best = -1.0;
    while (true) {
      double mean = 0.0;
      for (const auto& c : ensemble) mean += c.weight * subset_mass(c.p, subset);
      if (mean > best) {
        best = mean;
        out.best_static_set = subset;
      }
      std::ptrdiff_t i = static_cast<std::ptrdiff_t>(k) - 1;
      while (i >= 0 && static_cast<std::size_t>(subset[static_cast<std::size_t>(i)]) ==
                           n - k + static_cast<std::size_t>(i)) {
        --i;
      }
      if (i < 0) break;
      ++subset[static_cast<std::size_t>(i)];
      for (std::size_t j = static_cast<std::size_t>(i) + 1; j < k; ++j) subset[j] = subset[j - 1] + 1;
    }
    out.best_static_mean = best;
  } else {
    if (require_exhaustive) {
      fail(ErrorCode::kInfeasibleEnumeration,
           "exhaustive static search limited to |V| <= " + std::to_string(kMaxExhaustiveVocab));
    }
    out.exhaustive = false;
    const TopKMass top = top_k_mass(expected, k);
    out.best_static_set = top.tokens;
    for (const auto& c : ensemble) out.best_static_mean += c.weight * subset_mass(c.p, top.tokens);
  }
  out.gap = out.oracle_mean - out.best_static_mean;
  return out;
}

double simulate_omega(double alpha, std::size_t gamma, std::size_t cycles, SeededRng& rng) {
  require(cycles > 0, ErrorCode::kEmptyInput, "simulate_omega: zero cycles");
  std::uint64_t total = 0;
  for (std::size_t c = 0; c < cycles; ++c) {
    std::size_t accepted = 0;
    while (accepted < gamma && rng.uniform() < alpha) ++accepted;
    total += accepted + 1;
  }
  return static_cast<double>(total) / static_cast<double>(cycles);
}

}  // namespace specvoc

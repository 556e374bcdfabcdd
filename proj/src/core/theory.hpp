#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "core/numerics.hpp"

namespace specvoc {

// Expected tokens per verification cycle under i.i.d. acceptance alpha.
double omega(double alpha, std::size_t gamma);

// Speedup over autoregressive decoding: T_T * omega / (gamma * T_D + T_V).
double speedup(double t_target, double t_draft, double t_verify, double alpha, std::size_t gamma);

// sum_x min(p(x), q(x))
double beta(std::span<const double> p, std::span<const double> q);

double subset_mass(std::span<const double> p, std::span<const TokenId> subset);

struct TopKMass {
  double mass = 0.0;
  std::vector<TokenId> tokens;  // sorted by id
};

TopKMass top_k_mass(std::span<const double> p, std::size_t k);

// p renormalized on S, zero elsewhere.
Vector best_restricted_q(std::span<const double> p, std::span<const TokenId> subset);

struct WeightedContext {
  Vector p;
  double weight = 0.0;
};

struct OracleVsStatic {
  double oracle_mean = 0.0;
  double best_static_mean = 0.0;
  std::vector<TokenId> best_static_set;
  double gap = 0.0;
  bool exhaustive = true;
};

inline constexpr std::size_t kMaxExhaustiveVocab = 16;

// Compares per-context top-k with the best fixed k-subset. Exhaustive search
// when |V| <= kMaxExhaustiveVocab; otherwise the modular greedy maximizer,
// unless `require_exhaustive` is set (then InfeasibleEnumeration).
OracleVsStatic oracle_vs_static(std::span<const WeightedContext> ensemble, std::size_t k,
                                bool require_exhaustive = false);

// Mean tokens per cycle from simulated i.i.d. acceptance.
double simulate_omega(double alpha, std::size_t gamma, std::size_t cycles, SeededRng& rng);

}  // namespace specvoc

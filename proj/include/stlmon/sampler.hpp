#pragma once

#include "stlmon/formula.hpp"
#include "stlmon/random.hpp"

#include <vector>

namespace stlmon {

/// Knobs for random pure-past formula generation.
struct GenConfig {
  std::vector<std::string> variables;  // names; atom indices follow positions
  std::uint32_t interval_cap = 100;    // bound B for finite interval ends
  std::size_t min_height = 2;
  std::size_t max_height = 6;          // never above 17
  bool multisignal = false;            // allow atoms x_i - x_j >= c
  double p_unbounded = 0.5;            // chance a temporal interval stays [0,inf)
};

/// Random pure-past formula with height in [min_height, max_height].
FormulaPtr sample_ppstl(Rng& rng, const GenConfig& cfg);

/// Random atom per cfg (threshold in [0,1], optional signal-vs-signal shape).
FormulaPtr sample_atom(Rng& rng, const GenConfig& cfg);

}  // namespace stlmon

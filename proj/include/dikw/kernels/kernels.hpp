#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "dikw/dataset/table.hpp"

// Row-parallel building blocks for the information layer and the simulator.
// Every kernel has a serial reference and an OpenMP version selected by
// `Exec`; both produce bit-identical results. Floating-point sums are
// accumulated per fixed-size chunk and combined in chunk order, so the
// result does not depend on the thread count.
namespace dikw::kernels {

enum class Exec { Serial, Parallel };

inline constexpr std::size_t kChunk = 4096;

using Mask = std::vector<std::uint8_t>;

enum class Cmp { Eq, Neq, Lt, Le, Gt, Ge };

Mask full_mask(std::size_t n);
std::size_t count(const Mask& m, Exec exec = Exec::Parallel);
// m &= other
void mask_and(Mask& m, const Mask& other, Exec exec = Exec::Parallel);

// Keeps rows whose cell is present and `cell <cmp> value` (numeric view).
void mask_compare(const dataset::Column& col, Cmp cmp, double value, Mask& m, Exec exec = Exec::Parallel);
// Keeps rows whose categorical code is allowed (`allowed[code] != 0`); with
// `negate`, rows whose present code is not allowed.
void mask_codes(const dataset::Column& col, const std::vector<std::uint8_t>& allowed, bool negate, Mask& m,
                Exec exec = Exec::Parallel);
void mask_text(const dataset::Column& col, const std::set<std::string>& values, bool negate, Mask& m,
               Exec exec = Exec::Parallel);
void mask_not_null(const dataset::Column& col, Mask& m, Exec exec = Exec::Parallel);

struct BinaryTally {
  std::int64_t n = 0;  // masked rows with a present cell
  std::int64_t k = 0;  // of which nonzero
  bool operator==(const BinaryTally&) const = default;
};

BinaryTally tally_binary(const dataset::Column& y, const Mask& m, Exec exec = Exec::Parallel);

// One tally per group code in [0, groups); rows with code < 0 are skipped.
std::vector<BinaryTally> tally_by_group(const std::vector<std::int32_t>& codes, int groups,
                                        const dataset::Column& y, const Mask& m, Exec exec = Exec::Parallel);

// Row-major counts[a * cols + b] over masked rows with both codes >= 0.
std::vector<std::int64_t> contingency(const std::vector<std::int32_t>& a, int rows,
                                      const std::vector<std::int32_t>& b, int cols, const Mask& m,
                                      Exec exec = Exec::Parallel);

// Masked rows where `consequent` is true but `antecedent` is not.
std::int64_t implication_violations(const dataset::Column& antecedent, const dataset::Column& consequent,
                                    const Mask& m, Exec exec = Exec::Parallel);

struct Moments {
  std::int64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;  // sum of squared deviations
  bool operator==(const Moments&) const = default;
};

// Two-pass mean and sum of squared deviations over present masked cells.
Moments moments(const dataset::Column& y, const Mask& m, Exec exec = Exec::Parallel);

struct PairedMoments {
  std::int64_t n = 0;
  double mean_x = 0.0, mean_y = 0.0;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  bool operator==(const PairedMoments&) const = default;
};

// Pairwise-complete two-pass centered sums.
PairedMoments paired_moments(const dataset::Column& x, const dataset::Column& y, const Mask& m,
                             Exec exec = Exec::Parallel);

}  // namespace dikw::kernels

#ifndef MHAS_TUNING_HPP_
#define MHAS_TUNING_HPP_

// Exhaustive (alpha_h, alpha_s, r) search on a pseudo-validation split.
//
// Every configuration is filtered and evaluated. Configurations whose recall
// (averaged over the objective subsets) is within `recall_slack` of the best
// recall are feasible; among those the lowest mean MR-2 wins, ties going to
// the smaller (alpha_s, alpha_h, r) in that order.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mhas/data_io.hpp"
#include "mhas/evaluation.hpp"
#include "mhas/suppression.hpp"

namespace mhas {

struct GridSpec {
  std::vector<double> alpha_h_values;
  std::vector<double> alpha_s_values;
  std::vector<int> r_values;
  std::vector<std::string> objective_subsets;
  double recall_slack = 0.0;
  bool use_height = true;
  bool use_existence = true;

  /// alpha_h 0.3..1.0 step 0.1, alpha_s 0.01..0.10 step 0.01, r in {1,2,4,8,16},
  /// objective over Reasonable and All.
  static GridSpec defaults();

  /// Throws ValidationError for empty lists or unknown subsets.
  void validate() const;
};

struct TuningRow {
  SuppressionParams params;
  double recall = 0.0;
  std::vector<double> mr2;  // parallel to objective_subsets
  double objective = 0.0;
  bool feasible = false;
};

struct TuningResult {
  std::vector<std::string> objective_subsets;
  std::vector<TuningRow> table;  // grid order: alpha_h, then alpha_s, then r
  std::size_t best_index = 0;
  double max_recall = 0.0;

  const TuningRow& best() const { return table[best_index]; }
};

/// Evaluates every configuration in grid order; rows are computed on up to
/// `threads` workers and gathered before selection.
TuningResult tune_grid(const DetectionSet& dets, const Dataset& ds, const ProfileSource& profiles,
                       const GridSpec& grid, const EvalParams& eval = {}, int threads = 1);

/// Index of the selected row, applying the feasibility filter and tie-break.
std::size_t select_best(const std::vector<TuningRow>& table, double recall_slack);

void write_tuning_json(std::ostream& out, const TuningResult& result);

/// Comma-separated numeric lists for CLI flags.
std::vector<double> parse_real_list(const std::string& text);
std::vector<int> parse_int_list(const std::string& text);

/// Seeded random subset of `count` images, kept in dataset order.
Dataset pseudo_validation_split(const Dataset& ds, std::size_t count, std::uint64_t seed);

}  // namespace mhas

#endif  // MHAS_TUNING_HPP_

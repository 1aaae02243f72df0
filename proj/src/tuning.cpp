#include "mhas/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <tuple>

#include "json.hpp"

namespace mhas {

GridSpec GridSpec::defaults() {
  GridSpec g;
  for (int i = 3; i <= 10; ++i) g.alpha_h_values.push_back(i / 10.0);
  for (int i = 1; i <= 10; ++i) g.alpha_s_values.push_back(i / 100.0);
  g.r_values = {1, 2, 4, 8, 16};
  g.objective_subsets = {"Reasonable", "All"};
  return g;
}

void GridSpec::validate() const {
  if (alpha_h_values.empty() || alpha_s_values.empty() || r_values.empty())
    throw ValidationError("tuning grid: every parameter list must be non-empty");
  if (objective_subsets.empty()) throw ValidationError("tuning grid: no objective subsets");
  for (const auto& name : objective_subsets) subset_by_name(name);
  if (!(recall_slack >= 0.0)) throw ValidationError("tuning grid: recall slack must be >= 0");
}

std::size_t select_best(const std::vector<TuningRow>& table, double recall_slack) {
  if (table.empty()) throw ValidationError("tuning grid: empty table");
  double max_recall = table.front().recall;
  for (const TuningRow& row : table) max_recall = std::max(max_recall, row.recall);
  auto key = [](const TuningRow& row) {
    return std::make_tuple(row.objective, row.params.alpha_s, row.params.alpha_h, row.params.r);
  };
  std::size_t best = table.size();
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table[i].recall < max_recall - recall_slack) continue;
    if (best == table.size() || key(table[i]) < key(table[best])) best = i;
  }
  return best;
}

TuningResult tune_grid(const DetectionSet& dets, const Dataset& ds, const ProfileSource& profiles,
                       const GridSpec& grid, const EvalParams& eval, int threads) {
  grid.validate();
  std::vector<SubsetSpec> subsets;
  for (const auto& name : grid.objective_subsets) subsets.push_back(subset_by_name(name));

  TuningResult result;
  result.objective_subsets = grid.objective_subsets;
  for (double ah : grid.alpha_h_values)
    for (double as : grid.alpha_s_values)
      for (int r : grid.r_values) {
        TuningRow row;
        row.params = SuppressionParams{ah, as, r, grid.use_height, grid.use_existence};
        row.params.validate();
        result.table.push_back(row);
      }

  parallel_for(result.table.size(), threads, [&](std::size_t i) {
    TuningRow& row = result.table[i];
    const DetectionSet kept = suppress_all(dets, profiles, row.params);
    const EvalReport report = evaluate(kept, ds, subsets, eval);
    double recall = 0.0, objective = 0.0;
    for (const SubsetReport& s : report.subsets) {
      if (!s.defined) throw ValidationError("tuning: " + s.error);
      recall += s.recall;
      objective += s.mr2;
      row.mr2.push_back(s.mr2);
    }
    row.recall = recall / static_cast<double>(subsets.size());
    row.objective = objective / static_cast<double>(subsets.size());
  });

  result.best_index = select_best(result.table, grid.recall_slack);
  result.max_recall = 0.0;
  for (const TuningRow& row : result.table) result.max_recall = std::max(result.max_recall, row.recall);
  for (TuningRow& row : result.table) row.feasible = row.recall >= result.max_recall - grid.recall_slack;
  return result;
}

void write_tuning_json(std::ostream& out, const TuningResult& result) {
  using nlohmann::ordered_json;
  auto params_json = [](const SuppressionParams& p) {
    ordered_json j;
    j["alpha_h"] = p.alpha_h;
    j["alpha_s"] = p.alpha_s;
    j["r"] = p.r;
    j["use_height"] = p.use_height;
    j["use_existence"] = p.use_existence;
    return j;
  };
  ordered_json doc;
  doc["objective_subsets"] = result.objective_subsets;
  doc["max_recall"] = result.max_recall;
  doc["best_index"] = result.best_index;
  doc["best"] = params_json(result.best().params);
  doc["best_objective"] = result.best().objective;
  doc["best_recall"] = result.best().recall;
  auto rows = ordered_json::array();
  for (const TuningRow& row : result.table) {
    ordered_json j = params_json(row.params);
    j["recall"] = row.recall;
    j["mr2"] = row.mr2;
    j["objective"] = row.objective;
    j["feasible"] = row.feasible;
    rows.push_back(std::move(j));
  }
  doc["table"] = std::move(rows);
  out << doc.dump(2) << '\n';
}

namespace {

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& text, Parse parse) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    T v{};
    try {
      v = parse(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw ValidationError("cannot parse list item '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ValidationError("empty list '" + text + "'");
  return out;
}

}  // namespace

std::vector<double> parse_real_list(const std::string& text) {
  return parse_list<double>(text, [](const std::string& s, std::size_t* n) { return std::stod(s, n); });
}

std::vector<int> parse_int_list(const std::string& text) {
  return parse_list<int>(text, [](const std::string& s, std::size_t* n) { return std::stoi(s, n); });
}

Dataset pseudo_validation_split(const Dataset& ds, std::size_t count, std::uint64_t seed) {
  if (count > ds.size())
    throw ValidationError("split: requested " + std::to_string(count) + " images but dataset has " +
                          std::to_string(ds.size()));
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Partial Fisher-Yates on a fully specified engine, so the selection is
  // the same on every standard library.
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  Dataset out;
  for (std::size_t i : idx) out.add_image(ds.images[i], ds.annotations[i]);
  return out;
}

}  // namespace mhas

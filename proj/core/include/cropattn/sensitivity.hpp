#ifndef CROPATTN_SENSITIVITY_HPP
#define CROPATTN_SENSITIVITY_HPP

#include <map>
#include <string>
#include <vector>

#include "cropattn/explain.hpp"
#include "cropattn/metrics.hpp"
#include "cropattn/training.hpp"
#include "cropattn/types.hpp"

namespace cropattn {

/// Remove every parcel of one crop; splits are remapped, vocabulary shrinks,
/// everything else is untouched. The input dataset is never mutated.
Dataset occlude_crop(const Dataset& dataset, const std::string& crop);

/// Per-(crop, date) change in mean attention importance after an occlusion
/// retraining. Deltas can be negative; per-crop sums over fully-supported
/// dates vanish (difference of two distributions).
struct OcclusionDelta {
  std::string occluded_crop;
  std::map<std::string, std::map<Date, double>> deltas;  // crop -> date -> delta
  std::map<std::string, std::map<Date, int>> supports;   // same keys
};

/// delta(d, c) = (1/N) sum over crop-c parcels observing d of
/// (importance_after - importance_before); support-based like the crop mean.
/// Both table sets must cover exactly the same parcels.
OcclusionDelta occlusion_delta(const std::vector<ImportanceTable>& full_tables,
                               const std::vector<ImportanceTable>& occluded_tables,
                               const std::vector<std::string>& crops);

/// 1/2 * sum |delta| over dates: how much importance mass moved.
double total_variation(const std::map<Date, double>& deltas);

/// Per-crop recall change (after - before) over the classes both models share.
struct AccuracyChange {
  std::map<std::string, double> by_crop;
};

AccuracyChange accuracy_change(const Metrics& before,
                               const std::vector<std::string>& before_vocab,
                               const Metrics& after,
                               const std::vector<std::string>& after_vocab);

struct OcclusionResult {
  std::string occluded_crop;
  OcclusionDelta delta;
  AccuracyChange accuracy;
  Metrics metrics; // the occluded model on its own test split
  std::map<std::string, double> total_variation_by_crop;
};

struct OcclusionStudy {
  Metrics reference_metrics;
  std::vector<OcclusionResult> results;
};

/// For each listed crop: rebuild without it, retrain with the identical seed
/// and config, recompute importances on the shared test parcels, and emit
/// deltas plus accuracy changes. The reserved name "none" runs the
/// self-consistency case (no crop removed; all deltas must be zero).
OcclusionStudy occlusion_study(const Dataset& dataset,
                               const ModelConfig& model_config,
                               const TrainConfig& train_config,
                               const std::vector<std::string>& crops_to_occlude);

} // namespace cropattn

#endif // CROPATTN_SENSITIVITY_HPP

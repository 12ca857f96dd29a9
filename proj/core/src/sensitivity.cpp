#include "cropattn/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "cropattn/errors.hpp"

namespace cropattn {

Dataset occlude_crop(const Dataset& dataset, const std::string& crop) {
  const int crop_idx = dataset.class_index(crop);
  if (crop_idx < 0) throw UnknownCrop("crop '" + crop + "' is not in the dataset");
  if (dataset.class_vocabulary.size() < 3) {
    throw TooFewClasses("removing '" + crop + "' would leave fewer than 2 classes");
  }

  Dataset out;
  for (const std::string& c : dataset.class_vocabulary) {
    if (c != crop) out.class_vocabulary.push_back(c);
  }
  std::vector<std::size_t> new_index(dataset.parcels.size(),
                                     static_cast<std::size_t>(-1));
  for (size_t i = 0; i < dataset.parcels.size(); ++i) {
    if (dataset.parcels[i].crop == crop) continue;
    new_index[i] = out.parcels.size();
    out.parcels.push_back(dataset.parcels[i]);
  }
  auto remap = [&](const std::vector<std::size_t>& split) {
    std::vector<std::size_t> mapped;
    for (std::size_t old : split) {
      if (new_index.at(old) != static_cast<std::size_t>(-1)) {
        mapped.push_back(new_index[old]);
      }
    }
    return mapped;
  };
  out.splits.train = remap(dataset.splits.train);
  out.splits.validation = remap(dataset.splits.validation);
  out.splits.test = remap(dataset.splits.test);
  out.date_axis = collect_date_axis(out.parcels);
  return out;
}

OcclusionDelta occlusion_delta(const std::vector<ImportanceTable>& full_tables,
                               const std::vector<ImportanceTable>& occluded_tables,
                               const std::vector<std::string>& crops) {
  std::unordered_map<std::string, const ImportanceTable*> full_of;
  for (const auto& t : full_tables) full_of.emplace(t.parcel_id, &t);
  if (full_of.size() != full_tables.size() ||
      occluded_tables.size() != full_tables.size()) {
    throw ParcelMismatch("importance table sets cover different parcels");
  }

  const std::unordered_set<std::string> wanted(crops.begin(), crops.end());
  OcclusionDelta out;
  for (const auto& after : occluded_tables) {
    auto it = full_of.find(after.parcel_id);
    if (it == full_of.end()) {
      throw ParcelMismatch("parcel '" + after.parcel_id +
                           "' missing from the reference tables");
    }
    const ImportanceTable& before = *it->second;
    if (!wanted.count(after.crop)) continue;
    if (before.values.size() != after.values.size()) {
      throw ParcelMismatch("parcel '" + after.parcel_id +
                           "' has different date sets in the two models");
    }
    for (const auto& [date, value] : after.values) {
      auto bit = before.values.find(date);
      if (bit == before.values.end()) {
        throw ParcelMismatch("parcel '" + after.parcel_id + "' observed " +
                             to_iso_string(date) + " in only one model");
      }
      out.deltas[after.crop][date] += value - bit->second;
      out.supports[after.crop][date] += 1;
    }
  }
  // Support-based mean, same convention as the crop-scope importances.
  for (auto& [crop, by_date] : out.deltas) {
    for (auto& [date, sum] : by_date) {
      sum /= static_cast<double>(out.supports.at(crop).at(date));
    }
  }
  return out;
}

double total_variation(const std::map<Date, double>& deltas) {
  double tv = 0.0;
  for (const auto& [date, d] : deltas) tv += std::abs(d);
  return 0.5 * tv;
}

AccuracyChange accuracy_change(const Metrics& before,
                               const std::vector<std::string>& before_vocab,
                               const Metrics& after,
                               const std::vector<std::string>& after_vocab) {
  auto recall_of = [](const Metrics& m, int row) {
    const double support = m.confusion.row(row).sum();
    return support > 0.0 ? m.confusion(row, row) / support : 0.0;
  };
  AccuracyChange out;
  for (size_t a = 0; a < after_vocab.size(); ++a) {
    const auto bit =
        std::find(before_vocab.begin(), before_vocab.end(), after_vocab[a]);
    if (bit == before_vocab.end()) continue;
    const int b = static_cast<int>(bit - before_vocab.begin());
    out.by_crop[after_vocab[a]] =
        recall_of(after, static_cast<int>(a)) - recall_of(before, b);
  }
  return out;
}

OcclusionStudy occlusion_study(const Dataset& dataset,
                               const ModelConfig& model_config,
                               const TrainConfig& train_config,
                               const std::vector<std::string>& crops_to_occlude) {
  if (crops_to_occlude.empty()) throw EmptyInput("no crops to occlude");

  const TrainResult reference = train(dataset, model_config, train_config);
  OcclusionStudy study;
  study.reference_metrics =
      evaluate(reference.checkpoint, dataset, dataset.splits.test);
  const std::vector<ImportanceTable> reference_tables =
      parcel_importances(reference.checkpoint, dataset, dataset.splits.test);

  for (const std::string& crop : crops_to_occlude) {
    const bool self_run = crop == "none";
    const Dataset occluded = self_run ? dataset : occlude_crop(dataset, crop);

    const TrainResult run = train(occluded, model_config, train_config);
    OcclusionResult result;
    result.occluded_crop = crop;
    result.metrics = evaluate(run.checkpoint, occluded, occluded.splits.test);
    result.accuracy =
        accuracy_change(study.reference_metrics, dataset.class_vocabulary,
                        result.metrics, occluded.class_vocabulary);

    const std::vector<ImportanceTable> occluded_tables =
        parcel_importances(run.checkpoint, occluded, occluded.splits.test);
    // Restrict the reference tables to the parcels the occluded model sees.
    std::unordered_set<std::string> shared;
    for (const auto& t : occluded_tables) shared.insert(t.parcel_id);
    std::vector<ImportanceTable> reference_shared;
    for (const auto& t : reference_tables) {
      if (shared.count(t.parcel_id)) reference_shared.push_back(t);
    }
    result.delta = occlusion_delta(reference_shared, occluded_tables,
                                   occluded.class_vocabulary);
    result.delta.occluded_crop = crop;
    for (const auto& [c, by_date] : result.delta.deltas) {
      result.total_variation_by_crop[c] = total_variation(by_date);
    }
    study.results.push_back(std::move(result));
  }
  return study;
}

} // namespace cropattn

#include "cropattn/explain.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

#include "cropattn/errors.hpp"
#include "cropattn/preprocess.hpp"

namespace cropattn {

ImportanceTable parcel_date_importance(const AttentionRecord& record) {
  const int t = record.valid_length;
  if (t < 1) throw EmptyRecord("parcel '" + record.parcel_id + "' has no valid slots");
  if (record.attention.empty() || record.attention.front().empty()) {
    throw EmptyRecord("parcel '" + record.parcel_id + "' carries no attention");
  }
  if (static_cast<int>(record.dates.size()) != t) {
    throw ShapeMismatch("attention record of '" + record.parcel_id +
                        "' has " + std::to_string(record.dates.size()) +
                        " dates for " + std::to_string(t) + " valid slots");
  }

  // Elementwise mean over layers and heads first, then column means over the
  // valid rows.
  Matrix mean;
  int count = 0;
  for (const auto& layer : record.attention) {
    for (const Matrix& a : layer) {
      if (count == 0) {
        mean = a;
      } else {
        mean += a;
      }
      ++count;
    }
  }
  mean /= static_cast<double>(count);

  ImportanceTable table;
  table.scope = ImportanceScope::parcel;
  table.parcel_id = record.parcel_id;
  for (int d = 0; d < t; ++d) {
    double sum = 0.0;
    for (int i = 0; i < t; ++i) sum += mean(i, d);
    table.values[record.dates[static_cast<size_t>(d)]] = sum / t;
    table.support[record.dates[static_cast<size_t>(d)]] = 1;
  }
  return table;
}

std::vector<ImportanceTable> parcel_importances(const Checkpoint& ckpt,
                                                const Dataset& dataset,
                                                const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw EmptyInput("no parcels to summarize");
  std::vector<ImportanceTable> tables;
  tables.reserve(indices.size());
  for (const auto& chunk : make_minibatches(indices, 64)) {
    int t = 1;
    for (std::size_t idx : chunk) t = std::max(t, dataset.parcels.at(idx).length());
    const PaddedBatch batch = make_batch(dataset, chunk, t);
    const ForwardOutput out = forward(batch, ckpt.params, /*capture_attention=*/true);
    for (size_t i = 0; i < out.records.size(); ++i) {
      ImportanceTable table = parcel_date_importance(out.records[i]);
      table.crop = dataset.parcels.at(chunk[i]).crop;
      tables.push_back(std::move(table));
    }
  }
  return tables;
}

namespace {

ImportanceTable mean_of_tables(const std::vector<const ImportanceTable*>& tables,
                               MissingDateMode mode) {
  ImportanceTable out;
  std::map<Date, double> sums;
  std::map<Date, int> counts;
  for (const ImportanceTable* t : tables) {
    for (const auto& [date, value] : t->values) {
      sums[date] += value;
      counts[date] += 1;
    }
  }
  const double n = static_cast<double>(tables.size());
  for (const auto& [date, sum] : sums) {
    const int support = counts.at(date);
    out.values[date] =
        mode == MissingDateMode::support_based ? sum / support : sum / n;
    out.support[date] = support;
  }
  return out;
}

} // namespace

ImportanceTable crop_date_importance(const std::vector<ImportanceTable>& parcel_tables,
                                     const std::string& crop, MissingDateMode mode) {
  std::vector<const ImportanceTable*> of_crop;
  for (const auto& t : parcel_tables) {
    if (t.crop == crop) of_crop.push_back(&t);
  }
  if (of_crop.empty()) throw NoParcelsForCrop("no parcel tables for crop '" + crop + "'");
  ImportanceTable out = mean_of_tables(of_crop, mode);
  out.scope = ImportanceScope::crop;
  out.crop = crop;
  return out;
}

ImportanceTable global_date_importance(const std::vector<ImportanceTable>& parcel_tables,
                                       MissingDateMode mode) {
  if (parcel_tables.empty()) throw EmptyInput("no parcel tables to aggregate");
  std::vector<const ImportanceTable*> all;
  all.reserve(parcel_tables.size());
  for (const auto& t : parcel_tables) all.push_back(&t);
  ImportanceTable out = mean_of_tables(all, mode);
  out.scope = ImportanceScope::global;
  return out;
}

KeyDateRanking rank_key_dates(const ImportanceTable& global_table, int top_t) {
  if (top_t < 1) throw InvalidConfig("top_t must be >= 1");
  if (static_cast<size_t>(top_t) > global_table.values.size()) {
    throw TopTooLarge("top_t " + std::to_string(top_t) + " exceeds the " +
                      std::to_string(global_table.values.size()) + " known dates");
  }
  KeyDateRanking ranking;
  ranking.entries.assign(global_table.values.begin(), global_table.values.end());
  std::stable_sort(ranking.entries.begin(), ranking.entries.end(),
                   [](const auto& a, const auto& b) {
                     if (a.second != b.second) return a.second > b.second;
                     return a.first < b.first; // earlier date wins ties
                   });
  ranking.entries.resize(static_cast<size_t>(top_t));
  return ranking;
}

KeyDateDataset build_keydate_dataset(const Dataset& dataset,
                                     const KeyDateRanking& ranking, int top_t) {
  if (top_t < 1) throw InvalidConfig("top_t must be >= 1");
  if (static_cast<size_t>(top_t) > ranking.entries.size()) {
    throw TopTooLarge("top_t " + std::to_string(top_t) + " exceeds the ranking of " +
                      std::to_string(ranking.entries.size()) + " dates");
  }
  std::set<Date> keep;
  for (int i = 0; i < top_t; ++i) {
    const Date& d = ranking.entries[static_cast<size_t>(i)].first;
    if (!std::binary_search(dataset.date_axis.begin(), dataset.date_axis.end(), d)) {
      throw DateAbsent("ranked date " + to_iso_string(d) +
                       " is not on the dataset's date axis");
    }
    keep.insert(d);
  }

  KeyDateDataset out;
  out.dataset.class_vocabulary = dataset.class_vocabulary;
  std::vector<std::size_t> new_index(dataset.parcels.size(),
                                     static_cast<std::size_t>(-1));
  for (size_t i = 0; i < dataset.parcels.size(); ++i) {
    const ParcelSeries& p = dataset.parcels[i];
    ParcelSeries kept;
    kept.parcel_id = p.parcel_id;
    kept.crop = p.crop;
    for (const Observation& obs : p.observations) {
      if (keep.count(obs.date)) kept.observations.push_back(obs);
    }
    if (kept.observations.empty()) {
      ++out.dropped_parcels;
    } else {
      new_index[i] = out.dataset.parcels.size();
      out.dataset.parcels.push_back(std::move(kept));
    }
  }
  if (out.dataset.parcels.empty()) {
    throw EmptyResult("every parcel lost all observations at the kept dates");
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
  out.dataset.splits.train = remap(dataset.splits.train);
  out.dataset.splits.validation = remap(dataset.splits.validation);
  out.dataset.splits.test = remap(dataset.splits.test);
  out.dataset.date_axis = collect_date_axis(out.dataset.parcels);
  return out;
}

AblationCurve ablation_study(const Dataset& dataset, const ModelConfig& model_config,
                             const TrainConfig& train_config,
                             const std::vector<int>& t_values) {
  if (t_values.empty()) throw EmptyInput("no t values requested");
  std::vector<int> ts = t_values;
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());

  AblationCurve curve;
  const TrainResult reference = train(dataset, model_config, train_config);
  curve.reference = evaluate(reference.checkpoint, dataset, dataset.splits.test);

  const std::vector<ImportanceTable> tables =
      parcel_importances(reference.checkpoint, dataset, dataset.splits.test);
  const ImportanceTable global = global_date_importance(tables);
  curve.ranking = rank_key_dates(global, static_cast<int>(global.values.size()));

  for (int t : ts) {
    const KeyDateDataset rebuilt = build_keydate_dataset(dataset, curve.ranking, t);
    const TrainResult run = train(rebuilt.dataset, model_config, train_config);
    AblationPoint point;
    point.t = t;
    point.dropped_parcels = rebuilt.dropped_parcels;
    point.metrics = evaluate(run.checkpoint, rebuilt.dataset, rebuilt.dataset.splits.test);
    curve.points.push_back(std::move(point));
  }
  return curve;
}

NdviSummary ndvi_attention_summary(const Dataset& dataset,
                                   const std::vector<ImportanceTable>& crop_tables,
                                   const Date& date, const NdviBands& bands) {
  if (!std::binary_search(dataset.date_axis.begin(), dataset.date_axis.end(), date)) {
    throw DateAbsent("date " + to_iso_string(date) + " is not on the date axis");
  }

  std::unordered_map<std::string, const ImportanceTable*> table_of;
  for (const auto& t : crop_tables) table_of.emplace(t.crop, &t);

  NdviSummary out;
  out.date = date;
  for (const std::string& crop : dataset.class_vocabulary) {
    std::vector<double> ndvis;
    for (const ParcelSeries& p : dataset.parcels) {
      if (p.crop != crop) continue;
      for (const Observation& obs : p.observations) {
        if (obs.date == date) {
          ndvis.push_back(ndvi(obs.bands[static_cast<size_t>(bands.nir_index)],
                               obs.bands[static_cast<size_t>(bands.red_index)]));
          break;
        }
      }
    }
    if (ndvis.empty()) {
      out.omitted_crops.push_back(crop);
      continue;
    }
    NdviSummaryRow row;
    row.crop = crop;
    row.support = static_cast<int>(ndvis.size());
    double mean = 0.0;
    for (double v : ndvis) mean += v;
    mean /= static_cast<double>(ndvis.size());
    double var = 0.0;
    for (double v : ndvis) var += (v - mean) * (v - mean);
    var /= static_cast<double>(ndvis.size());
    row.mean_ndvi = mean;
    row.std_ndvi = std::sqrt(var);
    auto it = table_of.find(crop);
    if (it != table_of.end()) {
      auto vit = it->second->values.find(date);
      if (vit != it->second->values.end()) row.importance = vit->second;
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

std::vector<std::pair<Date, double>> ndvi_over_time(const Dataset& dataset,
                                                    const std::string& crop,
                                                    const NdviBands& bands) {
  std::map<Date, std::pair<double, int>> acc;
  bool seen = false;
  for (const ParcelSeries& p : dataset.parcels) {
    if (p.crop != crop) continue;
    seen = true;
    for (const Observation& obs : p.observations) {
      auto& [sum, count] = acc[obs.date];
      sum += ndvi(obs.bands[static_cast<size_t>(bands.nir_index)],
                  obs.bands[static_cast<size_t>(bands.red_index)]);
      count += 1;
    }
  }
  if (!seen) throw NoParcelsForCrop("no parcels labeled '" + crop + "'");

  std::vector<std::pair<Date, double>> out;
  out.reserve(acc.size());
  for (const auto& [date, sc] : acc) out.emplace_back(date, sc.first / sc.second);
  return out;
}

std::vector<std::pair<std::string, double>> top_attended_parcels(
    const std::vector<ImportanceTable>& parcel_tables, const Date& date, int k) {
  if (k < 1) throw InvalidConfig("k must be >= 1");
  std::vector<std::pair<std::string, double>> hits;
  for (const auto& t : parcel_tables) {
    auto it = t.values.find(date);
    if (it != t.values.end()) hits.emplace_back(t.parcel_id, it->second);
  }
  if (hits.empty()) {
    throw DateAbsent("no parcel observed " + to_iso_string(date));
  }
  std::stable_sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (static_cast<size_t>(k) < hits.size()) hits.resize(static_cast<size_t>(k));
  return hits;
}

} // namespace cropattn

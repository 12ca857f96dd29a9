#ifndef CROPATTN_EXPLAIN_HPP
#define CROPATTN_EXPLAIN_HPP

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cropattn/checkpoint.hpp"
#include "cropattn/metrics.hpp"
#include "cropattn/model.hpp"
#include "cropattn/ndvi.hpp"
#include "cropattn/training.hpp"
#include "cropattn/types.hpp"

namespace cropattn {

enum class ImportanceScope { parcel, crop, global };

/// How crop/global means treat parcels that never observed a date: skip them
/// (support-based, the default) or count them as zero importance.
enum class MissingDateMode { support_based, zero_fill };

struct ImportanceTable {
  ImportanceScope scope = ImportanceScope::parcel;
  std::string parcel_id; // parcel scope only
  std::string crop;      // parcel and crop scopes
  std::map<Date, double> values;
  std::map<Date, int> support; // contributing parcels per date
};

/// Date importance of one parcel: column means of its attention matrix over
/// valid rows (layers/heads averaged elementwise first). The values form a
/// probability distribution over the parcel's valid dates.
ImportanceTable parcel_date_importance(const AttentionRecord& record);

/// Parcel tables for the given parcels under a trained model, crop labels
/// attached from the dataset.
std::vector<ImportanceTable> parcel_importances(const Checkpoint& ckpt,
                                                const Dataset& dataset,
                                                const std::vector<std::size_t>& indices);

/// Per-date mean of parcel importances over the parcels of one crop.
ImportanceTable crop_date_importance(const std::vector<ImportanceTable>& parcel_tables,
                                     const std::string& crop,
                                     MissingDateMode mode = MissingDateMode::support_based);

/// Per-date mean of parcel importances over all parcels.
ImportanceTable global_date_importance(const std::vector<ImportanceTable>& parcel_tables,
                                       MissingDateMode mode = MissingDateMode::support_based);

struct KeyDateRanking {
  std::vector<std::pair<Date, double>> entries; // importance descending
  std::string tie_break = "earlier-date";
};

/// Top dates by global importance, ties to the earlier calendar date.
KeyDateRanking rank_key_dates(const ImportanceTable& global_table, int top_t);

struct KeyDateDataset {
  Dataset dataset;
  int dropped_parcels = 0; // parcels left with zero observations
};

/// Keep only observations at the top_t ranked dates; drop emptied parcels and
/// remap the splits onto the survivors.
KeyDateDataset build_keydate_dataset(const Dataset& dataset,
                                     const KeyDateRanking& ranking, int top_t);

struct AblationPoint {
  int t = 0;
  int dropped_parcels = 0;
  Metrics metrics;
};

struct AblationCurve {
  Metrics reference;                 // full-data model on the test split
  KeyDateRanking ranking;            // from the reference model
  std::vector<AblationPoint> points; // ascending t, deduplicated
};

/// Train a reference model, rank dates by its global test-split importance,
/// then retrain from scratch on each top-t dataset with the identical seed.
AblationCurve ablation_study(const Dataset& dataset, const ModelConfig& model_config,
                             const TrainConfig& train_config,
                             const std::vector<int>& t_values);

struct NdviSummaryRow {
  std::string crop;
  double mean_ndvi = 0.0;
  double std_ndvi = 0.0; // population standard deviation
  double importance = 0.0;
  int support = 0;
};

struct NdviSummary {
  Date date;
  std::vector<NdviSummaryRow> rows;        // crops observing the date
  std::vector<std::string> omitted_crops;  // crops with no observation there
};

/// Per-crop NDVI statistics at one date, paired with the crop's attention
/// importance at that date.
NdviSummary ndvi_attention_summary(const Dataset& dataset,
                                   const std::vector<ImportanceTable>& crop_tables,
                                   const Date& date, const NdviBands& bands = {});

/// Mean NDVI per date over one crop's parcels.
std::vector<std::pair<Date, double>> ndvi_over_time(const Dataset& dataset,
                                                    const std::string& crop,
                                                    const NdviBands& bands = {});

/// The k parcels with the highest importance at a date, descending; ties by
/// parcel id. k larger than the population returns everyone.
std::vector<std::pair<std::string, double>> top_attended_parcels(
    const std::vector<ImportanceTable>& parcel_tables, const Date& date, int k);

} // namespace cropattn

#endif // CROPATTN_EXPLAIN_HPP

#ifndef CROPATTN_CSV_HPP
#define CROPATTN_CSV_HPP

#include <string>
#include <vector>

#include "cropattn/types.hpp"

namespace cropattn {

/// Column mapping for the input CSV. Every named column must exist in the
/// header; extra columns are ignored.
struct CsvSchema {
  std::string parcel_id_column = "parcel_id";
  std::string date_column = "date";
  std::vector<std::string> band_columns = {"b1", "b2", "b3",  "b4",  "b5",
                                           "b6", "b7", "b8",  "b9",  "b10",
                                           "b11", "b12", "b13"};
  std::string crop_column = "crop";
  /// Raw reflectances are divided by this constant (Level-1C files encode
  /// reflectance * 10000 as integers). Use 1.0 for already-normalized data.
  double reflectance_divisor = 10000.0;
};

/// Load a dataset from CSV. Parcels keep file order of first appearance,
/// observations are sorted by acquisition date, the class vocabulary is in
/// first-appearance order. Splits are left empty.
Dataset load_dataset(const std::string& path, const CsvSchema& schema = {});

/// Stratified random split with the given fractions (train + validation +
/// test must be <= 1). Deterministic for a fixed seed.
Splits make_stratified_splits(const Dataset& dataset, double train_frac,
                              double validation_frac, double test_frac,
                              std::uint64_t seed);

/// Explicit split assignment from a key=value file mapping
/// parcel_id = train|validation|test. Unlisted parcels stay unassigned.
Splits load_split_file(const Dataset& dataset, const std::string& path);

/// Canonical on-disk form: a normalized CSV (divisor already applied) plus a
/// JSON sidecar `<stem>.meta.json` carrying vocabulary, splits and date axis.
std::string meta_path_for(const std::string& csv_path);
void save_canonical_dataset(const Dataset& dataset, const std::string& csv_path);
Dataset load_canonical_dataset(const std::string& csv_path);

} // namespace cropattn

#endif // CROPATTN_CSV_HPP

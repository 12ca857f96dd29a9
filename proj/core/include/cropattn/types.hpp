#ifndef CROPATTN_TYPES_HPP
#define CROPATTN_TYPES_HPP

#include <Eigen/Core>
#include <array>
#include <string>
#include <vector>

#include "cropattn/date.hpp"

namespace cropattn {

using Matrix = Eigen::MatrixXd;

constexpr int kNumBands = 13;

/// One satellite acquisition for a parcel: date plus 13 band reflectances.
struct Observation {
  Date date;
  std::array<double, kNumBands> bands{};
};

/// One agricultural parcel: a date-sorted series of observations and a label.
struct ParcelSeries {
  std::string parcel_id;
  std::string crop;
  std::vector<Observation> observations;

  int length() const { return static_cast<int>(observations.size()); }
};

struct Splits {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

struct Dataset {
  std::vector<ParcelSeries> parcels;
  std::vector<std::string> class_vocabulary;
  Splits splits;
  std::vector<Date> date_axis; // sorted union of all acquisition dates

  int class_index(const std::string& crop) const {
    for (std::size_t i = 0; i < class_vocabulary.size(); ++i) {
      if (class_vocabulary[i] == crop) return static_cast<int>(i);
    }
    return -1;
  }

  /// Longest observation series over all parcels.
  int max_series_length() const {
    int t = 0;
    for (const auto& p : parcels) t = std::max(t, p.length());
    return t;
  }
};

/// Rebuild the sorted union of acquisition dates from the parcels.
std::vector<Date> collect_date_axis(const std::vector<ParcelSeries>& parcels);

/// One model-ready parcel: right-padded band matrix plus validity prefix.
struct BatchRow {
  Matrix bands;            // [t_max, 13], rows >= valid_len are all-zero
  int valid_len = 0;       // mask: slot t is valid iff t < valid_len
  std::vector<Date> dates; // size valid_len
  int label = -1;
  std::string parcel_id;
};

struct PaddedBatch {
  int t_max = 0;
  std::vector<BatchRow> rows;

  int size() const { return static_cast<int>(rows.size()); }
};

} // namespace cropattn

#endif // CROPATTN_TYPES_HPP

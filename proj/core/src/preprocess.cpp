#include "cropattn/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "cropattn/errors.hpp"
#include "cropattn/rng.hpp"

namespace cropattn {

BatchRow right_pad(const ParcelSeries& series, int t_max) {
  const int t = series.length();
  if (t > t_max) {
    throw LengthExceeded("series '" + series.parcel_id + "' has " +
                         std::to_string(t) + " observations, t_max is " +
                         std::to_string(t_max));
  }
  BatchRow row;
  row.bands = Matrix::Zero(t_max, kNumBands);
  row.valid_len = t;
  row.parcel_id = series.parcel_id;
  row.dates.reserve(t);
  for (int i = 0; i < t; ++i) {
    const Observation& obs = series.observations[i];
    for (int b = 0; b < kNumBands; ++b) row.bands(i, b) = obs.bands[b];
    row.dates.push_back(obs.date);
  }
  return row;
}

ParcelSeries random_sample(const ParcelSeries& series, int t_fixed,
                           std::uint64_t seed) {
  const int t = series.length();
  if (t_fixed > t) {
    throw TooShort("series '" + series.parcel_id + "' has " + std::to_string(t) +
                   " observations, cannot sample " + std::to_string(t_fixed));
  }
  // Partial Fisher-Yates: the first t_fixed slots end up a uniform draw
  // without replacement.
  std::vector<int> order(t);
  for (int i = 0; i < t; ++i) order[i] = i;
  Rng rng(seed);
  for (int i = 0; i < t_fixed; ++i) {
    const std::size_t j = i + rng.uniform_index(static_cast<std::size_t>(t - i));
    std::swap(order[i], order[j]);
  }
  order.resize(t_fixed);
  std::sort(order.begin(), order.end()); // input is date-sorted already

  ParcelSeries out;
  out.parcel_id = series.parcel_id;
  out.crop = series.crop;
  out.observations.reserve(order.size());
  for (int idx : order) out.observations.push_back(series.observations[idx]);
  return out;
}

ParcelSeries weekly_average(const ParcelSeries& series) {
  if (series.observations.empty()) {
    throw EmptyRecord("cannot weekly-average an empty series");
  }
  ParcelSeries out;
  out.parcel_id = series.parcel_id;
  out.crop = series.crop;

  // Group by ISO week; input is date-sorted, so groups come out in order and
  // the first member of each group carries the representative date.
  std::map<std::pair<int, int>, std::pair<Observation, int>> groups;
  std::vector<std::pair<int, int>> order;
  for (const Observation& obs : series.observations) {
    const IsoWeek w = iso_week(obs.date);
    const auto key = std::make_pair(w.iso_year, w.week);
    auto it = groups.find(key);
    if (it == groups.end()) {
      groups.emplace(key, std::make_pair(obs, 1));
      order.push_back(key);
    } else {
      for (int b = 0; b < kNumBands; ++b) it->second.first.bands[b] += obs.bands[b];
      it->second.second += 1;
    }
  }
  for (const auto& key : order) {
    auto& [obs, count] = groups.at(key);
    for (int b = 0; b < kNumBands; ++b) obs.bands[b] /= count;
    out.observations.push_back(obs);
  }
  return out;
}

std::vector<double> positional_encoding(int position, int dim) {
  if (dim <= 0 || dim % 2 != 0) {
    throw OddDimension("positional encoding dimension must be even and "
                       "positive, got " + std::to_string(dim));
  }
  std::vector<double> enc(dim);
  for (int i = 0; 2 * i < dim; ++i) {
    const double angle =
        position / std::pow(10000.0, (2.0 * i) / static_cast<double>(dim));
    enc[2 * i] = std::sin(angle);
    enc[2 * i + 1] = std::cos(angle);
  }
  return enc;
}

PaddedBatch make_batch(const Dataset& dataset,
                       const std::vector<std::size_t>& indices, int t_max) {
  PaddedBatch batch;
  batch.t_max = t_max;
  batch.rows.reserve(indices.size());
  for (std::size_t idx : indices) {
    const ParcelSeries& p = dataset.parcels.at(idx);
    BatchRow row = right_pad(p, t_max);
    row.label = dataset.class_index(p.crop);
    if (row.label < 0) {
      throw UnknownCrop("crop '" + p.crop + "' is not in the vocabulary");
    }
    batch.rows.push_back(std::move(row));
  }
  return batch;
}

std::vector<std::vector<std::size_t>> make_minibatches(
    const std::vector<std::size_t>& indices, int batch_size) {
  if (batch_size < 1) throw InvalidConfig("batch size must be >= 1");
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < indices.size();
       start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end =
        std::min(indices.size(), start + static_cast<std::size_t>(batch_size));
    out.emplace_back(indices.begin() + start, indices.begin() + end);
  }
  return out;
}

} // namespace cropattn

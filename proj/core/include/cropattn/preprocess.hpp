#ifndef CROPATTN_PREPROCESS_HPP
#define CROPATTN_PREPROCESS_HPP

#include <cstdint>
#include <vector>

#include "cropattn/types.hpp"

namespace cropattn {

/// Right-pad a series to t_max slots: the first length() rows carry the band
/// vectors, the rest are zero. BatchRow.valid_len is the mask.
BatchRow right_pad(const ParcelSeries& series, int t_max);

/// Draw t_fixed observations without replacement and re-sort them by date.
ParcelSeries random_sample(const ParcelSeries& series, int t_fixed,
                           std::uint64_t seed);

/// Collapse each ISO calendar week to one observation: band-wise arithmetic
/// mean, dated by the first observation in that week.
ParcelSeries weekly_average(const ParcelSeries& series);

/// Sinusoidal positional encoding with position = day-of-year:
/// component 2i = sin(pos / 10000^(2i/dim)), 2i+1 = cos(same argument).
std::vector<double> positional_encoding(int position, int dim);

/// Assemble model-ready rows for the given parcel indices. Every series must
/// fit in t_max; labels come from the dataset vocabulary.
PaddedBatch make_batch(const Dataset& dataset,
                       const std::vector<std::size_t>& indices, int t_max);

/// Split indices into minibatches of at most batch_size, preserving order.
std::vector<std::vector<std::size_t>> make_minibatches(
    const std::vector<std::size_t>& indices, int batch_size);

} // namespace cropattn

#endif // CROPATTN_PREPROCESS_HPP

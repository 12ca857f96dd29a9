#ifndef CROPATTN_NDVI_HPP
#define CROPATTN_NDVI_HPP

#include <cmath>

#include "cropattn/errors.hpp"

namespace cropattn {

/// Column positions of the NIR and RED reflectances inside the 13-band
/// vector. The defaults assume the conventional Sentinel-2 band order
/// B1..B8, B8A, B9..B12, so NIR = B8 (index 7) and RED = B4 (index 3).
struct NdviBands {
  int nir_index = 7;
  int red_index = 3;
};

/// Normalized difference vegetation index, (NIR - RED) / (NIR + RED).
/// Throws DegenerateInput for a fully dark pixel (NIR + RED == 0) and for
/// negative or non-finite reflectances.
inline double ndvi(double nir, double red) {
  if (!std::isfinite(nir) || !std::isfinite(red) || nir < 0.0 || red < 0.0) {
    throw DegenerateInput("ndvi requires finite nonnegative reflectances");
  }
  const double sum = nir + red;
  if (sum == 0.0) {
    throw DegenerateInput("ndvi undefined for NIR + RED == 0");
  }
  return (nir - red) / sum;
}

} // namespace cropattn

#endif // CROPATTN_NDVI_HPP

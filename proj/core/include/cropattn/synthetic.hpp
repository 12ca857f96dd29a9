#ifndef CROPATTN_SYNTHETIC_HPP
#define CROPATTN_SYNTHETIC_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "cropattn/kvconfig.hpp"
#include "cropattn/types.hpp"

namespace cropattn {

/// Double-logistic phenology: NDVI rises around green_up, plateaus near peak,
/// falls around senescence, and sits at baseline outside the season.
struct PhenologyParams {
  std::string name;
  double baseline = 0.2;
  double peak = 0.9;
  double green_up = 110.0;   // day-of-year of the rising inflection
  double senescence = 205.0; // day-of-year of the falling inflection
  double slope_up = 0.8;
  double slope_down = 0.8;
  // Per-parcel uniform jitter half-widths (days) on the two inflection dates.
  double green_up_jitter = 0.0;
  double senescence_jitter = 0.0;
};

/// NDVI(t) = baseline + (peak - baseline) *
///           [sigmoid(slope_up * (t - green_up)) - sigmoid(slope_down * (t - senescence))]
double double_logistic(double day, const PhenologyParams& p);

struct SyntheticConfig {
  int year = 2018;
  int start_day = 60;
  int end_day = 300;
  int step_days = 5;
  int parcels_per_class = 20;
  /// Gaussian noise (sd) on the 11 bands that do not encode NDVI.
  double noise_sd = 0.01;
  /// Optional perturbation (sd) of the NDVI value before band inversion.
  double ndvi_noise_sd = 0.0;
  double train_frac = 0.70;
  double validation_frac = 0.15;
  double test_frac = 0.15;
  std::vector<PhenologyParams> classes;

  /// Parse from key=value text: top-level scalars by name, a `classes` list,
  /// and per-class parameters under `class.<name>.<param>`.
  static SyntheticConfig from_config(const KeyValueConfig& cfg);
  void validate() const;
};

/// Generate a labeled dataset whose NDVI follows each class's double-logistic
/// curve exactly when all noise terms are zero: NIR = 0.4 * (1 + v) and
/// RED = 0.4 * (1 - v), so NIR + RED = 0.8 and (NIR - RED) / (NIR + RED) = v.
/// The other bands are 0.3 plus Gaussian noise. Splits are left empty.
Dataset generate_synthetic(const SyntheticConfig& config, std::uint64_t seed);

} // namespace cropattn

#endif // CROPATTN_SYNTHETIC_HPP

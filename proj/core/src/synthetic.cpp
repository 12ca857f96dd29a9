#include "cropattn/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "cropattn/csv.hpp"
#include "cropattn/date.hpp"
#include "cropattn/errors.hpp"
#include "cropattn/ndvi.hpp"
#include "cropattn/rng.hpp"

namespace cropattn {

namespace {
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
} // namespace

double double_logistic(double day, const PhenologyParams& p) {
  return p.baseline + (p.peak - p.baseline) *
                          (sigmoid(p.slope_up * (day - p.green_up)) -
                           sigmoid(p.slope_down * (day - p.senescence)));
}

SyntheticConfig SyntheticConfig::from_config(const KeyValueConfig& cfg) {
  SyntheticConfig out;
  out.year = cfg.get_int_or("year", out.year);
  out.start_day = cfg.get_int_or("start_day", out.start_day);
  out.end_day = cfg.get_int_or("end_day", out.end_day);
  out.step_days = cfg.get_int_or("step_days", out.step_days);
  out.parcels_per_class = cfg.get_int_or("parcels_per_class", out.parcels_per_class);
  out.noise_sd = cfg.get_double_or("noise_sd", out.noise_sd);
  out.ndvi_noise_sd = cfg.get_double_or("ndvi_noise_sd", out.ndvi_noise_sd);
  out.train_frac = cfg.get_double_or("train_frac", out.train_frac);
  out.validation_frac = cfg.get_double_or("validation_frac", out.validation_frac);
  out.test_frac = cfg.get_double_or("test_frac", out.test_frac);

  if (!cfg.has("classes")) throw InvalidConfig("synthetic config needs a 'classes' list");
  for (const std::string& name : cfg.get_list("classes")) {
    PhenologyParams p;
    p.name = name;
    const std::string prefix = "class." + name + ".";
    p.baseline = cfg.get_double_or(prefix + "baseline", p.baseline);
    p.peak = cfg.get_double_or(prefix + "peak", p.peak);
    p.green_up = cfg.get_double_or(prefix + "green_up", p.green_up);
    p.senescence = cfg.get_double_or(prefix + "senescence", p.senescence);
    p.slope_up = cfg.get_double_or(prefix + "slope_up", p.slope_up);
    p.slope_down = cfg.get_double_or(prefix + "slope_down", p.slope_down);
    p.green_up_jitter = cfg.get_double_or(prefix + "green_up_jitter", p.green_up_jitter);
    p.senescence_jitter = cfg.get_double_or(prefix + "senescence_jitter", p.senescence_jitter);
    out.classes.push_back(std::move(p));
  }
  out.validate();
  return out;
}

void SyntheticConfig::validate() const {
  if (classes.empty()) throw InvalidConfig("no classes configured");
  std::set<std::string> names;
  for (const auto& p : classes) {
    if (p.name.empty()) throw InvalidConfig("class with empty name");
    if (!names.insert(p.name).second) {
      throw InvalidConfig("duplicate class name '" + p.name + "'");
    }
    if (!(p.slope_up > 0.0) || !(p.slope_down > 0.0)) {
      throw InvalidConfig("class '" + p.name + "': slopes must be positive");
    }
    if (!(p.peak >= p.baseline)) {
      throw InvalidConfig("class '" + p.name + "': peak below baseline");
    }
    if (p.green_up_jitter < 0.0 || p.senescence_jitter < 0.0) {
      throw InvalidConfig("class '" + p.name + "': jitter must be nonnegative");
    }
  }
  if (parcels_per_class < 1) throw InvalidConfig("parcels_per_class must be >= 1");
  if (step_days < 1) throw InvalidConfig("step_days must be >= 1");
  if (start_day < 1 || end_day < start_day || end_day > days_in_year(year)) {
    throw InvalidConfig("invalid acquisition schedule");
  }
  if (noise_sd < 0.0 || ndvi_noise_sd < 0.0) {
    throw InvalidConfig("noise levels must be nonnegative");
  }
  for (double f : {train_frac, validation_frac, test_frac}) {
    if (f < 0.0 || f > 1.0) throw InvalidConfig("split fractions must be in [0, 1]");
  }
  if (train_frac + validation_frac + test_frac > 1.0 + 1e-9) {
    throw InvalidConfig("split fractions sum to more than 1");
  }
}

Dataset generate_synthetic(const SyntheticConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  const NdviBands bands_of_interest;

  std::vector<int> schedule;
  for (int d = config.start_day; d <= config.end_day; d += config.step_days) {
    schedule.push_back(d);
  }

  Dataset ds;
  for (const auto& cls : config.classes) ds.class_vocabulary.push_back(cls.name);

  for (const auto& cls : config.classes) {
    for (int i = 0; i < config.parcels_per_class; ++i) {
      PhenologyParams p = cls;
      if (cls.green_up_jitter > 0.0) {
        p.green_up += rng.uniform(-cls.green_up_jitter, cls.green_up_jitter);
      }
      if (cls.senescence_jitter > 0.0) {
        p.senescence += rng.uniform(-cls.senescence_jitter, cls.senescence_jitter);
      }

      ParcelSeries series;
      char id[64];
      std::snprintf(id, sizeof(id), "%s_%03d", cls.name.c_str(), i);
      series.parcel_id = id;
      series.crop = cls.name;
      series.observations.reserve(schedule.size());
      for (int doy : schedule) {
        double v = double_logistic(static_cast<double>(doy), p);
        if (config.ndvi_noise_sd > 0.0) {
          v += rng.normal(0.0, config.ndvi_noise_sd);
          v = std::clamp(v, -0.99, 0.99);
        }
        Observation obs;
        obs.date = Date{config.year, doy};
        for (int b = 0; b < kNumBands; ++b) {
          if (b == bands_of_interest.nir_index) {
            obs.bands[b] = 0.4 * (1.0 + v);
          } else if (b == bands_of_interest.red_index) {
            obs.bands[b] = 0.4 * (1.0 - v);
          } else if (config.noise_sd > 0.0) {
            obs.bands[b] = 0.3 + rng.normal(0.0, config.noise_sd);
          } else {
            obs.bands[b] = 0.3;
          }
        }
        series.observations.push_back(obs);
      }
      ds.parcels.push_back(std::move(series));
    }
  }
  ds.date_axis = collect_date_axis(ds.parcels);
  return ds;
}

} // namespace cropattn

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cropattn/csv.hpp"
#include "cropattn/errors.hpp"
#include "cropattn/sensitivity.hpp"
#include "cropattn/synthetic.hpp"
#include "oracles.hpp"

using namespace cropattn;

namespace {

const Date kD1{2018, 100};
const Date kD2{2018, 110};

Dataset three_crop_dataset() {
  Dataset ds;
  auto add = [&](const std::string& id, const std::string& crop,
                 std::initializer_list<int> doys) {
    ParcelSeries p;
    p.parcel_id = id;
    p.crop = crop;
    for (int doy : doys)
      p.observations.push_back(oracles::obs(2018, doy, oracles::ndvi_bands(0.5)));
    ds.parcels.push_back(p);
  };
  add("a1", "crop_a", {100, 110});
  add("b1", "crop_b", {100, 110});
  add("a2", "crop_a", {100});
  add("c1", "crop_c", {100, 110});
  add("b2", "crop_b", {110});
  ds.class_vocabulary = {"crop_a", "crop_b", "crop_c"};
  ds.splits.train = {0, 1, 3};
  ds.splits.validation = {2};
  ds.splits.test = {4};
  ds.date_axis = collect_date_axis(ds.parcels);
  return ds;
}

ImportanceTable table_of(const std::string& id, const std::string& crop,
                         std::vector<std::pair<Date, double>> values) {
  ImportanceTable t;
  t.scope = ImportanceScope::parcel;
  t.parcel_id = id;
  t.crop = crop;
  for (const auto& [d, v] : values) {
    t.values[d] = v;
    t.support[d] = 1;
  }
  return t;
}

// Fast, separable three-class setup for end-to-end occlusion runs.
struct TinySetup {
  Dataset dataset;
  ModelConfig model;
  TrainConfig train;
};

TinySetup tiny_three_class(std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.year = 2018;
  cfg.start_day = 100;
  cfg.end_day = 260;
  cfg.step_days = 20;
  cfg.parcels_per_class = 6;
  cfg.noise_sd = 0.005;
  PhenologyParams a, b, c;
  a.name = "crop_a";
  a.green_up = 110;
  a.senescence = 180;
  b.name = "crop_b";
  b.green_up = 150;
  b.senescence = 180;
  c.name = "crop_c";
  c.green_up = 110;
  c.senescence = 250;
  cfg.classes = {a, b, c};

  TinySetup s;
  s.dataset = generate_synthetic(cfg, seed);
  s.dataset.splits = make_stratified_splits(s.dataset, 0.5, 0.25, 0.25, seed);
  s.model.num_layers = 1;
  s.model.num_heads = 1;
  s.model.model_dim = 8;
  s.model.feed_forward_dim = 16;
  s.train.batch_size = 8;
  s.train.max_epochs = 8;
  s.train.early_stop_check_every = 4;
  s.train.warmup_steps = 10;
  s.train.base_learning_rate = 0.3;
  s.train.seed = seed;
  return s;
}

} // namespace

// ---------------------------------------------------------------------------
// occlude_crop
// ---------------------------------------------------------------------------

TEST_CASE("occlude_crop: removes one crop and remaps everything") {
  Dataset ds = three_crop_dataset();
  Dataset before = ds; // for the purity check
  Dataset out = occlude_crop(ds, "crop_b");

  REQUIRE(out.parcels.size() == 3);
  CHECK(out.parcels[0].parcel_id == "a1");
  CHECK(out.parcels[1].parcel_id == "a2");
  CHECK(out.parcels[2].parcel_id == "c1");
  CHECK(out.class_vocabulary == std::vector<std::string>{"crop_a", "crop_c"});

  // Splits remap: old train {a1, b1, c1} -> {a1, c1} = new indices {0, 2};
  // validation {a2} -> {1}; test {b2} -> empty.
  CHECK(out.splits.train == std::vector<std::size_t>{0, 2});
  CHECK(out.splits.validation == std::vector<std::size_t>{1});
  CHECK(out.splits.test.empty());

  // Observations pass through untouched.
  CHECK(out.parcels[0].observations.size() == 2);
  CHECK(out.parcels[0].observations[0].bands == ds.parcels[0].observations[0].bands);

  // The input dataset is never mutated.
  CHECK(ds.parcels.size() == before.parcels.size());
  CHECK(ds.class_vocabulary == before.class_vocabulary);
  CHECK(ds.splits.train == before.splits.train);

  // Date axis rebuilt from the survivors.
  CHECK(out.date_axis == collect_date_axis(out.parcels));
}

TEST_CASE("occlude_crop: guards") {
  Dataset ds = three_crop_dataset();
  CHECK_THROWS_AS(occlude_crop(ds, "rice"), UnknownCrop);

  Dataset two = occlude_crop(ds, "crop_b");
  CHECK_THROWS_AS(occlude_crop(two, "crop_a"), TooFewClasses);
}

// ---------------------------------------------------------------------------
// occlusion_delta
// ---------------------------------------------------------------------------

TEST_CASE("occlusion_delta: identical tables give exactly zero") {
  std::vector<ImportanceTable> tables{
      table_of("p1", "wheat", {{kD1, 0.3}, {kD2, 0.7}}),
      table_of("p2", "maize", {{kD1, 0.6}, {kD2, 0.4}})};
  OcclusionDelta delta = occlusion_delta(tables, tables, {"wheat", "maize"});
  for (const auto& [crop, by_date] : delta.deltas) {
    for (const auto& [date, v] : by_date) CHECK(v == 0.0);
  }
  REQUIRE(delta.deltas.count("wheat") == 1);
  REQUIRE(delta.deltas.count("maize") == 1);
}

TEST_CASE("occlusion_delta: hand-computed support-based means") {
  std::vector<ImportanceTable> before{
      table_of("p1", "wheat", {{kD1, 0.3}, {kD2, 0.7}}),
      table_of("p2", "wheat", {{kD1, 0.5}, {kD2, 0.5}})};
  std::vector<ImportanceTable> after{
      table_of("p1", "wheat", {{kD1, 0.4}, {kD2, 0.6}}),
      table_of("p2", "wheat", {{kD1, 0.6}, {kD2, 0.4}})};

  OcclusionDelta delta = occlusion_delta(before, after, {"wheat"});
  CHECK(delta.deltas.at("wheat").at(kD1) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(delta.deltas.at("wheat").at(kD2) == doctest::Approx(-0.1).epsilon(1e-12));
  CHECK(delta.supports.at("wheat").at(kD1) == 2);

  // Differences of two distributions over fully supported dates sum to zero.
  double sum = 0.0;
  for (const auto& [date, v] : delta.deltas.at("wheat")) sum += v;
  CHECK(sum == doctest::Approx(0.0).epsilon(1e-12));

  // The crops argument filters the output.
  OcclusionDelta none = occlusion_delta(before, after, {});
  CHECK(none.deltas.empty());
}

TEST_CASE("occlusion_delta: partial support") {
  // p2 misses kD2 on both sides; only p1 contributes there.
  std::vector<ImportanceTable> before{
      table_of("p1", "wheat", {{kD1, 0.3}, {kD2, 0.7}}),
      table_of("p2", "wheat", {{kD1, 1.0}})};
  std::vector<ImportanceTable> after{
      table_of("p1", "wheat", {{kD1, 0.5}, {kD2, 0.5}}),
      table_of("p2", "wheat", {{kD1, 1.0}})};

  OcclusionDelta delta = occlusion_delta(before, after, {"wheat"});
  CHECK(delta.deltas.at("wheat").at(kD2) == doctest::Approx(-0.2).epsilon(1e-12));
  CHECK(delta.supports.at("wheat").at(kD2) == 1);
  CHECK(delta.deltas.at("wheat").at(kD1) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(delta.supports.at("wheat").at(kD1) == 2);
}

TEST_CASE("occlusion_delta: parcel mismatches are rejected") {
  std::vector<ImportanceTable> before{
      table_of("p1", "wheat", {{kD1, 1.0}}),
      table_of("p2", "wheat", {{kD1, 1.0}})};
  std::vector<ImportanceTable> missing{table_of("p1", "wheat", {{kD1, 1.0}})};
  CHECK_THROWS_AS(occlusion_delta(before, missing, {"wheat"}), ParcelMismatch);

  std::vector<ImportanceTable> renamed{
      table_of("p1", "wheat", {{kD1, 1.0}}),
      table_of("p9", "wheat", {{kD1, 1.0}})};
  CHECK_THROWS_AS(occlusion_delta(before, renamed, {"wheat"}), ParcelMismatch);

  std::vector<ImportanceTable> other_dates{
      table_of("p1", "wheat", {{kD2, 1.0}}),
      table_of("p2", "wheat", {{kD1, 1.0}})};
  CHECK_THROWS_AS(occlusion_delta(before, other_dates, {"wheat"}), ParcelMismatch);
}

// ---------------------------------------------------------------------------
// total_variation and accuracy_change
// ---------------------------------------------------------------------------

TEST_CASE("total_variation: hand values") {
  std::map<Date, double> deltas{{kD1, 0.1}, {kD2, -0.1}};
  CHECK(total_variation(deltas) == doctest::Approx(0.1).epsilon(1e-12));

  std::map<Date, double> zero{{kD1, 0.0}, {kD2, 0.0}};
  CHECK(total_variation(zero) == 0.0);

  std::map<Date, double> mixed{{kD1, 0.25}, {kD2, -0.15}};
  CHECK(total_variation(mixed) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(total_variation({}) == 0.0);
}

TEST_CASE("accuracy_change: per-crop recall over shared classes") {
  Matrix before_conf(3, 3);
  before_conf << 8, 2, 0, 1, 9, 0, 0, 0, 10; // recalls 0.8, 0.9, 1.0
  Metrics before = metrics_from_confusion(before_conf);

  Matrix after_conf(2, 2);
  after_conf << 9, 1, 2, 8; // recalls 0.9, 0.8
  Metrics after = metrics_from_confusion(after_conf);

  AccuracyChange ch = accuracy_change(before, {"a", "b", "c"}, after, {"a", "b"});
  REQUIRE(ch.by_crop.size() == 2);
  CHECK(ch.by_crop.at("a") == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(ch.by_crop.at("b") == doctest::Approx(-0.1).epsilon(1e-12));
  CHECK(ch.by_crop.count("c") == 0);
}

// ---------------------------------------------------------------------------
// occlusion_study
// ---------------------------------------------------------------------------

TEST_CASE("occlusion_study: the reserved name none is the identity run") {
  TinySetup s = tiny_three_class(21);
  OcclusionStudy study =
      occlusion_study(s.dataset, s.model, s.train, {"none"});

  REQUIRE(study.results.size() == 1);
  const OcclusionResult& r = study.results[0];
  CHECK(r.occluded_crop == "none");

  // Identical seed and data: every delta is exactly zero.
  bool all_zero = true;
  int dates_seen = 0;
  for (const auto& [crop, by_date] : r.delta.deltas) {
    for (const auto& [date, v] : by_date) {
      if (v != 0.0) all_zero = false;
      ++dates_seen;
    }
  }
  CHECK(all_zero);
  CHECK(dates_seen > 0);

  for (const auto& [crop, tv] : r.total_variation_by_crop)
    CHECK(tv == 0.0);
  for (const auto& [crop, dv] : r.accuracy.by_crop)
    CHECK(dv == 0.0);
  CHECK(r.metrics.overall_accuracy ==
        doctest::Approx(study.reference_metrics.overall_accuracy));
}

TEST_CASE("occlusion_study: removing a crop keeps the bookkeeping consistent") {
  TinySetup s = tiny_three_class(22);
  OcclusionStudy study =
      occlusion_study(s.dataset, s.model, s.train, {"crop_b"});

  REQUIRE(study.results.size() == 1);
  const OcclusionResult& r = study.results[0];
  CHECK(r.occluded_crop == "crop_b");

  // Deltas exist only for the crops both models share.
  CHECK(r.delta.deltas.count("crop_a") == 1);
  CHECK(r.delta.deltas.count("crop_c") == 1);
  CHECK(r.delta.deltas.count("crop_b") == 0);

  // Synthetic parcels observe every date, so per-crop deltas sum to zero.
  for (const auto& [crop, by_date] : r.delta.deltas) {
    double sum = 0.0;
    for (const auto& [date, v] : by_date) sum += v;
    CHECK(sum == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(by_date.size() == 9); // all scheduled dates
  }

  // Total variation agrees with its own deltas.
  for (const auto& [crop, tv] : r.total_variation_by_crop) {
    CHECK(tv == doctest::Approx(total_variation(r.delta.deltas.at(crop))));
    CHECK(tv >= 0.0);
  }

  CHECK(r.accuracy.by_crop.count("crop_a") == 1);
  CHECK(r.accuracy.by_crop.count("crop_b") == 0);
  CHECK(std::isfinite(r.metrics.overall_accuracy));
}

TEST_CASE("occlusion_study: occluding within a two-class set is refused") {
  SyntheticConfig cfg;
  cfg.start_day = 100;
  cfg.end_day = 200;
  cfg.step_days = 20;
  cfg.parcels_per_class = 6;
  PhenologyParams a, b;
  a.name = "one";
  a.senescence = 160;
  b.name = "two";
  b.senescence = 240;
  cfg.classes = {a, b};
  Dataset ds = generate_synthetic(cfg, 5);
  ds.splits = make_stratified_splits(ds, 0.5, 0.25, 0.25, 5);

  TinySetup s = tiny_three_class(5); // reuse configs only
  CHECK_THROWS_AS(occlusion_study(ds, s.model, s.train, {"one"}), TooFewClasses);

  // The self-consistency run removes nothing, so it still works.
  OcclusionStudy study = occlusion_study(ds, s.model, s.train, {"none"});
  CHECK(study.results.size() == 1);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "cropattn/csv.hpp"
#include "cropattn/errors.hpp"
#include "cropattn/explain.hpp"
#include "cropattn/pca.hpp"
#include "cropattn/synthetic.hpp"
#include "cropattn/training.hpp"
#include "oracles.hpp"

using namespace cropattn;

namespace {

AttentionRecord record_from(const std::string& id,
                            const std::vector<Matrix>& layer_head_mats,
                            int valid, std::vector<Date> dates) {
  AttentionRecord r;
  r.parcel_id = id;
  r.valid_length = valid;
  r.dates = std::move(dates);
  for (const Matrix& m : layer_head_mats) r.attention.push_back({m});
  return r;
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

const Date kD1{2018, 100};
const Date kD2{2018, 110};
const Date kD3{2018, 120};

Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

// Small separable two-class dataset and fast training configs.
struct TinySetup {
  Dataset dataset;
  ModelConfig model;
  TrainConfig train;
};

TinySetup tiny_setup(std::uint64_t seed, double jitter = 0.0,
                     double noise = 0.005) {
  SyntheticConfig cfg;
  cfg.year = 2018;
  cfg.start_day = 100;
  cfg.end_day = 260;
  cfg.step_days = 20; // 9 dates
  cfg.parcels_per_class = 6;
  cfg.noise_sd = noise;
  PhenologyParams early, late;
  early.name = "early";
  early.green_up = 120;
  early.senescence = 160;
  early.green_up_jitter = jitter;
  late.name = "late";
  late.green_up = 120;
  late.senescence = 250;
  late.senescence_jitter = jitter;
  cfg.classes = {early, late};

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
// Parcel importance
// ---------------------------------------------------------------------------

TEST_CASE("parcel importance: identity attention spreads evenly") {
  AttentionRecord r =
      record_from("p", {Matrix::Identity(2, 2)}, 2, {kD1, kD2});
  ImportanceTable t = parcel_date_importance(r);
  CHECK(t.scope == ImportanceScope::parcel);
  CHECK(t.parcel_id == "p");
  REQUIRE(t.values.size() == 2);
  CHECK(t.values.at(kD1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(t.values.at(kD2) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("parcel importance: column means of the attention") {
  AttentionRecord r =
      record_from("p", {mat2(0.2, 0.8, 0.4, 0.6)}, 2, {kD1, kD2});
  ImportanceTable t = parcel_date_importance(r);
  CHECK(t.values.at(kD1) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(t.values.at(kD2) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("parcel importance: layers and heads average elementwise first") {
  AttentionRecord r = record_from(
      "p", {Matrix::Identity(2, 2), mat2(0, 1, 1, 0)}, 2, {kD1, kD2});
  ImportanceTable t = parcel_date_importance(r);
  CHECK(t.values.at(kD1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(t.values.at(kD2) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("parcel importance: padded slots are ignored") {
  Matrix a = Matrix::Zero(3, 3);
  a(0, 0) = 0.2;
  a(0, 1) = 0.8;
  a(1, 0) = 0.4;
  a(1, 1) = 0.6;
  AttentionRecord r = record_from("p", {a}, 2, {kD1, kD2});
  ImportanceTable t = parcel_date_importance(r);
  REQUIRE(t.values.size() == 2);
  CHECK(t.values.at(kD1) == doctest::Approx(0.3).epsilon(1e-12));
  double total = 0.0;
  for (const auto& [d, v] : t.values) total += v;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("parcel importance: guards") {
  AttentionRecord empty;
  empty.parcel_id = "p";
  empty.valid_length = 0;
  CHECK_THROWS_AS(parcel_date_importance(empty), EmptyRecord);

  AttentionRecord mismatched =
      record_from("p", {Matrix::Identity(2, 2)}, 2, {kD1});
  CHECK_THROWS_AS(parcel_date_importance(mismatched), ShapeMismatch);
}

TEST_CASE("parcel importances from a trained model sum to one") {
  TinySetup s = tiny_setup(3);
  TrainResult r = train(s.dataset, s.model, s.train);
  std::vector<ImportanceTable> tables =
      parcel_importances(r.checkpoint, s.dataset, s.dataset.splits.test);

  REQUIRE(tables.size() == s.dataset.splits.test.size());
  for (std::size_t i = 0; i < tables.size(); ++i) {
    const auto& parcel = s.dataset.parcels[s.dataset.splits.test[i]];
    CHECK(tables[i].parcel_id == parcel.parcel_id);
    CHECK(tables[i].crop == parcel.crop);
    double total = 0.0;
    for (const auto& [d, v] : tables[i].values) {
      CHECK(v >= 0.0);
      total += v;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(tables[i].values.size() == parcel.observations.size());
  }

  CHECK_THROWS_AS(parcel_importances(r.checkpoint, s.dataset, {}), EmptyInput);
}

// ---------------------------------------------------------------------------
// Crop and global aggregation
// ---------------------------------------------------------------------------

TEST_CASE("crop importance: single parcel passes through") {
  std::vector<ImportanceTable> tables{
      table_of("p1", "wheat", {{kD1, 0.4}, {kD2, 0.6}})};
  ImportanceTable t = crop_date_importance(tables, "wheat");
  CHECK(t.scope == ImportanceScope::crop);
  CHECK(t.crop == "wheat");
  CHECK(t.values.at(kD1) == doctest::Approx(0.4));
  CHECK(t.values.at(kD2) == doctest::Approx(0.6));
  CHECK(t.support.at(kD1) == 1);
}

TEST_CASE("crop importance: means over parcels, other crops excluded") {
  std::vector<ImportanceTable> tables{
      table_of("p1", "wheat", {{kD1, 0.2}, {kD2, 0.8}}),
      table_of("p2", "wheat", {{kD1, 0.4}, {kD2, 0.6}}),
      table_of("p3", "maize", {{kD1, 1.0}})};
  ImportanceTable t = crop_date_importance(tables, "wheat");
  CHECK(t.values.at(kD1) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(t.values.at(kD2) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(t.support.at(kD1) == 2);

  // Full support keeps the distribution property.
  double total = 0.0;
  for (const auto& [d, v] : t.values) total += v;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(crop_date_importance(tables, "rice"), NoParcelsForCrop);
}

TEST_CASE("crop importance: support-based vs zero-fill missing dates") {
  std::vector<ImportanceTable> tables{
      table_of("p1", "wheat", {{kD1, 0.5}, {kD2, 0.5}}),
      table_of("p2", "wheat", {{kD1, 1.0}})}; // p2 never saw kD2

  ImportanceTable sb = crop_date_importance(tables, "wheat",
                                            MissingDateMode::support_based);
  CHECK(sb.values.at(kD1) == doctest::Approx(0.75));
  CHECK(sb.values.at(kD2) == doctest::Approx(0.5)); // mean over observers only
  CHECK(sb.support.at(kD2) == 1);

  ImportanceTable zf =
      crop_date_importance(tables, "wheat", MissingDateMode::zero_fill);
  CHECK(zf.values.at(kD1) == doctest::Approx(0.75));
  CHECK(zf.values.at(kD2) == doctest::Approx(0.25)); // absent counts as zero
  CHECK(zf.support.at(kD2) == 1);
}

TEST_CASE("global importance: uniform over all parcels") {
  std::vector<ImportanceTable> tables{
      table_of("p1", "wheat", {{kD1, 0.2}, {kD2, 0.8}}),
      table_of("p2", "maize", {{kD1, 0.6}, {kD2, 0.4}})};
  ImportanceTable g = global_date_importance(tables);
  CHECK(g.scope == ImportanceScope::global);
  CHECK(g.values.at(kD1) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(g.values.at(kD2) == doctest::Approx(0.6).epsilon(1e-12));

  // Idempotent on a single table.
  ImportanceTable single = global_date_importance({tables[0]});
  CHECK(single.values.at(kD1) == doctest::Approx(0.2));

  CHECK_THROWS_AS(global_date_importance({}), EmptyInput);
}

// ---------------------------------------------------------------------------
// Key-date ranking and dataset rebuild
// ---------------------------------------------------------------------------

TEST_CASE("rank_key_dates: descending with chronological tie-break") {
  ImportanceTable g;
  g.scope = ImportanceScope::global;
  g.values[kD1] = 0.25;
  g.values[kD2] = 0.5;
  g.values[kD3] = 0.25; // ties kD1; kD1 is earlier

  KeyDateRanking r = rank_key_dates(g, 3);
  REQUIRE(r.entries.size() == 3);
  CHECK(r.entries[0].first == kD2);
  CHECK(r.entries[1].first == kD1);
  CHECK(r.entries[2].first == kD3);
  CHECK(r.tie_break == "earlier-date");

  KeyDateRanking top1 = rank_key_dates(g, 1);
  REQUIRE(top1.entries.size() == 1);
  CHECK(top1.entries[0].first == kD2);

  CHECK_THROWS_AS(rank_key_dates(g, 0), InvalidConfig);
  CHECK_THROWS_AS(rank_key_dates(g, 4), TopTooLarge);
}

namespace {

Dataset three_parcel_dataset() {
  Dataset ds;
  ParcelSeries p1, p2, p3;
  p1.parcel_id = "p1";
  p1.crop = "wheat";
  p1.observations = {oracles::obs(2018, 100, oracles::ndvi_bands(0.2)),
                     oracles::obs(2018, 110, oracles::ndvi_bands(0.5)),
                     oracles::obs(2018, 120, oracles::ndvi_bands(0.8))};
  p2.parcel_id = "p2";
  p2.crop = "maize";
  p2.observations = {oracles::obs(2018, 100, oracles::ndvi_bands(0.3)),
                     oracles::obs(2018, 110, oracles::ndvi_bands(0.4))};
  p3.parcel_id = "p3";
  p3.crop = "wheat";
  p3.observations = {oracles::obs(2018, 110, oracles::ndvi_bands(0.6))};
  ds.parcels = {p1, p2, p3};
  ds.class_vocabulary = {"wheat", "maize"};
  ds.splits.train = {0, 1};
  ds.splits.validation = {2};
  ds.splits.test = {1, 2};
  ds.date_axis = collect_date_axis(ds.parcels);
  return ds;
}

KeyDateRanking ranking_of(std::vector<std::pair<Date, double>> entries) {
  KeyDateRanking r;
  r.entries = std::move(entries);
  return r;
}

} // namespace

TEST_CASE("build_keydate_dataset: keeping every date is the identity") {
  Dataset ds = three_parcel_dataset();
  KeyDateRanking all = ranking_of(
      {{kD2, 0.5}, {kD1, 0.3}, {kD3, 0.2}});
  KeyDateDataset kd = build_keydate_dataset(ds, all, 3);
  CHECK(kd.dropped_parcels == 0);
  REQUIRE(kd.dataset.parcels.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(kd.dataset.parcels[i].parcel_id == ds.parcels[i].parcel_id);
    CHECK(kd.dataset.parcels[i].observations.size() ==
          ds.parcels[i].observations.size());
  }
  CHECK(kd.dataset.splits.train == ds.splits.train);
  CHECK(kd.dataset.splits.test == ds.splits.test);
  CHECK(kd.dataset.date_axis == ds.date_axis);
}

TEST_CASE("build_keydate_dataset: top-1 drops parcels lacking the date") {
  Dataset ds = three_parcel_dataset();
  KeyDateRanking r = ranking_of({{kD3, 0.9}, {kD2, 0.1}}); // kD3 = day 120

  KeyDateDataset kd = build_keydate_dataset(ds, r, 1);
  // Only p1 observes day 120.
  CHECK(kd.dropped_parcels == 2);
  REQUIRE(kd.dataset.parcels.size() == 1);
  CHECK(kd.dataset.parcels[0].parcel_id == "p1");
  CHECK(kd.dataset.parcels[0].observations.size() == 1);
  CHECK(kd.dataset.parcels[0].observations[0].date == kD3);

  // Splits remap onto the survivors: p1 was train index 0.
  CHECK(kd.dataset.splits.train == std::vector<std::size_t>{0});
  CHECK(kd.dataset.splits.validation.empty());
  CHECK(kd.dataset.splits.test.empty());
  REQUIRE(kd.dataset.date_axis.size() == 1);
  CHECK(kd.dataset.date_axis[0] == kD3);
}

TEST_CASE("build_keydate_dataset: top-2 keeps partial series") {
  Dataset ds = three_parcel_dataset();
  KeyDateRanking r = ranking_of({{kD2, 0.6}, {kD3, 0.4}});
  KeyDateDataset kd = build_keydate_dataset(ds, r, 2);
  CHECK(kd.dropped_parcels == 0);
  REQUIRE(kd.dataset.parcels.size() == 3);
  CHECK(kd.dataset.parcels[0].observations.size() == 2); // days 110, 120
  CHECK(kd.dataset.parcels[1].observations.size() == 1); // day 110 only
  CHECK(kd.dataset.parcels[2].observations.size() == 1);
  // Test split keeps both members under the new indexing.
  CHECK(kd.dataset.splits.test == std::vector<std::size_t>{1, 2});
}

TEST_CASE("build_keydate_dataset: guards") {
  Dataset ds = three_parcel_dataset();
  KeyDateRanking r = ranking_of({{kD2, 1.0}});
  CHECK_THROWS_AS(build_keydate_dataset(ds, r, 0), InvalidConfig);
  CHECK_THROWS_AS(build_keydate_dataset(ds, r, 2), TopTooLarge);

  KeyDateRanking off_axis = ranking_of({{Date{2018, 77}, 1.0}});
  CHECK_THROWS_AS(build_keydate_dataset(ds, off_axis, 1), DateAbsent);
}

TEST_CASE("ablation_study: curve shape and the full-t identity") {
  TinySetup s = tiny_setup(4);
  AblationCurve curve =
      ablation_study(s.dataset, s.model, s.train, {2, 9, 2, 1});

  // Deduplicated ascending t.
  REQUIRE(curve.points.size() == 3);
  CHECK(curve.points[0].t == 1);
  CHECK(curve.points[1].t == 2);
  CHECK(curve.points[2].t == 9);

  // The ranking covers every date.
  CHECK(curve.ranking.entries.size() == 9);

  // Keeping all 9 dates rebuilds the identical dataset; the retrained model
  // and its metrics match the reference bit for bit.
  CHECK(curve.points[2].dropped_parcels == 0);
  CHECK(curve.points[2].metrics.overall_accuracy == curve.reference.overall_accuracy);
  CHECK(curve.points[2].metrics.macro_f1 == curve.reference.macro_f1);

  CHECK_THROWS_AS(ablation_study(s.dataset, s.model, s.train, {}), EmptyInput);
}

// ---------------------------------------------------------------------------
// NDVI summaries
// ---------------------------------------------------------------------------

TEST_CASE("ndvi summary: noise-free dataset reproduces the curves") {
  TinySetup s = tiny_setup(12, /*jitter=*/0.0, /*noise=*/0.0);
  // Importance tables built by hand: early favors day 180 with 0.7.
  ImportanceTable early_table;
  early_table.scope = ImportanceScope::crop;
  early_table.crop = "early";
  early_table.values[Date{2018, 180}] = 0.7;
  std::vector<ImportanceTable> crop_tables{early_table};

  NdviSummary summary =
      ndvi_attention_summary(s.dataset, crop_tables, Date{2018, 180});
  REQUIRE(summary.rows.size() == 2);
  CHECK(summary.omitted_crops.empty());

  PhenologyParams early, late;
  early.green_up = 120;
  early.senescence = 160;
  late.green_up = 120;
  late.senescence = 250;

  for (const auto& row : summary.rows) {
    const PhenologyParams& p = row.crop == "early" ? early : late;
    CHECK(row.mean_ndvi ==
          doctest::Approx(double_logistic(180, p)).epsilon(1e-9));
    CHECK(row.std_ndvi == doctest::Approx(0.0).epsilon(1e-9)); // no jitter
    CHECK(row.support == 6);
    if (row.crop == "early") CHECK(row.importance == doctest::Approx(0.7));
    if (row.crop == "late") CHECK(row.importance == doctest::Approx(0.0));
  }

  // Day 180 sits after early's senescence and before late's: sparse
  // vegetation for one, dense for the other.
  const auto& r0 = summary.rows[0].crop == "early" ? summary.rows[0] : summary.rows[1];
  const auto& r1 = summary.rows[0].crop == "early" ? summary.rows[1] : summary.rows[0];
  CHECK(r0.mean_ndvi < 0.4);
  CHECK(r1.mean_ndvi > 0.4);

  CHECK_THROWS_AS(
      ndvi_attention_summary(s.dataset, crop_tables, Date{2018, 181}),
      DateAbsent);
}

TEST_CASE("ndvi summary: crops missing the date are listed, not averaged") {
  Dataset ds = three_parcel_dataset();
  // Only wheat's p1 observes day 120.
  NdviSummary summary = ndvi_attention_summary(ds, {}, kD3);
  REQUIRE(summary.rows.size() == 1);
  CHECK(summary.rows[0].crop == "wheat");
  CHECK(summary.rows[0].support == 1);
  CHECK(summary.rows[0].mean_ndvi == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(summary.rows[0].std_ndvi == doctest::Approx(0.0));
  REQUIRE(summary.omitted_crops.size() == 1);
  CHECK(summary.omitted_crops[0] == "maize");
}

TEST_CASE("ndvi_over_time: per-date means per crop") {
  Dataset ds = three_parcel_dataset();
  auto wheat = ndvi_over_time(ds, "wheat");
  REQUIRE(wheat.size() == 3);
  CHECK(wheat[0].first == kD1);
  CHECK(wheat[0].second == doctest::Approx(0.2).epsilon(1e-12));
  // Day 110: wheat parcels p1 (0.5) and p3 (0.6).
  CHECK(wheat[1].second == doctest::Approx(0.55).epsilon(1e-12));
  CHECK(wheat[2].second == doctest::Approx(0.8).epsilon(1e-12));

  CHECK_THROWS_AS(ndvi_over_time(ds, "rice"), NoParcelsForCrop);
}

TEST_CASE("ndvi_over_time: noise-free generator matches the formula") {
  TinySetup s = tiny_setup(13, 0.0, 0.0);
  PhenologyParams late;
  late.green_up = 120;
  late.senescence = 250;
  auto curve = ndvi_over_time(s.dataset, "late");
  REQUIRE(curve.size() == 9);
  for (const auto& [date, v] : curve) {
    CHECK(v == doctest::Approx(double_logistic(date.day_of_year, late))
                   .epsilon(1e-9));
  }
}

TEST_CASE("top_attended_parcels: ordering, clamping, ties") {
  std::vector<ImportanceTable> tables{
      table_of("pb", "wheat", {{kD1, 0.5}}),
      table_of("pa", "wheat", {{kD1, 0.5}}), // ties pb; id breaks the tie
      table_of("pc", "maize", {{kD1, 0.8}}),
      table_of("pd", "maize", {{kD2, 0.9}})}; // never saw kD1

  auto top = top_attended_parcels(tables, kD1, 2);
  REQUIRE(top.size() == 2);
  CHECK(top[0].first == "pc");
  CHECK(top[1].first == "pa");

  auto all = top_attended_parcels(tables, kD1, 10);
  REQUIRE(all.size() == 3);
  CHECK(all[2].first == "pb");

  CHECK_THROWS_AS(top_attended_parcels(tables, kD1, 0), InvalidConfig);
  CHECK_THROWS_AS(top_attended_parcels(tables, kD3, 1), DateAbsent);
}

// ---------------------------------------------------------------------------
// PCA
// ---------------------------------------------------------------------------

TEST_CASE("pca: collinear points collapse to one component") {
  Matrix x(4, 2);
  x << -3, -6, -1, -2, 1, 2, 3, 6; // y = 2x
  PcaResult r = pca_project(x, 2);

  CHECK(r.explained_variance[0] > 0.0);
  CHECK(r.explained_variance[1] == doctest::Approx(0.0).epsilon(1e-12));

  // The first component is (1,2)/sqrt(5) with a positive largest entry.
  const double inv = 1.0 / std::sqrt(5.0);
  CHECK(r.components(0, 0) == doctest::Approx(inv).epsilon(1e-9));
  CHECK(r.components(1, 0) == doctest::Approx(2 * inv).epsilon(1e-9));

  // Coordinates along the line: -3*sqrt(5), -sqrt(5), sqrt(5), 3*sqrt(5).
  CHECK(r.coordinates(0, 0) == doctest::Approx(-3 * std::sqrt(5.0)).epsilon(1e-9));
  CHECK(r.coordinates(3, 0) == doctest::Approx(3 * std::sqrt(5.0)).epsilon(1e-9));
  // Second coordinates vanish.
  for (int i = 0; i < 4; ++i)
    CHECK(r.coordinates(i, 1) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("pca: explained variance accounts for the trace") {
  Rng rng(91);
  Matrix x(6, 3);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 3; ++j) x(i, j) = rng.normal(0.0, 1.0 + j);

  PcaResult r = pca_project(x, 3);
  CHECK(std::is_sorted(r.explained_variance.rbegin(), r.explained_variance.rend()));

  Eigen::RowVectorXd mean = x.colwise().mean();
  Matrix centered = x.rowwise() - mean;
  const double trace = (centered.transpose() * centered / 5.0).trace();
  const double total =
      r.explained_variance[0] + r.explained_variance[1] + r.explained_variance[2];
  CHECK(total == doctest::Approx(trace).epsilon(1e-9));

  PcaResult r2 = pca_project(x, 2);
  CHECK(r2.explained_variance[0] + r2.explained_variance[1] <= trace + 1e-9);
  CHECK(r2.coordinates.cols() == 2);
  CHECK(r2.components.cols() == 2);
}

TEST_CASE("pca: matches the Jacobi oracle on random data") {
  Rng rng(92);
  int done = 0;
  while (done < 20) {
    const int n = 4 + static_cast<int>(rng.uniform_index(8));
    const int dim = 2 + static_cast<int>(rng.uniform_index(4));
    const int k = std::min(2, dim);
    Matrix x(n, dim);
    std::vector<std::vector<double>> rows(n, std::vector<double>(dim));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < dim; ++j) rows[i][j] = x(i, j) = rng.normal(0.0, 1.0 + j);

    oracles::JacobiPca oracle = oracles::jacobi_pca(rows, k);
    if (oracle.min_gap < 1e-4) continue; // eigenvectors not unique enough

    PcaResult r = pca_project(x, k);
    for (int c = 0; c < k; ++c)
      CHECK(r.explained_variance[c] ==
            doctest::Approx(oracle.variances[c]).epsilon(1e-9));
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < k; ++c)
        CHECK(std::fabs(r.coordinates(i, c) - oracle.coordinates[i][c]) < 1e-8);
    ++done;
  }
}

TEST_CASE("pca: row order permutes coordinates consistently") {
  Rng rng(93);
  Matrix x(5, 3);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 3; ++j) x(i, j) = rng.normal(0.0, 2.0);

  Matrix shuffled(5, 3);
  const int perm[5] = {3, 0, 4, 1, 2};
  for (int i = 0; i < 5; ++i) shuffled.row(i) = x.row(perm[i]);

  PcaResult a = pca_project(x, 2);
  PcaResult b = pca_project(shuffled, 2);
  for (int i = 0; i < 5; ++i)
    for (int c = 0; c < 2; ++c)
      CHECK(b.coordinates(i, c) ==
            doctest::Approx(a.coordinates(perm[i], c)).epsilon(1e-9));
}

TEST_CASE("pca: guards") {
  Matrix one_row(1, 3);
  one_row << 1, 2, 3;
  CHECK_THROWS_AS(pca_project(one_row, 1), DegenerateInput);

  Matrix same(3, 2);
  same << 1, 2, 1, 2, 1, 2;
  CHECK_THROWS_AS(pca_project(same, 1), DegenerateInput);

  Matrix ok(3, 2);
  ok << 1, 2, 3, 5, 4, 4;
  CHECK_THROWS_AS(pca_project(ok, 0), InvalidConfig);
  CHECK_THROWS_AS(pca_project(ok, 3), InvalidConfig);
}

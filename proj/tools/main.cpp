// Command-line front end: synth / ingest / train / explain / ablate /
// occlude / report. Every run drops its artifacts plus a JSON manifest into
// --out. Exit codes: 0 success, 1 runtime error, 2 usage error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cropattn/checkpoint.hpp"
#include "cropattn/csv.hpp"
#include "cropattn/errors.hpp"
#include "cropattn/explain.hpp"
#include "cropattn/kvconfig.hpp"
#include "cropattn/manifest.hpp"
#include "cropattn/metrics.hpp"
#include "cropattn/ndvi.hpp"
#include "cropattn/pca.hpp"
#include "cropattn/preprocess.hpp"
#include "cropattn/sensitivity.hpp"
#include "cropattn/synthetic.hpp"
#include "cropattn/training.hpp"

namespace fs = std::filesystem;
using namespace cropattn;

namespace {

#ifndef CROPATTN_VERSION
#define CROPATTN_VERSION "0.0.0"
#endif

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 1;
};

void add_common_flags(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "key=value configuration file");
  cmd->add_option("--out", args.out_dir, "output directory (created if missing)");
  cmd->add_option("--seed", args.seed, "random seed")
      ->each([&args](const std::string&) { args.seed_given = true; });
  cmd->add_option("--threads", args.threads, "worker threads (advisory)");
}

KeyValueConfig load_config(const CommonArgs& args) {
  if (args.config_path.empty()) return KeyValueConfig{};
  return KeyValueConfig::parse_file(args.config_path);
}

/// --seed beats the config file's `seed`, which beats 0.
std::uint64_t resolve_seed(const CommonArgs& args, const KeyValueConfig& cfg) {
  if (args.seed_given) return args.seed;
  return static_cast<std::uint64_t>(cfg.get_int_or("seed", 0));
}

std::string format_g17(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string dataset_csv_path(const std::string& data) {
  if (fs::is_directory(data)) return (fs::path(data) / "dataset.csv").string();
  return data;
}

class CsvWriter {
public:
  CsvWriter(const std::string& path, const std::string& header) : out_(path), path_(path) {
    if (!out_) throw Error("cannot open '" + path + "' for writing");
    out_ << header << '\n';
  }
  template <typename... Parts>
  void row(const Parts&... parts) {
    bool first = true;
    ((out_ << (first ? "" : ","), first = false, write_part(parts)), ...);
    out_ << '\n';
  }
  void close() {
    out_.close();
    if (!out_) throw Error("write to '" + path_ + "' failed");
  }

private:
  void write_part(const std::string& s) { out_ << s; }
  void write_part(const char* s) { out_ << s; }
  void write_part(double v) { out_ << format_g17(v); }
  void write_part(int v) { out_ << v; }
  void write_part(long v) { out_ << v; }
  void write_part(std::size_t v) { out_ << v; }
  void write_part(const Date& d) { out_ << to_iso_string(d); }

  std::ofstream out_;
  std::string path_;
};

void write_json_file(const nlohmann::ordered_json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw Error("write to '" + path + "' failed");
}

nlohmann::ordered_json metrics_json(const Metrics& m,
                                    const std::vector<std::string>& vocab) {
  nlohmann::ordered_json j;
  j["overall_accuracy"] = m.overall_accuracy;
  j["class_accuracy"] = m.class_accuracy;
  j["macro_f1"] = m.macro_f1;
  j["classes"] = vocab;
  std::vector<std::vector<double>> rows;
  for (Eigen::Index r = 0; r < m.confusion.rows(); ++r) {
    std::vector<double> row;
    for (Eigen::Index c = 0; c < m.confusion.cols(); ++c) row.push_back(m.confusion(r, c));
    rows.push_back(std::move(row));
  }
  j["confusion_matrix"] = rows;
  return j;
}

void write_confusion_csv(const Metrics& m, const std::vector<std::string>& vocab,
                         const std::string& path) {
  std::string header = "true_class";
  for (const auto& c : vocab) header += ",pred_" + c;
  CsvWriter csv(path, header);
  for (Eigen::Index r = 0; r < m.confusion.rows(); ++r) {
    std::string line = vocab.at(static_cast<size_t>(r));
    for (Eigen::Index c = 0; c < m.confusion.cols(); ++c) {
      line += "," + format_g17(m.confusion(r, c));
    }
    csv.row(line);
  }
  csv.close();
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

void config_into(std::map<std::string, std::string>& dst, const TrainConfig& c) {
  dst["beta1"] = format_g17(c.beta1);
  dst["beta2"] = format_g17(c.beta2);
  dst["epsilon"] = format_g17(c.epsilon);
  dst["base_learning_rate"] = format_g17(c.base_learning_rate);
  dst["weight_decay"] = format_g17(c.weight_decay);
  dst["focal_gamma"] = format_g17(c.focal_gamma);
  dst["max_epochs"] = std::to_string(c.max_epochs);
  dst["early_stop_check_every"] = std::to_string(c.early_stop_check_every);
  dst["warmup_steps"] = std::to_string(c.warmup_steps);
  dst["batch_size"] = std::to_string(c.batch_size);
  dst["weight_decay_mode"] = "decoupled";
}

void config_into(std::map<std::string, std::string>& dst, const ModelConfig& c) {
  dst["num_layers"] = std::to_string(c.num_layers);
  dst["num_heads"] = std::to_string(c.num_heads);
  dst["model_dim"] = std::to_string(c.model_dim);
  dst["key_dim"] = std::to_string(c.key_dim);
  dst["value_dim"] = std::to_string(c.value_dim);
  dst["feed_forward_dim"] = std::to_string(c.feed_forward_dim);
  dst["num_classes"] = std::to_string(c.num_classes);
  dst["t_max"] = std::to_string(c.t_max);
  dst["layer_norm_eps"] = format_g17(c.layer_norm_eps);
}

RunManifest start_manifest(const std::string& subcommand, const CommonArgs& args,
                           std::uint64_t seed) {
  RunManifest m;
  m.subcommand = subcommand;
  m.software_version = CROPATTN_VERSION;
  m.seed = seed;
  if (!args.config_path.empty()) {
    m.input_fingerprints[args.config_path] =
        fingerprint_hex(fnv1a64_file(args.config_path));
  }
  return m;
}

/// Dataset-level preprocessing the config can request before training:
/// weekly averaging and/or fixed-length random sampling.
Dataset apply_preprocessing(Dataset ds, const KeyValueConfig& cfg, std::uint64_t seed) {
  const std::string weekly = cfg.get_or("weekly_average", "false");
  if (weekly == "true" || weekly == "1") {
    for (auto& p : ds.parcels) p = weekly_average(p);
    ds.date_axis = collect_date_axis(ds.parcels);
  }
  const long long t_fixed = cfg.get_int_or("sample_length", 0);
  if (t_fixed > 0) {
    for (size_t i = 0; i < ds.parcels.size(); ++i) {
      ds.parcels[i] = random_sample(ds.parcels[i], static_cast<int>(t_fixed),
                                    seed ^ fnv1a64(ds.parcels[i].parcel_id));
    }
    ds.date_axis = collect_date_axis(ds.parcels);
  }
  return ds;
}

NdviBands ndvi_bands_from(const KeyValueConfig& cfg) {
  NdviBands bands;
  bands.nir_index = static_cast<int>(cfg.get_int_or("ndvi_nir_index", bands.nir_index));
  bands.red_index = static_cast<int>(cfg.get_int_or("ndvi_red_index", bands.red_index));
  if (bands.nir_index < 0 || bands.nir_index >= kNumBands || bands.red_index < 0 ||
      bands.red_index >= kNumBands || bands.nir_index == bands.red_index) {
    throw InvalidConfig("ndvi band indices must be distinct and in [0, 12]");
  }
  return bands;
}

MissingDateMode missing_mode_from(const KeyValueConfig& cfg) {
  const std::string mode = cfg.get_or("missing_date_mode", "support_based");
  if (mode == "support_based") return MissingDateMode::support_based;
  if (mode == "zero_fill") return MissingDateMode::zero_fill;
  throw InvalidConfig("missing_date_mode must be support_based or zero_fill");
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

void cmd_synth(const CommonArgs& args) {
  Timer timer;
  if (args.config_path.empty()) {
    throw InvalidConfig("synth needs --config with the class definitions");
  }
  const KeyValueConfig cfg = load_config(args);
  const std::uint64_t seed = resolve_seed(args, cfg);
  const SyntheticConfig synth_cfg = SyntheticConfig::from_config(cfg);

  Dataset ds = generate_synthetic(synth_cfg, seed);
  // Decorrelated stream for the split shuffle.
  ds.splits = make_stratified_splits(ds, synth_cfg.train_frac,
                                     synth_cfg.validation_frac, synth_cfg.test_frac,
                                     seed ^ 0x9e3779b97f4a7c15ULL);
  fs::create_directories(args.out_dir);
  const std::string csv_path = (fs::path(args.out_dir) / "dataset.csv").string();
  save_canonical_dataset(ds, csv_path);

  RunManifest manifest = start_manifest("synth", args, seed);
  for (const auto& key : cfg.keys()) manifest.config[key] = cfg.get(key);
  manifest.outputs = {csv_path, meta_path_for(csv_path)};
  manifest.wall_seconds = timer.seconds();
  append_manifest(manifest, args.out_dir);
  std::cout << "wrote " << csv_path << " (" << ds.parcels.size() << " parcels, "
            << ds.class_vocabulary.size() << " classes)\n";
}

void cmd_ingest(const CommonArgs& args, const std::string& input) {
  Timer timer;
  const KeyValueConfig cfg = load_config(args);
  const std::uint64_t seed = resolve_seed(args, cfg);

  CsvSchema schema;
  schema.parcel_id_column = cfg.get_or("parcel_id_column", schema.parcel_id_column);
  schema.date_column = cfg.get_or("date_column", schema.date_column);
  schema.crop_column = cfg.get_or("crop_column", schema.crop_column);
  schema.reflectance_divisor =
      cfg.get_double_or("reflectance_divisor", schema.reflectance_divisor);
  if (cfg.has("band_columns")) schema.band_columns = cfg.get_list("band_columns");

  Dataset ds = load_dataset(input, schema);
  if (cfg.has("split_file")) {
    ds.splits = load_split_file(ds, cfg.get("split_file"));
  } else {
    ds.splits = make_stratified_splits(
        ds, cfg.get_double_or("train_frac", 0.70),
        cfg.get_double_or("validation_frac", 0.15),
        cfg.get_double_or("test_frac", 0.15), seed ^ 0x9e3779b97f4a7c15ULL);
  }
  fs::create_directories(args.out_dir);
  const std::string csv_path = (fs::path(args.out_dir) / "dataset.csv").string();
  save_canonical_dataset(ds, csv_path);

  RunManifest manifest = start_manifest("ingest", args, seed);
  manifest.input_fingerprints[input] = fingerprint_hex(fnv1a64_file(input));
  for (const auto& key : cfg.keys()) manifest.config[key] = cfg.get(key);
  manifest.outputs = {csv_path, meta_path_for(csv_path)};
  manifest.wall_seconds = timer.seconds();
  append_manifest(manifest, args.out_dir);
  std::cout << "wrote " << csv_path << " (" << ds.parcels.size() << " parcels)\n";
}

void cmd_train(const CommonArgs& args, const std::string& data) {
  Timer timer;
  const KeyValueConfig cfg = load_config(args);
  const std::uint64_t seed = resolve_seed(args, cfg);
  const std::string csv_path = dataset_csv_path(data);

  Dataset ds = load_canonical_dataset(csv_path);
  ds = apply_preprocessing(std::move(ds), cfg, seed);
  const ModelConfig model_cfg = model_config_from(cfg);
  TrainConfig train_cfg = TrainConfig::from_config(cfg);
  train_cfg.seed = seed;

  const TrainResult result = train(ds, model_cfg, train_cfg);
  const Metrics metrics = evaluate(result.checkpoint, ds, ds.splits.test);

  fs::create_directories(args.out_dir);
  const fs::path out(args.out_dir);
  const std::string ckpt_path = (out / "checkpoint.json").string();
  const std::string metrics_path = (out / "metrics.json").string();
  const std::string confusion_path = (out / "confusion.csv").string();
  const std::string log_path = (out / "training_log.csv").string();

  save_checkpoint(result.checkpoint, ckpt_path);

  nlohmann::ordered_json mj = metrics_json(metrics, ds.class_vocabulary);
  mj["best_epoch"] = result.best_epoch;
  mj["best_validation_loss"] = result.best_validation_loss;
  mj["epochs_run"] = result.epochs_run;
  mj["early_stopped"] = result.early_stopped;
  write_json_file(mj, metrics_path);

  write_confusion_csv(metrics, ds.class_vocabulary, confusion_path);

  CsvWriter log(log_path, "epoch,train_loss,learning_rate,validated,validation_loss");
  for (const EpochLog& e : result.log) {
    log.row(e.epoch, e.train_loss, e.learning_rate, e.validated ? 1 : 0,
            e.validated ? format_g17(e.validation_loss) : std::string());
  }
  log.close();

  RunManifest manifest = start_manifest("train", args, seed);
  manifest.input_fingerprints[csv_path] = fingerprint_hex(fnv1a64_file(csv_path));
  config_into(manifest.config, train_cfg);
  config_into(manifest.config, result.checkpoint.params.config);
  manifest.outputs = {ckpt_path, metrics_path, confusion_path, log_path};
  manifest.wall_seconds = timer.seconds();
  append_manifest(manifest, args.out_dir);

  std::cout << "trained " << result.epochs_run << " epochs (best epoch "
            << result.best_epoch << "); test overall_accuracy "
            << format_g17(metrics.overall_accuracy) << ", class_accuracy "
            << format_g17(metrics.class_accuracy) << "\n";
}

void cmd_explain(const CommonArgs& args, const std::string& data,
                 const std::string& checkpoint_path, int top_t, int top_parcels) {
  Timer timer;
  const KeyValueConfig cfg = load_config(args);
  const std::string csv_path = dataset_csv_path(data);
  const Dataset ds = load_canonical_dataset(csv_path);
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const NdviBands bands = ndvi_bands_from(cfg);
  const MissingDateMode mode = missing_mode_from(cfg);

  const std::vector<ImportanceTable> parcel_tables =
      parcel_importances(ckpt, ds, ds.splits.test);
  std::vector<ImportanceTable> crop_tables;
  for (const std::string& crop : ds.class_vocabulary) {
    bool any = false;
    for (const auto& t : parcel_tables) {
      if (t.crop == crop) { any = true; break; }
    }
    if (any) crop_tables.push_back(crop_date_importance(parcel_tables, crop, mode));
  }
  const ImportanceTable global = global_date_importance(parcel_tables, mode);
  const KeyDateRanking ranking = rank_key_dates(global, top_t);

  fs::create_directories(args.out_dir);
  const fs::path out(args.out_dir);
  std::vector<std::string> outputs;
  auto out_path = [&](const char* name) {
    outputs.push_back((out / name).string());
    return outputs.back();
  };

  {
    CsvWriter csv(out_path("importance_parcel.csv"), "parcel_id,crop,date,importance");
    for (const auto& t : parcel_tables) {
      for (const auto& [date, value] : t.values) csv.row(t.parcel_id, t.crop, date, value);
    }
    csv.close();
  }
  {
    CsvWriter csv(out_path("importance_crop.csv"), "crop,date,importance,support");
    for (const auto& t : crop_tables) {
      for (const auto& [date, value] : t.values) {
        csv.row(t.crop, date, value, t.support.at(date));
      }
    }
    csv.close();
  }
  {
    CsvWriter csv(out_path("importance_global.csv"), "date,importance,support");
    for (const auto& [date, value] : global.values) {
      csv.row(date, value, global.support.at(date));
    }
    csv.close();
  }
  {
    CsvWriter csv(out_path("key_dates.csv"), "rank,date,importance");
    for (size_t i = 0; i < ranking.entries.size(); ++i) {
      csv.row(i + 1, ranking.entries[i].first, ranking.entries[i].second);
    }
    csv.close();
  }

  // PCA of the 13-band vectors of the test parcels at each key date.
  nlohmann::ordered_json pca_meta = nlohmann::ordered_json::array();
  {
    CsvWriter csv(out_path("pca_keydates.csv"), "date,parcel_id,crop,pc1,pc2");
    for (const auto& [date, importance] : ranking.entries) {
      std::vector<std::size_t> observing;
      std::vector<std::string> ids;
      std::vector<std::string> crops;
      Matrix vectors;
      std::vector<std::array<double, kNumBands>> rows;
      for (std::size_t idx : ds.splits.test) {
        const ParcelSeries& p = ds.parcels[idx];
        for (const Observation& obs : p.observations) {
          if (obs.date == date) {
            rows.push_back(obs.bands);
            ids.push_back(p.parcel_id);
            crops.push_back(p.crop);
            break;
          }
        }
      }
      if (rows.size() < 2) continue; // not enough support for a covariance
      vectors.resize(static_cast<Eigen::Index>(rows.size()), kNumBands);
      for (size_t r = 0; r < rows.size(); ++r) {
        for (int b = 0; b < kNumBands; ++b) vectors(static_cast<Eigen::Index>(r), b) = rows[r][b];
      }
      try {
        const PcaResult pca = pca_project(vectors, 2);
        for (size_t r = 0; r < ids.size(); ++r) {
          csv.row(date, ids[r], crops[r], pca.coordinates(static_cast<Eigen::Index>(r), 0),
                  pca.coordinates(static_cast<Eigen::Index>(r), 1));
        }
        nlohmann::ordered_json entry;
        entry["date"] = to_iso_string(date);
        entry["explained_variance"] = pca.explained_variance;
        entry["support"] = ids.size();
        pca_meta.push_back(std::move(entry));
      } catch (const DegenerateInput&) {
        nlohmann::ordered_json entry;
        entry["date"] = to_iso_string(date);
        entry["skipped"] = "degenerate reflectances";
        pca_meta.push_back(std::move(entry));
      }
    }
    csv.close();
  }

  nlohmann::ordered_json omitted = nlohmann::ordered_json::array();
  {
    CsvWriter csv(out_path("ndvi_summary.csv"),
                  "date,crop,mean_ndvi,std_ndvi,importance,support");
    for (const auto& [date, importance] : ranking.entries) {
      const NdviSummary summary = ndvi_attention_summary(ds, crop_tables, date, bands);
      for (const auto& row : summary.rows) {
        csv.row(date, row.crop, row.mean_ndvi, row.std_ndvi, row.importance, row.support);
      }
      for (const auto& crop : summary.omitted_crops) {
        nlohmann::ordered_json note;
        note["date"] = to_iso_string(date);
        note["crop"] = crop;
        note["note"] = "no observation at this date";
        omitted.push_back(std::move(note));
      }
    }
    csv.close();
  }
  {
    CsvWriter csv(out_path("ndvi_over_time.csv"), "crop,date,mean_ndvi");
    for (const std::string& crop : ds.class_vocabulary) {
      std::vector<std::pair<Date, double>> series;
      try {
        series = ndvi_over_time(ds, crop, bands);
      } catch (const NoParcelsForCrop&) {
        continue;
      }
      for (const auto& [date, value] : series) csv.row(crop, date, value);
    }
    csv.close();
  }
  {
    CsvWriter csv(out_path("top_parcels.csv"), "date,rank,parcel_id,importance");
    for (const auto& [date, importance] : ranking.entries) {
      const auto top = top_attended_parcels(parcel_tables, date, top_parcels);
      for (size_t i = 0; i < top.size(); ++i) {
        csv.row(date, i + 1, top[i].first, top[i].second);
      }
    }
    csv.close();
  }

  nlohmann::ordered_json meta;
  meta["aggregation"] = "attention matrices averaged elementwise over layers and heads";
  meta["missing_date_mode"] =
      mode == MissingDateMode::support_based ? "support_based" : "zero_fill";
  meta["tie_break"] = ranking.tie_break;
  meta["split"] = "test";
  meta["top_t"] = top_t;
  meta["ndvi_nir_index"] = bands.nir_index;
  meta["ndvi_red_index"] = bands.red_index;
  meta["pca"] = std::move(pca_meta);
  meta["ndvi_omitted"] = std::move(omitted);
  outputs.push_back((out / "explain_meta.json").string());
  write_json_file(meta, outputs.back());

  RunManifest manifest = start_manifest("explain", args, 0);
  manifest.input_fingerprints[csv_path] = fingerprint_hex(fnv1a64_file(csv_path));
  manifest.input_fingerprints[checkpoint_path] =
      fingerprint_hex(fnv1a64_file(checkpoint_path));
  manifest.config["top_t"] = std::to_string(top_t);
  manifest.config["top_parcels"] = std::to_string(top_parcels);
  manifest.config["missing_date_mode"] =
      mode == MissingDateMode::support_based ? "support_based" : "zero_fill";
  manifest.outputs = outputs;
  manifest.wall_seconds = timer.seconds();
  append_manifest(manifest, args.out_dir);

  std::cout << "top-" << top_t << " key dates:";
  for (const auto& [date, value] : ranking.entries) std::cout << ' ' << to_iso_string(date);
  std::cout << "\n";
}

void cmd_ablate(const CommonArgs& args, const std::string& data,
                const std::string& t_list) {
  Timer timer;
  const KeyValueConfig cfg = load_config(args);
  const std::uint64_t seed = resolve_seed(args, cfg);
  const std::string csv_path = dataset_csv_path(data);

  Dataset ds = load_canonical_dataset(csv_path);
  ds = apply_preprocessing(std::move(ds), cfg, seed);
  const ModelConfig model_cfg = model_config_from(cfg);
  TrainConfig train_cfg = TrainConfig::from_config(cfg);
  train_cfg.seed = seed;

  std::vector<int> ts;
  for (const std::string& item : KeyValueConfig::parse_text("t=" + t_list).get_list("t")) {
    try {
      ts.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw InvalidConfig("bad t value '" + item + "'");
    }
  }
  std::set<int> unique(ts.begin(), ts.end());
  if (unique.size() != ts.size()) {
    std::cerr << "warning: duplicate t values removed\n";
  }

  const AblationCurve curve = ablation_study(ds, model_cfg, train_cfg, ts);

  fs::create_directories(args.out_dir);
  const fs::path out(args.out_dir);
  const std::string curve_path = (out / "ablation_curve.csv").string();
  CsvWriter csv(curve_path, "t,overall_accuracy,class_accuracy,macro_f1");
  csv.row("ref", curve.reference.overall_accuracy, curve.reference.class_accuracy,
          curve.reference.macro_f1);
  for (const AblationPoint& p : curve.points) {
    csv.row(p.t, p.metrics.overall_accuracy, p.metrics.class_accuracy,
            p.metrics.macro_f1);
  }
  csv.close();

  nlohmann::ordered_json meta;
  meta["ranking"] = nlohmann::ordered_json::array();
  for (size_t i = 0; i < curve.ranking.entries.size(); ++i) {
    nlohmann::ordered_json e;
    e["rank"] = i + 1;
    e["date"] = to_iso_string(curve.ranking.entries[i].first);
    e["importance"] = curve.ranking.entries[i].second;
    meta["ranking"].push_back(std::move(e));
  }
  meta["dropped_parcels"] = nlohmann::ordered_json::object();
  for (const AblationPoint& p : curve.points) {
    meta["dropped_parcels"][std::to_string(p.t)] = p.dropped_parcels;
  }
  const std::string meta_path = (out / "ablation_meta.json").string();
  write_json_file(meta, meta_path);

  RunManifest manifest = start_manifest("ablate", args, seed);
  manifest.input_fingerprints[csv_path] = fingerprint_hex(fnv1a64_file(csv_path));
  config_into(manifest.config, train_cfg);
  manifest.config["t_values"] = t_list;
  manifest.outputs = {curve_path, meta_path};
  manifest.wall_seconds = timer.seconds();
  append_manifest(manifest, args.out_dir);

  std::cout << "ablation curve written to " << curve_path << "\n";
}

void cmd_occlude(const CommonArgs& args, const std::string& data,
                 const std::string& crops_list) {
  Timer timer;
  const KeyValueConfig cfg = load_config(args);
  const std::uint64_t seed = resolve_seed(args, cfg);
  const std::string csv_path = dataset_csv_path(data);

  Dataset ds = load_canonical_dataset(csv_path);
  ds = apply_preprocessing(std::move(ds), cfg, seed);
  const ModelConfig model_cfg = model_config_from(cfg);
  TrainConfig train_cfg = TrainConfig::from_config(cfg);
  train_cfg.seed = seed;

  const std::vector<std::string> crops =
      KeyValueConfig::parse_text("c=" + crops_list).get_list("c");
  const OcclusionStudy study = occlusion_study(ds, model_cfg, train_cfg, crops);

  fs::create_directories(args.out_dir);
  const fs::path out(args.out_dir);
  const std::string deltas_path = (out / "occlusion_deltas.csv").string();
  const std::string acc_path = (out / "accuracy_changes.csv").string();
  const std::string tv_path = (out / "total_variation.csv").string();

  CsvWriter deltas(deltas_path, "occluded_crop,crop,date,delta,support");
  CsvWriter acc(acc_path, "occluded_crop,crop,accuracy_change");
  CsvWriter tv(tv_path, "occluded_crop,crop,total_variation");
  for (const OcclusionResult& r : study.results) {
    for (const auto& [crop, by_date] : r.delta.deltas) {
      for (const auto& [date, delta] : by_date) {
        deltas.row(r.occluded_crop, crop, date, delta,
                   r.delta.supports.at(crop).at(date));
      }
    }
    for (const auto& [crop, change] : r.accuracy.by_crop) {
      acc.row(r.occluded_crop, crop, change);
    }
    for (const auto& [crop, value] : r.total_variation_by_crop) {
      tv.row(r.occluded_crop, crop, value);
    }
  }
  deltas.close();
  acc.close();
  tv.close();

  nlohmann::ordered_json meta;
  meta["reference"] = metrics_json(study.reference_metrics, ds.class_vocabulary);
  meta["occlusions"] = nlohmann::ordered_json::array();
  for (const OcclusionResult& r : study.results) {
    nlohmann::ordered_json e;
    e["occluded_crop"] = r.occluded_crop;
    e["overall_accuracy"] = r.metrics.overall_accuracy;
    e["class_accuracy"] = r.metrics.class_accuracy;
    e["macro_f1"] = r.metrics.macro_f1;
    meta["occlusions"].push_back(std::move(e));
  }
  const std::string meta_path = (out / "occlusion_meta.json").string();
  write_json_file(meta, meta_path);

  RunManifest manifest = start_manifest("occlude", args, seed);
  manifest.input_fingerprints[csv_path] = fingerprint_hex(fnv1a64_file(csv_path));
  config_into(manifest.config, train_cfg);
  manifest.config["crops"] = crops_list;
  manifest.outputs = {deltas_path, acc_path, tv_path, meta_path};
  manifest.wall_seconds = timer.seconds();
  append_manifest(manifest, args.out_dir);

  std::cout << "occlusion artifacts written to " << args.out_dir << "\n";
}

void cmd_report(const CommonArgs& args) {
  Timer timer;
  const fs::path dir(args.out_dir);
  std::ostringstream md;
  md << "# Run report\n\n";
  bool found = false;

  const fs::path metrics_path = dir / "metrics.json";
  if (fs::exists(metrics_path)) {
    found = true;
    std::ifstream in(metrics_path);
    nlohmann::json m;
    in >> m;
    md << "## Test metrics\n\n"
       << "| metric | value |\n|---|---|\n"
       << "| overall accuracy | " << m.value("overall_accuracy", 0.0) << " |\n"
       << "| class accuracy | " << m.value("class_accuracy", 0.0) << " |\n"
       << "| macro F1 | " << m.value("macro_f1", 0.0) << " |\n\n";
  }
  const fs::path keydates_path = dir / "key_dates.csv";
  if (fs::exists(keydates_path)) {
    found = true;
    std::ifstream in(keydates_path);
    std::string line;
    md << "## Key dates\n\n```\n";
    while (std::getline(in, line)) md << line << '\n';
    md << "```\n\n";
  }
  for (const char* name : {"ablation_curve.csv", "total_variation.csv",
                           "accuracy_changes.csv"}) {
    const fs::path p = dir / name;
    if (!fs::exists(p)) continue;
    found = true;
    std::ifstream in(p);
    std::string line;
    md << "## " << name << "\n\n```\n";
    while (std::getline(in, line)) md << line << '\n';
    md << "```\n\n";
  }
  if (!found) {
    throw EmptyInput("no artifacts found in '" + args.out_dir + "' to report on");
  }

  const std::string report_path = (dir / "report.md").string();
  std::ofstream out(report_path);
  if (!out) throw Error("cannot open '" + report_path + "' for writing");
  out << md.str();
  if (!out) throw Error("write to '" + report_path + "' failed");

  RunManifest manifest = start_manifest("report", args, 0);
  manifest.outputs = {report_path};
  manifest.wall_seconds = timer.seconds();
  append_manifest(manifest, args.out_dir);
  std::cout << "wrote " << report_path << "\n";
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"attention-based crop-type classification and explanation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", CROPATTN_VERSION);

  CommonArgs synth_args, ingest_args, train_args, explain_args, ablate_args,
      occlude_args, report_args;
  std::string ingest_input, train_data, explain_data, explain_ckpt, ablate_data,
      ablate_t = "1,3,5", occlude_data, occlude_crops;
  int explain_top_t = 3;
  int explain_top_parcels = 4;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common_flags(synth, synth_args);
  synth->get_option("--config")->required(); // carries the class definitions

  CLI::App* ingest = app.add_subcommand("ingest", "normalize a raw CSV dataset");
  add_common_flags(ingest, ingest_args);
  ingest->add_option("--input", ingest_input, "raw CSV file")->required();

  CLI::App* train_cmd = app.add_subcommand("train", "train the classifier");
  add_common_flags(train_cmd, train_args);
  train_cmd->add_option("--data", train_data, "dataset directory or CSV")->required();

  CLI::App* explain = app.add_subcommand("explain", "summarize attention importance");
  add_common_flags(explain, explain_args);
  explain->add_option("--data", explain_data, "dataset directory or CSV")->required();
  explain->add_option("--checkpoint", explain_ckpt, "trained checkpoint")->required();
  explain->add_option("--top-t", explain_top_t, "key dates to rank (default 3)");
  explain->add_option("--top-parcels", explain_top_parcels,
                      "parcels listed per key date (default 4)");

  CLI::App* ablate = app.add_subcommand("ablate", "top-t key-date retraining curve");
  add_common_flags(ablate, ablate_args);
  ablate->add_option("--data", ablate_data, "dataset directory or CSV")->required();
  ablate->add_option("--t", ablate_t, "comma-separated t values (default 1,3,5)");

  CLI::App* occlude = app.add_subcommand("occlude", "crop-occlusion sensitivity");
  add_common_flags(occlude, occlude_args);
  occlude->add_option("--data", occlude_data, "dataset directory or CSV")->required();
  occlude->add_option("--crops", occlude_crops,
                      "comma-separated crops to occlude ('none' = self check)")
      ->required();

  CLI::App* report = app.add_subcommand("report", "summarize artifacts in --out");
  add_common_flags(report, report_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2; // help/version exit 0, usage problems exit 2
  }

  try {
    if (synth->parsed()) cmd_synth(synth_args);
    if (ingest->parsed()) cmd_ingest(ingest_args, ingest_input);
    if (train_cmd->parsed()) cmd_train(train_args, train_data);
    if (explain->parsed()) {
      cmd_explain(explain_args, explain_data, explain_ckpt, explain_top_t,
                  explain_top_parcels);
    }
    if (ablate->parsed()) cmd_ablate(ablate_args, ablate_data, ablate_t);
    if (occlude->parsed()) cmd_occlude(occlude_args, occlude_data, occlude_crops);
    if (report->parsed()) cmd_report(report_args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#include "cropattn/csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "cropattn/date.hpp"
#include "cropattn/errors.hpp"
#include "cropattn/kvconfig.hpp"
#include "cropattn/rng.hpp"

namespace cropattn {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_number(const std::string& s, const std::string& what, size_t line_no) {
  const char* begin = s.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || !std::isfinite(v)) {
    throw ParseError("line " + std::to_string(line_no) + ": bad " + what +
                     " value '" + s + "'");
  }
  return v;
}

std::string format_number(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void check_field_writable(const std::string& s, const std::string& what) {
  if (s.find_first_of(",\"\r\n") != std::string::npos) {
    throw ParseError(what + " '" + s + "' contains CSV delimiter characters");
  }
}

} // namespace

std::vector<Date> collect_date_axis(const std::vector<ParcelSeries>& parcels) {
  std::vector<Date> axis;
  for (const auto& p : parcels) {
    for (const auto& obs : p.observations) axis.push_back(obs.date);
  }
  std::sort(axis.begin(), axis.end());
  axis.erase(std::unique(axis.begin(), axis.end()), axis.end());
  return axis;
}

Dataset load_dataset(const std::string& path, const CsvSchema& schema) {
  if (schema.band_columns.empty()) {
    throw InvalidConfig("schema has no band columns");
  }
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  if (!(schema.reflectance_divisor > 0.0) ||
      !std::isfinite(schema.reflectance_divisor)) {
    throw InvalidConfig("reflectance divisor must be finite and positive");
  }

  std::string line;
  if (!std::getline(in, line)) throw EmptyDataset("'" + path + "' is empty");
  const std::vector<std::string> header = split_fields(line);
  std::unordered_map<std::string, size_t> col_of;
  for (size_t i = 0; i < header.size(); ++i) col_of.emplace(trim(header[i]), i);

  auto require_col = [&](const std::string& name) {
    auto it = col_of.find(name);
    if (it == col_of.end()) {
      throw SchemaError("column '" + name + "' missing from '" + path + "'");
    }
    return it->second;
  };
  const size_t id_col = require_col(schema.parcel_id_column);
  const size_t date_col = require_col(schema.date_column);
  const size_t crop_col = require_col(schema.crop_column);
  std::vector<size_t> band_cols;
  band_cols.reserve(schema.band_columns.size());
  for (const auto& name : schema.band_columns) band_cols.push_back(require_col(name));
  if (band_cols.size() != kNumBands) {
    throw SchemaError("expected " + std::to_string(kNumBands) +
                      " band columns, schema lists " +
                      std::to_string(band_cols.size()));
  }

  Dataset ds;
  std::unordered_map<std::string, size_t> parcel_index;
  std::unordered_map<std::string, int> crop_index;

  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_fields(line);
    if (fields.size() < header.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    }
    const std::string id = trim(fields[id_col]);
    const std::string crop = trim(fields[crop_col]);
    if (id.empty()) {
      throw ParseError("line " + std::to_string(line_no) + ": empty parcel id");
    }
    if (crop.empty()) {
      throw ParseError("line " + std::to_string(line_no) + ": empty crop label");
    }

    Observation obs;
    obs.date = parse_iso_date(trim(fields[date_col]));
    for (int b = 0; b < kNumBands; ++b) {
      obs.bands[b] = parse_number(trim(fields[band_cols[b]]),
                                  schema.band_columns[b], line_no) /
                     schema.reflectance_divisor;
    }

    auto [it, inserted] = parcel_index.emplace(id, ds.parcels.size());
    if (inserted) {
      ParcelSeries p;
      p.parcel_id = id;
      p.crop = crop;
      ds.parcels.push_back(std::move(p));
    } else if (ds.parcels[it->second].crop != crop) {
      throw ParseError("line " + std::to_string(line_no) + ": parcel '" + id +
                       "' labeled both '" + ds.parcels[it->second].crop +
                       "' and '" + crop + "'");
    }
    ds.parcels[it->second].observations.push_back(obs);

    if (crop_index.emplace(crop, static_cast<int>(ds.class_vocabulary.size())).second) {
      ds.class_vocabulary.push_back(crop);
    }
  }
  if (ds.parcels.empty()) throw EmptyDataset("'" + path + "' has no data rows");

  for (auto& p : ds.parcels) {
    std::stable_sort(p.observations.begin(), p.observations.end(),
                     [](const Observation& a, const Observation& b) {
                       return a.date < b.date;
                     });
    for (size_t i = 1; i < p.observations.size(); ++i) {
      if (p.observations[i].date == p.observations[i - 1].date) {
        throw ParseError("parcel '" + p.parcel_id + "' has duplicate date " +
                         to_iso_string(p.observations[i].date));
      }
    }
  }
  ds.date_axis = collect_date_axis(ds.parcels);
  return ds;
}

Splits make_stratified_splits(const Dataset& dataset, double train_frac,
                              double validation_frac, double test_frac,
                              std::uint64_t seed) {
  for (double f : {train_frac, validation_frac, test_frac}) {
    if (!(f >= 0.0) || !(f <= 1.0)) {
      throw InvalidConfig("split fractions must be in [0, 1]");
    }
  }
  const double total = train_frac + validation_frac + test_frac;
  if (total > 1.0 + 1e-9) {
    throw InvalidConfig("split fractions sum to more than 1");
  }

  // Group parcel indices by class, in vocabulary order.
  std::vector<std::vector<size_t>> by_class(dataset.class_vocabulary.size());
  for (size_t i = 0; i < dataset.parcels.size(); ++i) {
    by_class[static_cast<size_t>(dataset.class_index(dataset.parcels[i].crop))]
        .push_back(i);
  }

  Rng rng(seed);
  Splits splits;
  const bool exhaustive = total >= 1.0 - 1e-9;
  for (auto& group : by_class) {
    rng.shuffle(group);
    const size_t n = group.size();
    const size_t n_train = static_cast<size_t>(std::floor(train_frac * static_cast<double>(n) + 1e-9));
    const size_t n_val = static_cast<size_t>(std::floor(validation_frac * static_cast<double>(n) + 1e-9));
    size_t n_test =
        exhaustive ? n - n_train - n_val
                   : static_cast<size_t>(std::floor(test_frac * static_cast<double>(n) + 1e-9));
    size_t k = 0;
    for (size_t i = 0; i < n_train && k < n; ++i) splits.train.push_back(group[k++]);
    for (size_t i = 0; i < n_val && k < n; ++i) splits.validation.push_back(group[k++]);
    for (size_t i = 0; i < n_test && k < n; ++i) splits.test.push_back(group[k++]);
  }
  std::sort(splits.train.begin(), splits.train.end());
  std::sort(splits.validation.begin(), splits.validation.end());
  std::sort(splits.test.begin(), splits.test.end());
  return splits;
}

Splits load_split_file(const Dataset& dataset, const std::string& path) {
  const KeyValueConfig cfg = KeyValueConfig::parse_file(path);
  std::unordered_map<std::string, size_t> index;
  for (size_t i = 0; i < dataset.parcels.size(); ++i) {
    index.emplace(dataset.parcels[i].parcel_id, i);
  }
  Splits splits;
  for (const auto& key : cfg.keys()) {
    auto it = index.find(key);
    if (it == index.end()) {
      throw InvalidConfig("split file names unknown parcel '" + key + "'");
    }
    const std::string where = cfg.get(key);
    if (where == "train") {
      splits.train.push_back(it->second);
    } else if (where == "validation") {
      splits.validation.push_back(it->second);
    } else if (where == "test") {
      splits.test.push_back(it->second);
    } else {
      throw InvalidConfig("split for parcel '" + key + "' must be train, "
                          "validation or test, got '" + where + "'");
    }
  }
  std::sort(splits.train.begin(), splits.train.end());
  std::sort(splits.validation.begin(), splits.validation.end());
  std::sort(splits.test.begin(), splits.test.end());
  return splits;
}

std::string meta_path_for(const std::string& csv_path) {
  const std::string suffix = ".csv";
  if (csv_path.size() > suffix.size() &&
      csv_path.compare(csv_path.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return csv_path.substr(0, csv_path.size() - suffix.size()) + ".meta.json";
  }
  return csv_path + ".meta.json";
}

void save_canonical_dataset(const Dataset& dataset, const std::string& csv_path) {
  if (dataset.parcels.empty()) throw EmptyDataset("refusing to save empty dataset");

  std::ofstream out(csv_path);
  if (!out) throw Error("cannot open '" + csv_path + "' for writing");
  out << "parcel_id,date";
  for (int b = 1; b <= kNumBands; ++b) out << ",b" << b;
  out << ",crop\n";
  for (const auto& p : dataset.parcels) {
    check_field_writable(p.parcel_id, "parcel id");
    check_field_writable(p.crop, "crop label");
    for (const auto& obs : p.observations) {
      out << p.parcel_id << ',' << to_iso_string(obs.date);
      for (int b = 0; b < kNumBands; ++b) out << ',' << format_number(obs.bands[b]);
      out << ',' << p.crop << '\n';
    }
  }
  if (!out) throw Error("write to '" + csv_path + "' failed");
  out.close();

  nlohmann::ordered_json meta;
  meta["format"] = "cropattn-dataset";
  meta["version"] = 1;
  meta["reflectance_divisor"] = 1.0; // values in the CSV are already normalized
  meta["num_parcels"] = dataset.parcels.size();
  size_t num_obs = 0;
  for (const auto& p : dataset.parcels) num_obs += p.observations.size();
  meta["num_observations"] = num_obs;
  meta["class_vocabulary"] = dataset.class_vocabulary;
  auto ids_of = [&](const std::vector<size_t>& idx) {
    std::vector<std::string> ids;
    ids.reserve(idx.size());
    for (size_t i : idx) ids.push_back(dataset.parcels.at(i).parcel_id);
    return ids;
  };
  meta["splits"]["train"] = ids_of(dataset.splits.train);
  meta["splits"]["validation"] = ids_of(dataset.splits.validation);
  meta["splits"]["test"] = ids_of(dataset.splits.test);
  std::vector<std::string> axis;
  axis.reserve(dataset.date_axis.size());
  for (const auto& d : dataset.date_axis) axis.push_back(to_iso_string(d));
  meta["date_axis"] = axis;

  const std::string meta_path = meta_path_for(csv_path);
  std::ofstream mout(meta_path);
  if (!mout) throw Error("cannot open '" + meta_path + "' for writing");
  mout << meta.dump(2) << '\n';
  if (!mout) throw Error("write to '" + meta_path + "' failed");
}

Dataset load_canonical_dataset(const std::string& csv_path) {
  CsvSchema schema;
  schema.reflectance_divisor = 1.0;
  Dataset ds = load_dataset(csv_path, schema);

  const std::string meta_path = meta_path_for(csv_path);
  std::ifstream min(meta_path);
  if (!min) throw Error("cannot open '" + meta_path + "' for reading");
  nlohmann::json meta;
  try {
    min >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("'" + meta_path + "': " + e.what());
  }
  if (meta.value("format", "") != "cropattn-dataset") {
    throw SchemaError("'" + meta_path + "' is not a dataset sidecar");
  }

  // Vocabulary order from the sidecar is canonical; it must cover every crop
  // present in the CSV.
  std::vector<std::string> vocab = meta.at("class_vocabulary").get<std::vector<std::string>>();
  std::unordered_map<std::string, int> vocab_index;
  for (size_t i = 0; i < vocab.size(); ++i) vocab_index.emplace(vocab[i], static_cast<int>(i));
  for (const auto& p : ds.parcels) {
    if (!vocab_index.count(p.crop)) {
      throw UnknownCrop("crop '" + p.crop + "' missing from sidecar vocabulary");
    }
  }
  ds.class_vocabulary = std::move(vocab);

  std::unordered_map<std::string, size_t> parcel_of;
  for (size_t i = 0; i < ds.parcels.size(); ++i) parcel_of.emplace(ds.parcels[i].parcel_id, i);
  auto indices_of = [&](const char* name) {
    std::vector<size_t> idx;
    if (!meta.contains("splits") || !meta["splits"].contains(name)) return idx;
    for (const auto& id : meta["splits"][name]) {
      auto it = parcel_of.find(id.get<std::string>());
      if (it == parcel_of.end()) {
        throw ParcelMismatch("sidecar '" + meta_path + "' assigns parcel '" +
                             id.get<std::string>() + "' absent from the CSV");
      }
      idx.push_back(it->second);
    }
    std::sort(idx.begin(), idx.end());
    return idx;
  };
  ds.splits.train = indices_of("train");
  ds.splits.validation = indices_of("validation");
  ds.splits.test = indices_of("test");
  return ds;
}

} // namespace cropattn

#include "dfl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "dfl/errors.hpp"
#include "dfl/rng.hpp"

namespace dfl {

void Dataset::validate() const {
  if (features.rows() != labels.size() || features.rows() != sensitive.size())
    throw DimensionError("dataset: feature/label/sensitive lengths differ");
  if (features.rows() < 2) throw SchemaError("dataset: fewer than 2 rows");
  if (!features.allFinite() || !labels.allFinite() || !sensitive.allFinite())
    throw SchemaError("dataset: non-finite value");
  for (Eigen::Index i = 0; i < sensitive.size(); ++i)
    if (sensitive[i] != 0.0 && sensitive[i] != 1.0)
      throw SchemaError("dataset: sensitive attribute not in {0,1}");
}

CsvSchema community_crime_schema() {
  CsvSchema s;
  s.name = "community-crime";
  s.label_column = "ViolentCrimesPerPop";
  s.sensitive_column = "racepctblack";
  s.drop_columns = {"state", "county", "community", "communityname", "fold"};
  // Minority community: African-American resident fraction above one half.
  s.sensitive_rule = ColumnRule::greater_than;
  s.sensitive_threshold = 0.5;
  // Crime rate is continuous; classify high-vs-low at the median.
  s.label_rule = ColumnRule::above_median;
  return s;
}

CsvSchema compas_schema() {
  CsvSchema s;
  s.name = "compas";
  s.label_column = "Two_yr_Recidivism";
  s.sensitive_column = "African_American";
  s.sensitive_rule = ColumnRule::binary;
  s.label_rule = ColumnRule::binary;
  return s;
}

CsvSchema credit_card_schema() {
  CsvSchema s;
  s.name = "credit-card";
  s.label_column = "default payment next month";
  s.sensitive_column = "EDUCATION";
  s.drop_columns = {"ID"};
  // Higher education (graduate school = 1 or university = 2) vs the rest.
  s.sensitive_rule = ColumnRule::less_than;
  s.sensitive_threshold = 2.5;
  s.label_rule = ColumnRule::binary;
  return s;
}

CsvSchema schema_by_name(const std::string& name) {
  if (name == "community-crime") return community_crime_schema();
  if (name == "compas") return compas_schema();
  if (name == "credit-card") return credit_card_schema();
  throw SchemaError("unknown schema preset: " + name);
}

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\"");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\"");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(trim(cur));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

// Missing markers commonly used in the reference datasets.
bool is_missing(const std::string& f) {
  return f.empty() || f == "?" || f == "NA" || f == "nan" || f == "NaN";
}

bool parse_number(const std::string& f, double& out) {
  if (is_missing(f)) return false;
  char* end = nullptr;
  out = std::strtod(f.c_str(), &end);
  if (end == f.c_str() || *end != '\0') return false;
  return std::isfinite(out);
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double apply_rule(double raw, ColumnRule rule, double threshold,
                  const char* what) {
  switch (rule) {
    case ColumnRule::binary:
      if (raw != 0.0 && raw != 1.0)
        throw SchemaError(std::string(what) + " value " + std::to_string(raw) +
                          " is not 0/1");
      return raw;
    case ColumnRule::greater_than:
      return raw > threshold ? 1.0 : 0.0;
    case ColumnRule::less_than:
      return raw < threshold ? 1.0 : 0.0;
    case ColumnRule::as_is:
      return raw;
    case ColumnRule::above_median:
      throw SchemaError("median rule resolved separately");  // handled below
  }
  throw SchemaError("unhandled column rule");
}

}  // namespace

LoadReport load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty file", 1);
  const auto header = split_fields(line);
  std::unordered_map<std::string, size_t> col;
  for (size_t i = 0; i < header.size(); ++i) {
    if (col.count(header[i]))
      throw SchemaError("duplicate column name: " + header[i]);
    col[header[i]] = i;
  }

  auto require = [&](const std::string& name) {
    auto it = col.find(name);
    if (it == col.end()) throw SchemaError("column not found: " + name);
    return it->second;
  };
  const size_t label_idx = require(schema.label_column);
  const size_t sens_idx = require(schema.sensitive_column);

  std::vector<size_t> feat_idx;
  std::vector<std::string> feat_names;
  if (!schema.feature_columns.empty()) {
    for (const auto& name : schema.feature_columns) {
      feat_idx.push_back(require(name));
      feat_names.push_back(name);
    }
  } else {
    for (size_t i = 0; i < header.size(); ++i) {
      if (i == label_idx || i == sens_idx) continue;
      if (std::find(schema.drop_columns.begin(), schema.drop_columns.end(),
                    header[i]) != schema.drop_columns.end())
        continue;
      feat_idx.push_back(i);
      feat_names.push_back(header[i]);
    }
  }
  if (feat_idx.empty()) throw SchemaError("schema selects no feature columns");

  std::vector<std::vector<double>> rows;
  std::vector<double> raw_labels, raw_sens;
  std::size_t dropped = 0;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) +
                           " fields, got " + std::to_string(fields.size()),
                       lineno);
    std::vector<double> feats(feat_idx.size());
    double lab = 0, sen = 0;
    bool ok = parse_number(fields[label_idx], lab) &&
              parse_number(fields[sens_idx], sen);
    for (size_t j = 0; ok && j < feat_idx.size(); ++j)
      ok = parse_number(fields[feat_idx[j]], feats[j]);
    if (!ok) {
      ++dropped;
      continue;
    }
    rows.push_back(std::move(feats));
    raw_labels.push_back(lab);
    raw_sens.push_back(sen);
  }
  if (rows.size() < 2)
    throw SchemaError("fewer than 2 usable rows after cleaning");

  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index p = static_cast<Eigen::Index>(feat_idx.size());
  Dataset ds;
  ds.features.resize(n, p);
  ds.labels.resize(n);
  ds.sensitive.resize(n);
  ds.feature_names = feat_names;
  const double label_med = schema.label_rule == ColumnRule::above_median
                               ? median_of(raw_labels)
                               : 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j)
      ds.features(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
    ds.sensitive[i] =
        apply_rule(raw_sens[static_cast<size_t>(i)], schema.sensitive_rule,
                   schema.sensitive_threshold, "sensitive");
    if (schema.label_rule == ColumnRule::above_median)
      ds.labels[i] = raw_labels[static_cast<size_t>(i)] > label_med ? 1.0 : 0.0;
    else
      ds.labels[i] = apply_rule(raw_labels[static_cast<size_t>(i)],
                                schema.label_rule, schema.label_threshold,
                                "label");
  }
  ds.validate();
  return {std::move(ds), dropped};
}

SplitIndices split(Eigen::Index n, double frac, uint64_t seed, int trial_id) {
  if (frac <= 0.0 || frac >= 1.0) throw SplitError("split fraction not in (0,1)");
  const auto n_train = static_cast<Eigen::Index>(
      std::llround(frac * static_cast<double>(n)));
  if (n_train < 1 || n - n_train < 1)
    throw SplitError("split leaves an empty side (n=" + std::to_string(n) +
                     ", frac=" + std::to_string(frac) + ")");
  std::vector<Eigen::Index> perm(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
  rng::Stream stream(seed, "split");
  stream.shuffle(perm);
  SplitIndices out;
  out.train.assign(perm.begin(), perm.begin() + n_train);
  out.test.assign(perm.begin() + n_train, perm.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  out.seed = seed;
  out.trial_id = trial_id;
  return out;
}

std::string write_split(const std::string& dir, const SplitIndices& split) {
  std::filesystem::create_directories(dir);
  const std::string path = dir + "/trial_" + std::to_string(split.trial_id) +
                           "_seed_" + std::to_string(split.seed) + ".idx";
  std::ofstream out(path, std::ios::binary);  // binary: stable newlines
  if (!out) throw Error("cannot write " + path);
  for (auto i : split.train) out << i << "\n";
  if (!out) throw Error("write failed: " + path);
  return path;
}

std::vector<Eigen::Index> read_split_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::vector<Eigen::Index> out;
  long long v = 0;
  while (in >> v) out.push_back(static_cast<Eigen::Index>(v));
  if (!in.eof()) throw ParseError("non-integer content in " + path, 0);
  return out;
}

StandardizeResult standardize(const Dataset& ds,
                              const std::vector<Eigen::Index>& train) {
  if (train.empty()) throw DimensionError("standardize: empty train set");
  const Eigen::Index p = ds.p();
  Eigen::MatrixXd tr(static_cast<Eigen::Index>(train.size()), p);
  for (size_t i = 0; i < train.size(); ++i) tr.row(static_cast<Eigen::Index>(i)) = ds.features.row(train[i]);

  StandardizeStats st;
  st.mean = tr.colwise().mean();
  st.scale.resize(p);
  const double n = static_cast<double>(tr.rows());
  for (Eigen::Index j = 0; j < p; ++j) {
    const double var = (tr.col(j).array() - st.mean[j]).square().sum() / n;
    st.scale[j] = var > 0.0 ? std::sqrt(var) : 1.0;
  }

  StandardizeResult out;
  out.dataset = ds;
  out.dataset.features = apply_standardize(ds.features, st);
  out.stats = std::move(st);
  return out;
}

Eigen::MatrixXd apply_standardize(const Eigen::MatrixXd& x,
                                  const StandardizeStats& stats) {
  if (x.cols() != stats.mean.size())
    throw DimensionError("apply_standardize: column count mismatch");
  return (x.rowwise() - stats.mean.transpose()).array().rowwise() /
         stats.scale.transpose().array();
}

Dataset synth_biased(Eigen::Index n, Eigen::Index p, double bias,
                     uint64_t seed) {
  if (n < 10 || p < 1) throw DimensionError("synth_biased: n >= 10, p >= 1");
  if (bias < 0.0 || bias > 1.0)
    throw Error("synth_biased: bias must lie in [0,1]");
  rng::Stream s_stream(seed, "synth/s");
  rng::Stream x_stream(seed, "synth/x");
  rng::Stream y_stream(seed, "synth/noise");

  const double u = 1.0 / std::sqrt(static_cast<double>(p));  // direction 1/sqrt(p)
  Dataset ds;
  ds.features.resize(n, p);
  ds.labels.resize(n);
  ds.sensitive.resize(n);
  ds.feature_names.reserve(static_cast<size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j)
    ds.feature_names.push_back("synth_" + std::to_string(j));

  for (Eigen::Index i = 0; i < n; ++i) {
    const double si = s_stream.uniform() < 0.5 ? 0.0 : 1.0;
    ds.sensitive[i] = si;
    double proj = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double xj = x_stream.gaussian() + bias * si * u;
      ds.features(i, j) = xj;
      proj += xj * u;
    }
    const double noise = 0.3 * y_stream.gaussian();
    ds.labels[i] = proj + noise > 0.5 * bias ? 1.0 : 0.0;
  }
  ds.validate();
  return ds;
}

}  // namespace dfl

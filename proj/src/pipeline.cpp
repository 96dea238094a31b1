#include "creditx/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace creditx::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Keys that change where or how fast a run happens but not its numbers.
const std::set<std::string> kUnhashedKeys{"output.dir", "runtime.workers"};

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
  for (const auto& [k, v] : j.items()) {
    const std::string key = prefix.empty() ? k : prefix + "." + k;
    if (v.is_object()) flatten(v, key, out);
    else out.emplace_back(key, v);
  }
}

template <class T>
T get_as(const std::string& key, const json& v) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has a value of the wrong type");
  }
}

json sanity_json(const ingest::SanityReport& s) {
  auto cents = [](const std::optional<Cents>& c) { return c ? json(c->units()) : json(nullptr); };
  return {{"accounts", s.accounts},
          {"labeled", s.labeled},
          {"good", s.good},
          {"bad", s.bad},
          {"good_fraction", s.good_fraction},
          {"bad_fraction", s.bad_fraction},
          {"min_balance", cents(s.min_balance)},
          {"max_balance", cents(s.max_balance)},
          {"min_amount", cents(s.min_amount)},
          {"max_amount", cents(s.max_amount)},
          {"warnings", s.warnings}};
}

bool is_tree_family(models::Family f) {
  return f == models::Family::random_forest || f == models::Family::gradient_boosting ||
         f == models::Family::oblivious_boosting;
}

// Rethrows the active exception with the stage name prepended, keeping its category.
[[noreturn]] void rethrow_in(const std::string& stage) {
  try {
    throw;
  } catch (const ConfigError& e) {
    throw ConfigError(stage + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(stage + ": " + e.what());
  } catch (const ComputeError& e) {
    throw ComputeError(stage + ": " + e.what());
  } catch (const std::exception& e) {
    throw ComputeError(stage + ": " + e.what());
  }
}

}  // namespace

bool compatible(models::Family family, resampling::Kind kind) {
  if (kind == resampling::Kind::class_weight_sqrt_balanced) return family == models::Family::oblivious_boosting;
  if (kind == resampling::Kind::class_weight_proportional) return models::accepts_class_weights(family);
  return true;
}

// ------------------------------------------------------------------ config

PipelineConfig PipelineConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  PipelineConfig c;
  std::vector<std::pair<std::string, json>> flat;
  flatten(j, "", flat);
  for (const auto& [k, v] : flat) c.set(k, v);
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

void PipelineConfig::set(const std::string& key, const json& v) {
  auto strings = [&](const json& value) {
    if (!value.is_array()) throw ConfigError("config key '" + key + "' expects a list");
    return get_as<std::vector<std::string>>(key, value);
  };
  if (key == "seed") seed = get_as<std::uint64_t>(key, v);
  else if (key == "data.dir") data_dir = get_as<std::string>(key, v);
  else if (key == "output.dir") out_dir = get_as<std::string>(key, v);
  else if (key == "features.drop_inactive") drop_inactive = get_as<bool>(key, v);
  else if (key == "selection.correlation_threshold") correlation_threshold = get_as<double>(key, v);
  else if (key == "selection.missing_threshold") missing_threshold = get_as<double>(key, v);
  else if (key == "selection.zero_as_missing") zero_as_missing = get_as<bool>(key, v);
  else if (key == "selection.top_k") top_k = get_as<std::size_t>(key, v);
  else if (key == "resampling.strategy") resampling = resampling::parse_kind(get_as<std::string>(key, v));
  else if (key == "resampling.k_neighbors") k_neighbors = get_as<std::size_t>(key, v);
  else if (key == "model.family") family = models::parse_family(get_as<std::string>(key, v));
  else if (key == "model.feature_set") feature_set = get_as<std::string>(key, v);
  else if (key == "model.seed") throw ConfigError("model seeds derive from the top-level 'seed'");
  else if (key.rfind("model.", 0) == 0) {
    json t = train.to_json();
    t[key.substr(6)] = v;
    train = models::TrainConfig::from_json(t);
  } else if (key == "cv.folds") cv_folds = get_as<std::size_t>(key, v);
  else if (key == "split.train_fraction") train_fraction = get_as<double>(key, v);
  else if (key == "grid.models") {
    grid.models.clear();
    for (const auto& s : strings(v)) grid.models.push_back(models::parse_family(s));
  } else if (key == "grid.resamplers") {
    grid.resamplers.clear();
    for (const auto& s : strings(v)) grid.resamplers.push_back(resampling::parse_kind(s));
  } else if (key == "grid.feature_sets") grid.feature_sets = strings(v);
  else if (key == "runtime.workers") workers = get_as<std::size_t>(key, v);
  else if (key == "explain.row") explain_row = get_as<std::string>(key, v);
  else if (key == "explain.dependence_feature") dependence_feature = get_as<std::string>(key, v);
  else if (key == "explain.color_feature") color_feature = get_as<std::string>(key, v);
  else throw ConfigError("unknown config key '" + key + "'");
}

void PipelineConfig::set_assignment(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("expected key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json v = json::parse(text, nullptr, false);
  if (v.is_discarded()) v = text;
  set(key, v);
}

void PipelineConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(seed.has_value(), "a seed is required (config 'seed' or --seed)");
  require(!data_dir.empty(), "no input directory given (config 'data.dir' or --data)");
  require(correlation_threshold > 0.0 && correlation_threshold <= 1.0, "selection.correlation_threshold must lie in (0, 1]");
  require(missing_threshold >= 0.0 && missing_threshold <= 1.0, "selection.missing_threshold must lie in [0, 1]");
  require(top_k >= 1, "selection.top_k must be >= 1");
  require(k_neighbors >= 1, "resampling.k_neighbors must be >= 1");
  require(feature_set == "full" || feature_set == "top", "model.feature_set must be 'full' or 'top'");
  require(cv_folds >= 2, "cv.folds must be >= 2");
  require(train_fraction > 0.0 && train_fraction < 1.0, "split.train_fraction must lie in (0, 1)");
  require(compatible(family, resampling),
          "resampling '" + resampling::label(resampling) + "' does not apply to " + models::label(family));
  require(!grid.models.empty() && !grid.resamplers.empty() && !grid.feature_sets.empty(), "grid lists must not be empty");
  for (const auto& f : grid.feature_sets) require(f == "full" || f == "top", "grid feature sets are 'full' and 'top'");
  train.validate();
}

std::uint64_t PipelineConfig::seed_value() const {
  if (!seed) throw ConfigError("a seed is required (config 'seed' or --seed)");
  return *seed;
}

json PipelineConfig::to_json() const {
  json j = json::object();
  j["seed"] = seed ? json(*seed) : json(nullptr);
  j["data.dir"] = data_dir;
  j["output.dir"] = out_dir;
  j["features.drop_inactive"] = drop_inactive;
  j["selection.correlation_threshold"] = correlation_threshold;
  j["selection.missing_threshold"] = missing_threshold;
  j["selection.zero_as_missing"] = zero_as_missing;
  j["selection.top_k"] = top_k;
  j["resampling.strategy"] = resampling::label(resampling);
  j["resampling.k_neighbors"] = k_neighbors;
  j["model.family"] = models::label(family);
  j["model.feature_set"] = feature_set;
  const json trained = train.to_json();
  for (const auto& [k, v] : trained.items())
    if (k != "seed") j["model." + k] = v;
  j["cv.folds"] = cv_folds;
  j["split.train_fraction"] = train_fraction;
  json gm = json::array(), gr = json::array();
  for (auto f : grid.models) gm.push_back(models::label(f));
  for (auto r : grid.resamplers) gr.push_back(resampling::label(r));
  j["grid.models"] = gm;
  j["grid.resamplers"] = gr;
  j["grid.feature_sets"] = grid.feature_sets;
  j["runtime.workers"] = workers;
  j["explain.row"] = explain_row;
  j["explain.dependence_feature"] = dependence_feature;
  j["explain.color_feature"] = color_feature;
  return j;
}

std::string PipelineConfig::hash() const {
  json j = to_json();
  for (const auto& k : kUnhashedKeys) j.erase(k);
  return hex64(fnv1a(j.dump()));
}

json provenance(const PipelineConfig& config) {
  return {{"config_hash", config.hash()}, {"seed", config.seed ? json(*config.seed) : json(nullptr)}};
}

// ------------------------------------------------------------------ stages

features::FeatureMatrix featurize(const ingest::LedgerBundle& bundle, const PipelineConfig& config) {
  auto m = features::build_feature_matrix(bundle);
  return config.drop_inactive ? features::drop_inactive_accounts(m) : m;
}

SelectionStage select_features(const features::FeatureMatrix& matrix, const PipelineConfig& config) {
  SelectionStage s;
  auto [m1, report] = selection::drop_constant(matrix);
  auto [m2, r2] = selection::prune_missing(m1, config.zero_as_missing, config.missing_threshold);
  report.chain(r2);
  auto [m3, r3] = selection::correlation_prune(m2, config.correlation_threshold);
  report.chain(r3);
  if (m3.cols() == 0) throw DataError("every feature was pruned");

  const auto data = Dataset::from_matrix(m3);
  auto bench = config.train;
  bench.seed = derive_seed(config.seed_value(), "benchmark");
  const auto ensemble = models::fit_oblivious_boosting(data, bench);
  s.importance = explain::global_importance(ensemble, data.x);
  if (config.top_k > m3.cols())
    throw ConfigError("selection.top_k = " + std::to_string(config.top_k) + " exceeds the " +
                      std::to_string(m3.cols()) + " surviving features");
  auto [m4, r4] = selection::select_top_k_by_shap(m3, s.importance.importance, config.top_k);
  report.chain(r4);
  s.report = std::move(report);
  s.full = std::move(m3);
  s.top = std::move(m4);
  return s;
}

const features::FeatureMatrix& feature_set(const SelectionStage& s, const std::string& name) {
  if (name == "full") return s.full;
  if (name == "top") return s.top;
  throw ConfigError("unknown feature set '" + name + "'");
}

std::string feature_set_label(const SelectionStage& s, const std::string& name) {
  return name + "_" + std::to_string(feature_set(s, name).cols());
}

// -------------------------------------------------------------------- grid

std::string format_cell(double mean, double std) { return fixed(mean, 2) + " (" + fixed(std, 2) + ")"; }

GridReport run_grid(const GridSpec& grid, const SelectionStage& selected, const models::TrainConfig& train,
                    std::size_t k, std::size_t k_neighbors, std::uint64_t seed, std::size_t workers) {
  GridReport report;
  for (auto m : grid.models)
    for (auto r : grid.resamplers)
      for (const auto& f : grid.feature_sets) {
        if (!compatible(m, r)) continue;
        GridRow row;
        row.model = models::label(m);
        row.resampling = resampling::label(r);
        row.feature_set = feature_set_label(selected, f);
        row.label = row.model + "/" + row.resampling + "/" + f;
        report.rows.push_back(std::move(row));
      }
  std::map<std::string, Dataset> data;
  for (const auto& f : grid.feature_sets)
    if (!data.count(f)) data.emplace(f, Dataset::from_matrix(feature_set(selected, f)));

  parallel_for(report.rows.size(), [&](std::size_t i) {
    auto& row = report.rows[i];
    const std::string set_name = row.label.substr(row.label.rfind('/') + 1);
    const std::uint64_t cell_seed = derive_seed(seed, row.label);
    evaluation::ModelSpec spec{models::parse_family(row.model), train};
    resampling::ResamplingStrategy strategy{resampling::parse_kind(row.resampling), k_neighbors, 0};
    try {
      row.result = evaluation::cross_validate(spec, strategy, data.at(set_name), k, cell_seed, row.feature_set);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  }, workers);
  return report;
}

std::string GridReport::csv() const {
  std::size_t folds = 0;
  for (const auto& r : rows)
    if (r.result) folds = std::max(folds, r.result->folds.size());
  std::ostringstream os;
  os << "model,resampling,feature_set,mean_gini,std_gini,cell";
  for (std::size_t f = 0; f < folds; ++f) os << ",fold_" << f + 1;
  os << ",error\n";
  for (const auto& r : rows) {
    os << r.model << ',' << r.resampling << ',' << r.feature_set << ',';
    if (r.result) {
      os << fixed(r.result->mean, 6) << ',' << fixed(r.result->std, 6) << ",\"" << format_cell(r.result->mean, r.result->std)
         << '"';
      for (std::size_t f = 0; f < folds; ++f) os << ',' << (f < r.result->folds.size() ? fixed(r.result->folds[f], 6) : "");
      os << ",\n";
    } else {
      os << ",,error";
      for (std::size_t f = 0; f < folds; ++f) os << ',';
      std::string msg = r.error;
      std::replace(msg.begin(), msg.end(), '"', '\'');
      os << ",\"" << msg << "\"\n";
    }
  }
  return os.str();
}

std::string GridReport::text() const {
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::string>> lines;
  std::map<std::tuple<std::string, std::string, std::string>, std::string> cell;
  for (const auto& r : rows) {
    if (std::find(sets.begin(), sets.end(), r.feature_set) == sets.end()) sets.push_back(r.feature_set);
    const auto key = std::make_pair(r.model, r.resampling);
    if (std::find(lines.begin(), lines.end(), key) == lines.end()) lines.push_back(key);
    cell[{r.model, r.resampling, r.feature_set}] = r.result ? format_cell(r.result->mean, r.result->std) : "error";
  }
  auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(w, s.size()), ' ');
    return s;
  };
  std::ostringstream os;
  os << pad("model", 20) << pad("resampling", 18);
  for (const auto& s : sets) os << pad(s, 14);
  os << "\n";
  for (const auto& [m, r] : lines) {
    os << pad(m, 20) << pad(r, 18);
    for (const auto& s : sets) {
      auto it = cell.find({m, r, s});
      os << pad(it == cell.end() ? "-" : it->second, 14);
    }
    os << "\n";
  }
  os << "Gini mean over folds; sample standard deviation in parentheses.\n";
  return os.str();
}

json GridReport::to_json() const {
  json cells = json::array();
  for (const auto& r : rows) {
    json c{{"model", r.model}, {"resampling", r.resampling}, {"feature_set", r.feature_set}, {"label", r.label}};
    if (r.result) {
      c["folds"] = r.result->folds;
      c["mean"] = r.result->mean;
      c["std"] = r.result->std;
      c["cell"] = format_cell(r.result->mean, r.result->std);
      c["notes"] = r.result->notes;
    } else {
      c["error"] = r.error;
    }
    cells.push_back(std::move(c));
  }
  return {{"cells", cells}};
}

// ---------------------------------------------------------------- accounts

std::string label(Outcome o) {
  switch (o) {
    case Outcome::true_positive: return "true positive";
    case Outcome::true_negative: return "true negative";
    case Outcome::false_positive: return "false positive";
    case Outcome::false_negative: return "false negative";
  }
  return "?";
}

Outcome outcome_of(double probability, int y, double threshold) {
  const int predicted = models::classify(probability, threshold);
  if (predicted == 1) return y == 1 ? Outcome::true_positive : Outcome::false_positive;
  return y == 1 ? Outcome::false_negative : Outcome::true_negative;
}

AccountExplanation explain_account(const models::TreeEnsemble& model, const features::FeatureMatrix& matrix,
                                   const std::string& row_id) {
  const auto it = std::find(matrix.row_ids.begin(), matrix.row_ids.end(), row_id);
  if (it == matrix.row_ids.end()) throw DataError("unknown row id '" + row_id + "'");
  const auto r = static_cast<std::size_t>(it - matrix.row_ids.begin());
  AccountExplanation a;
  a.row_id = row_id;
  a.label = matrix.labels[r];
  a.probability = model.probability(matrix.values.row(r));
  a.outcome = outcome_of(a.probability, a.label);
  explain::PlotRequest req;
  req.kind = explain::PlotKind::waterfall;
  req.row = r;
  a.waterfall = explain::emit_explanation_data(req, model, matrix.values, matrix.columns);
  a.waterfall.data["row_id"] = row_id;
  a.waterfall.data["label"] = a.label;
  a.waterfall.data["threshold"] = 0.5;
  a.waterfall.data["case"] = label(a.outcome);
  return a;
}

// --------------------------------------------------------------- artifacts

ArtifactWriter::ArtifactWriter(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw DataError("cannot create output directory " + dir_.string() + ": " + ec.message());
}

ArtifactWriter::~ArtifactWriter() = default;

void ArtifactWriter::write(const std::string& name, const std::string& content) {
  if (committed_) throw ComputeError("artifact writer already committed");
  const fs::path final_path = dir_ / name;
  fs::create_directories(final_path.parent_path());
  std::error_code ec;
  fs::remove(final_path, ec);  // a stale result must not sit beside a fresh partial
  std::ofstream out(final_path.string() + ".partial", std::ios::binary);
  if (!out) throw DataError("cannot write " + final_path.string());
  out << content;
  if (!out) throw DataError("failed writing " + final_path.string());
  if (std::find(names_.begin(), names_.end(), name) == names_.end()) names_.push_back(name);
}

void ArtifactWriter::write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

void ArtifactWriter::commit() {
  for (const auto& n : names_) {
    const fs::path p = dir_ / n;
    fs::rename(p.string() + ".partial", p);
  }
  committed_ = true;
}

// ------------------------------------------------------------------ runner

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"ingest", "featurize", "select", "train",
                                              "evaluate", "grid", "explain", "report"};
  return names;
}

namespace {

struct Runner {
  const PipelineConfig& config;
  ArtifactWriter& out;
  std::uint64_t seed;
  std::string comment;  // provenance line for CSV artifacts

  json stamp(json j) const {
    j["provenance"] = provenance(config);
    return j;
  }

  Dataset chosen(const SelectionStage& s) const { return Dataset::from_matrix(feature_set(s, config.feature_set)); }

  models::Model train(const SelectionStage& s) const {
    const auto data = chosen(s);
    evaluation::ModelSpec spec{config.family, config.train};
    spec.config.seed = derive_seed(seed, "train-model");
    resampling::ResamplingStrategy strategy{config.resampling, config.k_neighbors, derive_seed(seed, "train-resample")};
    const auto resampled = resampling::apply(strategy, metrics::full_training_view(data));
    return models::fit_model(config.family, resampled.data, spec.config);
  }

  json evaluate(const SelectionStage& s) const {
    const auto data = chosen(s);
    evaluation::ModelSpec spec{config.family, config.train};
    resampling::ResamplingStrategy strategy{config.resampling, config.k_neighbors, 0};
    const auto cv = evaluation::cross_validate(spec, strategy, data, config.cv_folds, derive_seed(seed, "cv"),
                                               feature_set_label(s, config.feature_set));
    const auto holdout = evaluation::evaluate_holdout(spec, strategy, data, config.train_fraction,
                                                      derive_seed(seed, "holdout"));
    std::string roc = comment + "fpr,tpr\n";
    for (const auto& p : cv.roc.points) roc += fixed(p.fpr, 12) + "," + fixed(p.tpr, 12) + "\n";
    out.write("roc.csv", roc);
    json j = cv.to_json();
    j["holdout"] = holdout.to_json();
    j["train_config"] = config.train.to_json();
    j["train_config"].erase("seed");
    j = stamp(std::move(j));
    out.write_json("eval.json", j);
    return j;
  }

  GridReport grid(const SelectionStage& s) const {
    auto report = run_grid(config.grid, s, config.train, config.cv_folds, config.k_neighbors, derive_seed(seed, "grid"),
                           config.workers);
    out.write("grid.csv", comment + report.csv());
    out.write("grid.txt", report.text());
    out.write_json("grid.json", stamp(report.to_json()));
    return report;
  }

  json explain(const SelectionStage& s, const models::TreeEnsemble& model) const {
    const auto& m = feature_set(s, config.feature_set);
    const auto shap = explain::tree_shap(model, m.values);
    const auto gi = explain::global_importance(shap, m.columns);
    out.write_json("explain/importance.json", stamp(gi.to_json()));

    auto emit = [&](const std::string& stem, explain::PlotData d) {
      out.write_json("explain/" + stem + ".json", stamp(std::move(d.data)));
      out.write("explain/" + stem + ".csv", comment + d.csv);
      out.write("explain/" + stem + ".svg", d.svg);
    };
    explain::PlotRequest summary;
    summary.kind = explain::PlotKind::summary;
    emit("summary", explain::emit_explanation_data(summary, model, m.values, m.columns, shap));

    explain::PlotRequest dep;
    dep.kind = explain::PlotKind::dependence;
    dep.feature = config.dependence_feature.empty() ? m.columns[gi.ranking[0]] : config.dependence_feature;
    dep.color_feature = config.color_feature.empty() && gi.ranking.size() > 1 ? m.columns[gi.ranking[1]]
                                                                             : config.color_feature;
    emit("dependence", explain::emit_explanation_data(dep, model, m.values, m.columns, shap));

    std::vector<std::string> rows;
    if (!config.explain_row.empty()) {
      rows.push_back(config.explain_row);
    } else {
      // First account of each confusion cell, in row order.
      std::set<Outcome> seen;
      for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto o = outcome_of(model.probability(m.values.row(r)), m.labels[r]);
        if (seen.insert(o).second) rows.push_back(m.row_ids[r]);
      }
    }
    json accounts = json::array();
    for (const auto& id : rows) {
      auto a = explain_account(model, m, id);
      std::string tag = label(a.outcome);
      std::replace(tag.begin(), tag.end(), ' ', '_');
      const std::string stem = "waterfall_" + tag + "_" + id;
      accounts.push_back({{"row_id", id},
                          {"label", a.label},
                          {"probability", a.probability},
                          {"case", label(a.outcome)},
                          {"artifact", "explain/" + stem + ".json"}});
      emit(stem, std::move(a.waterfall));
    }
    json j = stamp({{"accounts", accounts}, {"top_feature", m.columns[gi.ranking[0]]}});
    out.write_json("explain/accounts.json", j);
    return j;
  }
};

}  // namespace

std::vector<std::string> run_stage(const std::string& stage, const PipelineConfig& config) {
  if (std::find(stage_names().begin(), stage_names().end(), stage) == stage_names().end())
    throw ConfigError("unknown stage '" + stage + "'");
  config.validate();
  if (stage == "explain" && !is_tree_family(config.family))
    throw ConfigError("explain needs a tree ensemble; model.family is " + models::label(config.family));

  ArtifactWriter out(config.out_dir);
  const std::uint64_t seed = config.seed_value();
  Runner run{config, out, seed,
             "# config_hash=" + config.hash() + " seed=" + std::to_string(seed) + "\n"};
  const auto at_or_after = [&](const std::string& s) {
    const auto& n = stage_names();
    return std::find(n.begin(), n.end(), stage) >= std::find(n.begin(), n.end(), s);
  };
  std::string current = "ingest";
  try {
    out.write_json("config.json", run.stamp({{"config", config.to_json()}}));
    const auto bundle = ingest::load_bundle(config.data_dir);
    const auto sanity = ingest::validate_bundle(bundle);
    out.write_json("sanity.json", run.stamp(sanity_json(sanity)));
    if (stage != "ingest") {
      current = "featurize";
      const auto matrix = featurize(bundle, config);
      out.write("features.csv", run.comment + features::csv_text(matrix));
      out.write_json("features.json", run.stamp(features::to_json(matrix)));
      if (at_or_after("select")) {
        current = "select";
        const auto selected = select_features(matrix, config);
        json sel = selected.report.to_json();
        sel["full_count"] = selected.full.cols();
        sel["top_count"] = selected.top.cols();
        out.write_json("selection.json", run.stamp(std::move(sel)));
        out.write("selection.txt", selected.report.table());
        out.write_json("benchmark_importance.json", run.stamp(selected.importance.to_json()));
        out.write("features_full.csv", run.comment + features::csv_text(selected.full));
        out.write("features_top.csv", run.comment + features::csv_text(selected.top));

        std::optional<models::Model> model;
        json eval, accounts;
        std::optional<GridReport> grid;
        if (stage == "train" || stage == "explain" || stage == "report") {
          current = "train";
          model = run.train(selected);
          json mj = models::to_json(*model);
          mj["provenance"] = provenance(config);
          out.write_json("model.json", mj);
        }
        if (stage == "evaluate" || stage == "report") {
          current = "evaluate";
          eval = run.evaluate(selected);
        }
        if ((stage == "explain" || stage == "report") && std::holds_alternative<models::TreeEnsemble>(*model)) {
          current = "explain";
          accounts = run.explain(selected, std::get<models::TreeEnsemble>(*model));
        }
        if (stage == "grid" || stage == "report") {
          current = "grid";
          grid = run.grid(selected);
        }
        if (stage == "report") {
          current = "report";
          std::ostringstream md;
          md << "# Credit scoring run\n\n"
             << "config hash `" << config.hash() << "`, seed " << seed << "\n\n"
             << "## Data\n\n"
             << "accounts: " << sanity.accounts << ", labeled: " << sanity.labeled << " (good " << sanity.good
             << ", bad " << sanity.bad << ")\n\n"
             << "## Features\n\n"
             << matrix.cols() << " KPIs for " << matrix.rows() << " accounts; " << selected.full.cols()
             << " after pruning, top " << selected.top.cols() << " by mean |SHAP|.\n\n"
             << "## Model\n\n"
             << models::label(config.family) << " on " << feature_set_label(selected, config.feature_set)
             << ", resampling " << resampling::label(config.resampling) << "\n\n"
             << config.cv_folds << "-fold Gini: " << format_cell(eval["mean"].get<double>(), eval["std"].get<double>())
             << "\n\n";
          if (!accounts.is_null()) {
            md << "## Explained accounts\n\n";
            for (const auto& a : accounts["accounts"])
              md << "- " << a["row_id"].get<std::string>() << ": " << a["case"].get<std::string>() << ", p = "
                 << fixed(a["probability"].get<double>(), 3) << "\n";
            md << "\n";
          } else {
            md << "Explanations skipped: the model is not a tree ensemble.\n\n";
          }
          md << "## Grid\n\n```\n" << grid->text() << "```\n";
          out.write("report.md", md.str());
        }
      }
    }
  } catch (...) {
    rethrow_in(current);
  }
  out.commit();
  return out.written();
}

}  // namespace creditx::pipeline

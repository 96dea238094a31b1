#include <algorithm>
#include <cmath>

#include "creditx/models.hpp"

namespace creditx::models {

namespace {

using nlohmann::json;

constexpr int kModelFormatVersion = 1;

// JSON has no NaN; missing numbers travel as null.
json num(double v) { return is_missing(v) ? json(nullptr) : json(v); }
double num(const json& j) { return j.is_null() ? kMissing : j.get<double>(); }

json nums(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}
std::vector<double> nums(const json& j) {
  std::vector<double> v;
  for (const auto& x : j) v.push_back(num(x));
  return v;
}

std::string label(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::logistic: return "logistic";
  }
  return "?";
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "logistic") return Activation::logistic;
  throw ConfigError("unknown activation '" + s + "'");
}

std::string label(EnsembleKind k) {
  switch (k) {
    case EnsembleKind::random_forest: return "random_forest";
    case EnsembleKind::gradient_boosting: return "gradient_boosting";
    case EnsembleKind::oblivious_boosting: return "oblivious_boosting";
  }
  return "?";
}

json tree_to_json(const RegressionTree& t) {
  if (t.oblivious) {
    json levels = json::array(), covers = json::array(), leaves = json::array(), defaults = json::array();
    for (const auto& [f, thr] : t.levels) levels.push_back({{"feature", f}, {"threshold", thr}});
    const std::size_t internal = (std::size_t{1} << t.levels.size()) - 1;
    for (std::size_t i = 0; i < t.nodes.size(); ++i) {
      covers.push_back(num(t.nodes[i].cover));
      if (i < internal) defaults.push_back(t.nodes[i].default_left);
      else leaves.push_back(t.nodes[i].value);
    }
    return {{"oblivious", true}, {"levels", levels}, {"covers", covers}, {"leaf_values", leaves},
            {"default_left", defaults}};
  }
  json nodes = json::array();
  for (const auto& n : t.nodes) {
    nodes.push_back({{"feature", n.feature},
                     {"threshold", n.threshold},
                     {"left", n.left},
                     {"right", n.right},
                     {"default_left", n.default_left},
                     {"cover", num(n.cover)},
                     {"value", n.value}});
  }
  return {{"oblivious", false}, {"nodes", nodes}};
}

RegressionTree tree_from_json(const json& j) {
  RegressionTree t;
  if (j.at("oblivious").get<bool>()) {
    std::vector<std::pair<int, double>> levels;
    for (const auto& l : j.at("levels")) levels.emplace_back(l.at("feature").get<int>(), l.at("threshold").get<double>());
    auto covers = nums(j.at("covers"));
    bool any_cover = std::any_of(covers.begin(), covers.end(), [](double c) { return !is_missing(c); });
    t = RegressionTree::make_oblivious(std::move(levels), j.at("leaf_values").get<std::vector<double>>(),
                                       any_cover ? covers : std::vector<double>{});
    if (!any_cover) {
      for (std::size_t i = 0; i < covers.size() && i < t.nodes.size(); ++i) t.nodes[i].cover = covers[i];
    }
    if (j.contains("default_left")) {
      const auto defaults = j.at("default_left").get<std::vector<bool>>();
      for (std::size_t i = 0; i < defaults.size() && i < t.nodes.size(); ++i) t.nodes[i].default_left = defaults[i];
    }
  } else {
    for (const auto& n : j.at("nodes")) {
      TreeNode node;
      node.feature = n.at("feature").get<int>();
      node.threshold = n.at("threshold").get<double>();
      node.left = n.at("left").get<int>();
      node.right = n.at("right").get<int>();
      node.default_left = n.at("default_left").get<bool>();
      node.cover = num(n.at("cover"));
      node.value = n.at("value").get<double>();
      t.nodes.push_back(node);
    }
  }
  t.check();
  return t;
}

json matrix_to_json(const Matrix& m) { return {{"rows", m.rows()}, {"cols", m.cols()}, {"values", m.data()}}; }
Matrix matrix_from_json(const json& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                j.at("values").get<std::vector<double>>());
}

void check_schema(const std::vector<std::string>& expected, const Matrix& x, const std::vector<std::string>& names) {
  if (names.size() != expected.size() || x.cols() != expected.size())
    throw DataError("schema mismatch: model expects " + std::to_string(expected.size()) + " columns, got " +
                    std::to_string(names.size()));
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] != expected[i])
      throw DataError("schema mismatch at column " + std::to_string(i) + ": expected '" + expected[i] + "', got '" +
                      names[i] + "'");
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

Family parse_family(const std::string& l) {
  if (l == "logistic") return Family::logistic;
  if (l == "logistic_binned") return Family::logistic_binned;
  if (l == "random_forest") return Family::random_forest;
  if (l == "gradient_boosting") return Family::gradient_boosting;
  if (l == "oblivious_boosting") return Family::oblivious_boosting;
  if (l == "mlp") return Family::mlp;
  throw ConfigError("unknown model family '" + l + "'");
}

std::string label(Family f) {
  switch (f) {
    case Family::logistic: return "logistic";
    case Family::logistic_binned: return "logistic_binned";
    case Family::random_forest: return "random_forest";
    case Family::gradient_boosting: return "gradient_boosting";
    case Family::oblivious_boosting: return "oblivious_boosting";
    case Family::mlp: return "mlp";
  }
  return "?";
}

bool accepts_class_weights(Family f) { return f == Family::oblivious_boosting || f == Family::mlp; }

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("invalid training config: ") + what);
  };
  require(ridge >= 0.0, "ridge must be >= 0");
  require(newton_max_iter >= 1, "newton_max_iter must be >= 1");
  require(newton_tol > 0.0, "newton_tol must be > 0");
  require(n_bins >= 2, "n_bins must be >= 2");
  require(rf_trees >= 1, "rf_trees must be >= 1");
  require(rf_min_leaf >= 1, "rf_min_leaf must be >= 1");
  require(learning_rate > 0.0, "learning_rate must be > 0");
  require(gb_depth >= 1 && gb_depth <= 16, "gb_depth must lie in [1, 16]");
  require(oblivious_depth >= 1 && oblivious_depth <= 16, "oblivious_depth must lie in [1, 16]");
  require(validation_fraction >= 0.0 && validation_fraction <= 0.5, "validation_fraction must lie in [0, 0.5]");
  require(l2 >= 0.0, "l2 must be >= 0");
  require(max_bins >= 2 && max_bins < 0xFFFF, "max_bins must lie in [2, 65534]");
  require(ordered_blocks >= 2, "ordered_blocks must be >= 2");
  require(mlp_learning_rate > 0.0, "mlp_learning_rate must be > 0");
  require(momentum >= 0.0 && momentum < 1.0, "momentum must lie in [0, 1)");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(std::none_of(hidden.begin(), hidden.end(), [](std::size_t h) { return h == 0; }),
          "hidden layer widths must be >= 1");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"seed", seed},
          {"ridge", ridge},
          {"newton_max_iter", newton_max_iter},
          {"newton_tol", newton_tol},
          {"n_bins", n_bins},
          {"rf_trees", rf_trees},
          {"rf_min_leaf", rf_min_leaf},
          {"rf_max_depth", rf_max_depth},
          {"rf_max_features", rf_max_features},
          {"boost_rounds", boost_rounds},
          {"learning_rate", learning_rate},
          {"gb_depth", gb_depth},
          {"oblivious_depth", oblivious_depth},
          {"patience", patience},
          {"validation_fraction", validation_fraction},
          {"l2", l2},
          {"max_bins", max_bins},
          {"ordered", ordered},
          {"ordered_blocks", ordered_blocks},
          {"hidden", hidden},
          {"activation", label(activation)},
          {"mlp_learning_rate", mlp_learning_rate},
          {"momentum", momentum},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"mlp_patience", mlp_patience}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  if (!j.is_object()) throw ConfigError("training config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (key == "ridge") c.ridge = v.get<double>();
      else if (key == "newton_max_iter") c.newton_max_iter = v.get<std::size_t>();
      else if (key == "newton_tol") c.newton_tol = v.get<double>();
      else if (key == "n_bins") c.n_bins = v.get<std::size_t>();
      else if (key == "rf_trees") c.rf_trees = v.get<std::size_t>();
      else if (key == "rf_min_leaf") c.rf_min_leaf = v.get<std::size_t>();
      else if (key == "rf_max_depth") c.rf_max_depth = v.get<std::size_t>();
      else if (key == "rf_max_features") c.rf_max_features = v.get<std::size_t>();
      else if (key == "boost_rounds") c.boost_rounds = v.get<std::size_t>();
      else if (key == "learning_rate") c.learning_rate = v.get<double>();
      else if (key == "gb_depth") c.gb_depth = v.get<std::size_t>();
      else if (key == "oblivious_depth") c.oblivious_depth = v.get<std::size_t>();
      else if (key == "patience") c.patience = v.get<std::size_t>();
      else if (key == "validation_fraction") c.validation_fraction = v.get<double>();
      else if (key == "l2") c.l2 = v.get<double>();
      else if (key == "max_bins") c.max_bins = v.get<std::size_t>();
      else if (key == "ordered") c.ordered = v.get<bool>();
      else if (key == "ordered_blocks") c.ordered_blocks = v.get<std::size_t>();
      else if (key == "hidden") c.hidden = v.get<std::vector<std::size_t>>();
      else if (key == "activation") c.activation = parse_activation(v.get<std::string>());
      else if (key == "mlp_learning_rate") c.mlp_learning_rate = v.get<double>();
      else if (key == "momentum") c.momentum = v.get<double>();
      else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
      else if (key == "epochs") c.epochs = v.get<std::size_t>();
      else if (key == "mlp_patience") c.mlp_patience = v.get<std::size_t>();
      else throw ConfigError("unknown training option '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("training config has a value of the wrong type: ") + e.what());
  }
  c.validate();
  return c;
}

std::string kind_label(const Model& m) {
  return std::visit(overloaded{[](const LogisticModel& l) { return std::string(l.binning ? "logistic_binned" : "logistic"); },
                               [](const TreeEnsemble& e) { return label(e.kind); },
                               [](const MlpModel&) { return std::string("mlp"); }},
                    m);
}

const std::vector<std::string>& feature_names(const Model& m) {
  return std::visit([](const auto& x) -> const std::vector<std::string>& { return x.feature_names; }, m);
}

Model fit_model(Family family, const Dataset& data, const TrainConfig& config) {
  config.validate();
  switch (family) {
    case Family::logistic: return fit_logistic(data, config);
    case Family::logistic_binned: return fit_logistic_binned(data, config);
    case Family::random_forest: return fit_random_forest(data, config);
    case Family::gradient_boosting: return fit_gradient_boosting(data, config);
    case Family::oblivious_boosting: return fit_oblivious_boosting(data, config);
    case Family::mlp: {
      features::Imputer imputer;
      const Dataset scaled = prepare_scaled(data, &imputer);
      return fit_mlp(scaled, config, imputer);
    }
  }
  throw ConfigError("unknown model family");
}

std::vector<double> predict_margin(const Model& model, const Matrix& x, const std::vector<std::string>& names) {
  check_schema(feature_names(model), x, names);
  std::vector<double> out(x.rows());
  std::visit([&](const auto& m) {
    for (std::size_t r = 0; r < x.rows(); ++r) out[r] = m.margin(x.row(r));
  }, model);
  return out;
}

std::vector<double> predict_proba(const Model& model, const Matrix& x, const std::vector<std::string>& names) {
  auto out = predict_margin(model, x, names);
  if (const auto* e = std::get_if<TreeEnsemble>(&model)) {
    for (auto& v : out) v = e->link(v);
  } else {
    for (auto& v : out) v = sigmoid(v);
  }
  return out;
}

std::vector<double> predict_proba(const Model& model, const Dataset& data) {
  return predict_proba(model, data.x, data.feature_names);
}

int classify(double p, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("classification threshold must lie in [0, 1]");
  return p > threshold ? 1 : 0;
}

nlohmann::json ensemble_to_json(const TreeEnsemble& e) {
  json trees = json::array();
  for (const auto& t : e.trees) trees.push_back(tree_to_json(t));
  return {{"version", kModelFormatVersion},
          {"kind", label(e.kind)},
          {"feature_names", e.feature_names},
          {"base_score", e.base_score},
          {"learning_rate", e.learning_rate},
          {"boosting_mode", e.boosting_mode},
          {"trees", trees}};
}

TreeEnsemble ensemble_from_json(const nlohmann::json& j) {
  TreeEnsemble e;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "random_forest") e.kind = EnsembleKind::random_forest;
  else if (kind == "gradient_boosting") e.kind = EnsembleKind::gradient_boosting;
  else if (kind == "oblivious_boosting") e.kind = EnsembleKind::oblivious_boosting;
  else throw DataError("model JSON: '" + kind + "' is not a tree ensemble");
  e.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  e.base_score = j.at("base_score").get<double>();
  e.learning_rate = j.at("learning_rate").get<double>();
  e.boosting_mode = j.value("boosting_mode", std::string("plain"));
  for (const auto& t : j.at("trees")) e.trees.push_back(tree_from_json(t));
  return e;
}

nlohmann::json to_json(const Model& model) {
  return std::visit(
      overloaded{
          [](const TreeEnsemble& e) { return ensemble_to_json(e); },
          [&](const LogisticModel& l) {
            json j = {{"version", kModelFormatVersion},
                      {"kind", kind_label(model)},
                      {"feature_names", l.feature_names},
                      {"logistic",
                       {{"design_names", l.design_names},
                        {"intercept", l.intercept},
                        {"coefficients", l.coefficients},
                        {"converged", l.converged},
                        {"iterations", l.iterations},
                        {"gradient_norm", l.gradient_norm}}},
                      {"imputer", nums(l.imputer.medians)}};
            if (l.binning) j["binning"] = l.binning->to_json();
            return j;
          },
          [](const MlpModel& m) {
            json layers = json::array();
            for (const auto& l : m.layers) layers.push_back({{"weights", matrix_to_json(l.weights)}, {"bias", l.bias}});
            return json{{"version", kModelFormatVersion},
                        {"kind", "mlp"},
                        {"feature_names", m.feature_names},
                        {"imputer", nums(m.imputer.medians)},
                        {"scaler", m.scaler.to_json()},
                        {"mlp",
                         {{"activation", label(m.activation)},
                          {"active", m.active},
                          {"epochs_run", m.epochs_run},
                          {"layers", layers}}}};
          }},
      model);
}

Model model_from_json(const nlohmann::json& j) {
  try {
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion) throw DataError("model JSON: unsupported version " + std::to_string(version));
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "logistic" || kind == "logistic_binned") {
      LogisticModel l;
      l.feature_names = j.at("feature_names").get<std::vector<std::string>>();
      const auto& body = j.at("logistic");
      l.design_names = body.at("design_names").get<std::vector<std::string>>();
      l.intercept = body.at("intercept").get<double>();
      l.coefficients = body.at("coefficients").get<std::vector<double>>();
      l.converged = body.at("converged").get<bool>();
      l.iterations = body.at("iterations").get<std::size_t>();
      l.gradient_norm = body.at("gradient_norm").get<double>();
      l.imputer.medians = nums(j.at("imputer"));
      if (j.contains("binning")) l.binning = QuantileBinning::from_json(j.at("binning"));
      return l;
    }
    if (kind == "mlp") {
      MlpModel m;
      m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
      m.imputer.medians = nums(j.at("imputer"));
      m.scaler = features::ScalerParams::from_json(j.at("scaler"));
      const auto& body = j.at("mlp");
      m.activation = parse_activation(body.at("activation").get<std::string>());
      m.active = body.at("active").get<std::vector<bool>>();
      m.epochs_run = body.at("epochs_run").get<std::size_t>();
      for (const auto& l : body.at("layers"))
        m.layers.push_back({matrix_from_json(l.at("weights")), l.at("bias").get<std::vector<double>>()});
      return m;
    }
    return ensemble_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model JSON: ") + e.what());
  }
}

}  // namespace creditx::models

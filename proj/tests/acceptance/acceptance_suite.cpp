// Acceptance checks: one PASS/FAIL line per criterion, non-zero exit on any failure.
#include <chrono>
#include <cstring>
#include <map>
#include <numeric>
#include <cstdio>
#include <iostream>
#include <set>
#include <sstream>

#include "creditx/evaluation.hpp"
#include "creditx/explain.hpp"
#include "creditx/pipeline.hpp"
#include "creditx/resampling.hpp"
#include "creditx/selection.hpp"
#include "creditx/synthetic.hpp"
#include "support.hpp"

using namespace creditx;
namespace ts = testing_support;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& why) {
    if (!ok && pass) detail << "first failure: " << why << "; ";
    pass = pass && ok;
  }
};

int failures = 0;

void report(int id, const std::string& name, const std::function<void(Outcome&)>& check) {
  Outcome o;
  const auto t0 = Clock::now();
  try {
    check(o);
  } catch (const std::exception& e) {
    o.require(false, std::string("exception: ") + e.what());
  }
  if (!o.pass) ++failures;
  std::printf("%s criterion %d: %s [%.2fs] %s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), seconds_since(t0),
              o.detail.str().c_str());
  std::fflush(stdout);
}

Matrix random_rows(Rng& rng, std::size_t n, std::size_t p, double missing) {
  Matrix x(n, p);
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = ts::random_row(rng, p, missing);
    std::copy(row.begin(), row.end(), x.row(r).begin());
  }
  return x;
}

// Every row explained anywhere in this suite passes through here.
double worst_additivity = 0.0;
std::size_t explained_rows = 0;

void track(const std::vector<explain::ShapValues>& shap) {
  for (const auto& s : shap) {
    worst_additivity = std::max(worst_additivity, s.additivity_gap());
    ++explained_rows;
  }
}

// ------------------------------------------------------------ criterion 1

void shap_exactness(Outcome& o) {
  Rng rng(20240601);
  double worst = 0.0;
  std::size_t rows = 0;
  const auto t0 = Clock::now();
  for (int m = 0; m < 20; ++m) {
    const std::size_t p = 2 + rng.below(9);
    const std::size_t trees = 1 + rng.below(50);
    const auto e = ts::random_ensemble(rng, trees, 4, p, m % 4 == 3);
    const explain::CoalitionEvaluator evaluator(e);
    const auto x = random_rows(rng, 100, p, 0.1);
    const auto fast = explain::tree_shap(e, x);
    track(fast);
    for (std::size_t r = 0; r < x.rows(); ++r, ++rows) {
      const auto brute = explain::brute_force_shapley(evaluator, x.row(r));
      worst = std::max(worst, std::abs(brute.phi0 - fast[r].phi0));
      for (std::size_t j = 0; j < p; ++j) worst = std::max(worst, std::abs(brute.phi[j] - fast[r].phi[j]));
    }
  }
  const double elapsed = seconds_since(t0);
  o.detail << rows << " rows x 20 ensembles, max |diff| = " << worst << ", " << elapsed << " s";
  o.require(worst <= 1e-8, "difference above 1e-8");
  o.require(elapsed < 60.0, "slower than 60 s");
}

// ------------------------------------------------------------ criterion 2

void local_accuracy(Outcome& o) {
  const auto bench = synthetic::generate_benchmark({600, 12, 0.111, 5});
  models::TrainConfig c;
  c.seed = 5;
  c.boost_rounds = 120;
  c.rf_trees = 60;
  const auto gb = models::fit_gradient_boosting(bench, c);
  const auto ob = models::fit_oblivious_boosting(bench, c);
  const auto rf = models::fit_random_forest(bench, c);
  auto with_missing = bench.x;
  Rng rng(8);
  for (auto& v : with_missing.data())
    if (rng.uniform() < 0.05) v = kMissing;
  for (const auto* e : {&gb, &ob, &rf}) {
    const auto shap = explain::tree_shap(*e, with_missing);
    track(shap);
    for (std::size_t r = 0; r < shap.size(); ++r)
      o.require(std::abs(shap[r].margin - e->margin(with_missing.row(r))) < 1e-12, "margin differs from predict");
  }
  o.detail << explained_rows << " explained rows, max |phi0 + sum(phi) - margin| = " << worst_additivity;
  o.require(worst_additivity <= 1e-9, "additivity gap above 1e-9");
}

// ------------------------------------------------------------ criterion 3

void metric_identities(Outcome& o) {
  Rng rng(77);
  double worst = 0.0;
  bool exact = true;
  for (int set = 0; set < 1000; ++set) {
    const std::size_t n = 2 + rng.below(300);
    std::vector<int> y(n);
    std::vector<double> s(n);
    const double grid = 1.0 + static_cast<double>(rng.below(20));  // coarse grids give ties
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = i < 2 ? static_cast<int>(i) : (rng.uniform() < 0.2 ? 1 : 0);
      s[i] = std::round(rng.normal() * grid) / grid;
    }
    const auto curve = metrics::roc_curve(y, s);
    worst = std::max(worst, std::abs(curve.auc - ts::mann_whitney_auc(y, s)));
    exact = exact && curve.gini == 2.0 * curve.auc - 1.0 && metrics::gini(curve.auc) == 2.0 * curve.auc - 1.0;
  }
  o.detail << "1000 sets, max |AUC - pair count| = " << worst << ", gini exact = " << (exact ? "yes" : "no");
  o.require(worst <= 1e-12, "AUC mismatch");
  o.require(exact, "gini != 2 auc - 1");
}

// ------------------------------------------------------------ criterion 4

double mlp_relative_error(models::Activation act, std::uint64_t seed) {
  const auto raw = ts::gaussian_dataset(seed, 50, 4, [](std::span<const double> x) { return x[0] - x[1] * x[2]; });
  const auto d = models::prepare_scaled(raw);
  models::TrainConfig c;
  c.seed = seed;
  c.hidden = {6, 4};
  c.epochs = 3;
  c.activation = act;
  const auto m = models::fit_mlp(d, c);
  const auto grad = models::mlp_loss_and_gradient(m, d.x, d.y, d.w).second;
  auto probe = m;
  auto theta = m.parameters();
  const double eps = 1e-6;
  double diff = 0, norm = 0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double keep = theta[i];
    theta[i] = keep + eps;
    probe.set_parameters(theta);
    const double up = models::mlp_loss_and_gradient(probe, d.x, d.y, d.w).first;
    theta[i] = keep - eps;
    probe.set_parameters(theta);
    const double down = models::mlp_loss_and_gradient(probe, d.x, d.y, d.w).first;
    theta[i] = keep;
    const double numeric = (up - down) / (2 * eps);
    diff += (grad[i] - numeric) * (grad[i] - numeric);
    norm += std::max(grad[i] * grad[i], numeric * numeric);
  }
  return std::sqrt(diff / norm);
}

void gradient_checks(Outcome& o) {
  double worst_mlp = 0.0;
  for (auto act : {models::Activation::relu, models::Activation::tanh, models::Activation::logistic})
    for (std::uint64_t seed : {1, 2, 3}) worst_mlp = std::max(worst_mlp, mlp_relative_error(act, seed));

  auto d = synthetic::generate_benchmark({400, 8, 0.111, 3});
  Rng rng(4);
  for (auto& w : d.w) w = 0.25 + rng.uniform();
  models::TrainConfig c;
  c.seed = 3;
  c.boost_rounds = 5;
  c.validation_fraction = 0.0;
  double worst_gb = 0.0;
  for (bool oblivious : {false, true}) {
    std::vector<double> first;
    auto observer = [&](const models::RoundInfo& info) {
      if (info.round == 0) first.assign(info.gradients.begin(), info.gradients.end());
    };
    if (oblivious) models::fit_oblivious_boosting(d, c, observer);
    else models::fit_gradient_boosting(d, c, observer);
    long double sy = 0, sw = 0;
    for (std::size_t r = 0; r < d.rows(); ++r) sy += d.w[r] * d.y[r], sw += d.w[r];
    const double p0 = static_cast<double>(sy / sw);
    o.require(first.size() == d.rows(), "observer saw a different row count");
    for (std::size_t r = 0; r < first.size(); ++r)
      worst_gb = std::max(worst_gb, std::abs(first[r] - d.w[r] * (p0 - d.y[r])));
  }
  o.detail << "MLP max relative error = " << worst_mlp << ", boosting first-round |g - w(p0 - y)| max = " << worst_gb;
  o.require(worst_mlp < 1e-4, "MLP gradient mismatch");
  o.require(worst_gb <= 1e-12, "boosting residual mismatch");
}

// ------------------------------------------------------------ criterion 5

void pipeline_counts(Outcome& o) {
  synthetic::LedgerSpec spec;
  spec.accounts = 900;
  spec.seed = 42;
  const auto bundle = synthetic::generate_ledger(spec);
  const auto full = features::build_feature_matrix(bundle);
  o.require(full.cols() == 106, "feature count is not 106");
  o.require(full.columns == features::kpi_names(), "names differ from the KPI list");
  o.require(features::canonical_windows().size() == 4, "window count is not 4");

  // Pick 79 real columns that are already pairwise below the threshold, then
  // append exact copies of 27 of them under the remaining fixture names.
  auto chain = [](const features::FeatureMatrix& m) {
    auto [a, report] = selection::drop_constant(m);
    auto [b, r2] = selection::prune_missing(a, false, 0.5);
    report.chain(r2);
    auto [c, r3] = selection::correlation_prune(b, 0.95);
    report.chain(r3);
    return std::make_pair(c, report);
  };
  const auto survivors = chain(full).first;
  o.detail << "106 generated; " << survivors.cols() << " survive pruning of the raw ledger; ";
  o.require(survivors.cols() >= 79, "fewer than 79 decorrelated ledger columns");
  if (survivors.cols() < 79) return;

  std::vector<std::size_t> base_idx(79);
  std::iota(base_idx.begin(), base_idx.end(), 0);
  const auto base = survivors.select_columns(base_idx);
  const std::set<std::string> base_names(base.columns.begin(), base.columns.end());
  std::vector<std::string> spare;
  for (const auto& n : full.columns)
    if (!base_names.count(n)) spare.push_back(n);

  features::FeatureMatrix dup = base;
  dup.columns.insert(dup.columns.end(), spare.begin(), spare.begin() + 27);
  dup.values = Matrix(base.rows(), 106);
  for (std::size_t r = 0; r < base.rows(); ++r) {
    for (std::size_t c = 0; c < 79; ++c) dup.values(r, c) = base.values(r, c);
    for (std::size_t k = 0; k < 27; ++k) dup.values(r, 79 + k) = base.values(r, (k * 3) % 79);
  }
  const auto [kept, report] = chain(dup);
  std::size_t correlated = 0;
  for (const auto& rem : report.removed) correlated += rem.reason == selection::Reason::correlated;
  o.detail << "with 27 duplicates: " << report.original.size() << " -> " << report.removed.size() << " removed ("
           << correlated << " correlated), " << kept.cols() << " kept";
  o.require(report.original.size() == 106, "duplicated matrix is not 106 wide");
  o.require(report.removed.size() == 27 && correlated == 27, "removal count is not 27");
  o.require(kept.columns == base.columns, "survivors are not the 79 originals");
}

// ------------------------------------------------------------ criterion 6

bool same(const resampling::ResampleResult& a, const resampling::ResampleResult& b) {
  if (!(a.data.x == b.data.x) || a.data.y != b.data.y || a.data.w != b.data.w || a.source != b.source) return false;
  if (a.synthetic.size() != b.synthetic.size()) return false;
  for (std::size_t i = 0; i < a.synthetic.size(); ++i) {
    const auto &s = a.synthetic[i], &t = b.synthetic[i];
    if (s.row != t.row || s.parent != t.parent || s.neighbor != t.neighbor || s.lambda != t.lambda) return false;
  }
  return true;
}

void resampler_contracts(Outcome& o) {
  // 888 good / 111 bad: an 8:1 imbalance.
  Rng rng(888);
  Matrix x(999, 6);
  std::vector<int> y(999, 0);
  for (std::size_t r = 0; r < 999; ++r) {
    y[r] = r >= 888;
    for (std::size_t c = 0; c < 6; ++c) x(r, c) = rng.normal() + (y[r] && c < 3 ? 1.0 : 0.0);
  }
  const auto data = Dataset::from_arrays({"a", "b", "c", "d", "e", "f"}, x, y);
  const auto train = metrics::full_training_view(data);
  using resampling::Kind;
  double worst_line = 0.0;
  for (Kind kind : {Kind::undersample, Kind::oversample, Kind::smote, Kind::borderline_smote, Kind::svm_smote,
                    Kind::class_weight_proportional, Kind::class_weight_sqrt_balanced}) {
    const resampling::ResamplingStrategy strategy{kind, 5, 31};
    const auto r = resampling::apply(strategy, train);
    const auto again = resampling::apply(strategy, train);
    const std::string name = resampling::label(kind);
    o.require(same(r, again), name + " is not deterministic");
    double w0 = 0, w1 = 0;
    std::size_t n0 = 0, n1 = 0;
    for (std::size_t i = 0; i < r.data.rows(); ++i) (r.data.y[i] ? w1 : w0) += r.data.w[i], ++(r.data.y[i] ? n1 : n0);
    if (kind == Kind::class_weight_sqrt_balanced) {
      // Square-root weighting narrows the gap by design; its values are checked under criterion 8.
      o.detail << name << " weighted " << w0 << "/" << w1 << " (not a balancing scheme); ";
      continue;
    }
    if (resampling::is_class_weighting(kind)) {
      o.require(w0 == w1, name + " weighted totals differ");
      o.detail << name << " weighted " << w0 << "/" << w1 << "; ";
    } else {
      o.require(n0 == n1, name + " class counts differ");
      o.detail << name << " " << n0 << "/" << n1 << "; ";
    }
    for (const auto& s : r.synthetic) {
      o.require(s.lambda >= 0.0 && s.lambda <= 1.0, name + " lambda outside [0, 1]");
      o.require(data.y[s.parent] == 1 && data.y[s.neighbor] == 1, name + " parent is not minority");
      for (std::size_t c = 0; c < 6; ++c) {
        const double p = data.x(s.parent, c), q = data.x(s.neighbor, c);
        worst_line = std::max(worst_line, std::abs(r.data.x(s.row, c) - (p + s.lambda * (q - p))));
      }
    }
  }
  o.detail << "max distance from parent segment = " << worst_line;
  o.require(worst_line <= 1e-9, "synthetic row off its parent segment");
}

// ------------------------------------------------------------ criterion 7

void scaled_benchmark(Outcome& o) {
  const auto t0 = Clock::now();
  const auto data = synthetic::generate_benchmark({2000, 20, 0.111, 2024});
  std::map<models::Family, double> gini;
  for (auto family : {models::Family::oblivious_boosting, models::Family::gradient_boosting, models::Family::logistic}) {
    evaluation::ModelSpec spec;
    spec.family = family;
    spec.config.seed = 2024;
    const auto cv = evaluation::cross_validate(spec, {}, data, 5, 2024);
    gini[family] = cv.mean;
    o.detail << models::label(family) << " " << pipeline::format_cell(cv.mean, cv.std) << "; ";
  }
  const double elapsed = seconds_since(t0);
  o.detail << elapsed << " s";
  const double ob = gini[models::Family::oblivious_boosting], gb = gini[models::Family::gradient_boosting],
               lr = gini[models::Family::logistic];
  o.require(ob >= gb, "oblivious below gradient boosting");
  o.require(gb > lr, "gradient boosting not above logistic");
  o.require(ob > 0.5, "oblivious Gini not above 0.5");
  o.require(elapsed < 300.0, "slower than 5 minutes");
}

// ------------------------------------------------------------ criterion 8

void scaling_and_weights(Outcome& o) {
  synthetic::LedgerSpec spec;
  spec.accounts = 400;
  spec.seed = 8;
  const auto m = features::build_feature_matrix(synthetic::generate_ledger(spec));
  const auto filled = features::Imputer::fit(m.values).apply(m.values);
  const auto [z, params] = features::standardize(filled);
  double worst_mean = 0.0, worst_sd = 0.0;
  std::size_t checked = 0;
  for (std::size_t c = 0; c < z.cols(); ++c) {
    if (params.constant[c]) continue;
    ++checked;
    long double s = 0, ss = 0;
    for (std::size_t r = 0; r < z.rows(); ++r) s += z(r, c);
    const long double mean = s / z.rows();
    for (std::size_t r = 0; r < z.rows(); ++r) ss += (z(r, c) - mean) * (z(r, c) - mean);
    worst_mean = std::max(worst_mean, static_cast<double>(std::abs(mean)));
    worst_sd = std::max(worst_sd, static_cast<double>(std::abs(std::sqrt(ss / z.rows()) - 1.0L)));
  }
  const std::vector<int> y{0, 0, 0, 0, 0, 0, 0, 0, 1, 1};
  const auto cw = resampling::class_weights(y, resampling::WeightMode::sqrt_balanced);
  o.detail << checked << " columns, max |mean| = " << worst_mean << ", max |sd - 1| = " << worst_sd
           << "; sqrt weights (8,2) -> (" << cw.weight[0] << ", " << cw.weight[1] << ")";
  o.require(checked > 0, "no column checked");
  o.require(worst_mean < 1e-9 && worst_sd < 1e-9, "standardized moments off");
  o.require(cw.weight[0] == 1.0 && cw.weight[1] == 2.0, "sqrt weights are not exactly (1, 2)");
}

// ------------------------------------------------------------ criterion 9

void determinism_and_round_trip(Outcome& o) {
  ts::TempDir data("acceptance-ledger"), out_a("acceptance-a"), out_b("acceptance-b");
  synthetic::LedgerSpec spec;
  spec.accounts = 300;
  spec.seed = 9;
  ingest::write_bundle(synthetic::generate_ledger(spec), data.path());
  auto config = pipeline::PipelineConfig::from_json({
      {"seed", 2024},
      {"data.dir", data.path().string()},
      {"selection.top_k", 10},
      {"model.boost_rounds", 60},
      {"model.rf_trees", 40},
      {"model.hidden", {16}},
      {"model.epochs", 30},
      {"cv.folds", 3},
      {"grid.resamplers", {"none", "smote", "class_weight"}},
  });
  config.out_dir = out_a.path().string();
  config.workers = 1;
  pipeline::run_stage("grid", config);
  config.out_dir = out_b.path().string();
  config.workers = 0;
  pipeline::run_stage("grid", config);
  const auto a = ts::read_text(out_a / "grid.csv"), b = ts::read_text(out_b / "grid.csv");
  const auto lines = std::count(a.begin(), a.end(), '\n');
  o.detail << "grid.csv " << a.size() << " bytes, " << lines << " lines, identical = " << (a == b ? "yes" : "no") << "; ";
  o.require(!a.empty() && a == b, "grid CSV differs between runs");

  const auto train = synthetic::generate_benchmark({400, 10, 0.111, 91});
  auto probe = synthetic::generate_benchmark({100, 10, 0.111, 92});
  Rng rng(93);
  for (auto& v : probe.x.data())
    if (rng.uniform() < 0.05) v = kMissing;
  models::TrainConfig c;
  c.seed = 91;
  c.rf_trees = 30;
  c.boost_rounds = 40;
  c.hidden = {8};
  c.epochs = 20;
  for (auto family : {models::Family::logistic, models::Family::logistic_binned, models::Family::random_forest,
                      models::Family::gradient_boosting, models::Family::oblivious_boosting, models::Family::mlp}) {
    const auto model = models::fit_model(family, train, c);
    const auto text = models::to_json(model).dump();
    const auto back = models::model_from_json(nlohmann::json::parse(text));
    const auto p = models::predict_proba(model, probe), q = models::predict_proba(back, probe);
    const bool bitwise = p.size() == 100 && std::memcmp(p.data(), q.data(), p.size() * sizeof(double)) == 0;
    o.require(bitwise, models::label(family) + " predictions changed after reload");
  }
  o.detail << "6 model families reloaded with bit-identical predictions on 100 rows";
}

}  // namespace

int main() {
  report(1, "tree_shap equals brute-force Shapley", shap_exactness);
  report(2, "local accuracy", local_accuracy);
  report(3, "metric identities", metric_identities);
  report(4, "gradient checks", gradient_checks);
  report(5, "pipeline feature counts", pipeline_counts);
  report(6, "resampler contracts", resampler_contracts);
  report(7, "scaled benchmark ordering", scaled_benchmark);
  report(8, "standardization and square-root weights", scaling_and_weights);
  report(9, "determinism and model round-trip", determinism_and_round_trip);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}

#include <algorithm>
#include <cmath>
#include <numeric>

#include "creditx/metrics.hpp"
#include "creditx/models.hpp"
#include "holdout.hpp"

namespace creditx::models {

namespace {

double activate(Activation a, double v) {
  switch (a) {
    case Activation::relu: return v > 0.0 ? v : 0.0;
    case Activation::tanh: return std::tanh(v);
    case Activation::logistic: return sigmoid(v);
  }
  return v;
}

double activation_slope(Activation a, double pre, double out) {
  switch (a) {
    case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: return 1.0 - out * out;
    case Activation::logistic: return out * (1.0 - out);
  }
  return 1.0;
}

// softplus(m) - y*m: cross-entropy written in the margin, smooth everywhere.
double cross_entropy(double m, int y) {
  const double softplus = m > 0.0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
  return softplus - (y == 1 ? m : 0.0);
}

struct Activations {
  std::vector<std::vector<double>> pre;  // per layer
  std::vector<std::vector<double>> out;  // out[0] = masked input
};

double forward(const MlpModel& m, std::span<const double> z, Activations& a) {
  const std::size_t n_layers = m.layers.size();
  a.pre.resize(n_layers);
  a.out.resize(n_layers + 1);
  a.out[0].assign(z.begin(), z.end());
  for (std::size_t i = 0; i < a.out[0].size(); ++i)
    if (!m.active[i]) a.out[0][i] = 0.0;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& layer = m.layers[l];
    const std::size_t outs = layer.weights.rows(), ins = layer.weights.cols();
    auto& pre = a.pre[l];
    auto& out = a.out[l + 1];
    pre.resize(outs);
    out.resize(outs);
    const auto& in = a.out[l];
    for (std::size_t o = 0; o < outs; ++o) {
      double s = layer.bias[o];
      const auto w = layer.weights.row(o);
      for (std::size_t i = 0; i < ins; ++i) s += w[i] * in[i];
      pre[o] = s;
      out[o] = l + 1 < n_layers ? activate(m.activation, s) : s;
    }
  }
  return a.out[n_layers][0];
}

// Accumulates d(loss)/d(params) given d(loss)/d(margin) into `grad`.
void backward(const MlpModel& m, const Activations& a, double dmargin, std::vector<DenseLayer>& grad) {
  std::vector<double> delta{dmargin}, next;
  for (std::size_t l = m.layers.size(); l-- > 0;) {
    const auto& layer = m.layers[l];
    auto& g = grad[l];
    const auto& in = a.out[l];
    for (std::size_t o = 0; o < delta.size(); ++o) {
      g.bias[o] += delta[o];
      auto gw = g.weights.row(o);
      for (std::size_t i = 0; i < in.size(); ++i) gw[i] += delta[o] * in[i];
    }
    if (l == 0) break;
    next.assign(in.size(), 0.0);
    for (std::size_t o = 0; o < delta.size(); ++o) {
      const auto w = layer.weights.row(o);
      for (std::size_t i = 0; i < in.size(); ++i) next[i] += w[i] * delta[o];
    }
    for (std::size_t i = 0; i < in.size(); ++i) next[i] *= activation_slope(m.activation, a.pre[l - 1][i], in[i]);
    delta.swap(next);
  }
}

std::vector<DenseLayer> zeros_like(const std::vector<DenseLayer>& layers) {
  std::vector<DenseLayer> out;
  for (const auto& l : layers) out.push_back({Matrix(l.weights.rows(), l.weights.cols(), 0.0), std::vector<double>(l.bias.size(), 0.0)});
  return out;
}

std::vector<double> flatten(const std::vector<DenseLayer>& layers) {
  std::vector<double> flat;
  for (const auto& l : layers) {
    flat.insert(flat.end(), l.weights.data().begin(), l.weights.data().end());
    flat.insert(flat.end(), l.bias.begin(), l.bias.end());
  }
  return flat;
}

}  // namespace

double MlpModel::margin_scaled(std::span<const double> z) const {
  if (z.size() != active.size()) throw DataError("MLP input width does not match the model");
  Activations a;
  return forward(*this, z, a);
}

double MlpModel::margin(std::span<const double> raw_row) const {
  std::vector<double> z(raw_row.begin(), raw_row.end());
  imputer.apply_row(z);
  scaler.apply_row(z);
  return margin_scaled(z);
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weights.data().size() + l.bias.size();
  return n;
}

std::vector<double> MlpModel::parameters() const { return flatten(layers); }

void MlpModel::set_parameters(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw ComputeError("MLP parameter vector has the wrong length");
  std::size_t k = 0;
  for (auto& l : layers) {
    for (auto& v : l.weights.data()) v = flat[k++];
    for (auto& v : l.bias) v = flat[k++];
  }
}

Dataset prepare_scaled(const Dataset& data, features::Imputer* imputer_out) {
  Dataset out = data;
  auto imputer = features::Imputer::fit(data.x);
  const Matrix filled = imputer.apply(data.x);
  auto [z, params] = features::standardize(filled);
  out.x = std::move(z);
  out.scaling = std::move(params);
  if (imputer_out) *imputer_out = std::move(imputer);
  return out;
}

std::pair<double, std::vector<double>> mlp_loss_and_gradient(const MlpModel& model, const Matrix& z,
                                                             const std::vector<int>& y, const std::vector<double>& w) {
  if (z.rows() != y.size() || y.size() != w.size()) throw DataError("MLP batch shapes disagree");
  auto grad = zeros_like(model.layers);
  Activations a;
  double loss = 0.0, sw = 0.0;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    const double m = forward(model, z.row(r), a);
    loss += w[r] * cross_entropy(m, y[r]);
    sw += w[r];
    backward(model, a, w[r] * (sigmoid(m) - y[r]), grad);
  }
  auto flat = flatten(grad);
  for (auto& g : flat) g /= sw;
  return {loss / sw, flat};
}

MlpModel fit_mlp(const Dataset& data, const TrainConfig& cfg, const features::Imputer& imputer) {
  data.validate();
  cfg.validate();
  if (!data.scaling) throw DataError("MLP input is not standardized: no scaler attached");
  if (data.has_missing()) throw DataError("MLP input contains missing values");
  const auto& scaler = *data.scaling;
  const std::size_t p = data.cols();
  if (scaler.mean.size() != p) throw DataError("MLP scaler width does not match the data");

  MlpModel m;
  m.feature_names = data.feature_names;
  m.scaler = scaler;
  m.imputer = imputer;
  if (m.imputer.medians.empty()) m.imputer.medians = scaler.mean;  // missing maps to z = 0
  m.active.resize(p);
  for (std::size_t j = 0; j < p; ++j) m.active[j] = !scaler.constant[j];
  m.activation = cfg.activation;

  Rng init(derive_seed(cfg.seed, "mlp-init"));
  std::size_t fan_in = p;
  auto add_layer = [&](std::size_t outs, bool hidden) {
    DenseLayer l{Matrix(outs, fan_in, 0.0), std::vector<double>(outs, 0.0)};
    const double gain = hidden && cfg.activation == Activation::relu ? 2.0 : 1.0;  // He vs Xavier
    const double sd = std::sqrt(gain / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
    for (auto& v : l.weights.data()) v = sd * init.normal();
    m.layers.push_back(std::move(l));
    fan_in = outs;
  };
  for (auto h : cfg.hidden) add_layer(h, true);
  add_layer(1, false);

  const auto split = detail::holdout(data, cfg.validation_fraction, derive_seed(cfg.seed, "mlp-validation"));
  std::vector<int> valid_y;
  for (auto r : split.valid) valid_y.push_back(data.y[r]);
  const bool early_stopping = std::count(valid_y.begin(), valid_y.end(), 1) > 0 &&
                              std::count(valid_y.begin(), valid_y.end(), 0) > 0;

  auto velocity = zeros_like(m.layers);
  auto grad = zeros_like(m.layers);
  Activations act;
  Rng order_rng(derive_seed(cfg.seed, "mlp-batches"));
  std::vector<std::size_t> order = split.fit;
  auto best = m.layers;
  double best_auc = -1.0;
  std::size_t since_best = 0;
  std::vector<double> valid_scores(split.valid.size());

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      for (auto& g : grad) {
        std::fill(g.weights.data().begin(), g.weights.data().end(), 0.0);
        std::fill(g.bias.begin(), g.bias.end(), 0.0);
      }
      double sw = 0.0;
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t r = order[b];
        const double margin = forward(m, data.x.row(r), act);
        backward(m, act, data.w[r] * (sigmoid(margin) - data.y[r]), grad);
        sw += data.w[r];
      }
      for (std::size_t l = 0; l < m.layers.size(); ++l) {
        auto& wv = velocity[l].weights.data();
        auto& wg = grad[l].weights.data();
        auto& wp = m.layers[l].weights.data();
        for (std::size_t i = 0; i < wp.size(); ++i) {
          wv[i] = cfg.momentum * wv[i] - cfg.mlp_learning_rate * wg[i] / sw;
          wp[i] += wv[i];
        }
        auto& bv = velocity[l].bias;
        for (std::size_t i = 0; i < bv.size(); ++i) {
          bv[i] = cfg.momentum * bv[i] - cfg.mlp_learning_rate * grad[l].bias[i] / sw;
          m.layers[l].bias[i] += bv[i];
        }
      }
    }
    m.epochs_run = epoch + 1;
    if (!early_stopping) continue;
    for (std::size_t i = 0; i < split.valid.size(); ++i) valid_scores[i] = forward(m, data.x.row(split.valid[i]), act);
    bool finite = std::all_of(valid_scores.begin(), valid_scores.end(), [](double v) { return std::isfinite(v); });
    if (!finite) throw ComputeError("MLP diverged: non-finite outputs (lower the learning rate)");
    const double auc = metrics::roc_auc(valid_y, valid_scores);
    if (auc > best_auc) {
      best_auc = auc;
      best = m.layers;
      since_best = 0;
    } else if (++since_best >= cfg.mlp_patience) {
      break;
    }
  }
  if (early_stopping) m.layers = std::move(best);
  for (const auto& l : m.layers)
    for (double v : l.weights.data())
      if (!std::isfinite(v)) throw ComputeError("MLP diverged: non-finite weights");
  return m;
}

}  // namespace creditx::models

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "creditx/models.hpp"

namespace creditx::models {

namespace {

double objective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                 const Eigen::VectorXd& beta, double ridge) {
  const Eigen::VectorXd eta = x * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double e = eta(i);
    // log(1 + exp(e)) without overflow
    const double softplus = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
    ll += w(i) * (y(i) * e - softplus);
  }
  return ll - 0.5 * ridge * beta.tail(beta.size() - 1).squaredNorm();
}

}  // namespace

QuantileBinning QuantileBinning::fit(const Matrix& x, std::size_t n_bins) {
  if (n_bins < 1) throw ConfigError("n_bins must be at least 1");
  QuantileBinning b;
  b.n_bins = n_bins;
  for (std::size_t c = 0; c < x.cols(); ++c) {
    std::vector<double> v;
    for (std::size_t r = 0; r < x.rows(); ++r)
      if (!is_missing(x(r, c))) v.push_back(x(r, c));
    std::sort(v.begin(), v.end());
    std::vector<double> cuts;
    const std::size_t m = v.size();
    for (std::size_t k = 1; k < n_bins && m > 0; ++k) {
      std::size_t idx = (k * m + n_bins - 1) / n_bins;  // ceil(k m / B)
      idx = idx == 0 ? 0 : idx - 1;
      const double cut = v[idx];
      if (cut < v.back() && (cuts.empty() || cut > cuts.back())) cuts.push_back(cut);
    }
    b.cuts.push_back(std::move(cuts));
  }
  return b;
}

std::size_t QuantileBinning::bin_of(std::size_t col, double value) const {
  const auto& c = cuts[col];
  return static_cast<std::size_t>(std::lower_bound(c.begin(), c.end(), value) - c.begin());
}

Matrix QuantileBinning::transform(const Matrix& x) const {
  std::size_t width = 0;
  for (std::size_t c = 0; c < cuts.size(); ++c) width += bins(c);  // (B - 1) indicators + missing
  Matrix out(x.rows(), width, 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    std::size_t offset = 0;
    for (std::size_t c = 0; c < cuts.size(); ++c) {
      const double v = x(r, c);
      if (is_missing(v)) {
        out(r, offset + bins(c) - 1) = 1.0;
      } else if (const auto b = bin_of(c, v); b > 0) {
        out(r, offset + b - 1) = 1.0;
      }
      offset += bins(c);
    }
  }
  return out;
}

std::vector<std::string> QuantileBinning::design_names(const std::vector<std::string>& names) const {
  std::vector<std::string> out;
  for (std::size_t c = 0; c < cuts.size(); ++c) {
    for (std::size_t b = 1; b < bins(c); ++b) out.push_back(names[c] + "#bin" + std::to_string(b));
    out.push_back(names[c] + "#missing");
  }
  return out;
}

nlohmann::json QuantileBinning::to_json() const { return {{"n_bins", n_bins}, {"cuts", cuts}}; }

QuantileBinning QuantileBinning::from_json(const nlohmann::json& j) {
  QuantileBinning b;
  b.n_bins = j.at("n_bins").get<std::size_t>();
  b.cuts = j.at("cuts").get<std::vector<std::vector<double>>>();
  return b;
}

double LogisticModel::margin(std::span<const double> raw_row) const {
  double z = intercept;
  if (binning) {
    Matrix one(1, raw_row.size(), std::vector<double>(raw_row.begin(), raw_row.end()));
    const Matrix d = binning->transform(one);
    for (std::size_t j = 0; j < coefficients.size(); ++j) z += coefficients[j] * d(0, j);
  } else {
    for (std::size_t j = 0; j < coefficients.size(); ++j) {
      const double v = is_missing(raw_row[j]) ? imputer.medians[j] : raw_row[j];
      z += coefficients[j] * v;
    }
  }
  return z;
}

LogisticModel fit_logistic_design(const Matrix& design, const std::vector<int>& labels,
                                  const std::vector<double>& weights, const TrainConfig& config) {
  const auto n = static_cast<Eigen::Index>(design.rows());
  const auto d = static_cast<Eigen::Index>(design.cols());
  Eigen::MatrixXd x(n, d + 1);
  Eigen::VectorXd y(n), w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double v = design(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      if (is_missing(v)) throw DataError("logistic design contains missing values");
      x(i, j + 1) = v;
    }
    y(i) = labels[static_cast<std::size_t>(i)];
    w(i) = weights[static_cast<std::size_t>(i)];
  }
  double sy = 0.0, sw = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    sy += w(i) * y(i);
    sw += w(i);
  }
  if (sy <= 0.0 || sy >= sw) throw DataError("logistic regression needs both classes");

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d + 1);
  beta(0) = logit(sy / sw);
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(d + 1, config.ridge);
  penalty(0) = 0.0;

  LogisticModel m;
  double obj = objective(x, y, w, beta, config.ridge);
  for (std::size_t it = 0; it < config.newton_max_iter; ++it) {
    const Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd p(n), s(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p(i) = sigmoid(eta(i));
      s(i) = w(i) * p(i) * (1.0 - p(i));
    }
    const Eigen::VectorXd grad = x.transpose() * (w.cwiseProduct(y - p)) - penalty.cwiseProduct(beta);
    m.gradient_norm = grad.cwiseAbs().maxCoeff();
    m.iterations = it;
    if (m.gradient_norm < config.newton_tol) {
      m.converged = true;
      break;
    }
    Eigen::MatrixXd h = x.transpose() * s.asDiagonal() * x;
    h.diagonal() += penalty;
    Eigen::VectorXd step = h.ldlt().solve(grad);
    if (!step.allFinite()) {
      h.diagonal().array() += 1e-10;
      step = h.ldlt().solve(grad);
      if (!step.allFinite()) break;
    }
    // Step halving keeps the penalized likelihood non-decreasing.
    double t = 1.0;
    bool improved = false;
    for (int half = 0; half < 40; ++half, t *= 0.5) {
      const Eigen::VectorXd cand = beta + t * step;
      const double cand_obj = objective(x, y, w, cand, config.ridge);
      if (std::isfinite(cand_obj) && cand_obj >= obj) {
        beta = cand;
        obj = cand_obj;
        improved = true;
        break;
      }
    }
    if (!improved) {
      m.iterations = it + 1;
      break;
    }
    m.iterations = it + 1;
  }
  if (!m.converged) {
    const Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd p(n);
    for (Eigen::Index i = 0; i < n; ++i) p(i) = sigmoid(eta(i));
    const Eigen::VectorXd grad = x.transpose() * (w.cwiseProduct(y - p)) - penalty.cwiseProduct(beta);
    m.gradient_norm = grad.cwiseAbs().maxCoeff();
    m.converged = m.gradient_norm < config.newton_tol;
  }
  m.intercept = beta(0);
  m.coefficients.assign(beta.data() + 1, beta.data() + beta.size());
  return m;
}

LogisticModel fit_logistic(const Dataset& data, const TrainConfig& config) {
  data.validate();
  auto imputer = features::Imputer::fit(data.x);
  auto m = fit_logistic_design(imputer.apply(data.x), data.y, data.w, config);
  m.feature_names = data.feature_names;
  m.design_names = data.feature_names;
  m.imputer = std::move(imputer);
  return m;
}

LogisticModel fit_logistic_binned(const Dataset& data, const TrainConfig& config) {
  data.validate();
  auto binning = QuantileBinning::fit(data.x, config.n_bins);
  auto m = fit_logistic_design(binning.transform(data.x), data.y, data.w, config);
  m.feature_names = data.feature_names;
  m.design_names = binning.design_names(data.feature_names);
  m.binning = std::move(binning);
  return m;
}

}  // namespace creditx::models

#include "mguq/solvers.hpp"

#include <algorithm>
#include <cmath>

#include "mguq/rng.hpp"

namespace mguq {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

double pinball_loss(double y, double yhat, double tau) {
  double d = y - yhat;
  return d >= 0.0 ? tau * d : (tau - 1.0) * d;
}

double empirical_quantile(std::span<const double> values, double tau) {
  if (values.empty()) throw ValidationError("empirical_quantile: empty input");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  // Guard against fp noise pushing n*tau just past an integer.
  auto k = static_cast<long>(std::ceil(n * tau - 1e-12));
  k = std::clamp<long>(k, 1, static_cast<long>(sorted.size()));
  return sorted[static_cast<size_t>(k - 1)];
}

namespace {

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  explicit Standardizer(const Matrix& x) : mean(x.cols, 0.0), scale(x.cols, 1.0) {
    if (x.rows == 0) return;
    for (size_t j = 0; j < x.cols; ++j) {
      StableSum s;
      for (size_t i = 0; i < x.rows; ++i) s.add(x(i, j));
      mean[j] = s.value() / static_cast<double>(x.rows);
      StableSum v;
      for (size_t i = 0; i < x.rows; ++i) {
        double d = x(i, j) - mean[j];
        v.add(d * d);
      }
      double sd = std::sqrt(v.value() / static_cast<double>(x.rows));
      scale[j] = sd > 1e-12 ? sd : 1.0;
    }
  }

  Matrix apply(const Matrix& x) const {
    Matrix out(x.rows, x.cols);
    for (size_t i = 0; i < x.rows; ++i) {
      for (size_t j = 0; j < x.cols; ++j) {
        out(i, j) = (x(i, j) - mean[j]) / scale[j];
      }
    }
    return out;
  }

  // Maps standardized-space coefficients back to the raw feature space.
  void unscale(double b, std::span<const double> w, LinearModel& model) const {
    model.weights.assign(w.begin(), w.end());
    model.intercept = b;
    for (size_t j = 0; j < w.size(); ++j) {
      model.weights[j] = w[j] / scale[j];
      model.intercept -= w[j] * mean[j] / scale[j];
    }
  }
};

// Cholesky solve of a symmetric positive definite system, with escalating
// jitter if the factorization stalls on a semidefinite Hessian.
bool solve_spd(std::vector<double> a, std::vector<double> b, size_t n,
               std::vector<double>& out) {
  for (double jitter = 0.0; jitter < 1e-2; jitter = jitter == 0.0 ? 1e-12 : jitter * 100) {
    std::vector<double> l = a;
    for (size_t i = 0; i < n; ++i) l[i * n + i] += jitter;
    bool ok = true;
    for (size_t i = 0; i < n && ok; ++i) {
      for (size_t j = 0; j <= i; ++j) {
        double sum = l[i * n + j];
        for (size_t k = 0; k < j; ++k) sum -= l[i * n + k] * l[j * n + k];
        if (i == j) {
          if (sum <= 0.0) {
            ok = false;
            break;
          }
          l[i * n + i] = std::sqrt(sum);
        } else {
          l[i * n + j] = sum / l[j * n + j];
        }
      }
    }
    if (!ok) continue;
    std::vector<double> y(n);
    for (size_t i = 0; i < n; ++i) {
      double sum = b[i];
      for (size_t k = 0; k < i; ++k) sum -= l[i * n + k] * y[k];
      y[i] = sum / l[i * n + i];
    }
    out.assign(n, 0.0);
    for (size_t ii = n; ii-- > 0;) {
      double sum = y[ii];
      for (size_t k = ii + 1; k < n; ++k) sum -= l[k * n + ii] * out[k];
      out[ii] = sum / l[ii * n + ii];
    }
    return true;
  }
  return false;
}

double softplus(double z) {
  // log(1 + exp(z)) without overflow
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double logistic_objective(const Matrix& x, std::span<const uint8_t> y, double b,
                          std::span<const double> w, double l2) {
  StableSum loss;
  for (size_t i = 0; i < x.rows; ++i) {
    double z = b;
    const double* xi = x.data.data() + i * x.cols;
    for (size_t j = 0; j < x.cols; ++j) z += w[j] * xi[j];
    loss.add(softplus(z) - (y[i] ? z : 0.0));
  }
  double obj = loss.value() / static_cast<double>(x.rows);
  double pen = 0.0;
  for (double wj : w) pen += wj * wj;
  return obj + 0.5 * l2 * pen;
}

}  // namespace

FitResult fit_logistic(const Matrix& features, std::span<const uint8_t> labels,
                       const FitConfig& config) {
  const size_t n = features.rows;
  const size_t d = features.cols;
  if (n == 0 || labels.size() != n) {
    throw ValidationError("fit_logistic: empty data or label mismatch");
  }
  for (double v : features.data) {
    if (!std::isfinite(v)) throw ValidationError("fit_logistic: non-finite feature");
  }

  const Standardizer std_(features);
  const Matrix x = std_.apply(features);
  const double l2 = config.l2_penalty;
  const size_t dim = d + 1;  // intercept first

  std::vector<double> beta(dim, 0.0);
  std::vector<double> grad(dim), hess(dim * dim), step;
  std::vector<double> p(n);

  double obj = logistic_objective(x, labels, beta[0],
                                  std::span<const double>(beta).subspan(1), l2);
  bool converged = false;
  int iter = 0;
  double gnorm = 0.0;
  for (; iter < config.max_iter; ++iter) {
    std::fill(grad.begin(), grad.end(), 0.0);
    std::fill(hess.begin(), hess.end(), 0.0);
    for (size_t i = 0; i < n; ++i) {
      double z = beta[0];
      const double* xi = x.data.data() + i * x.cols;
      for (size_t j = 0; j < d; ++j) z += beta[j + 1] * xi[j];
      p[i] = sigmoid(z);
      const double r = p[i] - (labels[i] ? 1.0 : 0.0);
      const double wgt = p[i] * (1.0 - p[i]);
      grad[0] += r;
      hess[0] += wgt;
      for (size_t j = 0; j < d; ++j) {
        grad[j + 1] += r * xi[j];
        hess[j + 1] += wgt * xi[j];  // first row/col
        for (size_t k = 0; k <= j; ++k) {
          hess[(j + 1) * dim + (k + 1)] += wgt * xi[j] * xi[k];
        }
      }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (auto& g : grad) g *= inv_n;
    for (auto& h : hess) h *= inv_n;
    for (size_t j = 1; j < dim; ++j) {
      grad[j] += l2 * beta[j];
      hess[j * dim + j] += l2;
    }
    // mirror the symmetric parts
    for (size_t j = 0; j < dim; ++j) {
      for (size_t k = j + 1; k < dim; ++k) hess[j * dim + k] = hess[k * dim + j];
    }
    gnorm = 0.0;
    for (double g : grad) gnorm = std::max(gnorm, std::abs(g));
    if (gnorm < config.tol) {
      converged = true;
      break;
    }
    if (!solve_spd(hess, grad, dim, step)) break;
    double descent = 0.0;
    for (size_t j = 0; j < dim; ++j) descent += grad[j] * step[j];
    double t = 1.0;
    std::vector<double> trial(dim);
    bool moved = false;
    for (int ls = 0; ls < 40; ++ls, t *= 0.5) {
      for (size_t j = 0; j < dim; ++j) trial[j] = beta[j] - t * step[j];
      double trial_obj = logistic_objective(
          x, labels, trial[0], std::span<const double>(trial).subspan(1), l2);
      if (trial_obj <= obj - 1e-4 * t * descent) {
        beta = trial;
        obj = trial_obj;
        moved = true;
        break;
      }
    }
    if (!moved) break;  // no progress possible at fp resolution
  }

  FitResult result;
  result.converged = converged;
  result.iterations = iter;
  result.objective = obj;
  result.gradient_norm = gnorm;
  std_.unscale(beta[0], std::span<const double>(beta).subspan(1), result.model);
  return result;
}

namespace {

double quantile_objective(const Matrix& x, std::span<const double> y, double b,
                          std::span<const double> w, double tau, double l1) {
  StableSum loss;
  for (size_t i = 0; i < x.rows; ++i) {
    double z = b;
    const double* xi = x.data.data() + i * x.cols;
    for (size_t j = 0; j < x.cols; ++j) z += w[j] * xi[j];
    loss.add(pinball_loss(y[i], z, tau));
  }
  double obj = loss.value() / static_cast<double>(x.rows);
  for (double wj : w) obj += l1 * std::abs(wj);
  return obj;
}

}  // namespace

FitResult fit_quantile(const Matrix& features, std::span<const double> targets,
                       double tau, const FitConfig& config) {
  const size_t n = features.rows;
  const size_t d = features.cols;
  if (n == 0 || targets.size() != n) {
    throw ValidationError("fit_quantile: empty data or target mismatch");
  }
  if (!(tau > 0.0 && tau < 1.0)) throw ValidationError("fit_quantile: tau outside (0, 1)");
  for (double v : targets) {
    if (!std::isfinite(v)) throw ValidationError("fit_quantile: non-finite target");
  }
  for (double v : features.data) {
    if (!std::isfinite(v)) throw ValidationError("fit_quantile: non-finite feature");
  }

  const Standardizer std_(features);
  const Matrix x = std_.apply(features);
  const double l1 = config.l1_penalty;

  std::vector<double> w(d, 0.0);
  double b = empirical_quantile(targets, tau);

  double sd = 0.0;
  {
    StableSum m, v;
    for (double t : targets) m.add(t);
    const double mean = m.value() / static_cast<double>(n);
    for (double t : targets) v.add((t - mean) * (t - mean));
    sd = std::sqrt(v.value() / static_cast<double>(n));
  }
  const double step0 = 0.5 * std::max(0.05, sd);

  std::vector<double> best_w = w;
  double best_b = b;
  double best_obj = quantile_objective(x, targets, b, w, tau, l1);
  int stall = 0;
  bool converged = false;
  int iter = 0;
  std::vector<double> gw(d);
  for (; iter < config.max_iter; ++iter) {
    std::fill(gw.begin(), gw.end(), 0.0);
    double gb = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double z = b;
      const double* xi = x.data.data() + i * x.cols;
      for (size_t j = 0; j < d; ++j) z += w[j] * xi[j];
      double dldz;  // derivative of the pinball term in the prediction
      if (targets[i] > z) {
        dldz = -tau;
      } else if (targets[i] < z) {
        dldz = 1.0 - tau;
      } else {
        dldz = 0.0;
      }
      gb += dldz;
      for (size_t j = 0; j < d; ++j) gw[j] += dldz * xi[j];
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    const double eta = step0 / std::sqrt(static_cast<double>(iter + 1));
    b -= eta * gb * inv_n;
    for (size_t j = 0; j < d; ++j) {
      double v = w[j] - eta * gw[j] * inv_n;
      const double shrink = eta * l1;
      w[j] = v > shrink ? v - shrink : (v < -shrink ? v + shrink : 0.0);
    }
    const double obj = quantile_objective(x, targets, b, w, tau, l1);
    if (obj < best_obj - config.tol * std::max(1.0, std::abs(best_obj))) {
      best_obj = obj;
      best_w = w;
      best_b = b;
      stall = 0;
    } else {
      if (obj < best_obj) {
        best_obj = obj;
        best_w = w;
        best_b = b;
      }
      if (++stall >= 50) {
        converged = true;
        ++iter;
        break;
      }
    }
  }

  // The intercept subproblem is exactly solvable: refit it against the
  // residuals of the best weights.
  {
    std::vector<double> residuals(n);
    for (size_t i = 0; i < n; ++i) {
      double z = 0.0;
      const double* xi = x.data.data() + i * x.cols;
      for (size_t j = 0; j < d; ++j) z += best_w[j] * xi[j];
      residuals[i] = targets[i] - z;
    }
    double b_exact = empirical_quantile(residuals, tau);
    double obj = quantile_objective(x, targets, b_exact, best_w, tau, l1);
    if (obj <= best_obj) {
      best_obj = obj;
      best_b = b_exact;
    }
  }

  FitResult result;
  result.converged = converged;
  result.iterations = iter;
  result.objective = best_obj;
  std_.unscale(best_b, best_w, result.model);
  return result;
}

double cross_validate_penalty(const Matrix& features, std::span<const double> targets,
                              double tau, std::span<const double> grid, int k_folds,
                              uint64_t seed, const FitConfig& config) {
  if (grid.empty()) throw ValidationError("cross_validate_penalty: empty grid");
  if (k_folds < 2) throw ValidationError("cross_validate_penalty: k_folds must be >= 2");
  const size_t n = features.rows;
  if (n < static_cast<size_t>(k_folds)) {
    throw ValidationError("cross_validate_penalty: fewer samples than folds");
  }

  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(mix_seed(seed, "cv_folds"));
  rng.shuffle(order);
  std::vector<int> fold(n);
  for (size_t pos = 0; pos < n; ++pos) {
    fold[order[pos]] = static_cast<int>(pos % static_cast<size_t>(k_folds));
  }

  std::vector<double> mean_loss(grid.size(), 0.0);
  for (size_t gi = 0; gi < grid.size(); ++gi) {
    FitConfig fold_config = config;
    fold_config.l1_penalty = grid[gi];
    StableSum held_out;
    size_t held_count = 0;
    for (int f = 0; f < k_folds; ++f) {
      Matrix train(0, features.cols);
      std::vector<double> train_y;
      train.data.reserve(features.data.size());
      for (size_t i = 0; i < n; ++i) {
        if (fold[i] == f) continue;
        auto r = features.row(i);
        train.data.insert(train.data.end(), r.begin(), r.end());
        train_y.push_back(targets[i]);
        ++train.rows;
      }
      FitResult fit = fit_quantile(train, train_y, tau, fold_config);
      for (size_t i = 0; i < n; ++i) {
        if (fold[i] != f) continue;
        held_out.add(pinball_loss(targets[i], fit.model.predict_linear(features.row(i)), tau));
        ++held_count;
      }
    }
    mean_loss[gi] = held_out.value() / static_cast<double>(held_count);
  }

  const double lo = *std::min_element(mean_loss.begin(), mean_loss.end());
  const double tie_band = lo + 1e-3 * std::max(std::abs(lo), 1e-12) + 1e-12;
  double chosen = -1.0;
  for (size_t gi = 0; gi < grid.size(); ++gi) {
    if (mean_loss[gi] <= tie_band && grid[gi] > chosen) chosen = grid[gi];
  }
  return chosen;
}

}  // namespace mguq

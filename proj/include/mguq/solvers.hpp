#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mguq/common.hpp"

namespace mguq {

// Dense row-major matrix. Feature counts here stay small (a few dozen), so no
// linear-algebra dependency is warranted.
struct Matrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(size_t r, size_t c) { return data[r * cols + c]; }
  double operator()(size_t r, size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(size_t r) const {
    return std::span<const double>(data).subspan(r * cols, cols);
  }
};

struct LinearModel {
  double intercept = 0.0;
  std::vector<double> weights;
  std::vector<std::string> feature_names;

  double predict_linear(std::span<const double> x) const {
    double z = intercept;
    for (size_t j = 0; j < weights.size(); ++j) z += weights[j] * x[j];
    return z;
  }
};

struct FitConfig {
  int max_iter = 1000;
  double tol = 1e-6;       // logistic: gradient norm; quantile: relative objective change
  double l1_penalty = 0.0; // quantile regression
  double l2_penalty = 0.0; // logistic regression
};

struct FitResult {
  LinearModel model;
  bool converged = false;
  int iterations = 0;
  double objective = 0.0;
  double gradient_norm = 0.0;
};

double sigmoid(double z);

// tau * (y - yhat) when y >= yhat, else (1 - tau) * (yhat - y).
double pinball_loss(double y, double yhat, double tau);

// Order statistic k = ceil(n * tau), 1-indexed and clamped to [1, n].
double empirical_quantile(std::span<const double> values, double tau);

// Minimizes mean binary cross-entropy of sigmoid(intercept + w.x) plus
// l2_penalty/2 * |w|^2 (intercept unpenalized, penalty in standardized
// feature space). Damped Newton; stops when the gradient infinity norm drops
// below tol. Non-convergence (e.g. separable data with no penalty) is
// reported through the flag, not an error.
FitResult fit_logistic(const Matrix& features, std::span<const uint8_t> labels,
                       const FitConfig& config = {});

// Minimizes mean pinball_tau plus l1_penalty * |w|_1 (intercept unpenalized)
// by proximal subgradient descent with best-iterate tracking and an exact
// intercept refit. Deterministic.
FitResult fit_quantile(const Matrix& features, std::span<const double> targets,
                       double tau, const FitConfig& config = {});

// Returns the grid value with the smallest mean held-out pinball loss;
// near-ties resolve toward the larger penalty. Fold assignment is a seeded
// shuffle, deterministic given (data, grid, k_folds, seed).
double cross_validate_penalty(const Matrix& features, std::span<const double> targets,
                              double tau, std::span<const double> grid, int k_folds,
                              uint64_t seed, const FitConfig& config = {});

}  // namespace mguq

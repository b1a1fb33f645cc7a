#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "varprec/distributions.hpp"
#include "varprec/rng.hpp"
#include "varprec/tensor.hpp"

namespace varprec::harness {

struct Matrix {
  std::int64_t rows = 0, cols = 0;
  std::vector<double> data;  // row-major

  Matrix() = default;
  Matrix(std::int64_t r, std::int64_t c)
      : rows(r), cols(c), data(static_cast<std::size_t>(r * c), 0.0) {}

  double& at(std::int64_t r, std::int64_t c) { return data[static_cast<std::size_t>(r * cols + c)]; }
  double at(std::int64_t r, std::int64_t c) const { return data[static_cast<std::size_t>(r * cols + c)]; }
  std::span<const double> row(std::int64_t r) const {
    return {data.data() + r * cols, static_cast<std::size_t>(cols)};
  }
  Matrix gather_rows(std::span<const std::int64_t> idx) const;
  nd::Tensor tensor() const { return nd::Tensor::from({rows, cols}, data); }
};

// Per-column affine standardization. Constant columns keep scale 1 so the
// transform stays invertible.
struct Whitening {
  std::vector<double> mean, scale;
  Matrix apply(const Matrix& m) const;
  Matrix invert(const Matrix& m) const;
  bool is_identity() const;
};

Whitening fit_whitening(const Matrix& m, std::span<const std::int64_t> rows);
Whitening identity_whitening(std::int64_t cols);

struct ToyTruth {
  std::vector<double> grid_x;  // raw covariate units
  std::vector<double> true_mean, true_std;
};

struct Dataset {
  Matrix x, y;  // whitened storage, all rows
  Whitening wx, wy;
  std::vector<std::int64_t> train_rows, val_rows;
  std::string provenance;  // toy | csv | idx | synth
  std::optional<ToyTruth> truth;

  Matrix x_train() const { return x.gather_rows(train_rows); }
  Matrix y_train() const { return y.gather_rows(train_rows); }
  Matrix x_val() const { return x.gather_rows(val_rows); }
  Matrix y_val() const { return y.gather_rows(val_rows); }
};

// heteroscedastic toy process y = x sin(x) + eps, eps | x ~ N(0, (0.3 (1+x))^2)
double toy_true_mean(double x);
double toy_true_std(double x);

// train covariates Uniform[0, 10], fresh validation draws from the process,
// an equally spaced evaluation grid over [-4, 14] with the true curves
Dataset toy_generate(int n_train, int n_val, int n_grid, Rng& rng);

// numeric CSV with a header row; named target columns become y, the rest x;
// whitening statistics come from the training split only
Dataset load_csv(const std::string& path, const std::vector<std::string>& target_columns,
                 double val_fraction, Rng& rng);

// IDX image file (MNIST container format); pixels scaled to [0, 1];
// side > 0 average-pools each image down to side x side
Dataset load_idx(const std::string& images_path, double val_fraction, Rng& rng, int side = 0);

// directory of per-image CSV files (one image per file, any rectangular grid)
Dataset load_image_csv_dir(const std::string& dir, double val_fraction, Rng& rng);

// procedural 16x16-style digit glyphs with random shift/scale/contrast and
// pixel noise; a self-contained stand-in for file-based image data
Dataset synth_digits(int n, int side, double val_fraction, Rng& rng);

// move a whitened-space predictive into original target units
dists::PredictiveDist dewhiten_predictive(const dists::PredictiveDist& p,
                                          std::span<const double> scales,
                                          std::span<const double> means);

}  // namespace varprec::harness

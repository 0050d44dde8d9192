#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vrrae/matrix.hpp"
#include "vrrae/rng.hpp"

namespace vrrae {

/// Columns are flattened images (row-major pixel order) with values in [0,1].
struct Dataset {
  Matrix x;  // D x N
  Index height = 0;
  Index width = 0;
  std::vector<std::pair<double, double>> centers;  // synthetic bumps only

  Index dim() const { return x.rows(); }
  Index count() const { return x.cols(); }
};

/// Gaussian bumps of fixed spread and magnitude on the unit square.
struct BumpParams {
  Index grid_points = 10;   // per axis; grid_points^2 training samples
  Index image_size = 32;    // square images
  double sigma = 0.08;      // spread, in unit-square coordinates
  double magnitude = 1.0;
  double center_min = 0.2;
  double center_max = 0.8;
};

/// Deterministic training set: one bump per point of the uniform
/// grid_points x grid_points center grid.
Dataset gen_gaussian_bumps(const BumpParams& params);

/// Bumps at continuous random centers in the same range (off-grid).
Dataset gen_test_bumps(const BumpParams& params, Index count, Rng& rng);

/// Evaluates one bump image into `out` (size image_size^2, row-major).
void render_bump(const BumpParams& params, double cx, double cy, std::span<double> out);

/// IDX (big-endian) loader; pixels scaled to [0,1]. labels_path, when given,
/// is validated and must carry the same sample count. subset > 0 keeps the
/// first subset images.
Dataset load_idx(const std::string& images_path,
                 const std::optional<std::string>& labels_path = std::nullopt,
                 Index subset = 0);

/// Project interchange format: one CSV row per sample plus a key=value
/// sidecar (<path>.meta) with height/width. Values round-trip exactly.
void save_dataset_csv(const Dataset& ds, const std::string& path);
Dataset load_dataset_csv(const std::string& path);

/// Binary 8-bit PGM; values clamped from [0,1].
void write_pgm(const std::string& path, std::span<const double> pixels, Index height,
               Index width);

/// A horizontal strip of same-sized images in one PGM.
void write_pgm_strip(const std::string& path, const Matrix& columns, Index height,
                     Index width);

/// Writes a synthetic-shaped corpus through the IDX container (u8 quantized).
void write_idx_images(const std::string& path, const Matrix& columns, Index height,
                      Index width);

}  // namespace vrrae

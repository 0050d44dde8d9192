#include "vrrae/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace vrrae {

namespace {

std::vector<double> grid_centers(const BumpParams& p) {
  std::vector<double> c(p.grid_points);
  if (p.grid_points == 1) {
    c[0] = 0.5 * (p.center_min + p.center_max);
    return c;
  }
  double step = (p.center_max - p.center_min) / static_cast<double>(p.grid_points - 1);
  for (Index i = 0; i < p.grid_points; ++i)
    c[i] = p.center_min + step * static_cast<double>(i);
  return c;
}

}  // namespace

void render_bump(const BumpParams& p, double cx, double cy, std::span<double> out) {
  const Index n = p.image_size;
  if (out.size() != n * n) throw ShapeError("render_bump: bad output size");
  const double inv = 1.0 / (2.0 * p.sigma * p.sigma);
  for (Index r = 0; r < n; ++r) {
    double y = (static_cast<double>(r) + 0.5) / static_cast<double>(n);
    for (Index c = 0; c < n; ++c) {
      double x = (static_cast<double>(c) + 0.5) / static_cast<double>(n);
      double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
      out[r * n + c] = p.magnitude * std::exp(-d2 * inv);
    }
  }
}

Dataset gen_gaussian_bumps(const BumpParams& p) {
  if (p.sigma <= 0.0) throw ValueError("gen_gaussian_bumps: sigma must be positive");
  auto centers = grid_centers(p);
  const Index d = p.image_size * p.image_size;
  Dataset ds;
  ds.height = p.image_size;
  ds.width = p.image_size;
  ds.x = Matrix(d, p.grid_points * p.grid_points);
  Index col = 0;
  for (Index iy = 0; iy < p.grid_points; ++iy) {
    for (Index ix = 0; ix < p.grid_points; ++ix, ++col) {
      render_bump(p, centers[ix], centers[iy], ds.x.col(col));
      ds.centers.emplace_back(centers[ix], centers[iy]);
    }
  }
  return ds;
}

Dataset gen_test_bumps(const BumpParams& p, Index count, Rng& rng) {
  if (count < 1) throw ValueError("gen_test_bumps: count must be >= 1");
  const Index d = p.image_size * p.image_size;
  Dataset ds;
  ds.height = p.image_size;
  ds.width = p.image_size;
  ds.x = Matrix(d, count);
  for (Index j = 0; j < count; ++j) {
    double cx = rng.uniform(p.center_min, p.center_max);
    double cy = rng.uniform(p.center_min, p.center_max);
    render_bump(p, cx, cy, ds.x.col(j));
    ds.centers.emplace_back(cx, cy);
  }
  return ds;
}

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path, std::size_t offset) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in)
    throw IoError(path + ": truncated at byte offset " + std::to_string(offset));
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::optional<std::string>& labels_path,
                 Index subset) {
  std::ifstream in(images_path, std::ios::binary);
  if (!in) throw IoError(images_path + ": cannot open");
  std::uint32_t magic = read_be32(in, images_path, 0);
  if (magic != 0x00000803u)
    throw IoError(images_path + ": bad IDX image magic at byte offset 0 (got 0x" +
                  [&] { char b[16]; std::snprintf(b, sizeof b, "%08x", magic); return std::string(b); }() +
                  ", want 0x00000803)");
  const Index n_total = read_be32(in, images_path, 4);
  const Index height = read_be32(in, images_path, 8);
  const Index width = read_be32(in, images_path, 12);
  const Index n = (subset > 0 && subset < n_total) ? subset : n_total;
  const Index d = height * width;

  Dataset ds;
  ds.height = height;
  ds.width = width;
  ds.x = Matrix(d, n);
  std::vector<unsigned char> row(d);
  for (Index j = 0; j < n; ++j) {
    in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(d));
    if (!in)
      throw IoError(images_path + ": truncated at byte offset " +
                    std::to_string(16 + j * d));
    for (Index i = 0; i < d; ++i)
      ds.x(i, j) = static_cast<double>(row[i]) / 255.0;
  }

  if (labels_path) {
    std::ifstream lin(*labels_path, std::ios::binary);
    if (!lin) throw IoError(*labels_path + ": cannot open");
    std::uint32_t lmagic = read_be32(lin, *labels_path, 0);
    if (lmagic != 0x00000801u)
      throw IoError(*labels_path + ": bad IDX label magic at byte offset 0");
    Index ln = read_be32(lin, *labels_path, 4);
    if (ln != n_total)
      throw IoError(*labels_path + ": label count " + std::to_string(ln) +
                    " does not match image count " + std::to_string(n_total));
  }
  return ds;
}

void save_dataset_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path + ": cannot open for writing");
  char buf[40];
  for (Index j = 0; j < ds.count(); ++j) {
    for (Index i = 0; i < ds.dim(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", ds.x(i, j));
      out << buf << (i + 1 < ds.dim() ? "," : "\n");
    }
  }
  if (!out) throw IoError(path + ": write failed");
  std::ofstream meta(path + ".meta");
  if (!meta) throw IoError(path + ".meta: cannot open for writing");
  meta << "height=" << ds.height << "\nwidth=" << ds.width << "\ncount=" << ds.count()
       << "\n";
}

Dataset load_dataset_csv(const std::string& path) {
  std::ifstream meta(path + ".meta");
  if (!meta) throw IoError(path + ".meta: cannot open");
  Index height = 0, width = 0, count = 0;
  std::string line;
  while (std::getline(meta, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    Index value = static_cast<Index>(std::stoull(line.substr(eq + 1)));
    if (key == "height") height = value;
    else if (key == "width") width = value;
    else if (key == "count") count = value;
  }
  if (height == 0 || width == 0 || count == 0)
    throw IoError(path + ".meta: missing height/width/count");

  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open");
  Dataset ds;
  ds.height = height;
  ds.width = width;
  const Index d = height * width;
  ds.x = Matrix(d, count);
  for (Index j = 0; j < count; ++j) {
    if (!std::getline(in, line))
      throw IoError(path + ": expected " + std::to_string(count) + " rows, got " +
                    std::to_string(j));
    std::stringstream ss(line);
    std::string cell;
    for (Index i = 0; i < d; ++i) {
      if (!std::getline(ss, cell, ','))
        throw IoError(path + ": row " + std::to_string(j) + " has fewer than " +
                      std::to_string(d) + " values");
      double v = std::stod(cell);
      if (!std::isfinite(v))
        throw ValueError(path + ": non-finite value in row " + std::to_string(j));
      ds.x(i, j) = v;
    }
  }
  return ds;
}

void write_pgm(const std::string& path, std::span<const double> pixels, Index height,
               Index width) {
  if (pixels.size() != height * width) throw ShapeError("write_pgm: bad pixel count");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << "P5\n" << width << " " << height << "\n255\n";
  std::vector<unsigned char> row(pixels.size());
  for (Index i = 0; i < pixels.size(); ++i) {
    double v = std::clamp(pixels[i], 0.0, 1.0);
    row[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  out.write(reinterpret_cast<const char*>(row.data()),
            static_cast<std::streamsize>(row.size()));
  if (!out) throw IoError(path + ": write failed");
}

void write_pgm_strip(const std::string& path, const Matrix& columns, Index height,
                     Index width) {
  if (columns.rows() != height * width) throw ShapeError("write_pgm_strip: bad image dim");
  const Index n = columns.cols();
  std::vector<double> canvas(height * width * std::max<Index>(n, 1), 0.0);
  for (Index j = 0; j < n; ++j) {
    auto img = columns.col(j);
    for (Index r = 0; r < height; ++r)
      for (Index c = 0; c < width; ++c)
        canvas[r * (width * n) + j * width + c] = img[r * width + c];
  }
  write_pgm(path, canvas, height, width * std::max<Index>(n, 1));
}

void write_idx_images(const std::string& path, const Matrix& columns, Index height,
                      Index width) {
  if (columns.rows() != height * width) throw ShapeError("write_idx_images: bad image dim");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path + ": cannot open for writing");
  auto put_be32 = [&](std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
  };
  put_be32(0x00000803u);
  put_be32(static_cast<std::uint32_t>(columns.cols()));
  put_be32(static_cast<std::uint32_t>(height));
  put_be32(static_cast<std::uint32_t>(width));
  std::vector<unsigned char> row(columns.rows());
  for (Index j = 0; j < columns.cols(); ++j) {
    auto img = columns.col(j);
    for (Index i = 0; i < img.size(); ++i) {
      double v = std::clamp(img[i], 0.0, 1.0);
      row[i] = static_cast<unsigned char>(std::lround(v * 255.0));
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw IoError(path + ": write failed");
}

}  // namespace vrrae

#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dudesim/rng.hpp"
#include "dudesim/types.hpp"

namespace dudesim {

// Relative spatial weighting of user arrivals over a rectangular grid.
// Row-major storage, row 0 at the low-y edge; pixel (r, c) covers
// [ox + c*p, ox + (c+1)*p) x [oy + r*p, oy + (r+1)*p).
//
// File format (UTF-8 text):
//   DENSITY v1 <width> <height> <origin_x_m> <origin_y_m> <pixel_m>
//   <height rows of width space-separated non-negative decimals>
struct DensityRaster {
  int width = 0;
  int height = 0;
  double origin_x_m = 0.0;
  double origin_y_m = 0.0;
  double pixel_m = 0.0;
  std::vector<double> weights;  // width * height entries, row-major

  double& at(int row, int col) { return weights[static_cast<std::size_t>(row) * width + col]; }
  double at(int row, int col) const { return weights[static_cast<std::size_t>(row) * width + col]; }

  std::pair<double, double> pixel_center(int row, int col) const {
    return {origin_x_m + (col + 0.5) * pixel_m, origin_y_m + (row + 0.5) * pixel_m};
  }

  // Validates shape and weights and builds the sampling prefix sums.
  // Must run before sample(); loaders and generators call it themselves.
  void finalize() {
    if (width < 1 || height < 1)
      throw ValidationError("density raster: width and height must be >= 1");
    if (!(pixel_m > 0.0))
      throw ValidationError("density raster: pixel size must be positive");
    if (weights.size() != static_cast<std::size_t>(width) * height)
      throw ValidationError("density raster: weight count does not match width*height");
    cumulative_.resize(weights.size());
    double running = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (!(weights[i] >= 0.0) || !std::isfinite(weights[i]))
        throw ValidationError("density raster: weights must be finite and non-negative");
      running += weights[i];
      cumulative_[i] = running;
    }
    if (!(running > 0.0))
      throw ValidationError("density raster: total weight must be positive");
  }

  bool covers(const Area& a) const {
    const double eps = 1e-6;
    return origin_x_m <= a.origin_x_m + eps && origin_y_m <= a.origin_y_m + eps &&
           origin_x_m + width * pixel_m >= a.origin_x_m + a.width_m - eps &&
           origin_y_m + height * pixel_m >= a.origin_y_m + a.height_m - eps;
  }

  // Weighted pixel choice, then uniform jitter inside the pixel.
  std::pair<double, double> sample(SeedStream& rng) const {
    double target = rng.next_double() * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
    if (it == cumulative_.end()) --it;
    std::size_t idx = static_cast<std::size_t>(it - cumulative_.begin());
    int row = static_cast<int>(idx) / width;
    int col = static_cast<int>(idx) % width;
    double x = origin_x_m + (col + rng.next_double()) * pixel_m;
    double y = origin_y_m + (row + rng.next_double()) * pixel_m;
    return {x, y};
  }

 private:
  std::vector<double> cumulative_;
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

inline double parse_double(const std::string& tok, const std::string& where) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &pos);
  } catch (const std::exception&) {
    throw ParseError(where + ": expected a number, got '" + tok + "'");
  }
  if (pos != tok.size())
    throw ParseError(where + ": trailing characters in number '" + tok + "'");
  return v;
}

inline long parse_long(const std::string& tok, const std::string& where) {
  std::size_t pos = 0;
  long v = 0;
  try {
    v = std::stol(tok, &pos);
  } catch (const std::exception&) {
    throw ParseError(where + ": expected an integer, got '" + tok + "'");
  }
  if (pos != tok.size())
    throw ParseError(where + ": trailing characters in integer '" + tok + "'");
  return v;
}

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline bool parse_bool(const std::string& v, const std::string& where) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ParseError(where + ": expected true/false, got '" + v + "'");
}

}  // namespace detail

inline DensityRaster load_density_raster(std::istream& in, const std::string& name) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(name + ": empty file");
  auto head = detail::split_ws(line);
  if (head.size() != 7 || head[0] != "DENSITY" || head[1] != "v1")
    throw ParseError(name + ":1: expected header 'DENSITY v1 <w> <h> <ox> <oy> <pixel>'");
  DensityRaster r;
  r.width = static_cast<int>(detail::parse_long(head[2], name + ":1"));
  r.height = static_cast<int>(detail::parse_long(head[3], name + ":1"));
  r.origin_x_m = detail::parse_double(head[4], name + ":1");
  r.origin_y_m = detail::parse_double(head[5], name + ":1");
  r.pixel_m = detail::parse_double(head[6], name + ":1");
  if (r.width < 1 || r.height < 1)
    throw ParseError(name + ":1: width and height must be >= 1");
  r.weights.reserve(static_cast<std::size_t>(r.width) * r.height);
  int lineno = 1;
  int rows_read = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto toks = detail::split_ws(line);
    if (toks.empty()) continue;  // blank lines are tolerated
    if (rows_read >= r.height)
      throw ParseError(name + ":" + std::to_string(lineno) + ": more rows than declared height");
    if (static_cast<int>(toks.size()) != r.width)
      throw ParseError(name + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(r.width) + " values, got " + std::to_string(toks.size()));
    for (const auto& t : toks)
      r.weights.push_back(detail::parse_double(t, name + ":" + std::to_string(lineno)));
    ++rows_read;
  }
  if (rows_read != r.height)
    throw ParseError(name + ": expected " + std::to_string(r.height) + " rows, got " +
                     std::to_string(rows_read));
  r.finalize();
  return r;
}

inline DensityRaster load_density_raster(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError(path + ": cannot open density raster");
  return load_density_raster(f, path);
}

inline void save_density_raster(const DensityRaster& r, std::ostream& out) {
  out << "DENSITY v1 " << r.width << ' ' << r.height << ' '
      << std::setprecision(17) << r.origin_x_m << ' ' << r.origin_y_m << ' ' << r.pixel_m << '\n';
  for (int row = 0; row < r.height; ++row) {
    for (int col = 0; col < r.width; ++col) {
      if (col) out << ' ';
      out << r.at(row, col);
    }
    out << '\n';
  }
}

inline void save_density_raster(const DensityRaster& r, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ParseError(path + ": cannot open for writing");
  save_density_raster(r, f);
}

}  // namespace dudesim

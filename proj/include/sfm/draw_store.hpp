#pragma once

// Posterior draws on disk: manifest.json plus one little-endian float64 file
// per parameter with one row per stored draw. Parameters whose size follows
// the truncation level are padded with zeros to the widest row; the per-draw
// truncation is stored in h.f64.

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "sfm/linalg.hpp"

namespace sfm {

/// How a stored row expands into a parameter given the draw's truncation H.
enum class Layout {
  Fixed,      // constant width
  ByH,        // H values
  PByH,       // p x H, column-major
  RowsByH,    // rows x H, column-major (factors)
  MByHByH,    // m matrices of H x H, each column-major
  HByH,       // one H x H matrix, column-major
};

const char* to_string(Layout layout);
Layout layout_from_string(const std::string& s);

struct ParamSeries {
  Layout layout = Layout::Fixed;
  std::vector<std::vector<double>> rows;
};

class DrawStore {
 public:
  nlohmann::json manifest = nlohmann::json::object();
  std::vector<int> h;
  std::map<std::string, ParamSeries> params;

  Index draws() const noexcept { return static_cast<Index>(h.size()); }
  bool has(const std::string& name) const { return params.count(name) > 0; }
  /// Append one row; all rows for a draw must be appended before next_draw.
  void append(const std::string& name, Layout layout, std::vector<double> values);
  void append(const std::string& name, Layout layout, const MatrixXd& values);
  void next_draw(int truncation) { h.push_back(truncation); }

  /// Row `draw` of parameter `name` reshaped to rows x cols (column-major).
  MatrixXd matrix(const std::string& name, Index draw, Index rows, Index cols) const;
  const std::vector<double>& row(const std::string& name, Index draw) const;

  /// Writes manifest.json and the .f64 files into `dir` (created if needed).
  void write(const std::string& dir) const;
  static DrawStore read(const std::string& dir);
};

/// Raw little-endian float64 matrix I/O used by the store.
void write_f64(const std::string& path, const std::vector<double>& values);
std::vector<double> read_f64(const std::string& path);

}  // namespace sfm

#include "sfm/draw_store.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "sfm/errors.hpp"

namespace sfm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t out = 0;
  for (int i = 0; i < 8; ++i) out |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
  return out;
}

std::size_t expected_width(Layout layout, int h, const json& dims, std::size_t fixed) {
  const auto get = [&](const char* key) { return dims.at(key).get<std::size_t>(); };
  const std::size_t hh = static_cast<std::size_t>(h);
  switch (layout) {
    case Layout::Fixed: return fixed;
    case Layout::ByH: return hh;
    case Layout::PByH: return get("p") * hh;
    case Layout::RowsByH: return get("factor_rows") * hh;
    case Layout::MByHByH: return get("m") * hh * hh;
    case Layout::HByH: return hh * hh;
  }
  return fixed;
}

}  // namespace

const char* to_string(Layout layout) {
  switch (layout) {
    case Layout::Fixed: return "fixed";
    case Layout::ByH: return "h";
    case Layout::PByH: return "p_by_h";
    case Layout::RowsByH: return "rows_by_h";
    case Layout::MByHByH: return "m_by_h_by_h";
    case Layout::HByH: return "h_by_h";
  }
  return "?";
}

Layout layout_from_string(const std::string& s) {
  for (Layout l : {Layout::Fixed, Layout::ByH, Layout::PByH, Layout::RowsByH, Layout::MByHByH, Layout::HByH})
    if (s == to_string(l)) return l;
  throw DataError("unknown parameter layout '" + s + "' in manifest");
}

void DrawStore::append(const std::string& name, Layout layout, std::vector<double> values) {
  ParamSeries& series = params[name];
  series.layout = layout;
  series.rows.push_back(std::move(values));
}

void DrawStore::append(const std::string& name, Layout layout, const MatrixXd& values) {
  append(name, layout, std::vector<double>(values.data(), values.data() + values.size()));
}

const std::vector<double>& DrawStore::row(const std::string& name, Index draw) const {
  const auto it = params.find(name);
  if (it == params.end()) throw ArgumentError("draw store has no parameter '" + name + "'");
  if (draw < 0 || draw >= static_cast<Index>(it->second.rows.size())) throw ArgumentError("draw index out of range");
  return it->second.rows[static_cast<std::size_t>(draw)];
}

MatrixXd DrawStore::matrix(const std::string& name, Index draw, Index rows, Index cols) const {
  const std::vector<double>& r = row(name, draw);
  if (static_cast<Index>(r.size()) < rows * cols) throw DataError("parameter '" + name + "' row too short");
  return Eigen::Map<const MatrixXd>(r.data(), rows, cols);
}

void write_f64(const std::string& path, const std::vector<double>& values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path + " for writing");
  for (double v : values) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    bits = to_little(bits);
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  if (!out) throw DataError("failed writing " + path);
}

std::vector<double> read_f64(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % 8 != 0) throw DataError(path + " is not a whole number of float64 values");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, bytes.data() + 8 * i, sizeof bits);
    bits = to_little(bits);
    std::memcpy(&out[i], &bits, sizeof bits);
  }
  return out;
}

void DrawStore::write(const std::string& dir) const {
  fs::create_directories(dir);
  json m = manifest;
  m["draws"] = draws();
  json plist = json::object();
  {
    std::vector<double> hv(h.begin(), h.end());
    write_f64((fs::path(dir) / "h.f64").string(), hv);
  }
  for (const auto& [name, series] : params) {
    if (static_cast<Index>(series.rows.size()) != draws())
      throw InternalError("parameter '" + name + "' has " + std::to_string(series.rows.size()) + " rows for " +
                          std::to_string(draws()) + " draws");
    std::size_t width = 0;
    for (const auto& r : series.rows) width = std::max(width, r.size());
    std::vector<double> flat;
    flat.reserve(width * series.rows.size());
    for (const auto& r : series.rows) {
      flat.insert(flat.end(), r.begin(), r.end());
      flat.insert(flat.end(), width - r.size(), 0.0);
    }
    const std::string file = name + ".f64";
    write_f64((fs::path(dir) / file).string(), flat);
    plist[name] = {{"file", file}, {"width", width}, {"layout", to_string(series.layout)}};
  }
  m["params"] = plist;
  m["count_file"] = "h.f64";
  std::ofstream out(fs::path(dir) / "manifest.json", std::ios::trunc);
  if (!out) throw DataError("cannot write manifest in " + dir);
  out << m.dump(2) << "\n";
}

DrawStore DrawStore::read(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw DataError("no manifest.json in " + dir);
  DrawStore s;
  try {
    in >> s.manifest;
  } catch (const json::exception& e) {
    throw DataError("malformed manifest in " + dir + ": " + e.what());
  }
  const Index draws = s.manifest.at("draws").get<Index>();
  const std::vector<double> hv = read_f64((fs::path(dir) / "h.f64").string());
  if (static_cast<Index>(hv.size()) != draws) throw DataError("h.f64 does not match the manifest draw count");
  for (double v : hv) s.h.push_back(static_cast<int>(v));
  const json& dims = s.manifest.at("dims");
  for (const auto& [name, info] : s.manifest.at("params").items()) {
    ParamSeries series;
    series.layout = layout_from_string(info.at("layout").get<std::string>());
    const std::size_t width = info.at("width").get<std::size_t>();
    const std::vector<double> flat = read_f64((fs::path(dir) / info.at("file").get<std::string>()).string());
    if (flat.size() != width * static_cast<std::size_t>(draws)) throw DataError(name + ".f64 has the wrong size");
    for (Index d = 0; d < draws; ++d) {
      const std::size_t len = expected_width(series.layout, s.h[static_cast<std::size_t>(d)], dims, width);
      if (len > width) throw DataError(name + ": row narrower than its truncation requires");
      const double* start = flat.data() + static_cast<std::size_t>(d) * width;
      series.rows.emplace_back(start, start + len);
    }
    s.params[name] = std::move(series);
  }
  s.manifest.erase("params");
  s.manifest.erase("count_file");
  s.manifest.erase("draws");
  return s;
}

}  // namespace sfm

#include "densepoint/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "densepoint/errors.hpp"

namespace densepoint {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + path.string() + "' for reading");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) {
    throw IoError("write failed for '" + path.string() + "'");
  }
}

std::vector<std::uint8_t> read_binary_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + path.string() + "' for reading");
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_binary_file(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw IoError("write failed for '" + path.string() + "'");
  }
}

namespace {

std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(
                 std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

double require_number(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_number()) {
    throw FormatError(where + ": field '" + key + "' missing or not a number");
  }
  return it->get<double>();
}

std::size_t require_dimension(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_number_integer() || it->get<std::int64_t>() < 1) {
    throw FormatError(where + ": field '" + key + "' missing or not a positive integer");
  }
  return static_cast<std::size_t>(it->get<std::int64_t>());
}

}  // namespace

std::vector<ImageRecord> parse_annotations(const std::string& text, const std::string& source_name) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(source_name + ":" + std::to_string(line_of_offset(text, e.byte)) + ": " +
                      e.what());
  }
  if (!doc.is_array()) {
    throw FormatError(source_name + ":1: top-level value must be an array of images");
  }

  std::vector<ImageRecord> records;
  records.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& entry = doc[i];
    std::string where = source_name + ": entry " + std::to_string(i);
    if (!entry.is_object()) {
      throw FormatError(where + ": not an object");
    }
    ImageRecord record;
    const auto id = entry.find("id");
    if (id == entry.end() || !id->is_string()) {
      throw FormatError(where + ": field 'id' missing or not a string");
    }
    record.id = id->get<std::string>();
    where += " ('" + record.id + "')";
    record.width = require_dimension(entry, "width", where);
    record.height = require_dimension(entry, "height", where);

    const auto pts = entry.find("points");
    if (pts == entry.end() || !pts->is_array()) {
      throw FormatError(where + ": field 'points' missing or not an array");
    }
    record.points.reserve(pts->size());
    for (std::size_t k = 0; k < pts->size(); ++k) {
      const json& p = (*pts)[k];
      const std::string pwhere = where + " point " + std::to_string(k);
      if (!p.is_object()) {
        throw FormatError(pwhere + ": not an object");
      }
      record.points.push_back({require_number(p, "x", pwhere), require_number(p, "y", pwhere),
                               require_number(p, "w", pwhere), require_number(p, "h", pwhere)});
    }
    record.validate();
    records.push_back(std::move(record));
  }
  return records;
}

std::vector<ImageRecord> load_annotations(const fs::path& path) {
  return parse_annotations(read_text_file(path), path.string());
}

void store_annotations(const std::vector<ImageRecord>& records, const fs::path& path) {
  json doc = json::array();
  for (const ImageRecord& r : records) {
    json points = json::array();
    for (const PointAnnotation& p : r.points) {
      points.push_back({{"x", p.x}, {"y", p.y}, {"w", p.box_w}, {"h", p.box_h}});
    }
    doc.push_back({{"id", r.id}, {"width", r.width}, {"height", r.height}, {"points", points}});
  }
  write_text_file(path, doc.dump(1) + "\n");
}

namespace {

constexpr char kGridMagic[4] = {'D', 'P', 'G', '1'};
constexpr std::size_t kGridHeader = 12;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  }
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_grid(const DenseGrid& grid) {
  if (grid.height() > 0xffffffffu || grid.width() > 0xffffffffu) {
    throw ValidationError("encode_grid: dimensions exceed u32");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kGridHeader + 8 * grid.size());
  out.insert(out.end(), std::begin(kGridMagic), std::end(kGridMagic));
  put_u32(out, static_cast<std::uint32_t>(grid.height()));
  put_u32(out, static_cast<std::uint32_t>(grid.width()));
  for (double v : grid.values()) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
    }
  }
  return out;
}

DenseGrid decode_grid(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kGridHeader || std::memcmp(bytes.data(), kGridMagic, 4) != 0) {
    throw FormatError("grid file: bad magic header (expected DPG1)");
  }
  const std::size_t height = get_u32(bytes.data() + 4);
  const std::size_t width = get_u32(bytes.data() + 8);
  if (height == 0 || width == 0) {
    throw FormatError("grid file: zero dimension");
  }
  const std::size_t expected = kGridHeader + 8 * height * width;
  if (bytes.size() != expected) {
    throw FormatError("grid file: length mismatch, header declares " + std::to_string(height) +
                      "x" + std::to_string(width) + " (" + std::to_string(expected) +
                      " bytes) but payload has " + std::to_string(bytes.size()) + " bytes");
  }
  std::vector<double> values(height * width);
  const std::uint8_t* p = bytes.data() + kGridHeader;
  for (double& v : values) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
      bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    }
    v = std::bit_cast<double>(bits);
    p += 8;
  }
  return DenseGrid(height, width, std::move(values));
}

void store_grid(const DenseGrid& grid, const fs::path& path) {
  write_binary_file(path, encode_grid(grid));
}

DenseGrid load_grid(const fs::path& path) {
  try {
    return decode_grid(read_binary_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> grid_to_gray8(const DenseGrid& grid, bool normalize) {
  std::vector<std::uint8_t> out(grid.size());
  const double lo = grid.min();
  const double hi = grid.max();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double unit = 0.0;
    if (normalize) {
      unit = hi > lo ? (grid[i] - lo) / (hi - lo) : 0.0;
    } else {
      unit = std::clamp(grid[i], 0.0, 1.0);
    }
    // std::round rounds half away from zero.
    out[i] = static_cast<std::uint8_t>(std::clamp(std::round(unit * 255.0), 0.0, 255.0));
  }
  return out;
}

void export_pgm(const DenseGrid& grid, const fs::path& path, bool normalize) {
  const std::string header =
      "P5\n" + std::to_string(grid.width()) + " " + std::to_string(grid.height()) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  const auto pixels = grid_to_gray8(grid, normalize);
  bytes.insert(bytes.end(), pixels.begin(), pixels.end());
  write_binary_file(path, bytes);
}

RgbImage RgbImage::from_gray(const DenseGrid& grid, bool normalize) {
  RgbImage img;
  img.height = grid.height();
  img.width = grid.width();
  const auto gray = grid_to_gray8(grid, normalize);
  img.rgb.reserve(gray.size() * 3);
  for (std::uint8_t g : gray) {
    img.rgb.insert(img.rgb.end(), {g, g, g});
  }
  return img;
}

void RgbImage::set(std::size_t y, std::size_t x, std::array<std::uint8_t, 3> color) {
  if (y >= height || x >= width) {
    return;
  }
  std::copy(color.begin(), color.end(), rgb.begin() + static_cast<std::ptrdiff_t>(3 * (y * width + x)));
}

void RgbImage::draw_circle(double cx, double cy, double radius, std::array<std::uint8_t, 3> color) {
  // Mark every pixel whose centre lies within half a pixel of the circle.
  const auto y_lo = static_cast<std::ptrdiff_t>(std::floor(cy - radius - 1));
  const auto y_hi = static_cast<std::ptrdiff_t>(std::ceil(cy + radius + 1));
  const auto x_lo = static_cast<std::ptrdiff_t>(std::floor(cx - radius - 1));
  const auto x_hi = static_cast<std::ptrdiff_t>(std::ceil(cx + radius + 1));
  for (std::ptrdiff_t y = std::max<std::ptrdiff_t>(0, y_lo); y <= y_hi; ++y) {
    for (std::ptrdiff_t x = std::max<std::ptrdiff_t>(0, x_lo); x <= x_hi; ++x) {
      const double d = std::hypot(static_cast<double>(x) - cx, static_cast<double>(y) - cy);
      if (std::abs(d - radius) <= 0.5) {
        set(static_cast<std::size_t>(y), static_cast<std::size_t>(x), color);
      }
    }
  }
}

void export_ppm(const RgbImage& image, const fs::path& path) {
  const std::string header =
      "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), image.rgb.begin(), image.rgb.end());
  write_binary_file(path, bytes);
}

}  // namespace densepoint

#include "reni/hdrio.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>

namespace reni {

namespace {

std::runtime_error io_error(const std::filesystem::path& path, const std::string& what) {
  return std::runtime_error(path.string() + ": " + what);
}

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error(path, "cannot open for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Cursor over a byte buffer for the ASCII parts of image headers.
struct Cursor {
  const std::vector<unsigned char>& bytes;
  std::size_t pos = 0;

  bool eof() const { return pos >= bytes.size(); }

  void skip_space() {
    while (!eof() && std::isspace(bytes[pos])) ++pos;
  }

  std::string token() {
    skip_space();
    std::string out;
    while (!eof() && !std::isspace(bytes[pos])) out.push_back(static_cast<char>(bytes[pos++]));
    return out;
  }

  std::string line() {
    std::string out;
    while (!eof() && bytes[pos] != '\n') out.push_back(static_cast<char>(bytes[pos++]));
    if (!eof()) ++pos;
    return out;
  }
};

int parse_dimension(const std::string& tok, const std::filesystem::path& path) {
  std::size_t used = 0;
  long value = 0;
  try {
    value = std::stol(tok, &used);
  } catch (const std::exception&) {
    throw io_error(path, "malformed header: bad dimension '" + tok + "'");
  }
  if (used != tok.size() || value <= 0 || value > (1 << 20))
    throw io_error(path, "malformed header: bad dimension '" + tok + "'");
  return static_cast<int>(value);
}

}  // namespace

EnvironmentMap EnvironmentMap::zeros(int height) {
  EnvironmentMap map;
  map.grid = equirect_grid(height);
  map.rgb = RgbArray::Zero(static_cast<Eigen::Index>(map.grid.size()), 3);
  return map;
}

void EnvironmentMap::validate() const {
  if (grid.width != 2 * grid.height) throw std::invalid_argument("environment map is not equirectangular");
  if (static_cast<std::size_t>(rgb.rows()) != grid.size())
    throw std::invalid_argument("environment map pixel count does not match its grid");
  if (!rgb.allFinite()) throw std::invalid_argument("environment map has non-finite pixels");
  if ((rgb.array() < 0.0).any()) throw std::invalid_argument("environment map has negative pixels");
}

void NormStats::validate() const {
  if (!std::isfinite(log_min) || !std::isfinite(log_max))
    throw std::invalid_argument("normalization stats must be finite");
  if (!(log_max > log_min)) throw std::invalid_argument("normalization stats need log_max > log_min");
}

FloatImage read_pfm_image(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  Cursor cur{bytes};
  const std::string magic = cur.token();
  FloatImage image;
  if (magic == "PF") {
    image.channels = 3;
  } else if (magic == "Pf") {
    image.channels = 1;
  } else {
    throw io_error(path, "malformed header: not a PFM file");
  }
  image.width = parse_dimension(cur.token(), path);
  image.height = parse_dimension(cur.token(), path);
  const std::string scale_tok = cur.token();
  double scale = 0.0;
  try {
    scale = std::stod(scale_tok);
  } catch (const std::exception&) {
    throw io_error(path, "malformed header: bad scale '" + scale_tok + "'");
  }
  if (scale == 0.0 || !std::isfinite(scale)) throw io_error(path, "malformed header: zero scale");
  // Exactly one whitespace byte separates the header from the payload.
  if (cur.eof() || !std::isspace(bytes[cur.pos])) throw io_error(path, "malformed header");
  ++cur.pos;

  const bool file_little = scale < 0.0;
  const bool host_little = std::endian::native == std::endian::little;
  const std::size_t row_floats = static_cast<std::size_t>(image.width) * image.channels;
  const std::size_t count = row_floats * image.height;
  if (bytes.size() - cur.pos < count * sizeof(float)) throw io_error(path, "truncated pixel data");

  image.data.resize(count);
  const unsigned char* src = bytes.data() + cur.pos;
  // PFM rows run bottom-to-top.
  for (int r = 0; r < image.height; ++r) {
    float* dst = image.data.data() + static_cast<std::size_t>(image.height - 1 - r) * row_floats;
    for (std::size_t k = 0; k < row_floats; ++k) {
      std::uint32_t word;
      std::memcpy(&word, src, 4);
      src += 4;
      if (file_little != host_little) word = __builtin_bswap32(word);
      std::memcpy(dst + k, &word, 4);
    }
  }
  return image;
}

void write_pfm_image(const FloatImage& image, const std::filesystem::path& path) {
  if (image.channels != 1 && image.channels != 3) throw std::invalid_argument("PFM supports 1 or 3 channels");
  const std::size_t row_floats = static_cast<std::size_t>(image.width) * image.channels;
  if (image.data.size() != row_floats * image.height) throw std::invalid_argument("image data size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error(path, "cannot open for writing");
  out << (image.channels == 3 ? "PF" : "Pf") << '\n' << image.width << ' ' << image.height << "\n-1.0\n";
  const bool host_little = std::endian::native == std::endian::little;
  std::vector<float> row(row_floats);
  for (int r = image.height - 1; r >= 0; --r) {
    const float* src = image.data.data() + static_cast<std::size_t>(r) * row_floats;
    for (std::size_t k = 0; k < row_floats; ++k) {
      std::uint32_t word;
      std::memcpy(&word, src + k, 4);
      if (!host_little) word = __builtin_bswap32(word);
      std::memcpy(row.data() + k, &word, 4);
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row_floats * sizeof(float)));
  }
  if (!out) throw io_error(path, "write failed");
}

EnvironmentMap image_to_map(const FloatImage& image) {
  if (image.channels != 3) throw std::invalid_argument("environment maps need 3 channels");
  if (image.width != 2 * image.height)
    throw std::invalid_argument("not equirectangular: width " + std::to_string(image.width) + " != 2 * height " +
                                std::to_string(image.height));
  EnvironmentMap map = EnvironmentMap::zeros(image.height);
  for (Eigen::Index p = 0; p < map.rgb.rows(); ++p) {
    for (int c = 0; c < 3; ++c) {
      const float v = image.data[static_cast<std::size_t>(p) * 3 + c];
      if (!std::isfinite(v)) throw std::invalid_argument("non-finite pixel at index " + std::to_string(p));
      if (v < 0.0f) throw std::invalid_argument("negative pixel at index " + std::to_string(p));
      map.rgb(p, c) = v;
    }
  }
  return map;
}

FloatImage map_to_image(const EnvironmentMap& map) {
  FloatImage image;
  image.width = map.width();
  image.height = map.height();
  image.channels = 3;
  image.data.resize(static_cast<std::size_t>(map.rgb.rows()) * 3);
  for (Eigen::Index p = 0; p < map.rgb.rows(); ++p)
    for (int c = 0; c < 3; ++c) image.data[static_cast<std::size_t>(p) * 3 + c] = static_cast<float>(map.rgb(p, c));
  return image;
}

EnvironmentMap read_pfm(const std::filesystem::path& path) {
  try {
    return image_to_map(read_pfm_image(path));
  } catch (const std::invalid_argument& e) {
    throw io_error(path, e.what());
  }
}

void write_pfm(const EnvironmentMap& map, const std::filesystem::path& path) {
  map.validate();
  write_pfm_image(map_to_image(map), path);
}

Eigen::Vector3d rgbe_to_float(unsigned char r, unsigned char g, unsigned char b, unsigned char e) {
  if (e == 0) return Eigen::Vector3d::Zero();
  const double f = std::ldexp(1.0, static_cast<int>(e) - (128 + 8));
  return {(r + 0.5) * f, (g + 0.5) * f, (b + 0.5) * f};
}

FloatImage read_rgbe_image(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  Cursor cur{bytes};
  const std::string first = cur.line();
  if (first.rfind("#?", 0) != 0) throw io_error(path, "not a Radiance picture");
  for (;;) {
    if (cur.eof()) throw io_error(path, "truncated header");
    const std::string line = cur.line();
    if (line.empty()) break;
    if (line.rfind("FORMAT=", 0) == 0 && line.substr(7) != "32-bit_rle_rgbe")
      throw io_error(path, "unknown format '" + line.substr(7) + "'");
  }
  const std::string ysign = cur.token();
  const std::string ytok = cur.token();
  const std::string xsign = cur.token();
  const std::string xtok = cur.token();
  if (ysign != "-Y" || xsign != "+X") throw io_error(path, "unsupported resolution line orientation");
  FloatImage image;
  image.height = parse_dimension(ytok, path);
  image.width = parse_dimension(xtok, path);
  image.channels = 3;
  cur.line();

  const int w = image.width;
  image.data.resize(static_cast<std::size_t>(w) * image.height * 3);
  std::vector<unsigned char> scan(static_cast<std::size_t>(w) * 4);
  auto need = [&](std::size_t n) {
    if (bytes.size() - cur.pos < n) throw io_error(path, "truncated scanline");
  };

  for (int y = 0; y < image.height; ++y) {
    need(4);
    const unsigned char* head = bytes.data() + cur.pos;
    const bool new_rle = w >= 8 && w < 0x8000 && head[0] == 2 && head[1] == 2 && ((head[2] << 8) | head[3]) == w;
    if (new_rle) {
      cur.pos += 4;
      // Channels are stored as four separate run-length encoded planes.
      for (int c = 0; c < 4; ++c) {
        int x = 0;
        while (x < w) {
          need(1);
          int count = bytes[cur.pos++];
          if (count > 128) {
            count -= 128;
            if (x + count > w) throw io_error(path, "bad scanline run length");
            need(1);
            const unsigned char value = bytes[cur.pos++];
            for (int k = 0; k < count; ++k) scan[static_cast<std::size_t>(x++) * 4 + c] = value;
          } else {
            if (count == 0 || x + count > w) throw io_error(path, "bad scanline run length");
            need(static_cast<std::size_t>(count));
            for (int k = 0; k < count; ++k) scan[static_cast<std::size_t>(x++) * 4 + c] = bytes[cur.pos++];
          }
        }
      }
    } else {
      // Flat pixels, possibly with old-style (1,1,1,n) repeat markers.
      int x = 0;
      int shift = 0;
      while (x < w) {
        need(4);
        const unsigned char* px = bytes.data() + cur.pos;
        cur.pos += 4;
        if (px[0] == 1 && px[1] == 1 && px[2] == 1) {
          if (x == 0) throw io_error(path, "repeat marker at scanline start");
          const int count = px[3] << shift;
          if (x + count > w) throw io_error(path, "bad scanline run length");
          for (int k = 0; k < count; ++k, ++x)
            std::copy_n(&scan[static_cast<std::size_t>(x - 1) * 4], 4, &scan[static_cast<std::size_t>(x) * 4]);
          shift += 8;
        } else {
          std::copy_n(px, 4, &scan[static_cast<std::size_t>(x) * 4]);
          ++x;
          shift = 0;
        }
      }
    }
    for (int x = 0; x < w; ++x) {
      const unsigned char* q = &scan[static_cast<std::size_t>(x) * 4];
      const Eigen::Vector3d v = rgbe_to_float(q[0], q[1], q[2], q[3]);
      float* dst = &image.data[(static_cast<std::size_t>(y) * w + x) * 3];
      for (int c = 0; c < 3; ++c) dst[c] = static_cast<float>(v[c]);
    }
  }
  return image;
}

EnvironmentMap read_rgbe(const std::filesystem::path& path) {
  try {
    return image_to_map(read_rgbe_image(path));
  } catch (const std::invalid_argument& e) {
    throw io_error(path, e.what());
  }
}

EnvironmentMap read_environment(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".pfm") return read_pfm(path);
  if (ext == ".hdr" || ext == ".rgbe" || ext == ".pic") return read_rgbe(path);
  throw io_error(path, "unrecognised image extension '" + ext + "'");
}

RgbArray normalize_log(const RgbArray& rgb, const NormStats& stats, double floor) {
  stats.validate();
  const double span = stats.log_max - stats.log_min;
  RgbArray out(rgb.rows(), 3);
  for (Eigen::Index p = 0; p < rgb.rows(); ++p)
    for (int c = 0; c < 3; ++c) {
      const double v = 2.0 * (std::log(std::max(rgb(p, c), floor)) - stats.log_min) / span - 1.0;
      out(p, c) = std::clamp(v, -1.0, 1.0);
    }
  return out;
}

RgbArray denormalize_log(const RgbArray& values, const NormStats& stats) {
  stats.validate();
  const double span = stats.log_max - stats.log_min;
  return ((0.5 * (values.array() + 1.0) * span) + stats.log_min).exp().matrix();
}

NormStats compute_stats(std::span<const EnvironmentMap> maps, double floor) {
  if (maps.empty()) throw std::invalid_argument("compute_stats: no maps");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& map : maps) {
    for (Eigen::Index p = 0; p < map.rgb.rows(); ++p)
      for (int c = 0; c < 3; ++c) {
        const double v = std::log(std::max(map.rgb(p, c), floor));
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
  }
  NormStats stats{lo, hi};
  if (!(hi > lo)) throw std::invalid_argument("compute_stats: degenerate dataset (log_min == log_max)");
  return stats;
}

RgbArray downsample(const RgbArray& values, int from_height, int to_height) {
  if (to_height < 1 || from_height % to_height != 0)
    throw std::invalid_argument("downsample: target height " + std::to_string(to_height) +
                                " must divide source height " + std::to_string(from_height));
  const int f = from_height / to_height;
  const int from_w = 2 * from_height;
  const int to_w = 2 * to_height;
  if (values.rows() != static_cast<Eigen::Index>(from_height) * from_w)
    throw std::invalid_argument("downsample: value count does not match source height");
  if (f == 1) return values;
  RgbArray out = RgbArray::Zero(static_cast<Eigen::Index>(to_height) * to_w, 3);
  for (int i = 0; i < to_height; ++i) {
    double total_weight = 0.0;
    for (int di = 0; di < f; ++di) total_weight += std::sin(row_theta(i * f + di, from_height)) * f;
    for (int j = 0; j < to_w; ++j) {
      Eigen::RowVector3d acc = Eigen::RowVector3d::Zero();
      for (int di = 0; di < f; ++di) {
        const int row = i * f + di;
        const double w = std::sin(row_theta(row, from_height));
        for (int dj = 0; dj < f; ++dj)
          acc += w * values.row(static_cast<Eigen::Index>(row) * from_w + j * f + dj);
      }
      out.row(static_cast<Eigen::Index>(i) * to_w + j) = acc / total_weight;
    }
  }
  return out;
}

EnvironmentMap downsample(const EnvironmentMap& map, int height) {
  if (height == map.height()) return map;
  EnvironmentMap out;
  out.grid = equirect_grid(height);
  out.rgb = downsample(map.rgb, map.height(), height);
  return out;
}

}  // namespace reni

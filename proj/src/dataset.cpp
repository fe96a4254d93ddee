#include "reni/dataset.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace reni {

namespace {

constexpr int kNoiseTerms = 4;
constexpr double kHorizonBlend = 0.04;
constexpr double kSunEdge = 0.25;  // soft edge width as a fraction of the radius
constexpr int kMaxSunSamples = 64;

double smoothstep(double lo, double hi, double x) {
  const double t = std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

Eigen::Vector3d json_vec3(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 3) throw std::invalid_argument("expected a 3-vector");
  return {v[0], v[1], v[2]};
}

// Evaluates one sky; the ground noise is expanded once from its seed.
class SkyModel {
 public:
  explicit SkyModel(const SkyParams& p) : p_(p), sun_(p.sun_direction()) {
    p_.validate();
    Rng rng(p.noise_seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double total = 0.0;
    for (auto& t : terms_) {
      t.axis = Eigen::Vector3d(normal(rng), normal(rng), normal(rng)).normalized();
      t.freq = 1.5 + 2.5 * uni(rng);
      t.phase = 2.0 * std::numbers::pi * uni(rng);
      t.amp = 0.5 + uni(rng);
      total += t.amp;
    }
    for (auto& t : terms_) t.amp /= total;
  }

  Eigen::Vector3d background(const Direction& d) const {
    const double up = d.y();
    const double t = std::clamp(up, 0.0, 1.0);
    const double glow = 1.0 + 2.0 * std::exp(12.0 * (d.dot(sun_) - 1.0));
    const Eigen::Vector3d sky = (p_.horizon + t * (p_.zenith - p_.horizon)) * glow;
    double noise = 0.0;
    for (const auto& n : terms_) noise += n.amp * std::sin(n.freq * n.axis.dot(d) + n.phase);
    const Eigen::Vector3d ground = p_.ground * (1.0 + 0.5 * noise);
    const double b = smoothstep(-kHorizonBlend, kHorizonBlend, up);
    return b * sky + (1.0 - b) * ground;
  }

  Eigen::Vector3d radiance(const Direction& d) const {
    const double angle = std::acos(std::clamp(d.dot(sun_), -1.0, 1.0));
    const double r = p_.sun_radius;
    const double w = 1.0 - smoothstep(r, r * (1.0 + kSunEdge), angle);
    return background(d) * (1.0 + (p_.sun_intensity - 1.0) * w);
  }

 private:
  struct NoiseTerm {
    Eigen::Vector3d axis;
    double freq, phase, amp;
  };
  SkyParams p_;
  Direction sun_;
  std::array<NoiseTerm, kNoiseTerms> terms_;
};

}  // namespace

Direction SkyParams::sun_direction() const {
  const double ce = std::cos(sun_elevation);
  return {ce * std::sin(sun_azimuth), std::sin(sun_elevation), ce * std::cos(sun_azimuth)};
}

void SkyParams::validate() const {
  if (!(sun_elevation >= 0.0 && sun_elevation <= std::numbers::pi / 2))
    throw std::invalid_argument("sky: sun elevation must lie in [0, pi/2]");
  if (!(sun_intensity > 0.0)) throw std::invalid_argument("sky: sun intensity must be positive");
  if (!(sun_radius > 0.0)) throw std::invalid_argument("sky: sun radius must be positive");
  if ((zenith.array() <= 0.0).any() || (horizon.array() <= 0.0).any() || (ground.array() <= 0.0).any())
    throw std::invalid_argument("sky: colours must be positive");
}

Eigen::Vector3d sky_background(const SkyParams& params, const Direction& d) { return SkyModel(params).background(d); }
Eigen::Vector3d sky_radiance(const SkyParams& params, const Direction& d) { return SkyModel(params).radiance(d); }

EnvironmentMap generate_sky(const SkyParams& params, int height, int samples) {
  if (samples < 1) throw std::invalid_argument("generate_sky: samples must be >= 1");
  const SkyModel model(params);
  EnvironmentMap map = EnvironmentMap::zeros(height);
  const int w = map.width();
  const double dtheta = std::numbers::pi / height;
  const double dphi = 2.0 * std::numbers::pi / w;
  const Direction sun = params.sun_direction();
  const double sun_reach = params.sun_radius * (1.0 + kSunEdge) + dtheta;
  // Pixels touching the sun get enough sub-samples to resolve its soft edge.
  const int sun_samples =
      std::clamp(static_cast<int>(std::ceil(2.0 * dtheta / (params.sun_radius * kSunEdge))), samples, kMaxSunSamples);
  for (int i = 0; i < height; ++i)
    for (int j = 0; j < w; ++j) {
      const Direction centre = map.grid.direction(static_cast<std::size_t>(i) * w + j);
      const bool near_sun = std::acos(std::clamp(centre.dot(sun), -1.0, 1.0)) < sun_reach;
      const int n = near_sun ? sun_samples : samples;
      Eigen::Vector3d acc = Eigen::Vector3d::Zero();
      double wsum = 0.0;
      for (int a = 0; a < n; ++a) {
        const double theta = (i + (a + 0.5) / n) * dtheta;
        const double st = std::sin(theta), ct = std::cos(theta);
        for (int b = 0; b < n; ++b) {
          const double phi = (j + (b + 0.5) / n) * dphi;
          acc += st * model.radiance(Direction(st * std::sin(phi), ct, st * std::cos(phi)));
          wsum += st;
        }
      }
      map.rgb.row(static_cast<Eigen::Index>(i) * w + j) = (acc / wsum).transpose();
    }
  return map;
}

SkyParams random_sky_params(Rng& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  auto jitter = [&](const Eigen::Vector3d& base, double spread) {
    const double s = 1.0 + spread * (2.0 * uni(rng) - 1.0);
    Eigen::Vector3d out;
    for (int c = 0; c < 3; ++c) out[c] = base[c] * s * (1.0 + 0.15 * (2.0 * uni(rng) - 1.0));
    return out;
  };
  SkyParams p;
  p.sun_azimuth = 2.0 * std::numbers::pi * uni(rng);
  p.sun_elevation = 0.15 + 1.15 * uni(rng);
  p.sun_intensity = std::pow(10.0, 2.0 + 2.0 * uni(rng));
  p.sun_radius = 0.06 + 0.06 * uni(rng);
  p.zenith = jitter({0.12, 0.28, 0.75}, 0.4);
  p.horizon = jitter({0.65, 0.7, 0.8}, 0.3);
  p.ground = jitter({0.28, 0.22, 0.14}, 0.5);
  p.noise_seed = rng();
  return p;
}

EnvironmentMap rotate_map(const EnvironmentMap& map, double angle) {
  const int w = map.width();
  long shift = std::lround(angle * w / (2.0 * std::numbers::pi)) % w;
  if (shift < 0) shift += w;
  EnvironmentMap out = map;
  for (int i = 0; i < map.height(); ++i)
    for (int j = 0; j < w; ++j) {
      const int src = static_cast<int>((j - shift + w) % w);
      out.rgb.row(static_cast<Eigen::Index>(i) * w + j) = map.rgb.row(static_cast<Eigen::Index>(i) * w + src);
    }
  return out;
}

nlohmann::json to_json(const SkyParams& p) {
  auto v = [](const Eigen::Vector3d& x) { return nlohmann::json{x[0], x[1], x[2]}; };
  return {{"sun_azimuth", p.sun_azimuth},     {"sun_elevation", p.sun_elevation}, {"sun_intensity", p.sun_intensity},
          {"sun_radius", p.sun_radius},       {"zenith", v(p.zenith)},            {"horizon", v(p.horizon)},
          {"ground", v(p.ground)},            {"noise_seed", p.noise_seed}};
}

SkyParams sky_params_from_json(const nlohmann::json& j) {
  SkyParams p;
  p.sun_azimuth = j.at("sun_azimuth").get<double>();
  p.sun_elevation = j.at("sun_elevation").get<double>();
  p.sun_intensity = j.at("sun_intensity").get<double>();
  p.sun_radius = j.at("sun_radius").get<double>();
  p.zenith = json_vec3(j.at("zenith"));
  p.horizon = json_vec3(j.at("horizon"));
  p.ground = json_vec3(j.at("ground"));
  p.noise_seed = j.at("noise_seed").get<std::uint64_t>();
  p.validate();
  return p;
}

void write_dataset(const Dataset& data, const std::filesystem::path& dir) {
  if (data.maps.size() != data.ids.size()) throw std::invalid_argument("write_dataset: one id per map required");
  std::filesystem::create_directories(dir);
  nlohmann::json images = nlohmann::json::array();
  for (std::size_t i = 0; i < data.maps.size(); ++i) {
    const std::string file = data.ids[i] + ".pfm";
    write_pfm(data.maps[i], dir / file);
    nlohmann::json entry{{"id", data.ids[i]}, {"path", file}};
    if (i < data.params.size() && data.params[i]) entry["sky"] = to_json(*data.params[i]);
    images.push_back(entry);
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw std::runtime_error((dir / "manifest.json").string() + ": cannot open for writing");
  out << nlohmann::json{{"images", images}}.dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset data;
  const auto manifest = dir / "manifest.json";
  if (std::filesystem::exists(manifest)) {
    std::ifstream in(manifest);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(manifest.string() + ": " + e.what());
    }
    for (const auto& entry : j.at("images")) {
      data.ids.push_back(entry.at("id").get<std::string>());
      data.maps.push_back(read_environment(dir / entry.at("path").get<std::string>()));
      data.params.push_back(entry.contains("sky") ? std::optional(sky_params_from_json(entry.at("sky"))) : std::nullopt);
    }
    return data;
  }
  if (!std::filesystem::is_directory(dir)) throw std::runtime_error(dir.string() + ": not a dataset directory");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".pfm" || ext == ".hdr") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    data.ids.push_back(f.stem().string());
    data.maps.push_back(read_environment(f));
    data.params.emplace_back();
  }
  return data;
}

Dataset generate_dataset(int count, std::uint64_t seed, int height) {
  if (count < 1) throw std::invalid_argument("generate_dataset: count must be >= 1");
  Rng rng(seed);
  Dataset data;
  for (int i = 0; i < count; ++i) {
    const SkyParams p = random_sky_params(rng);
    data.maps.push_back(generate_sky(p, height));
    char id[32];
    std::snprintf(id, sizeof id, "sky_%04d", i);
    data.ids.emplace_back(id);
    data.params.emplace_back(p);
  }
  return data;
}

}  // namespace reni

#include "reni/baselines.hpp"
#include "reni/checkpoint.hpp"
#include "reni/dataset.hpp"
#include "reni/fitting.hpp"
#include "reni/png.hpp"
#include "reni/render.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace reni;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("not a number: " + s);
  return v;
}

int parse_int(const std::string& s) {
  std::size_t used = 0;
  const int v = std::stoi(s, &used);
  if (used != s.size()) throw std::invalid_argument("not an integer: " + s);
  return v;
}

// "16:400,32:400"
std::vector<Resolution> parse_schedule(const std::string& s) {
  std::vector<Resolution> out;
  for (const auto& stage : split(s, ',')) {
    const auto parts = split(stage, ':');
    if (parts.size() != 2) throw std::invalid_argument("schedule stage must be HEIGHT:EPOCHS, got " + stage);
    out.push_back({parse_int(parts[0]), parse_int(parts[1])});
  }
  return out;
}

// "a..b" gives `steps` evenly spaced values; otherwise a comma list.
std::vector<double> parse_ks(const std::string& s, int steps) {
  const auto dots = s.find("..");
  if (dots == std::string::npos) {
    std::vector<double> out;
    for (const auto& v : split(s, ',')) out.push_back(parse_double(v));
    if (out.empty()) throw std::invalid_argument("--ks: no values");
    return out;
  }
  const double a = parse_double(s.substr(0, dots));
  const double b = parse_double(s.substr(dots + 2));
  if (steps < 1) throw std::invalid_argument("--ks-steps must be >= 1");
  if (steps == 1) return {a};
  std::vector<double> out;
  for (int i = 0; i < steps; ++i) out.push_back(a + (b - a) * i / (steps - 1));
  return out;
}

std::string lower_ext(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

PixelMask load_mask(const fs::path& path, int height) {
  const FloatImage image = lower_ext(path) == ".png" ? read_png_gray(path) : read_pfm_image(path);
  PixelMask mask = mask_from_image(image);
  if (mask.height == height) return mask;
  if (mask.height < height || mask.height % height != 0)
    throw std::invalid_argument(path.string() + ": mask height " + std::to_string(mask.height) +
                                " is not a multiple of the image height " + std::to_string(height));
  return downsample(mask, height);
}

void write_outputs(const EnvironmentMap& map, const fs::path& stem) {
  write_pfm(map, fs::path(stem.string() + ".pfm"));
  write_png_preview(map_to_image(map), fs::path(stem.string() + ".png"));
}

void write_outputs(const RenderImage& image, const fs::path& stem) {
  const FloatImage f = image.to_float_image();
  write_pfm_image(f, fs::path(stem.string() + ".pfm"));
  write_png_preview(f, fs::path(stem.string() + ".png"));
}

void write_json(const nlohmann::json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << j.dump(2) << '\n';
}

std::ofstream open_csv(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out.precision(10);
  return out;
}

std::string format_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

struct FitOptions {
  double rho = 1e-4;
  double gamma = 1e-7;
  double lr_start = 1e-2;
  double lr_end = 1e-4;
  std::string schedule;

  void add(CLI::App* cmd) {
    cmd->add_option("--rho", rho, "Cosine loss weight")->capture_default_str();
    cmd->add_option("--gamma", gamma, "Latent prior weight")->capture_default_str();
    cmd->add_option("--lr-start", lr_start, "Initial learning rate")->capture_default_str();
    cmd->add_option("--lr-end", lr_end, "Final learning rate")->capture_default_str();
    cmd->add_option("--schedule", schedule, "HEIGHT:EPOCHS stages, e.g. 16:400,32:400 (default: training schedule)");
  }

  FitConfig config() const {
    FitConfig cfg;
    cfg.rho = rho;
    cfg.gamma = gamma;
    cfg.lr = {lr_start, lr_end};
    if (!schedule.empty()) cfg.schedule = parse_schedule(schedule);
    return cfg;
  }
};

LatentCode load_latent_arg(const Checkpoint& ckpt, const std::string& arg) {
  const auto it = std::find(ckpt.image_ids.begin(), ckpt.image_ids.end(), arg);
  if (it != ckpt.image_ids.end())
    return unflatten_latent(ckpt.latents[static_cast<std::size_t>(it - ckpt.image_ids.begin())].mean);
  if (!fs::exists(arg)) throw std::invalid_argument(arg + ": neither a training image id nor a latent file");
  std::ifstream in(arg);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(arg + ": " + e.what());
  }
  const LatentCode z = latent_from_json(j.contains("z") ? j.at("z") : j);
  if (z.cols() != ckpt.latent_count()) throw std::invalid_argument(arg + ": latent size does not match the checkpoint");
  return z;
}

int cmd_gen_dataset(const fs::path& out, int count, std::uint64_t seed, int height) {
  const Dataset data = generate_dataset(count, seed, height);
  write_dataset(data, out);
  std::printf("wrote %d skies to %s\n", count, out.string().c_str());
  return 0;
}

int cmd_train(const fs::path& data_dir, const fs::path& config, const fs::path& out, fs::path log_path, bool quiet) {
  const TrainConfig cfg = load_train_config(config);
  const Dataset data = load_dataset(data_dir);
  if (data.maps.empty()) throw std::invalid_argument(data_dir.string() + ": no images");
  if (log_path.empty()) log_path = fs::path(out.string() + ".log.csv");
  int last_resolution = -1;
  const TrainProgress progress = [&](const TrainLogRow& row) {
    if (quiet || (row.resolution == last_resolution && (row.epoch + 1) % 100 != 0)) return;
    last_resolution = row.resolution;
    std::printf("epoch %d res %d recon %.6g kld %.6g lr %.3g\n", row.epoch, row.resolution, row.recon, row.kld, row.lr);
    std::fflush(stdout);
  };
  const TrainResult result = train(data.maps, cfg, data.ids, progress);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_checkpoint(result.checkpoint, out);
  write_train_log_csv(result.log, log_path);
  std::printf("saved %s\n", out.string().c_str());
  return 0;
}

int cmd_fit(const fs::path& ckpt_path, const fs::path& image_path, const fs::path& mask_path,
            const fs::path& report_path, const fs::path& out_stem, const FitOptions& opts) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const EnvironmentMap target = read_environment(image_path);
  const PixelMask mask = mask_path.empty() ? PixelMask::full(target.height()) : load_mask(mask_path, target.height());
  const FitResult r = fit(ckpt, target, mask, opts.config());
  nlohmann::json report{{"image", image_path.string()},
                        {"height", target.height()},
                        {"observed_pixels", mask.count()},
                        {"psnr_observed", r.psnr_observed},
                        {"psnr_all", r.psnr_all},
                        {"z", latent_to_json(r.z)},
                        {"final_loss", r.trace.empty() ? 0.0 : r.trace.back().total}};
  report["psnr_unobserved"] = std::isnan(r.psnr_unobserved) ? nlohmann::json(nullptr) : nlohmann::json(r.psnr_unobserved);
  write_json(report, report_path);
  if (!out_stem.empty()) {
    if (out_stem.has_parent_path()) fs::create_directories(out_stem.parent_path());
    write_outputs(decode_hdr(ckpt, r.z, target.height()), out_stem);
  }
  std::printf("psnr_observed %.3f psnr_all %.3f\n", r.psnr_observed, r.psnr_all);
  return 0;
}

int cmd_sample(const fs::path& ckpt_path, int count, std::uint64_t seed, const fs::path& out, int height) {
  if (count < 1) throw std::invalid_argument("--count must be >= 1");
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  fs::create_directories(out);
  Rng rng(seed);
  std::normal_distribution<double> normal;
  nlohmann::json latents = nlohmann::json::array();
  for (int k = 0; k < count; ++k) {
    LatentCode z(3, ckpt.latent_count());
    for (Eigen::Index n = 0; n < z.cols(); ++n)
      for (int r = 0; r < 3; ++r) z(r, n) = normal(rng);
    char name[32];
    std::snprintf(name, sizeof name, "sample_%04d", k);
    write_outputs(decode_hdr(ckpt, z, height), out / name);
    latents.push_back({{"id", name}, {"z", latent_to_json(z)}});
  }
  write_json({{"seed", seed}, {"samples", latents}}, out / "latents.json");
  std::printf("wrote %d samples to %s\n", count, out.string().c_str());
  return 0;
}

int cmd_interpolate(const fs::path& ckpt_path, const std::string& from, const std::string& to, int steps,
                    const fs::path& out, int height) {
  if (steps < 2) throw std::invalid_argument("--steps must be >= 2");
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const LatentCode a = load_latent_arg(ckpt, from);
  const LatentCode b = load_latent_arg(ckpt, to);
  fs::create_directories(out);
  for (int k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) / (steps - 1);
    char name[32];
    std::snprintf(name, sizeof name, "interp_%04d", k);
    write_outputs(decode_hdr(ckpt, (1.0 - t) * a + t * b, height), out / name);
  }
  std::printf("wrote %d frames to %s\n", steps, out.string().c_str());
  return 0;
}

int cmd_eval(const fs::path& ckpt_path, const fs::path& data_dir, const std::string& dims, const std::string& baselines,
             const fs::path& out, const FitOptions& opts, int sg_iterations) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const Dataset data = load_dataset(data_dir);
  if (data.maps.empty()) throw std::invalid_argument(data_dir.string() + ": no images");
  std::vector<int> dimensions;
  for (const auto& d : split(dims, ',')) dimensions.push_back(parse_int(d));
  bool want_sh = false, want_sg = false;
  for (const auto& b : split(baselines, ',')) {
    if (b == "sh") want_sh = true;
    else if (b == "sg") want_sg = true;
    else throw std::invalid_argument("--baselines: unknown representation " + b);
  }
  std::vector<DimensionPlan> plans;
  for (int d : dimensions) plans.push_back(dimension_plan(d));
  const FitConfig fit_cfg = opts.config();
  SgFitConfig sg_cfg;
  sg_cfg.iterations = sg_iterations;

  auto csv = open_csv(out);
  csv << "representation,D,image_id,psnr\n";
  struct Mean {
    std::string rep;
    int dim;
    double sum = 0.0;
    int n = 0;
  };
  std::vector<Mean> means;
  auto record = [&](const std::string& rep, int dim, const std::string& id, double value) {
    csv << rep << ',' << dim << ',' << id << ',' << value << '\n';
    auto it = std::find_if(means.begin(), means.end(), [&](const Mean& m) { return m.rep == rep && m.dim == dim; });
    if (it == means.end()) it = means.insert(means.end(), Mean{rep, dim});
    it->sum += value;
    ++it->n;
  };

  for (std::size_t i = 0; i < data.maps.size(); ++i) {
    const EnvironmentMap& map = data.maps[i];
    const DirectionGrid& grid = map.grid;
    const RgbArray target = normalize_log(map.rgb, ckpt.stats, ckpt.config.floor).cwiseMax(-1.0).cwiseMin(1.0);
    auto score = [&](const RgbArray& pred) { return psnr(pred.cwiseMax(-1.0).cwiseMin(1.0), target, kNormalizedPeak); };
    for (std::size_t k = 0; k < dimensions.size(); ++k) {
      const int dim = dimensions[k];
      if (dim == ckpt.config.dimension())
        record("reni", dim, data.ids[i], fit(ckpt, map, PixelMask::full(map.height()), fit_cfg).psnr_all);
      if (want_sh) record("sh", dim, data.ids[i], score(sh_render(sh_fit(grid, target, plans[k].sh_order), grid)));
      if (want_sg) {
        const SGLobes lin = sg_fit(grid, map.rgb, plans[k].sg_lobes, sg_cfg);
        record("sg_linear", plans[k].sg_dimension(), data.ids[i],
               score(normalize_log(sg_render(lin, grid), ckpt.stats, ckpt.config.floor)));
        const SGLobes log = sg_fit(grid, (target.array() + 1.0).matrix(), plans[k].sg_lobes, sg_cfg);
        record("sg_log", plans[k].sg_dimension(), data.ids[i], score((sg_render(log, grid).array() - 1.0).matrix()));
      }
    }
  }
  std::printf("%-10s %5s %8s %6s\n", "rep", "D", "psnr", "images");
  for (const auto& m : means) std::printf("%-10s %5d %8.3f %6d\n", m.rep.c_str(), m.dim, m.sum / m.n, m.n);
  return 0;
}

struct InvertOptions {
  std::string ks = "0.0..1.0";
  int ks_steps = 5;
  int size = 64;
  std::vector<double> kd{0.8, 0.8, 0.8};
  double shininess = 32.0;
  int env_height = 32;
  int epochs = 2400;
  double lr_start = 1e-2;
  double lr_end = 1e-4;
  double rho = 1e3;
  double gamma = 1e-4;
  int sh_order = -1;
};

int cmd_invert(const fs::path& ckpt_path, const fs::path& target_path, const fs::path& out, const InvertOptions& o) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const EnvironmentMap env = read_environment(target_path);
  const int sh_order = o.sh_order >= 0 ? o.sh_order : dimension_plan(ckpt.config.dimension()).sh_order;
  if (o.kd.size() != 3) throw std::invalid_argument("--kd needs three values");
  fs::create_directories(out);
  auto csv = open_csv(out / "metrics.csv");
  csv << "ks,method,render_psnr\n";
  InvertConfig icfg;
  icfg.rho = o.rho;
  icfg.gamma = o.gamma;
  icfg.lr = {o.lr_start, o.lr_end};
  icfg.epochs = o.epochs;
  icfg.env_height = o.env_height;
  const DirectionGrid inv_grid = equirect_grid(o.env_height);
  for (double ks : parse_ks(o.ks, o.ks_steps)) {
    RenderScene scene;
    scene.size = o.size;
    scene.material.diffuse = {o.kd[0], o.kd[1], o.kd[2]};
    scene.material.specular = ks;
    scene.material.shininess = o.shininess;
    scene.validate();
    const std::string tag = "ks_" + format_value(ks);
    const RenderImage target = shade(scene, env);
    write_outputs(target, out / (tag + "_target"));

    const InvertResult r = invert_lighting(ckpt, target, scene, icfg);
    write_outputs(r.render, out / (tag + "_reni_render"));
    write_outputs(r.env, out / (tag + "_reni_env"));

    const ShadingOperator op(scene, inv_grid);
    const SHCoeffs sh = invert_lighting_sh(op, target, sh_order);
    EnvironmentMap sh_env;
    sh_env.grid = inv_grid;
    sh_env.rgb = sh_render(sh, inv_grid).cwiseMax(0.0);
    const RenderImage sh_render_img = op.shade(sh_render(sh, inv_grid));
    const double sh_psnr = render_psnr(sh_render_img, target);
    RenderImage sh_preview = sh_render_img;
    sh_preview.rgb = sh_preview.rgb.cwiseMax(0.0);
    write_outputs(sh_preview, out / (tag + "_sh_render"));
    write_outputs(sh_env, out / (tag + "_sh_env"));

    csv << ks << ",reni," << r.psnr << '\n' << ks << ",sh," << sh_psnr << '\n';
    std::printf("ks %.3f reni %.3f dB sh %.3f dB\n", ks, r.psnr, sh_psnr);
    std::fflush(stdout);
  }
  return 0;
}

int cmd_check_equivariance(const fs::path& ckpt_path, int trials, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("--trials must be >= 1");
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  Rng rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const Direction d = Direction(normal(rng), normal(rng), normal(rng)).normalized();
    LatentCode z(3, ckpt.latent_count());
    for (Eigen::Index n = 0; n < z.cols(); ++n)
      for (int r = 0; r < 3; ++r) z(r, n) = normal(rng);
    const YRotation rot(angle(rng));
    const Eigen::Vector3d a = forward(ckpt.params, transform(ckpt.mode(), rotate_direction(rot, d), rotate_latent(rot, z)));
    const Eigen::Vector3d b = forward(ckpt.params, transform(ckpt.mode(), d, z));
    worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
  }
  std::printf("mode %s trials %d max deviation %.3e\n", to_string(ckpt.mode()).c_str(), trials, worst);
  return 0;
}

struct PairSpec {
  std::string name;
  EnvironmentMap a, b;
  std::optional<double> angle;
};

std::vector<PairSpec> load_pairs(const fs::path& dir, double angle) {
  std::vector<PairSpec> pairs;
  const fs::path listing = dir / "pairs.json";
  if (fs::exists(listing)) {
    std::ifstream in(listing);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(listing.string() + ": " + e.what());
    }
    for (const auto& entry : j.at("pairs")) {
      PairSpec p;
      const auto a = entry.at("a").get<std::string>();
      const auto b = entry.at("b").get<std::string>();
      p.name = a + "|" + b;
      p.a = read_environment(dir / a);
      p.b = read_environment(dir / b);
      if (entry.contains("angle")) p.angle = entry.at("angle").get<double>();
      pairs.push_back(std::move(p));
    }
    return pairs;
  }
  const Dataset data = load_dataset(dir);
  for (std::size_t i = 0; i < data.maps.size(); ++i)
    pairs.push_back({data.ids[i], data.maps[i], rotate_map(data.maps[i], angle), angle});
  return pairs;
}

int cmd_align(const fs::path& ckpt_path, const fs::path& pairs_dir, double angle, const fs::path& out,
              const FitOptions& opts) {
  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  const auto pairs = load_pairs(pairs_dir, angle);
  if (pairs.empty()) throw std::invalid_argument(pairs_dir.string() + ": no pairs");
  const FitConfig cfg = opts.config();
  std::ofstream csv;
  if (!out.empty()) {
    csv = open_csv(out);
    csv << "pair,angle,expected_angle,relative_error\n";
  }
  std::printf("%-24s %10s %10s %12s\n", "pair", "angle", "expected", "E");
  for (const auto& p : pairs) {
    const LatentCode za = fit(ckpt, p.a, PixelMask::full(p.a.height()), cfg).z;
    const LatentCode zb = fit(ckpt, p.b, PixelMask::full(p.b.height()), cfg).z;
    const Alignment al = align_rotation(za, zb);
    const double wrapped = std::remainder(al.angle, 2.0 * std::numbers::pi);
    const double expected = p.angle ? std::remainder(*p.angle, 2.0 * std::numbers::pi) : std::nan("");
    std::printf("%-24s %10.4f %10.4f %12.4e\n", p.name.c_str(), wrapped, expected, al.relative_error);
    if (csv.is_open()) csv << p.name << ',' << wrapped << ',' << expected << ',' << al.relative_error << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RENI: rotation-equivariant neural environment maps"};
  app.require_subcommand(1);

  fs::path out, data_dir, ckpt, config, image, mask, report, log_path, target, pairs;
  int count = 16, height = 64, steps = 8, trials = 10000, sg_iterations = 1500;
  std::uint64_t seed = 0;
  bool quiet = false;
  std::string from, to, dims = "27,108,147", baselines = "sh,sg";
  double angle = std::numbers::pi / 2;
  FitOptions fit_opts;
  InvertOptions inv;

  auto* gen = app.add_subcommand("gen-dataset", "Write procedural HDR skies and a manifest");
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_option("--count", count, "Number of skies")->capture_default_str();
  gen->add_option("--seed", seed, "Random seed")->capture_default_str();
  gen->add_option("--height", height, "Map height (width is twice this)")->capture_default_str();

  auto* tr = app.add_subcommand("train", "Train a conditional field on a dataset");
  tr->add_option("--data", data_dir, "Dataset directory")->required();
  tr->add_option("--config", config, "Training configuration (JSON)")->required();
  tr->add_option("--out", out, "Checkpoint path")->required();
  tr->add_option("--log", log_path, "Per-epoch CSV log (default: <out>.log.csv)");
  tr->add_flag("--quiet", quiet, "No progress output");

  auto* fi = app.add_subcommand("fit", "Fit a latent code to one image, optionally masked");
  fi->add_option("--ckpt", ckpt, "Checkpoint")->required();
  fi->add_option("--image", image, "Target environment map (PFM or HDR)")->required();
  fi->add_option("--mask", mask, "Observed-pixel mask (PNG or PFM, bright = observed)");
  fi->add_option("--report", report, "JSON report path")->required();
  fi->add_option("--out", out, "Write the reconstruction as <out>.pfm and <out>.png");
  fit_opts.add(fi);

  auto* sa = app.add_subcommand("sample", "Decode random latent codes");
  sa->add_option("--ckpt", ckpt, "Checkpoint")->required();
  sa->add_option("--count", count, "Number of samples")->capture_default_str();
  sa->add_option("--seed", seed, "Random seed")->capture_default_str();
  sa->add_option("--out", out, "Output directory")->required();
  sa->add_option("--height", height, "Output height")->capture_default_str();

  auto* in = app.add_subcommand("interpolate", "Decode a linear path between two latent codes");
  in->add_option("--ckpt", ckpt, "Checkpoint")->required();
  in->add_option("--from", from, "Training image id or latent JSON file")->required();
  in->add_option("--to", to, "Training image id or latent JSON file")->required();
  in->add_option("--steps", steps, "Number of frames including both ends")->capture_default_str();
  in->add_option("--out", out, "Output directory")->required();
  in->add_option("--height", height, "Output height")->capture_default_str();

  auto* ev = app.add_subcommand("eval", "Per-image PSNR of RENI and baselines at matched dimensions");
  ev->add_option("--ckpt", ckpt, "Checkpoint")->required();
  ev->add_option("--data", data_dir, "Dataset directory")->required();
  ev->add_option("--dims", dims, "Comma-separated dimensions D")->capture_default_str();
  ev->add_option("--baselines", baselines, "Comma-separated subset of sh,sg")->capture_default_str();
  ev->add_option("--out", out, "CSV path")->required();
  ev->add_option("--sg-iterations", sg_iterations, "Spherical Gaussian fit iterations")->capture_default_str();
  fit_opts.add(ev);

  auto* iv = app.add_subcommand("invert", "Recover lighting from renders of a sphere");
  iv->add_option("--ckpt", ckpt, "Checkpoint")->required();
  iv->add_option("--target", target, "Environment map lighting the target renders")->required();
  iv->add_option("--ks", inv.ks, "Specular weights: a..b or a comma list")->capture_default_str();
  iv->add_option("--ks-steps", inv.ks_steps, "Values generated for an a..b range")->capture_default_str();
  iv->add_option("--out", out, "Output directory")->required();
  iv->add_option("--size", inv.size, "Render size in pixels")->capture_default_str();
  iv->add_option("--kd", inv.kd, "Diffuse albedo (three values)")->expected(3);
  iv->add_option("--shininess", inv.shininess, "Blinn-Phong exponent")->capture_default_str();
  iv->add_option("--env-height", inv.env_height, "Height of the recovered environment")->capture_default_str();
  iv->add_option("--epochs", inv.epochs, "Optimisation steps")->capture_default_str();
  iv->add_option("--lr-start", inv.lr_start, "Initial learning rate")->capture_default_str();
  iv->add_option("--lr-end", inv.lr_end, "Final learning rate")->capture_default_str();
  iv->add_option("--rho", inv.rho, "Cosine loss weight")->capture_default_str();
  iv->add_option("--gamma", inv.gamma, "Latent prior weight")->capture_default_str();
  iv->add_option("--sh-order", inv.sh_order, "SH order of the baseline (default: matched to D)");

  auto* eq = app.add_subcommand("check-equivariance", "Max deviation of f(R d, R Z) from f(d, Z)");
  eq->add_option("--ckpt", ckpt, "Checkpoint")->required();
  eq->add_option("--trials", trials, "Random (d, Z, psi) triples")->capture_default_str();
  eq->add_option("--seed", seed, "Random seed")->capture_default_str();

  auto* al = app.add_subcommand("align", "Best y-rotation between latents fitted to image pairs");
  al->add_option("--ckpt", ckpt, "Checkpoint")->required();
  al->add_option("--pairs", pairs, "pairs.json directory, or a dataset paired with rotated copies")->required();
  al->add_option("--angle", angle, "Rotation of the generated copies")->capture_default_str();
  al->add_option("--out", out, "CSV path");
  fit_opts.add(al);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return cmd_gen_dataset(out, count, seed, height);
    if (*tr) return cmd_train(data_dir, config, out, log_path, quiet);
    if (*fi) return cmd_fit(ckpt, image, mask, report, out, fit_opts);
    if (*sa) return cmd_sample(ckpt, count, seed, out, height);
    if (*in) return cmd_interpolate(ckpt, from, to, steps, out, height);
    if (*ev) return cmd_eval(ckpt, data_dir, dims, baselines, out, fit_opts, sg_iterations);
    if (*iv) return cmd_invert(ckpt, target, out, inv);
    if (*eq) return cmd_check_equivariance(ckpt, trials, seed);
    if (*al) return cmd_align(ckpt, pairs, angle, out, fit_opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

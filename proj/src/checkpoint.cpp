#include "reni/checkpoint.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace reni {

using nlohmann::json;

namespace {

json vector_to_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

void reject_unknown(const json& j, const std::set<std::string>& known, const char* where) {
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw std::invalid_argument(std::string(where) + ": unknown key '" + key + "'");
}

LrRange lr_from_json(const json& j, LrRange fallback) {
  reject_unknown(j, {"start", "end"}, "learning rate");
  fallback.start = j.value("start", fallback.start);
  fallback.end = j.value("end", fallback.end);
  return fallback;
}

}  // namespace

json to_json(const TrainConfig& cfg) {
  json schedule = json::array();
  for (const auto& r : cfg.schedule) schedule.push_back({{"height", r.height}, {"epochs", r.epochs}});
  json out = {
      {"mode", to_string(cfg.mode)},
      {"latent_count", cfg.latent_count},
      {"hidden_layers", cfg.hidden_layers},
      {"hidden_width", cfg.hidden_width},
      {"omega0", cfg.omega0},
      {"beta", cfg.beta},
      {"schedule", schedule},
      {"network_lr", {{"start", cfg.network_lr.start}, {"end", cfg.network_lr.end}}},
      {"latent_lr", {{"start", cfg.latent_lr.start}, {"end", cfg.latent_lr.end}}},
      {"seed", cfg.seed},
      {"floor", cfg.floor},
  };
  if (cfg.stats) out["norm_stats"] = {{"log_min", cfg.stats->log_min}, {"log_max", cfg.stats->log_max}};
  return out;
}

TrainConfig train_config_from_json(const json& j) {
  reject_unknown(j,
                 {"mode", "latent_count", "hidden_layers", "hidden_width", "omega0", "beta", "schedule", "network_lr",
                  "latent_lr", "seed", "floor", "norm_stats"},
                 "train config");
  TrainConfig cfg;
  if (j.contains("mode")) cfg.mode = parse_equivariance(j.at("mode").get<std::string>());
  cfg.latent_count = j.value("latent_count", cfg.latent_count);
  cfg.hidden_layers = j.value("hidden_layers", cfg.hidden_layers);
  cfg.hidden_width = j.value("hidden_width", cfg.hidden_width);
  cfg.omega0 = j.value("omega0", cfg.omega0);
  cfg.beta = j.value("beta", cfg.beta);
  if (j.contains("schedule")) {
    cfg.schedule.clear();
    for (const auto& r : j.at("schedule")) cfg.schedule.push_back({r.at("height").get<int>(), r.at("epochs").get<int>()});
  }
  if (j.contains("network_lr")) cfg.network_lr = lr_from_json(j.at("network_lr"), cfg.network_lr);
  if (j.contains("latent_lr")) cfg.latent_lr = lr_from_json(j.at("latent_lr"), cfg.latent_lr);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.floor = j.value("floor", cfg.floor);
  if (j.contains("norm_stats")) {
    const auto& s = j.at("norm_stats");
    reject_unknown(s, {"log_min", "log_max"}, "norm_stats");
    cfg.stats = NormStats{s.at("log_min").get<double>(), s.at("log_max").get<double>()};
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open config");
  try {
    return train_config_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

json to_json(const Checkpoint& ckpt) {
  const auto& a = ckpt.params.arch();
  json latents = json::array();
  for (std::size_t i = 0; i < ckpt.latents.size(); ++i)
    latents.push_back({{"id", i < ckpt.image_ids.size() ? ckpt.image_ids[i] : std::to_string(i)},
                       {"mean", vector_to_json(ckpt.latents[i].mean)},
                       {"log_var", vector_to_json(ckpt.latents[i].log_var)}});
  return {
      {"format", "reni-checkpoint"},
      {"version", kCheckpointVersion},
      {"config", to_json(ckpt.config)},
      {"architecture",
       {{"input_width", a.input_width},
        {"hidden_layers", a.hidden_layers},
        {"hidden_width", a.hidden_width},
        {"output_width", a.output_width},
        {"omega0", a.omega0}}},
      {"norm_stats", {{"log_min", ckpt.stats.log_min}, {"log_max", ckpt.stats.log_max}}},
      {"params", vector_to_json(ckpt.params.values())},
      {"latents", latents},
  };
}

Checkpoint checkpoint_from_json(const json& j) {
  if (j.value("format", std::string()) != "reni-checkpoint") throw std::invalid_argument("not a RENI checkpoint");
  if (j.value("version", 0) != kCheckpointVersion)
    throw std::invalid_argument("unsupported checkpoint version " + std::to_string(j.value("version", 0)));
  Checkpoint ckpt;
  ckpt.config = train_config_from_json(j.at("config"));
  const auto& a = j.at("architecture");
  FieldArchitecture arch;
  arch.input_width = a.at("input_width").get<int>();
  arch.hidden_layers = a.at("hidden_layers").get<int>();
  arch.hidden_width = a.at("hidden_width").get<int>();
  arch.output_width = a.at("output_width").get<int>();
  arch.omega0 = a.at("omega0").get<double>();
  ckpt.params = FieldParams(arch);
  const Eigen::VectorXd values = vector_from_json(j.at("params"));
  if (values.size() != ckpt.params.values().size()) throw std::invalid_argument("checkpoint: parameter count mismatch");
  ckpt.params.values() = values;
  ckpt.stats = {j.at("norm_stats").at("log_min").get<double>(), j.at("norm_stats").at("log_max").get<double>()};
  for (const auto& l : j.at("latents")) {
    ckpt.latents.push_back({vector_from_json(l.at("mean")), vector_from_json(l.at("log_var"))});
    ckpt.image_ids.push_back(l.at("id").get<std::string>());
  }
  ckpt.validate();
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << to_json(ckpt).dump() << '\n';
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open checkpoint");
  try {
    return checkpoint_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

json latent_to_json(const LatentCode& z) {
  json cols = json::array();
  for (Eigen::Index n = 0; n < z.cols(); ++n) cols.push_back({z(0, n), z(1, n), z(2, n)});
  return {{"latent_count", z.cols()}, {"columns", cols}};
}

LatentCode latent_from_json(const json& j) {
  const auto& cols = j.at("columns");
  LatentCode z(3, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t n = 0; n < cols.size(); ++n) {
    const auto v = cols[n].get<std::vector<double>>();
    if (v.size() != 3) throw std::invalid_argument("latent columns must have 3 entries");
    z.col(static_cast<Eigen::Index>(n)) << v[0], v[1], v[2];
  }
  check_latent(z);
  return z;
}

}  // namespace reni

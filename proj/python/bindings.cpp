#include "reni/baselines.hpp"
#include "reni/checkpoint.hpp"
#include "reni/dataset.hpp"
#include "reni/fitting.hpp"
#include "reni/render.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace py = pybind11;
using namespace reni;

namespace {

using Array3 = py::array_t<double, py::array::c_style | py::array::forcecast>;

// H x W x 3 array with W = 2H.
EnvironmentMap to_map(const Array3& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw std::invalid_argument("expected an H x W x 3 array");
  const int h = static_cast<int>(a.shape(0));
  if (a.shape(1) != 2 * h) throw std::invalid_argument("environment maps must be twice as wide as they are tall");
  EnvironmentMap map = EnvironmentMap::zeros(h);
  const double* src = a.data();
  for (Eigen::Index p = 0; p < map.rgb.rows(); ++p)
    for (int c = 0; c < 3; ++c) map.rgb(p, c) = src[3 * p + c];
  return map;
}

py::array_t<double> to_array(const RgbArray& rgb, int height, int width) {
  py::array_t<double> out({height, width, 3});
  double* dst = out.mutable_data();
  for (Eigen::Index p = 0; p < rgb.rows(); ++p)
    for (int c = 0; c < 3; ++c) dst[3 * p + c] = rgb(p, c);
  return out;
}

py::array_t<double> to_array(const EnvironmentMap& map) { return to_array(map.rgb, map.height(), map.width()); }

PixelMask to_mask(const py::array_t<bool, py::array::c_style | py::array::forcecast>& m, int height) {
  if (m.ndim() != 2 || m.shape(0) != height || m.shape(1) != 2 * height)
    throw std::invalid_argument("mask must be H x 2H and match the image");
  PixelMask mask{height, std::vector<std::uint8_t>(m.data(), m.data() + m.size())};
  return mask;
}

RenderScene make_scene(int size, const Eigen::Vector3d& kd, double ks, double shininess) {
  RenderScene scene;
  scene.size = size;
  scene.material.diffuse = kd;
  scene.material.specular = ks;
  scene.material.shininess = shininess;
  scene.validate();
  return scene;
}

}  // namespace

PYBIND11_MODULE(_reni, m) {
  m.doc() = "Rotation-equivariant conditional spherical neural fields";

  py::enum_<Equivariance>(m, "Equivariance")
      .value("SO3", Equivariance::SO3)
      .value("SO2", Equivariance::SO2)
      .value("NONE", Equivariance::None);

  py::class_<DirectionGrid>(m, "DirectionGrid")
      .def_readonly("height", &DirectionGrid::height)
      .def_readonly("width", &DirectionGrid::width)
      .def_readonly("directions", &DirectionGrid::directions)
      .def_readonly("sin_weights", &DirectionGrid::sin_weights)
      .def("solid_angle", &DirectionGrid::solid_angle);
  m.def("equirect_grid", &equirect_grid, py::arg("height"));

  m.def("y_rotation", [](double angle) { return YRotation(angle).matrix(); }, py::arg("angle"));
  m.def("rotate_latent", [](double angle, const LatentCode& z) { return rotate_latent(YRotation(angle), z); },
        py::arg("angle"), py::arg("z"));
  m.def(
      "transform",
      [](Equivariance mode, const Direction& d, const LatentCode& z) {
        const InvariantFeatures f = transform(mode, d, z);
        return py::make_tuple(f.dir_feat, f.cond_feat);
      },
      py::arg("mode"), py::arg("d"), py::arg("z"));

  py::class_<NormStats>(m, "NormStats")
      .def(py::init([](double lo, double hi) { return NormStats{lo, hi}; }), py::arg("log_min"), py::arg("log_max"))
      .def_readwrite("log_min", &NormStats::log_min)
      .def_readwrite("log_max", &NormStats::log_max);

  m.def("read_environment", [](const std::filesystem::path& p) { return to_array(read_environment(p)); },
        py::arg("path"));
  m.def("write_pfm", [](const std::filesystem::path& p, const Array3& a) { write_pfm(to_map(a), p); }, py::arg("path"),
        py::arg("image"));
  m.def("rgbe_to_float", &rgbe_to_float, py::arg("r"), py::arg("g"), py::arg("b"), py::arg("e"));
  m.def(
      "normalize_log",
      [](const Array3& a, const NormStats& s) {
        const EnvironmentMap map = to_map(a);
        return to_array(normalize_log(map.rgb, s), map.height(), map.width());
      },
      py::arg("image"), py::arg("stats"));

  m.def(
      "generate_dataset",
      [](int count, std::uint64_t seed, int height) {
        std::vector<py::array_t<double>> out;
        for (const auto& map : generate_dataset(count, seed, height).maps) out.push_back(to_array(map));
        return out;
      },
      py::arg("count"), py::arg("seed"), py::arg("height"));
  m.def("rotate_map", [](const Array3& a, double angle) { return to_array(rotate_map(to_map(a), angle)); },
        py::arg("image"), py::arg("angle"));

  m.def(
      "kld_loss",
      [](const Eigen::VectorXd& mean, const Eigen::VectorXd& log_var) {
        return kld_loss(VariationalLatent{mean, log_var});
      },
      py::arg("mean"), py::arg("log_var"));

  py::class_<Checkpoint>(m, "Checkpoint")
      .def_property_readonly("mode", &Checkpoint::mode)
      .def_property_readonly("latent_count", &Checkpoint::latent_count)
      .def_property_readonly("stats", [](const Checkpoint& c) { return c.stats; })
      .def_property_readonly("image_ids", [](const Checkpoint& c) { return c.image_ids; })
      .def_property_readonly("latents",
                             [](const Checkpoint& c) {
                               std::vector<LatentCode> out;
                               for (const auto& v : c.latents) out.push_back(unflatten_latent(v.mean));
                               return out;
                             })
      .def("save", [](const Checkpoint& c, const std::filesystem::path& p) { save_checkpoint(c, p); }, py::arg("path"));
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

  m.def(
      "train",
      [](const std::vector<Array3>& images, const std::string& config_json) {
        const TrainConfig cfg = train_config_from_json(nlohmann::json::parse(config_json));
        std::vector<EnvironmentMap> maps;
        for (const auto& a : images) maps.push_back(to_map(a));
        py::gil_scoped_release release;
        return train(maps, cfg).checkpoint;
      },
      py::arg("images"), py::arg("config_json"));

  m.def(
      "decode",
      [](const Checkpoint& c, const LatentCode& z, int height) {
        const DirectionGrid grid = equirect_grid(height);
        return to_array(decode(c, z, grid), grid.height, grid.width);
      },
      py::arg("checkpoint"), py::arg("z"), py::arg("height"));
  m.def("decode_hdr", [](const Checkpoint& c, const LatentCode& z, int height) { return to_array(decode_hdr(c, z, height)); },
        py::arg("checkpoint"), py::arg("z"), py::arg("height"));

  m.def(
      "fit",
      [](const Checkpoint& c, const Array3& image, std::optional<py::array_t<bool, py::array::c_style | py::array::forcecast>> mask,
         std::vector<std::pair<int, int>> schedule, double lr_start, double lr_end, double rho, double gamma,
         std::optional<LatentCode> init) {
        const EnvironmentMap target = to_map(image);
        const PixelMask pm = mask ? to_mask(*mask, target.height()) : PixelMask::full(target.height());
        FitConfig cfg;
        cfg.rho = rho;
        cfg.gamma = gamma;
        cfg.lr = {lr_start, lr_end};
        for (const auto& [h, e] : schedule) cfg.schedule.push_back({h, e});
        cfg.init = init;
        FitResult r;
        {
          py::gil_scoped_release release;
          r = fit(c, target, pm, cfg);
        }
        py::dict out;
        out["z"] = r.z;
        out["psnr_observed"] = r.psnr_observed;
        out["psnr_unobserved"] = r.psnr_unobserved;
        out["psnr_all"] = r.psnr_all;
        return out;
      },
      py::arg("checkpoint"), py::arg("image"), py::arg("mask") = py::none(),
      py::arg("schedule") = std::vector<std::pair<int, int>>{}, py::arg("lr_start") = 1e-2, py::arg("lr_end") = 1e-4,
      py::arg("rho") = 1e-4, py::arg("gamma") = 1e-7, py::arg("init") = py::none());

  m.def(
      "align_rotation",
      [](const LatentCode& z1, const LatentCode& z2) {
        const Alignment a = align_rotation(z1, z2);
        return py::make_tuple(a.angle, a.relative_error);
      },
      py::arg("z1"), py::arg("z2"));

  m.def("sh_basis", &sh_basis, py::arg("d"), py::arg("order"));
  m.def(
      "sh_fit",
      [](const Array3& a, int order) {
        const EnvironmentMap map = to_map(a);
        return Eigen::MatrixXd(sh_fit(map.grid, map.rgb, order).coeffs);
      },
      py::arg("values"), py::arg("order"));
  m.def(
      "sh_render",
      [](const Eigen::MatrixXd& coeffs, int height) {
        SHCoeffs sh;
        sh.order = static_cast<int>(std::lround(std::sqrt(static_cast<double>(coeffs.rows())))) - 1;
        if (sh_count(sh.order) != coeffs.rows() || coeffs.cols() != 3)
          throw std::invalid_argument("coefficients must be (order + 1)^2 x 3");
        sh.coeffs = coeffs;
        const DirectionGrid grid = equirect_grid(height);
        return to_array(sh_render(sh, grid), grid.height, grid.width);
      },
      py::arg("coeffs"), py::arg("height"));
  m.def(
      "dimension_plan",
      [](int d) {
        const DimensionPlan p = dimension_plan(d);
        return py::make_tuple(p.sh_order, p.sg_lobes);
      },
      py::arg("dimension"));

  m.def(
      "shade",
      [](const Array3& env, int size, const Eigen::Vector3d& kd, double ks, double shininess) {
        const RenderImage img = shade(make_scene(size, kd, ks, shininess), to_map(env));
        return to_array(img.rgb, img.size, img.size);
      },
      py::arg("env"), py::arg("size") = 64, py::arg("kd") = Eigen::Vector3d(0.8, 0.8, 0.8), py::arg("ks") = 0.0,
      py::arg("shininess") = 32.0);
}

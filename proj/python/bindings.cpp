#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "vlcest/errors.hpp"
#include "vlcest/ffdnet.hpp"
#include "vlcest/imaging.hpp"
#include "vlcest/mmse.hpp"
#include "vlcest/tensor.hpp"
#include "vlcest/vlc_channel.hpp"

namespace py = pybind11;
using namespace vlcest;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array image_array(const Image& im) {
  Array a({im.rows, im.cols});
  std::copy(im.pixels.begin(), im.pixels.end(), a.mutable_data());
  return a;
}

Image array_image(const Array& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-D array");
  const auto rows = static_cast<std::size_t>(a.shape(0)), cols = static_cast<std::size_t>(a.shape(1));
  return Image(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

Tensor<double> array_tensor(const Array& a) {
  if (a.ndim() != 4) throw ShapeError("expected a 4-D (n, c, h, w) array");
  const Shape4 s{static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)),
                 static_cast<std::size_t>(a.shape(2)), static_cast<std::size_t>(a.shape(3))};
  return Tensor<double>(s, std::vector<double>(a.data(), a.data() + s.size()));
}

Array tensor_array(const Tensor<double>& t) {
  const auto& s = t.shape();
  Array a({s.n, s.c, s.h, s.w});
  std::copy(t.values().begin(), t.values().end(), a.mutable_data());
  return a;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "FFDNet-style channel-image denoising for massive-MIMO VLC";

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<GeometryError>(m, "GeometryError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);

  m.def("lambertian_order", &lambertian_order, py::arg("semi_angle_deg"));
  m.def("radiant_intensity", &radiant_intensity, py::arg("order"), py::arg("irradiance_deg"));
  m.def("concentrator_gain", &concentrator_gain, py::arg("refractive_index"), py::arg("incidence_deg"),
        py::arg("fov_deg"));
  m.def(
      "channel_gain",
      [](double d, double irr, double inc, double order, double area, double filter, double n, double fov) {
        return channel_gain(d, irr, inc, order, ReceiverOptics{area, filter, n, fov});
      },
      py::arg("distance_m"), py::arg("irradiance_deg"), py::arg("incidence_deg"), py::arg("order"),
      py::arg("pd_area_m2") = 1e-4, py::arg("filter_gain") = 1.0, py::arg("refractive_index") = 1.5,
      py::arg("fov_deg") = 45.0);

  py::class_<ArrayGrid>(m, "ArrayGrid")
      .def(py::init<int, int, double, double>(), py::arg("count_x"), py::arg("count_y"), py::arg("spacing_m"),
           py::arg("plane_height_m"))
      .def_readwrite("count_x", &ArrayGrid::count_x)
      .def_readwrite("count_y", &ArrayGrid::count_y)
      .def_readwrite("spacing_m", &ArrayGrid::spacing_m)
      .def_readwrite("plane_height_m", &ArrayGrid::plane_height_m);

  py::class_<VlcScene>(m, "VlcScene")
      .def(py::init<>())
      .def_static("with_array_size", &VlcScene::with_array_size, py::arg("n"))
      .def_readwrite("led", &VlcScene::led)
      .def_readwrite("pd", &VlcScene::pd)
      .def_readwrite("pd_offset_x_m", &VlcScene::pd_offset_x_m)
      .def_readwrite("pd_offset_y_m", &VlcScene::pd_offset_y_m)
      .def_readwrite("semi_angle_deg", &VlcScene::semi_angle_deg)
      .def_readwrite("fov_deg", &VlcScene::fov_deg)
      .def_readwrite("pd_area_m2", &VlcScene::pd_area_m2)
      .def_readwrite("filter_gain", &VlcScene::filter_gain)
      .def_readwrite("refractive_index", &VlcScene::refractive_index)
      .def_property_readonly("n_t", &VlcScene::n_t)
      .def_property_readonly("n_r", &VlcScene::n_r)
      .def("validate", &VlcScene::validate);

  m.def(
      "build_channel_matrix",
      [](const VlcScene& s) {
        const auto h = build_channel_matrix(s);
        Array a({h.n_r(), h.n_t()});
        std::copy(h.entries().begin(), h.entries().end(), a.mutable_data());
        return a;
      },
      py::arg("scene"), "N_r x N_t LOS gains; row = PD, column = LED.");

  m.def(
      "matrix_to_image",
      [](const Array& h) {
        if (h.ndim() != 2) throw ShapeError("expected a 2-D array");
        const auto r = static_cast<std::size_t>(h.shape(0)), c = static_cast<std::size_t>(h.shape(1));
        const auto x = matrix_to_image(ChannelMatrix(r, c, std::vector<double>(h.data(), h.data() + r * c)));
        return py::make_tuple(image_array(x.image), x.norm_min, x.norm_scale);
      },
      py::arg("h"), "Returns (image in [0, 1], norm_min, norm_scale).");
  m.def(
      "add_awgn", [](const Array& x, double sigma_o, std::uint64_t seed) {
        return image_array(add_awgn(array_image(x), sigma_o, seed).image);
      },
      py::arg("image"), py::arg("sigma_o"), py::arg("seed"));
  m.def(
      "psnr", [](const Array& ref, const Array& est) { return psnr(array_image(ref), array_image(est)); },
      py::arg("reference"), py::arg("estimate"));

  m.def(
      "pixel_unshuffle", [](const Array& x) { return tensor_array(pixel_unshuffle(array_tensor(x))); },
      py::arg("x"));
  m.def(
      "pixel_shuffle", [](const Array& x) { return tensor_array(pixel_shuffle(array_tensor(x))); }, py::arg("x"));

  py::class_<ModelParams<float>>(m, "Model")
      .def_property_readonly("depth", [](const ModelParams<float>& p) { return p.config.depth; })
      .def_property_readonly("features", [](const ModelParams<float>& p) { return p.config.features; })
      .def_property_readonly("parameter_count", &ModelParams<float>::parameter_count)
      .def(
          "denoise",
          [](const ModelParams<float>& p, const Array& noisy, double sigma) {
            return image_array(denoise(p, array_image(noisy), sigma));
          },
          py::arg("noisy"), py::arg("sigma"))
      .def("save", [](const ModelParams<float>& p, const std::filesystem::path& path) { save_checkpoint(p, path); });
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));
  m.def(
      "init_model",
      [](int depth, int features, std::uint64_t seed) { return init_params<float>(ModelConfig{depth, features, 1}, seed); },
      py::arg("depth") = 15, py::arg("features") = 64, py::arg("seed") = 1);

  py::class_<MmseModel>(m, "MmseModel")
      .def_readonly("patch_size", &MmseModel::patch_size)
      .def_readonly("sample_count", &MmseModel::sample_count)
      .def_property_readonly("mean", [](const MmseModel& mm) { return Array(mm.mean.size(), mm.mean.data()); })
      .def(
          "denoise",
          [](const MmseModel& mm, const Array& noisy, double sigma_o) {
            return image_array(mmse_denoise(mm, array_image(noisy), sigma_o));
          },
          py::arg("noisy"), py::arg("sigma_o"))
      .def("save", [](const MmseModel& mm, const std::filesystem::path& path) { save_mmse(mm, path); });
  m.def(
      "fit_mmse",
      [](const std::vector<Array>& images, std::size_t patch_size, std::size_t max_patches, std::uint64_t seed) {
        std::vector<Image> ims;
        for (const auto& a : images) ims.push_back(array_image(a));
        return fit_mmse(ims, patch_size, max_patches, seed);
      },
      py::arg("images"), py::arg("patch_size") = 8, py::arg("max_patches") = 0, py::arg("seed") = 1);
  m.def("load_mmse", &load_mmse, py::arg("path"));
}

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <torch/torch.h>

#include <cstring>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fexgan/affect.hpp"
#include "fexgan/checkpoint.hpp"
#include "fexgan/config.hpp"
#include "fexgan/corpus.hpp"
#include "fexgan/errors.hpp"
#include "fexgan/image.hpp"
#include "fexgan/model.hpp"
#include "fexgan/service.hpp"
#include "fexgan/tensor_image.hpp"
#include "fexgan/trainer.hpp"

namespace py = pybind11;
using namespace fexgan;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using F32Array = py::array_t<float, py::array::c_style | py::array::forcecast>;
using AffectArg = std::variant<std::string, std::vector<double>>;

AffectVector to_affect(const AffectArg& arg) {
  if (const auto* name = std::get_if<std::string>(&arg)) return one_hot(affect_from_name(*name));
  const auto& v = std::get<std::vector<double>>(arg);
  if (v.size() != kNumAffects) {
    throw ShapeError("affect vector needs 7 entries, got " + std::to_string(v.size()));
  }
  AffectVector out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

Image image_from_array(const U8Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw ShapeError("image must be an H x W x 3 uint8 array");
  Image img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::memcpy(img.pixels.data(), a.data(), img.pixels.size());
  return img;
}

U8Array array_from_image(const Image& img) {
  U8Array out({img.height, img.width, 3});
  std::memcpy(out.mutable_data(), img.pixels.data(), img.pixels.size());
  return out;
}

/// [N, H, W, 3] or [H, W, 3] uint8 to [N, 3, S, S].
torch::Tensor batch_from_array(const U8Array& a, int size) {
  if (a.ndim() == 3) return preprocess(image_from_array(a), size).unsqueeze(0);
  if (a.ndim() != 4 || a.shape(3) != 3) throw ShapeError("images must be N x H x W x 3 uint8");
  const auto n = a.shape(0);
  const auto h = a.shape(1), w = a.shape(2);
  std::vector<torch::Tensor> rows;
  rows.reserve(static_cast<std::size_t>(n));
  for (py::ssize_t i = 0; i < n; ++i) {
    Image img(static_cast<int>(w), static_cast<int>(h));
    std::memcpy(img.pixels.data(), a.data(i), img.pixels.size());
    rows.push_back(preprocess(img, size));
  }
  return torch::stack(rows);
}

U8Array array_from_batch(const torch::Tensor& nchw) {
  const auto n = nchw.size(0), s = nchw.size(2);
  U8Array out({n, s, nchw.size(3), static_cast<py::ssize_t>(3)});
  for (int64_t i = 0; i < n; ++i) {
    const auto img = to_image(nchw[i]);
    std::memcpy(out.mutable_data(i), img.pixels.data(), img.pixels.size());
  }
  return out;
}

F32Array array_from_tensor(const torch::Tensor& t) {
  const auto c = t.to(torch::kFloat32).contiguous();
  std::vector<py::ssize_t> shape(c.sizes().begin(), c.sizes().end());
  F32Array out(shape);
  std::memcpy(out.mutable_data(), c.data_ptr<float>(), static_cast<std::size_t>(c.numel()) * sizeof(float));
  return out;
}

torch::Tensor tensor_from_array(const F32Array& a) {
  std::vector<int64_t> shape(a.shape(), a.shape() + a.ndim());
  return torch::from_blob(const_cast<float*>(a.data()), shape, torch::kFloat32).clone();
}

torch::Tensor affect_rows(const AffectArg& arg, int64_t n) {
  const auto v = to_affect(arg);
  std::vector<AffectVector> rows(static_cast<std::size_t>(n), v);
  return affect_tensor(rows);
}

class Model {
 public:
  explicit Model(const std::filesystem::path& path) : net_(NetworkModel::load(path)) {}

  int image_size() const { return net_->image_size(); }
  int latent_dim() const { return net_->latent_dim(); }
  std::int64_t step() const { return net_->step(); }

  py::tuple encode(const U8Array& images, const AffectArg& source_affect) const {
    auto x = batch_from_array(images, image_size());
    LatentDistribution d;
    {
      py::gil_scoped_release nogil;
      d = net_->encode(x, affect_rows(source_affect, x.size(0)));
    }
    return py::make_tuple(array_from_tensor(d.mu), array_from_tensor(d.log_var));
  }

  U8Array decode(const F32Array& z, const AffectArg& target_affect) const {
    auto zt = tensor_from_array(z);
    if (zt.dim() == 1) zt = zt.unsqueeze(0);
    if (zt.dim() != 2 || zt.size(1) != latent_dim()) {
      throw ShapeError("z must have " + std::to_string(latent_dim()) + " columns");
    }
    torch::Tensor out;
    {
      py::gil_scoped_release nogil;
      out = net_->decode(zt, affect_rows(target_affect, zt.size(0)));
    }
    return array_from_batch(out);
  }

  U8Array transform(const U8Array& image, const AffectArg& source_affect, const AffectArg& target_affect,
                    std::optional<F32Array> eps) const {
    auto x = batch_from_array(image, image_size());
    std::optional<torch::Tensor> e;
    if (eps) e = tensor_from_array(*eps).reshape({x.size(0), latent_dim()});
    torch::Tensor out;
    {
      py::gil_scoped_release nogil;
      out = net_->transform(x, affect_rows(source_affect, x.size(0)), affect_rows(target_affect, x.size(0)), e);
    }
    if (image.ndim() == 3) return array_from_image(to_image(out[0]));
    return array_from_batch(out);
  }

  py::tuple discriminate(const U8Array& images) const {
    auto x = batch_from_array(images, image_size());
    DiscOutput o;
    {
      py::gil_scoped_release nogil;
      o = net_->discriminate(x);
    }
    return py::make_tuple(array_from_tensor(o.validity), array_from_tensor(o.class_probs));
  }

  std::shared_ptr<NetworkModel> net() const { return net_; }

 private:
  std::shared_ptr<NetworkModel> net_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Conditional facial-expression GAN: corpus, training and inference";
  torch::set_num_threads(1);

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<IntegrityError>(m, "IntegrityError", PyExc_RuntimeError);
  py::register_exception<VersionError>(m, "VersionError", PyExc_RuntimeError);

  m.def("affects", [] {
    std::vector<std::string> out;
    for (auto a : kAllAffects) out.emplace_back(affect_name(a));
    return out;
  });
  m.def("one_hot", [](const std::string& name) { return one_hot(affect_from_name(name)); }, py::arg("name"));
  m.def(
      "blend",
      [](const std::map<std::string, double>& weights, double lambda, double noise_scale) {
        BlendSpec spec;
        for (const auto& [k, w] : weights) spec.weights[affect_from_name(k)] = w;
        spec.lambda = lambda;
        spec.noise_scale = noise_scale;
        return blend(spec);
      },
      py::arg("weights"), py::arg("lam") = 0.0, py::arg("noise_scale") = 0.1);

  m.def("read_png", [](const std::filesystem::path& p) { return array_from_image(read_png(p)); }, py::arg("path"));
  m.def(
      "write_png", [](const std::filesystem::path& p, const U8Array& a) { write_png(p, image_from_array(a)); },
      py::arg("path"), py::arg("image"));

  m.def(
      "generate_corpus",
      [](const std::filesystem::path& root, int identities, int frames, int size, std::uint64_t seed, int workers) {
        CorpusSpec spec{identities, frames, size, seed};
        py::gil_scoped_release nogil;
        return gen_corpus(spec, root, workers).records.size();
      },
      py::arg("root"), py::arg("identities") = 3, py::arg("frames") = 200, py::arg("size") = 64,
      py::arg("seed") = 7, py::arg("workers") = 1,
      "Renders the synthetic corpus under root and returns the image count.");

  m.def(
      "train",
      [](const std::filesystem::path& config, std::optional<std::filesystem::path> resume) {
        const auto cfg = TrainConfig::from_file(config);
        py::gil_scoped_release nogil;
        return train(cfg, resume).final_checkpoint;
      },
      py::arg("config"), py::arg("resume") = py::none(), "Runs training and returns the final checkpoint path.");

  m.def("checkpoint_checksum", &file_checksum, py::arg("path"));
  m.def(
      "checkpoint_config",
      [](const std::filesystem::path& p) { return read_checkpoint(p).config_text; }, py::arg("path"));

  py::class_<Model>(m, "Model")
      .def(py::init<const std::filesystem::path&>(), py::arg("checkpoint"))
      .def_property_readonly("image_size", &Model::image_size)
      .def_property_readonly("latent_dim", &Model::latent_dim)
      .def_property_readonly("step", &Model::step)
      .def("encode", &Model::encode, py::arg("images"), py::arg("source_affect"),
           "Returns (mu, log_var) for uint8 images.")
      .def("decode", &Model::decode, py::arg("z"), py::arg("target_affect"))
      .def("transform", &Model::transform, py::arg("image"), py::arg("source_affect"), py::arg("target_affect"),
           py::arg("eps") = py::none())
      .def("discriminate", &Model::discriminate, py::arg("images"),
           "Returns (validity, class_probs).");

  py::class_<Service, std::shared_ptr<Service>>(m, "Service")
      .def(py::init([](const Model& model, const std::optional<std::filesystem::path>& corpus) {
             auto ids = corpus ? scan_identities(*corpus) : std::vector<Identity>{};
             return std::make_shared<Service>(model.net(), model.step(), std::move(ids));
           }),
           py::arg("model"), py::arg("corpus") = py::none())
      .def(
          "handle",
          [](const Service& s, const std::string& method, const std::string& path, const std::string& body) {
            Response r;
            {
              py::gil_scoped_release nogil;
              r = s.handle(method, path, body);
            }
            return py::make_tuple(r.status, r.body);
          },
          py::arg("method"), py::arg("path"), py::arg("body") = "",
          "Dispatches one API request and returns (status, json_body).");
}

#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "vhist/config.hpp"
#include "vhist/datasets.hpp"
#include "vhist/evalsuite.hpp"
#include "vhist/imagecore.hpp"
#include "vhist/optics.hpp"
#include "vhist/phantom.hpp"
#include "vhist/pipeline.hpp"
#include "vhist/translate.hpp"

namespace py = pybind11;
using namespace vhist;

namespace {

using F64 = py::array_t<double, py::array::c_style | py::array::forcecast>;
using F32 = py::array_t<float, py::array::c_style | py::array::forcecast>;

Grid<double> to_grid(const F64& a) {
  if (a.ndim() != 2) throw DimensionError("expected a 2-D array");
  Grid<double> g(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::copy_n(a.data(), g.size(), g.data());
  return g;
}

F64 from_grid(const Grid<double>& g) {
  F64 out({g.height(), g.width()});
  std::copy_n(g.data(), g.size(), out.mutable_data());
  return out;
}

// (H, W) or (H, W, C) float arrays in [0, 1].
Image to_image(const F32& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw DimensionError("expected an (H, W) or (H, W, C) array");
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  Image img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)), c);
  std::copy_n(a.data(), img.size(), img.data());
  return img;
}

F32 from_image(const Image& img) {
  std::vector<py::ssize_t> shape{img.height(), img.width()};
  if (img.channels() > 1) shape.push_back(img.channels());
  F32 out(shape);
  std::copy_n(img.data(), img.size(), out.mutable_data());
  return out;
}

py::array_t<std::uint8_t> from_mask(const Grid<std::uint8_t>& g) {
  py::array_t<std::uint8_t> out({g.height(), g.width()});
  std::copy_n(g.data(), g.size(), out.mutable_data());
  return out;
}

std::vector<Image> to_images(const std::vector<F32>& arrays) {
  std::vector<Image> out;
  out.reserve(arrays.size());
  for (const auto& a : arrays) out.push_back(to_image(a));
  return out;
}

py::list from_images(const std::vector<Image>& images) {
  py::list out;
  for (const auto& i : images) out.append(from_image(i));
  return out;
}

py::dict record(const LossRecord& r) {
  py::dict d;
  d["epoch"] = r.epoch;
  d["cycle"] = r.cycle;
  d["gen_x"] = r.gen_x;
  d["gen_y"] = r.gen_y;
  d["disc_x"] = r.disc_x;
  d["disc_y"] = r.disc_y;
  d["identity"] = r.identity;
  d["lr"] = r.lr;
  d["iterations"] = r.iterations;
  return d;
}

std::unique_ptr<TranslationModel> make_model(int base_width, int n_res_blocks, int n_disc_layers, int batch_size, int epochs_flat,
                           int epochs_decay, double lr0, const std::string& input_domain, std::uint64_t seed) {
  CycleGANConfig c = CycleGANConfig::desk();
  c.base_width = base_width;
  c.n_res_blocks = n_res_blocks;
  c.n_disc_layers = n_disc_layers;
  c.batch_size = batch_size;
  c.epochs_flat = epochs_flat;
  c.epochs_decay = epochs_decay;
  c.lr0 = lr0;
  c.input_domain = input_domain_from_string(input_domain);
  c.seed = seed;
  c.validate();
  return std::make_unique<TranslationModel>(c);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Phase-to-H&E virtual staining toolkit";

  auto base = py::register_exception<Error>(m, "VhistError", PyExc_RuntimeError);
  py::register_exception<DimensionError>(m, "DimensionError", base);
  py::register_exception<ParameterError>(m, "ParameterError", base);
  py::register_exception<IndexError>(m, "IndexError", base);
  py::register_exception<RangeError>(m, "RangeError", base);
  py::register_exception<CoverageError>(m, "CoverageError", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<IoError>(m, "IoError", base);
  py::register_exception<TrainingDivergence>(m, "TrainingDivergence", base);
  py::register_exception<CheckpointIncompatible>(m, "CheckpointIncompatible", base);
  py::register_exception<DomainMismatch>(m, "DomainMismatch", base);
  py::register_exception<StratificationError>(m, "StratificationError", base);
  py::register_exception<UndefinedKappa>(m, "UndefinedKappa", base);
  py::register_exception<ScheduleComplete>(m, "ScheduleComplete", base);

  // phantoms
  m.def(
      "phantom",
      [](int width, int height, std::uint64_t seed, bool tumor, int z) {
        PhantomSpec s;
        s.width_px = width;
        s.height_px = height;
        s.seed = seed;
        s.class_label = tumor ? TissueClass::tumor : TissueClass::healthy;
        s.depth_slices = z + 1;
        const Phantom p = generate_phantom(s);
        py::dict d;
        d["phase"] = from_grid(render_phase(p, z).phase);
        d["he"] = from_image(render_he(p, z));
        d["nuclei"] = from_mask(label_mask(p, z, Tissue::nucleus));
        return d;
      },
      py::arg("width") = 256, py::arg("height") = 256, py::arg("seed") = 0, py::arg("tumor") = false,
      py::arg("z") = 0, "Phase map, oracle H&E render and nucleus mask of one synthetic phantom slice.");

  // optics
  m.def(
      "forward_dpc",
      [](const F64& phase, double shear_px, double cutoff) {
        const Grid<double> g = to_grid(phase);
        const OTFSet otf = make_otf_set(g.width(), g.height(), shear_px, cutoff);
        const DPCPair d = forward_dpc(PhaseImage{g}, otf);
        return py::make_tuple(from_grid(d.shear[0]), from_grid(d.shear[1]));
      },
      py::arg("phase"), py::arg("shear_px") = kDefaultShearPx, py::arg("cutoff") = kDefaultCutoff);
  m.def(
      "reconstruct_phase",
      [](const F64& dpc_x, const F64& dpc_y, double alpha, double shear_px, double cutoff) {
        DPCPair d;
        d.shear = {to_grid(dpc_x), to_grid(dpc_y)};
        const OTFSet otf = make_otf_set(d.shear[0].width(), d.shear[0].height(), shear_px, cutoff);
        return from_grid(reconstruct_phase(d, otf, alpha).phase);
      },
      py::arg("dpc_x"), py::arg("dpc_y"), py::arg("alpha") = kDefaultAlpha, py::arg("shear_px") = kDefaultShearPx,
      py::arg("cutoff") = kDefaultCutoff);
  m.def(
      "band_limit", [](const F64& phase, double f) { return from_grid(band_limit(PhaseImage{to_grid(phase)}, f).phase); },
      py::arg("phase"), py::arg("fraction_of_nyquist"));
  m.def(
      "relative_l2", [](const F64& est, const F64& truth) { return relative_l2_zero_mean(to_grid(est), to_grid(truth)); },
      py::arg("estimate"), py::arg("truth"));

  // image core and pipeline
  m.def(
      "preprocess",
      [](const F32& gray, double p_low, double p_high, bool invert) {
        PreprocessSettings s;
        s.p_low = p_low;
        s.p_high = p_high;
        s.invert = invert;
        return from_image(preprocess(to_image(gray), s));
      },
      py::arg("gray"), py::arg("p_low") = kDefaultPercentileLow, py::arg("p_high") = kDefaultPercentileHigh,
      py::arg("invert") = true);
  m.def("tile_positions", &tile_positions, py::arg("length"), py::arg("tile"), py::arg("overlap"));
  m.def(
      "tile_layout",
      [](int w, int h, int tile, double overlap) {
        std::vector<std::pair<int, int>> out;
        for (const Offset& o : tile_layout(w, h, tile, overlap)) out.emplace_back(o.x, o.y);
        return out;
      },
      py::arg("width"), py::arg("height"), py::arg("tile"), py::arg("overlap"));

  // evaluation
  m.def(
      "cohens_kappa", [](const std::vector<int>& a, const std::vector<int>& b) { return cohens_kappa(a, b); },
      py::arg("a"), py::arg("b"));
  m.def("mean_pairwise_kappa", &mean_pairwise_kappa, py::arg("ratings"));
  m.def(
      "kfold_split",
      [](const std::vector<int>& labels, int k, std::uint64_t seed) {
        std::vector<TissueClass> cls;
        for (int l : labels) cls.push_back(l ? TissueClass::tumor : TissueClass::healthy);
        std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> out;
        for (const Fold& f : kfold_split(cls, k, seed)) out.emplace_back(f.train, f.validation);
        return out;
      },
      py::arg("labels"), py::arg("k"), py::arg("seed") = 0);

  // training objective
  m.def(
      "lr_at",
      [](double epoch, int epochs_flat, int epochs_decay, double lr0) {
        CycleGANConfig c;
        c.epochs_flat = epochs_flat;
        c.epochs_decay = epochs_decay;
        c.lr0 = lr0;
        return lr_at(epoch, c);
      },
      py::arg("epoch"), py::arg("epochs_flat") = 100, py::arg("epochs_decay") = 100, py::arg("lr0") = 2e-4);
  m.def(
      "full_objective",
      [](double cycle, double gen_x, double gen_y, double identity, double disc_x, double disc_y, double lc,
         double li) {
        const ObjectiveTotals t = full_objective(LossTerms{cycle, gen_x, gen_y, identity, disc_x, disc_y}, lc, li);
        return py::make_tuple(t.generator, t.discriminator);
      },
      py::arg("cycle"), py::arg("gen_x"), py::arg("gen_y"), py::arg("identity"), py::arg("disc_x") = 0.0,
      py::arg("disc_y") = 0.0, py::arg("lambda_cycle") = 10.0, py::arg("lambda_identity") = 0.5,
      "(generator total, discriminator total)");

  m.def(
      "make_tiles",
      [](int tile_size, int phantom_size, int count, std::uint64_t seed, const std::string& palette) {
        DataSettings d;
        d.tile_size = tile_size;
        d.phantom_size = phantom_size;
        d.x_tiles = d.y_tiles = count;
        const RunConfig rc;
        const HePalette pal = palette == "faded" ? faded_palette() : HePalette{};
        return py::make_tuple(from_images(make_x_tiles(d, rc.acquisition(), rc.conversion(), seed)),
                              from_images(make_y_tiles(d, pal, seed)));
      },
      py::arg("tile_size") = 64, py::arg("phantom_size") = 256, py::arg("count") = 200, py::arg("seed") = 0,
      py::arg("palette") = "standard", "Unpaired (source, H&E) training tiles from synthetic phantoms.");

  py::class_<TranslationModel>(m, "TranslationModel")
      .def(py::init(&make_model), py::arg("base_width") = 16, py::arg("n_res_blocks") = 2,
           py::arg("n_disc_layers") = 2, py::arg("batch_size") = 4, py::arg("epochs_flat") = 2,
           py::arg("epochs_decay") = 2, py::arg("lr0") = 2e-4, py::arg("input_domain") = "qobm_inverted",
           py::arg("seed") = 0)
      .def_static("load", &TranslationModel::load, py::arg("path"))
      .def("save", &TranslationModel::save, py::arg("path"))
      .def_property_readonly("id", &TranslationModel::id)
      .def_property_readonly("epoch", &TranslationModel::epoch)
      .def_property_readonly("parent_id", &TranslationModel::parent_id)
      .def_property_readonly("input_domain", [](const TranslationModel& t) { return to_string(t.config().input_domain); })
      .def_property_readonly("generator_parameters", &TranslationModel::generator_parameters)
      .def("to_he", [](const TranslationModel& t, const F32& tile) { return from_image(t.to_he(to_image(tile))); })
      .def("to_source",
           [](const TranslationModel& t, const F32& tile) { return from_image(t.to_source(to_image(tile))); })
      .def(
          "train",
          [](TranslationModel& t, const std::vector<F32>& xs, const std::vector<F32>& ys, int epochs,
             int max_iterations) {
            TrainOptions o;
            o.epochs = epochs;
            o.max_iterations = max_iterations;
            const std::vector<Image> x = to_images(xs), y = to_images(ys);
            TrainingResult r;
            {
              py::gil_scoped_release release;
              r = train(t, x, y, o);
            }
            py::list out;
            for (const auto& rec : r.history) out.append(record(rec));
            return out;
          },
          py::arg("x_tiles"), py::arg("y_tiles"), py::arg("epochs") = -1, py::arg("max_iterations") = -1,
          "Trains in place; returns the per-epoch loss history.")
      .def(
          "fine_tune",
          [](TranslationModel& t, const std::vector<F32>& xs, const std::vector<F32>& ys, double lr, int epochs) {
            const std::vector<Image> x = to_images(xs), y = to_images(ys);
            TrainingResult r;
            {
              py::gil_scoped_release release;
              r = fine_tune(t, t.config(), x, y, lr, epochs);
            }
            py::list out;
            for (const auto& rec : r.history) out.append(record(rec));
            return out;
          },
          py::arg("x_tiles"), py::arg("y_tiles"), py::arg("lr") = 2e-5, py::arg("epochs") = 1)
      .def(
          "cycle_loss",
          [](const TranslationModel& t, const std::vector<F32>& xs, const std::vector<F32>& ys) {
            return evaluate_cycle_loss(t, to_images(xs), to_images(ys));
          },
          py::arg("x_tiles"), py::arg("y_tiles"));

  m.def(
      "convert_fov",
      [](const F32& gray, const TranslationModel* model, int tile_size, double overlap, bool invert, int workers) {
        ConversionSettings s;
        s.preprocess.invert = invert;
        s.inference.tile_size = tile_size;
        s.inference.overlap = overlap;
        s.inference.workers = workers;
        const ModelHandle h = model ? model->handle()
                                    : identity_model(invert ? InputDomain::qobm_inverted : InputDomain::qobm_raw);
        const Image in = to_image(gray);
        Image out;
        {
          py::gil_scoped_release release;
          out = convert_fov(in, h, s);
        }
        return from_image(out);
      },
      py::arg("gray"), py::arg("model") = nullptr, py::arg("tile_size") = 512, py::arg("overlap") = 0.5,
      py::arg("invert") = true, py::arg("workers") = 1,
      "Whole field of view to virtual H&E; model=None uses the identity translator.");
}

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "shiftbench/cueint.hpp"
#include "shiftbench/depthcolor.hpp"
#include "shiftbench/error.hpp"
#include "shiftbench/harness.hpp"
#include "shiftbench/mkmmd.hpp"

namespace py = pybind11;
using namespace shiftbench;

namespace {

using F64 = py::array_t<double, py::array::c_style | py::array::forcecast>;
using U16 = py::array_t<std::uint16_t, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const F64& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-D array");
  const auto r = static_cast<std::size_t>(a.shape(0)), c = static_cast<std::size_t>(a.shape(1));
  return Tensor({r, c}, std::vector<double>(a.data(), a.data() + r * c));
}

py::array_t<double> to_array(const Tensor& t) {
  py::array_t<double> out({t.rows(), t.cols()});
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

depth::DepthImage to_depth(const U16& a) {
  if (a.ndim() != 2) throw ShapeError("depth image must be 2-D (height, width)");
  depth::DepthImage d(static_cast<std::size_t>(a.shape(1)), static_cast<std::size_t>(a.shape(0)));
  std::copy(a.data(), a.data() + a.size(), d.data.begin());
  return d;
}

py::array_t<std::uint8_t> to_rgb(const depth::ColorImage& c) {
  py::array_t<std::uint8_t> out({c.height, c.width, std::size_t{3}});
  std::copy(c.data.begin(), c.data.end(), out.mutable_data());
  return out;
}

py::dict dataset_dict(const Dataset& d) {
  py::dict out;
  out["x"] = to_array(d.x);
  out["y"] = d.y;
  out["ids"] = d.ids;
  out["instances"] = d.instances;
  out["distance_mm"] = d.distance_mm;
  out["null_fraction"] = d.null_fraction;
  return out;
}

py::list table_rows(const bench::ResultTable& t) {
  py::list rows;
  for (const auto& r : t.rows) rows.append(py::make_tuple(r.fingerprint, r.metric, r.value));
  return rows;
}

}  // namespace

PYBIND11_MODULE(_shiftbench, m) {
  m.doc() = "Domain-shift benchmark core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

  m.def(
      "colorize",
      [](const U16& depth_mm, const std::string& method, std::size_t window, std::size_t max_iter,
         double sigma_spatial, double sigma_range, double amount, double radius) {
        depth::SnPlusConfig cfg;
        cfg.window = window;
        cfg.max_iter = max_iter;
        cfg.sigma_spatial = sigma_spatial;
        cfg.sigma_range = sigma_range;
        cfg.amount = amount;
        cfg.radius = radius;
        return to_rgb(depth::colorize(to_depth(depth_mm), depth::parse_method(method), cfg));
      },
      py::arg("depth_mm"), py::arg("method") = "sn++", py::arg("window") = 5, py::arg("max_iter") = 100,
      py::arg("sigma_spatial") = 3.0, py::arg("sigma_range") = 0.05, py::arg("amount") = 1.5,
      py::arg("radius") = 1.0, "uint16 (h, w) depth in mm -> uint8 (h, w, 3) normal image");

  m.def(
      "synthetic_scene",
      [](std::size_t width, std::size_t height, std::uint64_t seed, double null_rate) {
        const auto d = depth::synthetic_scene(width, height, seed, null_rate);
        py::array_t<std::uint16_t> out({height, width});
        std::copy(d.data.begin(), d.data.end(), out.mutable_data());
        return out;
      },
      py::arg("width"), py::arg("height"), py::arg("seed"), py::arg("null_rate") = 0.02);

  m.def(
      "median_bank",
      [](const F64& source, const F64& target, std::vector<double> multipliers) {
        return mmd::median_heuristic_bank(to_tensor(source), to_tensor(target), multipliers).gammas;
      },
      py::arg("source"), py::arg("target"),
      py::arg("multipliers") = std::vector<double>(std::begin(mmd::kDefaultMultipliers),
                                                   std::end(mmd::kDefaultMultipliers)));

  m.def(
      "mmd_linear",
      [](const F64& source, const F64& target, std::vector<double> gammas, std::optional<std::vector<double>> betas) {
        auto bank = mmd::KernelBank::uniform(std::move(gammas));
        if (betas) bank.betas = *betas;
        bank.validate();
        return mmd::mmd_linear(bank, to_tensor(source), to_tensor(target)).value;
      },
      py::arg("source"), py::arg("target"), py::arg("gammas"), py::arg("betas") = py::none());

  m.def(
      "mmd_quadratic",
      [](const F64& source, const F64& target, std::vector<double> gammas, std::optional<std::vector<double>> betas) {
        auto bank = mmd::KernelBank::uniform(std::move(gammas));
        if (betas) bank.betas = *betas;
        bank.validate();
        return mmd::mmd_quadratic_oracle(bank, to_tensor(source), to_tensor(target));
      },
      py::arg("source"), py::arg("target"), py::arg("gammas"), py::arg("betas") = py::none());

  m.def(
      "beta_qp",
      [](std::vector<double> d, const F64& q, double eps) {
        const auto r = mmd::beta_qp(d, to_tensor(q), eps);
        py::dict out;
        out["beta"] = r.qp_beta;
        out["bank_beta"] = r.bank_beta;
        out["objective"] = r.objective;
        out["kkt"] = std::max({r.stationarity, r.complementarity, r.primal});
        out["fallback"] = r.fallback;
        return out;
      },
      py::arg("d"), py::arg("q"), py::arg("eps") = 1e-3);

  m.def(
      "synth",
      [](const std::string& generator, std::size_t n_source, std::size_t n_target, double noise,
         double rotation_deg, double shift, std::uint64_t seed) {
        bench::SynthParams p;
        p.kind = bench::parse_synth_kind(generator);
        p.n_source = n_source;
        p.n_target = n_target;
        p.noise = noise;
        p.rotation_deg = rotation_deg;
        p.shift = shift;
        const auto d = bench::synth_shift_dataset(p, seed);
        return py::make_tuple(dataset_dict(d.source), dataset_dict(d.target));
      },
      py::arg("generator") = "moons-rotate", py::arg("n_source") = 600, py::arg("n_target") = 600,
      py::arg("noise") = 0.1, py::arg("rotation_deg") = 30.0, py::arg("shift") = 2.0, py::arg("seed") = 7);

  m.def(
      "svm_fit_predict",
      [](const F64& x, std::vector<int> labels, std::size_t classes, const F64& x_test, double c,
         std::size_t epochs) {
        cue::SvmConfig cfg;
        cfg.c = c;
        cfg.epochs = epochs;
        const auto model = cue::svm_train(to_tensor(x), labels, classes, cfg);
        return cue::svm_predict(model, to_tensor(x_test)).labels;
      },
      py::arg("x"), py::arg("labels"), py::arg("classes"), py::arg("x_test"), py::arg("c") = 1.0,
      py::arg("epochs") = 50);

  m.def(
      "fingerprint", [](const std::filesystem::path& config) { return bench::fingerprint(bench::load_config(config)); },
      py::arg("config"));

  m.def(
      "run_experiment",
      [](const std::filesystem::path& config) {
        bench::ExperimentOutcome out;
        {
          py::gil_scoped_release release;
          out = bench::run_experiment(bench::load_config(config));
        }
        py::dict d;
        d["failed"] = out.failed;
        d["rows"] = table_rows(out.table);
        d["notes"] = out.notes;
        return d;
      },
      py::arg("config"), "Trains the baseline and the configured algorithm; returns result rows");

  m.def(
      "report",
      [](const std::vector<std::filesystem::path>& files) {
        std::vector<bench::ResultTable> tables;
        for (const auto& f : files) tables.push_back(bench::ResultTable::read_csv(f));
        return bench::report_table(bench::ResultTable::merge(tables));
      },
      py::arg("files"));
}

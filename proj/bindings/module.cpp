#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "optbench/errors.hpp"
#include "optbench/fitlaw.hpp"
#include "optbench/harness.hpp"
#include "optbench/linalg.hpp"
#include "optbench/optimizer_driver.hpp"
#include "optbench/matrix_optimizers.hpp"
#include "optbench/rng.hpp"
#include "optbench/schedule.hpp"
#include "optbench/sophia.hpp"
#include "optbench/tensor.hpp"

namespace py = pybind11;
using namespace optbench;

namespace {

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  std::vector<int64_t> shape(a.ndim());
  for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[static_cast<size_t>(i)] = a.shape(i);
  std::vector<double> data(a.data(), a.data() + a.size());
  return Tensor(std::move(shape), std::move(data));
}

py::array_t<double> array_from_tensor(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<double> out(shape);
  std::copy(t.data(), t.data() + t.size(), out.mutable_data());
  return out;
}

Schedule schedule_from_kwargs(double peak_lr, int64_t warmup, int64_t total_steps,
                              const std::string& decay_shape, double min_lr_ratio,
                              std::optional<double> wsd_decay) {
  Schedule sch;
  sch.peak_lr = peak_lr;
  sch.warmup_steps = warmup;
  sch.total_steps = total_steps;
  sch.decay_shape = decay_shape == "linear" ? DecayShape::kLinear : DecayShape::kCosine;
  sch.min_lr_ratio = min_lr_ratio;
  sch.wsd_decay_fraction = wsd_decay;
  sch.validate();
  return sch;
}

py::dict coeffs_to_dict(const FitCoeffs& f) {
  py::dict d;
  d["form"] = form_name(f.form);
  d["alpha"] = f.alpha;
  d["A"] = f.a_exp;
  d["beta"] = f.beta;
  d["B"] = f.b_exp;
  d["gamma"] = f.gamma;
  d["rms"] = f.rms;
  d["n_points"] = f.n_points;
  return d;
}

FitCoeffs coeffs_from_dict(const py::dict& d) {
  FitCoeffs f;
  f.form = form_from_name(d["form"].cast<std::string>());
  f.alpha = d["alpha"].cast<double>();
  if (d.contains("A")) f.a_exp = d["A"].cast<double>();
  f.beta = d["beta"].cast<double>();
  f.b_exp = d["B"].cast<double>();
  if (d.contains("gamma")) f.gamma = d["gamma"].cast<double>();
  return f;
}

py::dict run_trial_json(const std::string& config_json) {
  const ParsedConfig cfg = parse_config_text(config_json);
  if (cfg.trials.size() != 1) {
    throw ConfigError("run_trial expects a config with exactly one trial");
  }
  const RunResult res = run_trial(cfg.trials[0]);
  py::dict out;
  out["final_loss"] = res.final_loss;
  out["status"] = res.status();
  py::list curve;
  for (const auto& row : res.curve) {
    py::dict r;
    r["step"] = row.step;
    r["samples"] = row.samples;
    r["train_loss"] = row.train_loss;
    r["val_loss"] = row.val_loss;
    r["lr"] = row.lr;
    curve.append(std::move(r));
  }
  out["curve"] = std::move(curve);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "optbench core: dense kernels, eleven optimizers, sweeps and scaling-law fits";

  // Kernels.
  m.def("matmul", [](const py::array_t<double>& a, const py::array_t<double>& b) {
    return array_from_tensor(matmul(tensor_from_array(a), tensor_from_array(b)));
  });
  m.def("frobenius_norm",
        [](const py::array_t<double>& a) { return frobenius_norm(tensor_from_array(a)); });
  m.def("householder_qr", [](const py::array_t<double>& a) {
    const QrResult qr = householder_qr(tensor_from_array(a));
    return py::make_tuple(array_from_tensor(qr.q), array_from_tensor(qr.r));
  });
  m.def("svd_small",
        [](const py::array_t<double>& a) { return svd_small(tensor_from_array(a)); });
  m.def(
      "newton_schulz5",
      [](const py::array_t<double>& a, double ns_eps) {
        return array_from_tensor(newton_schulz5(tensor_from_array(a), ns_eps));
      },
      py::arg("m"), py::arg("ns_eps") = 1e-7);

  // Determinism.
  py::class_<RngStream>(m, "RngStream")
      .def(py::init([](uint64_t seed) { return seed_stream(seed); }), py::arg("seed"))
      .def_readonly("state", &RngStream::state)
      .def_readonly("stream_id", &RngStream::stream_id)
      .def("next_u64",
           [](RngStream& s) {
             auto [v, next] = next_u64(s);
             s = next;
             return v;
           })
      .def("rademacher",
           [](RngStream& s, const std::vector<int64_t>& shape) {
             return array_from_tensor(rademacher_like(s, shape));
           })
      .def("gaussian", [](RngStream& s, const std::vector<int64_t>& shape) {
        return array_from_tensor(gaussian_like(s, shape));
      });
  m.def("derive_stream", &derive_stream, py::arg("master_seed"), py::arg("trial_id"),
        py::arg("purpose"));

  // Schedules and clipping.
  m.def(
      "lr_at",
      [](int64_t step, double peak_lr, int64_t warmup, int64_t total_steps,
         const std::string& decay_shape, double min_lr_ratio, std::optional<double> wsd_decay) {
        return lr_at(
            schedule_from_kwargs(peak_lr, warmup, total_steps, decay_shape, min_lr_ratio,
                                 wsd_decay),
            step);
      },
      py::arg("step"), py::arg("peak_lr"), py::arg("warmup"), py::arg("total_steps"),
      py::arg("decay_shape") = "cosine", py::arg("min_lr_ratio") = 0.0,
      py::arg("wsd_decay") = std::nullopt);
  m.def(
      "clip_gradient",
      [](const py::array_t<double>& g, double max_norm) {
        return array_from_tensor(clip_gradient(tensor_from_array(g), ClipPolicy{max_norm}));
      },
      py::arg("g"), py::arg("max_norm"));

  // Scaling-law fitting.
  m.def(
      "fit_nlls",
      [](const std::string& form,
         const std::vector<std::tuple<std::optional<double>, double, double>>& points) {
        std::vector<FitPoint> pts;
        for (const auto& [n, d, y] : points) pts.push_back(FitPoint{n, d, y});
        return coeffs_to_dict(fit_nlls(form_from_name(form), pts));
      },
      py::arg("form"), py::arg("points"));
  m.def(
      "eval_form",
      [](const py::dict& coeffs, std::optional<double> n, double d) {
        return eval_form(coeffs_from_dict(coeffs), n, d);
      },
      py::arg("coeffs"), py::arg("n"), py::arg("d"));
  m.def(
      "solve_equivalent_data",
      [](const py::dict& coeffs, double target_loss) {
        return solve_equivalent_data(coeffs_from_dict(coeffs), target_loss);
      },
      py::arg("coeffs"), py::arg("target_loss"));
  m.def(
      "speedup_ratio",
      [](const py::dict& coeffs, double opt_loss, double d_opt) {
        return speedup_ratio(coeffs_from_dict(coeffs), opt_loss, d_opt);
      },
      py::arg("coeffs"), py::arg("opt_loss"), py::arg("d_opt"));

  // Harness.
  m.def("run_trial", &run_trial_json, py::arg("config_json"),
        "Run the single trial described by a JSON config string.");
  m.def("known_optimizers", [] { return known_optimizers(); });
}

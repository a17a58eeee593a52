/*
 * Copyright 2026 The dgplvm Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 */

// Python bindings: simulation, fitting, diagnostics and the kernel blocks.
// Matrices cross as NumPy arrays; draws come back one array per chain.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dgplvm/dataset_io.hpp"
#include "dgplvm/diagnostics.hpp"
#include "dgplvm/errors.hpp"
#include "dgplvm/harness.hpp"
#include "dgplvm/kernels.hpp"
#include "dgplvm/simgen.hpp"

namespace py = pybind11;
using namespace dgplvm;

namespace {

py::dict chain_to_dict(const ChainDraws& c) {
  py::dict d;
  d["draws"] = c.draws;
  d["names"] = c.param_names;
  d["divergences"] = c.divergences;
  d["step_size"] = c.step_size;
  d["tree_depths"] = c.tree_depths;
  d["seed"] = c.seed;
  return d;
}

py::dict summary_to_dict(const FitSummary& s) {
  return py::module_::import("json").attr("loads")(s.to_json().dump());
}

}  // namespace

PYBIND11_MODULE(_dgplvm, m) {
  m.doc() = "Latent-input GP models with derivative information";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);
  py::register_exception<NotPositiveDefinite>(m, "NotPositiveDefinite", PyExc_RuntimeError);
  py::register_exception<DegenerateData>(m, "DegenerateData", PyExc_RuntimeError);
  py::register_exception<InitializationError>(m, "InitializationError", PyExc_RuntimeError);

  py::enum_<KernelFamily>(m, "KernelFamily")
      .value("SE", KernelFamily::SquaredExponential)
      .value("MATERN32", KernelFamily::Matern32)
      .value("MATERN52", KernelFamily::Matern52);
  py::enum_<Block>(m, "Block")
      .value("K00", Block::K00)
      .value("K01", Block::K01)
      .value("K10", Block::K10)
      .value("K11", Block::K11);
  py::enum_<Scenario>(m, "Scenario").value("GP", Scenario::Gp).value("PERIODIC", Scenario::Periodic);
  py::enum_<GpParameterization>(m, "Parameterization")
      .value("WHITENED", GpParameterization::Whitened)
      .value("MARGINAL", GpParameterization::Marginal);

  py::class_<KernelSpec>(m, "KernelSpec")
      .def(py::init([](KernelFamily f, double rho, double alpha, double alpha_prime) {
             return KernelSpec{f, rho, alpha, alpha_prime};
           }),
           py::arg("family"), py::arg("rho"), py::arg("alpha"), py::arg("alpha_prime"))
      .def_readwrite("family", &KernelSpec::family)
      .def_readwrite("rho", &KernelSpec::rho)
      .def_readwrite("alpha", &KernelSpec::alpha)
      .def_readwrite("alpha_prime", &KernelSpec::alpha_prime);

  m.def("kernel_block", &kernel_block, py::arg("spec"), py::arg("xi"), py::arg("xj"),
        py::arg("block"));
  m.def(
      "joint_cov",
      [](const KernelSpec& spec, const Eigen::VectorXd& x, bool with_derivatives, double jitter) {
        return build_joint_cov(spec, x, with_derivatives, jitter).entries;
      },
      py::arg("spec"), py::arg("x"), py::arg("with_derivatives") = true,
      py::arg("jitter") = kDefaultJitter);

  py::class_<Dataset>(m, "Dataset")
      .def(py::init<>())
      .def_readwrite("x_obs", &Dataset::x_obs)
      .def_readwrite("y", &Dataset::y)
      .def_readwrite("y_prime", &Dataset::y_prime)
      .def_readwrite("x_true", &Dataset::x_true)
      .def_readwrite("dim_names", &Dataset::dim_names)
      .def_property_readonly("n_obs", &Dataset::n_obs)
      .def_property_readonly("n_dims", &Dataset::n_dims)
      .def("validate", &Dataset::validate);

  m.def(
      "simulate",
      [](Scenario scenario, int n_obs, int n_dims, KernelFamily family, double lambda_,
         double corr, double x_obs_sd, std::uint64_t seed) {
        ScenarioConfig c;
        c.scenario = scenario;
        c.n_obs = n_obs;
        c.n_dims = n_dims;
        c.family = family;
        c.lambda = lambda_;
        c.corr = corr;
        c.x_obs_sd = x_obs_sd;
        c.seed = seed;
        return simulate(c).data;
      },
      py::arg("scenario") = Scenario::Gp, py::arg("n_obs") = 20, py::arg("n_dims") = 5,
      py::arg("family") = KernelFamily::SquaredExponential, py::arg("lambda_") = 3.0,
      py::arg("corr") = 0.5, py::arg("x_obs_sd") = 0.3, py::arg("seed") = 1);

  m.def("read_dataset_csv", [](const std::filesystem::path& p) { return read_dataset_csv(p).data; });
  m.def(
      "write_dataset_csv",
      [](const std::filesystem::path& p, const Dataset& d, bool include_truth) {
        write_dataset_csv(p, d, include_truth);
      },
      py::arg("path"), py::arg("data"), py::arg("include_truth") = false);
  m.def("dataset_hash", &dataset_hash);
  m.def("all_variant_codes", &all_variant_codes);

  m.def(
      "fit",
      [](const Dataset& data, const std::string& variant, KernelFamily family,
         GpParameterization parameterization, int n_iterations, int n_warmup,
         double target_accept, int max_tree_depth, std::uint64_t seed, int chains,
         const std::optional<std::filesystem::path>& out_dir, double x_obs_sd) {
        ModelConfig config;
        config.set_variant_code(variant);
        config.family = family;
        config.parameterization = parameterization;
        config.priors.x_obs_sd = x_obs_sd;
        SamplerConfig s;
        s.n_iterations = n_iterations;
        s.n_warmup = n_warmup;
        s.target_accept = target_accept;
        s.max_tree_depth = max_tree_depth;
        s.seed = seed;
        FitResult r;
        {
          py::gil_scoped_release release;
          if (out_dir) {
            r = fit_single(config, data, s, *out_dir, chains);
          } else {
            const Dataset prepared = prepare_fit(data, config);
            r = fit_model(config, prepared, s, chains);
          }
        }
        py::dict d;
        py::list cl;
        for (const auto& c : r.chains) cl.append(chain_to_dict(c));
        d["chains"] = cl;
        d["summary"] = summary_to_dict(r.summary);
        d["runtime_seconds"] = r.runtime_seconds;
        return d;
      },
      py::arg("data"), py::arg("variant") = "1111",
      py::arg("family") = KernelFamily::SquaredExponential,
      py::arg("parameterization") = GpParameterization::Marginal,
      py::arg("n_iterations") = 3000, py::arg("n_warmup") = 1000,
      py::arg("target_accept") = 0.8, py::arg("max_tree_depth") = 10, py::arg("seed") = 1,
      py::arg("chains") = 1, py::arg("out_dir") = py::none(), py::arg("x_obs_sd") = 0.3);

  m.def("split_rhat", [](const ScalarDrawSet& d) { return split_rhat(d).value; });
  m.def("bulk_ess", [](const ScalarDrawSet& d) { return bulk_ess(d).value; });
  m.def("tail_ess", [](const ScalarDrawSet& d) { return tail_ess(d).value; });
  m.def(
      "rmse_latent",
      [](const Eigen::MatrixXd& draws, const Eigen::VectorXd& truth) {
        return rmse_latent(draws, truth).mean_rmse;
      },
      py::arg("draws"), py::arg("x_true"));
}

// Python bindings for the chaotic source separation library: source systems,
// the shallow-water tank, the ridge readout, the experiment pipeline, and
// the observability diagnostics. Heavy calls release the GIL.

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "css/attractors.hpp"
#include "css/common.hpp"
#include "css/highdim.hpp"
#include "css/lyapunov.hpp"
#include "css/observability.hpp"
#include "css/pipeline.hpp"
#include "css/readout.hpp"
#include "css/tank.hpp"
#include "css/trajectory.hpp"

namespace py = pybind11;
using namespace css;

namespace {

using release = py::call_guard<py::gil_scoped_release>;

/// Copies one nx*ny row-major flat field into a (nx, ny) array.
py::array_t<double> grid_out(const WaveField& f, const std::vector<double>& a) {
  py::array_t<double> out({f.nx, f.ny});
  std::copy(a.begin(), a.end(), out.mutable_data());
  return out;
}

void grid_in(const WaveField& f, std::vector<double>& a,
             const py::array_t<double, py::array::c_style |
                                           py::array::forcecast>& src) {
  if (src.ndim() != 2 || src.shape(0) != f.nx || src.shape(1) != f.ny)
    throw InvalidInputError("expected a (nx, ny) array");
  a.assign(src.data(), src.data() + static_cast<std::size_t>(f.nx) * f.ny);
}

py::array_t<bool> valid_out(const MseMatrix& m) {
  py::array_t<bool> out({6, 6});
  auto w = out.mutable_unchecked<2>();
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j)
      w(i, j) = m.valid[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "chaotic source separation by a simulated shallow-water tank";

  // --- Errors ---------------------------------------------------------
  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<InvalidInputError>(m, "InvalidInputError",
                                            base.ptr());
  py::register_exception<ConfigError>(m, "ConfigurationError", base.ptr());
  py::register_exception<NumericalBlowupError>(m, "NumericalBlowupError",
                                               base.ptr());
  py::register_exception<StabilityError>(m, "StabilityError", base.ptr());
  py::register_exception<DryCellError>(m, "DryCellError", base.ptr());
  py::register_exception<DegenerateChannelError>(m, "DegenerateChannelError",
                                                 base.ptr());
  py::register_exception<RankDeficiencyError>(m, "RankDeficiencyError",
                                              base.ptr());
  py::register_exception<PrecisionError>(m, "PrecisionError", base.ptr());

  m.def("derive_seed", &derive_seed, py::arg("master"), py::arg("label"),
        "labeled substream seed derived from a master seed");

  // --- Trajectories ----------------------------------------------------
  py::class_<Normalization>(m, "Normalization")
      .def(py::init<>())
      .def_readwrite("mean", &Normalization::mean)
      .def_readwrite("std", &Normalization::std);

  py::class_<Trajectory>(m, "Trajectory")
      .def(py::init<>())
      .def_readwrite("dt", &Trajectory::dt)
      .def_readwrite("channel_names", &Trajectory::channel_names)
      .def_readwrite("values", &Trajectory::values,
                     "channels x samples matrix")
      .def_readwrite("normalization", &Trajectory::normalization)
      .def_property_readonly("dims", &Trajectory::dims)
      .def_property_readonly("n_samples", &Trajectory::n_samples)
      .def_property_readonly("duration", &Trajectory::duration)
      .def("validate", &Trajectory::validate);

  m.def("normalize", &normalize, py::arg("raw"), release(),
        "zero-mean unit-variance copy, per channel");
  m.def("slice", &slice, py::arg("t"), py::arg("first"), py::arg("count"));
  m.def("write_csv", &write_csv, py::arg("t"), py::arg("path"), release());
  m.def("write_binary", &write_binary, py::arg("t"), py::arg("path"),
        release());
  m.def("read_binary_trajectory", &read_binary_trajectory, py::arg("path"),
        release());

  // --- Source systems --------------------------------------------------
  py::enum_<Attractor>(m, "Attractor")
      .value("sprott_n", Attractor::sprott_n)
      .value("rossler", Attractor::rossler)
      .value("halvorsen", Attractor::halvorsen)
      .value("lorenz", Attractor::lorenz)
      .value("sprott_b", Attractor::sprott_b)
      .value("thomas", Attractor::thomas);
  {
    py::list all;
    for (Attractor a : kAllAttractors) all.append(a);
    m.attr("ALL_ATTRACTORS") = py::tuple(all);
  }
  m.def("attractor_name",
        [](Attractor a) { return std::string(to_string(a)); });
  m.def("attractor_from_name",
        [](const std::string& s) { return attractor_from_string(s); });

  py::class_<AttractorSpec>(m, "AttractorSpec")
      .def_readonly("system", &AttractorSpec::system)
      .def_readonly("integration_dt", &AttractorSpec::integration_dt)
      .def_readonly("default_initial_state",
                    &AttractorSpec::default_initial_state)
      .def_readonly("default_transient", &AttractorSpec::default_transient);
  m.def("attractor_spec", &attractor_spec);

  m.def("eval_vector_field", &eval_vector_field, py::arg("system"),
        py::arg("x"));
  m.def("jacobian", &jacobian, py::arg("system"), py::arg("x"));
  m.def("advance", &advance, py::arg("system"), py::arg("x"), py::arg("dt"),
        py::arg("n_steps"), release());
  m.def("integrate_rk4", &integrate_rk4, py::arg("system"), py::arg("x0"),
        py::arg("dt"), py::arg("n_steps"), py::arg("subsample") = 1,
        release());

  py::class_<LyapunovConfig>(m, "LyapunovConfig")
      .def(py::init<>())
      .def_readwrite("total_time", &LyapunovConfig::total_time)
      .def_readwrite("qr_interval", &LyapunovConfig::qr_interval)
      .def_readwrite("transient", &LyapunovConfig::transient)
      .def_readwrite("dt", &LyapunovConfig::dt);
  py::class_<LyapunovResult>(m, "LyapunovResult")
      .def_readonly("exponents", &LyapunovResult::exponents)
      .def_readonly("kaplan_yorke_dimension",
                    &LyapunovResult::kaplan_yorke_dimension);
  m.def("kaplan_yorke", &kaplan_yorke, py::arg("exponents_descending"));
  m.def("lyapunov_spectrum", &lyapunov_spectrum, py::arg("system"),
        py::arg("config") = LyapunovConfig{}, release());

  // --- High-dimensional sources ----------------------------------------
  py::class_<KsConfig>(m, "KsConfig")
      .def(py::init<>())
      .def_readwrite("domain_length", &KsConfig::domain_length)
      .def_readwrite("n_points", &KsConfig::n_points)
      .def_readwrite("dt", &KsConfig::dt);
  m.def("ks_default_initial", &ks_default_initial);
  m.def("integrate_ks", &integrate_ks, py::arg("config"), py::arg("y0"),
        py::arg("n_steps"), py::arg("subsample") = 1, release());

  py::class_<Lorenz96Config>(m, "Lorenz96Config")
      .def(py::init<>())
      .def_readwrite("n", &Lorenz96Config::n)
      .def_readwrite("forcing", &Lorenz96Config::forcing)
      .def_readwrite("dt", &Lorenz96Config::dt);
  m.def("lorenz96_default_initial", &lorenz96_default_initial);
  m.def("integrate_lorenz96", &integrate_lorenz96, py::arg("config"),
        py::arg("x0"), py::arg("n_steps"), py::arg("subsample") = 1,
        release());

  // --- Tank -------------------------------------------------------------
  py::class_<TankConfig>(m, "TankConfig")
      .def(py::init<>())
      .def_readwrite("nx", &TankConfig::nx)
      .def_readwrite("ny", &TankConfig::ny)
      .def_readwrite("gravity", &TankConfig::gravity)
      .def_readwrite("drag", &TankConfig::drag)
      .def_readwrite("dt", &TankConfig::dt)
      .def_readwrite("n_probes", &TankConfig::n_probes)
      .def_readwrite("substeps_per_sample", &TankConfig::substeps_per_sample)
      .def_readwrite("cfl_rest_target", &TankConfig::cfl_rest_target)
      .def_readwrite("cfl_abort", &TankConfig::cfl_abort)
      .def_readwrite("filter_width_fraction",
                     &TankConfig::filter_width_fraction)
      .def_readwrite("dissipation_eps4", &TankConfig::dissipation_eps4)
      .def_property_readonly("resolved_substeps",
                             &TankConfig::resolved_substeps)
      .def("validate", &TankConfig::validate);

  py::class_<WaveField>(m, "WaveField")
      .def(py::init<>())
      .def_static("quiescent", &WaveField::quiescent, py::arg("nx"),
                  py::arg("ny"))
      .def_readwrite("nx", &WaveField::nx)
      .def_readwrite("ny", &WaveField::ny)
      .def_readwrite("t", &WaveField::t)
      .def_property(
          "h", [](const WaveField& f) { return grid_out(f, f.h); },
          [](WaveField& f, const py::array_t<double, py::array::c_style |
                                                         py::array::forcecast>&
                               a) { grid_in(f, f.h, a); },
          "depth as a (nx, ny) array")
      .def_property(
          "u", [](const WaveField& f) { return grid_out(f, f.u); },
          [](WaveField& f, const py::array_t<double, py::array::c_style |
                                                         py::array::forcecast>&
                               a) { grid_in(f, f.u, a); })
      .def_property(
          "v", [](const WaveField& f) { return grid_out(f, f.v); },
          [](WaveField& f, const py::array_t<double, py::array::c_style |
                                                         py::array::forcecast>&
                               a) { grid_in(f, f.v, a); })
      .def("validate", &WaveField::validate);

  py::class_<InputFilterSet>(m, "InputFilterSet")
      .def_readonly("d", &InputFilterSet::d)
      .def_readonly("nx", &InputFilterSet::nx)
      .def_readonly("ny", &InputFilterSet::ny)
      .def("filter",
           [](const InputFilterSet& fs, int k) {
             require(k >= 0 && k < fs.d, "filter index out of range");
             py::array_t<double> out({fs.nx, fs.ny});
             std::copy(fs.filter(k),
                       fs.filter(k) + static_cast<std::size_t>(fs.nx) * fs.ny,
                       out.mutable_data());
             return out;
           },
           py::arg("k"), "filter k as a (nx, ny) array")
      .def("cell_sum", &InputFilterSet::cell_sum, py::arg("k"));
  m.def("make_filters", &make_filters, py::arg("d"), py::arg("config"),
        py::arg("seed"), release());

  py::class_<ProbeSet>(m, "ProbeSet")
      .def_readonly("cells", &ProbeSet::cells)
      .def_readonly("id", &ProbeSet::id);
  m.def("make_probes", &make_probes, py::arg("config"), py::arg("seed"),
        release());

  py::class_<Tank>(m, "Tank")
      .def(py::init<const TankConfig&, const InputFilterSet&>(),
           py::arg("config"), py::arg("filters"), py::keep_alive<1, 3>())
      .def("reset", py::overload_cast<>(&Tank::reset))
      .def("reset", py::overload_cast<const WaveField&>(&Tank::reset),
           py::arg("state"))
      .def("step", &Tank::step, py::arg("amplitudes"), release())
      .def_property_readonly("config", &Tank::config)
      .def_property_readonly("steps_taken", &Tank::steps_taken)
      .def_property_readonly("time", &Tank::time)
      .def("field", &Tank::field)
      .def("probe_height", &Tank::probe_height, py::arg("cell"))
      .def("volume", &Tank::volume)
      .def("energy", &Tank::energy);

  m.def("tank_step",
        py::overload_cast<const WaveField&, const Eigen::VectorXd&,
                          const InputFilterSet&, const TankConfig&>(&step),
        py::arg("state"), py::arg("amplitudes"), py::arg("filters"),
        py::arg("config"), release(),
        "functional single step: copies state in and out");
  m.def(
      "drive_and_record",
      [](const WaveField& initial, const Trajectory& mixed,
         const InputFilterSet& filters, const ProbeSet& probes,
         const TankConfig& cfg, double t_dump) {
        return drive_and_record(initial, mixed, filters, probes, cfg, t_dump);
      },
      py::arg("initial"), py::arg("mixed"), py::arg("filters"),
      py::arg("probes"), py::arg("config"), py::arg("t_dump"), release(),
      "probe heights after each sample, first t_dump discarded");
  m.def("write_snapshot", &write_snapshot, py::arg("field"), py::arg("path"),
        release());
  m.def("read_snapshot", &read_snapshot, py::arg("path"), release());

  // --- Readout ----------------------------------------------------------
  m.def("feature_dim", &feature_dim, py::arg("n_probes"));
  m.def("lift_features",
        py::overload_cast<const Eigen::VectorXd&>(&lift_features),
        py::arg("q"));
  m.def("lift_features_block",
        py::overload_cast<const Eigen::MatrixXd&>(&lift_features),
        py::arg("probe_rows"), release());

  py::class_<ReadoutModel>(m, "ReadoutModel")
      .def(py::init<>())
      .def_readwrite("weights", &ReadoutModel::weights)
      .def_readwrite("alpha", &ReadoutModel::alpha)
      .def_readwrite("n_probes", &ReadoutModel::n_probes)
      .def_readwrite("target_names", &ReadoutModel::target_names)
      .def_property_readonly("n_targets", &ReadoutModel::n_targets)
      .def("validate", &ReadoutModel::validate)
      .def("predict",
           py::overload_cast<const Eigen::VectorXd&>(&ReadoutModel::predict,
                                                     py::const_),
           py::arg("q"))
      .def("predict_block",
           py::overload_cast<const Eigen::MatrixXd&>(&ReadoutModel::predict,
                                                     py::const_),
           py::arg("probe_rows"), release());

  py::class_<TrainAccumulator>(m, "TrainAccumulator")
      .def(py::init<int, int>(), py::arg("n_probes"), py::arg("n_targets"))
      .def("add", &TrainAccumulator::add, py::arg("q"), py::arg("y"))
      .def("add_block", &TrainAccumulator::add_block, py::arg("probe_rows"),
           py::arg("targets"), release())
      .def_property_readonly("n_samples", &TrainAccumulator::n_samples)
      .def_property_readonly("n_probes", &TrainAccumulator::n_probes)
      .def("solve", &TrainAccumulator::solve, py::arg("alpha"),
           py::arg("target_names") = std::vector<std::string>{}, release());

  m.def("mse", &mse, py::arg("prediction"), py::arg("truth"));
  m.def("mse_per_channel", &mse_per_channel, py::arg("prediction"),
        py::arg("truth"));
  m.def("write_readout", &write_readout, py::arg("model"), py::arg("path"),
        release());
  m.def("read_readout", &read_readout, py::arg("path"), release());

  // --- Pipeline -----------------------------------------------------------
  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init<>())
      .def_readwrite("source_a", &ExperimentConfig::source_a)
      .def_readwrite("source_b", &ExperimentConfig::source_b)
      .def_readwrite("t_dump", &ExperimentConfig::t_dump)
      .def_readwrite("t_train", &ExperimentConfig::t_train)
      .def_readwrite("t_test", &ExperimentConfig::t_test)
      .def_readwrite("tank", &ExperimentConfig::tank)
      .def_readwrite("alpha", &ExperimentConfig::alpha)
      .def_readwrite("noise_sigma", &ExperimentConfig::noise_sigma)
      .def_readwrite("master_seed", &ExperimentConfig::master_seed)
      .def("validate", &ExperimentConfig::validate);

  py::class_<RunProvenance>(m, "RunProvenance")
      .def_readonly("source_a", &RunProvenance::source_a)
      .def_readonly("source_b", &RunProvenance::source_b)
      .def_readonly("t_dump", &RunProvenance::t_dump)
      .def_readonly("t_train", &RunProvenance::t_train)
      .def_readonly("t_test", &RunProvenance::t_test)
      .def_readonly("alpha", &RunProvenance::alpha)
      .def_readonly("noise_sigma", &RunProvenance::noise_sigma)
      .def_readonly("tank", &RunProvenance::tank)
      .def_readonly("master_seed", &RunProvenance::master_seed)
      .def_readonly("filter_seed", &RunProvenance::filter_seed)
      .def_readonly("probe_seed", &RunProvenance::probe_seed)
      .def_readonly("noise_seed_a", &RunProvenance::noise_seed_a)
      .def_readonly("noise_seed_b", &RunProvenance::noise_seed_b)
      .def_readonly("probe_set_id", &RunProvenance::probe_set_id);

  py::class_<SeparationResult>(m, "SeparationResult")
      .def_readonly("estimated_a", &SeparationResult::estimated_a)
      .def_readonly("estimated_b", &SeparationResult::estimated_b)
      .def_readonly("true_a", &SeparationResult::true_a)
      .def_readonly("true_b", &SeparationResult::true_b)
      .def_readonly("mse_a", &SeparationResult::mse_a)
      .def_readonly("mse_b", &SeparationResult::mse_b)
      .def_readonly("provenance", &SeparationResult::provenance);

  py::class_<TankSnapshots>(m, "TankSnapshots")
      .def(py::init<>())
      .def_readonly("after_train", &TankSnapshots::after_train)
      .def_readonly("after_test", &TankSnapshots::after_test);

  m.def("mix", &mix, py::arg("a"), py::arg("b"), release());
  m.def("add_noise", &add_noise, py::arg("t"), py::arg("sigma"),
        py::arg("seed"), release());
  m.def(
      "run_separation",
      [](const ExperimentConfig& cfg) { return run_separation(cfg); },
      py::arg("config"), release());
  m.def(
      "run_separation_with_snapshots",
      [](const ExperimentConfig& cfg) {
        TankSnapshots snaps;
        SeparationResult r = run_separation(cfg, &snaps);
        return py::make_tuple(std::move(r), std::move(snaps));
      },
      py::arg("config"),
      "like run_separation, also returning the driven wave fields");

  py::class_<MseMatrix>(m, "MseMatrix")
      .def_readonly("labels", &MseMatrix::labels)
      .def_readonly("values", &MseMatrix::values)
      .def_property_readonly("valid", &valid_out,
                             "(6, 6) bool array of computed entries")
      .def_readonly("failures", &MseMatrix::failures);

  m.def("run_matrix", &run_matrix, py::arg("base"), py::arg("n_workers") = 1,
        release());

  py::class_<NoiseSweepEntry>(m, "NoiseSweepEntry")
      .def_readonly("sigma", &NoiseSweepEntry::sigma)
      .def_readonly("matrix", &NoiseSweepEntry::matrix);
  m.def("noise_sweep", &noise_sweep, py::arg("base"),
        py::arg("sigmas") = std::vector<double>{0.0, 0.01, 0.1, 1.0},
        py::arg("n_workers") = 1, release());

  py::class_<HighdimConfig>(m, "HighdimConfig")
      .def(py::init<>())
      .def_readwrite("ks", &HighdimConfig::ks)
      .def_readwrite("l96", &HighdimConfig::l96)
      .def_readwrite("t_dump", &HighdimConfig::t_dump)
      .def_readwrite("t_train", &HighdimConfig::t_train)
      .def_readwrite("t_test", &HighdimConfig::t_test)
      .def_readwrite("tank", &HighdimConfig::tank)
      .def_readwrite("alpha", &HighdimConfig::alpha)
      .def_readwrite("drive_gain", &HighdimConfig::drive_gain)
      .def_readwrite("master_seed", &HighdimConfig::master_seed)
      .def("validate", &HighdimConfig::validate);
  m.def(
      "run_highdim",
      [](const HighdimConfig& cfg) { return run_highdim(cfg); },
      py::arg("config"), release());

  m.def("mean_channel_correlation", &mean_channel_correlation, py::arg("a"),
        py::arg("b"));
  m.def("offdiagonal_row_means", &offdiagonal_row_means, py::arg("matrix"));
  m.def("write_mse_csv", &write_mse_csv, py::arg("matrix"), py::arg("path"),
        release());
  m.def("export_separation", &export_separation, py::arg("result"),
        py::arg("dir"), release());

  // --- Observability ------------------------------------------------------
  py::class_<StackOptions>(m, "StackOptions")
      .def(py::init<>())
      .def_readwrite("step", &StackOptions::step)
      .def_readwrite("substeps", &StackOptions::substeps);

  m.def("make_combined", &make_combined, py::arg("sa"), py::arg("sb"));
  m.def("swap_halves", &swap_halves, py::arg("x"));
  m.def("combined_field", &combined_field, py::arg("system_a"),
        py::arg("system_b"), py::arg("x"));
  m.def("fd_weights", &fd_weights, py::arg("m"), py::arg("offsets"));

  py::class_<ObservabilityStack>(m, "ObservabilityStack")
      .def_readonly("k_max", &ObservabilityStack::k_max)
      .def_readonly("g", &ObservabilityStack::g)
      .def_readonly("error_estimate", &ObservabilityStack::error_estimate)
      .def_readonly("coarse_step", &ObservabilityStack::coarse_step)
      .def_readonly("fine_step", &ObservabilityStack::fine_step)
      .def("norm", &ObservabilityStack::norm);
  m.def("derivative_stack", &derivative_stack, py::arg("system_a"),
        py::arg("system_b"), py::arg("x"), py::arg("k_max"),
        py::arg("options") = StackOptions{}, release());

  py::class_<SwapOrderResidual>(m, "SwapOrderResidual")
      .def_readonly("k", &SwapOrderResidual::k)
      .def_readonly("residual", &SwapOrderResidual::residual)
      .def_readonly("scale", &SwapOrderResidual::scale)
      .def_readonly("ratio", &SwapOrderResidual::ratio);
  py::class_<SwapSymmetryReport>(m, "SwapSymmetryReport")
      .def_readonly("k_max", &SwapSymmetryReport::k_max)
      .def_readonly("stack_norm", &SwapSymmetryReport::stack_norm)
      .def_readonly("residual_norm", &SwapSymmetryReport::residual_norm)
      .def_readonly("ratio", &SwapSymmetryReport::ratio)
      .def_readonly("per_order", &SwapSymmetryReport::per_order);
  m.def("swap_symmetry_check",
        py::overload_cast<Attractor, Attractor, const CombinedState&, int,
                          const StackOptions&>(&swap_symmetry_check),
        py::arg("system_a"), py::arg("system_b"), py::arg("x"),
        py::arg("k_max"), py::arg("options") = StackOptions{}, release());

  m.def("collision_ratio", &collision_ratio, py::arg("system_a"),
        py::arg("system_b"), py::arg("x"), py::arg("xp"), py::arg("k_max"),
        py::arg("options") = StackOptions{}, release());

  py::class_<UnivalencePair>(m, "UnivalencePair")
      .def_readonly("separation", &UnivalencePair::separation)
      .def_readonly("stack_distance", &UnivalencePair::stack_distance)
      .def_readonly("ratio", &UnivalencePair::ratio)
      .def_readonly("swapped", &UnivalencePair::swapped);
  py::class_<UnivalenceStats>(m, "UnivalenceStats")
      .def_readonly("n_requested", &UnivalenceStats::n_requested)
      .def_readonly("n_evaluated", &UnivalenceStats::n_evaluated)
      .def_readonly("n_degenerate", &UnivalenceStats::n_degenerate)
      .def_readonly("threshold", &UnivalenceStats::threshold)
      .def_readonly("n_near_collisions", &UnivalenceStats::n_near_collisions)
      .def_readonly("near_collision_fraction",
                    &UnivalenceStats::near_collision_fraction)
      .def_readonly("min_ratio", &UnivalenceStats::min_ratio)
      .def_readonly("pairs", &UnivalenceStats::pairs);
  m.def("univalence_probe", &univalence_probe, py::arg("system_a"),
        py::arg("system_b"), py::arg("n_samples"), py::arg("k_max"),
        py::arg("seed"), py::arg("threshold") = 1e-4,
        py::arg("options") = StackOptions{}, release());
  m.def("sample_attractor_states", &sample_attractor_states, py::arg("system"),
        py::arg("n"), py::arg("seed"), py::arg("extra_transient") = 0.0,
        release());
}

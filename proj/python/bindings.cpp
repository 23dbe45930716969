#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "sdec/attention_sim.hpp"
#include "sdec/bounds.hpp"
#include "sdec/decontextualizer.hpp"
#include "sdec/errors.hpp"
#include "sdec/intersection.hpp"
#include "sdec/npy.hpp"
#include "sdec/spectral.hpp"

namespace py = pybind11;
using namespace py::literals;

namespace {

using sdec::Index;
using sdec::MatrixXd;
using sdec::VectorXd;

sdec::RowRange to_range(const std::pair<Index, Index>& r) {
  return sdec::RowRange{r.first, r.second};
}

sdec::AttentionWeights make_weights(const MatrixXd& wq, const MatrixXd& wk,
                                    const MatrixXd& wv,
                                    std::optional<double> key_dim) {
  return sdec::AttentionWeights{wq, wk, wv,
                                key_dim.value_or(static_cast<double>(wv.rows()))};
}

py::dict quantiles(const sdec::Quantiles& q) {
  return py::dict("min"_a = q.min, "median"_a = q.median, "max"_a = q.max,
                  "count"_a = q.count);
}

py::dict profile_dict(const sdec::ExcursionProfile& p) {
  return py::dict("lambda_o"_a = p.lambda_o, "lambda_star"_a = p.lambda_star,
                  "lambda_delta"_a = p.lambda_delta,
                  "lambda_omega"_a = p.lambda_omega, "loss_trace"_a = p.loss_trace,
                  "scene_distance"_a = p.scene_distance,
                  "id_distance"_a = p.id_distance,
                  "step_halvings"_a = p.step_halvings);
}

}  // namespace

PYBIND11_MODULE(_sdec, m) {
  m.doc() = "Scene de-contextualization of prompt embeddings";

  static py::exception<sdec::Error> error_type(m, "SdecError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const sdec::Error& e) {
      PyErr_SetString(error_type.ptr(), e.what());
    }
  });

  py::class_<sdec::OptimizerConfig>(m, "OptimizerConfig")
      .def(py::init<>())
      .def_readwrite("beta", &sdec::OptimizerConfig::beta)
      .def_readwrite("m_switch", &sdec::OptimizerConfig::m_switch)
      .def_readwrite("total_iters", &sdec::OptimizerConfig::total_iters)
      .def_readwrite("omega", &sdec::OptimizerConfig::omega)
      .def_readwrite("step_size", &sdec::OptimizerConfig::step_size)
      .def_readwrite("clamp_nonnegative", &sdec::OptimizerConfig::clamp_nonnegative)
      .def_readwrite("invert_weighting", &sdec::OptimizerConfig::invert_weighting)
      .def_readwrite("degenerate_eps", &sdec::OptimizerConfig::degenerate_eps);

  // spectral
  m.def("svd_decompose", [](const MatrixXd& a) {
    sdec::SvdFactors f = sdec::svd_decompose(a);
    return py::make_tuple(f.U, f.S, f.V);
  }, "a"_a, "Thin SVD (U, S, V) with A = U diag(S) V^T.");
  m.def("orth", &sdec::orth, "a"_a, "rank_tol"_a = sdec::kDefaultRankTolerance);
  m.def("projector_from_basis", [](const MatrixXd& b) {
    return sdec::projector_from_basis(b).matrix();
  }, "basis"_a);
  m.def("spectral_norm", &sdec::spectral_norm, "a"_a);
  m.def("principal_angle_cosines", &sdec::principal_angle_cosines, "b1"_a, "b2"_a);

  // attention_sim
  m.def("build_subspaces",
        [](Index d, Index k_id, Index k_sc, Index k_cap, std::uint64_t seed) {
          const sdec::SubspaceBases b =
              sdec::build_subspaces(sdec::SubspaceSpec{d, k_id, k_sc, k_cap, seed});
          return py::make_tuple(b.id, b.scene, b.shared);
        },
        "d"_a, "k_id"_a, "k_sc"_a, "k_cap"_a, "seed"_a = 0);
  m.def("sample_embedding", [](const MatrixXd& basis, Index n, std::uint64_t seed) {
    return sdec::sample_embedding(basis, n, seed).values();
  }, "basis"_a, "n"_a, "seed"_a = 0);
  m.def("attention_forward",
        [](const MatrixXd& z, const MatrixXd& wq, const MatrixXd& wk,
           const MatrixXd& wv, Index q_row, std::optional<double> key_dim) {
          const auto r = sdec::attention_forward(sdec::EmbeddingMatrix(z),
                                                 make_weights(wq, wk, wv, key_dim),
                                                 q_row);
          return py::make_tuple(r.alpha, r.output);
        },
        "z"_a, "w_q"_a, "w_k"_a, "w_v"_a, "q_row"_a, "key_dim"_a = py::none());
  m.def("split_contextualization",
        [](const MatrixXd& z, const MatrixXd& wq, const MatrixXd& wk,
           const MatrixXd& wv, Index q_row, std::pair<Index, Index> id_slice,
           std::pair<Index, Index> sc_slice, const MatrixXd& pi_id,
           bool mask_scene, std::optional<double> key_dim) {
          const auto r = sdec::split_contextualization(
              sdec::EmbeddingMatrix(z), make_weights(wq, wk, wv, key_dim), q_row,
              to_range(id_slice), to_range(sc_slice),
              sdec::Projector::from_matrix(pi_id), mask_scene);
          return py::dict("alpha"_a = r.attention.alpha, "output"_a = r.output,
                          "projected_output"_a = r.projected_output,
                          "t_id"_a = r.t_id, "t_sc"_a = r.t_sc,
                          "t_sc_norm"_a = r.t_sc_norm);
        },
        "z"_a, "w_q"_a, "w_k"_a, "w_v"_a, "q_row"_a, "id_slice"_a, "sc_slice"_a,
        "pi_id"_a, "mask_scene"_a = false, "key_dim"_a = py::none());
  m.def("make_degenerate_wv",
        [](const MatrixXd& b_id, const MatrixXd& b_sc, std::uint64_t seed) {
          const auto w = sdec::make_degenerate_wv(b_id, b_sc, seed);
          return py::make_tuple(w.query, w.key, w.value);
        },
        "b_id"_a, "b_sc"_a, "seed"_a = 0);

  // bounds
  m.def("compute_bound",
        [](const MatrixXd& z_sc, const VectorXd& alpha_sc, const MatrixXd& w_v,
           const MatrixXd& pi_id, const MatrixXd& pi_sc, const MatrixXd& p_cap) {
          const auto b = sdec::compute_bound(
              z_sc, alpha_sc, w_v, sdec::Projector::from_matrix(pi_id),
              sdec::Projector::from_matrix(pi_sc),
              sdec::Projector::from_matrix(p_cap));
          return py::dict("epsilon"_a = b.epsilon, "r_cap_norm"_a = b.r_cap_norm,
                          "r_perp_norm"_a = b.r_perp_norm, "t_cap_fro"_a = b.t_cap_fro,
                          "t_perp_fro"_a = b.t_perp_fro, "sigma_cap"_a = b.sigma_cap,
                          "sigma_perp"_a = b.sigma_perp, "bound"_a = b.bound,
                          "bound_sigma"_a = b.bound_sigma, "measured"_a = b.measured);
        },
        "z_sc"_a, "alpha_sc"_a, "w_v"_a, "pi_id"_a, "pi_sc"_a, "p_cap"_a);
  m.def("monte_carlo_bound_sweep",
        [](Index d, Index k_id, Index k_sc, Index k_cap, Index n_id, Index n_sc,
           Index trials, std::uint64_t seed) {
          sdec::BoundSweepConfig c;
          c.spec = sdec::SubspaceSpec{d, k_id, k_sc, k_cap, 0};
          c.n_id = n_id;
          c.n_sc = n_sc;
          c.trials = trials;
          c.seed = seed;
          const auto s = sdec::monte_carlo_bound_sweep(c);
          return py::dict("trials"_a = s.trials, "instances"_a = s.instances,
                          "violations"_a = s.violations,
                          "tightness"_a = quantiles(s.tightness),
                          "max_sigma_bound_gap"_a = s.max_sigma_bound_gap);
        },
        "d"_a, "k_id"_a, "k_sc"_a, "k_cap"_a, "n_id"_a = 16, "n_sc"_a = 16,
        "trials"_a = 1000, "seed"_a = 0);

  // decontextualizer
  m.def("two_phase_optimize",
        [](const MatrixXd& z_id, const MatrixXd& z_sc,
           const sdec::OptimizerConfig& cfg) {
          const auto r = sdec::two_phase_optimize(sdec::EmbeddingMatrix(z_id),
                                                  sdec::EmbeddingMatrix(z_sc), cfg);
          return py::dict("lambda_star"_a = r.lambda_star,
                          "loss_trace"_a = r.loss_trace,
                          "scene_distance"_a = r.scene_distance,
                          "id_distance"_a = r.id_distance,
                          "step_halvings"_a = r.step_halvings);
        },
        "z_id"_a, "z_sc"_a, "config"_a = sdec::OptimizerConfig{});
  m.def("excursion", &sdec::excursion, "lambda_o"_a, "lambda_star"_a);
  m.def("reweight", &sdec::reweight, "lambda_delta"_a, "omega"_a = 1.0,
        "invert"_a = false, "degenerate_eps"_a = 1e-12);
  m.def("refine",
        [](const MatrixXd& z_id, const MatrixXd& z_sc,
           const sdec::OptimizerConfig& cfg) {
          const auto r = sdec::refine(sdec::EmbeddingMatrix(z_id),
                                      sdec::EmbeddingMatrix(z_sc), cfg);
          return py::make_tuple(r.z_id_star.values(), profile_dict(r.profile));
        },
        "z_id"_a, "z_sc"_a, "config"_a = sdec::OptimizerConfig{});
  m.def("pca_suppress",
        [](const MatrixXd& z, const std::string& criterion,
           std::optional<VectorXd> lambda_omega, double threshold) {
          sdec::ExcursionProfile profile;
          const bool omega = criterion == "omega";
          if (!omega && criterion != "original") {
            throw sdec::Error(sdec::ErrorCode::kInvalidArgument,
                              "criterion must be 'original' or 'omega'");
          }
          if (lambda_omega) profile.lambda_omega = *lambda_omega;
          return sdec::pca_suppress(
                     sdec::EmbeddingMatrix(z),
                     omega ? sdec::SuppressionCriterion::kOmega
                           : sdec::SuppressionCriterion::kOriginal,
                     lambda_omega ? &profile : nullptr, threshold)
              .values();
        },
        "z"_a, "criterion"_a = "original", "lambda_omega"_a = py::none(),
        "energy_threshold"_a = 1.0);

  // intersection
  m.def("estimate_intersection",
        [](const MatrixXd& z_id, const MatrixXd& z_sc, double tau) {
          sdec::IntersectionOptions opts;
          opts.tau = tau;
          const auto e = sdec::estimate_intersection(sdec::EmbeddingMatrix(z_id),
                                                     sdec::EmbeddingMatrix(z_sc), opts);
          return py::dict("cosines"_a = e.cosines, "selected"_a = e.selected,
                          "basis_cap"_a = e.basis_cap, "p_cap"_a = e.p_cap.matrix(),
                          "rank"_a = e.p_cap.rank());
        },
        "z_id"_a, "z_sc"_a, "tau"_a = 0.98);
  m.def("hard_suppress", [](const MatrixXd& z_id, const MatrixXd& p_cap) {
    return sdec::hard_suppress(sdec::EmbeddingMatrix(z_id),
                               sdec::Projector::from_matrix(p_cap))
        .values();
  }, "z_id"_a, "p_cap"_a);

  // npy
  m.def("load_array", &sdec::npy::load_array, "path"_a);
  m.def("save_array", &sdec::npy::save_array, "path"_a, "matrix"_a);
}

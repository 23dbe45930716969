#include "sdec/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "sdec/errors.hpp"
#include "sdec/io_schema.hpp"
#include "sdec/npy.hpp"

namespace sdec::cli {
namespace {

namespace fs = std::filesystem;
using io::json;

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double lap_ms() {
    const auto now = std::chrono::steady_clock::now();
    const double ms =
        std::chrono::duration<double, std::milli>(now - start_).count();
    start_ = now;
    return ms;
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// SDEC_LOG=1|info|debug turns on progress lines on stderr.
bool logging_enabled() {
  const char* v = std::getenv("SDEC_LOG");
  return v != nullptr && *v != '\0' && std::string(v) != "0";
}

struct Context {
  std::ostream& out;
  std::ostream& err;

  void log(const std::string& msg) const {
    if (logging_enabled()) err << "[sdec] " << msg << '\n';
  }
};

EmbeddingMatrix load_embedding(const fs::path& path) {
  return EmbeddingMatrix(npy::load_array(path));
}

void finish_report(io::RunReport& report, const fs::path& path) {
  io::write_json_file(path, io::to_json(report));
}

// ---------------------------------------------------------------- refine --

struct RefineArgs {
  std::string embeddings, partition, config, scene, out, report;
};

int cmd_refine(const Context& ctx, const RefineArgs& a) {
  Stopwatch clock;
  io::RunReport report;
  report.command = "refine";

  const EmbeddingMatrix z = load_embedding(a.embeddings);
  io::PromptPartition part = io::partition_from_json(io::read_json_file(a.partition));
  if (part.total_rows != z.rows()) {
    throw Error(ErrorCode::kInvalidArgument,
                "partition total_rows " + std::to_string(part.total_rows) +
                    " differs from embedding rows " + std::to_string(z.rows()));
  }
  part.validate(/*allow_empty_scene=*/!a.scene.empty());
  const OptimizerConfig cfg =
      a.config.empty() ? OptimizerConfig{}
                       : io::config_from_json(io::read_json_file(a.config));
  const EmbeddingMatrix z_id = z.row_block(part.id_rows.begin, part.id_rows.end);
  const EmbeddingMatrix z_sc =
      a.scene.empty() ? z.row_block(part.sc_rows.begin, part.sc_rows.end)
                      : load_embedding(a.scene);
  report.timings_ms["load"] = clock.lap_ms();
  ctx.log("refine: identity " + std::to_string(z_id.rows()) + "x" +
          std::to_string(z_id.cols()) + ", scene " + std::to_string(z_sc.rows()) +
          " rows");

  const RefineResult refined = refine(z_id, z_sc, cfg);
  report.timings_ms["refine"] = clock.lap_ms();

  MatrixXd edited = z.values();
  edited.middleRows(part.id_rows.begin, part.id_rows.size()) =
      refined.z_id_star.values();
  npy::save_array(a.out, edited);
  report.timings_ms["save"] = clock.lap_ms();

  report.config = io::to_json(cfg);
  report.inputs["embeddings"] = io::digest_of(a.embeddings);
  report.inputs["partition"] = io::digest_of(a.partition);
  if (!a.config.empty()) report.inputs["config"] = io::digest_of(a.config);
  if (!a.scene.empty()) report.inputs["scene"] = io::digest_of(a.scene);
  report.outputs["embeddings"] = io::digest_of(a.out);
  report.result = {{"partition", io::to_json(part)},
                   {"profile", io::to_json(refined.profile)}};
  finish_report(report, a.report);
  ctx.out << "refined " << z_id.rows() << " identity rows -> " << a.out << '\n';
  return kExitOk;
}

// ------------------------------------------------------------- intersect --

struct IntersectArgs {
  std::string id, scene, out, report;
  double tau = 0.98;
  Index id_rank = 0;
  Index scene_rank = 0;
};

int cmd_intersect(const Context& ctx, const IntersectArgs& a) {
  Stopwatch clock;
  io::RunReport report;
  report.command = "intersect";

  const EmbeddingMatrix z_id = load_embedding(a.id);
  const EmbeddingMatrix z_sc = load_embedding(a.scene);
  report.timings_ms["load"] = clock.lap_ms();

  IntersectionOptions opts;
  opts.tau = a.tau;
  if (a.id_rank > 0) opts.id_rank = a.id_rank;
  if (a.scene_rank > 0) opts.scene_rank = a.scene_rank;
  const IntersectionEstimate est = estimate_intersection(z_id, z_sc, opts);
  const EmbeddingMatrix suppressed = hard_suppress(z_id, est.p_cap);
  report.timings_ms["estimate"] = clock.lap_ms();
  ctx.log("intersect: " + std::to_string(est.selected.size()) +
          " directions selected");

  if (!a.out.empty()) {
    npy::save_array(a.out, suppressed.values());
    report.outputs["suppressed"] = io::digest_of(a.out);
  }
  report.config = {{"tau", a.tau},
                   {"id_rank", opts.id_rank ? json(*opts.id_rank) : json(nullptr)},
                   {"scene_rank",
                    opts.scene_rank ? json(*opts.scene_rank) : json(nullptr)}};
  report.inputs["id"] = io::digest_of(a.id);
  report.inputs["scene"] = io::digest_of(a.scene);
  report.result = {
      {"cosines", std::vector<double>(est.cosines.data(),
                                      est.cosines.data() + est.cosines.size())},
      {"selected", est.selected},
      {"rank", est.p_cap.rank()},
      {"tau", est.tau}};
  finish_report(report, a.report);
  ctx.out << "intersection rank " << est.p_cap.rank() << '\n';
  return kExitOk;
}

// ----------------------------------------------------------------- bound --

struct BoundArgs {
  std::string spec_json, report;
  Index trials = 1000;
  std::uint64_t seed = 0;
};

BoundSweepConfig sweep_config_from_json(const json& j) {
  static const std::set<std::string> known = {"schema_version", "d",    "k_id", "k_sc",
                                              "k_cap",          "n_id", "n_sc"};
  if (!j.is_object()) {
    throw Error(ErrorCode::kInvalidArgument, "spec must be a JSON object");
  }
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) {
      throw Error(ErrorCode::kInvalidArgument, "unknown spec key '" + key + "'");
    }
  }
  try {
    BoundSweepConfig c;
    c.spec.d = j.at("d").get<Index>();
    c.spec.k_id = j.at("k_id").get<Index>();
    c.spec.k_sc = j.at("k_sc").get<Index>();
    c.spec.k_cap = j.value("k_cap", Index{0});
    c.n_id = j.value("n_id", c.n_id);
    c.n_sc = j.value("n_sc", c.n_sc);
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("spec: ") + e.what());
  }
}

int cmd_bound(const Context& ctx, const BoundArgs& a) {
  Stopwatch clock;
  io::RunReport report;
  report.command = "bound";

  BoundSweepConfig cfg = sweep_config_from_json(io::read_json_file(a.spec_json));
  cfg.trials = a.trials;
  cfg.seed = a.seed;
  cfg.validate();
  report.timings_ms["load"] = clock.lap_ms();

  const BoundSweepSummary summary = monte_carlo_bound_sweep(cfg);
  report.timings_ms["sweep"] = clock.lap_ms();
  ctx.log("bound: " + std::to_string(summary.instances) + " instances");

  report.seed = a.seed;
  report.config = io::to_json(cfg.spec);
  report.config["n_id"] = cfg.n_id;
  report.config["n_sc"] = cfg.n_sc;
  report.config["trials"] = cfg.trials;
  report.inputs["spec"] = io::digest_of(a.spec_json);
  report.result = io::to_json(summary);
  finish_report(report, a.report);
  ctx.out << "violations " << summary.violations << " / " << summary.instances << '\n';
  return kExitOk;
}

// -------------------------------------------------------------- simulate --

struct SimulateArgs {
  SubspaceSpec spec;
  Index n_id = 16, n_sc = 16, trials = 1000;
  std::uint64_t seed = 0;
  std::string report;
};

int cmd_simulate(const Context& ctx, const SimulateArgs& a) {
  Stopwatch clock;
  io::RunReport report;
  report.command = "simulate";

  ContextualizationSweepConfig cfg;
  cfg.spec = a.spec;
  cfg.n_id = a.n_id;
  cfg.n_sc = a.n_sc;
  cfg.trials = a.trials;
  cfg.seed = a.seed;
  cfg.validate();

  const ContextualizationSweepSummary summary = run_contextualization_sweep(cfg);
  report.timings_ms["simulate"] = clock.lap_ms();
  ctx.log("simulate: " + std::to_string(summary.instances) + " instances");

  report.seed = a.seed;
  report.config = io::to_json(cfg.spec);
  report.config["n_id"] = cfg.n_id;
  report.config["n_sc"] = cfg.n_sc;
  report.config["trials"] = cfg.trials;
  report.result = io::to_json(summary);
  finish_report(report, a.report);
  ctx.out << "nonzero T_sc in " << summary.nonzero_instances << " / "
          << summary.instances << " instances\n";
  return kExitOk;
}

// ------------------------------------------------------------- excursion --

struct ExcursionArgs {
  std::string id, scene, config, report;
};

int cmd_excursion(const Context& ctx, const ExcursionArgs& a) {
  Stopwatch clock;
  io::RunReport report;
  report.command = "excursion";

  const EmbeddingMatrix z_id = load_embedding(a.id);
  const EmbeddingMatrix z_sc = load_embedding(a.scene);
  const OptimizerConfig cfg =
      a.config.empty() ? OptimizerConfig{}
                       : io::config_from_json(io::read_json_file(a.config));
  report.timings_ms["load"] = clock.lap_ms();

  const RefineResult refined = refine(z_id, z_sc, cfg);
  report.timings_ms["optimize"] = clock.lap_ms();
  ctx.log("excursion: " + std::to_string(refined.profile.lambda_o.size()) +
          " directions");

  report.config = io::to_json(cfg);
  report.inputs["id"] = io::digest_of(a.id);
  report.inputs["scene"] = io::digest_of(a.scene);
  if (!a.config.empty()) report.inputs["config"] = io::digest_of(a.config);
  report.result = {{"profile", io::to_json(refined.profile)}};
  finish_report(report, a.report);
  return kExitOk;
}

// ------------------------------------------------------------- pca-sweep --

struct PcaSweepArgs {
  std::string id, criterion = "original", profile, out_dir;
  int steps = 10;
};

int cmd_pca_sweep(const Context& ctx, const PcaSweepArgs& a) {
  Stopwatch clock;
  io::RunReport report;
  report.command = "pca-sweep";

  if (a.steps < 1) {
    throw Error(ErrorCode::kInvalidArgument, "--steps must be >= 1");
  }
  const EmbeddingMatrix z = load_embedding(a.id);
  const SuppressionCriterion criterion = a.criterion == "omega"
                                             ? SuppressionCriterion::kOmega
                                             : SuppressionCriterion::kOriginal;
  std::optional<ExcursionProfile> profile;
  if (!a.profile.empty()) {
    const json doc = io::read_json_file(a.profile);
    // Accept a bare profile or a report from `excursion` / `refine`.
    const json& pj = doc.contains("result") ? doc.at("result").at("profile") : doc;
    profile = io::profile_from_json(pj);
    report.inputs["profile"] = io::digest_of(a.profile);
  }
  report.inputs["id"] = io::digest_of(a.id);
  fs::create_directories(a.out_dir);
  report.timings_ms["load"] = clock.lap_ms();

  json steps = json::array();
  for (int k = 1; k <= a.steps; ++k) {
    const double threshold = static_cast<double>(k) / a.steps;
    const EmbeddingMatrix kept = pca_suppress(
        z, criterion, profile ? &*profile : nullptr, threshold);
    std::ostringstream name;
    name << "pca_" << a.criterion << "_step" << std::setw(2) << std::setfill('0')
         << k << ".npy";
    const fs::path path = fs::path(a.out_dir) / name.str();
    npy::save_array(path, kept.values());
    report.outputs[name.str()] = io::digest_of(path);
    steps.push_back({{"step", k}, {"threshold", threshold}, {"file", name.str()}});
  }
  report.timings_ms["sweep"] = clock.lap_ms();
  ctx.log("pca-sweep: wrote " + std::to_string(a.steps) + " files");

  report.config = {{"criterion", a.criterion}, {"steps", a.steps}};
  report.result = {{"steps", steps}};
  finish_report(report, fs::path(a.out_dir) / "report.json");
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  const Context ctx{out, err};
  CLI::App app{"Scene de-contextualization toolkit for prompt embeddings", "sdec"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(io::kToolVersion));

  std::function<int()> action;

  RefineArgs refine_args;
  auto* refine_cmd = app.add_subcommand(
      "refine", "Refine the identity rows of a prompt embedding");
  refine_cmd->add_option("--embeddings", refine_args.embeddings, "NPY prompt embedding")
      ->required();
  refine_cmd->add_option("--partition", refine_args.partition, "Partition JSON")
      ->required();
  refine_cmd->add_option("--config", refine_args.config, "Optimizer config JSON");
  refine_cmd->add_option("--scene", refine_args.scene,
                         "NPY scene embedding overriding the partition's scene rows");
  refine_cmd->add_option("--out", refine_args.out, "Output NPY")->required();
  refine_cmd->add_option("--report", refine_args.report, "Report JSON")->required();
  refine_cmd->callback([&] { action = [&] { return cmd_refine(ctx, refine_args); }; });

  IntersectArgs intersect_args;
  auto* intersect_cmd = app.add_subcommand(
      "intersect", "Estimate and suppress the identity/scene intersection");
  intersect_cmd->add_option("--id", intersect_args.id, "NPY identity embedding")
      ->required();
  intersect_cmd->add_option("--scene", intersect_args.scene, "NPY scene embedding")
      ->required();
  intersect_cmd->add_option("--tau", intersect_args.tau, "Cosine threshold")
      ->capture_default_str();
  intersect_cmd->add_option("--id-rank", intersect_args.id_rank,
                            "Identity row-space rank (0 = numerical rank)");
  intersect_cmd->add_option("--scene-rank", intersect_args.scene_rank,
                            "Scene row-space rank (0 = numerical rank)");
  intersect_cmd->add_option("--out", intersect_args.out,
                            "NPY for the suppressed identity embedding");
  intersect_cmd->add_option("--report", intersect_args.report, "Report JSON")
      ->required();
  intersect_cmd->callback(
      [&] { action = [&] { return cmd_intersect(ctx, intersect_args); }; });

  BoundArgs bound_args;
  auto* bound_cmd =
      app.add_subcommand("bound", "Monte-Carlo check of the contextualization bound");
  bound_cmd->add_option("--spec-json", bound_args.spec_json, "Subspace spec JSON")
      ->required();
  bound_cmd->add_option("--trials", bound_args.trials)->capture_default_str();
  bound_cmd->add_option("--seed", bound_args.seed)->capture_default_str();
  bound_cmd->add_option("--report", bound_args.report, "Report JSON")->required();
  bound_cmd->callback([&] { action = [&] { return cmd_bound(ctx, bound_args); }; });

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand(
      "simulate", "Measure scene contextualization on random attention blocks");
  sim_cmd->add_option("--d", sim_args.spec.d)->capture_default_str();
  sim_cmd->add_option("--k-id", sim_args.spec.k_id)->capture_default_str();
  sim_cmd->add_option("--k-sc", sim_args.spec.k_sc)->capture_default_str();
  sim_cmd->add_option("--k-cap", sim_args.spec.k_cap)->capture_default_str();
  sim_cmd->add_option("--n-id", sim_args.n_id)->capture_default_str();
  sim_cmd->add_option("--n-sc", sim_args.n_sc)->capture_default_str();
  sim_cmd->add_option("--trials", sim_args.trials)->capture_default_str();
  sim_cmd->add_option("--seed", sim_args.seed)->capture_default_str();
  sim_cmd->add_option("--report", sim_args.report, "Report JSON")->required();
  sim_cmd->callback([&] { action = [&] { return cmd_simulate(ctx, sim_args); }; });

  ExcursionArgs exc_args;
  auto* exc_cmd = app.add_subcommand(
      "excursion", "Two-phase optimization and spectral excursion profile");
  exc_cmd->add_option("--id", exc_args.id, "NPY identity embedding")->required();
  exc_cmd->add_option("--scene", exc_args.scene, "NPY scene embedding")->required();
  exc_cmd->add_option("--config", exc_args.config, "Optimizer config JSON");
  exc_cmd->add_option("--report", exc_args.report, "Report JSON")->required();
  exc_cmd->callback([&] { action = [&] { return cmd_excursion(ctx, exc_args); }; });

  PcaSweepArgs pca_args;
  auto* pca_cmd = app.add_subcommand(
      "pca-sweep", "Keep singular directions up to increasing energy thresholds");
  pca_cmd->add_option("--id", pca_args.id, "NPY identity embedding")->required();
  pca_cmd->add_option("--criterion", pca_args.criterion, "Ranking criterion")
      ->check(CLI::IsMember({"original", "omega"}))
      ->capture_default_str();
  pca_cmd->add_option("--profile", pca_args.profile,
                      "Excursion profile or excursion/refine report JSON");
  pca_cmd->add_option("--steps", pca_args.steps)->capture_default_str();
  pca_cmd->add_option("--out-dir", pca_args.out_dir)->required();
  pca_cmd->callback([&] { action = [&] { return cmd_pca_sweep(ctx, pca_args); }; });

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitValidation;
  }

  try {
    return action ? action() : kExitValidation;
  } catch (const Error& e) {
    err << "sdec: " << e.what() << '\n';
    return is_validation_error(e.code()) ? kExitValidation : kExitInternal;
  } catch (const std::exception& e) {
    err << "sdec: internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace sdec::cli

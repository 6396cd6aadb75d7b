// occkit command line: procedural scenes, BEV lifting, edge maps, ray-based
// evaluation, gradient checks, and micro benchmarks. Exit codes: 0 success,
// 1 usage error, 2 data or format error.

#include <chrono>
#include <cstdint>
#include <exception>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "occkit/occkit.hpp"

namespace {

struct SynthArgs {
  std::uint64_t seed = 1;
  int objects = 4;
  std::string out;
  std::string rig_out;
};

struct LiftArgs {
  std::string scene;
  std::string rig;
  std::string mode = "lss";
  double alpha = 0.6;
  int bins = 44;
  double dmin = 1.0;
  double dmax = 45.0;
  double noise = 0.25;
  int stride = 8;
  std::string out;
};

struct EdgeArgs {
  std::string scene;
  std::string kernel = "sobel";
  int size = 3;
  std::string out;
  std::string csv_out;
};

struct EvalArgs {
  std::string pred;
  std::string gt;
  std::string rig;
  int stride = 8;
  std::string metrics = "miou,rayiou,raypq";
  std::string out;
};

int run_synth(const SynthArgs& args) {
  occkit::SceneSpec spec;
  spec.seed = args.seed;
  spec.object_count = args.objects;
  const occkit::VoxelGrid grid = occkit::synth_scene(spec);
  occkit::write_occg(grid, args.out);
  if (!args.rig_out.empty()) occkit::write_rig(spec.rig, args.rig_out);
  return 0;
}

int run_lift(const LiftArgs& args, int threads) {
  (void)threads;  // lifting kernels are sequential by construction
  const occkit::VoxelGrid grid = occkit::read_occg(args.scene);
  const std::vector<occkit::CameraModel> rig = occkit::read_rig(args.rig);
  occkit::DepthBinning binning{args.dmin, args.dmax, args.bins};
  binning.validate();

  const int channels = grid.class_count;
  std::vector<occkit::PixelLift> lifts;
  std::vector<occkit::GaussianPrimitive> prims;
  std::vector<occkit::FrustumPoint> points;
  for (std::size_t ci = 0; ci < rig.size(); ++ci) {
    auto [cam_lifts, cam_prims] = occkit::synth_pixel_lifts(
        grid, rig[ci], binning, args.noise, args.stride, static_cast<int>(ci));
    if (args.mode != "gauss") {
      std::vector<occkit::FrustumPoint> cam_points =
          occkit::lift_frustum(cam_lifts, rig[ci], binning);
      points.insert(points.end(), cam_points.begin(), cam_points.end());
    }
    prims.insert(prims.end(), cam_prims.begin(), cam_prims.end());
  }

  occkit::BEVGrid out = occkit::BEVGrid::zeros(grid.geometry, channels);
  if (args.mode == "lss") {
    out = occkit::splat_lss_to_bev(points, grid.geometry, channels);
  } else if (args.mode == "gauss") {
    out = occkit::splat_gaussians_to_bev(prims, grid.geometry, channels, occkit::LossWeights{});
  } else {
    const occkit::BEVGrid bev_d = occkit::splat_lss_to_bev(points, grid.geometry, channels);
    const occkit::BEVGrid bev_g =
        occkit::splat_gaussians_to_bev(prims, grid.geometry, channels, occkit::LossWeights{});
    out = occkit::blend_hybrid(bev_g, bev_d, occkit::BlendConfig{args.alpha});
  }
  occkit::write_bev_csv(out, args.out);
  return 0;
}

// The label map fed to the edge kernels is the top-down semantic view: the
// class of the highest non-free voxel in each column, free where the column
// is empty. Rows index x, columns index y.
occkit::LabelMap top_down_labels(const occkit::VoxelGrid& grid) {
  const occkit::GridGeometry& g = grid.geometry;
  occkit::LabelMap labels;
  labels.height = g.dims[0];
  labels.width = g.dims[1];
  labels.values.assign(static_cast<std::size_t>(g.dims[0]) * static_cast<std::size_t>(g.dims[1]),
                       grid.free_class);
  for (int ix = 0; ix < g.dims[0]; ++ix) {
    for (int iy = 0; iy < g.dims[1]; ++iy) {
      for (int iz = g.dims[2] - 1; iz >= 0; --iz) {
        const std::uint8_t cls = grid.semantic_at(ix, iy, iz);
        if (cls != grid.free_class) {
          labels.values[static_cast<std::size_t>(ix) * static_cast<std::size_t>(g.dims[1]) +
                        static_cast<std::size_t>(iy)] = cls;
          break;
        }
      }
    }
  }
  return labels;
}

int run_edge(const EdgeArgs& args) {
  const occkit::VoxelGrid grid = occkit::read_occg(args.scene);
  const occkit::EdgeKernel kernel =
      occkit::EdgeKernel::make(occkit::parse_kernel_kind(args.kernel), args.size);
  const occkit::LabelMap labels = top_down_labels(grid);
  const occkit::EdgeMap edges = occkit::extract_pseudo_edges(labels, kernel);
  occkit::write_edge_pgm(edges, args.out);
  std::string csv = args.csv_out;
  if (csv.empty()) {
    csv = args.out;
    const std::size_t dot = csv.rfind('.');
    if (dot != std::string::npos) csv.resize(dot);
    csv += ".csv";
  }
  occkit::write_edge_csv(edges, csv);
  return 0;
}

int run_eval(const EvalArgs& args, int threads) {
  const occkit::VoxelGrid pred = occkit::read_occg(args.pred);
  const occkit::VoxelGrid gt = occkit::read_occg(args.gt);
  const std::vector<occkit::CameraModel> rig = occkit::read_rig(args.rig);

  std::set<std::string> wanted;
  std::stringstream ss(args.metrics);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item != "miou" && item != "rayiou" && item != "raypq") {
      throw std::invalid_argument("unknown metric: " + item);
    }
    wanted.insert(item);
  }
  if (wanted.empty()) throw std::invalid_argument("no metrics requested");

  const std::vector<occkit::Ray> rays = occkit::generate_rays(rig, args.stride);
  occkit::EvalConfig cfg;
  cfg.threads = threads;
  const occkit::MetricReport report = occkit::evaluate_metrics(pred, gt, rays, cfg);
  occkit::write_report_csv(report, args.out, wanted.count("miou") > 0,
                           wanted.count("rayiou") > 0, wanted.count("raypq") > 0);
  return 0;
}

int run_grad_check(const std::string& out) {
  const std::vector<occkit::GradCheckRow> rows = occkit::run_grad_checks();
  std::string csv = "loss,max_rel_err,points,pass\n";
  bool all_pass = true;
  for (const occkit::GradCheckRow& row : rows) {
    csv += row.name + "," + occkit::format_double(row.max_rel_err) + "," +
           std::to_string(row.points) + "," + (row.pass ? "pass" : "fail") + "\n";
    all_pass = all_pass && row.pass;
  }
  occkit::detail::write_file_bytes(out, csv);
  if (!all_pass) {
    std::cerr << "grad-check: at least one gradient exceeded tolerance\n";
    return 2;
  }
  return 0;
}

int run_bench(const std::string& out) {
  using clock = std::chrono::steady_clock;
  std::string csv = "kernel,quantity,per_second\n";

  occkit::SceneSpec spec;
  spec.seed = 7;
  spec.object_count = 12;
  const occkit::VoxelGrid grid = occkit::synth_scene(spec);
  const std::vector<occkit::Ray> rays = occkit::generate_rays(spec.rig, 8);

  {
    const auto start = clock::now();
    std::size_t hits = 0;
    for (const occkit::Ray& ray : rays) hits += occkit::traverse(grid, ray) ? 1 : 0;
    const double sec = std::chrono::duration<double>(clock::now() - start).count();
    csv += "traverse,rays," + occkit::format_double(rays.size() / sec) + "\n";
    if (hits == 0) std::cerr << "bench: warning, no ray hits\n";
  }
  {
    occkit::SplitMix64 rng(99);
    std::vector<occkit::FrustumPoint> points(200000);
    for (occkit::FrustumPoint& p : points) {
      p.position = {rng.uniform(-40.0, 40.0), rng.uniform(-40.0, 40.0), rng.uniform(-1.0, 5.0)};
      p.feature = {rng.uniform()};
    }
    const auto start = clock::now();
    const occkit::BEVGrid bev = occkit::splat_lss_to_bev(points, grid.geometry, 1);
    const double sec = std::chrono::duration<double>(clock::now() - start).count();
    csv += "splat_lss,points," + occkit::format_double(points.size() / sec) + "\n";
    (void)bev;
  }
  {
    const occkit::LabelMap labels = top_down_labels(grid);
    const occkit::EdgeKernel kernel = occkit::EdgeKernel::make(occkit::EdgeKernelKind::Sobel, 3);
    const auto start = clock::now();
    const occkit::EdgeMap edges = occkit::extract_pseudo_edges(labels, kernel);
    const double sec = std::chrono::duration<double>(clock::now() - start).count();
    csv += "edge_conv,cells," + occkit::format_double(edges.values.size() / sec) + "\n";
  }

  occkit::detail::write_file_bytes(out, csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"occupancy grid toolkit"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (0: OCCKIT_THREADS env, then 1)");

  SynthArgs synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a procedural scene");
  synth_cmd->add_option("--seed", synth.seed, "scene seed");
  synth_cmd->add_option("--objects", synth.objects, "number of box instances")
      ->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--out", synth.out, "output OCCG path")->required();
  synth_cmd->add_option("--rig", synth.rig_out, "also write the default camera rig here");

  LiftArgs lift;
  CLI::App* lift_cmd = app.add_subcommand("lift", "lift a scene into BEV features");
  lift_cmd->add_option("--scene", lift.scene, "input OCCG scene")->required();
  lift_cmd->add_option("--rig", lift.rig, "camera rig config")->required();
  lift_cmd->add_option("--mode", lift.mode, "view transform path")
      ->check(CLI::IsMember({"lss", "gauss", "hybrid"}));
  lift_cmd->add_option("--alpha", lift.alpha, "hybrid blend coefficient")
      ->check(CLI::Range(0.0, 1.0));
  lift_cmd->add_option("--bins", lift.bins, "depth bin count")->check(CLI::PositiveNumber);
  lift_cmd->add_option("--dmin", lift.dmin, "nearest depth (m)");
  lift_cmd->add_option("--dmax", lift.dmax, "farthest depth (m)");
  lift_cmd->add_option("--noise", lift.noise, "depth noise sigma (m)")
      ->check(CLI::NonNegativeNumber);
  lift_cmd->add_option("--stride", lift.stride, "pixel sampling stride")
      ->check(CLI::PositiveNumber);
  lift_cmd->add_option("--out", lift.out, "output BEV CSV")->required();

  EdgeArgs edge;
  CLI::App* edge_cmd = app.add_subcommand("edge", "pseudo edge labels from a scene");
  edge_cmd->add_option("--scene", edge.scene, "input OCCG scene")->required();
  edge_cmd->add_option("--kernel", edge.kernel, "gradient kernel")
      ->check(CLI::IsMember({"sobel", "prewitt", "laplacian"}));
  edge_cmd->add_option("--size", edge.size, "kernel size")->check(CLI::IsMember({3, 5, 7}));
  edge_cmd->add_option("--out", edge.out, "output PGM path")->required();
  edge_cmd->add_option("--csv", edge.csv_out, "output CSV path (default: out with .csv)");

  EvalArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate prediction against ground truth");
  eval_cmd->add_option("--pred", eval.pred, "predicted OCCG volume")->required();
  eval_cmd->add_option("--gt", eval.gt, "ground-truth OCCG volume")->required();
  eval_cmd->add_option("--rig", eval.rig, "camera rig config")->required();
  eval_cmd->add_option("--stride", eval.stride, "ray sampling stride")
      ->check(CLI::PositiveNumber);
  eval_cmd->add_option("--metrics", eval.metrics, "comma list of miou,rayiou,raypq");
  eval_cmd->add_option("--out", eval.out, "output report CSV")->required();

  std::string grad_out;
  CLI::App* grad_cmd = app.add_subcommand("grad-check", "finite-difference gradient suite");
  grad_cmd->add_option("--out", grad_out, "output CSV path")->required();

  std::string bench_out;
  CLI::App* bench_cmd = app.add_subcommand("bench", "micro benchmark timings");
  bench_cmd->add_option("--out", bench_out, "output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  const int resolved = occkit::resolve_thread_count(threads);
  try {
    if (synth_cmd->parsed()) return run_synth(synth);
    if (lift_cmd->parsed()) return run_lift(lift, resolved);
    if (edge_cmd->parsed()) return run_edge(edge);
    if (eval_cmd->parsed()) return run_eval(eval, resolved);
    if (grad_cmd->parsed()) return run_grad_check(grad_out);
    if (bench_cmd->parsed()) return run_bench(bench_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

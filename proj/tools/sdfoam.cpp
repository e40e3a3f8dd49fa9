// SPDX-License-Identifier: Apache-2.0
// sdfoam command line: make-synthetic, train, render, extract, eval, serve.
// Exit codes: 0 success, 1 usage error, 2 runtime error.
#include "sdfoam/eval/metrics.hpp"
#include "sdfoam/meshx/extract.hpp"
#include "sdfoam/render/view.hpp"
#include "sdfoam/scene_io/benchmark.hpp"
#include "sdfoam/scene_io/snapshot.hpp"
#include "sdfoam/service/service.hpp"
#include "sdfoam/train/trainer.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <thread>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace {

using namespace sdfoam;
using nlohmann::json;

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::IoError, "cannot open " + path.string());
  f << text;
  if (!f) throw Error(Errc::IoError, "write failed: " + path.string());
}

json nan_to_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void set_threads(int threads) {
#ifdef _OPENMP
  omp_set_num_threads(threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency())));
#else
  (void)threads;
#endif
}

scene_io::Image to_image(const render::Camera& cam, const std::vector<Vec3>& px) {
  scene_io::Image img(cam.width, cam.height);
  for (std::size_t i = 0; i < px.size(); ++i) img.set_pixel(i, px[i]);
  return img;
}

struct Options {
  int threads = 0;
  // make-synthetic
  std::string out_dir;
  int res = 128;
  std::uint64_t seed = 0;
  int n_train = 60, n_test = 12;
  // train
  std::string data, out, config, log_path;
  int iters = -1, max_sites = -1;
  bool masked = false;
  std::vector<std::string> sets;
  // render / extract / eval / serve
  std::string snapshot;
  int camera = 0;
  std::string mode = "sdf";
  double cell_tau = meshx::kDefaultCellTau, vert_eps = meshx::kDefaultVertEps;
  bool signed_vertices = false;
  double sdf_min = -INFINITY, sdf_max = INFINITY, alpha_min = -INFINITY, alpha_max = INFINITY;
  double rho_tau = 0.0;
  bool timing = false;
  std::string gt_mesh, pred_mesh, pred_dir, split = "test";
  std::size_t samples = 100000;
  std::string bind = "127.0.0.1";
  int port = 8080;
};

int run_make_synthetic(const Options& o) {
  scene_io::CubeBenchmarkOptions c;
  c.resolution = o.res;
  c.seed = o.seed;
  c.n_train = o.n_train;
  c.n_test = o.n_test;
  const auto d = scene_io::make_cube_benchmark(o.out_dir, c);
  std::cout << "cameras=" << d.size() << " train=" << d.train_ids.size() << " test=" << d.test_ids.size()
            << " out=" << o.out_dir << "\n";
  return 0;
}

int run_train(const Options& o, bool seed_given) {
  train::TrainConfig cfg;
  if (!o.config.empty()) cfg = train::load_config(o.config);
  if (o.iters >= 0) cfg.iterations = o.iters;
  if (o.max_sites >= 0) cfg.max_sites = o.max_sites;
  if (seed_given) cfg.seed = o.seed;
  if (o.masked) cfg.masked = true;
  if (o.threads > 0) cfg.threads = o.threads;
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(Errc::InvalidArgument, "--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  set_threads(cfg.threads);
  std::cerr << "# effective config\n" << cfg.to_string();

  const auto data = scene_io::load_dataset(o.data);
  json log = json::array();
  auto sink = [&](const train::LogEntry& e) {
    std::cout << "step=" << e.step << " loss=" << e.loss << " rgb=" << e.rgb << " eik=" << e.eikonal
              << " batch_psnr=" << e.batch_psnr << " probe_psnr=" << e.probe_psnr << " sites=" << e.sites
              << " beta=" << e.beta << " seconds=" << e.seconds << std::endl;
    log.push_back({{"step", e.step},
                   {"loss", e.loss},
                   {"rgb", e.rgb},
                   {"eikonal", e.eikonal},
                   {"batch_psnr", e.batch_psnr},
                   {"probe_psnr", nan_to_null(e.probe_psnr)},
                   {"sites", e.sites},
                   {"beta", e.beta},
                   {"seconds", e.seconds}});
  };
  const auto result = train::train_loop(data, cfg, sink);
  scene_io::save_snapshot(result.snapshot, o.out);
  json report;
  report["config"] = cfg.to_string();
  report["initial_beta"] = result.initial_beta;
  report["log"] = log;
  report["batch_psnr"] = result.batch_psnr;
  write_text(o.log_path.empty() ? o.out + ".log.json" : o.log_path, report.dump(2) + "\n");
  std::cout << "snapshot=" << o.out << " sites=" << result.snapshot.scene.sites.size() << "\n";
  return 0;
}

int run_render(const Options& o) {
  set_threads(o.threads);
  const auto snap = scene_io::load_snapshot(o.snapshot);
  if (o.camera < 0 || static_cast<std::size_t>(o.camera) >= snap.cameras.size()) {
    throw Error(Errc::InvalidArgument, "camera index " + std::to_string(o.camera) + " out of range (snapshot has " +
                                           std::to_string(snap.cameras.size()) + ")");
  }
  const auto& cam = snap.cameras[static_cast<std::size_t>(o.camera)];
  const auto prep = render::prepare(snap.scene);
  scene_io::write_png(to_image(cam, render::render_pixels(snap.scene, prep, cam)), o.out);
  std::cout << "image=" << o.out << "\n";
  return 0;
}

int run_extract(const Options& o) {
  set_threads(o.threads);
  const auto snap = scene_io::load_snapshot(o.snapshot);
  meshx::ExtractRequest req;
  req.mode = meshx::parse_mode(o.mode);
  req.sdf_options = {o.cell_tau, o.vert_eps, o.signed_vertices};
  req.sdf_range = {o.sdf_min, o.sdf_max};
  req.alpha_range = {o.alpha_min, o.alpha_max};
  req.rho_tau = o.rho_tau;
  const auto t0 = std::chrono::steady_clock::now();
  const auto mesh = meshx::run_extraction(snap, req);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const std::filesystem::path out(o.out);
  if (out.extension() == ".obj") {
    meshx::write_obj(mesh, out);
  } else {
    meshx::write_ply(mesh, out);
  }
  const auto st = meshx::mesh_stats(mesh);
  std::cout << "mesh=" << o.out << " faces=" << st.faces << " components=" << st.components
            << " boundary_edges=" << st.boundary_edges << " seconds=" << seconds << "\n";
  if (o.timing) {
    json t{{"mode", o.mode},
           {"seconds", seconds},
           {"faces", st.faces},
           {"components", st.components},
           {"sites", snap.scene.sites.size()}};
    write_text(o.out + ".timing.json", t.dump(2) + "\n");
  }
  return 0;
}

int run_eval(const Options& o) {
  set_threads(o.threads);
  const auto data = scene_io::load_dataset(o.data);
  std::vector<int> ids;
  if (o.split == "test") {
    ids = data.test_ids;
  } else if (o.split == "train") {
    ids = data.train_ids;
  } else {
    for (int k = 0; k < static_cast<int>(data.size()); ++k) ids.push_back(k);
  }
  if (ids.empty()) throw Error(Errc::InvalidArgument, "split '" + o.split + "' has no views");

  std::optional<scene_io::Snapshot> snap;
  std::optional<render::PreparedScene> prep;
  if (!o.snapshot.empty()) {
    snap = scene_io::load_snapshot(o.snapshot);
    prep = render::prepare(snap->scene);
  }
  json per_view = json::array();
  double psnr_sum = 0.0, ssim_sum = 0.0;
  for (int k : ids) {
    const auto gt = data.load_image(k);
    scene_io::Image pred;
    if (snap) {
      const auto& cam = data.cameras[static_cast<std::size_t>(k)];
      pred = to_image(cam, render::render_pixels(snap->scene, *prep, cam));
    } else {
      pred = scene_io::read_png(std::filesystem::path(o.pred_dir) / data.image_paths[static_cast<std::size_t>(k)]);
    }
    const double p = eval::psnr(pred, gt), s = eval::ssim(pred, gt);
    psnr_sum += p;
    ssim_sum += s;
    per_view.push_back({{"view", k}, {"psnr", p}, {"ssim", s}});
  }
  json report;
  report["psnr"] = psnr_sum / static_cast<double>(ids.size());
  report["ssim"] = ssim_sum / static_cast<double>(ids.size());
  report["split"] = o.split;
  report["per_view"] = per_view;
  report["chamfer"] = nullptr;
  if (!o.gt_mesh.empty()) {
    if (!snap && o.pred_mesh.empty()) throw Error(Errc::InvalidArgument, "--gt-mesh needs --snapshot or --mesh");
    const auto gt = meshx::read_ply(o.gt_mesh);
    const auto mesh = o.pred_mesh.empty() ? meshx::extract_sdf(*snap) : meshx::read_ply(o.pred_mesh);
    report["chamfer"] = eval::chamfer(mesh, gt, o.samples, 0);
    report["chamfer_protocol"] = "surface-sample proxy: mean of directed mean L2 nearest-neighbor distances";
    report["chamfer_samples"] = o.samples;
  }
  write_text(o.out, report.dump(2) + "\n");
  std::cout << "psnr=" << report["psnr"].get<double>() << " ssim=" << report["ssim"].get<double>();
  if (!report["chamfer"].is_null()) std::cout << " chamfer=" << report["chamfer"].get<double>();
  std::cout << " report=" << o.out << "\n";
  return 0;
}

int run_serve(const Options& o) {
  set_threads(o.threads);
  const auto snap = scene_io::load_snapshot(o.snapshot);
  std::cout << "listening=" << o.bind << ":" << o.port << std::endl;
  service::serve(snap, o.bind, o.port);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SDF-conditioned Voronoi scene reconstruction"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--threads", o.threads, "worker threads (0 = all logical cores)");

  auto* mk = app.add_subcommand("make-synthetic", "render the textured-cube benchmark");
  mk->add_option("--out", o.out_dir, "output directory")->required();
  mk->add_option("--res", o.res, "image resolution")->check(CLI::Range(32, 8192));
  mk->add_option("--seed", o.seed, "ring phase seed");
  mk->add_option("--n-train", o.n_train, "training cameras");
  mk->add_option("--n-test", o.n_test, "test cameras");

  auto* tr = app.add_subcommand("train", "optimize a scene");
  tr->add_option("--data", o.data, "dataset directory")->required();
  tr->add_option("--out", o.out, "snapshot path")->required();
  tr->add_option("--config", o.config, "key = value config file");
  tr->add_option("--iters", o.iters, "iterations");
  tr->add_option("--max-sites", o.max_sites, "site budget");
  auto* tr_seed = tr->add_option("--seed", o.seed, "rng seed");
  tr->add_flag("--masked", o.masked, "use foreground masks");
  tr->add_option("--set", o.sets, "override any config key (key=value)");
  tr->add_option("--log", o.log_path, "training log JSON (default: <out>.log.json)");

  auto* rd = app.add_subcommand("render", "render a snapshot camera");
  rd->add_option("--snapshot", o.snapshot)->required();
  rd->add_option("--camera-index", o.camera)->required();
  rd->add_option("--out", o.out, "PNG path")->required();

  auto* ex = app.add_subcommand("extract", "extract a surface mesh");
  ex->add_option("--snapshot", o.snapshot)->required();
  ex->add_option("--mode", o.mode)->check(CLI::IsMember({"sdf", "retained", "density"}));
  ex->add_option("--cell-tau", o.cell_tau);
  ex->add_option("--vert-eps", o.vert_eps);
  ex->add_flag("--signed-vertices", o.signed_vertices, "compare signed f at face vertices");
  ex->add_option("--sdf-min", o.sdf_min);
  ex->add_option("--sdf-max", o.sdf_max);
  ex->add_option("--alpha-min", o.alpha_min);
  ex->add_option("--alpha-max", o.alpha_max);
  ex->add_option("--rho-tau", o.rho_tau);
  ex->add_option("--out", o.out, "mesh path (.ply or .obj)")->required();
  ex->add_flag("--timing", o.timing, "write <out>.timing.json");

  auto* ev = app.add_subcommand("eval", "image and geometry metrics");
  ev->add_option("--data", o.data)->required();
  auto* ev_snap = ev->add_option("--snapshot", o.snapshot);
  auto* ev_pred = ev->add_option("--pred", o.pred_dir, "directory of predicted images laid out like the dataset");
  ev_snap->excludes(ev_pred);
  ev->add_option("--gt-mesh", o.gt_mesh);
  ev->add_option("--mesh", o.pred_mesh, "predicted mesh (.ply); default extracts from --snapshot");
  ev->add_option("--split", o.split)->check(CLI::IsMember({"test", "train", "all"}));
  ev->add_option("--samples", o.samples, "Chamfer samples per mesh");
  ev->add_option("--out", o.out, "report path")->required();

  auto* sv = app.add_subcommand("serve", "HTTP service for the viewer");
  sv->add_option("--snapshot", o.snapshot)->required();
  sv->add_option("--port", o.port)->check(CLI::Range(1, 65535));
  sv->add_option("--bind", o.bind);

  try {
    app.parse(argc, argv);
    if (ev->parsed() && o.snapshot.empty() && o.pred_dir.empty()) {
      throw CLI::ValidationError("eval", "one of --snapshot or --pred is required");
    }
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 1;
  }
  try {
    if (mk->parsed()) return run_make_synthetic(o);
    if (tr->parsed()) return run_train(o, tr_seed->count() > 0);
    if (rd->parsed()) return run_render(o);
    if (ex->parsed()) return run_extract(o);
    if (ev->parsed()) return run_eval(o);
    if (sv->parsed()) return run_serve(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.
//
//   sdfoam_acceptance --suite fast
//   sdfoam_acceptance --suite cube --work DIR [--snapshot S --data D]

#include "../support/geometry_oracles.hpp"
#include "../support/render_oracles.hpp"
#include "sdfoam/eval/metrics.hpp"
#include "sdfoam/meshx/extract.hpp"
#include "sdfoam/render/view.hpp"
#include "sdfoam/scene_io/benchmark.hpp"
#include "sdfoam/train/loss.hpp"
#include "sdfoam/train/optim.hpp"
#include "sdfoam/train/trainer.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace sdfoam;
using geometry::DelaunayMesh;
using geometry::SiteId;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
  if (!ok) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <class... Args>
std::string fmt(Args&&... args) {
  std::ostringstream os;
  os << std::setprecision(6);
  (os << ... << args);
  return os.str();
}

// --- fast suite --------------------------------------------------------------

void geometry_suite() {
  const auto t0 = Clock::now();
  const std::size_t sizes[] = {10, 50, 200, 500};
  std::size_t sphere_bad = 0, locate_bad = 0, traverse_bad = 0;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0, 1);
  std::normal_distribution<double> g;
  for (int set = 0; set < 50; ++set) {
    const std::size_t n = sizes[set % 4];
    const auto pts = testing::random_points(n, 1000 + static_cast<std::uint64_t>(set));
    const auto m = DelaunayMesh::build(pts, static_cast<std::uint64_t>(set));
    sphere_bad += testing::empty_sphere_violations(m);

    const auto queries = testing::random_points(1000, 5000 + static_cast<std::uint64_t>(set), -0.5, 1.5);
    SiteId hint = 0;
    for (const auto& q : queries) {
      const SiteId s = m.locate_cell(q, hint);
      const SiteId truth = testing::nearest_site(m, q);
      if (s != truth && std::abs((m.position(s) - q).norm() - (m.position(truth) - q).norm()) > 1e-12) ++locate_bad;
      hint = s;
    }
    for (int r = 0; r < 200; ++r) {
      const Vec3 o(u(rng), u(rng), u(rng));
      const Vec3 d = Vec3(g(rng), g(rng), g(rng)).normalized();
      traverse_bad += testing::traversal_mismatches(m, o, d, 2.0, 1000);
    }
  }
  const double secs = seconds_since(t0);
  report(sphere_bad == 0 && locate_bad == 0 && traverse_bad == 0 && secs < 120.0, "geometry oracle suite",
         fmt("50 sets, empty-sphere violations=", sphere_bad, " locate mismatches=", locate_bad,
             " traversal mismatches=", traverse_bad, " runtime=", secs, "s (limit 120s)"));
}

void mapping_properties() {
  bool ok = true;
  std::ostringstream detail;
  for (double beta : {0.5, 1.0, 10.0, 100.0}) {
    field::DensityMapping m;
    m.raw_beta = std::log(beta);
    const double b = m.beta();
    const bool peak = m.density(0.0) == b / 4.0;
    double asym = 0.0;
    bool below_peak = true;
    for (int k = 1; k <= 2000; ++k) {
      const double f = k * 1e-2 / b;
      asym = std::max(asym, std::abs(m.density(f) - m.density(-f)));
      below_peak &= m.density(f) < m.density(0.0);
    }
    // Composite Simpson over [-L, L]; the tails beyond are below 1e-13.
    const double L = 32.0 / b;
    const int n = 200000;
    const double h = 2 * L / n;
    double s = m.density(-L) + m.density(L);
    for (int k = 1; k < n; ++k) s += (k % 2 ? 4.0 : 2.0) * m.density(-L + k * h);
    const double integral = s * h / 3.0;
    const bool ok_b = peak && below_peak && asym < 1e-12 && std::abs(integral - 1.0) < 1e-6;
    ok &= ok_b;
    detail << " beta=" << beta << "{peak=" << (peak ? "exact" : "off") << " asym=" << asym
           << " integral-1=" << integral - 1.0 << "}";
  }
  report(ok, "mapping properties", detail.str());
}

void compositing_identity() {
  const auto pts = testing::random_points(400, 77, -1, 1);
  const auto mesh = DelaunayMesh::build(pts, 3);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  std::exponential_distribution<double> e(0.5);
  std::vector<double> rho(pts.size());
  std::vector<Vec3> col(pts.size());
  for (auto& x : rho) x = e(rng);
  for (auto& c : col) c = Vec3(u(rng), u(rng), u(rng));
  std::vector<double> sh(pts.size() * render::kShStride, 0.0);
  render::SceneView v{&mesh, rho, col, sh, Vec3(1, 1, 1), Vec3::Zero(), 3.0};
  double worst = 0.0;
  std::size_t traces = 0;
  for (const auto& ray : testing::probe_rays(10000, 12)) {
    const auto tr = render::trace(ray, v);
    double sum = tr.t_final;
    for (const auto& s : tr.segments) sum += s.transmittance * s.alpha;
    worst = std::max(worst, std::abs(sum - 1.0));
    ++traces;
  }

  // Two segments with alpha 0.5 each over a black background.
  const std::vector<double> rho2{std::log(2.0), std::log(2.0)};
  const std::vector<Vec3> col2{Vec3(0.9, 0.2, 0.4), Vec3(0.1, 0.7, 0.3)};
  const std::vector<double> sh2(2 * render::kShStride, 0.0);
  render::SceneView hv;
  hv.rho = rho2;
  hv.colors = col2;
  hv.sh = sh2;
  hv.background = Vec3::Zero();
  const std::vector<render::CellSpan> spans{{0, 0.0, 1.0, 1}, {1, 1.0, 2.0, geometry::kInfinite}};
  render::Ray r;
  r.o = Vec3::Zero();
  r.d = Vec3(1, 0, 0);
  const auto hand = render::composite(r, spans, hv);
  const Vec3 expect = 0.5 * col2[0] + 0.25 * col2[1];
  const double hand_err = (hand.color - expect).cwiseAbs().maxCoeff();
  report(worst < 1e-12 && hand_err == 0.0, "compositing identity",
         fmt(traces, " traces, max|sum T*alpha + T_final - 1|=", worst, " (tol 1e-12); hand case error=", hand_err));
}

void gradient_suite() {
  const auto t0 = Clock::now();
  testing::GradCheck worst;
  int checked = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto r = testing::gradient_check(seed);
    worst.params = std::max(worst.params, r.params);
    worst.raw_beta = std::max(worst.raw_beta, r.raw_beta);
    worst.colors = std::max(worst.colors, r.colors);
    worst.sh = std::max(worst.sh, r.sh);
    worst.positions = std::max(worst.positions, r.positions);
    worst.background = std::max(worst.background, r.background);
    checked += r.positions_checked;
  }
  const double secs = seconds_since(t0);
  report(worst.worst() < 1e-4 && secs < 300.0, "gradient suite",
         fmt("20 scenes x 20 sites, worst rel.err sdf=", worst.params, " raw_beta=", worst.raw_beta, " colors=",
             worst.colors, " sh=", worst.sh, " positions=", worst.positions, " (", checked,
             " topology-stable coords) background=", worst.background, " runtime=", secs, "s"));
}

void eikonal_checks() {
  const auto xs = testing::random_points(500, 3, -2, 2);
  field::LinearField unit(Vec3(2, -1, 2).normalized(), 0.3);
  const double l_unit = field::eikonal_loss(unit, xs);

  field::SphereField sphere(Vec3(0.1, 0.2, -0.1), 0.5);
  field::LinearField steep(Vec3(0.0, 1.5, 0.0), -0.2);
  const std::vector<Vec3> rendered{{0.2, 0.4, 0.6}, {0.9, 0.1, 0.5}}, target{{0.1, 0.5, 0.9}, {0.8, 0.3, 0.2}};
  double additivity = 0.0;
  for (const field::SdfField* f : {static_cast<const field::SdfField*>(&sphere), static_cast<const field::SdfField*>(&steep)}) {
    const auto with = train::loss(rendered, target, *f, xs, 0.01);
    const auto rgb_only = train::loss(rendered, target, *f, xs, 0.0);
    const double eik = field::eikonal_loss(*f, xs);
    additivity = std::max(additivity, std::abs(with.total - (rgb_only.total + 0.01 * eik)));
    additivity = std::max(additivity, std::abs(with.eikonal - eik));
  }
  const double default_lambda = train::TrainConfig{}.lambda_eik;
  report(l_unit < 1e-12 && additivity < 1e-15 && default_lambda == 0.01, "eikonal",
         fmt("unit linear field loss=", l_unit, " (tol 1e-12); |L - (L_rgb + 0.01 L_eik)|=", additivity,
             "; default lambda_eik=", default_lambda));
}

void lr_protocol() {
  using train::Group;
  const train::TrainConfig cfg;
  const int n = cfg.iterations;
  bool ok = train::lr_at(Group::Positions, 0, cfg) == 2e-4 && train::lr_at(Group::Positions, n, cfg) == 5e-6 &&
            train::lr_at(Group::Sdf, 0, cfg) == 5e-4 && train::lr_at(Group::Sdf, n, cfg) == 5e-5 &&
            train::lr_at(Group::Color, 0, cfg) == 5e-3 && train::lr_at(Group::Color, n, cfg) == 5e-4;
  for (int s : {0, n / 3, n / 2, n}) ok &= train::lr_at(Group::Beta, s, cfg) == 0.05;
  report(ok, "learning-rate protocol",
         fmt("positions ", train::lr_at(Group::Positions, 0, cfg), "->", train::lr_at(Group::Positions, n, cfg),
             ", sdf ", train::lr_at(Group::Sdf, 0, cfg), "->", train::lr_at(Group::Sdf, n, cfg), ", beta ",
             train::lr_at(Group::Beta, 0, cfg), ", color ", train::lr_at(Group::Color, 0, cfg), "->",
             train::lr_at(Group::Color, n, cfg)));
}

bool same_mesh(const meshx::SurfaceMesh& a, const meshx::SurfaceMesh& b) {
  return a.vertices == b.vertices && a.faces == b.faces && a.face_colors == b.face_colors;
}

void round_trips(const std::filesystem::path& work, const scene_io::Snapshot* trained) {
  std::filesystem::create_directories(work);

  scene_io::Snapshot snap;
  if (trained) {
    snap = *trained;
  } else {
    snap = scene_io::make_snapshot(testing::random_scene(300, 5));
  }
  const auto snap_path = work / "roundtrip.sdfoam";
  scene_io::save_snapshot(snap, snap_path);
  const auto bytes = scene_io::encode_snapshot(snap);
  const auto back = scene_io::load_snapshot(snap_path);
  const bool snap_ok = scene_io::encode_snapshot(back) == bytes && back.sdf == snap.sdf && back.alpha == snap.alpha &&
                       back.scene.sites.positions == snap.scene.sites.positions;

  scene_io::CubeBenchmarkOptions opt;
  opt.resolution = 32;
  opt.n_train = 9;
  opt.n_test = 3;
  const auto data_dir = work / "roundtrip_data";
  const auto d = scene_io::make_cube_benchmark(data_dir, opt);
  const auto text = scene_io::manifest_json(d);
  scene_io::write_dataset(scene_io::load_dataset(data_dir), data_dir);
  const bool manifest_ok = scene_io::manifest_json(scene_io::load_dataset(data_dir)) == text;

  const auto mesh = meshx::extract_sdf(snap, {.cell_tau = 0.5, .vert_eps = 0.2});
  const auto ply_path = work / "roundtrip.ply";
  meshx::write_ply(mesh, ply_path);
  const bool ply_ok = same_mesh(meshx::read_ply(ply_path), mesh) && same_mesh(meshx::read_ply(ply_path), meshx::read_ply(ply_path));

  report(snap_ok && manifest_ok && ply_ok, "round-trips",
         fmt("snapshot (", snap.scene.sites.size(), " sites, ", bytes.size(), " bytes) ",
             snap_ok ? "bit-identical" : "DIFFERS", "; manifest ", manifest_ok ? "canonical" : "DIFFERS", "; PLY (",
             mesh.face_count(), " faces) ", ply_ok ? "identical" : "DIFFERS"));
}

// --- cube suite --------------------------------------------------------------

scene_io::Image to_image(const render::Camera& cam, const std::vector<Vec3>& px) {
  scene_io::Image img(cam.width, cam.height);
  for (std::size_t i = 0; i < px.size(); ++i) img.set_pixel(i, px[i]);
  return img;
}

double held_out_psnr(const scene_io::Dataset& data, const scene_io::Snapshot& snap) {
  const auto prep = render::prepare(snap.scene);
  double sum = 0.0;
  for (int k : data.test_ids) {
    const auto& cam = data.cameras[static_cast<std::size_t>(k)];
    sum += eval::psnr(to_image(cam, render::render_pixels(snap.scene, prep, cam)), data.load_image(k));
  }
  return sum / static_cast<double>(data.test_ids.size());
}

template <class F>
double best_time(F&& fn, int reps = 3) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = Clock::now();
    fn();
    best = std::min(best, seconds_since(t0));
  }
  return best;
}

struct Candidate {
  double rho_tau = 0.0;
  double chamfer = 0.0;
  std::size_t components = 0;
  std::size_t faces = 0;
};

void cube_suite(const std::filesystem::path& work, const std::string& snapshot_path, const std::string& data_path) {
  std::filesystem::create_directories(work);
  const train::TrainConfig cfg;  // defaults: 5k iterations, <= 10k sites
  scene_io::Dataset data;
  scene_io::Snapshot snap;
  double initial_beta = cfg.init_beta;
  if (!snapshot_path.empty()) {
    data = scene_io::load_dataset(data_path);
    snap = scene_io::load_snapshot(snapshot_path);
    std::cout << "# using existing snapshot " << snapshot_path << "\n";
  } else {
    scene_io::CubeBenchmarkOptions opt;
    opt.resolution = 128;
    data = scene_io::make_cube_benchmark(work / "cube", opt);
    const auto t0 = Clock::now();
    auto res = train::train_loop(data, cfg, [](const train::LogEntry& e) {
      std::cout << "# step=" << e.step << " batch_psnr=" << e.batch_psnr << " probe_psnr=" << e.probe_psnr
                << " sites=" << e.sites << " beta=" << e.beta << " seconds=" << e.seconds << std::endl;
    });
    std::cout << "# training took " << seconds_since(t0) << "s\n";
    initial_beta = res.initial_beta;
    snap = std::move(res.snapshot);
    scene_io::save_snapshot(snap, work / "cube.sdfoam");
  }

  const double psnr = held_out_psnr(data, snap);
  report(psnr >= 24.0, "cube (a) held-out PSNR",
         fmt(psnr, " dB over ", data.test_ids.size(), " test views (threshold 24 dB)"));

  const auto gt = scene_io::cube_mesh();
  const double edge = 2.0 * scene_io::kCubeHalf;
  meshx::SurfaceMesh sdf_mesh;
  double chamfer = std::numeric_limits<double>::infinity();
  std::size_t components = 0;
  try {
    sdf_mesh = meshx::extract_sdf(snap);
    meshx::write_ply(sdf_mesh, work / "cube_sdf.ply");
    chamfer = eval::chamfer(sdf_mesh, gt);
    components = meshx::mesh_stats(sdf_mesh).components;
  } catch (const Error& e) {
    std::cout << "# extract_sdf failed: " << e.what() << "\n";
  }
  report(chamfer <= 0.03 * edge, "cube (b) extract_sdf Chamfer",
         fmt(chamfer, " (threshold ", 0.03 * edge, " = 0.03 x edge; ", sdf_mesh.face_count(), " faces)"));

  // Baseline sweep: fractions of the peak density beta / 4, log-spaced.
  const double peak = snap.scene.mapping.beta() / 4.0;
  std::vector<Candidate> sweep;
  for (int k = 0; k < 10; ++k) {
    const double tau = peak * 0.9 * std::pow(10.0, -3.0 * k / 9.0);
    try {
      const auto m = meshx::extract_density_baseline(snap, tau);
      sweep.push_back({tau, eval::chamfer(m, gt), meshx::mesh_stats(m).components, m.face_count()});
    } catch (const Error&) {
      continue;
    }
  }
  std::ostringstream sweep_text;
  for (const auto& c : sweep)
    sweep_text << "# baseline rho_tau=" << c.rho_tau << " chamfer=" << c.chamfer << " components=" << c.components
               << " faces=" << c.faces << "\n";
  std::cout << sweep_text.str();
  const auto best = std::min_element(sweep.begin(), sweep.end(),
                                     [](const Candidate& a, const Candidate& b) { return a.chamfer < b.chamfer; });
  const bool have_best = best != sweep.end();
  report(components > 0 && components <= 3 && have_best && best->components > components,
         "cube (c) connected components",
         fmt("extract_sdf=", components, " (limit 3); baseline best rho_tau=", have_best ? best->rho_tau : 0.0,
             " (Chamfer ", have_best ? best->chamfer : 0.0, ") components=", have_best ? best->components : 0,
             " (must be strictly more)"));

  // Informational: the signed vertex test on the same thresholds.
  try {
    const auto m = meshx::extract_sdf(snap, {.signed_vertices = true});
    std::cout << "# extract_sdf signed: faces=" << m.face_count() << " components=" << meshx::mesh_stats(m).components
              << " chamfer=" << eval::chamfer(m, gt) << "\n";
  } catch (const Error& e) {
    std::cout << "# extract_sdf signed failed: " << e.what() << "\n";
  }

  const double final_beta = snap.scene.mapping.beta();
  report(final_beta > initial_beta, "cube (d) beta grows", fmt("initial=", initial_beta, " final=", final_beta));

  if (have_best && !sdf_mesh.empty()) {
    const double t_sdf = best_time([&] { (void)meshx::extract_sdf(snap); });
    const double t_base = best_time([&] { (void)meshx::extract_density_baseline(snap, best->rho_tau); });
    report(t_sdf <= t_base, "extraction timing",
           fmt("extract_sdf=", t_sdf, "s baseline=", t_base, "s ratio baseline/sdf=", t_base / t_sdf, " at ",
               snap.scene.sites.size(), " sites"));
  } else {
    report(false, "extraction timing", "no extract_sdf mesh or baseline mesh to time");
  }

  round_trips(work / "roundtrip", &snap);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sdfoam acceptance criteria"};
  std::string suite = "fast", work = "acceptance_work", snapshot, data;
  int threads = 0;
  app.add_option("--suite", suite)->check(CLI::IsMember({"fast", "cube", "all"}));
  app.add_option("--work", work, "scratch directory");
  app.add_option("--snapshot", snapshot, "evaluate an existing cube snapshot instead of training");
  app.add_option("--data", data, "dataset of --snapshot");
  app.add_option("--threads", threads);
  CLI11_PARSE(app, argc, argv);
  if (!snapshot.empty() && data.empty()) {
    std::cerr << "--snapshot needs --data\n";
    return 2;
  }
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#endif

  try {
    if (suite == "fast" || suite == "all") {
      geometry_suite();
      mapping_properties();
      compositing_identity();
      gradient_suite();
      eikonal_checks();
      lr_protocol();
      if (suite == "fast") round_trips(std::filesystem::path(work) / "roundtrip", nullptr);
    }
    if (suite == "cube" || suite == "all") cube_suite(work, snapshot, data);
  } catch (const std::exception& e) {
    std::cout << "FAIL aborted: " << e.what() << std::endl;
    return 1;
  }
  std::cout << (g_failures == 0 ? "all criteria passed" : fmt(g_failures, " criteria failed")) << std::endl;
  return g_failures == 0 ? 0 : 1;
}

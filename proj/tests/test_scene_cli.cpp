#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include "occkit/occkit.hpp"

using namespace occkit;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("occkit_cli_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string cli_path() {
  const char* p = std::getenv("OCCKIT_CLI_PATH");
  REQUIRE(p != nullptr);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = "\"" + cli_path() + "\" " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  REQUIRE(rc != -1);
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -2;
}

// Small scene spec used everywhere grids are built in-process: a 16 m square
// keeps exhaustive checks fast.
SceneSpec small_spec(std::uint64_t seed, int objects) {
  SceneSpec spec;
  spec.seed = seed;
  spec.object_count = objects;
  spec.extent = GridGeometry::create({0, 16}, {0, 16}, {0, 4}, {0.4, 0.4, 0.4});
  return spec;
}

}  // namespace

TEST_CASE("default scene is a ground slab") {
  const VoxelGrid grid = synth_scene(small_spec(1, 0));
  const GridGeometry& g = grid.geometry;
  for (int x = 0; x < g.dims[0]; ++x) {
    for (int y = 0; y < g.dims[1]; ++y) {
      CHECK(grid.semantic_at(x, y, 0) == 11);
      CHECK(grid.instance_at(x, y, 0) == 0);
      for (int z = 1; z < g.dims[2]; ++z) CHECK(grid.is_free(g.flat_index(x, y, z)));
    }
  }
  grid.validate();
}

TEST_CASE("scene synthesis is seed deterministic") {
  const VoxelGrid a = synth_scene(small_spec(77, 6));
  const VoxelGrid b = synth_scene(small_spec(77, 6));
  CHECK(a.semantics == b.semantics);
  CHECK(a.instances == b.instances);

  const VoxelGrid c = synth_scene(small_spec(78, 6));
  CHECK(a.semantics != c.semantics);
}

TEST_CASE("objects are labeled boxes above the ground") {
  const VoxelGrid grid = synth_scene(small_spec(5, 2));
  grid.validate();
  std::map<int, std::array<int, 6>> bounds;  // id -> min/max per axis
  std::map<int, std::set<int>> classes;
  const GridGeometry& g = grid.geometry;
  for (int x = 0; x < g.dims[0]; ++x) {
    for (int y = 0; y < g.dims[1]; ++y) {
      for (int z = 0; z < g.dims[2]; ++z) {
        const int id = grid.instance_at(x, y, z);
        if (id == 0) continue;
        CHECK(z >= 1);  // never intersects the ground slab
        classes[id].insert(grid.semantic_at(x, y, z));
        auto it = bounds.find(id);
        if (it == bounds.end()) {
          bounds[id] = {x, x, y, y, z, z};
        } else {
          auto& b = it->second;
          b[0] = std::min(b[0], x);
          b[1] = std::max(b[1], x);
          b[2] = std::min(b[2], y);
          b[3] = std::max(b[3], y);
          b[4] = std::min(b[4], z);
          b[5] = std::max(b[5], z);
        }
      }
    }
  }
  REQUIRE(bounds.size() == 2);
  for (const auto& [id, b] : bounds) {
    // Single class per instance, drawn from the palette.
    REQUIRE(classes[id].size() == 1);
    const int cls = *classes[id].begin();
    CHECK((cls == 2 || cls == 4 || cls == 9));
    // The instance fills its axis-aligned bounding box.
    for (int x = b[0]; x <= b[1]; ++x)
      for (int y = b[2]; y <= b[3]; ++y)
        for (int z = b[4]; z <= b[5]; ++z) CHECK(grid.instance_at(x, y, z) == id);
    // Sizes within the configured range.
    CHECK(b[1] - b[0] + 1 >= 2);
    CHECK(b[1] - b[0] + 1 <= 8);
  }
}

TEST_CASE("impossible placement fails loudly") {
  SceneSpec spec = small_spec(1, 99);
  spec.extent = GridGeometry::create({0, 1.6}, {0, 1.6}, {0, 1.6}, {0.4, 0.4, 0.4});
  spec.min_size_cells = 2;
  spec.max_size_cells = 2;
  spec.max_attempts = 20;
  CHECK_THROWS_AS(synth_scene(spec), generation_error);
}

TEST_CASE("perturb_scene translates instances and preserves stuff") {
  SceneSpec spec = small_spec(11, 3);
  const VoxelGrid grid = synth_scene(spec);

  const VoxelGrid same = perturb_scene(grid, {0.0, 0.0, 0.0});
  CHECK(same.semantics == grid.semantics);
  CHECK(same.instances == grid.instances);

  const VoxelGrid moved = perturb_scene(grid, {0.8, -0.4, 0.0});
  const GridGeometry& g = grid.geometry;
  long long src = 0, dst = 0;
  for (int x = 0; x < g.dims[0]; ++x) {
    for (int y = 0; y < g.dims[1]; ++y) {
      for (int z = 0; z < g.dims[2]; ++z) {
        // Ground never moves.
        if (z == 0 && grid.instance_at(x, y, z) == 0) {
          CHECK(moved.semantic_at(x, y, z) == grid.semantic_at(x, y, z));
        }
        const int id = grid.instance_at(x, y, z);
        if (id != 0) {
          src += 1;
          const int tx = x + 2, ty = y - 1;
          if (tx < g.dims[0] && ty >= 0) {
            CHECK(moved.instance_at(tx, ty, z) == id);
            CHECK(moved.semantic_at(tx, ty, z) == grid.semantic_at(x, y, z));
          }
        }
        if (moved.instance_at(x, y, z) != 0) dst += 1;
      }
    }
  }
  CHECK(dst <= src);  // clipping can only lose voxels
  moved.validate();

  CHECK_THROWS_AS(perturb_scene(grid, {0.3, 0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("perturb_scene can drop an instance") {
  const VoxelGrid grid = synth_scene(small_spec(13, 2));
  const VoxelGrid dropped = perturb_scene(grid, {0.0, 0.0, 0.0}, 1);
  bool saw_1 = false, saw_2 = false;
  for (std::uint16_t id : dropped.instances) {
    if (id == 1) saw_1 = true;
    if (id == 2) saw_2 = true;
  }
  CHECK_FALSE(saw_1);
  CHECK(saw_2);
}

TEST_CASE("shifting an instance down overwrites ground voxels") {
  SceneSpec spec = small_spec(21, 1);
  const VoxelGrid grid = synth_scene(spec);
  const GridGeometry& g = grid.geometry;
  // Find the box's lowest layer.
  int zmin = g.dims[2];
  for (int x = 0; x < g.dims[0]; ++x)
    for (int y = 0; y < g.dims[1]; ++y)
      for (int z = 0; z < g.dims[2]; ++z)
        if (grid.instance_at(x, y, z) == 1) zmin = std::min(zmin, z);
  REQUIRE(zmin >= 1);

  const VoxelGrid sunk = perturb_scene(grid, {0.0, 0.0, -0.4 * zmin});
  bool overwrote_ground = false;
  for (int x = 0; x < g.dims[0]; ++x) {
    for (int y = 0; y < g.dims[1]; ++y) {
      if (grid.instance_at(x, y, zmin) == 1) {
        CHECK(sunk.instance_at(x, y, 0) == 1);
        overwrote_ground = true;
      }
    }
  }
  CHECK(overwrote_ground);
  sunk.validate();
}

TEST_CASE("synthesized pixel lifts describe the scene hits") {
  SceneSpec spec = small_spec(3, 2);
  const VoxelGrid grid = synth_scene(spec);

  CameraModel cam;
  cam.intrinsics = Mat3{{64.0, 0.0, 32.0, 0.0, 64.0, 24.0, 0.0, 0.0, 1.0}};
  // Look along +x from the grid center edge, 1 m up.
  cam.extrinsic = Mat4::from_rotation_translation(
      Mat3{{0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0}}, {0.1, 8.0, 1.0});
  cam.width = 64;
  cam.height = 48;

  const DepthBinning binning{0.5, 16.5, 32};
  const auto [lifts, prims] = synth_pixel_lifts(grid, cam, binning, 0.0, 4, 0);
  REQUIRE(lifts.size() == prims.size());
  REQUIRE(!lifts.empty());
  CHECK(lifts.size() < 16u * 12u);  // sky pixels never lift

  for (std::size_t i = 0; i < lifts.size(); ++i) {
    const PixelLift& lift = lifts[i];
    lift.validate();
    // One-hot feature in a class that exists in the scene.
    int hot = -1;
    for (std::size_t c = 0; c < lift.feature.size(); ++c) {
      if (lift.feature[c] == 1.0) {
        REQUIRE(hot == -1);
        hot = static_cast<int>(c);
      } else {
        REQUIRE(lift.feature[c] == 0.0);
      }
    }
    CHECK((hot == 11 || hot == 2 || hot == 4 || hot == 9));

    // Zero noise: the depth distribution is one-hot in the containing bin.
    Ray ray;
    ray.origin = cam.center();
    ray.direction = cam.ray_direction(lift.u, lift.v);
    const auto hit = traverse(grid, ray);
    REQUIRE(hit.has_value());
    int hot_bin = -1;
    for (std::size_t b = 0; b < lift.depth_probs.size(); ++b) {
      if (lift.depth_probs[b] == 1.0) hot_bin = static_cast<int>(b);
    }
    CHECK(hot_bin == binning.containing_bin(std::min(hit->depth, binning.d_max - 1e-9)));

    // The primitive sits on the ray at the hit depth, tagged like the lift.
    const GaussianPrimitive& prim = prims[i];
    CHECK(norm(prim.mean - ray.origin) == Catch::Approx(hit->depth).margin(1e-9));
    CHECK(prim.weight[static_cast<std::size_t>(hot)] == 1.0);
    CHECK(prim.opacity == 1.0);
  }
}

TEST_CASE("splatted primitives land on the instance footprint") {
  SceneSpec spec = small_spec(9, 1);
  const VoxelGrid grid = synth_scene(spec);
  const GridGeometry& g = grid.geometry;

  CameraModel cam;
  cam.intrinsics = Mat3{{64.0, 0.0, 32.0, 0.0, 64.0, 24.0, 0.0, 0.0, 1.0}};
  cam.extrinsic = Mat4::from_rotation_translation(
      Mat3{{0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0}}, {0.1, 8.0, 1.2});
  cam.width = 64;
  cam.height = 48;

  const auto [lifts, prims] = synth_pixel_lifts(grid, cam, DepthBinning{0.5, 16.5, 32},
                                                0.05, 2, 0);
  const BEVGrid bev = splat_gaussians_to_bev(prims, g, grid.class_count, LossWeights{});

  // Mass in the object channel concentrates on the object footprint plus a
  // one-cell halo (sigma is an eighth of a cell).
  std::set<std::pair<int, int>> footprint;
  int obj_class = -1;
  for (int x = 0; x < g.dims[0]; ++x)
    for (int y = 0; y < g.dims[1]; ++y)
      for (int z = 0; z < g.dims[2]; ++z)
        if (grid.instance_at(x, y, z) == 1) {
          footprint.insert({x, y});
          obj_class = grid.semantic_at(x, y, z);
        }
  REQUIRE(obj_class >= 0);

  double inside = 0.0, total = 0.0;
  for (int x = 0; x < g.dims[0]; ++x) {
    for (int y = 0; y < g.dims[1]; ++y) {
      const double v = bev.at(x, y, obj_class);
      total += v;
      bool near = false;
      for (int dx = -1; dx <= 1 && !near; ++dx)
        for (int dy = -1; dy <= 1 && !near; ++dy)
          near = footprint.count({x + dx, y + dy}) > 0;
      if (near) inside += v;
    }
  }
  if (total > 0.0) {
    CHECK(inside >= 0.9 * total);
  }
}

TEST_CASE("cli synth writes a readable scene and rig") {
  const fs::path dir = temp_dir("synth");
  const fs::path scene = dir / "scene.occg";
  const fs::path rig = dir / "rig.cfg";
  const int rc = run_cli("synth --seed 3 --objects 4 --out \"" + scene.string() + "\" --rig \"" +
                         rig.string() + "\"");
  REQUIRE(rc == 0);

  const VoxelGrid grid = read_occg(scene.string());
  CHECK(grid.geometry.dims == std::array<int, 3>{200, 200, 16});
  CHECK(grid.class_count == 17);
  CHECK(grid.free_class == 16);
  std::set<int> ids;
  for (std::uint16_t id : grid.instances)
    if (id != 0) ids.insert(id);
  CHECK(ids == std::set<int>{1, 2, 3, 4});

  const auto cams = read_rig(rig.string());
  REQUIRE(cams.size() == 6);
  for (const CameraModel& cam : cams) {
    CHECK(cam.width == 704);
    CHECK(cam.height == 256);
  }

  // Same seed, same bytes.
  const fs::path scene2 = dir / "scene2.occg";
  REQUIRE(run_cli("synth --seed 3 --objects 4 --out \"" + scene2.string() + "\"") == 0);
  CHECK(slurp(scene) == slurp(scene2));
  fs::remove_all(dir);
}

TEST_CASE("cli usage errors exit with 1") {
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("synth --help") == 0);
  CHECK(run_cli("") == 1);                         // missing subcommand
  CHECK(run_cli("synth") == 1);                    // missing --out
  CHECK(run_cli("frobnicate") == 1);               // unknown subcommand
  CHECK(run_cli("synth --objects -3 --out x") == 1);
  const fs::path dir = temp_dir("usage");
  const fs::path scene = dir / "s.occg";
  REQUIRE(run_cli("synth --seed 1 --objects 1 --out \"" + scene.string() + "\"") == 0);
  CHECK(run_cli("lift --scene \"" + scene.string() + "\" --mode warp --out \"" +
                (dir / "b.csv").string() + "\"") == 1);  // invalid mode
  CHECK(run_cli("edge --scene \"" + scene.string() + "\" --size 4 --out \"" +
                (dir / "e.pgm").string() + "\"") == 1);  // invalid kernel size
  fs::remove_all(dir);
}

TEST_CASE("cli runtime errors exit with 2") {
  const fs::path dir = temp_dir("runtime");
  const std::string rig = (dir / "rig.cfg").string();
  CHECK(run_cli("lift --scene \"" + (dir / "missing.occg").string() + "\" --rig \"" + rig +
                "\" --out \"" + (dir / "b.csv").string() + "\"") == 2);
  CHECK(run_cli("eval --pred \"" + (dir / "nope.occg").string() + "\" --gt \"" +
                (dir / "nope.occg").string() + "\" --rig \"" + rig + "\" --out \"" +
                (dir / "r.csv").string() + "\"") == 2);
  // Corrupt scene file.
  const fs::path bad = dir / "bad.occg";
  {
    std::ofstream out(bad, std::ios::binary);
    out << "OCCGgarbage";
  }
  CHECK(run_cli("edge --scene \"" + bad.string() + "\" --out \"" + (dir / "e.pgm").string() +
                "\"") == 2);
  fs::remove_all(dir);
}

TEST_CASE("cli lift modes produce consistent bev grids") {
  const fs::path dir = temp_dir("lift");
  const fs::path scene = dir / "scene.occg";
  const fs::path rigp = dir / "rig.cfg";
  REQUIRE(run_cli("synth --seed 6 --objects 5 --out \"" + scene.string() + "\" --rig \"" +
                  rigp.string() + "\"") == 0);

  const std::string common = " --scene \"" + scene.string() + "\" --rig \"" + rigp.string() +
                             "\" --stride 32 --bins 16 --noise 0.8";
  const fs::path lss = dir / "lss.csv";
  const fs::path gauss = dir / "gauss.csv";
  const fs::path hybrid = dir / "hybrid.csv";
  REQUIRE(run_cli("lift --mode lss" + common + " --out \"" + lss.string() + "\"") == 0);
  REQUIRE(run_cli("lift --mode gauss" + common + " --out \"" + gauss.string() + "\"") == 0);
  REQUIRE(run_cli("lift --mode hybrid --alpha 0.6" + common + " --out \"" + hybrid.string() +
                  "\"") == 0);

  // Parse the three CSVs and check hybrid = 0.6 * gauss + lss per cell.
  // 200x200 cells x 17 channels, flat-indexed.
  const auto parse = [](const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    std::string header;
    std::getline(in, header);
    REQUIRE(header == "x,y,channel,value");
    std::vector<double> cells(200 * 200 * 17, 0.0);
    int x, y, c;
    char comma;
    double v;
    while (in >> x >> comma >> y >> comma >> c >> comma >> v) {
      cells[(static_cast<std::size_t>(x) * 200 + static_cast<std::size_t>(y)) * 17 +
            static_cast<std::size_t>(c)] = v;
    }
    return cells;
  };
  const auto l = parse(lss);
  const auto g = parse(gauss);
  const auto h = parse(hybrid);
  double worst = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    worst = std::max(worst, std::abs(h[i] - (0.6 * g[i] + l[i])));
  }
  CHECK(worst <= 1e-9);

  // Determinism across identical runs, byte for byte.
  const fs::path again = dir / "hybrid2.csv";
  REQUIRE(run_cli("lift --mode hybrid --alpha 0.6" + common + " --out \"" + again.string() +
                  "\"") == 0);
  CHECK(slurp(hybrid) == slurp(again));
  fs::remove_all(dir);
}

TEST_CASE("cli edge writes pgm and csv renderings") {
  const fs::path dir = temp_dir("edge");
  const fs::path scene = dir / "scene.occg";
  REQUIRE(run_cli("synth --seed 4 --objects 6 --out \"" + scene.string() + "\"") == 0);

  const fs::path pgm = dir / "edges.pgm";
  REQUIRE(run_cli("edge --scene \"" + scene.string() + "\" --kernel sobel --size 3 --out \"" +
                  pgm.string() + "\"") == 0);
  const std::string raw = slurp(pgm);
  CHECK(raw.rfind("P5\n200 200\n255\n", 0) == 0);
  CHECK(raw.size() == 15 + 200 * 200);
  // Objects exist, so some edge pixels must fire, but not everywhere.
  long long lit = 0;
  for (std::size_t i = 15; i < raw.size(); ++i)
    if (static_cast<unsigned char>(raw[i]) == 255) lit += 1;
  CHECK(lit > 0);
  CHECK(lit < 200 * 200 / 2);
  fs::remove_all(dir);
}

TEST_CASE("cli eval on identical volumes reports identity metrics") {
  const fs::path dir = temp_dir("eval");
  const fs::path scene = dir / "scene.occg";
  const fs::path rigp = dir / "rig.cfg";
  REQUIRE(run_cli("synth --seed 8 --objects 5 --out \"" + scene.string() + "\" --rig \"" +
                  rigp.string() + "\"") == 0);

  const fs::path report = dir / "report.csv";
  REQUIRE(run_cli("eval --pred \"" + scene.string() + "\" --gt \"" + scene.string() +
                  "\" --rig \"" + rigp.string() + "\" --stride 16 --out \"" + report.string() +
                  "\"") == 0);

  std::ifstream in(report);
  REQUIRE(in.good());
  std::string line;
  std::getline(in, line);
  CHECK(line == "metric,class,threshold,value");
  std::map<std::string, double> values;
  while (std::getline(in, line)) {
    const auto c1 = line.find(',');
    const auto c3 = line.rfind(',');
    REQUIRE(c1 != std::string::npos);
    values[line.substr(0, c1) + "|" + line.substr(c1, c3 - c1)] =
        std::stod(line.substr(c3 + 1));
  }
  CHECK(values.at("miou|,,") == 1.0);
  CHECK(values.at("rayiou|,,mean") == 1.0);
  CHECK(values.at("raypq|,,mean") == 1.0);
  CHECK(values.at("rayiou|,,1") == 1.0);
  CHECK(values.at("raypq_pq|,,4") == 1.0);

  // Metric filtering drops rows.
  const fs::path only_miou = dir / "miou.csv";
  REQUIRE(run_cli("eval --pred \"" + scene.string() + "\" --gt \"" + scene.string() +
                  "\" --rig \"" + rigp.string() + "\" --stride 16 --metrics miou --out \"" +
                  only_miou.string() + "\"") == 0);
  const std::string text = slurp(only_miou);
  CHECK(text.find("miou") != std::string::npos);
  CHECK(text.find("rayiou") == std::string::npos);
  CHECK(run_cli("eval --pred \"" + scene.string() + "\" --gt \"" + scene.string() +
                "\" --rig \"" + rigp.string() + "\" --metrics bogus --out \"" +
                (dir / "x.csv").string() + "\"") == 2);
  fs::remove_all(dir);
}

TEST_CASE("cli grad-check passes and writes its table") {
  const fs::path dir = temp_dir("grad");
  const fs::path out = dir / "grad.csv";
  REQUIRE(run_cli("grad-check --out \"" + out.string() + "\"") == 0);
  std::ifstream in(out);
  REQUIRE(in.good());
  std::string line;
  std::getline(in, line);
  CHECK(line == "loss,max_rel_err,points,pass");
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows += 1;
    CHECK(line.find(",pass") != std::string::npos);
  }
  CHECK(rows == 6);
  fs::remove_all(dir);
}

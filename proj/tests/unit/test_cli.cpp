#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "livewire/livewire3d.hpp"
#include "livewire/metrics.hpp"
#include "livewire/volume_io.hpp"
#include "oracles.hpp"

using namespace livewire;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("lw_cli_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "livewire");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

void write(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
}

std::string read(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void write_cylinder(const TempDir& dir) {
  Phantom ph(PhantomSpec{});
  save_volume(ph.volume(), dir / "cyl.lwv");
  write(dir / "cuts.json", cuts_to_json({analytic_segment(ph, perpendicular_cuts(ph), 0, 7)}));
}

}  // namespace

TEST_CASE("segment the cylinder end to end") {
  TempDir dir;
  write_cylinder(dir);
  const auto r = run_cli({"segment", "--volume", dir / "cyl.lwv", "--cuts", dir / "cuts.json", "--out",
                          dir / "contours.json", "--stats", dir / "stats.json"});
  CHECK_MESSAGE(r.code == cli::kExitOk, r.err);
  const ContourSet c = load_contours(dir / "contours.json");
  CHECK(c.slices.size() == 8);
  CHECK_NOTHROW(c.validate());
  CHECK(fs::exists(dir / "stats.json"));

  const auto again = run_cli({"segment", "--volume", dir / "cyl.lwv", "--cuts", dir / "cuts.json", "--out",
                              dir / "contours2.json"});
  CHECK(again.code == 0);
  CHECK(read(dir / "contours.json") == read(dir / "contours2.json"));
}

TEST_CASE("segment without --volume is a usage error") {
  TempDir dir;
  const auto r = run_cli({"segment", "--cuts", dir / "cuts.json", "--out", dir / "c.json"});
  CHECK(r.code == cli::kExitIo);
  CHECK(r.err.find("--volume") != std::string::npos);
}

TEST_CASE("segment with inconsistent cuts names the cut and exits 2") {
  TempDir dir;
  Phantom ph(PhantomSpec{});
  save_volume(ph.volume(), dir / "cyl.lwv");
  auto line = [](double deg) {
    const double a = deg * 3.14159265358979323846 / 180.0;
    return CutLine{{32 - 20 * std::cos(a), 32 - 20 * std::sin(a)}, {32 + 20 * std::cos(a), 32 + 20 * std::sin(a)}};
  };
  write(dir / "cuts.json", cuts_to_json({analytic_segment(ph, {line(0), line(240), line(120)}, 0, 7)}));
  const auto r = run_cli({"segment", "--volume", dir / "cyl.lwv", "--cuts", dir / "cuts.json", "--out",
                          dir / "c.json"});
  CHECK(r.code == cli::kExitValidation);
  CHECK(r.err.find("cut 2") != std::string::npos);
}

TEST_CASE("segment with a missing volume file is an io error") {
  TempDir dir;
  write_cylinder(dir);
  const auto r = run_cli({"segment", "--volume", dir / "nope.lwv", "--cuts", dir / "cuts.json", "--out",
                          dir / "c.json"});
  CHECK(r.code == cli::kExitIo);
}

TEST_CASE("mesh two squares") {
  TempDir dir;
  ContourSet cs;
  cs.segments = {{0, 1}};
  cs.slices.push_back({0, {{0, 0}, {4, 0}, {4, 4}, {0, 4}}});
  cs.slices.push_back({1, {{0, 0}, {4, 0}, {4, 4}, {0, 4}}});
  save_contours(cs, dir / "sq.json");
  const auto r = run_cli({"mesh", "--contours", dir / "sq.json", "--out", dir / "sq.obj", "--samples", "4"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto obj = oracle::parse_obj(read(dir / "sq.obj"));
  CHECK(obj.vertices.size() == 8);
  CHECK(obj.faces.size() == 8);
}

TEST_CASE("eval needs two runs") {
  TempDir dir;
  Phantom ph(PhantomSpec{});
  write(dir / "a.json", run_to_json(scripted_user(ph, {}, "a")));
  write(dir / "b.json", run_to_json(scripted_user(ph, {}, "b")));
  CHECK(run_cli({"eval", "--runs", dir / "a.json", "--report", dir / "r.csv"}).code == cli::kExitValidation);
  const auto ok = run_cli({"eval", "--runs", dir / "a.json", dir / "b.json", "--report", dir / "r.csv"});
  CHECK_MESSAGE(ok.code == 0, ok.err);
  CHECK(read(dir / "r.csv").rfind("run_a,run_b,slice,error_px", 0) == 0);
}

TEST_CASE("filter unsharp with amount 0 is the identity") {
  TempDir dir;
  Volume v(10, 9, 3);
  std::mt19937_64 rng(1);
  for (auto& b : v.voxels()) b = static_cast<std::uint8_t>(rng() & 0xff);
  save_volume(v, dir / "in.lwv");
  const auto r = run_cli({"filter", "--volume", dir / "in.lwv", "--kind", "unsharp", "--params", "amount=0", "--out",
                          dir / "out.lwv"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(load_volume(dir / "out.lwv") == v);
  CHECK(run_cli({"filter", "--volume", dir / "in.lwv", "--kind", "unsharp", "--params", "radius=2", "--out",
                 dir / "o.lwv"})
            .code == cli::kExitValidation);
}

TEST_CASE("replay writes runs and a summary") {
  TempDir dir;
  const auto r = run_cli({"replay", "--phantom", "cylinder", "--noise", "0", "--runs", "2", "--jitter", "0",
                          "--out-dir", dir / "replay"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(fs::exists(dir / "replay/run1.json"));
  CHECK(fs::exists(dir / "replay/phantom.lwv"));
  CHECK(r.out.find("\"two_norm\"") != std::string::npos);
  REQUIRE(fs::exists(dir / "replay/cuts.json"));
  const auto seg = run_cli({"segment", "--volume", dir / "replay/phantom.lwv", "--cuts", dir / "replay/cuts.json",
                            "--out", dir / "replay/contours.json"});
  CHECK_MESSAGE(seg.code == 0, seg.err);
  CHECK(contours_from_json(read(dir / "replay/contours.json")).slices.size() == 8);
}

TEST_CASE("cuts without a boundary are a validation error") {
  TempDir dir;
  write_cylinder(dir);
  write(dir / "bare.json", R"({"segments":[{"first":0,"last":7,"cuts":[{"p0":[14,32],"p1":[50,32]},)"
                           R"({"p0":[32,14],"p1":[32,50]}]}]})");
  const auto r = run_cli({"segment", "--volume", dir / "cyl.lwv", "--cuts", dir / "bare.json", "--out", dir / "o.json"});
  CHECK(r.code == cli::kExitValidation);
  CHECK(r.err.find("no boundary") != std::string::npos);
}

TEST_CASE("unknown subcommand and no subcommand fail") {
  CHECK(run_cli({}).code != 0);
  CHECK(run_cli({"frobnicate"}).code != 0);
}

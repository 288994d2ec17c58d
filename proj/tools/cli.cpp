#include "cli.hpp"

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "livewire/cost_model.hpp"
#include "livewire/image_ops.hpp"
#include "livewire/livewire3d.hpp"
#include "livewire/mesh.hpp"
#include "livewire/metrics.hpp"
#include "livewire/volume_io.hpp"
#include "server.hpp"

namespace livewire::cli {

namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

CostWeights parse_weights(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InvalidArgument("weights must be numbers, got '" + item + "'");
    }
  }
  if (values.size() != 4) throw InvalidArgument("--weights needs 4 values: wG,wL,wD,wS");
  CostWeights w;
  w.gradient = values[0];
  w.laplacian = values[1];
  w.direction = values[2];
  w.deviation = values[3];
  w.validate();
  return w;
}

std::vector<std::pair<std::string, double>> parse_params(const std::vector<std::string>& items) {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw InvalidArgument("filter parameter '" + item + "' is not key=value");
    try {
      std::size_t used = 0;
      const std::string value = item.substr(eq + 1);
      const double v = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
      out.emplace_back(item.substr(0, eq), v);
    } catch (const std::exception&) {
      throw InvalidArgument("filter parameter '" + item + "' has a non-numeric value");
    }
  }
  return out;
}

TrainedMapping mapping_from_mask(const Volume& v, int slice, const Image& mask, const CostWeights& weights) {
  if (mask.size() != v.slice_size()) throw InvalidArgument("training mask does not match the slice dimensions");
  Mask painted(mask.size());
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask(x, y) != 0) painted.set(x, y);
  const StaticCostField field = static_cost(v.slice(slice), weights);
  return train_mapping(painted_samples(field, painted));
}

struct SegmentArgs {
  std::string volume, cuts, out, train, weights, stats;
  double safety = 1.5;
  int train_slice = -1;
  int wiggle = kDefaultWiggleRadius;
  bool no_strip = false;
};

int cmd_segment(const SegmentArgs& a, std::ostream& err) {
  const Volume v = load_volume(a.volume);
  const auto segments = parse_cuts_json(read_text(a.cuts));
  SegmentationOptions o;
  if (!a.weights.empty()) o.weights = parse_weights(a.weights);
  o.strip.safety_factor = a.safety;
  o.wiggle_radius = a.wiggle;
  o.restrict_to_strip = !a.no_strip;
  std::optional<TrainedMapping> mapping;
  if (!a.train.empty()) {
    if (segments.empty()) throw InvalidArgument("cuts file defines no segments");
    const int slice = a.train_slice >= 0 ? a.train_slice : segments.front().first;
    if (slice >= v.depth()) throw InvalidArgument("training slice out of range");
    mapping = mapping_from_mask(v, slice, load_pgm(a.train), o.weights);
    o.mapping = &*mapping;
  }
  o.progress = [&err](int slice, int done, int total) {
    err << "slice " << slice << " done (" << done << "/" << total << ")\n";
  };
  const auto result = segment_volume(v, segments, o);
  save_contours(result.contours, a.out);
  if (!a.stats.empty()) {
    std::ostringstream s;
    s << "slice,finalized_nodes,search_area,strip_width,millis\n";
    for (const auto& st : result.stats) {
      s << st.slice << ',' << st.finalized_nodes << ',' << st.search_area << ',' << st.strip_width << ',' << st.millis
        << '\n';
    }
    write_text(a.stats, s.str());
  }
  return kExitOk;
}

struct MeshArgs {
  std::string contours, out;
  int samples = 64;
  double arc_window = 0.0;
};

int cmd_mesh(const MeshArgs& a) {
  const ContourSet c = load_contours(a.contours);
  MeshOptions o;
  o.samples = a.samples;
  if (a.arc_window > 0) o.arc_window_frac = a.arc_window;
  write_text(a.out, to_obj(reconstruct(c, o)));
  return kExitOk;
}

struct EvalArgs {
  std::vector<std::string> runs;
  std::string report, summary;
  int width = 0;
  int height = 0;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  if (a.runs.size() < 2) throw InvalidArgument("eval needs at least 2 runs, got " + std::to_string(a.runs.size()));
  std::vector<RunResult> runs;
  for (const auto& path : a.runs) {
    RunResult r = run_from_json(read_text(path));
    if (r.id.empty()) r.id = fs::path(path).stem().string();
    runs.push_back(std::move(r));
  }
  GridSize size = bounding_size(runs);
  if (a.width > 0) size.width = a.width;
  if (a.height > 0) size.height = a.height;
  std::vector<PairError> pairs;
  const ErrorProfile profile = evaluate_runs(runs, size, &pairs);
  std::ostringstream csv;
  write_pairs_csv(pairs, csv);
  write_text(a.report, csv.str());
  const std::string summary = summary_json(profile);
  if (!a.summary.empty()) {
    write_text(a.summary, summary);
  } else {
    out << summary;
  }
  return kExitOk;
}

struct FilterArgs {
  std::string volume, kind, out;
  std::vector<std::string> params;
};

int cmd_filter(const FilterArgs& a) {
  const FilterSpec spec = make_filter(a.kind, parse_params(a.params));
  validate(spec);
  Volume v = load_volume(a.volume);
  for (int k = 0; k < v.depth(); ++k) v.set_slice(k, apply_filter(v.slice(k), spec));
  save_volume(v, a.out);
  return kExitOk;
}

struct ServeArgs {
  std::string address = "127.0.0.1";
  int port = 8080;
  std::string root;
};

service::WebSocketServer* g_server = nullptr;

int cmd_serve(const ServeArgs& a, std::ostream& err) {
  if (a.port < 0 || a.port > 65535) throw InvalidArgument("port must be in [0,65535]");
  service::ServiceConfig config;
  if (!a.root.empty()) config.data_root = fs::path(a.root);
  service::WebSocketServer server(a.address, static_cast<unsigned short>(a.port), config);
  err << "listening on ws://" << a.address << ':' << server.port() << '\n';
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  server.run();
  g_server = nullptr;
  return kExitOk;
}

struct ReplayArgs {
  std::string phantom = "cylinder";
  std::string out_dir, report;
  double noise = 4.0;
  std::uint64_t phantom_seed = 1;
  int runs = 3;
  double jitter = 1.0;
  std::uint64_t seed = 1;
  bool train = false;
  double tolerance = 1.5;
  int initial_seeds = 0;
};

int cmd_replay(const ReplayArgs& a, std::ostream& out) {
  if (a.runs < 2) throw InvalidArgument("replay needs at least 2 runs");
  PhantomSpec spec;
  const PhantomKind kind = parse_phantom_kind(a.phantom);
  if (kind == PhantomKind::TwoEdgePlate) spec = PhantomSpec::two_edge_plate();
  spec.kind = kind;
  spec.noise_sigma = a.noise;
  spec.seed = a.phantom_seed;
  const Phantom phantom(spec);

  UserStrategy strategy;
  strategy.jitter_sigma = a.jitter;
  strategy.tolerance = a.tolerance;
  strategy.initial_seeds = a.initial_seeds > 0 ? a.initial_seeds : (kind == PhantomKind::TwoEdgePlate ? 2 : 4);
  std::optional<TrainedMapping> mapping;
  if (a.train) {
    int k = 0;
    while (phantom.ground_truth_closed() && !phantom.cross_section(k)) ++k;
    const Polyline gt = phantom.ground_truth_pixels(k);
    const Mask painted = rasterize_polyline({spec.width, spec.height}, gt, phantom.ground_truth_closed());
    const StaticCostField field = static_cost(phantom.volume().slice(k), strategy.weights);
    mapping = train_mapping(painted_samples(field, painted));
    strategy.mapping = &*mapping;
  }

  fs::create_directories(a.out_dir);
  save_volume(phantom.volume(), fs::path(a.out_dir) / "phantom.lwv");
  if (phantom.ground_truth_closed()) {
    // Analytic cut boundaries, ready for `segment`.
    int first = 0;
    while (first < spec.depth && !phantom.cross_section(first)) ++first;
    int last = first;
    while (last + 1 < spec.depth && phantom.cross_section(last + 1)) ++last;
    if (first < spec.depth) {
      write_text(fs::path(a.out_dir) / "cuts.json",
                 cuts_to_json({analytic_segment(phantom, perpendicular_cuts(phantom), first, last)}));
    }
  }
  std::vector<RunResult> runs;
  nlohmann::json summary = {{"phantom", a.phantom}, {"runs", nlohmann::json::array()}};
  for (int i = 0; i < a.runs; ++i) {
    strategy.rng_seed = a.seed + static_cast<std::uint64_t>(i);
    RunResult r = scripted_user(phantom, strategy, "run" + std::to_string(i + 1));
    write_text(fs::path(a.out_dir) / (r.id + ".json"), run_to_json(r));
    summary["runs"].push_back({{"id", r.id},
                               {"seed_points", r.seed_points},
                               {"auto_corrections", r.auto_corrections},
                               {"converged", r.converged},
                               {"message", r.message}});
    runs.push_back(std::move(r));
  }
  std::vector<PairError> pairs;
  const ErrorProfile profile = evaluate_runs(runs, {spec.width, spec.height}, &pairs);
  if (!a.report.empty()) {
    std::ostringstream csv;
    write_pairs_csv(pairs, csv);
    write_text(a.report, csv.str());
  }
  summary["errors"] = nlohmann::json::parse(summary_json(profile));
  out << summary.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Live-wire boundary extraction: 3D segmentation, meshing, evaluation and interactive service", "livewire"};
  app.require_subcommand(1);

  SegmentArgs seg;
  auto* segment = app.add_subcommand("segment", "Segment a volume slice by slice from orthogonal-cut boundaries");
  segment->add_option("--volume", seg.volume, "LWV1 volume or PGM manifest")->required();
  segment->add_option("--cuts", seg.cuts, "Cut definitions JSON")->required();
  segment->add_option("--out", seg.out, "Output contour JSON")->required();
  segment->add_option("--safety", seg.safety, "Strip safety factor in [1.1, 2.0]")->capture_default_str();
  segment->add_option("--train", seg.train, "PGM mask of painted boundary pixels used for training");
  segment->add_option("--train-slice", seg.train_slice, "Slice the training mask was painted on");
  segment->add_option("--weights", seg.weights, "wG,wL,wD,wS");
  segment->add_option("--wiggle", seg.wiggle, "Crossing merge radius in columns")->capture_default_str();
  segment->add_option("--stats", seg.stats, "Write per-slice search statistics as CSV");
  segment->add_flag("--no-strip", seg.no_strip, "Search the whole slice on every slice");

  MeshArgs mesh;
  auto* mesh_cmd = app.add_subcommand("mesh", "Build a band mesh from a contour stack and write OBJ");
  mesh_cmd->add_option("--contours", mesh.contours, "Contour JSON")->required();
  mesh_cmd->add_option("--out", mesh.out, "Output OBJ")->required();
  mesh_cmd->add_option("--samples", mesh.samples, "Samples per contour")->capture_default_str();
  mesh_cmd->add_option("--arc-window", mesh.arc_window, "Search window as a fraction of the circumference");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Mutual distance-transform error between segmentation runs");
  eval->add_option("--runs", ev.runs, "Contour or run JSON files")->required();
  eval->add_option("--report", ev.report, "Pairwise error CSV")->required();
  eval->add_option("--summary", ev.summary, "Per-slice summary JSON (default: stdout)");
  eval->add_option("--width", ev.width, "Image width (default: contour bounding box)");
  eval->add_option("--height", ev.height, "Image height (default: contour bounding box)");

  FilterArgs fa;
  auto* filter = app.add_subcommand("filter", "Filter every slice of a volume");
  filter->add_option("--volume", fa.volume, "Input volume")->required();
  filter->add_option("--kind", fa.kind, "anisotropic_diffusion | contrast | histogram_eq | unsharp_mask")->required();
  filter->add_option("--params", fa.params, "key=value parameters");
  filter->add_option("--out", fa.out, "Output LWV1 volume")->required();

  ServeArgs sa;
  auto* serve = app.add_subcommand("serve", "Run the interactive WebSocket session service");
  serve->add_option("--port", sa.port, "TCP port (0 picks a free one)")->capture_default_str();
  serve->add_option("--address", sa.address, "Listen address")->capture_default_str();
  serve->add_option("--root", sa.root, "Restrict loadable files to this directory");

  ReplayArgs ra;
  auto* replay = app.add_subcommand("replay", "Run scripted-user segmentations of a synthetic phantom");
  replay->add_option("--phantom", ra.phantom, "cylinder | cone | two_edge_plate | ellipsoid")->capture_default_str();
  replay->add_option("--noise", ra.noise, "Phantom noise sigma")->capture_default_str();
  replay->add_option("--phantom-seed", ra.phantom_seed, "Phantom noise seed")->capture_default_str();
  replay->add_option("--runs", ra.runs, "Number of runs")->capture_default_str();
  replay->add_option("--jitter", ra.jitter, "Seed placement jitter sigma")->capture_default_str();
  replay->add_option("--seed", ra.seed, "First run's RNG seed")->capture_default_str();
  replay->add_option("--tolerance", ra.tolerance, "Wire deviation that triggers a correction")->capture_default_str();
  replay->add_option("--initial-seeds", ra.initial_seeds, "Seeds placed before corrections");
  replay->add_flag("--train", ra.train, "Train the cost mapping on the true boundary first");
  replay->add_option("--out-dir", ra.out_dir, "Directory for the phantom and run files")->required();
  replay->add_option("--report", ra.report, "Pairwise error CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    err << "error: " << e.what() << "\n\n";
    const auto selected = app.get_subcommands();
    err << (selected.empty() ? app.help() : selected.front()->help());
    return kExitIo;
  }

  try {
    if (*segment) return cmd_segment(seg, err);
    if (*mesh_cmd) return cmd_mesh(mesh);
    if (*eval) return cmd_eval(ev, out);
    if (*filter) return cmd_filter(fa);
    if (*serve) return cmd_serve(sa, err);
    if (*replay) return cmd_replay(ra, out);
  } catch (const TopologyError& e) {
    err << "error: topology violation on slice " << e.slice() << ": " << e.what() << '\n';
    return kExitValidation;
  } catch (const OrderingError& e) {
    err << "error: cut ordering: " << e.what() << '\n';
    return kExitValidation;
  } catch (const UnreachableSeedError& e) {
    err << "error: unreachable seed on slice " << e.slice() << ": " << e.what() << '\n';
    return kExitValidation;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitIo;
}

}  // namespace livewire::cli

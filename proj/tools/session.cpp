#include "session.hpp"

#include <algorithm>
#include <boost/beast/core/detail/base64.hpp>
#include <regex>

#include "livewire/cost_model.hpp"
#include "livewire/image_ops.hpp"

namespace livewire::service {

using nlohmann::json;

namespace {

std::string base64(const std::string& bytes) {
  namespace b64 = boost::beast::detail::base64;
  std::string out(b64::encoded_size(bytes.size()), '\0');
  out.resize(b64::encode(out.data(), bytes.data(), bytes.size()));
  return out;
}

json points_json(const Polyline& points) {
  json out = json::array();
  for (Pixel p : points) out.push_back({p.x, p.y});
  return out;
}

json image_payload(const Image& img) {
  return {{"width", img.width()}, {"height", img.height()}, {"encoding", "pgm-base64"}, {"data", base64(encode_pgm(img))}};
}

int int_field(const json& msg, const char* key) {
  if (!msg.contains(key) || !msg.at(key).is_number_integer()) {
    throw ProtocolError("bad_request", std::string("field '") + key + "' must be an integer");
  }
  return msg.at(key).get<int>();
}

double real_field(const json& msg, const char* key) {
  if (!msg.contains(key) || !msg.at(key).is_number()) {
    throw ProtocolError("bad_request", std::string("field '") + key + "' must be a number");
  }
  return msg.at(key).get<double>();
}

const char* error_code(const std::exception& e) {
  if (dynamic_cast<const TopologyError*>(&e)) return "topology";
  if (dynamic_cast<const OrderingError*>(&e)) return "ordering";
  if (dynamic_cast<const UnreachableSeedError*>(&e)) return "unreachable";
  if (dynamic_cast<const UnreachableError*>(&e)) return "unreachable";
  if (dynamic_cast<const Cancelled*>(&e)) return "cancelled";
  if (dynamic_cast<const MeshError*>(&e)) return "mesh";
  if (dynamic_cast<const FormatError*>(&e)) return "format_error";
  if (dynamic_cast<const IoError*>(&e)) return "io_error";
  if (dynamic_cast<const InvalidArgument*>(&e)) return "invalid_argument";
  return "internal";
}

}  // namespace

std::optional<std::uint64_t> salvage_seq(const std::string& text) {
  static const std::regex re(R"re("seq"\s*:\s*([0-9]{1,19}))re");
  std::smatch m;
  if (std::regex_search(text, m, re)) return std::stoull(m[1].str());
  return std::nullopt;
}

// Options ---------------------------------------------------------------------------

void OptionsState::validate() const {
  weights.validate();
  StripParams{safety_factor}.validate();
  if (freeze_after_ms < 1) throw InvalidArgument("freeze_after must be at least 1 ms");
  if (heating_period_ms < 1) throw InvalidArgument("heating_period must be at least 1 ms");
  if (brush_sizes.empty()) throw InvalidArgument("brush_sizes must not be empty");
  for (int b : brush_sizes) {
    if (b < 1 || b > 64) throw InvalidArgument("brush sizes must be in [1,64]");
  }
  if (samples < 3) throw InvalidArgument("samples must be at least 3");
  if (arc_window_frac && (!(*arc_window_frac > 0) || *arc_window_frac > 0.5)) {
    throw InvalidArgument("arc_window_frac must be in (0, 0.5]");
  }
}

json OptionsState::to_json() const {
  json j = {{"w_G", weights.gradient},
            {"w_L", weights.laplacian},
            {"w_D", weights.direction},
            {"w_S", weights.deviation},
            {"cooling", cooling},
            {"freeze_after", freeze_after_ms},
            {"heating", heating},
            {"heating_period", heating_period_ms},
            {"safety_factor", safety_factor},
            {"brush_sizes", brush_sizes},
            {"samples", samples}};
  j["arc_window_frac"] = arc_window_frac ? json(*arc_window_frac) : json(nullptr);
  return j;
}

OptionsState OptionsState::patched(const json& patch) const {
  OptionsState o = *this;
  try {
    for (const auto& [key, value] : patch.items()) {
      if (key == "w_G") o.weights.gradient = value.get<double>();
      else if (key == "w_L") o.weights.laplacian = value.get<double>();
      else if (key == "w_D") o.weights.direction = value.get<double>();
      else if (key == "w_S") o.weights.deviation = value.get<double>();
      else if (key == "cooling") o.cooling = value.get<bool>();
      else if (key == "freeze_after") o.freeze_after_ms = value.get<int>();
      else if (key == "heating") o.heating = value.get<bool>();
      else if (key == "heating_period") o.heating_period_ms = value.get<int>();
      else if (key == "safety_factor") o.safety_factor = value.get<double>();
      else if (key == "brush_sizes") o.brush_sizes = value.get<std::vector<int>>();
      else if (key == "samples") o.samples = value.get<int>();
      else if (key == "arc_window_frac") {
        o.arc_window_frac = value.is_null() ? std::nullopt : std::optional<double>(value.get<double>());
      } else {
        throw ProtocolError("bad_request", "unknown option '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ProtocolError("bad_request", std::string("option has the wrong type: ") + e.what());
  }
  o.validate();
  return o;
}

// Session ------------------------------------------------------------------------------

ServiceSession::ServiceSession(Sink sink, ServiceConfig config) : sink_(std::move(sink)), config_(std::move(config)) {
  worker_ = std::thread([this] {
    std::unique_lock lk(queue_mutex_);
    for (;;) {
      queue_cv_.wait(lk, [this] { return closing_ || !queue_.empty(); });
      if (closing_) return;
      std::string text = std::move(queue_.front());
      queue_.pop_front();
      queue_busy_ = true;
      lk.unlock();
      handle(text);
      lk.lock();
      queue_busy_ = false;
      queue_cv_.notify_all();
    }
  });
}

ServiceSession::~ServiceSession() { close(); }

void ServiceSession::post(std::string text) {
  {
    std::lock_guard lk(queue_mutex_);
    if (closing_) return;
    queue_.push_back(std::move(text));
  }
  queue_cv_.notify_all();
}

void ServiceSession::wait_idle() {
  {
    std::unique_lock lk(queue_mutex_);
    queue_cv_.wait(lk, [this] { return closing_ || (queue_.empty() && !queue_busy_); });
  }
  if (job_.joinable()) job_.join();
  if (engine_) engine_->wait_idle();
  if (cut_engine_) cut_engine_->wait_idle();
}

void ServiceSession::close() {
  {
    std::lock_guard lk(queue_mutex_);
    closing_ = true;
    queue_.clear();
  }
  queue_cv_.notify_all();
  if (worker_.joinable() && worker_.get_id() != std::this_thread::get_id()) worker_.join();
  stop_job();
  engine_.reset();
  cut_engine_.reset();
}

void ServiceSession::stop_job() {
  if (job_.joinable()) {
    job_.request_stop();
    job_.join();
  }
}

void ServiceSession::send(const json& msg) {
  const std::string text = msg.dump();
  std::lock_guard lk(send_mutex_);
  sink_(text);
}

void ServiceSession::send_error(std::optional<std::uint64_t> seq, const std::string& code, const std::string& message) {
  send({{"type", "error"}, {"seq", seq ? json(*seq) : json(nullptr)}, {"code", code}, {"message", message}});
}

void ServiceSession::ack(std::uint64_t seq, const std::string& of) { send({{"type", "ack"}, {"seq", seq}, {"of", of}}); }

void ServiceSession::handle(const std::string& text) {
  json msg;
  try {
    msg = json::parse(text);
  } catch (const json::parse_error& e) {
    send_error(salvage_seq(text), "parse_error", std::string("malformed JSON: ") + e.what());
    return;
  }
  if (!msg.is_object()) {
    send_error(std::nullopt, "bad_request", "message must be a JSON object");
    return;
  }
  std::optional<std::uint64_t> seq;
  if (msg.contains("seq") && msg.at("seq").is_number_unsigned()) seq = msg.at("seq").get<std::uint64_t>();
  if (!msg.contains("type") || !msg.at("type").is_string()) {
    send_error(seq, "bad_request", "message needs a string 'type'");
    return;
  }
  if (!seq) {
    send_error(std::nullopt, "bad_request", "message needs a non-negative integer 'seq'");
    return;
  }
  if (any_seq_ && *seq <= last_seq_) {
    send_error(seq, "bad_seq", "seq must strictly increase (last was " + std::to_string(last_seq_) + ")");
    return;
  }
  any_seq_ = true;
  last_seq_ = *seq;
  const std::string type = msg.at("type").get<std::string>();
  try {
    dispatch(type, msg, *seq);
  } catch (const ProtocolError& e) {
    send_error(seq, e.code(), e.what());
  } catch (const std::exception& e) {
    send_error(seq, error_code(e), e.what());
  }
}

void ServiceSession::dispatch(const std::string& type, const json& msg, std::uint64_t seq) {
  if (type == "load") return on_load(msg, seq);
  if (type == "select_slice") return on_select_slice(int_field(msg, "index"), seq);
  if (type == "seed") return on_engine(RequestKind::SetSeed, msg, seq);
  if (type == "cursor") return on_engine(RequestKind::SetTarget, msg, seq);
  if (type == "commit") return on_engine(RequestKind::Commit, msg, seq);
  if (type == "close") return on_engine(RequestKind::Close, msg, seq);
  if (type == "heat") return on_engine(RequestKind::HeatStep, msg, seq);
  if (type == "cancel") return on_engine(RequestKind::Cancel, msg, seq);
  if (type == "paint") return on_paint(msg, seq);
  if (type == "clear_paint") {
    volume();
    paint_ = Mask(volume().slice_size());
    return ack(seq, type);
  }
  if (type == "train") return on_train(seq);
  if (type == "view_costs") {
    volume();
    json reply = image_payload(cost_preview(*field_));
    reply["type"] = "costs";
    reply["seq"] = seq;
    reply["trained"] = mapping_.has_value();
    return send(reply);
  }
  if (type == "cut_begin") {
    volume();
    cut_start_ = Point2{real_field(msg, "x"), real_field(msg, "y")};
    return ack(seq, type);
  }
  if (type == "cut_end") return on_cut_end(msg, seq);
  if (type == "segment_cut") return on_segment_cut(msg, seq);
  if (type == "segment3d") return on_segment3d(msg, seq);
  if (type == "set_options") {
    json patch = msg;
    patch.erase("type");
    patch.erase("seq");
    options_ = options_.patched(patch);
    if (volume_) rebuild_engine();
    cut_engine_.reset();
    cut_engine_id_ = 0;
    return send({{"type", "ack"}, {"seq", seq}, {"of", type}, {"options", options_.to_json()}});
  }
  if (type == "get_mesh") return on_get_mesh(msg, seq);
  throw ProtocolError("unknown_type", "unknown message type '" + type + "'");
}

const Volume& ServiceSession::volume() const {
  if (!volume_) throw ProtocolError("no_volume", "no volume loaded");
  return *volume_;
}

Pixel ServiceSession::pixel_of(const json& msg) const { return {int_field(msg, "x"), int_field(msg, "y")}; }

std::unique_ptr<LiveWireSession> ServiceSession::make_engine(std::shared_ptr<const StaticCostField> field,
                                                             std::optional<int> cut_id) {
  SessionOptions so;
  so.weights = options_.weights;
  so.cooling = options_.cooling;
  so.freeze_after = std::chrono::milliseconds(options_.freeze_after_ms);
  so.heating_timer = options_.heating;
  so.heating_period = std::chrono::milliseconds(options_.heating_period_ms);
  so.chunk = config_.engine_chunk;
  auto listener = [this, cut_id](const BoundaryEvent& ev) {
    json msg = {{"seq", ev.seq}};
    if (cut_id) msg["cut_id"] = *cut_id;
    switch (ev.kind) {
      case EventKind::WireUpdated:
        msg["type"] = "wire";
        msg["points"] = points_json(ev.points);
        break;
      case EventKind::SegmentCommitted:
        msg["type"] = "segment_committed";
        msg["points"] = points_json(ev.points);
        break;
      case EventKind::AutoSeed:
        msg["type"] = "auto_seed";
        msg["x"] = ev.pixel.x;
        msg["y"] = ev.pixel.y;
        break;
      case EventKind::BoundaryClosed: {
        msg["type"] = "boundary_closed";
        msg["points"] = points_json(ev.points);
        if (cut_id) {
          Polyline loop = ev.points;
          if (loop.size() > 1 && loop.back() == loop.front()) loop.pop_back();
          std::lock_guard lk(cuts_mutex_);
          if (auto it = cuts_.find(*cut_id); it != cuts_.end()) it->second.boundary = std::move(loop);
        }
        break;
      }
      case EventKind::SearchComplete:
        return;
      case EventKind::Error:
        msg["type"] = "error";
        msg["code"] = "engine";
        msg["message"] = ev.message;
        break;
    }
    send(msg);
  };
  return std::make_unique<LiveWireSession>(std::move(field), so, listener);
}

void ServiceSession::rebuild_engine() {
  engine_.reset();
  field_ = std::make_shared<const StaticCostField>(
      static_cost(volume().slice(slice_), options_.weights, mapping_ ? &*mapping_ : nullptr));
  engine_ = make_engine(field_, std::nullopt);
}

void ServiceSession::on_load(const json& msg, std::uint64_t seq) {
  if (!msg.contains("path") || !msg.at("path").is_string()) throw ProtocolError("bad_request", "load needs a 'path'");
  std::filesystem::path path = msg.at("path").get<std::string>();
  if (config_.data_root) {
    std::error_code ec;
    const auto root = std::filesystem::weakly_canonical(*config_.data_root, ec);
    const auto full = std::filesystem::weakly_canonical(path.is_absolute() ? path : root / path, ec);
    const auto rel = full.lexically_relative(root);
    if (ec || rel.empty() || *rel.begin() == "..") throw ProtocolError("forbidden", "path outside the data root");
    path = full;
  }
  Volume v = load_volume(path);
  stop_job();
  cut_engine_.reset();
  cut_engine_id_ = 0;
  engine_.reset();
  {
    std::lock_guard lk(cuts_mutex_);
    cuts_.clear();
  }
  {
    std::lock_guard lk(result_mutex_);
    contours_.reset();
  }
  cut_start_.reset();
  mapping_.reset();
  volume_ = std::move(v);
  on_select_slice(0, seq);
}

void ServiceSession::on_select_slice(int index, std::uint64_t seq) {
  const Volume& v = volume();
  if (index < 0 || index >= v.depth()) {
    throw ProtocolError("bad_request", "slice index " + std::to_string(index) + " outside [0," +
                                           std::to_string(v.depth() - 1) + "]");
  }
  slice_ = index;
  paint_ = Mask(v.slice_size());
  rebuild_engine();
  json reply = image_payload(v.slice(index));
  reply["type"] = "slice";
  reply["seq"] = seq;
  reply["index"] = index;
  reply["depth"] = v.depth();
  send(reply);
}

void ServiceSession::on_engine(RequestKind kind, const json& msg, std::uint64_t seq) {
  volume();
  EngineRequest req{kind, {}, seq};
  if (kind == RequestKind::SetSeed || kind == RequestKind::SetTarget) req.pixel = pixel_of(msg);
  engine_->submit(req);
}

void ServiceSession::on_paint(const json& msg, std::uint64_t seq) {
  const Volume& v = volume();
  const int brush = int_field(msg, "brush");
  if (std::find(options_.brush_sizes.begin(), options_.brush_sizes.end(), brush) == options_.brush_sizes.end()) {
    throw ProtocolError("bad_request", "brush size " + std::to_string(brush) + " is not one of the configured sizes");
  }
  if (!msg.contains("points") || !msg.at("points").is_array()) throw ProtocolError("bad_request", "paint needs 'points'");
  Mask stroke(v.slice_size());
  for (const auto& p : msg.at("points")) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() || !p[1].is_number_integer()) {
      throw ProtocolError("bad_request", "paint points must be [x,y] integer pairs");
    }
    const Pixel px{p[0].get<int>(), p[1].get<int>()};
    if (!v.slice_size().contains(px)) throw ProtocolError("bad_request", "paint point outside the slice");
    stroke.set(px);
  }
  const Mask dilated = dilate(stroke, (brush - 1) / 2);
  for (int y = 0; y < dilated.height(); ++y)
    for (int x = 0; x < dilated.width(); ++x)
      if (dilated.test(x, y)) paint_->set(x, y);
  send({{"type", "ack"}, {"seq", seq}, {"of", "paint"}, {"painted", paint_->count()}});
}

void ServiceSession::on_train(std::uint64_t seq) {
  volume();
  const auto samples = painted_samples(*field_, *paint_);
  mapping_ = train_mapping(samples);
  rebuild_engine();
  json table = json::array();
  for (auto v : mapping_->table) table.push_back(v);
  send({{"type", "ack"}, {"seq", seq}, {"of", "train"}, {"samples", samples.size()}, {"table", table}});
}

void ServiceSession::on_cut_end(const json& msg, std::uint64_t seq) {
  const Volume& v = volume();
  if (!cut_start_) throw ProtocolError("bad_request", "cut_end without cut_begin");
  CutLine line{*cut_start_, {real_field(msg, "x"), real_field(msg, "y")}};
  line.validate();
  for (Point2 p : {line.p0, line.p1}) {
    if (p.x < 0 || p.y < 0 || p.x > v.width() - 1 || p.y > v.height() - 1) {
      throw ProtocolError("bad_request", "cut endpoints must lie inside the slice");
    }
  }
  cut_start_.reset();
  Image img = build_orthogonal_cut(v, line);
  int id;
  {
    std::lock_guard lk(cuts_mutex_);
    id = next_cut_id_++;
    cuts_[id] = Cut{line, img, {}};
  }
  json reply = image_payload(img);
  reply["type"] = "cut_image";
  reply["seq"] = seq;
  reply["cut_id"] = id;
  reply["p0"] = {line.p0.x, line.p0.y};
  reply["p1"] = {line.p1.x, line.p1.y};
  send(reply);
}

void ServiceSession::on_segment_cut(const json& msg, std::uint64_t seq) {
  volume();
  const int id = int_field(msg, "cut_id");
  if (!msg.contains("op") || !msg.at("op").is_string()) throw ProtocolError("bad_request", "segment_cut needs an 'op'");
  const std::string op = msg.at("op").get<std::string>();
  static const std::map<std::string, RequestKind> kinds{{"seed", RequestKind::SetSeed},
                                                        {"cursor", RequestKind::SetTarget},
                                                        {"commit", RequestKind::Commit},
                                                        {"close", RequestKind::Close},
                                                        {"heat", RequestKind::HeatStep},
                                                        {"cancel", RequestKind::Cancel}};
  const auto kind = kinds.find(op);
  if (kind == kinds.end()) throw ProtocolError("bad_request", "unknown segment_cut op '" + op + "'");
  if (cut_engine_id_ != id || !cut_engine_) {
    Image img;
    {
      std::lock_guard lk(cuts_mutex_);
      auto it = cuts_.find(id);
      if (it == cuts_.end()) throw ProtocolError("bad_request", "no cut with id " + std::to_string(id));
      img = it->second.image;
    }
    cut_engine_.reset();
    auto field = std::make_shared<const StaticCostField>(static_cost(img, options_.weights));
    cut_engine_ = make_engine(std::move(field), id);
    cut_engine_id_ = id;
  }
  EngineRequest req{kind->second, {}, seq};
  if (req.kind == RequestKind::SetSeed || req.kind == RequestKind::SetTarget) req.pixel = pixel_of(msg);
  cut_engine_->submit(req);
}

void ServiceSession::on_segment3d(const json& msg, std::uint64_t seq) {
  const Volume& v = volume();
  if (job_.joinable()) {
    // A finished job still needs joining before the next starts.
    job_.join();
  }
  if (!msg.contains("segments") || !msg.at("segments").is_array()) {
    throw ProtocolError("bad_request", "segment3d needs 'segments'");
  }
  std::vector<TopologySegment> segments;
  try {
    for (const auto& s : msg.at("segments")) {
      TopologySegment seg;
      seg.first = s.at("first").get<int>();
      seg.last = s.at("last").get<int>();
      for (const auto& c : s.at("cuts")) {
        if (c.is_number_integer()) {
          std::lock_guard lk(cuts_mutex_);
          auto it = cuts_.find(c.get<int>());
          if (it == cuts_.end()) throw ProtocolError("bad_request", "no cut with id " + c.dump());
          if (it->second.boundary.empty()) {
            throw ProtocolError("bad_request", "cut " + c.dump() + " has no closed boundary yet");
          }
          seg.cuts.push_back({it->second.line, it->second.boundary});
        } else {
          json wrapper = {{"segments", {{{"first", seg.first}, {"last", seg.last}, {"cuts", {c}}}}}};
          seg.cuts.push_back(parse_cuts_json(wrapper.dump()).front().cuts.front());
        }
      }
      segments.push_back(std::move(seg));
    }
  } catch (const json::exception& e) {
    throw ProtocolError("bad_request", std::string("malformed segments: ") + e.what());
  }

  SegmentationOptions so;
  so.weights = options_.weights;
  so.strip.safety_factor = options_.safety_factor;
  if (msg.contains("options")) {
    const auto& o = msg.at("options");
    if (o.contains("safety_factor")) so.strip.safety_factor = o.at("safety_factor").get<double>();
    if (o.contains("restrict_to_strip")) so.restrict_to_strip = o.at("restrict_to_strip").get<bool>();
    if (o.contains("wiggle_radius")) so.wiggle_radius = o.at("wiggle_radius").get<int>();
  }
  so.strip.validate();
  std::optional<TrainedMapping> mapping = mapping_;
  job_ = std::jthread([this, &v, segments = std::move(segments), so, mapping, seq](std::stop_token stop) mutable {
    so.stop = stop;
    so.mapping = mapping ? &*mapping : nullptr;
    so.progress = [this, seq](int slice, int done, int total) {
      send({{"type", "progress"}, {"seq", seq}, {"slice", slice}, {"done", done}, {"total", total}});
    };
    try {
      auto result = segment_volume(v, segments, so);
      json reply = json::parse(contours_to_json(result.contours));
      reply["type"] = "contours";
      reply["seq"] = seq;
      json stats = json::array();
      for (const auto& s : result.stats) {
        stats.push_back({{"slice", s.slice},
                         {"finalized_nodes", s.finalized_nodes},
                         {"search_area", s.search_area},
                         {"strip_width", s.strip_width},
                         {"millis", s.millis}});
      }
      reply["stats"] = stats;
      {
        std::lock_guard lk(result_mutex_);
        contours_ = std::move(result.contours);
      }
      send(reply);
    } catch (const std::exception& e) {
      send_error(seq, error_code(e), e.what());
    }
  });
}

void ServiceSession::on_get_mesh(const json& msg, std::uint64_t seq) {
  MeshOptions mo;
  mo.samples = msg.contains("samples") ? int_field(msg, "samples") : options_.samples;
  mo.arc_window_frac = options_.arc_window_frac;
  std::optional<ContourSet> contours;
  {
    std::lock_guard lk(result_mutex_);
    contours = contours_;
  }
  if (!contours) throw ProtocolError("no_contours", "no 3D segmentation result to mesh");
  const Mesh mesh = reconstruct(*contours, mo);
  send({{"type", "mesh"},
        {"seq", seq},
        {"obj_text", to_obj(mesh)},
        {"vertices", mesh.vertices.size()},
        {"triangles", mesh.triangles.size()}});
}

}  // namespace livewire::service

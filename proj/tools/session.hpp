#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "livewire/engine.hpp"
#include "livewire/livewire3d.hpp"
#include "livewire/mesh.hpp"
#include "livewire/volume_io.hpp"

namespace livewire::service {

/// User-adjustable settings shared by every engine a session creates.
struct OptionsState {
  CostWeights weights;
  bool cooling = false;
  int freeze_after_ms = 1500;
  bool heating = false;
  int heating_period_ms = 1000;
  double safety_factor = 1.5;
  std::vector<int> brush_sizes{1, 3, 5};
  int samples = 64;
  std::optional<double> arc_window_frac;

  void validate() const;
  nlohmann::json to_json() const;
  /// Applies the keys present in `patch`; unknown keys are rejected.
  OptionsState patched(const nlohmann::json& patch) const;
};

struct ServiceConfig {
  /// When set, load paths must resolve inside this directory.
  std::optional<std::filesystem::path> data_root;
  /// Nodes the engine expands between request checks.
  std::size_t engine_chunk = 4096;
};

/// Protocol failure reported to the client as an error message.
class ProtocolError : public Error {
 public:
  ProtocolError(std::string code, const std::string& message) : Error(message), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

/// One client's state: loaded volume, 2D engine, cuts, training, 3D job.
///
/// Messages are JSON text with a `type` and a strictly increasing `seq`. Replies
/// and events go to the sink, which may be called from engine and job threads;
/// calls are serialised. handle() must be called from one thread at a time.
class ServiceSession {
 public:
  using Sink = std::function<void(const std::string&)>;

  explicit ServiceSession(Sink sink, ServiceConfig config = {});
  ~ServiceSession();
  ServiceSession(const ServiceSession&) = delete;
  ServiceSession& operator=(const ServiceSession&) = delete;

  void handle(const std::string& text);
  /// Queues a message for the session's own worker thread.
  void post(std::string text);
  /// Blocks until posted messages, engine requests and the 3D job are done.
  void wait_idle();
  /// Cancels running work and stops all threads. Idempotent.
  void close();

 private:
  struct Cut {
    CutLine line;
    Image image;
    Polyline boundary;
  };

  void dispatch(const std::string& type, const nlohmann::json& msg, std::uint64_t seq);
  void send(const nlohmann::json& msg);
  void send_error(std::optional<std::uint64_t> seq, const std::string& code, const std::string& message);
  void ack(std::uint64_t seq, const std::string& of);

  void on_load(const nlohmann::json& msg, std::uint64_t seq);
  void on_select_slice(int index, std::uint64_t seq);
  void on_engine(RequestKind kind, const nlohmann::json& msg, std::uint64_t seq);
  void on_paint(const nlohmann::json& msg, std::uint64_t seq);
  void on_train(std::uint64_t seq);
  void on_cut_end(const nlohmann::json& msg, std::uint64_t seq);
  void on_segment_cut(const nlohmann::json& msg, std::uint64_t seq);
  void on_segment3d(const nlohmann::json& msg, std::uint64_t seq);
  void on_get_mesh(const nlohmann::json& msg, std::uint64_t seq);

  const Volume& volume() const;
  void rebuild_engine();
  std::unique_ptr<LiveWireSession> make_engine(std::shared_ptr<const StaticCostField> field,
                                               std::optional<int> cut_id);
  Pixel pixel_of(const nlohmann::json& msg) const;
  void stop_job();

  Sink sink_;
  ServiceConfig config_;
  std::mutex send_mutex_;

  OptionsState options_;
  std::optional<Volume> volume_;
  int slice_ = 0;
  std::shared_ptr<const StaticCostField> field_;
  std::optional<Mask> paint_;
  std::optional<TrainedMapping> mapping_;
  std::unique_ptr<LiveWireSession> engine_;
  std::uint64_t last_seq_ = 0;
  bool any_seq_ = false;

  std::mutex cuts_mutex_;
  std::map<int, Cut> cuts_;
  int next_cut_id_ = 1;
  std::optional<Point2> cut_start_;
  std::unique_ptr<LiveWireSession> cut_engine_;
  int cut_engine_id_ = 0;

  std::mutex result_mutex_;
  std::optional<ContourSet> contours_;
  std::jthread job_;

  // post() worker
  std::mutex queue_mutex_;
  std::condition_variable queue_cv_;
  std::deque<std::string> queue_;
  bool queue_busy_ = false;
  bool closing_ = false;
  std::thread worker_;
};

/// Extracts a numeric "seq" from text that may not be valid JSON.
std::optional<std::uint64_t> salvage_seq(const std::string& text);

}  // namespace livewire::service

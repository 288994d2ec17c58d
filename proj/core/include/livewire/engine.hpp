#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "livewire/cost_model.hpp"
#include "livewire/grid.hpp"

namespace livewire {

/// Target or seed cannot be reached inside the search mask.
class UnreachableError : public Error {
 public:
  UnreachableError(const std::string& message, Pixel pixel) : Error(message), pixel_(pixel) {}
  Pixel pixel() const noexcept { return pixel_; }

 private:
  Pixel pixel_;
};

inline constexpr std::int64_t kUnreached = std::numeric_limits<std::int64_t>::max();

/// Single-source shortest-path tree over the 8-connected pixel graph.
struct PathTree {
  GridSize size;
  Pixel seed;
  std::vector<std::int64_t> cum_cost;
  /// Direction of the step that enters each pixel from its predecessor; -1 for the seed and unreached pixels.
  std::vector<std::int8_t> pred_dir;
  std::vector<std::uint8_t> finalized;
  std::size_t finalized_count = 0;

  std::int64_t cost(Pixel p) const { return cum_cost[size.index(p)]; }
  bool is_finalized(Pixel p) const { return size.contains(p) && finalized[size.index(p)] != 0; }
  std::optional<Pixel> predecessor(Pixel p) const;
};

/// Everything a search reads. The referenced objects must outlive the search.
struct SearchGraph {
  const StaticCostField* field = nullptr;
  CostWeights weights;
  const Mask* mask = nullptr;
  const HeatOverlay* heat = nullptr;
};

/// Resumable Dijkstra with a circular bucket queue over integer costs.
class DijkstraSearch {
 public:
  DijkstraSearch(const SearchGraph& graph, Pixel seed);

  /// Expands until `target` is finalized, the frontier is empty or `budget` nodes were
  /// finalized. Returns whether the target is finalized.
  bool expand_until(Pixel target, std::size_t budget = std::numeric_limits<std::size_t>::max());
  /// Finalizes up to `budget` more nodes; returns false once the frontier is exhausted.
  bool expand(std::size_t budget);
  void expand_all() { expand(std::numeric_limits<std::size_t>::max()); }
  bool complete() const { return pending_ == 0; }

  const PathTree& tree() const { return tree_; }
  PathTree take_tree() && { return std::move(tree_); }

 private:
  bool pop(std::size_t& index);
  void relax(std::size_t index);

  SearchGraph graph_;
  PathTree tree_;
  std::vector<PathStats> stats_;
  std::vector<std::vector<std::pair<std::int64_t, std::uint32_t>>> buckets_;
  std::size_t bucket_mask_ = 0;
  std::int64_t current_ = 0;
  std::size_t pending_ = 0;
};

/// Full or early-terminated shortest-path tree from `seed`.
PathTree compute_path_tree(const StaticCostField& field, const CostWeights& weights, Pixel seed,
                           const Mask* search_mask = nullptr, std::optional<Pixel> stop_at = std::nullopt,
                           const HeatOverlay* heat = nullptr);

/// Seed-to-target polyline; throws UnreachableError when target is not finalized.
Polyline reconstruct(const PathTree& tree, Pixel target);

/// Sum of edge costs along a polyline, carrying direction and path statistics as a search would.
std::int64_t path_cost(const StaticCostField& field, const Polyline& path, const CostWeights& weights,
                       const HeatOverlay* heat = nullptr);

/// Committed segments of one boundary.
struct Boundary {
  std::vector<Polyline> segments;
  bool closed = false;

  /// Segments concatenated with junction points listed once. Closed boundaries repeat the first point at the end.
  Polyline points() const;
};

/// Synchronous live-wire: seeds, wires, commits, heating and closing for one boundary.
class BoundaryTracer {
 public:
  BoundaryTracer(std::shared_ptr<const StaticCostField> field, CostWeights weights,
                 std::shared_ptr<const Mask> mask = nullptr);

  /// Starts a new boundary anchored at `p`.
  void set_seed(Pixel p);
  std::optional<Pixel> seed() const { return seed_; }
  std::optional<Pixel> first_seed() const { return first_seed_; }

  /// Live wire from the current seed to `target`.
  const Polyline& wire_to(Pixel target);
  const Polyline& current_wire() const { return wire_; }
  std::optional<Pixel> target() const { return target_; }

  /// Expands toward `target` by at most `budget` nodes. True once the wire can be
  /// reconstructed; throws UnreachableError when it never can.
  bool advance_towards(Pixel target, std::size_t budget);

  /// Commits the current wire; its end becomes the seed. Heat resets.
  const Polyline& commit();
  /// Commits the first `length` pixels of the current wire (used by cooling).
  const Polyline& commit_prefix(std::size_t length);

  /// Inflates the current wire's pixels one level and recomputes the wire.
  const Polyline& heat_step();
  const HeatOverlay& heat() const { return heat_; }

  /// Wires the current seed back to the first seed and marks the boundary closed.
  const Boundary& close();
  const Boundary& boundary() const { return boundary_; }

  /// Drops the current wire and heat, keeping committed segments.
  void cancel();

  /// Expands the current search tree further in the background.
  bool background_expand(std::size_t budget);

  /// Nodes finalized by all searches so far.
  std::size_t finalized_nodes() const;

  GridSize size() const { return field_->size(); }
  /// Incremented whenever the search tree is rebuilt.
  std::size_t generation() const { return generation_; }

 private:
  void restart_search();
  void check_inside(Pixel p, const char* what) const;

  std::shared_ptr<const StaticCostField> field_;
  CostWeights weights_;
  std::shared_ptr<const Mask> mask_;
  HeatOverlay heat_;
  std::optional<Pixel> seed_;
  std::optional<Pixel> first_seed_;
  std::optional<Pixel> target_;
  Polyline wire_;
  Boundary boundary_;
  std::unique_ptr<DijkstraSearch> search_;
  std::size_t retired_nodes_ = 0;
  std::size_t generation_ = 0;
};

// Cooling --------------------------------------------------------------------

/// Tracks how long each prefix of the live wire has stayed unchanged.
struct CoolingState {
  std::int64_t freeze_after = 1500;
  Polyline last_wire;
  /// stable_since[i]: tick since which the prefix of length i+1 has been unchanged.
  std::vector<std::int64_t> stable_since;
  std::size_t stable_prefix_len = 0;

  void reset() {
    last_wire.clear();
    stable_since.clear();
    stable_prefix_len = 0;
  }
};

struct CoolingFire {
  Pixel seed;
  std::size_t prefix_length;
};

/// Feeds the current wire at tick `now`. Fires at the end of the longest prefix
/// (at least 2 pixels) unchanged for `freeze_after` ticks, then resets the state.
std::optional<CoolingFire> cooling_tick(CoolingState& state, const Polyline& current_wire, std::int64_t now);

// Threaded session ---------------------------------------------------------------

enum class RequestKind { SetSeed, SetTarget, Commit, Close, HeatStep, Cancel };

struct EngineRequest {
  RequestKind kind;
  Pixel pixel{};
  std::uint64_t seq = 0;
};

enum class EventKind { WireUpdated, SegmentCommitted, AutoSeed, BoundaryClosed, SearchComplete, Error };

struct BoundaryEvent {
  EventKind kind;
  std::uint64_t seq = 0;
  Polyline points;
  Pixel pixel{};
  std::string message;
};

const char* to_string(EventKind kind);

struct SessionOptions {
  CostWeights weights;
  std::shared_ptr<const Mask> mask;
  bool cooling = false;
  std::chrono::milliseconds freeze_after{1500};
  bool heating_timer = false;
  std::chrono::milliseconds heating_period{1000};
  /// Nodes expanded between checks of the request buffer.
  std::size_t chunk = 4096;
};

class SessionClosed : public Error {
 public:
  SessionClosed() : Error("session closed") {}
};

/// Request-buffered live-wire engine running on its own worker thread.
///
/// submit() never blocks on computation. SET_TARGET requests coalesce: when
/// newer targets are waiting, older ones are dropped unanswered. Every other
/// request is processed exactly once, in order. Events reach the listener on
/// the worker thread, tagged with the sequence number of the request they answer.
class LiveWireSession {
 public:
  using Listener = std::function<void(const BoundaryEvent&)>;

  LiveWireSession(std::shared_ptr<const StaticCostField> field, SessionOptions options, Listener listener);
  ~LiveWireSession();
  LiveWireSession(const LiveWireSession&) = delete;
  LiveWireSession& operator=(const LiveWireSession&) = delete;

  void submit(const EngineRequest& request);
  /// Stops the worker; pending requests are discarded.
  void shutdown();
  /// Blocks until every submitted request has been handled.
  void wait_idle();

 private:
  void run();
  void handle(const EngineRequest& req);
  bool newer_target_waiting();
  void emit(BoundaryEvent ev);
  void emit_error(std::uint64_t seq, const std::string& message);
  void tick_timers();
  std::int64_t now_ms() const;

  std::shared_ptr<const StaticCostField> field_;
  SessionOptions options_;
  Listener listener_;
  BoundaryTracer tracer_;
  CoolingState cooling_;
  std::chrono::steady_clock::time_point start_;
  std::chrono::steady_clock::time_point next_heat_;
  std::uint64_t last_seq_ = 0;
  std::uint64_t answered_seq_ = 0;
  bool closed_boundary_ = false;
  bool search_reported_ = false;

  std::mutex mutex_;
  std::condition_variable cv_;
  std::condition_variable idle_cv_;
  std::deque<EngineRequest> queue_;
  std::uint64_t submitted_seq_ = 0;
  bool busy_ = false;
  bool stopping_ = false;
  std::thread worker_;
};

}  // namespace livewire

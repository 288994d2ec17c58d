#include "livewire/engine.hpp"

#include <algorithm>
#include <cmath>

namespace livewire {

// Search ---------------------------------------------------------------------

std::optional<Pixel> PathTree::predecessor(Pixel p) const {
  const int dir = pred_dir[size.index(p)];
  if (dir < 0) return std::nullopt;
  return Pixel{p.x - kSteps[dir].x, p.y - kSteps[dir].y};
}

namespace {

std::size_t bucket_count_for(const SearchGraph& g) {
  const auto& w = g.weights;
  double bound = 255.0 * std::sqrt(2.0) + 1.0;
  bound += w.direction * *std::max_element(w.direction_table.begin(), w.direction_table.end());
  bound += w.deviation * 255.0;
  if (g.heat && g.heat->level > 0) bound *= 1.0 + 0.25 * g.heat->level;
  const auto max_edge = static_cast<std::size_t>(std::min(std::ceil(bound) + 1.0, double{kMaxEdgeCost}));
  std::size_t n = 1;
  while (n <= max_edge) n <<= 1;
  return n;
}

}  // namespace

DijkstraSearch::DijkstraSearch(const SearchGraph& graph, Pixel seed) : graph_(graph) {
  if (graph_.field == nullptr) throw InvalidArgument("search needs a cost field");
  const GridSize size = graph_.field->size();
  if (!size.contains(seed)) throw InvalidArgument("seed outside image");
  if (graph_.mask) {
    if (graph_.mask->size() != size) throw InvalidArgument("search mask does not match image");
    if (!graph_.mask->test(seed)) throw UnreachableError("seed outside search mask", seed);
  }
  tree_.size = size;
  tree_.seed = seed;
  tree_.cum_cost.assign(size.area(), kUnreached);
  tree_.pred_dir.assign(size.area(), -1);
  tree_.finalized.assign(size.area(), 0);
  if (graph_.weights.deviation > 0.0) {
    stats_.resize(size.area());
    stats_[size.index(seed)] = PathStats{}.with(graph_.field->feature[seed]);
  }
  buckets_.resize(bucket_count_for(graph_));
  bucket_mask_ = buckets_.size() - 1;
  const auto s = static_cast<std::uint32_t>(size.index(seed));
  tree_.cum_cost[s] = 0;
  buckets_[0].emplace_back(0, s);
  pending_ = 1;
}

bool DijkstraSearch::pop(std::size_t& index) {
  while (pending_ > 0) {
    auto& bucket = buckets_[static_cast<std::size_t>(current_) & bucket_mask_];
    if (bucket.empty()) {
      ++current_;
      continue;
    }
    auto [cost, idx] = bucket.back();
    bucket.pop_back();
    --pending_;
    if (tree_.finalized[idx] || cost != tree_.cum_cost[idx]) continue;
    index = idx;
    return true;
  }
  return false;
}

void DijkstraSearch::relax(std::size_t index) {
  const GridSize size = tree_.size;
  const Pixel p{static_cast<int>(index % size.width), static_cast<int>(index / size.width)};
  const std::int64_t base = tree_.cum_cost[index];
  StepContext ctx;
  if (graph_.weights.direction > 0.0 && tree_.pred_dir[index] >= 0) ctx.dir_in = tree_.pred_dir[index];
  if (!stats_.empty()) ctx.stats = &stats_[index];
  for (int d = 0; d < 8; ++d) {
    const Pixel q{p.x + kSteps[d].x, p.y + kSteps[d].y};
    if (!size.contains(q)) continue;
    const std::size_t qi = size.index(q);
    if (tree_.finalized[qi]) continue;
    if (graph_.mask && !graph_.mask->test(q)) continue;
    const std::int64_t candidate = base + step_cost(*graph_.field, q, d, ctx, graph_.heat, graph_.weights);
    if (candidate < tree_.cum_cost[qi]) {
      tree_.cum_cost[qi] = candidate;
      tree_.pred_dir[qi] = static_cast<std::int8_t>(d);
      if (!stats_.empty()) stats_[qi] = stats_[index].with(graph_.field->feature[q]);
      buckets_[static_cast<std::size_t>(candidate) & bucket_mask_].emplace_back(candidate, static_cast<std::uint32_t>(qi));
      ++pending_;
    }
  }
}

bool DijkstraSearch::expand_until(Pixel target, std::size_t budget) {
  if (!tree_.size.contains(target)) throw InvalidArgument("target outside image");
  const std::size_t t = tree_.size.index(target);
  std::size_t idx = 0;
  for (std::size_t done = 0; !tree_.finalized[t] && done < budget; ++done) {
    if (!pop(idx)) break;
    tree_.finalized[idx] = 1;
    ++tree_.finalized_count;
    relax(idx);
  }
  return tree_.finalized[t] != 0;
}

bool DijkstraSearch::expand(std::size_t budget) {
  std::size_t idx = 0;
  for (std::size_t done = 0; done < budget; ++done) {
    if (!pop(idx)) return false;
    tree_.finalized[idx] = 1;
    ++tree_.finalized_count;
    relax(idx);
  }
  return !complete();
}

PathTree compute_path_tree(const StaticCostField& field, const CostWeights& weights, Pixel seed,
                           const Mask* search_mask, std::optional<Pixel> stop_at, const HeatOverlay* heat) {
  weights.validate();
  DijkstraSearch search(SearchGraph{&field, weights, search_mask, heat}, seed);
  if (stop_at) {
    search.expand_until(*stop_at);
  } else {
    search.expand_all();
  }
  return std::move(search).take_tree();
}

Polyline reconstruct(const PathTree& tree, Pixel target) {
  if (!tree.size.contains(target)) throw InvalidArgument("target outside image");
  if (!tree.is_finalized(target)) throw UnreachableError("target not finalized in path tree", target);
  Polyline path{target};
  Pixel p = target;
  while (p != tree.seed) {
    const int dir = tree.pred_dir[tree.size.index(p)];
    p = {p.x - kSteps[dir].x, p.y - kSteps[dir].y};
    path.push_back(p);
    if (path.size() > tree.size.area()) throw Error("path tree contains a cycle");
  }
  std::reverse(path.begin(), path.end());
  return path;
}

std::int64_t path_cost(const StaticCostField& field, const Polyline& path, const CostWeights& weights,
                       const HeatOverlay* heat) {
  if (path.empty()) return 0;
  std::int64_t total = 0;
  PathStats stats = PathStats{}.with(field.feature[path.front()]);
  std::optional<int> dir_in;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const int dir = step_direction(path[i - 1], path[i]);
    if (dir < 0) throw InvalidArgument("path is not 8-connected");
    StepContext ctx;
    if (weights.direction > 0.0) ctx.dir_in = dir_in;
    if (weights.deviation > 0.0) ctx.stats = &stats;
    total += step_cost(field, path[i], dir, ctx, heat, weights);
    stats = stats.with(field.feature[path[i]]);
    dir_in = dir;
  }
  return total;
}

// Boundary -------------------------------------------------------------------

Polyline Boundary::points() const {
  Polyline out;
  for (const auto& seg : segments) {
    auto begin = seg.begin();
    if (!out.empty() && !seg.empty() && out.back() == seg.front()) ++begin;
    out.insert(out.end(), begin, seg.end());
  }
  return out;
}

BoundaryTracer::BoundaryTracer(std::shared_ptr<const StaticCostField> field, CostWeights weights,
                               std::shared_ptr<const Mask> mask)
    : field_(std::move(field)), weights_(weights), mask_(std::move(mask)) {
  if (!field_) throw InvalidArgument("tracer needs a cost field");
  weights_.validate();
  if (mask_ && mask_->size() != field_->size()) throw InvalidArgument("search mask does not match image");
}

void BoundaryTracer::check_inside(Pixel p, const char* what) const {
  if (!field_->size().contains(p)) throw InvalidArgument(std::string(what) + " outside image");
  if (mask_ && !mask_->test(p)) throw UnreachableError(std::string(what) + " outside search mask", p);
}

void BoundaryTracer::restart_search() {
  if (search_) retired_nodes_ += search_->tree().finalized_count;
  search_ = std::make_unique<DijkstraSearch>(SearchGraph{field_.get(), weights_, mask_.get(), &heat_}, *seed_);
  ++generation_;
}

void BoundaryTracer::set_seed(Pixel p) {
  check_inside(p, "seed");
  boundary_ = {};
  seed_ = p;
  first_seed_ = p;
  target_.reset();
  wire_ = {p};
  heat_.reset();
  restart_search();
}

bool BoundaryTracer::advance_towards(Pixel target, std::size_t budget) {
  if (!seed_) throw InvalidArgument("no seed placed");
  if (boundary_.closed) throw InvalidArgument("boundary already closed");
  check_inside(target, "target");
  if (search_->expand_until(target, budget)) return true;
  if (search_->complete()) throw UnreachableError("target unreachable from seed inside the search region", target);
  return false;
}

const Polyline& BoundaryTracer::wire_to(Pixel target) {
  advance_towards(target, std::numeric_limits<std::size_t>::max());
  wire_ = reconstruct(search_->tree(), target);
  target_ = target;
  return wire_;
}

const Polyline& BoundaryTracer::commit() {
  if (!seed_) throw InvalidArgument("no seed placed");
  if (!target_ || wire_.size() < 2) throw InvalidArgument("no live wire to commit");
  return commit_prefix(wire_.size());
}

const Polyline& BoundaryTracer::commit_prefix(std::size_t length) {
  if (!seed_ || !target_) throw InvalidArgument("no live wire to commit");
  if (length < 2 || length > wire_.size()) throw InvalidArgument("commit prefix length out of range");
  boundary_.segments.emplace_back(wire_.begin(), wire_.begin() + static_cast<std::ptrdiff_t>(length));
  seed_ = boundary_.segments.back().back();
  heat_.reset();
  const auto target = *target_;
  const bool whole = length == wire_.size();
  target_.reset();
  wire_ = {*seed_};
  restart_search();
  if (!whole) wire_to(target);
  return boundary_.segments.back();
}

const Polyline& BoundaryTracer::heat_step() {
  if (!seed_ || !target_) throw InvalidArgument("no current wire to heat");
  heat_.level += 1;
  heat_.heated = Mask(field_->size());
  for (Pixel p : wire_) heat_.heated.set(p);
  restart_search();
  return wire_to(*target_);
}

const Boundary& BoundaryTracer::close() {
  if (boundary_.closed) throw InvalidArgument("boundary already closed");
  if (boundary_.segments.empty()) throw InvalidArgument("no committed segments to close");
  if (*seed_ != *first_seed_) {
    wire_to(*first_seed_);
    boundary_.segments.push_back(wire_);
  }
  boundary_.closed = true;
  target_.reset();
  wire_.clear();
  heat_.reset();
  return boundary_;
}

void BoundaryTracer::cancel() {
  if (!seed_) return;
  target_.reset();
  wire_ = {*seed_};
  if (heat_.level > 0) {
    heat_.reset();
    restart_search();
  }
}

bool BoundaryTracer::background_expand(std::size_t budget) {
  if (!search_ || boundary_.closed) return false;
  return search_->expand(budget);
}

std::size_t BoundaryTracer::finalized_nodes() const {
  return retired_nodes_ + (search_ ? search_->tree().finalized_count : 0);
}

// Cooling ------------------------------------------------------------------------

std::optional<CoolingFire> cooling_tick(CoolingState& state, const Polyline& current_wire, std::int64_t now) {
  if (current_wire.empty()) {
    state.reset();
    return std::nullopt;
  }
  const std::size_t limit = std::min(state.last_wire.size(), current_wire.size());
  std::size_t lcp = 0;
  while (lcp < limit && state.last_wire[lcp] == current_wire[lcp]) ++lcp;
  state.stable_since.resize(current_wire.size());
  for (std::size_t i = lcp; i < current_wire.size(); ++i) state.stable_since[i] = now;
  state.stable_prefix_len = lcp;
  state.last_wire = current_wire;

  // stable_since is non-decreasing, so the longest frozen prefix is the last qualifying index.
  for (std::size_t i = current_wire.size(); i-- > 1;) {
    if (now - state.stable_since[i] >= state.freeze_after) {
      CoolingFire fire{current_wire[i], i + 1};
      state.reset();
      return fire;
    }
  }
  return std::nullopt;
}

// Session --------------------------------------------------------------------------

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::WireUpdated: return "wire";
    case EventKind::SegmentCommitted: return "segment_committed";
    case EventKind::AutoSeed: return "auto_seed";
    case EventKind::BoundaryClosed: return "boundary_closed";
    case EventKind::SearchComplete: return "search_complete";
    case EventKind::Error: return "error";
  }
  return "unknown";
}

LiveWireSession::LiveWireSession(std::shared_ptr<const StaticCostField> field, SessionOptions options,
                                 Listener listener)
    : field_(field),
      options_(std::move(options)),
      listener_(std::move(listener)),
      tracer_(std::move(field), options_.weights, options_.mask),
      start_(std::chrono::steady_clock::now()) {
  if (options_.chunk == 0) options_.chunk = 1;
  cooling_.freeze_after = options_.freeze_after.count();
  next_heat_ = start_ + options_.heating_period;
  worker_ = std::thread([this] { run(); });
}

LiveWireSession::~LiveWireSession() { shutdown(); }

void LiveWireSession::submit(const EngineRequest& request) {
  {
    std::lock_guard lk(mutex_);
    if (stopping_) throw SessionClosed();
    if (request.seq <= submitted_seq_ && !(request.seq == 0 && submitted_seq_ == 0)) {
      throw InvalidArgument("request sequence numbers must strictly increase");
    }
    submitted_seq_ = request.seq;
    queue_.push_back(request);
  }
  cv_.notify_one();
}

void LiveWireSession::shutdown() {
  {
    std::lock_guard lk(mutex_);
    if (stopping_ && !worker_.joinable()) return;
    stopping_ = true;
    queue_.clear();
  }
  cv_.notify_all();
  idle_cv_.notify_all();
  if (worker_.joinable() && worker_.get_id() != std::this_thread::get_id()) worker_.join();
}

void LiveWireSession::wait_idle() {
  std::unique_lock lk(mutex_);
  idle_cv_.wait(lk, [this] { return stopping_ || (queue_.empty() && !busy_); });
}

std::int64_t LiveWireSession::now_ms() const {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_).count();
}

bool LiveWireSession::newer_target_waiting() {
  std::lock_guard lk(mutex_);
  return stopping_ || (!queue_.empty() && queue_.front().kind == RequestKind::SetTarget);
}

void LiveWireSession::emit(BoundaryEvent ev) {
  try {
    listener_(ev);
  } catch (...) {
    // A failing listener must not take the worker down.
  }
}

void LiveWireSession::emit_error(std::uint64_t seq, const std::string& message) {
  emit({EventKind::Error, seq, {}, {}, message});
}

void LiveWireSession::run() {
  std::unique_lock lk(mutex_);
  while (!stopping_) {
    if (queue_.empty()) {
      const bool background = !closed_boundary_ && tracer_.seed() && !search_reported_;
      if (background) {
        lk.unlock();
        const std::size_t gen = tracer_.generation();
        const bool more = tracer_.background_expand(options_.chunk);
        if (!more && tracer_.generation() == gen && !search_reported_) {
          search_reported_ = true;
          emit({EventKind::SearchComplete, answered_seq_, {}, {}, {}});
        }
        tick_timers();
        lk.lock();
        if (more) continue;
      }
      idle_cv_.notify_all();
      const bool timers = !closed_boundary_ && tracer_.target() &&
                          (options_.cooling || options_.heating_timer);
      if (timers) {
        cv_.wait_for(lk, std::chrono::milliseconds(20), [this] { return stopping_ || !queue_.empty(); });
      } else {
        cv_.wait(lk, [this] { return stopping_ || !queue_.empty(); });
      }
      if (stopping_) break;
      if (queue_.empty()) {
        lk.unlock();
        tick_timers();
        lk.lock();
        continue;
      }
    }
    EngineRequest req = queue_.front();
    queue_.pop_front();
    busy_ = true;
    lk.unlock();
    handle(req);
    lk.lock();
    busy_ = false;
  }
  idle_cv_.notify_all();
}

void LiveWireSession::handle(const EngineRequest& req) {
  const std::uint64_t seq = req.seq;
  if (closed_boundary_) {
    emit_error(seq, "boundary already closed");
    return;
  }
  const std::size_t gen_before = tracer_.generation();
  try {
    switch (req.kind) {
      case RequestKind::SetSeed:
        tracer_.set_seed(req.pixel);
        cooling_.reset();
        answered_seq_ = seq;
        emit({EventKind::WireUpdated, seq, tracer_.current_wire(), req.pixel, {}});
        break;
      case RequestKind::SetTarget: {
        if (newer_target_waiting()) return;
        while (!tracer_.advance_towards(req.pixel, options_.chunk)) {
          if (newer_target_waiting()) return;
        }
        const Polyline& wire = tracer_.wire_to(req.pixel);
        answered_seq_ = seq;
        emit({EventKind::WireUpdated, seq, wire, req.pixel, {}});
        tick_timers();
        break;
      }
      case RequestKind::Commit: {
        const Polyline segment = tracer_.commit();
        cooling_.reset();
        answered_seq_ = seq;
        emit({EventKind::SegmentCommitted, seq, segment, segment.back(), {}});
        break;
      }
      case RequestKind::Close: {
        const Boundary& b = tracer_.close();
        answered_seq_ = seq;
        closed_boundary_ = true;
        emit({EventKind::BoundaryClosed, seq, b.points(), b.points().front(), {}});
        break;
      }
      case RequestKind::HeatStep: {
        const Polyline& wire = tracer_.heat_step();
        cooling_.reset();
        answered_seq_ = seq;
        next_heat_ = std::chrono::steady_clock::now() + options_.heating_period;
        emit({EventKind::WireUpdated, seq, wire, wire.back(), {}});
        break;
      }
      case RequestKind::Cancel:
        if (!tracer_.seed()) throw InvalidArgument("no seed placed");
        tracer_.cancel();
        cooling_.reset();
        answered_seq_ = seq;
        emit({EventKind::WireUpdated, seq, tracer_.current_wire(), *tracer_.seed(), {}});
        break;
    }
  } catch (const Error& e) {
    emit_error(seq, e.what());
  }
  if (tracer_.generation() != gen_before) search_reported_ = false;
}

void LiveWireSession::tick_timers() {
  if (closed_boundary_ || !tracer_.target()) return;
  const std::size_t gen_before = tracer_.generation();
  try {
    if (options_.cooling && tracer_.current_wire().size() >= 2) {
      if (auto fire = cooling_tick(cooling_, tracer_.current_wire(), now_ms())) {
        const Polyline segment = tracer_.commit_prefix(fire->prefix_length);
        emit({EventKind::AutoSeed, answered_seq_, {}, fire->seed, {}});
        emit({EventKind::SegmentCommitted, answered_seq_, segment, fire->seed, {}});
        if (tracer_.target()) {
          emit({EventKind::WireUpdated, answered_seq_, tracer_.current_wire(), *tracer_.target(), {}});
        }
      }
    }
    if (options_.heating_timer && tracer_.target() && std::chrono::steady_clock::now() >= next_heat_) {
      const Polyline& wire = tracer_.heat_step();
      cooling_.reset();
      next_heat_ = std::chrono::steady_clock::now() + options_.heating_period;
      emit({EventKind::WireUpdated, answered_seq_, wire, wire.back(), {}});
    }
  } catch (const Error& e) {
    emit_error(answered_seq_, e.what());
  }
  if (tracer_.generation() != gen_before) search_reported_ = false;
}

}  // namespace livewire

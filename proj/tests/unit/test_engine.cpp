#include <atomic>
#include <chrono>
#include <mutex>
#include <random>
#include <thread>

#include "doctest.h"
#include "livewire/engine.hpp"
#include "oracles.hpp"

using namespace livewire;

namespace {

std::shared_ptr<const StaticCostField> uniform_field(int w, int h, std::uint8_t c) {
  return std::make_shared<const StaticCostField>(
      StaticCostField{Grid<std::uint8_t>(w, h, c), Grid<std::uint8_t>(w, h, 0)});
}

struct Recorder {
  std::mutex m;
  std::vector<BoundaryEvent> events;
  void operator()(const BoundaryEvent& e) {
    std::lock_guard lk(m);
    events.push_back(e);
  }
  std::vector<BoundaryEvent> snapshot() {
    std::lock_guard lk(m);
    return events;
  }
};

bool chained(const Polyline& p) {
  for (std::size_t i = 1; i < p.size(); ++i)
    if (!are_8_adjacent(p[i - 1], p[i])) return false;
  return true;
}

}  // namespace

TEST_CASE("path tree matches Bellman-Ford on random fields") {
  std::mt19937_64 rng(17);
  const CostWeights w;
  for (int t = 0; t < 30; ++t) {
    const auto f = oracle::random_field({9, 7}, rng);
    const Pixel seed{int(rng() % 9), int(rng() % 7)};
    const auto tree = compute_path_tree(f, w, seed);
    const auto expected = oracle::bellman_ford(f.cost, seed);
    CHECK(tree.cum_cost == expected);
    CHECK(tree.finalized_count == 63);
  }
}

TEST_CASE("tree invariants: predecessor chain accounts for cost") {
  std::mt19937_64 rng(4);
  const auto f = oracle::random_field({12, 12}, rng);
  const CostWeights w;
  const auto tree = compute_path_tree(f, w, {3, 8});
  CHECK(tree.cost({3, 8}) == 0);
  for (int y = 0; y < 12; ++y) {
    for (int x = 0; x < 12; ++x) {
      const Pixel p{x, y};
      if (p == Pixel{3, 8}) continue;
      const auto pred = tree.predecessor(p);
      REQUIRE(pred);
      CHECK(tree.cost(p) == tree.cost(*pred) + edge_cost(f, *pred, p, {}, HeatOverlay{}, w));
    }
  }
}

TEST_CASE("masked search stays inside the mask") {
  std::mt19937_64 rng(6);
  const auto f = oracle::random_field({10, 10}, rng);
  Mask m = oracle::random_mask({10, 10}, 0.6, rng);
  m.set(5, 5);
  const auto tree = compute_path_tree(f, CostWeights{}, {5, 5}, &m);
  const auto expected = oracle::bellman_ford(f.cost, {5, 5}, &m);
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 10; ++x) {
      CHECK(tree.cum_cost[y * 10 + x] == (expected[y * 10 + x] == oracle::kInf ? kUnreached : expected[y * 10 + x]));
      if (!m.test(x, y)) CHECK_FALSE(tree.is_finalized({x, y}));
    }
  }
}

TEST_CASE("single-pixel mask gives a one-node tree") {
  const auto f = uniform_field(5, 5, 10);
  Mask m(5, 5);
  m.set(2, 2);
  const auto tree = compute_path_tree(*f, CostWeights{}, {2, 2}, &m);
  CHECK(tree.finalized_count == 1);
  CHECK(tree.cost({2, 2}) == 0);
  CHECK_THROWS_AS(reconstruct(tree, {2, 3}), UnreachableError);
}

TEST_CASE("seed outside the mask is unreachable") {
  const auto f = uniform_field(5, 5, 10);
  Mask m(5, 5);
  m.set(0, 0);
  CHECK_THROWS_AS(compute_path_tree(*f, CostWeights{}, {2, 2}, &m), UnreachableError);
}

TEST_CASE("early stop still gives the optimal cost") {
  std::mt19937_64 rng(2);
  const auto f = oracle::random_field({16, 16}, rng);
  const auto full = compute_path_tree(f, CostWeights{}, {0, 0});
  const auto part = compute_path_tree(f, CostWeights{}, {0, 0}, nullptr, Pixel{9, 4});
  CHECK(part.is_finalized({9, 4}));
  CHECK(part.cost({9, 4}) == full.cost({9, 4}));
  CHECK(part.finalized_count <= full.finalized_count);
}

TEST_CASE("reconstruct") {
  const auto f = uniform_field(6, 6, 5);
  const auto tree = compute_path_tree(*f, CostWeights{}, {2, 2});
  CHECK(reconstruct(tree, {2, 2}) == Polyline{{2, 2}});
  CHECK(reconstruct(tree, {3, 2}) == Polyline{{2, 2}, {3, 2}});

  std::mt19937_64 rng(12);
  const auto r = oracle::random_field({20, 15}, rng);
  const auto t2 = compute_path_tree(r, CostWeights{}, {1, 1});
  for (int k = 0; k < 20; ++k) {
    const Pixel target{int(rng() % 20), int(rng() % 15)};
    const auto path = reconstruct(t2, target);
    CHECK(path.front() == Pixel{1, 1});
    CHECK(path.back() == target);
    CHECK(chained(path));
    CHECK(path.size() <= 300);
    CHECK(path_cost(r, path, CostWeights{}) == t2.cost(target));
  }
}

TEST_CASE("anisotropic weights keep paths valid and costs consistent") {
  std::mt19937_64 rng(31);
  const auto f = oracle::random_field({14, 14}, rng);
  CostWeights w;
  w.direction = 0.5;
  w.deviation = 0.3;
  const auto tree = compute_path_tree(f, w, {2, 3});
  for (int k = 0; k < 10; ++k) {
    const Pixel target{int(rng() % 14), int(rng() % 14)};
    const auto path = reconstruct(tree, target);
    CHECK(chained(path));
    CHECK(path_cost(f, path, w) == tree.cost(target));
  }
}

TEST_CASE("resumable search finalizes monotonically") {
  std::mt19937_64 rng(8);
  const auto f = oracle::random_field({30, 30}, rng);
  SearchGraph g{&f, CostWeights{}, nullptr, nullptr};
  DijkstraSearch s(g, {15, 15});
  std::vector<std::uint8_t> prev = s.tree().finalized;
  while (s.expand(37)) {
    const auto& cur = s.tree().finalized;
    for (std::size_t i = 0; i < cur.size(); ++i) CHECK((prev[i] == 0 || cur[i] == 1));
    prev = cur;
  }
  CHECK(s.tree().finalized_count == 900);
  CHECK(s.tree().cum_cost == oracle::bellman_ford(f.cost, {15, 15}));
}

TEST_CASE("tracer commits chain and close completes the loop") {
  const auto f = uniform_field(20, 20, 10);
  BoundaryTracer t(f, CostWeights{});
  t.set_seed({2, 2});
  t.wire_to({12, 2});
  t.commit();
  t.wire_to({12, 12});
  t.commit();
  const auto& b = t.close();
  CHECK(b.closed);
  REQUIRE(b.segments.size() == 3);
  for (std::size_t i = 1; i < b.segments.size(); ++i) CHECK(b.segments[i].front() == b.segments[i - 1].back());
  const auto pts = b.points();
  CHECK(pts.front() == pts.back());
  CHECK(chained(pts));
}

TEST_CASE("close after one segment gives a two-segment loop") {
  const auto f = uniform_field(10, 10, 10);
  BoundaryTracer t(f, CostWeights{});
  t.set_seed({1, 1});
  t.wire_to({7, 5});
  t.commit();
  const auto& b = t.close();
  CHECK(b.segments.size() == 2);
  CHECK(b.points().front() == b.points().back());
}

TEST_CASE("close with nothing committed is an error") {
  const auto f = uniform_field(10, 10, 10);
  BoundaryTracer t(f, CostWeights{});
  t.set_seed({1, 1});
  CHECK_THROWS_AS(t.close(), InvalidArgument);
}

TEST_CASE("heating level 0 leaves the wire alone and commit resets heat") {
  std::mt19937_64 rng(41);
  const auto f = std::make_shared<const StaticCostField>(oracle::random_field({16, 16}, rng));
  BoundaryTracer t(f, CostWeights{});
  t.set_seed({1, 1});
  const Polyline before = t.wire_to({14, 12});
  CHECK(t.heat().level == 0);
  const auto tree = compute_path_tree(*f, CostWeights{}, {1, 1});
  CHECK(before == reconstruct(tree, {14, 12}));
  t.heat_step();
  CHECK(t.heat().level == 1);
  t.commit();
  CHECK(t.heat().level == 0);
}

TEST_CASE("heating moves the wire off its pixels on a two-corridor field") {
  // Two equal-ish corridors; heating the chosen one must switch to the other.
  Grid<std::uint8_t> c(11, 7, 200);
  for (int x = 0; x < 11; ++x) {
    c(x, 1) = 10;
    c(x, 5) = 11;
  }
  for (int y = 1; y <= 5; ++y) {
    c(0, y) = 10;
    c(10, y) = 10;
  }
  const auto f = std::make_shared<const StaticCostField>(StaticCostField{c, Grid<std::uint8_t>(11, 7, 0)});
  BoundaryTracer t(f, CostWeights{});
  t.set_seed({0, 3});
  const Polyline first = t.wire_to({10, 3});
  bool on_top = false;
  for (Pixel p : first) on_top |= p.y == 1;
  CHECK(on_top);
  const Polyline second = t.heat_step();
  CHECK(second.front() == Pixel{0, 3});
  CHECK(second.back() == Pixel{10, 3});
  bool on_bottom = false;
  for (Pixel p : second) on_bottom |= p.y == 5;
  CHECK(on_bottom);
}

TEST_CASE("optimality principle: prefix property on random fields") {
  std::mt19937_64 rng(55);
  for (int t = 0; t < 20; ++t) {
    const auto f = oracle::random_field({12, 12}, rng);
    const Pixel seed{int(rng() % 12), int(rng() % 12)};
    const auto tree = compute_path_tree(f, CostWeights{}, seed);
    const Pixel p{int(rng() % 12), int(rng() % 12)};
    const auto path = reconstruct(tree, p);
    for (std::size_t i = 0; i < path.size(); ++i) {
      const auto sub = reconstruct(tree, path[i]);
      CHECK(Polyline(path.begin(), path.begin() + static_cast<std::ptrdiff_t>(i + 1)) == sub);
    }
  }
}

TEST_CASE("cooling fires at the end of a frozen prefix") {
  Polyline base;
  for (int i = 0; i < 10; ++i) base.push_back({i, 0});
  CoolingState s;
  s.freeze_after = 100;
  std::optional<CoolingFire> fired;
  std::int64_t fired_at = -1;
  for (std::int64_t t = 0; t <= 200 && !fired; t += 10) {
    Polyline w = base;
    // The tail changes on every tick.
    w.push_back({9, static_cast<int>(1 + (t / 10) % 2)});
    w.push_back({9 + static_cast<int>((t / 10) % 3), 3});
    if ((fired = cooling_tick(s, w, t))) fired_at = t;
  }
  REQUIRE(fired);
  CHECK(fired_at == 100);
  CHECK(fired->seed == Pixel{9, 0});
  CHECK(fired->prefix_length == 10);
}

TEST_CASE("cooling never fires for a changing wire or a one-pixel prefix") {
  CoolingState s;
  s.freeze_after = 50;
  for (std::int64_t t = 0; t < 1000; t += 10) {
    Polyline w{{0, 0}, {1, static_cast<int>(t / 10 % 2)}, {2, static_cast<int>(t / 10 % 3)}};
    CHECK_FALSE(cooling_tick(s, w, t));
  }
  CoolingState c;
  c.freeze_after = 50;
  for (std::int64_t t = 0; t < 1000; t += 10) {
    Polyline w{{5, 5}, {6, 5 + static_cast<int>(t / 10 % 2)}};
    CHECK_FALSE(cooling_tick(c, w, t));
  }
}

TEST_CASE("session: seed then target gives one wire") {
  Recorder rec;
  {
    LiveWireSession s(uniform_field(32, 32, 20), {}, std::ref(rec));
    s.submit({RequestKind::SetSeed, {2, 2}, 1});
    s.submit({RequestKind::SetTarget, {20, 9}, 2});
    s.wait_idle();
  }
  const auto ev = rec.snapshot();
  int wires = 0;
  for (const auto& e : ev) {
    if (e.kind == EventKind::WireUpdated && e.seq == 2) {
      ++wires;
      CHECK(e.points.front() == Pixel{2, 2});
      CHECK(e.points.back() == Pixel{20, 9});
      CHECK(chained(e.points));
    }
  }
  CHECK(wires == 1);
}

TEST_CASE("session: rapid targets coalesce and the last one is answered in order") {
  Recorder rec;
  std::mt19937_64 rng(3);
  const auto field = std::make_shared<const StaticCostField>(oracle::random_field({128, 128}, rng));
  SessionOptions opt;
  opt.chunk = 64;
  LiveWireSession s(field, opt, std::ref(rec));
  s.submit({RequestKind::SetSeed, {1, 1}, 1});
  for (std::uint64_t i = 0; i < 100; ++i)
    s.submit({RequestKind::SetTarget, {static_cast<int>(20 + i), static_cast<int>(120 - i)}, 2 + i});
  s.wait_idle();
  s.shutdown();
  const auto ev = rec.snapshot();
  std::uint64_t last = 0;
  std::uint64_t last_wire = 0;
  for (const auto& e : ev) {
    CHECK(e.seq >= last);
    last = e.seq;
    if (e.kind == EventKind::WireUpdated) last_wire = e.seq;
  }
  CHECK(last_wire == 101);
}

TEST_CASE("session: commit without a seed is an error event") {
  Recorder rec;
  LiveWireSession s(uniform_field(8, 8, 5), {}, std::ref(rec));
  s.submit({RequestKind::Commit, {}, 1});
  s.wait_idle();
  s.shutdown();
  const auto ev = rec.snapshot();
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].kind == EventKind::Error);
  CHECK(ev[0].seq == 1);
}

TEST_CASE("session: no wire after the boundary closes") {
  Recorder rec;
  LiveWireSession s(uniform_field(20, 20, 5), {}, std::ref(rec));
  std::uint64_t seq = 0;
  s.submit({RequestKind::SetSeed, {2, 2}, ++seq});
  s.submit({RequestKind::SetTarget, {15, 3}, ++seq});
  s.submit({RequestKind::Commit, {}, ++seq});
  s.submit({RequestKind::SetTarget, {14, 15}, ++seq});
  s.submit({RequestKind::Commit, {}, ++seq});
  s.submit({RequestKind::Close, {}, ++seq});
  s.submit({RequestKind::SetTarget, {5, 5}, ++seq});
  s.wait_idle();
  s.shutdown();
  const auto ev = rec.snapshot();
  bool closed = false;
  for (const auto& e : ev) {
    if (closed) CHECK(e.kind != EventKind::WireUpdated);
    if (e.kind == EventKind::BoundaryClosed) {
      closed = true;
      CHECK(e.points.front() == e.points.back());
    }
  }
  CHECK(closed);
}

TEST_CASE("session: cooling timer emits an auto seed") {
  Recorder rec;
  SessionOptions opt;
  opt.cooling = true;
  opt.freeze_after = std::chrono::milliseconds(60);
  LiveWireSession s(uniform_field(40, 40, 10), opt, std::ref(rec));
  s.submit({RequestKind::SetSeed, {2, 20}, 1});
  s.submit({RequestKind::SetTarget, {30, 20}, 2});
  bool seen = false;
  for (int i = 0; i < 100 && !seen; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
    for (const auto& e : rec.snapshot()) seen |= e.kind == EventKind::AutoSeed;
  }
  s.shutdown();
  CHECK(seen);
}

TEST_CASE("submit after shutdown throws") {
  LiveWireSession s(uniform_field(8, 8, 5), {}, [](const BoundaryEvent&) {});
  s.shutdown();
  CHECK_THROWS_AS(s.submit({RequestKind::SetSeed, {1, 1}, 1}), SessionClosed);
}

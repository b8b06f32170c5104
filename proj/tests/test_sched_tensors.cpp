#include <algorithm>
#include <random>
#include <sstream>

#include "doctest.h"
#include "isosched/error.hpp"
#include "isosched/sched_tensors.hpp"
#include "oracles.hpp"

using namespace isosched;

namespace {

ComputeEntry tile(std::size_t d, std::size_t i, std::size_t n, std::int64_t t, std::int32_t p, std::int64_t len) {
  return {d, i, n, t, p, len};
}

std::vector<ViolationKind> kinds(const std::vector<Violation>& v) {
  std::vector<ViolationKind> k;
  for (const auto& x : v) k.push_back(x.kind);
  return k;
}

PlatformConfig mesh2(std::int64_t link_bw) {
  auto p = platform_preset("mesh2");
  p.link_bw = link_bw;
  return p;
}

// Two tasks on a 2x2 mesh: task 0 runs two groups through stages on engines
// 0 -> 1, task 1 one group through engines 2 -> 3.
struct HandBuilt {
  ComputeSchedule x;
  CommSchedule y;
  ScheduleProblem problem;
};

HandBuilt hand_built() {
  HandBuilt h;
  h.x.entries = {tile(0, 0, 0, 0, 0, 2), tile(0, 1, 0, 2, 0, 1), tile(0, 0, 1, 3, 1, 2), tile(0, 1, 1, 5, 1, 2),
                 tile(1, 0, 0, 1, 2, 2), tile(1, 0, 1, 4, 3, 1)};
  const LinkId l01{{0, 0}, {1, 0}}, l23{{0, 1}, {1, 1}};
  h.y.entries = {{0, 0, 0, 2, l01, 8}, {0, 1, 0, 3, l01, 8}, {1, 0, 0, 3, l23, 6}};
  for (const auto& e : h.x.entries) h.problem.tiles.push_back({e.key(), 0, 20});
  h.problem.deps = {{{0, 0, 0}, {0, 0, 1}}, {{0, 0, 0}, {0, 1, 0}}, {{0, 1, 0}, {0, 1, 1}},
                    {{0, 0, 1}, {0, 1, 1}}, {{1, 0, 0}, {1, 0, 1}}};
  h.problem.tasks = {{0, 0, 10, {0, 1, 1}, {{0, 1}}}, {1, 1, 8, {1, 0, 1}, {{0, 1}}}};
  return h;
}

}  // namespace

TEST_CASE("check_tile_compute examples") {
  std::vector<TileSpec> spec{{{0, 0, 0}, 0, 10}};
  ComputeSchedule once{{tile(0, 0, 0, 4, 0, 1)}};
  CHECK(check_tile_compute(once, spec).empty());
  ComputeSchedule twice{{tile(0, 0, 0, 4, 0, 1), tile(0, 0, 0, 6, 1, 1)}};
  CHECK(kinds(check_tile_compute(twice, spec)) == std::vector{ViolationKind::TileCompute});
  ComputeSchedule outside{{tile(0, 0, 0, 11, 0, 1)}};
  auto v = check_tile_compute(outside, spec);
  REQUIRE(v.size() == 1);
  CHECK(v[0].amount == 0);
  CHECK(v[0].t == 11);
  CHECK(check_tile_compute(ComputeSchedule{}, spec).size() == 1);
}

TEST_CASE("check_tile_order examples") {
  std::vector<TilePrecedence> deps{{{0, 0, 0}, {0, 0, 1}}};
  std::vector<TileSpec> spec{{{0, 0, 0}, 0, 20}, {{0, 0, 1}, 0, 20}};
  ComputeSchedule ok{{tile(0, 0, 0, 3, 0, 2), tile(0, 0, 1, 5, 1, 1)}};
  CHECK(check_tile_order(ok, deps, spec).empty());
  ComputeSchedule early{{tile(0, 0, 0, 3, 0, 2), tile(0, 0, 1, 4, 1, 1)}};
  CHECK(kinds(check_tile_order(early, deps, spec)) == std::vector{ViolationKind::TileOrder});
  CHECK(check_tile_order(ComputeSchedule{}, deps, spec).empty());
}

TEST_CASE("check_deadline examples") {
  ComputeSchedule x{{tile(0, 0, 0, 6, 0, 2)}};
  TaskTiming task{0, 0, 10, {0, 0, 0}, {}};
  CHECK(check_deadline(x, task).empty());
  x.entries[0].t = 10;
  CHECK(kinds(check_deadline(x, task)) == std::vector{ViolationKind::Deadline});
  x.entries[0].t = 12;
  task.arrival = 5;
  CHECK(check_deadline(x, task).empty());
  x.entries[0].t = 8;
  task.arrival = 0;
  CHECK(kinds(check_deadline(x, task)) == std::vector{ViolationKind::Deadline});
  try {
    check_deadline(ComputeSchedule{}, task);
    FAIL("expected FinalTileUnscheduled");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::FinalTileUnscheduled);
  }
}

TEST_CASE("check_engine_capacity examples") {
  ComputeSchedule two{{tile(0, 0, 0, 5, 0, 1), tile(0, 0, 1, 5, 1, 1)}};
  CHECK(check_engine_capacity(two, 2).empty());
  ComputeSchedule three{{tile(0, 0, 0, 5, 0, 1), tile(0, 0, 1, 5, 1, 1), tile(0, 0, 2, 5, 2, 1)}};
  auto v = check_engine_capacity(three, 2);
  REQUIRE(v.size() == 1);
  CHECK(v[0].t == 5);
  ComputeSchedule span{{tile(0, 0, 0, 4, 0, 2), tile(0, 0, 1, 5, 1, 1), tile(0, 0, 2, 5, 2, 1)}};
  v = check_engine_capacity(span, 2);
  REQUIRE(v.size() == 1);
  CHECK(v[0].t == 5);
  CHECK(v[0].amount == 3);
}

TEST_CASE("bandwidth_profile examples") {
  CHECK(bandwidth_profile(10, 4) == std::vector<std::int64_t>{4, 4, 2});
  CHECK(bandwidth_profile(4, 4) == std::vector<std::int64_t>{4});
  CHECK(bandwidth_profile(8, 4) == std::vector<std::int64_t>{4, 4});
  CHECK(bandwidth_profile(1, 4) == std::vector<std::int64_t>{1});
}

TEST_CASE("bandwidth_profile matches slot-by-slot draining") {
  for (std::int64_t link_bw = 1; link_bw <= 8; ++link_bw)
    for (std::int64_t bw = 1; bw <= 10 * link_bw; ++bw) {
      const auto p = bandwidth_profile(bw, link_bw);
      CHECK(p == testing::drain_profile(bw, link_bw));
      CHECK(static_cast<std::int64_t>(p.size()) == (bw - 1) / link_bw + 1);
    }
}

TEST_CASE("check_link_bandwidth examples") {
  const auto p = mesh2(4);
  const LinkId a{{0, 0}, {1, 0}}, b{{0, 1}, {1, 1}};
  CHECK(check_link_bandwidth(CommSchedule{{{0, 0, 0, 0, a, 10}}}, p).empty());
  auto v = check_link_bandwidth(CommSchedule{{{0, 0, 0, 3, a, 3}, {1, 0, 0, 3, a, 3}}}, p);
  REQUIRE(v.size() == 1);
  CHECK(v[0].kind == ViolationKind::LinkBandwidth);
  CHECK(v[0].amount == 6);
  CHECK(v[0].link == p.link_index(a));
  CHECK(check_link_bandwidth(CommSchedule{{{0, 0, 0, 3, a, 3}, {1, 0, 0, 3, b, 3}}}, p).empty());
  CHECK(check_link_bandwidth(CommSchedule{{{0, 0, 0, 3, {{0, 0}, {1, 1}}, 3}}}, p).size() == 1);
}

TEST_CASE("validate_all on a hand-built 2-task schedule") {
  const auto h = hand_built();
  const auto p = mesh2(8);
  auto rep = validate_all(h.x, h.y, h.problem, p);
  CHECK(rep.feasible());
  CHECK(rep.comm_cost.at(0) == 1);
  CHECK(rep.comm_cost.at(1) == 1);

  auto dup = h;
  dup.x.entries.push_back(dup.x.entries[0]);
  rep = validate_all(dup.x, dup.y, dup.problem, p);
  CHECK(kinds(rep.violations) == std::vector{ViolationKind::TileCompute});

  rep = validate_all(h.x, h.y, h.problem, mesh2(4));
  CHECK(!rep.violations.empty());
  CHECK(std::all_of(rep.violations.begin(), rep.violations.end(),
                    [](const Violation& v) { return v.kind == ViolationKind::LinkBandwidth; }));
}

TEST_CASE("validate_all is order independent and matches the serial reference") {
  const auto p = platform_preset("mesh4");
  for (std::uint64_t s = 0; s < 200; ++s) {
    auto c = testing::random_schedule_case(p, s);
    const auto base = validate_all_serial(c.x, c.y, c.problem, p);
    const auto par = validate_all(c.x, c.y, c.problem, p);
    CHECK(par.violations == base.violations);
    CHECK(par.comm_cost == base.comm_cost);
    std::mt19937_64 rng(s);
    std::shuffle(c.x.entries.begin(), c.x.entries.end(), rng);
    std::shuffle(c.y.entries.begin(), c.y.entries.end(), rng);
    std::shuffle(c.problem.tiles.begin(), c.problem.tiles.end(), rng);
    std::shuffle(c.problem.deps.begin(), c.problem.deps.end(), rng);
    CHECK(validate_all(c.x, c.y, c.problem, p).violations == base.violations);
  }
}

TEST_CASE("schedule table round trip") {
  const auto h = hand_built();
  const auto p = mesh2(8);
  std::vector<ReconfigWindow> reconfig{{0, 1, 0, 2, 1, 512}};
  const auto table = make_schedule_table(h.x, h.y, reconfig, p);
  CHECK(table.engine_streams.size() == 4);
  CHECK(table.link_streams.size() == 2);
  std::stringstream ss;
  write_schedule_table(ss, table);
  const auto back = read_schedule_table(ss, p);
  CHECK(back.engine_streams == table.engine_streams);
  CHECK(back.link_streams == table.link_streams);
  CHECK(back.reconfig == table.reconfig);

  std::stringstream bad("X 0 0 0 zero 0 1\n");
  CHECK_THROWS_AS(read_schedule_table(bad, p), Error);
}

#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "isosched/error.hpp"
#include "isosched/tile_model.hpp"

using namespace isosched;

namespace {

LayerNode conv(std::size_t id, ConvDims d, std::int64_t fill) {
  auto l = LayerNode::make_conv(id, d);
  l.fill_cycles = fill;
  return l;
}

LayerNode matmul(std::size_t id, AttnDims d, std::int64_t fill) {
  auto l = LayerNode::make_matmul(id, d);
  l.fill_cycles = fill;
  return l;
}

WorkloadSet one_task(std::vector<LayerNode> nodes) {
  WorkloadSet w;
  TaskDag d;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    nodes[k].id = k;
    if (k > 0) d.edges.push_back({k - 1, k});
  }
  d.nodes = std::move(nodes);
  w.tasks.push_back(std::move(d));
  return w;
}

}  // namespace

TEST_CASE("tile_latency examples") {
  EngineSpec e{64, 700e6};
  CHECK(tile_latency(conv(0, {4, 1, 8, 3, 3, 8}, 4), e) == 40);
  CHECK(tile_latency(matmul(0, {16, 2, 8, 1}, 2), e) == 6);
  CHECK(tile_latency(conv(0, {}, 0), EngineSpec{1, 1.0}) == 1);
}

TEST_CASE("latency override replaces the analytic value") {
  auto l = conv(0, {4, 1, 8, 3, 3, 8}, 4);
  l.latency_override = 123;
  CHECK(tile_latency(l, EngineSpec{}) == 123);
}

TEST_CASE("base_timeslot examples") {
  EngineSpec e{64, 700e6};
  auto w = one_task({conv(0, {4, 1, 8, 3, 3, 8}, 4), matmul(1, {16, 2, 8, 1}, 2)});
  CHECK(base_timeslot(w, e) == 6);
  const auto costs = tile_costs(w.tasks[0], e, 6);
  REQUIRE(costs.size() == 2);
  CHECK(costs[0].t_slots == 7);
  CHECK(costs[1].t_slots == 1);

  auto single = one_task({conv(0, {4, 1, 8, 3, 3, 8}, 4)});
  CHECK(base_timeslot(single, e) == 40);
  CHECK(tile_costs(single.tasks[0], e, 40)[0].t_slots == 1);

  auto tie = one_task({matmul(0, {16, 2, 8, 1}, 2), matmul(1, {16, 2, 8, 1}, 2)});
  CHECK(base_timeslot(tie, e) == 6);
}

TEST_CASE("base_timeslot without compute layers") {
  auto w = one_task({LayerNode::make_elementwise(0)});
  try {
    base_timeslot(w, EngineSpec{});
    FAIL("expected EmptyWorkload");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::EmptyWorkload);
  }
}

TEST_CASE("tiles_of_layer examples") {
  CHECK(tiles_of_layer(conv(0, {4, 8, 8, 3, 3, 8}, 0)) == 8);
  CHECK(tiles_of_layer(matmul(0, {16, 2, 8, 16}, 0)) == 16);
  CHECK(tiles_of_layer(conv(0, {}, 0)) == 1);
  try {
    tiles_of_layer(LayerNode::make_elementwise(0));
    FAIL("expected NotComputeBearing");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::NotComputeBearing);
  }
}

TEST_CASE("default fill") {
  CHECK(default_fill_cycles(LayerNode::make_conv(0, {1, 1, 1, 3, 3, 1})) == 8);
  CHECK(default_fill_cycles(LayerNode::make_conv(0, {1, 1, 1, 1, 1, 1})) == 1);
  CHECK(default_fill_cycles(LayerNode::make_matmul(0, {})) == 1);
  CHECK(default_fill_cycles(LayerNode::make_matmul(0, {16, 2, 32, 4})) == 8);
}

TEST_CASE("tile_latency is monotone in dims and antitone in PEs") {
  std::mt19937_64 rng(3);
  auto r = [&](int hi) { return static_cast<std::int64_t>(1 + rng() % static_cast<std::uint64_t>(hi)); };
  for (int trial = 0; trial < 500; ++trial) {
    ConvDims d{r(16), r(16), r(16), r(5), r(5), r(16)};
    const EngineSpec e{r(128), 1.0};
    const auto base = tile_latency(LayerNode::make_conv(0, d), e);
    for (int dim = 0; dim < 6; ++dim) {
      auto g = d;
      std::int64_t* f[] = {&g.out_w, &g.out_h, &g.out_c, &g.kernel_h, &g.kernel_w, &g.in_c};
      *f[dim] += r(4);
      CHECK(tile_latency(LayerNode::make_conv(0, g), e) >= base);
    }
    CHECK(tile_latency(LayerNode::make_conv(0, d), EngineSpec{e.pe_count + r(64), 1.0}) <= base);

    AttnDims a{r(32), r(4), r(16), r(16)};
    const auto abase = tile_latency(LayerNode::make_matmul(0, a), e);
    auto b = a;
    b.keys += r(4);
    CHECK(tile_latency(LayerNode::make_matmul(0, b), e) >= abase);
    b = a;
    b.head_dim += r(4);
    CHECK(tile_latency(LayerNode::make_matmul(0, b), e) >= abase);
  }
}

TEST_CASE("slot rounding loses no work below the analytic bound") {
  std::mt19937_64 rng(5);
  auto r = [&](int hi) { return static_cast<std::int64_t>(1 + rng() % static_cast<std::uint64_t>(hi)); };
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<LayerNode> layers;
    for (int k = 0; k < 1 + trial % 6; ++k) layers.push_back(LayerNode::make_conv(0, {r(16), r(8), r(16), r(3), r(3), r(16)}));
    auto w = one_task(layers);
    const EngineSpec e{r(128), 1.0};
    const auto ts = base_timeslot(w, e);
    std::int64_t slot_cycles = 0, macs = 0;
    for (const auto& c : tile_costs(w.tasks[0], e, ts)) slot_cycles += c.t_slots * ts * c.tiles_total;
    for (const auto& l : w.tasks[0].nodes) macs += tile_macs(l) * tiles_of_layer(l);
    CHECK(slot_cycles * e.pe_count >= macs);
  }
}

TEST_CASE("fuse_elementwise bridges through elementwise layers") {
  TaskDag d;
  d.nodes = {LayerNode::make_conv(0, {}), LayerNode::make_elementwise(1), LayerNode::make_conv(2, {}),
             LayerNode::make_elementwise(3), LayerNode::make_conv(4, {})};
  d.edges = {{0, 1}, {1, 2}, {1, 3}, {3, 4}, {2, 4}};
  auto f = fuse_elementwise(d);
  CHECK(f.order == std::vector<std::size_t>{0, 2, 4});
  std::sort(f.edges.begin(), f.edges.end());
  CHECK(f.edges == std::vector<Edge>{{0, 2}, {0, 4}, {2, 4}});
}

TEST_CASE("latency table") {
  const auto path = std::filesystem::temp_directory_path() / "isosched_latency_table.txt";
  {
    std::ofstream os(path);
    os << "# task layer cycles\n0 1 99\n\n0 0 7\n";
  }
  auto table = load_latency_table(path);
  std::filesystem::remove(path);
  CHECK(table.size() == 2);
  auto w = one_task({conv(0, {4, 1, 8, 3, 3, 8}, 4), conv(1, {4, 1, 8, 3, 3, 8}, 4)});
  apply_latency_table(w, table);
  CHECK(tile_latency(w.tasks[0].nodes[0], EngineSpec{}) == 7);
  CHECK(tile_latency(w.tasks[0].nodes[1], EngineSpec{}) == 99);
}

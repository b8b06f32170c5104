#pragma once

// Preemptive placement of task stage graphs onto the engine mesh: preemptible
// DAG construction, latency-slack victim admission, MCTS-guided matching and
// commit of compute / communication entries.

#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "isosched/graph.hpp"
#include "isosched/lcs.hpp"
#include "isosched/mcu_match.hpp"
#include "isosched/platform.hpp"
#include "isosched/sched_tensors.hpp"
#include "isosched/tile_model.hpp"

namespace isosched {

// ---- task preparation ---------------------------------------------------------

/// One pipeline stage after LCS, normalized to the task's tile-group count.
struct StageInfo {
  std::size_t index = 0;
  std::vector<std::size_t> members;   // layer ids
  std::int64_t slots = 1;             // per tile group
  std::int64_t weight_bits = 0;
  std::int64_t out_units = 1;         // data units sent per tile group
  std::int64_t halo = 0;              // extra producer groups a tile group needs
  std::int64_t macs = 0;              // MACs per tile group
};

struct PreparedTask {
  TaskDag dag;
  std::vector<StageInfo> stages;      // topological
  std::vector<Edge> stage_edges;      // every data dependency between stages
  CsrMatrix pattern;                  // transitive reduction, matched against the mesh
  std::int64_t groups = 1;            // I_d
  std::int64_t timeslot_cycles = 1;
  std::int64_t total_macs = 0;
  BalanceReport lcs;
  /// Same task folded to half, quarter, ... of the stages, down to one; tried
  /// in order when this pattern finds no embedding.
  std::vector<std::shared_ptr<const PreparedTask>> coarser;
};

struct PrepareOptions {
  BalanceOptions balance;
  bool run_lcs = true;
  /// Adjacent stages are merged until at most this many remain.
  std::size_t max_stages = 16;
  bool coarser_variants = true;
};

PreparedTask prepare_task(const TaskDag& dag, const EngineSpec& engine, std::int64_t timeslot_cycles,
                          const PrepareOptions& options);

/// Copy of a prepared task, coarser variants included, under a new id and
/// arrival slot.
std::shared_ptr<const PreparedTask> instantiate(const PreparedTask& task, std::size_t task_id, std::int64_t arrival);

/// Edges of a DAG not implied by a longer path.
std::vector<Edge> transitive_reduction(std::size_t n, const std::vector<Edge>& edges);

/// Lower bound on the span of one run of the task: the bottleneck stage
/// processes every group.
std::int64_t min_pipeline_latency(const PreparedTask& task);

// ---- slack, admission, scoring ------------------------------------------------

/// ((t_ddl - t_now) / tau) / (P_d / sum_p). Throws ZeroRemainingTime when tau <= 0.
double latency_slack(std::int64_t t_ddl, std::int64_t t_now, std::int64_t tau, std::int64_t priority,
                     std::int64_t priority_sum);

struct SlackEntry {
  std::size_t d = 0;
  double w = 0.0;
  std::int64_t tau = 1;
  std::int64_t t_ddl = 0;
  std::int64_t t_now = 0;
  std::int64_t priority = 1;
  bool critical = false;
};

/// Highest-slack non-critical task not yet admitted; ties to the lower id.
/// Throws NoVictimAvailable.
std::size_t admit_next_victim(const std::vector<SlackEntry>& running, const std::vector<std::size_t>& admitted);

/// ceil(bits / reconfig_bw) slots for one direction of a weight transfer.
std::int64_t preemption_overhead(std::int64_t weight_bits, std::int64_t reconfig_bw);

enum class VertexTag { Free, Victim };

struct PdVertex {
  EngineCoord coord;
  VertexTag tag = VertexTag::Free;
  std::size_t victim = 0;         // task, when tag == Victim
  std::size_t victim_stage = 0;
};

/// A victim contributes the engines of its stages with index >= cutoff.
struct VictimAdmission {
  std::size_t d = 0;
  std::size_t cutoff = 0;
};

struct PreemptibleDag {
  std::vector<PdVertex> vertices;
  std::vector<LinkId> links;      // directed links between member vertices
  CsrMatrix adjacency;            // over vertex positions
};

/// Members: engines with no compute entry live at or after t_now, plus engines
/// whose live entries all belong to admitted victim stages. Links: mesh links
/// between members with spare bandwidth at t_now. Free vertices come first in
/// engine order, then victim vertices from the most downstream stage.
PreemptibleDag build_preemptible_dag(const ComputeSchedule& x, const CommSchedule& y, const PlatformConfig& platform,
                                     std::int64_t t_now, const std::vector<VictimAdmission>& victims);

/// Engine time taken from a victim stage, [t0, t1).
struct PreemptedSpan {
  std::int32_t engine = 0;
  std::int64_t t0 = 0;
  std::int64_t t1 = 0;
  std::size_t victim = 0;
  std::size_t stage = 0;
  std::size_t depth = 1;
  bool critical_miss = false;
};

struct PreemptionPlan {
  std::size_t d = 0;
  std::vector<EngineCoord> mapping;   // stage -> engine
  std::vector<PreemptedSpan> preempted;
  std::vector<std::size_t> victims;
  std::int64_t overhead_slots = 0;
  double score = 0.0;
  std::int64_t start = 0;
  std::int64_t finish = 0;
  bool deadline_met = true;
};

/// Σ over preempted cells of 1 + (depth - stage) / depth; infinite when a
/// critical task would miss its deadline.
double score_plan(const PreemptionPlan& plan);

// ---- scheduler ------------------------------------------------------------------

enum class Policy { Preemptive, NonPreemptive };

struct SchedulerParams {
  McuParams mcu;
  std::size_t max_candidates = 8;
  Policy policy = Policy::Preemptive;
  /// Try later release points on free engines before preempting.
  bool allow_wait = true;
  std::size_t max_wait_events = 256;
  std::int64_t ullmann_budget = 2'000'000;
  /// Preemptible DAGs above this size are cut to a connected region.
  std::size_t max_region = 64;
};

struct AuditRecord {
  std::size_t d = 0;
  std::int64_t t_now = 0;
  std::int64_t start = 0;
  std::vector<std::size_t> victims;                    // admission order
  std::vector<std::pair<std::size_t, std::size_t>> claimed;   // (victim, stage)
  std::vector<VictimAdmission> tried;                  // every expansion step
  double score = 0.0;
  std::int64_t overhead_slots = 0;
  std::vector<Violation> violations;                   // must stay empty
  std::vector<std::size_t> deadline_misses;            // non-critical tasks late after this commit
  bool deadline_met = true;
  std::string mode;                                    // "free", "wait", "preempt", "fcfs"
};

struct TaskInfo {
  std::size_t d = 0;
  std::shared_ptr<const PreparedTask> prep;
  std::int64_t arrival = 0;
  std::int64_t deadline = 1;
  std::int64_t priority = 1;
  bool critical = false;
  std::vector<std::int32_t> engine_of_stage;
  std::int64_t finish = -1;
};

struct SchedulerState {
  ComputeSchedule x;
  CommSchedule y;
  std::vector<ReconfigWindow> reconfig;
  ScheduleProblem problem;
  std::map<std::size_t, TaskInfo> tasks;
  std::vector<AuditRecord> audit;
  std::int64_t spill_bits = 0;   // activations parked in DRAM by preemption
};

class Scheduler {
 public:
  Scheduler(PlatformConfig platform, SchedulerParams params);

  /// Admits one arrival at t_now (>= every earlier t_now). The task keeps
  /// `task.dag.task_id` as its id. Throws Unschedulable when no plan meets
  /// the deadline (preemptive) or no placement exists at all (FCFS).
  PreemptionPlan schedule_task(std::shared_ptr<const PreparedTask> task, std::int64_t t_now);

  /// Single matching attempt at t0 with the given victims; exposed for tests.
  std::optional<PreemptionPlan> try_plan(const PreparedTask& task, std::int64_t t_now, std::int64_t t0,
                                         const std::vector<VictimAdmission>& victims, bool enforce_deadline);

  std::vector<SlackEntry> running_tasks(std::int64_t t_now, std::size_t exclude) const;

  const SchedulerState& state() const { return state_; }
  const PlatformConfig& platform() const { return platform_; }
  const SchedulerParams& params() const { return params_; }

 private:
  struct Reservations;
  struct Candidate;

  std::vector<std::vector<std::int32_t>> match_candidates(const PreparedTask& task, const PreemptibleDag& pd,
                                                          std::uint64_t seed);
  std::optional<Candidate> evaluate_candidate(const PreparedTask& task, std::int64_t t_now, std::int64_t t0,
                                              const PreemptibleDag& pd, const std::vector<std::int32_t>& image,
                                              bool enforce_deadline, bool with_resume);
  void commit(const PreparedTask& task, Candidate cand, AuditRecord audit);
  void prune(std::int64_t t_now);
  std::vector<std::int64_t> release_points(std::int64_t after) const;

  PlatformConfig platform_;
  SchedulerParams params_;
  SchedulerState state_;
  std::shared_ptr<Reservations> live_;
  std::shared_ptr<Candidate> pending_;
  std::shared_ptr<const PreparedTask> pending_task_;
  std::uint64_t attempts_ = 0;
  std::int64_t last_now_ = std::numeric_limits<std::int64_t>::min();
};

/// Tile windows, precedences and deadline record of a task placed at `arrival`.
void append_problem(ScheduleProblem& problem, const PreparedTask& task, std::size_t d, std::int64_t arrival,
                    std::int64_t deadline);

}  // namespace isosched

#pragma once

// Timeslot replay of committed schedule tables, SLA / LBT / energy metrics and
// the layer-serial and non-preemptive reference baselines.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "isosched/iso_scheduler.hpp"
#include "isosched/platform.hpp"
#include "isosched/sched_tensors.hpp"

namespace isosched {

struct EnergyModel {
  double hop_pj_per_bit = 0.64;
  double dram_pj_per_bit = 20.0;
  double mac_pj = 1.0;

  static EnergyModel of(const PlatformConfig& p) { return {p.hop_pj_per_bit, p.dram_pj_per_bit, p.mac_pj}; }
};

struct ArrivalEvent {
  std::size_t template_id = 0;
  std::int64_t slot = 0;
};

struct ArrivalTrace {
  std::vector<ArrivalEvent> events;   // non-decreasing slots
  std::string generator = "explicit";
  double lambda = 0.0;                // tasks per slot, Poisson traces only
  std::uint64_t seed = 0;
};

/// Exponential inter-arrival times at `lambda` tasks/slot, rounded up to the
/// next whole slot; templates drawn uniformly.
ArrivalTrace poisson_trace(double lambda, std::size_t count, std::size_t templates, std::uint64_t seed);
/// Throws InvariantError when slots decrease.
ArrivalTrace explicit_trace(std::vector<ArrivalEvent> events);

struct TaskRecord {
  std::size_t d = 0;
  std::size_t template_id = 0;
  std::string name;
  std::int64_t arrival = 0;
  std::int64_t deadline = 1;
  std::string sla_class = "vision";
  bool critical = false;
  bool rejected = false;
  TileKey final_tile;
  std::int64_t total_macs = 0;
};

struct SimInput {
  ScheduleTable table;
  std::vector<TilePrecedence> deps;
  std::vector<TaskRecord> tasks;
  std::int64_t dram_bits = 0;   // activation spills beyond the reconfiguration windows
};

struct SimResult {
  std::map<std::size_t, std::int64_t> finish;   // final-tile finish slot, -1 when rejected
  std::map<std::size_t, bool> on_time;
  double sla_rate = 1.0;
  std::int64_t makespan = 0;
  double link_energy_pj = 0.0;
  double dram_energy_pj = 0.0;
  double mac_energy_pj = 0.0;
  double total_energy_pj = 0.0;
  std::int64_t link_bits_total = 0;
  std::int64_t dram_bits_total = 0;
  std::map<std::int64_t, std::int64_t> link_bits;   // per dense link index
  std::size_t rejected = 0;
};

/// Replays engine and link streams slot by slot. Every tile must be able to
/// start exactly at its committed slot; anything else throws TableInconsistent.
SimResult simulate(const SimInput& input, const PlatformConfig& platform, const EnergyModel& energy);

/// Link energy of a transfer: bits * hops * pJ/bit.
double link_energy_pj(std::int64_t bits, std::int64_t hops, const EnergyModel& energy);

// ---- SLA ------------------------------------------------------------------------

struct SlaThresholds {
  double vision = 0.99;
  double translation = 0.97;
  double of(const std::string& sla_class) const { return sla_class == "translation" ? translation : vision; }
};

struct ClassSla {
  std::size_t count = 0;
  std::size_t on_time = 0;
  double rate = 1.0;
  double threshold = 0.99;
  bool satisfied = true;
  bool vacuous = false;
};

struct SlaReport {
  std::map<std::string, ClassSla> classes;   // "vision" and "translation" always present
  double rate = 1.0;
  bool satisfied = true;
};

struct SlaSample {
  std::string sla_class = "vision";
  bool on_time = true;
};

SlaReport measure_sla(const std::vector<SlaSample>& samples, const SlaThresholds& thresholds = {});
SlaReport measure_sla(const SimInput& input, const SimResult& result, const SlaThresholds& thresholds = {});

// ---- runs -----------------------------------------------------------------------

struct OnlineRun {
  SchedulerState state;
  SimInput input;
  SimResult result;
};

/// Instance k of the trace gets task id k and the template's deadline,
/// priority and class. Unschedulable arrivals are rejected and count as misses.
OnlineRun run_online(const std::vector<std::shared_ptr<const PreparedTask>>& templates, const ArrivalTrace& trace,
                     const PlatformConfig& platform, const SchedulerParams& params, const EnergyModel& energy);

/// Every task of a prepared workload at its own arrival slot.
OnlineRun run_workload(const std::vector<std::shared_ptr<const PreparedTask>>& tasks, const PlatformConfig& platform,
                       const SchedulerParams& params, const EnergyModel& energy);

SimInput sim_input(const SchedulerState& state, const PlatformConfig& platform,
                   const std::vector<TaskRecord>& rejected = {});

struct LbtOptions {
  double lambda_lo = 1e-4;        // tasks per slot
  double lambda_hi = 1.0;
  int iterations = 12;
  std::size_t arrivals = 500;
  std::uint64_t seed = 0;
  std::int64_t timeslot_cycles = 1;
  SchedulerParams scheduler;
  SlaThresholds thresholds;
};

struct LbtProbe {
  double lambda = 0.0;
  double sla_rate = 0.0;
  bool satisfied = false;
};

struct LbtResult {
  double rate_per_slot = 0.0;
  double qps = 0.0;
  bool hit_upper_bound = false;
  bool monotone = true;           // SLA non-increasing in lambda across probes
  std::vector<LbtProbe> probes;
};

/// Binary search for the largest Poisson rate whose SLA holds. Throws
/// NoFeasibleRate when the lower bound already fails.
LbtResult measure_lbt(const std::vector<std::shared_ptr<const PreparedTask>>& templates,
                      const PlatformConfig& platform, const LbtOptions& options);

/// Layer-serial execution: one layer at a time spreads its tiles over every
/// engine, each inter-layer edge round-trips its activation through DRAM,
/// tasks run FCFS.
SimResult baseline_lts(const std::vector<std::shared_ptr<const PreparedTask>>& tasks, const PlatformConfig& platform,
                       const EnergyModel& energy);

/// The same placement machinery without victims: arrivals wait FCFS.
OnlineRun baseline_tss_nprm(const std::vector<std::shared_ptr<const PreparedTask>>& tasks,
                            const PlatformConfig& platform, SchedulerParams params, const EnergyModel& energy);

// ---- reports ----------------------------------------------------------------------

struct ReportMeta {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::map<std::string, std::uint64_t> seeds;
  std::map<std::string, std::string> config;
};

/// Deterministic JSON document (sorted keys, fixed float formatting).
void write_report(std::ostream& os, const ReportMeta& meta, const SimInput& input, const SimResult& result,
                  const SlaReport& sla, const std::vector<AuditRecord>& audit);

struct SweepRow {
  double lambda = 0.0;
  double sla_rate = 0.0;
  double lbt = 0.0;
  double energy_pj = 0.0;
};

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

}  // namespace isosched

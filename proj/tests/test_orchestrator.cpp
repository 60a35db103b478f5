#include <algorithm>
#include <cmath>

#include "bee/cluster.hpp"
#include "bee/digest.hpp"
#include "bee/json_io.hpp"
#include "bee/local_backend.hpp"
#include "bee/orchestrator.hpp"
#include "bee/sim_backend.hpp"
#include "bee/workload.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace bee;
using namespace bee::orchestrator;
using bee::test::make_app;
using bee::test::make_system;
using bee::test::make_uconf;
using bee::test::TempDir;

namespace {

/// Sim backend whose deployment costs nothing: the app starts at t=0.
BackendConfig instant(std::uint64_t seed = 1) {
  BackendConfig c;
  c.kind = BackendKind::sim_hpc;
  c.seed = seed;
  c.cpu_overhead_fraction = 0.0;
  c.vm_create_s = c.image_create_s = c.configure_s = c.shared_vol_s = c.network_s = 0;
  c.vm_boot_s = c.vm_boot_jitter_s = c.container_create_s = c.image_size_mb = 0;
  c.container_start_s = c.app_start_s = 0;
  return c;
}

/// Ticks a slot can deliver: from the end of transfer and deploy until the
/// guard fires.
std::int64_t expected_slot_ticks(const ComputeSystem& s, const SlotRecord& r, int cores, double overhead) {
  const double rate = cores * s.cpu_rate_native * (1.0 - overhead);
  const double seconds = s.time_slot - r.guard_s - r.transfer_s - r.deploy_s;
  return static_cast<std::int64_t>(std::floor(seconds * rate * workload::kTicksPerUnit + 1e-9));
}

struct Deployed {
  ComputeSystem sys;
  SimBackend backend;
  cluster::ClusterState cluster;

  Deployed(BackendConfig cfg, double work, std::vector<Fault> faults = {})
      : sys(make_system("m", 1, 1000)), backend([&] {
          cfg.faults = std::move(faults);
          return cfg;
        }(), sys) {
    cluster = cluster::deploy_cluster(sys.hosts, make_app("w", work, 1), "c", make_uconf(), backend);
  }
};

double sum_deltas(const RunResult& r) {
  double s = 0;
  for (const auto& h : r.history) s += h.progress_delta;
  return s;
}

}  // namespace

TEST_CASE("guard window rule") {
  CHECK(guard_window(100, 1) == 5.0);
  CHECK(guard_window(100, 4) == 8.0);
  CHECK(guard_window(1000, 0) == 50.0);
}

TEST_CASE("monitor: completion before the guard") {
  Deployed d(instant(), 30);
  const auto m = monitor(d.cluster, d.backend, 100, 10, workload::total_ticks(30));
  CHECK(m.status == MonitorStatus::completed);
  CHECK(m.t == 30.0);
}

TEST_CASE("monitor: guard fires at budget minus guard") {
  Deployed d(instant(), 200);
  const auto m = monitor(d.cluster, d.backend, 100, 10, workload::total_ticks(200), 7.0);
  CHECK(m.status == MonitorStatus::guard_fired);
  CHECK(m.t == 90.0);
  CHECK(d.backend.now() == 90.0);
  CHECK(m.ticks == workload::ticks_for(90, 1));
}

TEST_CASE("monitor: node failure") {
  Deployed d(instant(), 200, {{Fault::Kind::node_failure, "m", "", "", 50, 1}});
  const auto m = monitor(d.cluster, d.backend, 100, 10, workload::total_ticks(200));
  CHECK(m.status == MonitorStatus::failed);
  CHECK(m.t == 50.0);
  CHECK(m.failed_host == "m-h0");
}

TEST_CASE("checkpoint_now snapshots the current state") {
  TempDir dir;
  Deployed d(instant(), 2.5);
  storage::CheckpointStore store(dir.path());
  RunState st;
  st.phase = RunPhase::running;
  d.backend.advance_to(1.0);
  const auto a = checkpoint_now(st, d.cluster, d.backend, make_app("w", 2.5, 1), store, "r", 0, 0);
  CHECK(a.checkpoint.progress == 1.0);
  CHECK(a.checkpoint.digest == sha256_hex(a.content));
  CHECK(st.need_migration);
  CHECK(st.last_host_system == "m");
  CHECK(d.cluster.status == cluster::Status::paused);
  d.backend.advance_to(d.backend.now() + 5);
  const auto b = checkpoint_now(st, d.cluster, d.backend, make_app("w", 2.5, 1), store, "r", 1, 0);
  CHECK(b.checkpoint.digest == a.checkpoint.digest);
  CHECK(store.latest("r")->seq == 1);

  auto app = make_app("w", 2.5, 1);
  app.checkpointable = false;
  CHECK_THROWS_WITH_AS(checkpoint_now(st, d.cluster, d.backend, app, store, "r", 2, 0), "checkpoint unsupported", Error);
  RunState idle;
  CHECK_THROWS_AS(checkpoint_now(idle, d.cluster, d.backend, make_app("w", 2.5, 1), store, "r", 2, 0), Error);
}

TEST_CASE("transfer_and_restore verifies and retries once") {
  TempDir dir;
  storage::CheckpointStore store(dir.path());
  const Bytes content(1 << 20, 3);
  const auto ck = store.write("r", 0, 1.0, "A", 0, content);
  auto from = make_system("A", 1, 10);
  from.net_bandwidth_native = 100;
  auto to_sys = make_system("B", 1, 10);
  to_sys.net_bandwidth_native = 200;

  SimBackend ok(instant(), to_sys);
  const auto r = transfer_and_restore(ck, content, &from, ok);
  CHECK(r.attempts == 1);
  CHECK(r.duration == doctest::Approx(0.01));
  CHECK(r.volume.content_digest == ck.digest);
  CHECK(r.volume.location == "B");

  auto once = instant();
  once.faults = {{Fault::Kind::transfer_corrupt, "B", "", "", 0, 1}};
  SimBackend flaky(once, to_sys);
  const auto r2 = transfer_and_restore(ck, content, &from, flaky);
  CHECK(r2.attempts == 2);
  CHECK(r2.content == content);

  auto twice = instant();
  twice.faults = {{Fault::Kind::transfer_corrupt, "B", "", "", 0, 2}};
  SimBackend broken(twice, to_sys);
  CHECK_THROWS_AS(transfer_and_restore(ck, content, &from, broken), TransferError);

  const auto empty = store.write("r", 1, 0, "A", 0, {});
  SimBackend e(instant(), to_sys);
  const auto r3 = transfer_and_restore(empty, {}, &from, e);
  CHECK(r3.duration == 0.0);
  CHECK(r3.volume.content_digest == sha256_hex(Bytes{}));
}

TEST_CASE("workflow: one slot is enough") {
  TempDir dir;
  ResourcePool pool{{make_system("A", 2, 1000), make_system("B", 2, 1000)}};
  const auto app = make_app("one", 100, 2);
  const auto data = bee::test::stage_input(dir.path(), {1, 2, 3});
  const auto r = bee::test::run_sim(pool, app, make_uconf(), data, dir.path(), 1);
  CHECK(r.outcome == Outcome::completed);
  REQUIRE(r.history.size() == 1);
  CHECK(r.history[0].ended_by == EndedBy::completion);
  CHECK(r.history[0].system_id == "A");
  CHECK_FALSE(r.state.need_migration);
  CHECK(r.state.phase == RunPhase::complete);
  REQUIRE(r.output_volume.has_value());
  CHECK(r.output_volume->content_digest == bee::test::oracle_output_digest({1, 2, 3}, 100));
  CHECK(r.output_volume->location == "A");
  const auto persisted = read_json_file(state_path(dir.path(), r.run_id));
  CHECK(persisted.at("outcome") == "completed");
}

TEST_CASE("workflow: three systems share the work in priority order") {
  TempDir dir;
  // Each slot yields about one work unit; 2.5 units need three.
  ResourcePool pool;
  for (const char* id : {"A", "B", "C"}) pool.systems.push_back(make_system(id, 1, 200, 1.0 / 140));
  const auto app = make_app("three", 2.5, 1);
  const auto data = bee::test::stage_input(dir.path(), {});
  const auto r = bee::test::run_sim(pool, app, make_uconf(), data, dir.path(), 3);
  CHECK(r.outcome == Outcome::completed);
  REQUIRE(r.history.size() == 3);
  CHECK(r.history[0].system_id == "A");
  CHECK(r.history[1].system_id == "B");
  CHECK(r.history[2].system_id == "C");
  CHECK(r.history[0].ended_by == EndedBy::timeslot_checkpoint);
  CHECK(r.history[1].ended_by == EndedBy::timeslot_checkpoint);
  CHECK(r.history[2].ended_by == EndedBy::completion);
  CHECK(r.output_volume->location == "C");
  CHECK(sum_deltas(r) == 2.5);
  std::int64_t ticks = 0;
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& h = r.history[i];
    const auto slot = expected_slot_ticks(pool.systems[i], h, 1, 0.09);
    CHECK(h.progress_delta == workload::to_work(ticks + slot, 2.5) - workload::to_work(ticks, 2.5));
    ticks += slot;
    CHECK(h.progress_delta > 0.9);
    CHECK(h.progress_delta < 1.25);
  }
}

TEST_CASE("workflow: stall keeps a checkpoint, resume finishes identically") {
  TempDir dir;
  ResourcePool pool{{make_system("A", 2, 300), make_system("B", 2, 300)}};
  const auto app = make_app("long", 2000, 2);
  const Bytes input{9, 8, 7, 6};
  const auto data = bee::test::stage_input(dir.path(), input);
  const auto r = bee::test::run_sim(pool, app, make_uconf(), data, dir.path(), 5);
  CHECK(r.outcome == Outcome::stalled_with_checkpoint);
  CHECK(r.state.phase == RunPhase::stalled);
  REQUIRE(r.checkpoint_manifest.has_value());
  CHECK(std::filesystem::exists(*r.checkpoint_manifest));
  const auto ck = storage::CheckpointStore::load(*r.checkpoint_manifest);
  CHECK(ck.progress == r.state.progress);
  CHECK(ck.progress == sum_deltas(r));
  CHECK(ck.origin_system == "B");

  ResourcePool fresh{{make_system("F", 2, 1e6)}};
  const auto resumed = bee::test::run_sim(fresh, app, make_uconf(), {}, dir.path(), 5, ck);
  CHECK(resumed.outcome == Outcome::completed);
  CHECK(resumed.run_id == r.run_id);
  CHECK(ck.progress + sum_deltas(resumed) == app.work_total);
  CHECK(resumed.history.front().transfer_s > 0);
  CHECK(resumed.output_volume->content_digest == bee::test::oracle_output_digest(input, 2000));

  TempDir other;
  const auto straight = bee::test::run_sim(fresh, app, make_uconf(), bee::test::stage_input(other.path(), input),
                                           other.path(), 5);
  CHECK(straight.output_volume->content_digest == resumed.output_volume->content_digest);
}

TEST_CASE("workflow: resuming a finished checkpoint completes at once") {
  TempDir dir;
  storage::CheckpointStore store(dir.path());
  const Bytes done = workload::advance(Bytes{1}, workload::total_ticks(10));
  const auto ck = store.write("fin", 0, 10, "A", 0, done);
  ResourcePool pool{{make_system("A", 1, 100)}};
  const auto r = bee::test::run_sim(pool, make_app("fin", 10, 1), make_uconf(), {}, dir.path(), 1, ck);
  CHECK(r.outcome == Outcome::completed);
  CHECK(r.history.empty());
  CHECK(r.output_volume->content_digest == sha256_hex(done));
}

TEST_CASE("workflow: deploy failure moves on to the next system") {
  TempDir dir;
  auto a = make_system("A", 2, 1000);
  a.kvm_available = false;
  ResourcePool pool{{a, make_system("B", 2, 1000)}};
  const auto data = bee::test::stage_input(dir.path(), {});
  const auto r = bee::test::run_sim(pool, make_app("x", 50, 2), make_uconf(), data, dir.path(), 1);
  CHECK(r.outcome == Outcome::completed);
  REQUIRE(r.history.size() == 2);
  CHECK(r.history[0].ended_by == EndedBy::failure);
  CHECK(r.history[0].progress_delta == 0.0);
  CHECK(r.history[0].detail.find("stage 2") != std::string::npos);
  CHECK(r.history[1].ended_by == EndedBy::completion);
}

TEST_CASE("workflow: node failure loses the slot's progress") {
  TempDir dir;
  ResourcePool pool{{make_system("A", 2, 300), make_system("B", 2, 300), make_system("C", 2, 5000)}};
  BackendConfig cfg;
  cfg.faults = {{Fault::Kind::node_failure, "B", "B-h1", "", 200, 1}};
  const auto app = make_app("nf", 1000, 2);
  const Bytes input{4, 4};
  const auto data = bee::test::stage_input(dir.path(), input);
  const auto r = bee::test::run_sim(pool, app, make_uconf(), data, dir.path(), 2, std::nullopt, cfg);
  REQUIRE(r.history.size() == 3);
  CHECK(r.history[0].ended_by == EndedBy::timeslot_checkpoint);
  CHECK(r.history[1].ended_by == EndedBy::failure);
  CHECK(r.history[1].progress_delta == 0.0);
  CHECK(r.history[1].slot_duration_used >= 200.0);
  CHECK(r.history[1].slot_duration_used < 201.0);
  CHECK(r.history[2].ended_by == EndedBy::completion);
  CHECK(r.outcome == Outcome::completed);
  CHECK(sum_deltas(r) == 1000.0);
  CHECK(r.output_volume->content_digest == bee::test::oracle_output_digest(input, 1000));
}

TEST_CASE("workflow: non-checkpointable app fails at the guard") {
  TempDir dir;
  ResourcePool pool{{make_system("A", 1, 200), make_system("B", 1, 1e6)}};
  auto app = make_app("nc", 1000, 1);
  app.checkpointable = false;
  const auto r = bee::test::run_sim(pool, app, make_uconf(), bee::test::stage_input(dir.path(), {}), dir.path(), 1);
  CHECK(r.outcome == Outcome::failed);
  REQUIRE(r.history.size() == 1);
  CHECK(r.history[0].ended_by == EndedBy::failure);
  CHECK(r.error == "checkpoint unsupported");
}

TEST_CASE("workflow: failed checkpoint write ends the run") {
  TempDir dir;
  ResourcePool pool{{make_system("A", 1, 200), make_system("B", 1, 1e6)}};
  BackendConfig cfg;
  cfg.faults = {{Fault::Kind::checkpoint_write, "A", "", "", 0, 1}};
  const auto r = bee::test::run_sim(pool, make_app("cw", 1000, 1), make_uconf(),
                                    bee::test::stage_input(dir.path(), {}), dir.path(), 1, std::nullopt, cfg);
  CHECK(r.outcome == Outcome::failed);
  CHECK(r.error.find("checkpoint write failed") != std::string::npos);
}

TEST_CASE("workflow: corrupted transfers end the run") {
  TempDir dir;
  ResourcePool pool{{make_system("A", 1, 200), make_system("B", 1, 1e6)}};
  BackendConfig cfg;
  cfg.faults = {{Fault::Kind::transfer_corrupt, "B", "", "", 0, 2}};
  const auto r = bee::test::run_sim(pool, make_app("tc", 1000, 1), make_uconf(),
                                    bee::test::stage_input(dir.path(), {5}), dir.path(), 1, std::nullopt, cfg);
  CHECK(r.outcome == Outcome::failed);
  CHECK(r.history.back().ended_by == EndedBy::failure);
  CHECK(r.error.find("digest") != std::string::npos);
}

TEST_CASE("workflow: loop_pool revisits systems") {
  TempDir dir;
  ResourcePool pool{{make_system("A", 1, 300), make_system("B", 1, 300)}};
  const auto app = make_app("loop", 1000, 1);
  WorkflowOptions options;
  options.store = dir.path();
  options.loop_pool = true;
  BackendConfig cfg;
  cfg.kind = BackendKind::sim_hpc;
  const auto r = run_workflow(pool, app, bee::test::stage_input(dir.path(), {}), make_uconf(), backend_factory(cfg),
                              options);
  CHECK(r.outcome == Outcome::completed);
  CHECK(r.history.size() > 2);
  for (std::size_t i = 0; i < r.history.size(); ++i) CHECK(r.history[i].system_id == (i % 2 ? "B" : "A"));
  CHECK(sum_deltas(r) == 1000.0);
}

TEST_CASE("workflow: invalid configuration is rejected") {
  TempDir dir;
  WorkflowOptions options;
  options.store = dir.path();
  CHECK_THROWS_WITH_AS(run_workflow({}, make_app("x", 1, 1), {}, make_uconf(), backend_factory({}), options),
                       doctest::Contains("invalid configuration"), Error);
}

TEST_CASE("workflow: randomized properties") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    CAPTURE(seed);
    const auto sc = bee::test::make_scenario(seed);
    REQUIRE(validate(sc.pool, sc.app, sc.uconf).empty());
    TempDir dir;
    const auto data = bee::test::stage_input(dir.path(), sc.input);
    const auto r = bee::test::run_sim(sc.pool, sc.app, sc.uconf, data, dir.path(), seed);
    REQUIRE(r.outcome != Outcome::failed);
    double progress = 0;
    std::size_t cursor = 0;
    for (const auto& h : r.history) {
      CHECK(h.slot_duration_used <= sc.pool.find(h.system_id)->time_slot);
      CHECK(h.progress_delta >= 0);
      progress += h.progress_delta;
      while (cursor < sc.pool.systems.size() && sc.pool.systems[cursor].id != h.system_id) ++cursor;
      CHECK(cursor < sc.pool.systems.size());
      ++cursor;
    }
    CHECK(progress <= sc.app.work_total);
    if (r.outcome == Outcome::completed) {
      CHECK(progress == sc.app.work_total);
      CHECK(r.output_volume->content_digest == bee::test::oracle_output_digest(sc.input, sc.app.work_total));
    } else {
      const auto ck = storage::CheckpointStore::load(*r.checkpoint_manifest);
      CHECK(ck.progress == progress);
      const auto resumed = bee::test::run_sim(sc.fresh_pool, sc.app, sc.uconf, {}, dir.path(), seed, ck);
      REQUIRE(resumed.outcome == Outcome::completed);
      CHECK(ck.progress + sum_deltas(resumed) == sc.app.work_total);
      CHECK(resumed.output_volume->content_digest == bee::test::oracle_output_digest(sc.input, sc.app.work_total));
    }
  }
}

TEST_CASE("workflow: the same scenarios run on the local-process backend") {
  // Budgets are simulated seconds; one simulated second is 4 ms of wall time.
  BackendConfig cfg;
  cfg.kind = BackendKind::local;
  cfg.time_scale = 0.004;
  const Bytes input{1, 2, 3, 4, 5};

  SUBCASE("one slot") {
    TempDir dir;
    ResourcePool pool{{make_system("A", 2, 500)}};
    const auto app = make_app("l1", 60, 2);
    WorkflowOptions options;
    options.store = dir.path();
    const auto r = run_workflow(pool, app, bee::test::stage_input(dir.path(), input), make_uconf(),
                                backend_factory(cfg, dir / "local"), options);
    CHECK(r.outcome == Outcome::completed);
    REQUIRE(r.history.size() == 1);
    CHECK(r.history[0].slot_duration_used <= 500);
    CHECK(r.output_volume->content_digest == bee::test::oracle_output_digest(input, 60));
  }

  SUBCASE("migrate, stall and resume") {
    TempDir dir;
    ResourcePool pool{{make_system("A", 2, 250), make_system("B", 2, 250)}};
    const auto app = make_app("l2", 2000, 2);
    WorkflowOptions options;
    options.store = dir.path();
    const auto r = run_workflow(pool, app, bee::test::stage_input(dir.path(), input), make_uconf(),
                                backend_factory(cfg, dir / "local"), options);
    REQUIRE(r.outcome == Outcome::stalled_with_checkpoint);
    REQUIRE(r.history.size() == 2);
    for (const auto& h : r.history) {
      CHECK(h.ended_by == EndedBy::timeslot_checkpoint);
      CHECK(h.progress_delta > 0);
      CHECK(h.slot_duration_used <= 250);
    }
    const auto ck = storage::CheckpointStore::load(*r.checkpoint_manifest);
    CHECK(ck.progress == sum_deltas(r));

    ResourcePool fresh{{make_system("F", 2, 1e5)}};
    auto fast = cfg;
    fast.cpu_overhead_fraction = 0.0;
    WorkflowOptions resume;
    resume.store = dir.path();
    resume.resume_from = ck;
    auto big = make_system("F", 2, 1e5);
    big.cpu_rate_native = 20;
    const auto done = run_workflow(ResourcePool{{big}}, app, {}, make_uconf(), backend_factory(fast, dir / "local2"),
                                   resume);
    CHECK(done.outcome == Outcome::completed);
    CHECK(done.output_volume->content_digest == bee::test::oracle_output_digest(input, 2000));
    CHECK(fresh.systems.size() == 1);
  }
}

"""Decoupled planner/renderer pipeline.

Plan, render, and write stages communicate through bounded queues worked
by CPU-class (planner) and GPU-class (renderer) worker threads plus one
writer. A supervisor monitors heartbeats, requeues jobs lost to dead
workers (bounded by a retry limit), and declares the run unrecoverable
when a worker class is extinct with work pending. Idle planners may take
render jobs at a configured slowdown once the render queue backs up and no
plan work remains. All per-episode randomness is pre-derived from
(root seed, episode index), so any worker configuration - including the
serial baseline - produces byte-identical stores.

A serial baseline (plan-then-render on one worker, failed episodes charged
full render cost in synthetic mode) provides the speedup denominator for
benchmarks.
"""

from __future__ import annotations

import json
import queue
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import AlreadyExists, ConfigInvalid, PipelineAborted, StoreUnwritable
from .generation import PlannedEpisode, plan_episode_job, render_episode_job
from .planner import PlanParams
from .rng import SeededRng
from .store import finalize_store, write_episode

# ---------------------------------------------------------------------------
# Specs and report
# ---------------------------------------------------------------------------


@dataclass
class SyntheticCosts:
    """Injected stage delays so benchmarks run in seconds on one machine."""

    plan_s: float = 0.0
    render_setup_s: float = 0.0  # fixed per render invocation (o)
    render_frame_s: float = 0.0  # per frame (c)
    frames_per_episode: int = 1
    plan_success_rate: float = 1.0


@dataclass
class FaultInjection:
    """Kill a worker silently after it has completed `after_jobs` jobs."""

    kill_worker: str
    after_jobs: int = 1


@dataclass
class JobSpec:
    episodes: int
    root_seed: int = 0
    config: object = None
    registry: object = None
    out_root: str | None = None
    planner_workers: int = 4
    renderer_workers: int = 1
    queue_capacity: int = 8
    retry_limit: int = 2
    render_batch: int = 1
    heartbeat_timeout_s: float = 5.0
    supervision_interval_s: float = 0.05
    cpu_render_spillover: bool = True
    spillover_slowdown: float = 4.0
    spillover_threshold: int = 4
    synthetic: SyntheticCosts | None = None
    fault: FaultInjection | None = None
    plan_params: PlanParams = field(default_factory=PlanParams)

    def __post_init__(self):
        if self.episodes < 0 or self.planner_workers < 1 or self.renderer_workers < 1:
            raise ConfigInvalid("worker counts must be >= 1 and episodes >= 0")
        if self.queue_capacity < 1 or self.render_batch < 1 or self.retry_limit < 0:
            raise ConfigInvalid("queue capacity and render batch must be >= 1")


@dataclass
class WorkerState:
    worker_id: str
    klass: str  # "cpu" | "gpu"
    status: str = "idle"  # idle | busy | suspected-dead
    current_job: object = None
    heartbeat: float = 0.0


@dataclass
class StageJob:
    episode_index: int
    phase: str  # plan | render | write
    payload: object = None
    attempt: int = 0
    enqueue_ts: float = 0.0
    start_ts: float = 0.0
    finish_ts: float = 0.0
    done: bool = False
    requeued: bool = False


@dataclass
class RunReport:
    mode: str = "pipelined"
    attempted: int = 0
    planned_ok: int = 0
    validated_ok: int = 0
    rendered: int = 0
    written: int = 0
    plan_failed: int = 0
    validation_failed: int = 0
    permanently_failed: int = 0
    retries: int = 0
    frames_written: int = 0
    wall_time_s: float = 0.0
    stage_busy_s: dict = field(default_factory=dict)
    worker_utilization: dict = field(default_factory=dict)
    queue_high_water: dict = field(default_factory=dict)
    throughput_eps_per_s: float = 0.0
    throughput_frames_per_s: float = 0.0
    speedup_vs_baseline: float | None = None
    aborted: bool = False
    failures: list = field(default_factory=list)  # (episode, detail) samples

    def accounting_ok(self) -> bool:
        return self.attempted == (
            self.written + self.plan_failed + self.validation_failed + self.permanently_failed
        )

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "attempted": self.attempted,
            "planned_ok": self.planned_ok,
            "validated_ok": self.validated_ok,
            "rendered": self.rendered,
            "written": self.written,
            "plan_failed": self.plan_failed,
            "validation_failed": self.validation_failed,
            "permanently_failed": self.permanently_failed,
            "retries": self.retries,
            "frames_written": self.frames_written,
            "wall_time_s": self.wall_time_s,
            "stage_busy_s": self.stage_busy_s,
            "worker_utilization": self.worker_utilization,
            "queue_high_water": self.queue_high_water,
            "throughput_eps_per_s": self.throughput_eps_per_s,
            "throughput_frames_per_s": self.throughput_frames_per_s,
            "speedup_vs_baseline": self.speedup_vs_baseline,
            "aborted": self.aborted,
            "failures": self.failures[:20],
        }


def write_run_report(report: RunReport, out_root: str | Path):
    path = Path(out_root) / "run_report.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report.to_dict(), sort_keys=True, indent=1) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Pure policy functions (unit-testable without threads)
# ---------------------------------------------------------------------------


def schedule(
    plan_pending: int,
    render_pending: int,
    workers: list,
    spillover: bool = True,
    spillover_threshold: int = 4,
) -> list:
    """Work-conserving assignment of queued jobs to idle workers.

    CPU workers take plan jobs; GPU workers take render jobs; when the
    render queue exceeds the threshold and no plan work is waiting, idle
    CPU workers spill over to render jobs.
    """
    assignments = []
    plan_left, render_left = plan_pending, render_pending
    for worker in workers:
        if worker.status != "idle":
            continue
        if worker.klass == "gpu" and render_left > 0:
            assignments.append((worker.worker_id, "render"))
            render_left -= 1
        elif worker.klass == "cpu" and plan_left > 0:
            assignments.append((worker.worker_id, "plan"))
            plan_left -= 1
    if spillover and plan_left == 0:
        for worker in workers:
            if worker.status != "idle" or worker.klass != "cpu":
                continue
            if any(a[0] == worker.worker_id for a in assignments):
                continue
            if render_left > spillover_threshold:
                assignments.append((worker.worker_id, "render"))
                render_left -= 1
    return assignments


def balance(episodes: int, capacities: list) -> list:
    """Partition episode indices proportionally to node capacities.

    Largest-remainder apportionment; leftover units go to nodes in
    descending remainder, ties broken by lower node index, so the split is
    deterministic and imbalance after rounding is at most one episode.
    """
    caps = [float(c) for c in capacities]
    if not caps or any(c <= 0 for c in caps):
        raise ValueError("capacities must be positive")
    total = sum(caps)
    quotas = [episodes * c / total for c in caps]
    counts = [int(np.floor(q)) for q in quotas]
    leftover = episodes - sum(counts)
    order = sorted(range(len(caps)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[:leftover]:
        counts[i] += 1
    out, cursor = [], 0
    for count in counts:
        out.append(list(range(cursor, cursor + count)))
        cursor += count
    return out


@dataclass
class SupervisionPolicy:
    heartbeat_timeout_s: float = 5.0
    retry_limit: int = 2


def supervise(workers: list, in_flight: dict, policy: SupervisionPolicy, now: float) -> list:
    """Actions for stale workers: mark dead, requeue or permanently fail
    their in-flight jobs. Re-applying the same actions is a no-op."""
    actions = []
    for worker in workers:
        if worker.status == "suspected-dead":
            continue
        if worker.status == "busy" and now - worker.heartbeat > policy.heartbeat_timeout_s:
            actions.append(("mark_dead", worker.worker_id))
            job = in_flight.get(worker.worker_id)
            if job is not None and not job.done and not job.requeued:
                if job.attempt + 1 > policy.retry_limit:
                    actions.append(("fail_permanently", job))
                else:
                    actions.append(("requeue", job))
    return actions


def predict_speedup(plan_s: float, render_s: float, success_rate: float,
                    planners: int, renderers: int) -> float:
    """Bottleneck-throughput model: serial cost over the slowest stage."""
    serial = plan_s + render_s
    pipelined = max(plan_s / planners, success_rate * render_s / renderers)
    return serial / pipelined


def stack_render(batch: list, executor) -> list:
    """Render a batch with one setup cost; per-job failures do not fail the
    batch. Returns (job, result-or-exception) pairs in input order."""
    if not batch:
        return []
    executor.setup(batch)
    out = []
    for job in batch:
        try:
            out.append((job, executor.render(job.payload)))
        except Exception as exc:  # propagate per-job, keep the batch alive
            out.append((job, exc))
    return out


# ---------------------------------------------------------------------------
# Executors
# ---------------------------------------------------------------------------


class LocalRenderExecutor:
    """In-process rendering with optional synthetic stage costs."""

    def __init__(self, synthetic: SyntheticCosts | None = None, slowdown: float = 1.0):
        self.synthetic = synthetic
        self.slowdown = slowdown

    def setup(self, batch):
        if self.synthetic and self.synthetic.render_setup_s > 0:
            time.sleep(self.synthetic.render_setup_s * self.slowdown)

    def render(self, payload):
        if self.synthetic:
            cost = self.synthetic.render_frame_s * self.synthetic.frames_per_episode
            if cost > 0:
                time.sleep(cost * self.slowdown)
            if isinstance(payload, PlannedEpisode):
                return render_episode_job(payload)
            return payload
        return render_episode_job(payload)


class _TrackingQueue(queue.Queue):
    """Bounded queue that records its high-water mark."""

    def __init__(self, maxsize: int):
        super().__init__(maxsize=maxsize)
        self.high_water = 0
        self._hw_lock = threading.Lock()

    def put(self, item, block=True, timeout=None):
        super().put(item, block=block, timeout=timeout)
        with self._hw_lock:
            self.high_water = max(self.high_water, self.qsize())


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------


class _Engine:
    def __init__(self, job: JobSpec, render_executor_factory=None):
        self.job = job
        self.rng = SeededRng(job.root_seed)
        self.plan_q = _TrackingQueue(job.queue_capacity)
        self.render_q = _TrackingQueue(job.queue_capacity)
        self.write_q = _TrackingQueue(job.queue_capacity)
        self.stop = threading.Event()
        self.abort_reason: str | None = None
        self.lock = threading.Lock()
        self.workers: dict[str, WorkerState] = {}
        self.in_flight: dict[str, StageJob] = {}
        self.terminal: dict[int, str] = {}  # episode -> written|plan_failed|...
        self.busy: dict[str, float] = {}
        self.stage_busy: dict[str, float] = {"plan": 0.0, "render": 0.0, "write": 0.0}
        self.retries = 0
        self.rendered = 0
        self.planned_ok = 0
        self.validated_ok = 0
        self.frames_written = 0
        self.failures: list = []
        self.feed_done = threading.Event()
        self._render_factory = render_executor_factory or (
            lambda slowdown: LocalRenderExecutor(job.synthetic, slowdown)
        )
        self._start = time.monotonic()

    # -- episode execution --

    def _plan(self, episode_index: int):
        job = self.job
        if job.synthetic is not None:
            if job.synthetic.plan_s > 0:
                time.sleep(job.synthetic.plan_s)
            coin = self.rng.stream(episode_index, "synthetic-plan").uniform()
            ok = coin < job.synthetic.plan_success_rate
            return PlannedEpisode(
                episode_index=episode_index,
                status="planned" if ok else "plan_failed",
                task="synthetic",
                embodiment="synthetic",
                failure_detail="" if ok else "synthetic plan failure",
            )
        return plan_episode_job(job.config, job.registry, self.rng, episode_index, job.plan_params)

    def _write(self, episode_index: int, record):
        if self.job.out_root is None or self.job.synthetic is not None:
            frames = getattr(record, "frame_count", 0) if hasattr(record, "frame_count") else 0
            return frames if isinstance(frames, int) else 0
        try:
            write_episode(record, self.job.out_root)
        except AlreadyExists:
            return 0  # duplicate retry after a completed write: keep exactly-once
        return record.frame_count

    # -- accounting --

    def _settle(self, episode_index: int, outcome: str, detail: str = ""):
        with self.lock:
            if episode_index in self.terminal:
                return
            self.terminal[episode_index] = outcome
            if detail:
                self.failures.append((episode_index, detail))

    def _all_done(self) -> bool:
        with self.lock:
            return len(self.terminal) >= self.job.episodes

    # -- workers --

    def _heartbeat(self, state: WorkerState):
        state.heartbeat = time.monotonic()

    def _should_die(self, state: WorkerState, jobs_done: int) -> bool:
        fault = self.job.fault
        return (
            fault is not None
            and fault.kill_worker == state.worker_id
            and jobs_done >= fault.after_jobs
        )

    def _record_busy(self, state: WorkerState, phase: str, seconds: float):
        with self.lock:
            self.busy[state.worker_id] = self.busy.get(state.worker_id, 0.0) + seconds
            self.stage_busy[phase] += seconds

    def _begin(self, state: WorkerState, stage_job: StageJob):
        stage_job.start_ts = time.monotonic()
        with self.lock:
            state.status = "busy"
            state.current_job = stage_job
            self.in_flight[state.worker_id] = stage_job
        self._heartbeat(state)

    def _finish(self, state: WorkerState, stage_job: StageJob, phase: str):
        stage_job.finish_ts = time.monotonic()
        stage_job.done = True
        self._record_busy(state, phase, stage_job.finish_ts - stage_job.start_ts)
        with self.lock:
            state.status = "idle"
            state.current_job = None
            self.in_flight.pop(state.worker_id, None)
        self._heartbeat(state)

    def _put(self, target: _TrackingQueue, item, state: WorkerState | None) -> bool:
        while not self.stop.is_set():
            try:
                target.put(item, timeout=0.02)
                return True
            except queue.Full:
                if state is not None:
                    self._heartbeat(state)
        return False

    def _planner_loop(self, state: WorkerState):
        jobs_done = 0
        executor = None
        while not self.stop.is_set():
            self._heartbeat(state)
            stage_job = None
            phase = "plan"
            try:
                stage_job = self.plan_q.get(timeout=0.02)
            except queue.Empty:
                if (
                    self.job.cpu_render_spillover
                    and self.feed_done.is_set()
                    and self.plan_q.qsize() == 0
                    and self.render_q.qsize() > self.job.spillover_threshold
                ):
                    try:
                        stage_job = self.render_q.get_nowait()
                        phase = "render"
                    except queue.Empty:
                        continue
                else:
                    continue
            if self._should_die(state, jobs_done):
                # Silent death: job stays in flight, heartbeat stops.
                with self.lock:
                    state.current_job = stage_job
                    state.status = "busy"
                    self.in_flight[state.worker_id] = stage_job
                return
            self._begin(state, stage_job)
            if phase == "plan":
                try:
                    planned = self._plan(stage_job.episode_index)
                except Exception as exc:  # infrastructure failure -> retry path
                    self._finish(state, stage_job, "plan")
                    self._requeue_or_fail(stage_job, self.plan_q, f"plan crash: {exc}")
                    continue
                if planned.status == "planned":
                    with self.lock:
                        self.planned_ok += 1
                        self.validated_ok += 1
                    render_job = StageJob(stage_job.episode_index, "render", payload=planned)
                    self._finish(state, stage_job, "plan")
                    self._put(self.render_q, render_job, state)
                else:
                    if planned.status == "validation_failed":
                        with self.lock:
                            self.planned_ok += 1
                    self._finish(state, stage_job, "plan")
                    self._settle(stage_job.episode_index, planned.status, planned.failure_detail)
            else:
                if executor is None:
                    executor = self._render_factory(self.job.spillover_slowdown)
                self._run_render_batch(state, [stage_job], executor)
            jobs_done += 1

    def _renderer_loop(self, state: WorkerState):
        executor = self._render_factory(1.0)
        jobs_done = 0
        while not self.stop.is_set():
            self._heartbeat(state)
            try:
                first = self.render_q.get(timeout=0.02)
            except queue.Empty:
                continue
            if self._should_die(state, jobs_done):
                with self.lock:
                    state.current_job = first
                    state.status = "busy"
                    self.in_flight[state.worker_id] = first
                return
            batch = [first]
            while len(batch) < self.job.render_batch:
                try:
                    batch.append(self.render_q.get_nowait())
                except queue.Empty:
                    break
            self._run_render_batch(state, batch, executor)
            jobs_done += len(batch)

    def _run_render_batch(self, state: WorkerState, batch: list, executor):
        # The whole batch is in flight for this worker; restore the tail on
        # failure detection via per-job requeue.
        for stage_job in batch:
            stage_job.start_ts = time.monotonic()
        self._begin(state, batch[0])
        results = stack_render(batch, executor)
        for stage_job, result in results:
            if isinstance(result, Exception):
                self._requeue_or_fail(stage_job, self.render_q, f"render: {result}")
                continue
            with self.lock:
                self.rendered += 1
            write_job = StageJob(stage_job.episode_index, "write", payload=result)
            self._put(self.write_q, write_job, state)
        self._finish(state, batch[0], "render")

    def _writer_loop(self):
        while not self.stop.is_set():
            try:
                stage_job = self.write_q.get(timeout=0.02)
            except queue.Empty:
                continue
            start = time.monotonic()
            try:
                frames = self._write(stage_job.episode_index, stage_job.payload)
            except Exception as exc:
                self._settle(stage_job.episode_index, "permanently_failed", f"write: {exc}")
                continue
            with self.lock:
                self.frames_written += frames
                self.stage_busy["write"] += time.monotonic() - start
            self._settle(stage_job.episode_index, "written")

    def _requeue_or_fail(self, stage_job: StageJob, target: _TrackingQueue, detail: str):
        if stage_job.attempt + 1 > self.job.retry_limit:
            self._settle(stage_job.episode_index, "permanently_failed", detail)
            return
        with self.lock:
            self.retries += 1
        retry = StageJob(stage_job.episode_index, stage_job.phase, payload=stage_job.payload,
                         attempt=stage_job.attempt + 1)
        self._put(target, retry, None)

    def _feeder(self):
        for index in range(self.job.episodes):
            job = StageJob(index, "plan")
            if not self._put(self.plan_q, job, None):
                return
        self.feed_done.set()

    def _supervisor_loop(self):
        policy = SupervisionPolicy(self.job.heartbeat_timeout_s, self.job.retry_limit)
        while not self.stop.is_set():
            time.sleep(self.job.supervision_interval_s)
            now = time.monotonic()
            with self.lock:
                workers = list(self.workers.values())
                in_flight = dict(self.in_flight)
            actions = supervise(workers, in_flight, policy, now)
            for action in actions:
                if action[0] == "mark_dead":
                    with self.lock:
                        self.workers[action[1]].status = "suspected-dead"
                elif action[0] == "requeue":
                    job = action[1]
                    job.requeued = True
                    with self.lock:
                        self.retries += 1
                    target = self.plan_q if job.phase == "plan" else self.render_q
                    retry = StageJob(job.episode_index, job.phase, payload=job.payload,
                                     attempt=job.attempt + 1)
                    self._put(target, retry, None)
                elif action[0] == "fail_permanently":
                    job = action[1]
                    job.requeued = True
                    self._settle(job.episode_index, "permanently_failed", "retry limit exceeded")
            # Unrecoverable: a worker class is extinct while work remains.
            with self.lock:
                alive_cpu = any(
                    w.klass == "cpu" and w.status != "suspected-dead" for w in self.workers.values()
                )
                alive_gpu = any(
                    w.klass == "gpu" and w.status != "suspected-dead" for w in self.workers.values()
                )
                done = len(self.terminal) >= self.job.episodes
            if done:
                continue
            if not alive_cpu and (not self.feed_done.is_set() or self.plan_q.qsize() > 0):
                self.abort_reason = "no planner workers left with plan work pending"
                self.stop.set()
            if not alive_gpu and not alive_cpu and self.render_q.qsize() > 0:
                self.abort_reason = "no workers left with render work pending"
                self.stop.set()

    def run(self) -> RunReport:
        job = self.job
        threads = []
        for i in range(job.planner_workers):
            state = WorkerState(worker_id=f"planner-{i}", klass="cpu", heartbeat=time.monotonic())
            self.workers[state.worker_id] = state
            threads.append(threading.Thread(target=self._planner_loop, args=(state,), daemon=True))
        for i in range(job.renderer_workers):
            state = WorkerState(worker_id=f"renderer-{i}", klass="gpu", heartbeat=time.monotonic())
            self.workers[state.worker_id] = state
            threads.append(threading.Thread(target=self._renderer_loop, args=(state,), daemon=True))
        threads.append(threading.Thread(target=self._writer_loop, daemon=True))
        threads.append(threading.Thread(target=self._supervisor_loop, daemon=True))
        feeder = threading.Thread(target=self._feeder, daemon=True)

        start = time.monotonic()
        for t in threads:
            t.start()
        feeder.start()
        while not self.stop.is_set():
            if self._all_done():
                self.stop.set()
                break
            time.sleep(0.005)
        feeder.join(timeout=5)
        for t in threads:
            t.join(timeout=10)
        wall = time.monotonic() - start

        report = self._report(wall)
        if self.abort_reason is not None:
            report.aborted = True
            raise PipelineAborted(self.abort_reason, report)
        return report

    def _report(self, wall: float) -> RunReport:
        job = self.job
        outcomes = self.terminal
        written = sum(1 for v in outcomes.values() if v == "written")
        report = RunReport(
            mode="pipelined",
            attempted=job.episodes,
            planned_ok=self.planned_ok,
            validated_ok=self.validated_ok,
            rendered=self.rendered,
            written=written,
            plan_failed=sum(1 for v in outcomes.values() if v == "plan_failed"),
            validation_failed=sum(1 for v in outcomes.values() if v == "validation_failed"),
            permanently_failed=sum(1 for v in outcomes.values() if v == "permanently_failed"),
            retries=self.retries,
            frames_written=self.frames_written,
            wall_time_s=wall,
            stage_busy_s={k: round(v, 6) for k, v in self.stage_busy.items()},
            worker_utilization={
                k: min(1.0, self.busy.get(k, 0.0) / wall) if wall > 0 else 0.0 for k in self.workers
            },
            queue_high_water={
                "plan": self.plan_q.high_water,
                "render": self.render_q.high_water,
                "write": self.write_q.high_water,
            },
            throughput_eps_per_s=written / wall if wall > 0 else 0.0,
            throughput_frames_per_s=self.frames_written / wall if wall > 0 else 0.0,
            failures=self.failures,
        )
        return report


def run_pipeline(job: JobSpec, render_executor_factory=None) -> RunReport:
    """Run the decoupled pipelined mode; returns the run report and writes
    run_report.json next to the store when out_root is set."""
    if job.out_root is not None and job.synthetic is None:
        out = Path(job.out_root)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise StoreUnwritable(str(exc)) from exc
    engine = _Engine(job, render_executor_factory)
    report = engine.run()
    if job.out_root is not None and job.synthetic is None:
        finalize_store(job.out_root, fps=1.0 / job.plan_params.dt)
        write_run_report(report, job.out_root)
    return report


def run_serial_baseline(job: JobSpec) -> RunReport:
    """Single-stage baseline: one worker plans then renders each episode.

    In synthetic mode failed episodes still pay the full render cost (the
    integrated architecture cannot skip rendering work scheduled with the
    episode)."""
    rng = SeededRng(job.root_seed)
    report = RunReport(mode="serial", attempted=job.episodes)
    executor = LocalRenderExecutor(job.synthetic, 1.0)
    start = time.monotonic()
    busy_plan = 0.0
    busy_render = 0.0
    for index in range(job.episodes):
        t0 = time.monotonic()
        if job.synthetic is not None:
            if job.synthetic.plan_s > 0:
                time.sleep(job.synthetic.plan_s)
            ok = rng.stream(index, "synthetic-plan").uniform() < job.synthetic.plan_success_rate
            planned = PlannedEpisode(index, "planned" if ok else "plan_failed", "synthetic", "synthetic")
        else:
            planned = plan_episode_job(job.config, job.registry, rng, index, job.plan_params)
        busy_plan += time.monotonic() - t0
        t1 = time.monotonic()
        if planned.status in ("planned", "validation_failed"):
            report.planned_ok += 1
        if planned.status == "planned":
            report.validated_ok += 1
            executor.setup([planned])
            record = executor.render(planned)
            report.rendered += 1
            busy_render += time.monotonic() - t1
            if job.out_root is not None and job.synthetic is None:
                write_episode(record, job.out_root)
                report.frames_written += record.frame_count
            report.written += 1
        else:
            if job.synthetic is not None:
                # Full render cost charged to the failed episode.
                executor.setup([planned])
                executor.render(None)
                busy_render += time.monotonic() - t1
            if planned.status == "validation_failed":
                report.validation_failed += 1
            else:
                report.plan_failed += 1
            report.failures.append((index, planned.failure_detail))
    report.wall_time_s = time.monotonic() - start
    report.stage_busy_s = {"plan": round(busy_plan, 6), "render": round(busy_render, 6), "write": 0.0}
    report.worker_utilization = {"serial-0": 1.0 if report.wall_time_s > 0 else 0.0}
    report.throughput_eps_per_s = report.written / report.wall_time_s if report.wall_time_s else 0.0
    if job.out_root is not None and job.synthetic is None:
        finalize_store(job.out_root, fps=1.0 / job.plan_params.dt)
        write_run_report(report, job.out_root)
    return report


def run_bench(job: JobSpec) -> dict:
    """Serial baseline plus pipelined run with shared seeds; returns both
    reports, the measured speedup, and the bottleneck-model prediction."""
    if job.synthetic is None:
        raise ConfigInvalid("bench mode requires synthetic stage costs")
    serial = run_serial_baseline(job)
    pipelined = run_pipeline(job)
    speedup = serial.wall_time_s / pipelined.wall_time_s if pipelined.wall_time_s > 0 else float("inf")
    pipelined.speedup_vs_baseline = speedup
    render_s = job.synthetic.render_setup_s + job.synthetic.render_frame_s * job.synthetic.frames_per_episode
    prediction = predict_speedup(
        job.synthetic.plan_s, render_s, job.synthetic.plan_success_rate,
        job.planner_workers, job.renderer_workers,
    )
    return {
        "serial": serial,
        "pipelined": pipelined,
        "speedup": speedup,
        "prediction": prediction,
    }

"""Closed-loop trials, Monte-Carlo sweeps and their CSV logs.

A trial wires together the true world (simulator), the controller's
possibly-perturbed model of it, and the per-step measurement noise, then
runs measure -> solve -> command -> advance until the success predicate
holds, the controller fails out, the environment fails, or the step
budget runs dry. Everything is deterministic given the seed; sweeps
derive per-trial seeds from a master seed so results are identical for
any worker count.

Trial logs deliberately exclude wall-clock timings so that reruns are
byte-identical; solve times live in a separate sidecar file.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .contact import evaluate_all
from .controller import Controller
from .scenario import Scenario, load_scenario
from .sim import QuasistaticSim, SimulationError, TrialNoise, WorldState

SCHEMA_VERSION = 1

SUCCESS = "success"
CONTROLLER_FAILURE = "controller_failure"
ENV_FAILURE = "env_failure"
TIMEOUT = "timeout"


@dataclass
class StepRow:
    t: int
    q_true: np.ndarray
    q_measured: np.ndarray
    q_tilde: np.ndarray
    lam_cmd: np.ndarray          # (n_c, 3) commanded forces
    lam_real: np.ndarray         # (n_c, 3) realized forces
    gaps: np.ndarray             # (n_c,) measured distances at solve time
    slip: np.ndarray             # (n_c,) planned slip bounds
    slack: np.ndarray            # (n_c,) relaxation slacks
    status: str
    objective: float
    solve_time: float


@dataclass
class TrialRecord:
    scenario: str
    seed: int
    model_error: float
    measurement_noise: float
    relaxed: bool
    outcome: str
    steps: int
    final_q: np.ndarray
    rows: list = field(default_factory=list)

    @property
    def succeeded(self) -> bool:
        return self.outcome == SUCCESS


def run_trial(scenario: Scenario, seed: int = 0, model_error: float = None,
              measurement: float = None, relaxed: bool = True,
              keep_rows: bool = True) -> TrialRecord:
    """Run one closed-loop trial; fully deterministic per seed."""
    noise_model = scenario.noise(model_error=model_error, measurement=measurement,
                                 seed=seed)
    true_world = scenario.build_world()
    sim = QuasistaticSim(true_world, scenario.sim_config())
    noise = TrialNoise(noise_model, true_world)
    ctrl_world = scenario.build_world(shape_overrides=noise.shapes)
    cfg = scenario.controller_config(relaxed=relaxed)
    controller = Controller(ctrl_world, scenario.task(), cfg)
    success = scenario.success()

    state = sim.initial_state()
    rows = []
    outcome = TIMEOUT
    hold = 0
    for t in range(success.max_steps):
        q_meas = noise.measure(state.q)
        cmd = controller.step(q_meas)
        if controller.failed_out:
            outcome = CONTROLLER_FAILURE
            break
        try:
            state = sim.advance(state, cmd, cfg.h)
        except SimulationError:
            outcome = ENV_FAILURE
            break
        if keep_rows:
            rows.append(StepRow(
                t=t, q_true=state.q.copy(), q_measured=q_meas,
                q_tilde=cmd.q_tilde.copy(), lam_cmd=cmd.lambda_next.copy(),
                lam_real=state.lam.copy(), gaps=cmd.gaps.copy(),
                slip=cmd.slip.copy(), slack=cmd.slack.copy(),
                status=cmd.status, objective=cmd.objective,
                solve_time=cmd.solve_time))
        if success.satisfied(true_world, state.q):
            hold += 1
            if hold >= success.hold_steps:
                outcome = SUCCESS
                break
        else:
            hold = 0
    return TrialRecord(scenario=scenario.name, seed=seed,
                       model_error=noise_model.model_error_scale,
                       measurement_noise=noise_model.measurement_noise_scale,
                       relaxed=relaxed, outcome=outcome,
                       steps=state.t, final_q=state.q.copy(), rows=rows)


# ---------------------------------------------------------------------------
# CSV logs


def _fmt(v: float) -> str:
    return repr(float(v))


def record_columns(record: TrialRecord) -> list:
    n_c = record.rows[0].lam_cmd.shape[0] if record.rows else 0
    n_q = len(record.final_q)
    n_a = len(record.rows[0].q_tilde) if record.rows else 0
    cols = ["t", "status", "objective"]
    cols += [f"q{i}" for i in range(n_q)]
    cols += [f"q_meas{i}" for i in range(n_q)]
    cols += [f"q_tilde{i}" for i in range(n_a)]
    for i in range(n_c):
        cols += [f"c{i}_gap", f"c{i}_slip", f"c{i}_slack",
                 f"c{i}_fn_cmd", f"c{i}_ft_cmd", f"c{i}_fn_real", f"c{i}_ft_real"]
    return cols


def dump_record(record: TrialRecord) -> str:
    """Deterministic CSV text of a trial (no timing columns)."""
    buf = io.StringIO()
    buf.write(f"# lcqp2d-trial schema={SCHEMA_VERSION} scenario={record.scenario} "
              f"seed={record.seed} model_error={_fmt(record.model_error)} "
              f"measurement={_fmt(record.measurement_noise)} "
              f"relaxed={int(record.relaxed)} outcome={record.outcome}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(record_columns(record))
    for r in record.rows:
        row = [r.t, r.status, _fmt(r.objective)]
        row += [_fmt(v) for v in r.q_true]
        row += [_fmt(v) for v in r.q_measured]
        row += [_fmt(v) for v in r.q_tilde]
        for i in range(r.lam_cmd.shape[0]):
            row += [_fmt(r.gaps[i]), _fmt(r.slip[i]), _fmt(r.slack[i]),
                    _fmt(r.lam_cmd[i, 2]), _fmt(r.lam_cmd[i, 0] - r.lam_cmd[i, 1]),
                    _fmt(r.lam_real[i, 2]), _fmt(r.lam_real[i, 0] - r.lam_real[i, 1])]
        writer.writerow(row)
    return buf.getvalue()


def write_record(record: TrialRecord, path) -> None:
    Path(path).write_text(dump_record(record), encoding="utf-8")


def read_record(path) -> TrialRecord:
    """Load a trial log written by write_record."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# lcqp2d-trial "):
        raise ValueError("not a trial log (missing header)")
    meta = dict(item.split("=", 1) for item in lines[0][2:].split()[1:])
    reader = csv.reader(lines[1:])
    header = next(reader)
    n_q = sum(1 for c in header if c.startswith("q") and c[1:].isdigit())
    n_a = sum(1 for c in header if c.startswith("q_tilde"))
    n_c = sum(1 for c in header if c.endswith("_gap"))
    rows = []
    for cells in reader:
        if not cells:
            continue
        it = iter(cells)
        t = int(next(it))
        status = next(it)
        objective = float(next(it))
        q_true = np.array([float(next(it)) for _ in range(n_q)])
        q_meas = np.array([float(next(it)) for _ in range(n_q)])
        q_tilde = np.array([float(next(it)) for _ in range(n_a)])
        gaps = np.zeros(n_c)
        slip = np.zeros(n_c)
        slack = np.zeros(n_c)
        lam_cmd = np.zeros((n_c, 3))
        lam_real = np.zeros((n_c, 3))
        for i in range(n_c):
            gaps[i] = float(next(it))
            slip[i] = float(next(it))
            slack[i] = float(next(it))
            fn_c, ft_c = float(next(it)), float(next(it))
            fn_r, ft_r = float(next(it)), float(next(it))
            lam_cmd[i] = (max(ft_c, 0.0), max(-ft_c, 0.0), fn_c)
            lam_real[i] = (max(ft_r, 0.0), max(-ft_r, 0.0), fn_r)
        rows.append(StepRow(t=t, q_true=q_true, q_measured=q_meas, q_tilde=q_tilde,
                            lam_cmd=lam_cmd, lam_real=lam_real, gaps=gaps,
                            slip=slip, slack=slack, status=status,
                            objective=objective, solve_time=0.0))
    final_q = rows[-1].q_true if rows else np.zeros(n_q)
    return TrialRecord(
        scenario=meta.get("scenario", ""),
        seed=int(meta.get("seed", 0)),
        model_error=float(meta.get("model_error", 0.0)),
        measurement_noise=float(meta.get("measurement", 0.0)),
        relaxed=bool(int(meta.get("relaxed", 1))),
        outcome=meta.get("outcome", ""),
        steps=rows[-1].t if rows else 0,
        final_q=final_q,
        rows=rows,
    )


def write_timing_sidecar(record: TrialRecord, path) -> None:
    """Wall-clock solve times; kept out of the deterministic log."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "solve_time_s"])
        for r in record.rows:
            writer.writerow([r.t, f"{r.solve_time:.6f}"])


# ---------------------------------------------------------------------------
# Monte-Carlo sweeps


def trial_seed(master_seed: int, cell: int, trial: int) -> int:
    """Deterministic per-trial seed, independent of scheduling."""
    seq = np.random.SeedSequence([master_seed, cell, trial])
    return int(seq.generate_state(1, dtype=np.uint64)[0] % (2 ** 63))


def _sweep_task(args):
    source, cell_index, trial_index, model_error, measurement, relaxed, master = args
    scenario = load_scenario(source)
    seed = trial_seed(master, cell_index, trial_index)
    rec = run_trial(scenario, seed=seed, model_error=model_error,
                    measurement=measurement, relaxed=relaxed, keep_rows=False)
    return cell_index, trial_index, rec.outcome, rec.steps


@dataclass
class SweepResult:
    grid: list                   # (model_error, measurement) per cell
    n_trials: int
    successes: np.ndarray        # per cell
    outcomes: list               # per cell: list of outcome strings by trial
    relaxed: bool
    master_seed: int

    def rate(self, cell: int) -> float:
        return float(self.successes[cell]) / self.n_trials

    def table(self, model_values, measurement_values) -> str:
        lines = ["measurement\\model_error," + ",".join(_fmt(m) for m in model_values)]
        for i, meas in enumerate(measurement_values):
            cells = []
            for j in range(len(model_values)):
                cells.append(f"{self.rate(i * len(model_values) + j):.2f}")
            lines.append(_fmt(meas) + "," + ",".join(cells))
        return "\n".join(lines) + "\n"


def run_sweep(source, model_values, measurement_values, n_trials: int,
              master_seed: int = 0, relaxed: bool = True, jobs: int = None) -> SweepResult:
    """Success rates over a noise grid; deterministic for any worker count."""
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    grid = [(m, s) for s in measurement_values for m in model_values]
    tasks = []
    for cell, (model_error, meas) in enumerate(grid):
        for trial in range(n_trials):
            tasks.append((source, cell, trial, model_error, meas, relaxed, master_seed))
    jobs = jobs or os.cpu_count() or 1
    results = []
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for out in pool.map(_sweep_task, tasks, chunksize=4):
                results.append(out)
    else:
        results = [_sweep_task(t) for t in tasks]
    successes = np.zeros(len(grid), dtype=int)
    outcomes = [[None] * n_trials for _ in grid]
    for cell, trial, outcome, steps in results:
        outcomes[cell][trial] = outcome
        if outcome == SUCCESS:
            successes[cell] += 1
    return SweepResult(grid=grid, n_trials=n_trials, successes=successes,
                       outcomes=outcomes, relaxed=relaxed, master_seed=master_seed)

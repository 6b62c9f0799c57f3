"""Config-driven experiment runner.

Loads a JSON config (numbers may be decimal strings, so schedule constants
survive byte-identically), executes one of the verification suites, and
writes machine-readable artifacts: a JSON report, per-point orbit CSV data,
and the serialized push-out construction.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import platform
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from .contact import ContactPoint, TangentVector
from .fatou_bieberbach import (
    EpsSchedule,
    PushOutState,
    build_pushout,
    desk_schedule,
    orbit_logs_batch,
    omega_membership,
    state_to_dict,
)
from .kobayashi import (
    SearchBudget,
    cck_distance_upper,
    directed_norm_lower,
    directed_norm_upper,
    max_certified_x_derivative,
)
from .numeric import ScaledComplex, sample_polydisk
from .obstacle import (
    ShellUnion,
    membership_margin,
    random_avoiding_disks,
    standard_obstacle,
    verify_disk_estimate,
)

SCHEMA_VERSION = 1
SUITES = ("lemma", "pushout", "kobayashi", "all")

#: Environment variable controlling worker threads for parallel checks.
THREADS_ENV = "CONTACTFB_THREADS"


class ConfigError(ValueError):
    """Invalid experiment config; message names the offending field."""


def _num(value, fieldname: str) -> float:
    """Accept JSON numbers or decimal strings."""
    if isinstance(value, bool):
        raise ConfigError(f"{fieldname}: expected a number")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            raise ConfigError(f"{fieldname}: not a decimal number: {value!r}")
    raise ConfigError(f"{fieldname}: expected a number or decimal string")


def _int(value, fieldname: str, minimum: int = 1) -> int:
    v = _num(value, fieldname)
    if v != int(v):
        raise ConfigError(f"{fieldname}: expected an integer")
    v = int(v)
    if v < minimum:
        raise ConfigError(f"{fieldname}: must be >= {minimum}")
    return v


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, fully-defaulted experiment parameters."""

    n: int = 1
    i_max: int = 6
    k_max: int = 6
    pushout_dim: int = 2
    eps_base: float = 0.5
    seed: int = 0
    margin: float = 1e-6
    schedule_kind: str = "desk"
    explicit_shells: tuple = ()          # ((a, b, c), ...) linear values
    lemma_disks: int = 60
    lemma_n0: tuple = (1, 2, 3)
    samples_per_shell: int = 200
    identity_samples: int = 1000
    divergence_samples: int = 100
    restarts: int = 8
    iterations: int = 40
    degree: int = 4
    lambda_budget: float = 1e3
    raw: dict = field(default_factory=dict, repr=False)

    def budget(self) -> SearchBudget:
        return SearchBudget(restarts=self.restarts, iterations=self.iterations,
                            degree=self.degree, lambda_budget=self.lambda_budget,
                            margin=self.margin)

    def pushout_initial(self) -> ShellUnion:
        if self.schedule_kind == "desk":
            return desk_schedule(self.pushout_dim, self.i_max)
        return ShellUnion.from_linear(
            self.explicit_shells, tuple(range(self.pushout_dim - 1)),
            self.pushout_dim - 1)

    def config_hash(self) -> str:
        blob = json.dumps(self.raw, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def validate_config(path: str) -> ExperimentConfig:
    """Parse, default, and invariant-check a config file."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(
                f"parse error at line {e.lineno} column {e.colno}: {e.msg}")
    if not isinstance(doc, dict):
        raise ConfigError("top level: expected a JSON object")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: unsupported value {version!r}")

    samples = doc.get("samples", {})
    budget = doc.get("budget", {})
    sched = doc.get("schedule", {"kind": "desk"})
    kind = sched.get("kind", "desk")
    explicit = ()
    if kind == "explicit":
        shells = sched.get("shells")
        if not shells:
            raise ConfigError("schedule.shells: required for explicit kind")
        parsed = []
        prev_b = 0.0
        for i, row in enumerate(shells, start=1):
            if len(row) != 3:
                raise ConfigError(f"schedule.shells[{i}]: expected [a, b, c]")
            a = _num(row[0], f"schedule.shells[{i}].a")
            b = _num(row[1], f"schedule.shells[{i}].b")
            c = _num(row[2], f"schedule.shells[{i}].c")
            if not (0 < a <= b):
                raise ConfigError(f"schedule.shells[{i}]: requires 0 < a <= b")
            if not (prev_b < a):
                raise ConfigError(
                    f"schedule.shells[{i}]: not interleaved (b_{i-1} >= a_{i})")
            if c <= 0:
                raise ConfigError(f"schedule.shells[{i}].c: must be positive")
            parsed.append((a, b, c))
            prev_b = b
        explicit = tuple(parsed)
    elif kind != "desk":
        raise ConfigError(f"schedule.kind: unknown kind {kind!r}")

    n0 = tuple(_int(v, "lemma_n0[]") for v in doc.get("lemma_n0", (1, 2, 3)))
    cfg = ExperimentConfig(
        n=_int(doc.get("n", 1), "n"),
        i_max=_int(doc.get("i_max", 6), "i_max"),
        k_max=_int(doc.get("k_max", 6), "k_max"),
        pushout_dim=_int(doc.get("pushout_dim", 2), "pushout_dim", minimum=2),
        eps_base=_num(doc.get("eps_base", 0.5), "eps_base"),
        seed=_int(doc.get("seed", 0), "seed", minimum=0),
        margin=_num(doc.get("margin", 1e-6), "margin"),
        schedule_kind=kind,
        explicit_shells=explicit,
        lemma_disks=_int(samples.get("lemma_disks", 60), "samples.lemma_disks"),
        lemma_n0=n0,
        samples_per_shell=_int(samples.get("per_shell", 200),
                               "samples.per_shell"),
        identity_samples=_int(samples.get("identity", 1000),
                              "samples.identity"),
        divergence_samples=_int(samples.get("divergence", 100),
                                "samples.divergence"),
        restarts=_int(budget.get("restarts", 8), "budget.restarts"),
        iterations=_int(budget.get("iterations", 40), "budget.iterations"),
        degree=_int(budget.get("degree", 4), "budget.degree"),
        lambda_budget=_num(budget.get("lambda_budget", 1e3),
                           "budget.lambda_budget"),
        raw=doc,
    )
    if not (0 < cfg.eps_base < 1):
        raise ConfigError("eps_base: must lie in (0, 1)")
    if cfg.margin <= 0:
        raise ConfigError("margin: must be positive")
    return cfg


# ---------------------------------------------------------------------------
# report structure
# ---------------------------------------------------------------------------

@dataclass
class CheckRecord:
    name: str
    verdict: bool
    value: float
    margin: float
    runtime: float


@dataclass
class RunReport:
    suite: str
    config_hash: str
    environment: dict
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.verdict for c in self.checks)

    def as_dict(self) -> dict:
        return {
            "suite": self.suite,
            "config_hash": self.config_hash,
            "environment": self.environment,
            "passed": self.passed,
            "checks": [asdict(c) for c in sorted(self.checks,
                                                 key=lambda c: c.name)],
        }


def _environment_stamp() -> dict:
    from . import __version__, USING_SPEEDUPS
    return {
        "package_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "platform": platform.platform(),
        "compiled_kernels": USING_SPEEDUPS,
        "threads": os.environ.get(THREADS_ENV, "1"),
    }


def _timed(checks: list, name: str, func):
    t0 = time.perf_counter()
    try:
        verdict, value, margin = func()
    except Exception as e:  # recorded, reflected in the exit code
        checks.append(CheckRecord(name, False, math.nan, math.nan,
                                  time.perf_counter() - t0))
        checks.append(CheckRecord(f"{name}/error:{type(e).__name__}",
                                  False, math.nan, math.nan, 0.0))
        return
    checks.append(CheckRecord(name, bool(verdict), float(value),
                              float(margin), time.perf_counter() - t0))


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------

def _lemma_checks(cfg: ExperimentConfig, checks: list) -> None:
    from concurrent.futures import ThreadPoolExecutor

    K = standard_obstacle(cfg.n, cfg.i_max)
    for N0 in cfg.lemma_n0:
        def run(N0=N0):
            disks = random_avoiding_disks(cfg.n, N0, K, cfg.lemma_disks,
                                          seed=cfg.seed + 1000 * N0,
                                          margin=cfg.margin)
            workers = _thread_count()
            with ThreadPoolExecutor(max_workers=workers) as pool:
                reports = list(pool.map(
                    lambda f: verify_disk_estimate(f, K, N0, margin=cfg.margin),
                    disks))
            worst = 0.0
            for r in reports:
                scale = max(max(r.derivatives["x"] + r.derivatives["y"])
                            / r.certificate.bound_xy,
                            r.derivatives["z"] / r.certificate.bound_z)
                worst = max(worst, scale)
            ok = all(r.passed for r in reports)
            return ok, worst, 1.0 - worst
        _timed(checks, f"lemma/n{cfg.n}/N0{N0}/derivative-bounds", run)

    def contrapositive():
        best = max_certified_x_derivative(K, n=cfg.n, N0=1,
                                          budget=cfg.budget(), seed=cfg.seed)
        bound = 4.0
        return best < bound, best, bound - best
    _timed(checks, f"lemma/n{cfg.n}/contrapositive-search", contrapositive)


def _sample_shell_points(K: ShellUnion, per_shell: int, rng) -> list:
    """Random points of each cylinder of K (log-uniform in the magnitudes)."""
    pts = []
    for s in K.shells:
        lm = rng.uniform(s.log_a, s.log_b, per_shell)
        shell_phases = rng.uniform(-math.pi, math.pi, (per_shell, K.dim))
        disk_l = s.log_c + np.log(np.sqrt(rng.random(per_shell)))
        for m in range(per_shell):
            coords = [None] * K.dim
            block = rng.integers(0, len(K.shell_dims))
            for bi, d in enumerate(K.shell_dims):
                if bi == block:
                    coords[d] = ScaledComplex(lm[m], shell_phases[m][d])
                else:
                    sub = lm[m] + math.log(rng.random() + 1e-12)
                    coords[d] = ScaledComplex(sub, shell_phases[m][d])
            coords[K.disk_dim] = ScaledComplex(disk_l[m],
                                               shell_phases[m][K.disk_dim])
            pts.append(coords)
    return pts


def _pushout_checks(cfg: ExperimentConfig, checks: list, out_dir: str | None):
    state = build_pushout(cfg.pushout_initial(), cfg.pushout_dim, cfg.k_max,
                          eps_schedule=EpsSchedule(cfg.eps_base))
    rng = np.random.default_rng(cfg.seed)

    for rnd in state.rounds:
        def containment(rnd=rnd):
            pts = _sample_shell_points(rnd.shells_before,
                                       cfg.samples_per_shell, rng)
            worst = math.inf
            for p in pts:
                img = rnd.apply_scaled(p)
                worst = min(worst, membership_margin(rnd.shells_after, img))
            return worst > 0.0, worst, worst
        _timed(checks, f"pushout/round{rnd.index}/containment", containment)

        def disjoint(rnd=rnd):
            gap = rnd.shells_after.shells[0].log_a - math.log(rnd.index + 1.0)
            return gap > 0.0, rnd.shells_after.shells[0].log_a, gap
        _timed(checks, f"pushout/round{rnd.index}/disjointness", disjoint)

        def identity(rnd=rnd):
            pts = sample_polydisk(cfg.pushout_dim, float(rnd.index),
                                  cfg.identity_samples, seed=cfg.seed + rnd.index)
            sampled = 0.0
            for p in pts:
                img = rnd.apply_scaled(tuple(ScaledComplex.from_complex(c)
                                             for c in p))
                sampled = max(sampled, max(abs(i.to_complex() - c)
                                           for i, c in zip(img, p)))
            worst = max(sampled, rnd.id_bound)
            return worst < rnd.eps, worst, rnd.eps - worst
        _timed(checks, f"pushout/round{rnd.index}/identity", identity)

    div_pts = _sample_shell_points(state.initial, cfg.divergence_samples, rng)
    logs = orbit_logs_batch(state, div_pts)

    def divergence():
        ok = True
        worst = math.inf
        for k in range(1, state.k + 1):
            gap = float(np.min(logs[:, k - 1])) - math.log(k + 1.0)
            worst = min(worst, gap)
            ok = ok and gap > 0.0
        return ok, worst, worst
    _timed(checks, "pushout/divergence", divergence)

    def origin():
        pts = [(0j,) * cfg.pushout_dim] + sample_polydisk(
            cfg.pushout_dim, 0.25, 100, seed=cfg.seed + 99)
        verdicts = [omega_membership(state, p) for p in pts]
        ok = all(v == "in_omega_certified" for v in verdicts)
        return ok, sum(v == "in_omega_certified" for v in verdicts), 0.0
    _timed(checks, "pushout/origin-certified", origin)

    if out_dir:
        with open(os.path.join(out_dir, "pushout_state.json"), "w") as fh:
            json.dump(state_to_dict(state), fh, indent=1)
        _write_orbit_csv(os.path.join(out_dir, "orbits.csv"),
                         state, div_pts, logs)
    return state


def _write_orbit_csv(path: str, state: PushOutState, points, logs) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["point_index", "coordinates", "round",
                    "log_magnitude", "classification"])
        for idx, p in enumerate(points):
            coords = ";".join(repr(float(c.log_mag)) + "@" + repr(c.phase)
                              for c in p)
            escaped = None
            for k in range(1, state.k + 1):
                if escaped is None and logs[idx, k - 1] > math.log(k + 1.0):
                    escaped = k
            cls = "escaped" if escaped is not None else "bounded-so-far"
            for k in range(1, state.k + 1):
                w.writerow([idx, coords, k, repr(float(logs[idx, k - 1])), cls])


def _kobayashi_checks(cfg: ExperimentConfig, checks: list) -> None:
    K = standard_obstacle(1, cfg.i_max)
    p0 = ContactPoint((0j,), (0j,), 0j)
    v = TangentVector((1 + 0j,), (0j,), 0j)

    def bracket():
        lower, _ = directed_norm_lower(p0, v, K)
        upper, _ = directed_norm_upper(p0, v, "complement", K,
                                       budget=cfg.budget(), seed=cfg.seed)
        ok = (lower == 0.25) and (upper <= 1.2) and (lower <= upper)
        return ok, upper, upper - lower
    _timed(checks, "kobayashi/origin-bracket", bracket)

    def full_space():
        upper, _ = directed_norm_upper(p0, v, "full_space", budget=cfg.budget())
        return upper <= 1e-2, upper, 1e-2 - upper
    _timed(checks, "kobayashi/full-space-degeneration", full_space)

    def distance():
        q = ContactPoint((0j,), (0j,), 1 + 0j)
        d, nodes = cck_distance_upper(p0, q, "full_space", budget=cfg.budget())
        return d <= 1e-2, d, 1e-2 - d
    _timed(checks, "kobayashi/full-space-distance", distance)


def run_experiment(cfg: ExperimentConfig, suite: str,
                   out_dir: str | None = None) -> RunReport:
    """Execute one suite and write artifacts under out_dir (if given)."""
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; expected one of {SUITES}")
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    checks: list = []
    if suite in ("lemma", "all"):
        _lemma_checks(cfg, checks)
    if suite in ("pushout", "all"):
        _pushout_checks(cfg, checks, out_dir)
    if suite in ("kobayashi", "all"):
        _kobayashi_checks(cfg, checks)
    report = RunReport(suite=suite, config_hash=cfg.config_hash(),
                       environment=_environment_stamp(), checks=checks)
    if out_dir:
        with open(os.path.join(out_dir, "report.json"), "w") as fh:
            json.dump(report.as_dict(), fh, indent=1)
    return report

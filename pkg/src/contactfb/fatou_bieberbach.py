"""Push-out construction of Fatou-Bieberbach domains avoiding a union of
shell-times-disk cylinders.

Round k composes two shear-like automorphisms theta_k = psi_k o phi_k,
where phi adds f(z_{j-1}) to z_j and psi adds g(z_{j+1}) to z_j, with

    f(zeta) = sum_j (zeta / r_j)^(N_j),    b_{j-1} < r_j < a_j.

Exponents are selected so that (i) each summand is tiny on the previous
disk (geometric tail, giving |theta_k - id| < eps_k on the k-polydisk),
and (ii) each summand dominates everything earlier on its own annulus, so
the image of shell i is pinched into a new band (alpha_i, beta_i).  The
schedule of each round therefore maps the current cylinder union into the
next one while the next union clears the (k+1)-polydisk; orbits of the
obstacle diverge while orbits near the origin converge to the limit map.

Every inequality is certified with explicit slack from coefficient-sum
bounds; magnitudes are handled in the log domain throughout because band
radii overflow native floats after two rounds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .numeric import (
    NEG_INF,
    ScaledComplex,
    log_add,
    log_sub,
    log_sum,
    scaled_sum_arrays,
    wrap_phase,
)
from .obstacle import ShellBand, ShellUnion

EXPONENT_CAP = 10 ** 6
STATE_FORMAT_VERSION = 1

#: Largest log-distance the term radius r_i is placed above b_{i-1}.  For
#: narrow gaps r_i is the geometric mean of b_{i-1} and a_i; for the
#: astronomically wide gaps of later rounds the midpoint would waste half
#: the gap and double the band log-width ratio every stage, driving the
#: exponents super-exponentially.  Keeping r_i within a bounded log-offset
#: of b_{i-1} keeps the per-stage exponent growth geometric.
R_LOG_OFFSET_CAP = 2.0


def _bump(x: float, nominal: float) -> float:
    """x plus a strictness slack that stays representable at any scale."""
    return x + max(nominal, 16.0 * math.ulp(abs(x)))


class SelectionError(RuntimeError):
    """No admissible exponent below the cap; carries the binding inequality."""

    def __init__(self, message: str, shell_index: int, binding: str):
        super().__init__(message)
        self.shell_index = shell_index
        self.binding = binding


# ---------------------------------------------------------------------------
# shear functions and maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ShearFunction:
    """Finite sum of terms (zeta / r_j)^(N_j); radii stored as log r_j.

    All coefficients are positive, so the coefficient-sum bound on a disk
    of radius R is the exact sup: f(R) itself.
    """

    terms: tuple[tuple[float, int], ...]  # (log_r, N), N nondecreasing

    def __post_init__(self):
        prev = 0
        for log_r, N in self.terms:
            if N < prev:
                raise ValueError("exponents must be nondecreasing")
            if N < 1:
                raise ValueError("exponents must be >= 1")
            prev = N

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def sup_log(self, log_R: float) -> float:
        """log f(R) = log sup_{|z|<=R} |f|, exact up to rounding."""
        return log_sum(N * (log_R - log_r) for log_r, N in self.terms)

    def term_log(self, index: int, log_R: float) -> float:
        log_r, N = self.terms[index]
        return N * (log_R - log_r)

    def eval_scaled(self, zeta: ScaledComplex) -> ScaledComplex:
        if self.is_zero or zeta.is_zero:
            return ScaledComplex.zero()
        lz = zeta.abs_log()
        acc = ScaledComplex.zero()
        for log_r, N in self.terms:
            term = ScaledComplex(N * (lz - log_r), wrap_phase(N * zeta.phase))
            acc = acc + term
        return acc

    def eval_logpolar(self, log_mag: np.ndarray, phase: np.ndarray):
        """Vectorized evaluation on points given in log-polar form."""
        if self.is_zero:
            return (np.full_like(log_mag, NEG_INF), np.zeros_like(phase))
        lm = [N * (log_mag - log_r) for log_r, N in self.terms]
        ph = [N * phase for _, N in self.terms]
        return scaled_sum_arrays(np.stack(lm, axis=-1), np.stack(ph, axis=-1))

    def eval_native(self, z):
        """Native-complex values (vectorized); underflows gracefully."""
        z = np.asarray(z, dtype=np.complex128)
        with np.errstate(divide="ignore"):
            lz = np.where(z == 0, NEG_INF, np.log(np.maximum(np.abs(z), 1e-320)))
        az = np.angle(z)
        total = np.zeros_like(z)
        for log_r, N in self.terms:
            lm = N * (lz - log_r)
            mag = np.where(lm < -745.0, 0.0, np.exp(np.minimum(lm, 700.0)))
            total = total + mag * np.exp(1j * (N * az))
        return total

    def deriv_native(self, z):
        """f'(z) = sum N_j / r_j * (z / r_j)^(N_j - 1), vectorized."""
        z = np.asarray(z, dtype=np.complex128)
        with np.errstate(divide="ignore"):
            lz = np.where(z == 0, NEG_INF, np.log(np.maximum(np.abs(z), 1e-320)))
        az = np.angle(z)
        total = np.zeros_like(z)
        for log_r, N in self.terms:
            lm = math.log(N) - log_r + (N - 1) * (lz - log_r)
            if N == 1:
                lm = np.full_like(lz, math.log(N) - log_r)
            mag = np.where(lm < -745.0, 0.0, np.exp(np.minimum(lm, 700.0)))
            total = total + mag * np.exp(1j * ((N - 1) * az))
        return total


@dataclass(frozen=True)
class ShearMap:
    """One shear-like automorphism of C^dim.

    kind 'phi': (z_1, z_2 + f(z_1), ..., z_dim + f(z_{dim-1}))
    kind 'psi': (z_1 + f(z_2), ..., z_{dim-1} + f(z_dim), z_dim)

    Both are unipotent triangular, hence volume preserving with an explicit
    inverse obtained by subtracting the same values in the reverse
    coordinate order.
    """

    kind: str
    dim: int
    func: ShearFunction

    def __post_init__(self):
        if self.kind not in ("phi", "psi"):
            raise ValueError("kind must be 'phi' or 'psi'")
        if self.dim < 2:
            raise ValueError("dim must be >= 2")

    # -- scaled (scalar point) ------------------------------------------

    def apply_scaled(self, point):
        pt = [p if isinstance(p, ScaledComplex) else ScaledComplex.from_complex(p)
              for p in point]
        if len(pt) != self.dim:
            raise ValueError("point dimension mismatch")
        out = list(pt)
        if self.kind == "phi":
            for j in range(1, self.dim):
                out[j] = pt[j] + self.func.eval_scaled(pt[j - 1])
        else:
            for j in range(self.dim - 1):
                out[j] = pt[j] + self.func.eval_scaled(pt[j + 1])
        return out

    def inverse_apply_scaled(self, point):
        pt = [p if isinstance(p, ScaledComplex) else ScaledComplex.from_complex(p)
              for p in point]
        out = list(pt)
        if self.kind == "phi":
            for j in range(1, self.dim):
                out[j] = pt[j] - self.func.eval_scaled(out[j - 1])
        else:
            for j in range(self.dim - 2, -1, -1):
                out[j] = pt[j] - self.func.eval_scaled(out[j + 1])
        return out

    # -- log-polar batches ------------------------------------------------

    def apply_logpolar(self, log_mag: np.ndarray, phase: np.ndarray):
        """Batched action on points stored as (m, dim) log-polar arrays."""
        out_lm = log_mag.copy()
        out_ph = phase.copy()
        if self.kind == "phi":
            src = range(0, self.dim - 1)
            dst = range(1, self.dim)
        else:
            src = range(1, self.dim)
            dst = range(0, self.dim - 1)
        for s, d in zip(src, dst):
            f_lm, f_ph = self.func.eval_logpolar(log_mag[:, s], phase[:, s])
            lm, ph = scaled_sum_arrays(
                np.stack([log_mag[:, d], f_lm], axis=-1),
                np.stack([phase[:, d], f_ph], axis=-1))
            out_lm[:, d] = lm
            out_ph[:, d] = ph
        return out_lm, out_ph

    # -- native action and Jacobian (for pullbacks) -----------------------

    def apply_native(self, vec: np.ndarray) -> np.ndarray:
        vec = np.asarray(vec, dtype=np.complex128)
        out = vec.copy()
        if self.kind == "phi":
            out[1:] = vec[1:] + self.func.eval_native(vec[:-1])
        else:
            out[:-1] = vec[:-1] + self.func.eval_native(vec[1:])
        return out

    def jacobian(self, vec: np.ndarray) -> np.ndarray:
        vec = np.asarray(vec, dtype=np.complex128)
        jac = np.eye(self.dim, dtype=np.complex128)
        dv = self.func.deriv_native(vec)
        if self.kind == "phi":
            for j in range(1, self.dim):
                jac[j, j - 1] = dv[j - 1]
        else:
            for j in range(self.dim - 1):
                jac[j, j + 1] = dv[j + 1]
        return jac


def shear_eval(m: ShearMap, point):
    """Exact shear action on a point of ScaledComplex coordinates."""
    return m.apply_scaled(point)


# ---------------------------------------------------------------------------
# exponent selection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StageSchedule:
    """Log-domain data consumed by exponent selection for one shear stage.

    ``log_offset`` holds, per shell, the log of the largest modulus any
    coordinate being shifted can carry inside that shell (the disk height
    for dim 2, max of band radius and disk height for dim > 2).
    ``log_base`` is log b_0, the radius on which the stage must approximate
    the identity.
    """

    log_base: float
    log_a: tuple[float, ...]
    log_b: tuple[float, ...]
    log_offset: tuple[float, ...]
    log_offset_base: float = NEG_INF
    log_r: tuple[float, ...] = ()

    def __post_init__(self):
        if not (len(self.log_a) == len(self.log_b) == len(self.log_offset)):
            raise ValueError("schedule arrays must have equal length")
        prev = self.log_base
        for i, (la, lb) in enumerate(zip(self.log_a, self.log_b), start=1):
            if not (prev < la <= lb):
                raise ValueError(f"schedule not interleaved at shell {i}")
            prev = lb
        if not self.log_r:
            rs = []
            prev = self.log_base
            for la in self.log_a:
                # relative floor keeps the offset above one ulp of prev
                off = max(R_LOG_OFFSET_CAP, abs(prev) * 2.0 ** -40)
                rs.append(prev + min(0.5 * (la - prev), off))
                prev = self.log_b[len(rs) - 1]
            object.__setattr__(self, "log_r", tuple(rs))

    @property
    def count(self) -> int:
        return len(self.log_a)

    @classmethod
    def from_shell_union(cls, K: ShellUnion, log_base: float,
                         dim: int) -> "StageSchedule":
        la = tuple(s.log_a for s in K.shells)
        lb = tuple(s.log_b for s in K.shells)
        if dim == 2:
            off = tuple(s.log_c for s in K.shells)
        else:
            off = tuple(max(s.log_b, s.log_c) for s in K.shells)
        return cls(log_base=log_base, log_a=la, log_b=lb, log_offset=off)


@dataclass(frozen=True)
class SelectionWitness:
    """Audit record for one selected exponent.

    All band magnitudes are stored as natural logs; ``slacks`` holds the
    log-domain margins by which each certified inequality holds.
    """

    i: int
    N: int
    log_r: float
    M_log: float
    alpha_log: float
    beta_prev_log: float
    slacks: dict

    def as_dict(self) -> dict:
        return {
            "i": self.i,
            "N": self.N,
            "log_r": repr(self.log_r),
            "M_log": repr(self.M_log),
            "alpha_log": repr(self.alpha_log),
            "beta_prev_log": repr(self.beta_prev_log),
            "slacks": {k: repr(v) for k, v in self.slacks.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SelectionWitness":
        return cls(i=int(d["i"]), N=int(d["N"]), log_r=float(d["log_r"]),
                   M_log=float(d["M_log"]), alpha_log=float(d["alpha_log"]),
                   beta_prev_log=float(d["beta_prev_log"]),
                   slacks={k: float(v) for k, v in d["slacks"].items()})


def select_exponent(i: int, schedule: StageSchedule, partial: ShearFunction,
                    eps: float, m_floor: int | None = None,
                    exponent_cap: int = EXPONENT_CAP,
                    min_exponent: int = 1) -> SelectionWitness:
    """Smallest admissible exponent N_i for shell i (1-based), certified.

    Simultaneously enforces, with f_{i-1} the partial sum built so far:

    * tail control: (b_{i-1} / r_i)^N < 2^(-i-1) eps, so the term is tiny
      on the previous disk and the series tail sums below eps;
    * pinching: there is M_i >= m_floor with
      sup f_{i-1}(b_{i-1}) + offset_{i-1} + eps < M_i <
      (a_i / r_i)^N - sup f_{i-1}(b_i) - offset_i - eps.

    Returns the witness carrying M_i and the band bounds
    beta_{i-1} = sup f_{i-1}(b_{i-1}) + offset_{i-1} + 2^(-i) eps and
    alpha_i = (a_i / r_i)^N - sup f_{i-1}(b_i) - offset_i - 2^(-i) eps,
    together with the slack of every inequality.
    """
    if not (1 <= i <= schedule.count):
        raise ValueError("shell index out of range")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if m_floor is None:
        m_floor = i + 1
    idx = i - 1
    log_b_prev = schedule.log_base if i == 1 else schedule.log_b[idx - 1]
    log_off_prev = schedule.log_offset_base if i == 1 \
        else schedule.log_offset[idx - 1]
    log_a = schedule.log_a[idx]
    log_b = schedule.log_b[idx]
    log_off = schedule.log_offset[idx]
    log_r = schedule.log_r[idx]
    if not (log_b_prev < log_r < log_a):
        raise ValueError(f"r_{i} must satisfy b_{i-1} < r_{i} < a_{i}")

    log_eps = math.log(eps)
    log_t1 = log_eps - (i + 1) * math.log(2.0)   # 2^(-i-1) eps
    log_tail = log_eps - i * math.log(2.0)       # 2^(-i) eps

    gap_in = log_r - log_b_prev    # > 0
    gap_out = log_a - log_r        # > 0

    # tail-control bound
    n1 = max(1, math.floor(-log_t1 / gap_in) + 1)
    while n1 * (log_b_prev - log_r) >= log_t1:
        n1 += 1

    # admissible M_i
    sup_prev = partial.sup_log(log_b_prev)
    lhs_log = log_sum([sup_prev, log_off_prev, log_eps])
    if lhs_log < math.log(1e12):
        M = float(max(m_floor, math.ceil(math.exp(lhs_log)) + 1))
        M_log = math.log(M)
    else:
        M_log = _bump(lhs_log, math.log(1.25))
        M = math.inf

    # pinching bound: (a/r)^N must clear M + sup f_{i-1}(b_i) + off + eps
    sup_here = partial.sup_log(log_b)
    rhs_log = log_sum([M_log, sup_here, log_off, log_eps])
    rhs_strict = _bump(rhs_log, 0.0)
    n3 = max(1, math.floor(rhs_strict / gap_out) + 1)
    while n3 * gap_out <= rhs_strict:
        n3 += 1

    N = max(n1, n3, min_exponent)
    if N > exponent_cap:
        binding = "tail-control" if n1 >= n3 else "pinching"
        raise SelectionError(
            f"shell {i}: exponent {N} exceeds cap {exponent_cap} "
            f"(binding inequality: {binding})", i, binding)

    pow_log = N * gap_out
    alpha_log = log_sub(pow_log, log_sum([sup_here, log_off, log_tail]))
    beta_prev_log = log_sum([sup_prev, log_off_prev, log_tail])
    if not (beta_prev_log < M_log < alpha_log):
        raise SelectionError(
            f"shell {i}: band sandwich beta < M < alpha failed", i, "sandwich")

    slacks = {
        "tail_control": log_t1 - N * (log_b_prev - log_r),
        "m_above_lhs": M_log - lhs_log,
        "pow_above_rhs": pow_log - rhs_log,
        "m_above_beta": M_log - beta_prev_log,
        "alpha_above_m": alpha_log - M_log,
    }
    return SelectionWitness(i=i, N=N, log_r=log_r, M_log=M_log,
                            alpha_log=alpha_log, beta_prev_log=beta_prev_log,
                            slacks=slacks)


def _build_stage(schedule: StageSchedule, eps: float, m_floor_base: int,
                 exponent_cap: int):
    """Select all exponents of one shear stage; returns the shear function,
    the witnesses, and the certified output bands (alpha_i, beta_i)."""
    terms: list[tuple[float, int]] = []
    witnesses: list[SelectionWitness] = []
    prev_N = 1
    for i in range(1, schedule.count + 1):
        partial = ShearFunction(tuple(terms))
        w = select_exponent(i, schedule, partial, eps,
                            m_floor=m_floor_base + i,
                            exponent_cap=exponent_cap, min_exponent=prev_N)
        terms.append((w.log_r, w.N))
        witnesses.append(w)
        prev_N = w.N
    func = ShearFunction(tuple(terms))
    alphas = [w.alpha_log for w in witnesses]
    # upper band bounds use the completed sum: |z_off + f(z)| <= off + f(b_i)
    betas = [_bump(log_add(func.sup_log(schedule.log_b[i]),
                           schedule.log_offset[i]), 1e-9)
             for i in range(schedule.count)]
    return func, tuple(witnesses), tuple(alphas), tuple(betas)


# ---------------------------------------------------------------------------
# rounds and state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EpsSchedule:
    """Summable identity-approximation schedule eps_k = base * 2^(-k).

    The default base 1/2 gives eps_k = 2^(-k-1) with total sum 1/2 < 1, so
    the origin stays certified inside the convergence domain.
    """

    base: float = 0.5

    def __post_init__(self):
        if not (0 < self.base < 1):
            raise ValueError("base must lie in (0, 1)")

    def eps(self, k: int) -> float:
        return self.base * 2.0 ** (-k)

    def tail(self, k: int) -> float:
        """sum of eps_m over all m > k (full infinite tail)."""
        return self.base * 2.0 ** (-k)


@dataclass(frozen=True)
class PushOutRound:
    index: int
    phi: ShearMap
    psi: ShearMap
    phi_witnesses: tuple[SelectionWitness, ...]
    psi_witnesses: tuple[SelectionWitness, ...]
    shells_before: ShellUnion
    shells_mid: ShellUnion
    shells_after: ShellUnion
    eps: float
    id_bound: float

    def apply_scaled(self, point):
        return self.psi.apply_scaled(self.phi.apply_scaled(point))

    def apply_logpolar(self, log_mag, phase):
        lm, ph = self.phi.apply_logpolar(log_mag, phase)
        return self.psi.apply_logpolar(lm, ph)


def _vertical_dims(dim: int):
    return tuple(range(dim - 1)), dim - 1


def _horizontal_dims(dim: int):
    return tuple(range(1, dim)), 0


@dataclass
class PushOutState:
    """Evolving state of the push-out recursion.

    ``initial`` must be a vertical shell union (shell block on the first
    dim-1 coordinates, disk on the last) with a_1 > 1; rounds are appended
    by :func:`build_shear_round`.
    """

    dim: int
    initial: ShellUnion
    eps_schedule: EpsSchedule = field(default_factory=EpsSchedule)
    i_max: int | None = None
    exponent_cap: int = EXPONENT_CAP
    rounds: list[PushOutRound] = field(default_factory=list)

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if self.initial.shell_dims != tuple(range(self.dim - 1)) or \
                self.initial.disk_dim != self.dim - 1:
            raise ValueError("initial shell union must be vertical in dim")
        if self.initial.shells[0].log_a <= 0.0:
            raise ValueError("initial schedule needs a_1 > 1 "
                             "(dilate coordinates first)")
        if self.i_max is None:
            self.i_max = len(self.initial.shells)

    @property
    def k(self) -> int:
        return len(self.rounds)

    def current_shells(self) -> ShellUnion:
        return self.rounds[-1].shells_after if self.rounds else self.initial

    def theta_maps(self):
        maps = []
        for r in self.rounds:
            maps.extend((r.phi, r.psi))
        return maps

    def eps_tail(self, k: int) -> float:
        return self.eps_schedule.tail(k)


def build_shear_round(state: PushOutState):
    """Build and append round k+1; returns the new PushOutRound.

    Certifies, with explicit witnesses: theta_k maps the current union into
    the next one, the next union clears the (k+1)-polydisk, and
    |theta_k - id| < eps_k on the k-polydisk.
    """
    k = state.k + 1
    eps_k = state.eps_schedule.eps(k)
    K = state.current_shells()
    dim = state.dim

    # phi stage: identity on k*polydisk, pinches vertical shells
    sched_phi = StageSchedule.from_shell_union(K, math.log(k), dim)
    f, wit_phi, alphas, betas = _build_stage(sched_phi, eps_k, k, state.exponent_cap)
    phi = ShearMap("phi", dim, f)
    h_dims, h_disk = _horizontal_dims(dim)
    L = ShellUnion(
        tuple(ShellBand(a, b, K.shells[i].log_b)
              for i, (a, b) in enumerate(zip(alphas, betas))),
        h_dims, h_disk, orientation="horizontal")

    # psi stage: identity on (k+1)*polydisk (alpha_1 > M_1 >= k+1 clears it)
    sched_psi = StageSchedule.from_shell_union(L, math.log(k + 1.0), dim)
    g, wit_psi, alphas2, betas2 = _build_stage(sched_psi, eps_k, k, state.exponent_cap)
    psi = ShearMap("psi", dim, g)
    v_dims, v_disk = _vertical_dims(dim)
    K_next = ShellUnion(
        tuple(ShellBand(a, b, L.shells[i].log_b)
              for i, (a, b) in enumerate(zip(alphas2, betas2))),
        v_dims, v_disk, orientation="vertical")

    # certified disjointness from the (k+1)-polydisk
    if not K_next.shells[0].log_a > math.log(k + 1.0):
        raise SelectionError(
            f"round {k}: new schedule does not clear the (k+1)-polydisk",
            1, "disjointness")

    # certified identity-approximation bound on the k-polydisk
    sup_f = math.exp(f.sup_log(math.log(k)))
    sup_g = math.exp(g.sup_log(math.log(k + sup_f)))
    id_bound = sup_f + sup_g
    if not id_bound < eps_k:
        raise SelectionError(
            f"round {k}: certified identity bound {id_bound} >= {eps_k}",
            0, "identity")

    rec = PushOutRound(index=k, phi=phi, psi=psi,
                       phi_witnesses=wit_phi, psi_witnesses=wit_psi,
                       shells_before=K, shells_mid=L, shells_after=K_next,
                       eps=eps_k, id_bound=id_bound)
    state.rounds.append(rec)
    return rec


def build_pushout(initial: ShellUnion, dim: int, k_max: int,
                  eps_schedule: EpsSchedule | None = None,
                  exponent_cap: int = EXPONENT_CAP) -> PushOutState:
    """Run the recursion for k_max rounds starting from ``initial``."""
    state = PushOutState(dim=dim, initial=initial,
                         eps_schedule=eps_schedule or EpsSchedule(),
                         exponent_cap=exponent_cap)
    for _ in range(k_max):
        build_shear_round(state)
    return state


def enclose_degenerate(K: ShellUnion, widen: float = 0.1,
                       dilation: float = 2.0) -> ShellUnion:
    """Proper interleaved enclosure of a (possibly degenerate a_i = b_i)
    schedule, dilated so that a_1 > 1 as the recursion requires.

    Each band (a, b) widens multiplicatively to (a (1-widen), b (1+widen));
    all radii and heights then scale by ``dilation``.
    """
    if not (0 < widen < 1):
        raise ValueError("widen must lie in (0, 1)")
    ld = math.log(dilation)
    bands = []
    prev_b = NEG_INF
    for s in K.shells:
        la = s.log_a + math.log1p(-widen) + ld
        lb = s.log_b + math.log1p(widen) + ld
        if not (prev_b < la):
            raise ValueError("widened bands no longer interleave")
        bands.append(ShellBand(la, lb, s.log_c + ld))
        prev_b = lb
    out = ShellUnion(tuple(bands), K.shell_dims, K.disk_dim, K.orientation)
    if out.shells[0].log_a <= 0.0:
        raise ValueError("dilation too small: need a_1 > 1 after enclosure")
    return out


def desk_schedule(dim: int = 2, i_max: int = 6) -> ShellUnion:
    """Default vertical schedule: the degenerate bands a_i = b_i = 2^(i-1)
    with heights 2^(3i), enclosed at +-10% and dilated by 2 so the
    recursion's normalization a_1 > 1 holds."""
    degenerate = ShellUnion.from_linear(
        [(2.0 ** (i - 1), 2.0 ** (i - 1), 2.0 ** (3 * i))
         for i in range(1, i_max + 1)],
        tuple(range(dim - 1)), dim - 1)
    return enclose_degenerate(degenerate, widen=0.1, dilation=2.0)


# ---------------------------------------------------------------------------
# orbits, membership, and the limit map
# ---------------------------------------------------------------------------

def _as_scaled_point(p, dim: int):
    pt = [v if isinstance(v, ScaledComplex) else ScaledComplex.from_complex(v)
          for v in p]
    if len(pt) != dim:
        raise ValueError("point dimension mismatch")
    return pt


def _maxnorm_log(pt) -> float:
    return max(v.abs_log() for v in pt)


@dataclass(frozen=True)
class OrbitRecord:
    """Per-round log max-norms of one orbit under the built composition."""

    log_maxnorms: tuple[float, ...]
    first_escape: int | None
    classification: str  # 'escaped' | 'bounded-so-far'


def compose_orbit(maps_or_state, p, escape_radius_rule=None) -> OrbitRecord:
    """Track |Theta_j(p)| through the built rounds in scaled arithmetic.

    ``maps_or_state`` is a PushOutState or an explicit sequence of rounds /
    shear maps; the escape radius after round j defaults to j + 1.
    """
    if escape_radius_rule is None:
        escape_radius_rule = lambda j: j + 1.0
    if isinstance(maps_or_state, PushOutState):
        rounds = list(maps_or_state.rounds)
        dim = maps_or_state.dim
    else:
        rounds = list(maps_or_state)
        dim = rounds[0].dim if rounds and isinstance(rounds[0], ShearMap) \
            else (rounds[0].phi.dim if rounds else len(list(p)))
    pt = _as_scaled_point(p, dim)
    logs = []
    first_escape = None
    for j, r in enumerate(rounds, start=1):
        if isinstance(r, ShearMap):
            pt = r.apply_scaled(pt)
        else:
            pt = r.apply_scaled(pt)
        lm = _maxnorm_log(pt)
        logs.append(lm)
        if first_escape is None and lm > math.log(escape_radius_rule(j)):
            first_escape = j
    classification = "escaped" if first_escape is not None else "bounded-so-far"
    return OrbitRecord(log_maxnorms=tuple(logs), first_escape=first_escape,
                       classification=classification)


def orbit_logs_batch(state: PushOutState, points) -> np.ndarray:
    """(m, k) array of per-round log max-norms for a batch of points.

    Points may be complex tuples or ScaledComplex tuples; computation is
    vectorized over the batch in log-polar form.
    """
    pts = [_as_scaled_point(p, state.dim) for p in points]
    m = len(pts)
    lm = np.array([[float(v.log_mag) for v in p] for p in pts])
    ph = np.array([[v.phase for v in p] for p in pts])
    out = np.empty((m, state.k))
    for j, r in enumerate(state.rounds):
        lm, ph = r.apply_logpolar(lm, ph)
        out[:, j] = np.max(lm, axis=1)
    return out


def omega_membership(state: PushOutState, p) -> str:
    """Conservative classification against the convergence domain.

    'in_omega_certified' when some Theta_j(p) sits inside the j-polydisk
    with more room than all later identity-approximation errors can
    consume; 'escaped' when the orbit crossed the escape radius;
    'undecided' otherwise.
    """
    rec = compose_orbit(state, p)
    pt = _as_scaled_point(p, state.dim)
    logs = (_maxnorm_log(pt),) + rec.log_maxnorms  # index j = after round j
    for j in range(state.k + 1):
        lm = logs[j]
        if lm < 5.0:  # only small points can certify; avoids exp overflow
            if math.exp(lm) + state.eps_tail(j) < max(j, 1):
                return "in_omega_certified"
    if rec.first_escape is not None:
        return "escaped"
    return "undecided"


def fb_map_eval(state: PushOutState, p):
    """Value of the built composition at a certified point, with the Cauchy
    tail of the remaining rounds as the error bound."""
    if omega_membership(state, p) != "in_omega_certified":
        raise ValueError("point is not certified inside the domain")
    pt = _as_scaled_point(p, state.dim)
    for r in state.rounds:
        pt = r.apply_scaled(pt)
    value = tuple(v.to_complex() for v in pt)
    return value, state.eps_tail(state.k)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def _shells_to_dict(K: ShellUnion) -> dict:
    return {
        "bands": [[repr(s.log_a), repr(s.log_b), repr(s.log_c)]
                  for s in K.shells],
        "shell_dims": list(K.shell_dims),
        "disk_dim": K.disk_dim,
        "orientation": K.orientation,
    }


def _shells_from_dict(d: dict) -> ShellUnion:
    bands = tuple(ShellBand(float(a), float(b), float(c))
                  for a, b, c in d["bands"])
    return ShellUnion(bands, tuple(d["shell_dims"]), d["disk_dim"],
                      d["orientation"])


def _func_to_dict(f: ShearFunction) -> dict:
    return {"terms": [[repr(log_r), N] for log_r, N in f.terms]}


def _func_from_dict(d: dict) -> ShearFunction:
    return ShearFunction(tuple((float(lr), int(N)) for lr, N in d["terms"]))


def state_to_dict(state: PushOutState) -> dict:
    """Versioned JSON-ready document; floats stored as repr strings so a
    reload reproduces the construction bit for bit."""
    return {
        "version": STATE_FORMAT_VERSION,
        "dim": state.dim,
        "i_max": state.i_max,
        "exponent_cap": state.exponent_cap,
        "eps_schedule": {"kind": "geometric", "base": repr(state.eps_schedule.base)},
        "initial": _shells_to_dict(state.initial),
        "rounds": [
            {
                "index": r.index,
                "eps": repr(r.eps),
                "id_bound": repr(r.id_bound),
                "phi": _func_to_dict(r.phi.func),
                "psi": _func_to_dict(r.psi.func),
                "mid": _shells_to_dict(r.shells_mid),
                "after": _shells_to_dict(r.shells_after),
                "phi_witnesses": [w.as_dict() for w in r.phi_witnesses],
                "psi_witnesses": [w.as_dict() for w in r.psi_witnesses],
            }
            for r in state.rounds
        ],
    }


def state_from_dict(doc: dict) -> PushOutState:
    if doc.get("version") != STATE_FORMAT_VERSION:
        raise ValueError(f"unsupported state format version {doc.get('version')}")
    state = PushOutState(
        dim=int(doc["dim"]),
        initial=_shells_from_dict(doc["initial"]),
        eps_schedule=EpsSchedule(base=float(doc["eps_schedule"]["base"])),
        i_max=int(doc["i_max"]),
        exponent_cap=int(doc["exponent_cap"]),
    )
    prev = state.initial
    for rd in doc["rounds"]:
        phi = ShearMap("phi", state.dim, _func_from_dict(rd["phi"]))
        psi = ShearMap("psi", state.dim, _func_from_dict(rd["psi"]))
        rec = PushOutRound(
            index=int(rd["index"]), phi=phi, psi=psi,
            phi_witnesses=tuple(SelectionWitness.from_dict(w)
                                for w in rd["phi_witnesses"]),
            psi_witnesses=tuple(SelectionWitness.from_dict(w)
                                for w in rd["psi_witnesses"]),
            shells_before=prev,
            shells_mid=_shells_from_dict(rd["mid"]),
            shells_after=_shells_from_dict(rd["after"]),
            eps=float(rd["eps"]), id_bound=float(rd["id_bound"]))
        state.rounds.append(rec)
        prev = rec.shells_after
    return state


def save_state(state: PushOutState, path) -> None:
    with open(path, "w") as fh:
        json.dump(state_to_dict(state), fh, indent=1)


def load_state(path) -> PushOutState:
    with open(path) as fh:
        return state_from_dict(json.load(fh))

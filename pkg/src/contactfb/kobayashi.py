"""Numerical bracketing of the directed Kobayashi norm and distance.

The directed norm of a tangent direction v at p is the infimum of 1/|lambda|
over horizontal disks f with f(0) = p, f'(0) = lambda v.  Upper bounds come
from explicit certified disks (a witnessed feasible point of the infimum);
lower bounds come from the derivative-bound certificate of the obstacle
module, which caps |lambda v_coord| for every disk avoiding the standard
obstacle.  The distance estimator integrates the directed upper bounds
along a constructive horizontal path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .contact import (
    ContactPoint,
    HolomorphicCurve,
    KERNEL_TOL,
    TangentVector,
    alpha0_eval,
    chow_path,
    legendrian_from_xy,
)
from .numeric import CPolynomial
from .obstacle import (
    BoundCertificate,
    DEFAULT_AVOIDANCE_MARGIN,
    ShellUnion,
    derivative_bound_certificate,
)


@dataclass(frozen=True)
class SearchBudget:
    """Deterministic budget for the disk searches.

    ``lambda_budget`` caps the scaling |lambda| (and is the value used
    directly in the unconstrained full-space case); the pattern search runs
    ``restarts`` independent seeded starts of at most ``iterations`` sweeps.
    """

    restarts: int = 32
    iterations: int = 60
    degree: int = 4
    lambda_budget: float = 1e3
    margin: float = DEFAULT_AVOIDANCE_MARGIN
    penalty_weight: float = 50.0
    init_step: float = 0.5
    min_step: float = 1e-3

    def __post_init__(self):
        if self.restarts < 1 or self.iterations < 1:
            raise ValueError("restarts and iterations must be >= 1")
        if self.degree < 1:
            raise ValueError("degree must be >= 1")
        if self.lambda_budget <= 0:
            raise ValueError("lambda_budget must be positive")


@dataclass(frozen=True)
class NormBracket:
    """Two-sided estimate of the directed norm at one (p, v)."""

    lower: float
    upper: float
    lower_certificate: BoundCertificate | None = None
    upper_witness: HolomorphicCurve | None = None

    def __post_init__(self):
        if math.isfinite(self.upper) and self.lower > self.upper + 1e-15:
            raise ValueError("bracket is inconsistent: lower > upper")


def _certification_shortfall(components, K: ShellUnion, margin: float):
    """(certified, total shortfall) of the avoidance routes for one disk.

    Per shell the shortfall is the smallest amount by which any of the
    three one-sided routes misses; zero means the shell is certified.
    """
    components = list(components)
    sups = {d: components[d].sup_bound(1.0) for d in K.shell_dims}
    infs = {d: components[d].inf_lower_bound() for d in K.shell_dims}
    sup_max = max(sups.values())
    inf_best = max(infs.values())
    inf_disk = components[K.disk_dim].inf_lower_bound()
    total = 0.0
    for s in K.shells:
        inside = max(0.0, sup_max - (s.a - margin))
        outside = max(0.0, (s.b + margin) - inf_best) if math.isfinite(s.b) \
            else math.inf
        z_esc = max(0.0, (s.c + margin) - inf_disk) if math.isfinite(s.c) \
            else math.inf
        total += min(inside, outside, z_esc)
    return total == 0.0, total


# ---------------------------------------------------------------------------
# deterministic multi-start pattern search
# ---------------------------------------------------------------------------

def _pattern_search(evaluate, x0: np.ndarray, budget: SearchBudget):
    """Coordinate-wise pattern search maximizing a nonsmooth score.

    ``evaluate(x) -> (score, payload)`` where payload is None for
    uncertified points.  Returns the best certified payload seen anywhere
    along the search (accepted or not), with its score.
    """
    x = np.array(x0, dtype=np.float64)
    score, payload = evaluate(x)
    best_payload = payload
    best_key = payload[0] if payload is not None else -math.inf
    step = budget.init_step
    for _ in range(budget.iterations):
        improved = False
        for j in range(x.size):
            for sgn in (1.0, -1.0):
                y = x.copy()
                y[j] += sgn * step
                s, pl = evaluate(y)
                if pl is not None and pl[0] > best_key:
                    best_key, best_payload = pl[0], pl
                if s > score:
                    x, score = y, s
                    improved = True
        if not improved:
            step *= 0.5
            if step < budget.min_step:
                break
    return best_payload


def _build_disk(p: ContactPoint, u: TangentVector, lam: float,
                free: np.ndarray, degree: int) -> HolomorphicCurve:
    """Horizontal disk with f(0) = p, linear xy-part lam*u, and free higher
    coefficients; z is determined by exact integration."""
    n = p.n
    n_free = degree - 1  # coefficients for powers 2..degree
    xs, ys = [], []
    pos = 0
    for j in range(n):
        for block, base, vel in (("x", p.x[j], u.x[j]), ("y", p.y[j], u.y[j])):
            coeffs = [base, lam * vel]
            for _ in range(n_free):
                coeffs.append(complex(free[pos], free[pos + 1]))
                pos += 2
            (xs if block == "x" else ys).append(CPolynomial(coeffs))
    return legendrian_from_xy(xs, ys, p.z)


def directed_norm_upper(p: ContactPoint, v: TangentVector,
                        domain: str = "complement",
                        K: ShellUnion | None = None,
                        budget: SearchBudget | None = None,
                        seed: int = 0):
    """Certified upper bound for the directed norm at (p, v), with witness.

    In the full space every direction admits a straight horizontal disk at
    any scaling, so the bound is maxnorm(v) / lambda_budget.  In the
    complement of K a multi-start pattern search maximizes the scaling over
    disks with certified avoidance; only certified disks are ever returned.
    Returns (upper, witness_disk); (inf, None) if nothing certifies.
    """
    if budget is None:
        budget = SearchBudget()
    if domain not in ("full_space", "complement"):
        raise ValueError("domain must be 'full_space' or 'complement'")
    if p.n != v.n:
        raise ValueError("dimension mismatch between point and vector")
    defect = alpha0_eval(p, v)
    if abs(defect) > KERNEL_TOL:
        raise ValueError(f"direction is not horizontal: alpha0(v) = {defect!r}")
    scale = v.maxnorm()
    if scale == 0.0:
        return 0.0, None
    # normalize so the bound is exactly 1-homogeneous in v
    u = v.scaled(1.0 / scale)

    if domain == "full_space":
        lam = budget.lambda_budget
        witness = _build_disk(p, u, lam, np.zeros(0), 1)
        return scale / lam, witness

    if K is None:
        raise ValueError("complement domain requires the shell union K")
    degree = budget.degree
    n_params = 1 + 2 * (degree - 1) * 2 * p.n  # log-lambda + free coeffs

    def evaluate(params):
        log_lam = params[0]
        if log_lam > math.log(budget.lambda_budget):
            return -math.inf, None
        lam = math.exp(log_lam)
        f = _build_disk(p, u, lam, params[1:], degree)
        certified, shortfall = _certification_shortfall(
            f.components, K, budget.margin)
        score = log_lam - budget.penalty_weight * shortfall
        payload = (log_lam, f) if certified else None
        return score, payload

    best = None
    for r in range(budget.restarts):
        if r == 0:
            x0 = np.zeros(n_params)
            x0[0] = -0.5
        else:
            rng = np.random.default_rng([seed, r])
            x0 = np.zeros(n_params)
            x0[0] = rng.uniform(-3.0, 0.5)
            x0[1:] = 0.1 * rng.standard_normal(n_params - 1)
        payload = _pattern_search(evaluate, x0, budget)
        if payload is not None and (best is None or payload[0] > best[0]):
            best = payload
    if best is None:
        return math.inf, None
    log_lam, witness = best
    return scale / math.exp(log_lam), witness


def directed_norm_lower(p: ContactPoint, v: TangentVector,
                        K: ShellUnion):
    """Certified lower bound for the directed norm in the complement of the
    standard obstacle, from the first-derivative cap at the center.

    Any avoiding horizontal disk with f(0) = p and f'(0) = lambda v has
    |lambda v_xj|, |lambda v_yj| < 2^(N0+1) and |lambda v_z| < 2^(2N0+1)
    for the minimal N0 >= 1 with p in the open 2^N0 polydisk, hence
    1/|lambda| > |v_coord| / bound for every coordinate.
    Returns (lower, certificate); 0 for the zero direction.
    """
    if p.n != v.n:
        raise ValueError("dimension mismatch between point and vector")
    defect = alpha0_eval(p, v)
    if abs(defect) > KERNEL_TOL:
        raise ValueError(f"direction is not horizontal: alpha0(v) = {defect!r}")
    m = p.maxnorm()
    N0 = 1
    while 2.0 ** N0 <= m:
        N0 += 1
    cert = derivative_bound_certificate(N0, p.n)
    best = 0.0
    for coord in (*v.x, *v.y):
        best = max(best, abs(coord) / cert.bound_xy)
    best = max(best, abs(v.z) / cert.bound_z)
    return best, cert


def directed_norm_bracket(p: ContactPoint, v: TangentVector, K: ShellUnion,
                          budget: SearchBudget | None = None,
                          seed: int = 0) -> NormBracket:
    """Two-sided estimate in the complement domain."""
    lower, cert = directed_norm_lower(p, v, K)
    upper, witness = directed_norm_upper(p, v, "complement", K, budget, seed)
    return NormBracket(lower=lower, upper=upper, lower_certificate=cert,
                       upper_witness=witness)


# ---------------------------------------------------------------------------
# the integrated distance upper bound
# ---------------------------------------------------------------------------

def cck_distance_upper(p: ContactPoint, q: ContactPoint,
                       domain: str = "full_space",
                       K: ShellUnion | None = None,
                       budget: SearchBudget | None = None,
                       seed: int = 0, nodes: int = 64):
    """Upper bound for the horizontal-path distance from p to q.

    Builds a piecewise-polynomial horizontal path, applies the directed
    upper-bound estimator at composite midpoint nodes of each segment, and
    sums the quadrature.  Valid up to quadrature error; the node count is
    reported with the value.  Returns (value, node_count).
    """
    if budget is None:
        budget = SearchBudget()
    if p.flat() == q.flat():
        return 0.0, 0
    plan = chow_path(p, q)
    total = 0.0
    used = 0
    for seg in plan.segments:
        h = 1.0 / nodes
        for m in range(nodes):
            t = (m + 0.5) * h
            pt = seg.at(t)
            vel = seg.derivative_at(t)
            if vel.maxnorm() == 0.0:
                continue
            upper, _ = directed_norm_upper(pt, vel, domain, K, budget,
                                           seed=seed + used)
            if not math.isfinite(upper):
                return math.inf, used
            total += upper * h
            used += 1
    return total, used


# ---------------------------------------------------------------------------
# contrapositive derivative search
# ---------------------------------------------------------------------------

def max_certified_x_derivative(K: ShellUnion, n: int = 1, N0: int = 1,
                               budget: SearchBudget | None = None,
                               seed: int = 0) -> float:
    """Largest |x_1'(0)| the optimizer can certify over avoiding horizontal
    disks centered at the origin.

    This is the contrapositive of the derivative-bound certificate: with
    the standard obstacle it can never reach 2^(N0+1).  Free parameters
    are all xy coefficients up to the budget degree.
    """
    if budget is None:
        budget = SearchBudget()
    degree = budget.degree
    n_params = 2 * degree * 2 * n  # all coefficients of powers 1..degree

    def build(params):
        xs, ys = [], []
        pos = 0
        for _ in range(n):
            for block in ("x", "y"):
                coeffs = [0j]
                for _ in range(degree):
                    coeffs.append(complex(params[pos], params[pos + 1]))
                    pos += 2
                (xs if block == "x" else ys).append(CPolynomial(coeffs))
        return legendrian_from_xy(xs, ys, 0j)

    def evaluate(params):
        f = build(params)
        if f.at(0.0).maxnorm() >= 2.0 ** N0:
            return -math.inf, None
        target = abs(f.components[0].eval_deriv(0.0)[1])
        certified, shortfall = _certification_shortfall(
            f.components, K, budget.margin)
        score = target - budget.penalty_weight * shortfall
        payload = (target, f) if certified else None
        return score, payload

    best = 0.0
    for r in range(budget.restarts):
        rng = np.random.default_rng([seed, r])
        x0 = 0.2 * rng.standard_normal(n_params)
        payload = _pattern_search(evaluate, x0, budget)
        if payload is not None:
            best = max(best, payload[0])
    return best

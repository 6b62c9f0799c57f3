"""Obstacle cylinder unions, membership tests, and the derivative-bound
certificate for horizontal disks avoiding them.

A shell union is a finite list of cylinders

    (b_i closed-polydisk  minus  a_i open-polydisk)  x  (c_i closed disk)

where the polydisk factor lives on ``shell_dims`` (max-norm) and the disk
factor on ``disk_dim``.  The standard obstacle has the degenerate bands
a_i = b_i = 2^(i-1) on the 2n (x, y)-coordinates and c_i = C_i on z.

Radii are stored as natural logs so the same type can describe the shell
unions produced by the push-out recursion, whose radii overflow any native
float within a few rounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .contact import HolomorphicCurve, horizontality_residual
from .numeric import NEG_INF, ScaledComplex, log_shift

DEFAULT_AVOIDANCE_MARGIN = 1e-6


@dataclass(frozen=True)
class ShellBand:
    """One cylinder, radii stored as natural logs."""

    log_a: float
    log_b: float
    log_c: float

    @property
    def a(self) -> float:
        return math.exp(self.log_a) if self.log_a < 700 else math.inf

    @property
    def b(self) -> float:
        return math.exp(self.log_b) if self.log_b < 700 else math.inf

    @property
    def c(self) -> float:
        return math.exp(self.log_c) if self.log_c < 700 else math.inf


@dataclass(frozen=True)
class ShellUnion:
    """Finite union of shell-times-disk cylinders with an axis split."""

    shells: tuple[ShellBand, ...]
    shell_dims: tuple[int, ...]
    disk_dim: int
    orientation: str = "vertical"

    def __post_init__(self):
        if self.disk_dim in self.shell_dims:
            raise ValueError("disk_dim must not appear in shell_dims")
        prev_b = NEG_INF
        for i, s in enumerate(self.shells, start=1):
            if not (s.log_a <= s.log_b):
                raise ValueError(f"shell {i}: requires a_{i} <= b_{i}")
            if not (prev_b < s.log_a):
                raise ValueError(
                    f"shell {i}: bands must interleave (b_{i-1} < a_{i})")
            if s.log_c == NEG_INF:
                raise ValueError(f"shell {i}: c_{i} must be positive")
            prev_b = s.log_b

    @classmethod
    def from_linear(cls, shells, shell_dims, disk_dim,
                    orientation: str = "vertical") -> "ShellUnion":
        bands = tuple(
            ShellBand(math.log(a), math.log(b), math.log(c))
            for a, b, c in shells)
        return cls(bands, tuple(shell_dims), disk_dim, orientation)

    @property
    def dim(self) -> int:
        return max((*self.shell_dims, self.disk_dim)) + 1

    def linear_shells(self) -> tuple[tuple[float, float, float], ...]:
        return tuple((s.a, s.b, s.c) for s in self.shells)


def _coord_log_mag(value) -> float:
    if isinstance(value, ScaledComplex):
        return value.abs_log()
    m = abs(complex(value))
    return math.log(m) if m > 0 else NEG_INF


def contains(K: ShellUnion, p, eta: float = 0.0) -> bool:
    """Closed-set membership of p in K, inflated by the linear tolerance eta.

    p is a flat coordinate sequence of complex or ScaledComplex values.
    Member iff for some shell: a_i - eta <= maxnorm(shell coords) <= b_i +
    eta and |p[disk_dim]| <= c_i + eta.
    """
    if eta < 0:
        raise ValueError("eta must be >= 0")
    p = list(p)
    if len(p) < K.dim:
        raise ValueError("point has too few coordinates for this shell union")
    log_max = max(_coord_log_mag(p[d]) for d in K.shell_dims)
    log_disk = _coord_log_mag(p[K.disk_dim])
    for s in K.shells:
        lo = log_shift(s.log_a, -eta)
        hi = log_shift(s.log_b, eta)
        cap = log_shift(s.log_c, eta)
        if lo <= log_max <= hi and log_disk <= cap:
            return True
    return False


def membership_margin(K: ShellUnion, p) -> float:
    """Largest log-domain slack with which p sits inside some shell of K.

    Positive iff p is strictly inside a shell (all three log inequalities
    strict); used to assert sampled containment with margin.
    """
    p = list(p)
    log_max = max(_coord_log_mag(p[d]) for d in K.shell_dims)
    log_disk = _coord_log_mag(p[K.disk_dim])
    best = -math.inf
    for s in K.shells:
        slack = min(log_max - s.log_a, s.log_b - log_max,
                    s.log_c - log_disk)
        best = max(best, slack)
    return best


# ---------------------------------------------------------------------------
# the standard obstacle
# ---------------------------------------------------------------------------

def hyperbolic_height_rule(n: int):
    """The height schedule C_N = n * 2^(3N+1) (smallest certified choice)."""
    return lambda N: n * 2.0 ** (3 * N + 1)


def standard_obstacle(n: int, i_max: int, C_rule=None,
                      require_hyperbolic: bool = True) -> ShellUnion:
    """Standard obstacle in C^(2n+1): degenerate bands a_i = b_i = 2^(i-1)
    on the 2n (x, y)-coordinates, height c_i = C_i on z, truncated at i_max.

    With require_hyperbolic the schedule must satisfy C_N >= n*2^(3N+1),
    the constant under which the derivative-bound certificate is valid.
    """
    if i_max < 1:
        raise ValueError("i_max must be >= 1")
    if n < 1:
        raise ValueError("n must be >= 1")
    if C_rule is None:
        C_rule = hyperbolic_height_rule(n)
    shells = []
    for N in range(1, i_max + 1):
        c = float(C_rule(N))
        if c <= 0:
            raise ValueError(f"invalid height schedule: C_{N} = {c}")
        if require_hyperbolic and c < n * 2.0 ** (3 * N + 1):
            raise ValueError(
                f"C_{N} = {c} violates the hyperbolicity constant "
                f"{n * 2.0 ** (3 * N + 1)}")
        r = 2.0 ** (N - 1)
        shells.append((r, r, c))
    return ShellUnion.from_linear(shells, tuple(range(2 * n)), 2 * n)


# ---------------------------------------------------------------------------
# derivative bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundCertificate:
    """First-derivative bounds at 0 for avoiding horizontal disks whose
    center lies in the 2^N0 polydisk: |x'(0)|, |y'(0)| < 2^(N0+1) and
    |z'(0)| < 2^(2N0+1)."""

    N0: int
    n: int
    bound_xy: float = field(init=False)
    bound_z: float = field(init=False)

    def __post_init__(self):
        if self.N0 < 1:
            raise ValueError("N0 must be >= 1")
        object.__setattr__(self, "bound_xy", 2.0 ** (self.N0 + 1))
        object.__setattr__(self, "bound_z", 2.0 ** (2 * self.N0 + 1))


def derivative_bound_certificate(N0: int, n: int) -> BoundCertificate:
    return BoundCertificate(N0=N0, n=n)


# ---------------------------------------------------------------------------
# avoidance certification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AvoidanceCheck:
    """Per-shell certified-avoidance verdict for a polynomial disk.

    For each shell one of three one-sided routes can certify a miss:
    'inside' (every shell coordinate's sup bound stays below a_i - margin),
    'outside' (some single coordinate's certified inf exceeds b_i + margin),
    or 'z_escape' (the disk coordinate's certified inf exceeds c_i + margin).
    """

    certified: bool
    routes: tuple[str, ...]
    failed_shells: tuple[int, ...]


def certify_avoidance(components, K: ShellUnion,
                      margin: float = DEFAULT_AVOIDANCE_MARGIN) -> AvoidanceCheck:
    """Certified check that the image of the closed unit disk misses K."""
    components = list(components)
    sups = {d: components[d].sup_bound(1.0) for d in K.shell_dims}
    infs = {d: components[d].inf_lower_bound() for d in K.shell_dims}
    sup_max = max(sups.values())
    inf_best = max(infs.values())
    inf_disk = components[K.disk_dim].inf_lower_bound()
    routes = []
    failed = []
    for i, s in enumerate(K.shells, start=1):
        if sup_max < s.a - margin:
            routes.append("inside")
        elif inf_best > s.b + margin:
            routes.append("outside")
        elif inf_disk > s.c + margin:
            routes.append("z_escape")
        else:
            routes.append("uncertified")
            failed.append(i)
    return AvoidanceCheck(certified=not failed, routes=tuple(routes),
                          failed_shells=tuple(failed))


def boundary_circle_points(n_angles: int, radii) -> np.ndarray:
    angles = np.linspace(0.0, 2.0 * math.pi, n_angles, endpoint=False)
    unit = np.exp(1j * angles)
    return np.concatenate([r * unit for r in radii])


def sampled_hit(components, K: ShellUnion, n_angles: int = 4096,
                radii=None) -> bool:
    """Sampled (non-certified) intersection test on boundary circles."""
    if radii is None:
        radii = [0.1 * k for k in range(1, 11)]
    pts = boundary_circle_points(n_angles, radii)
    mags = {}
    for d in set((*K.shell_dims, K.disk_dim)):
        vals, _ = components[d].eval_many(pts)
        mags[d] = np.abs(vals)
    maxnorm = np.max(np.stack([mags[d] for d in K.shell_dims]), axis=0)
    disk = mags[K.disk_dim]
    for s in K.shells:
        if np.any((maxnorm >= s.a) & (maxnorm <= s.b) & (disk <= s.c)):
            return True
    return False


# ---------------------------------------------------------------------------
# the disk-estimate verifier
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiskEstimateReport:
    avoidance: str                      # 'certified' | 'sampled-only' | 'fails'
    routes: tuple[str, ...]
    derivatives: dict
    certificate: BoundCertificate
    bounds_hold: bool
    passed: bool


def verify_disk_estimate(f: HolomorphicCurve, K: ShellUnion, N0: int,
                         samples: int = 4096,
                         margin: float = DEFAULT_AVOIDANCE_MARGIN) -> DiskEstimateReport:
    """Check the first-derivative bounds for one horizontal disk against K.

    Preconditions: the horizontality residual of f is the zero polynomial
    and f(0) has max-norm < 2^N0.  The avoidance verdict is 'certified'
    when coefficient-sum bounds show every shell is missed by ``margin``,
    'sampled-only' when certification fails but dense boundary-circle
    sampling finds no hit, and 'fails' when a sampled point lands in K.
    """
    if not horizontality_residual(f).is_zero:
        raise ValueError("curve is not horizontal (nonzero residual)")
    center = f.at(0.0)
    if center.maxnorm() >= 2.0 ** N0:
        raise ValueError("f(0) must lie in the open 2^N0 polydisk")
    cert = derivative_bound_certificate(N0, f.n)

    check = certify_avoidance(f.components, K, margin)
    if check.certified:
        avoidance = "certified"
    elif sampled_hit(f.components, K, n_angles=samples):
        avoidance = "fails"
    else:
        avoidance = "sampled-only"

    d0 = f.derivative_at(0.0)
    derivs = {
        "x": tuple(abs(v) for v in d0.x),
        "y": tuple(abs(v) for v in d0.y),
        "z": abs(d0.z),
    }
    bounds_hold = (all(v < cert.bound_xy for v in derivs["x"])
                   and all(v < cert.bound_xy for v in derivs["y"])
                   and derivs["z"] < cert.bound_z)
    passed = bounds_hold and avoidance != "fails"
    return DiskEstimateReport(avoidance=avoidance, routes=check.routes,
                              derivatives=derivs, certificate=cert,
                              bounds_hold=bounds_hold, passed=passed)


# ---------------------------------------------------------------------------
# random avoiding disks (rejection sampler for the property suites)
# ---------------------------------------------------------------------------

def random_avoiding_disks(n: int, N0: int, K: ShellUnion, count: int,
                          seed: int, degree: int = 8,
                          margin: float = DEFAULT_AVOIDANCE_MARGIN,
                          max_tries: int = 200000):
    """Rejection-sample horizontal polynomial disks with certified avoidance
    of K and center inside the 2^N0 polydisk.

    Proposals place one marked (x, y)-coordinate between consecutive shell
    radii and keep perturbation tails small relative to the gap, so the
    certifier accepts at a healthy rate while rejection still happens.
    Returns a list of HolomorphicCurve.
    """
    from .contact import legendrian_from_xy  # local import, no cycle
    from .numeric import CPolynomial

    rng = np.random.default_rng(seed)
    radii = [s.a for s in K.shells]
    out = []
    tries = 0
    while len(out) < count and tries < max_tries:
        tries += 1
        # radial slot for the marked coordinate: inside the first shell or
        # in one of the gaps (2^(i-1), 2^i) up to 2^N0
        slots = [r for r in radii if r <= 2.0 ** N0]
        slot = int(rng.integers(0, len(slots) + 1))  # 0 = innermost hole
        lo = 0.0 if slot == 0 else slots[slot - 1]
        hi = slots[slot] if slot < len(slots) else min(2.0 ** N0, 2 * lo or 1.0)
        if hi <= lo:
            continue
        base = rng.uniform(lo + 0.15 * (hi - lo), hi - 0.15 * (hi - lo))
        amp = rng.uniform(0.0, 0.35) * min(base - lo if slot else hi - base,
                                           hi - base)
        marked = int(rng.integers(0, 2 * n))

        def rand_poly(center_mag, is_marked):
            c0 = center_mag * np.exp(1j * rng.uniform(-math.pi, math.pi))
            coeffs = [complex(c0)]
            scale = amp
            for k in range(1, degree + 1):
                coeffs.append(complex(scale * (rng.normal() + 1j * rng.normal())
                                      / (3.0 ** k)))
            return CPolynomial(coeffs)

        polys = []
        for d in range(2 * n):
            if d == marked:
                polys.append(rand_poly(base, True))
            else:
                polys.append(rand_poly(rng.uniform(0.0, base), False))
        xs = polys[0::2]
        ys = polys[1::2]
        z0 = rng.uniform(0, 0.5 * 2.0 ** N0) * np.exp(
            1j * rng.uniform(-math.pi, math.pi))
        f = legendrian_from_xy(xs, ys, complex(z0))
        if f.at(0.0).maxnorm() >= 2.0 ** N0:
            continue
        if certify_avoidance(f.components, K, margin).certified:
            out.append(f)
    if len(out) < count:
        raise RuntimeError(
            f"rejection sampler produced only {len(out)}/{count} disks")
    return out

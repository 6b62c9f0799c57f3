"""Extended-range complex arithmetic and exact dense polynomial calculus.

Two representations carry the whole package:

* ``ScaledComplex`` -- a complex number stored as log-magnitude plus phase.
  The push-out recursion produces magnitudes like (4/3)**N with N in the
  tens of thousands, far beyond float range; all of its bookkeeping happens
  in the log domain.  The log-magnitude is kept in extended precision
  (``np.longdouble``) so that round-tripping values near the edge of native
  float range stays well below 1e-14 relative error.

* ``CPolynomial`` -- a dense complex polynomial whose coefficients are
  stored as exact rationals (a pair of ``fractions.Fraction`` per
  coefficient).  Products, sums, derivatives and antiderivatives are then
  exact, which is what lets horizontality be verified as "the residual is
  the identically-zero polynomial" with zero tolerance.  Evaluation and sup
  bounds convert once to complex128 and go through the batched kernels.
"""

from __future__ import annotations

import cmath
import math
from fractions import Fraction

import numpy as np

from . import kernels

NEG_INF = float("-inf")

#: Default cap on polynomial degree for construction operations that can
#: grow the degree (products, antiderivatives of products).
DEGREE_CAP = 64

# Magnitudes with |log| below this convert to/from native floats safely.
_NATIVE_LOG_LIMIT = 690.0


class DegreeCapError(ValueError):
    """Raised when a construction would exceed the polynomial degree cap."""


def wrap_phase(phi: float) -> float:
    """Reduce an angle to the interval (-pi, pi]."""
    phi = math.fmod(float(phi), 2.0 * math.pi)
    if phi > math.pi:
        phi -= 2.0 * math.pi
    elif phi <= -math.pi:
        phi += 2.0 * math.pi
    return phi


# ---------------------------------------------------------------------------
# log-domain helpers for nonnegative reals (zero encoded as -inf)
# ---------------------------------------------------------------------------

def log_add(la: float, lb: float) -> float:
    """log(exp(la) + exp(lb)) without overflow."""
    if la == NEG_INF:
        return lb
    if lb == NEG_INF:
        return la
    hi, lo = (la, lb) if la >= lb else (lb, la)
    return hi + math.log1p(math.exp(lo - hi))


def log_sum(logs) -> float:
    """log of the sum of nonnegative values given by their logs."""
    logs = [l for l in logs if l != NEG_INF]
    if not logs:
        return NEG_INF
    hi = max(logs)
    return hi + math.log(math.fsum(math.exp(l - hi) for l in logs))


def log_sub(la: float, lb: float) -> float:
    """log(exp(la) - exp(lb)); requires la > lb."""
    if lb == NEG_INF:
        return la
    if lb >= la:
        raise ValueError("log_sub requires a strictly positive difference")
    return la + math.log1p(-math.exp(lb - la))


def log_shift(lx: float, delta: float) -> float:
    """log(max(exp(lx) + delta, 0)) for a small linear shift delta.

    Used to apply linear membership tolerances to radii that may be far
    beyond native float range, where the shift is negligible.
    """
    if delta == 0.0:
        return lx
    if lx == NEG_INF:
        return math.log(delta) if delta > 0 else NEG_INF
    if lx > _NATIVE_LOG_LIMIT:
        return lx  # |delta| is negligible at this magnitude
    x = math.exp(lx) + delta
    return math.log(x) if x > 0 else NEG_INF


# ---------------------------------------------------------------------------
# ScaledComplex
# ---------------------------------------------------------------------------

class ScaledComplex:
    """Complex number stored as (log-magnitude, phase).

    ``log_mag`` is an ``np.longdouble``; ``-inf`` is the zero sentinel, in
    which case the phase is 0 by convention.  Values are immutable.
    """

    __slots__ = ("log_mag", "phase")

    def __init__(self, log_mag, phase: float = 0.0):
        lm = np.longdouble(log_mag)
        if lm == NEG_INF:
            object.__setattr__(self, "log_mag", np.longdouble(NEG_INF))
            object.__setattr__(self, "phase", 0.0)
        else:
            object.__setattr__(self, "log_mag", lm)
            object.__setattr__(self, "phase", wrap_phase(phase))

    def __setattr__(self, name, value):
        raise AttributeError("ScaledComplex is immutable")

    # -- constructors -------------------------------------------------

    @classmethod
    def zero(cls) -> "ScaledComplex":
        return cls(NEG_INF, 0.0)

    @classmethod
    def one(cls) -> "ScaledComplex":
        return cls(0.0, 0.0)

    @classmethod
    def from_complex(cls, z: complex) -> "ScaledComplex":
        z = complex(z)
        if z == 0:
            return cls.zero()
        return cls(np.log(np.longdouble(abs(z))), math.atan2(z.imag, z.real))

    # -- predicates and conversions ------------------------------------

    @property
    def is_zero(self) -> bool:
        return self.log_mag == NEG_INF

    def to_complex(self) -> complex:
        """Native complex value; raises OverflowError beyond float range."""
        if self.is_zero:
            return 0j
        if self.log_mag > _NATIVE_LOG_LIMIT:
            raise OverflowError("magnitude exceeds native float range")
        mag = float(np.exp(self.log_mag))
        return complex(mag * math.cos(self.phase), mag * math.sin(self.phase))

    def abs_log(self) -> float:
        """log of the modulus as a plain float (-inf for zero)."""
        return float(self.log_mag)

    # -- arithmetic -----------------------------------------------------

    def __mul__(self, other: "ScaledComplex") -> "ScaledComplex":
        if self.is_zero or other.is_zero:
            return ScaledComplex.zero()
        return ScaledComplex(self.log_mag + other.log_mag,
                             self.phase + other.phase)

    def __neg__(self) -> "ScaledComplex":
        if self.is_zero:
            return self
        return ScaledComplex(self.log_mag, self.phase + math.pi)

    def __add__(self, other: "ScaledComplex") -> "ScaledComplex":
        return scaled_add(self, other)

    def __sub__(self, other: "ScaledComplex") -> "ScaledComplex":
        return scaled_add(self, -other)

    def pow_int(self, k: int) -> "ScaledComplex":
        if k < 0:
            raise ValueError("negative powers are not supported")
        if k == 0:
            return ScaledComplex.one()
        if self.is_zero:
            return ScaledComplex.zero()
        return ScaledComplex(self.log_mag * k, self.phase * k)

    def __repr__(self) -> str:
        if self.is_zero:
            return "ScaledComplex(zero)"
        return f"ScaledComplex(log_mag={float(self.log_mag)!r}, phase={self.phase!r})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, ScaledComplex):
            return NotImplemented
        return self.log_mag == other.log_mag and self.phase == other.phase

    def __hash__(self) -> int:
        return hash((float(self.log_mag), self.phase))


def scaled_pow(base_num: float, base_den: float, exponent: int) -> ScaledComplex:
    """(base_num / base_den) ** exponent as a ScaledComplex.

    Both base parts must be positive; the exponent is a nonnegative integer.
    The result has phase 0 and log-magnitude exponent*(ln num - ln den).
    """
    if base_num <= 0 or base_den <= 0:
        raise ValueError("scaled_pow requires positive base parts")
    exponent = int(exponent)
    if exponent < 0:
        raise ValueError("scaled_pow requires a nonnegative exponent")
    if exponent == 0:
        return ScaledComplex.one()
    log_ratio = np.log(np.longdouble(base_num)) - np.log(np.longdouble(base_den))
    return ScaledComplex(log_ratio * exponent, 0.0)


def scaled_add(a: ScaledComplex, b: ScaledComplex) -> ScaledComplex:
    """Exact-to-rounding complex sum, safe for any magnitudes.

    The larger log-magnitude is factored out, so the native-complex sum of
    the normalized parts never overflows.  Exact cancellation yields the
    zero sentinel.
    """
    if a.is_zero:
        return b
    if b.is_zero:
        return a
    # exact cancellation: equal magnitude, exactly opposite (wrapped) phase
    if a.log_mag == b.log_mag and wrap_phase(a.phase + math.pi) == b.phase:
        return ScaledComplex.zero()
    if a.log_mag >= b.log_mag:
        hi, lo = a, b
    else:
        hi, lo = b, a
    scale = float(lo.log_mag - hi.log_mag)  # <= 0
    lo_mag = math.exp(scale) if scale > -_NATIVE_LOG_LIMIT else 0.0
    s = cmath.rect(1.0, hi.phase) + cmath.rect(lo_mag, lo.phase)
    if s == 0:
        return ScaledComplex.zero()
    return ScaledComplex(hi.log_mag + np.log(np.longdouble(abs(s))),
                         math.atan2(s.imag, s.real))


def scaled_sum_arrays(log_mags: np.ndarray, phases: np.ndarray, axis: int = -1):
    """Vectorized complex sum in the log domain.

    ``log_mags``/``phases`` hold the polar data of the summands along
    ``axis``; returns (log_mag, phase) arrays of the summed values, with
    -inf marking exact zeros.  Used by the orbit classifier, which pushes
    thousands of points through shear maps at once.
    """
    log_mags = np.asarray(log_mags, dtype=np.float64)
    phases = np.asarray(phases, dtype=np.float64)
    hi = np.max(log_mags, axis=axis, keepdims=True)
    hi_safe = np.where(np.isneginf(hi), 0.0, hi)
    scaled = np.exp(log_mags - hi_safe) * np.exp(1j * phases)
    scaled = np.where(np.isneginf(log_mags), 0.0, scaled)
    total = np.sum(scaled, axis=axis)
    hi = np.squeeze(hi_safe, axis=axis)
    mag = np.abs(total)
    with np.errstate(divide="ignore"):
        out_log = np.where(mag > 0.0, hi + np.log(np.where(mag > 0, mag, 1.0)),
                           NEG_INF)
    out_phase = np.angle(total)
    return out_log, out_phase


# ---------------------------------------------------------------------------
# CPolynomial
# ---------------------------------------------------------------------------

def _to_rational_pair(c) -> tuple[Fraction, Fraction]:
    if isinstance(c, tuple):
        return (Fraction(c[0]), Fraction(c[1]))
    if isinstance(c, Fraction):
        return (c, Fraction(0))
    z = complex(c)
    return (Fraction(z.real), Fraction(z.imag))


class CPolynomial:
    """Dense complex polynomial with exact rational coefficients.

    Coefficients are given in ascending powers; trailing zeros are stripped.
    The zero polynomial has an empty coefficient tuple and degree -1.
    Construction operations (sum, product, derivative, antiderivative) are
    exact; evaluation goes through complex128.
    """

    __slots__ = ("_rat", "_coeffs", "_array")

    def __init__(self, coeffs=()):
        rat = [_to_rational_pair(c) for c in coeffs]
        while rat and rat[-1] == (0, 0):
            rat.pop()
        object.__setattr__(self, "_rat", tuple(rat))
        object.__setattr__(self, "_coeffs", tuple(
            complex(float(re), float(im)) for re, im in rat))
        object.__setattr__(self, "_array", None)

    def __setattr__(self, name, value):
        raise AttributeError("CPolynomial is immutable")

    # -- basic structure ------------------------------------------------

    @property
    def coeffs(self) -> tuple[complex, ...]:
        return self._coeffs

    @property
    def rational_coeffs(self) -> tuple[tuple[Fraction, Fraction], ...]:
        return self._rat

    @property
    def degree(self) -> int:
        return len(self._rat) - 1

    @property
    def is_zero(self) -> bool:
        return not self._rat

    def coeff_array(self) -> np.ndarray:
        arr = self._array
        if arr is None:
            arr = np.asarray(self._coeffs, dtype=np.complex128)
            object.__setattr__(self, "_array", arr)
        return arr

    def __eq__(self, other) -> bool:
        if not isinstance(other, CPolynomial):
            return NotImplemented
        return self._rat == other._rat

    def __hash__(self) -> int:
        return hash(self._rat)

    def __repr__(self) -> str:
        return f"CPolynomial({list(self._coeffs)!r})"

    # -- exact construction arithmetic ----------------------------------

    def __add__(self, other: "CPolynomial") -> "CPolynomial":
        a, b = self._rat, other._rat
        if len(a) < len(b):
            a, b = b, a
        out = list(a)
        for k, (re, im) in enumerate(b):
            out[k] = (out[k][0] + re, out[k][1] + im)
        return CPolynomial(out)

    def __neg__(self) -> "CPolynomial":
        return CPolynomial([(-re, -im) for re, im in self._rat])

    def __sub__(self, other: "CPolynomial") -> "CPolynomial":
        return self + (-other)

    def __mul__(self, other: "CPolynomial") -> "CPolynomial":
        if self.is_zero or other.is_zero:
            return CPolynomial()
        a, b = self._rat, other._rat
        out = [(Fraction(0), Fraction(0))] * (len(a) + len(b) - 1)
        for i, (ar, ai) in enumerate(a):
            for j, (br, bi) in enumerate(b):
                re, im = out[i + j]
                out[i + j] = (re + ar * br - ai * bi, im + ar * bi + ai * br)
        return CPolynomial(out)

    def scale(self, c) -> "CPolynomial":
        cr, ci = _to_rational_pair(c)
        return CPolynomial([(re * cr - im * ci, re * ci + im * cr)
                            for re, im in self._rat])

    def derivative(self) -> "CPolynomial":
        return CPolynomial([(re * k, im * k)
                            for k, (re, im) in enumerate(self._rat)][1:])

    def antiderivative(self, constant=0) -> "CPolynomial":
        out = [_to_rational_pair(constant)]
        out.extend((re / (k + 1), im / (k + 1))
                   for k, (re, im) in enumerate(self._rat))
        return CPolynomial(out)

    # -- evaluation ------------------------------------------------------

    def __call__(self, z: complex) -> complex:
        return self.eval_deriv(z)[0]

    def eval_deriv(self, z: complex) -> tuple[complex, complex]:
        """Horner evaluation of p(z) and p'(z)."""
        z = complex(z)
        acc = 0j
        dacc = 0j
        for c in reversed(self._coeffs):
            dacc = dacc * z + acc
            acc = acc * z + c
        return acc, dacc

    def eval_many(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Batched evaluation via the kernel module."""
        return kernels.poly_eval_many(self.coeff_array(), points)

    def sup_bound(self, R: float) -> float:
        """Certified upper bound sum_k |c_k| R^k for sup over |z| <= R."""
        if R <= 0:
            raise ValueError("sup_bound requires R > 0")
        total = 0.0
        for c in reversed(self._coeffs):
            total = total * R + abs(c)
        return total

    def inf_lower_bound(self) -> float:
        """Certified lower bound |c_0| - sum_{k>=1} |c_k| for inf over the
        closed unit disk (may be negative, in which case it is vacuous)."""
        if self.is_zero:
            return 0.0
        tail = math.fsum(abs(c) for c in self._coeffs[1:])
        return abs(self._coeffs[0]) - tail


# Free-function aliases used throughout the package.

def poly_eval_deriv(p: CPolynomial, z: complex) -> tuple[complex, complex]:
    """Value and derivative of p at z (Horner, exact for degree 0)."""
    return p.eval_deriv(z)


def poly_antiderivative(p: CPolynomial, constant=0) -> CPolynomial:
    """Antiderivative with value ``constant`` at 0; exact on coefficients."""
    return p.antiderivative(constant)


def poly_sup_bound(p: CPolynomial, R: float) -> float:
    """Coefficient-sum bound for sup_{|z|<=R} |p(z)|; attained when all
    coefficients are nonnegative reals."""
    return p.sup_bound(R)


def poly_mul_capped(a: CPolynomial, b: CPolynomial,
                    cap: int = DEGREE_CAP) -> CPolynomial:
    """Product with a degree-cap check."""
    if not (a.is_zero or b.is_zero) and a.degree + b.degree > cap:
        raise DegreeCapError(
            f"product degree {a.degree + b.degree} exceeds cap {cap}")
    return a * b


def monomial(power: int, coeff=1) -> CPolynomial:
    return CPolynomial([0] * power + [coeff])


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def sample_polydisk(dim: int, R: float, count: int, seed: int):
    """Deterministic samples of the closed polydisk of max-norm radius R.

    The first sample is the origin and the second has every coordinate
    equal to R; the rest are uniform on the polydisk (per-coordinate
    uniform on the closed disk of radius R).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if R <= 0:
        raise ValueError("R must be > 0")
    rng = np.random.default_rng(seed)
    out = [tuple(0j for _ in range(dim))]
    if count >= 2:
        out.append(tuple(complex(R, 0.0) for _ in range(dim)))
    extra = count - len(out)
    if extra > 0:
        radii = R * np.sqrt(rng.random((extra, dim)))
        angles = rng.uniform(-math.pi, math.pi, (extra, dim))
        pts = radii * np.exp(1j * angles)
        out.extend(tuple(complex(z) for z in row) for row in pts)
    return out

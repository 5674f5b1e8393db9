"""Closed-form limits: Effective Medium Approximation, Marchenko-Pastur,
measure-ratio factors and the moment series for unequal vector radii.

Resolvent convention: g(z) = mean of 1/(z - lambda), so Im g <= 0 on the
upper half-plane and the density is -Im g(x + i eps) / pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np
from scipy import integrate
from scipy.special import gammaln


class BranchError(ArithmeticError):
    """Two admissible roots of the resolvent cubic could not be told apart."""


# --------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class EmaParams:
    t: float

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError(f"EMA parameter t must be positive, got {self.t}")

    @property
    def atom_mass(self) -> float:
        """Point mass at zero, 1 - t for t < 1."""
        return max(0.0, 1.0 - self.t)

    @property
    def support(self) -> list[tuple[float, float]]:
        return ema_support(self.t)


@dataclass(frozen=True)
class MpParams:
    t: float

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError(f"Marchenko-Pastur parameter t must be positive, got {self.t}")

    @property
    def a(self) -> float:
        return (math.sqrt(self.t) - math.sqrt(2.0)) ** 2

    @property
    def b(self) -> float:
        return (math.sqrt(self.t) + math.sqrt(2.0)) ** 2

    @property
    def atom_mass(self) -> float:
        return max(0.0, 1.0 - self.t / 2.0)


def _t(p) -> float:
    return float(p.t) if hasattr(p, "t") else float(p)


# --------------------------------------------------------------------------
# EMA resolvent


def _cubic_roots(b, c, e):
    """All roots of g^3 + b g^2 + c g + e (vectorised Cardano, Newton-polished)."""
    b, c, e = np.broadcast_arrays(*(np.asarray(v, dtype=complex) for v in (b, c, e)))
    p = c - b * b / 3.0
    q = 2.0 * b**3 / 27.0 - b * c / 3.0 + e
    disc = np.sqrt(q * q / 4.0 + p**3 / 27.0)
    u1, u2 = -q / 2.0 + disc, -q / 2.0 - disc
    u = np.where(np.abs(u1) >= np.abs(u2), u1, u2)
    C = u ** (1.0 / 3.0)
    omega = np.exp(2j * np.pi / 3.0)
    roots = []
    for k in range(3):
        Ck = C * omega**k
        with np.errstate(divide="ignore", invalid="ignore"):
            y = np.where(Ck == 0, 0.0, Ck - p / (3.0 * Ck))
        roots.append(y - b / 3.0)
    g = np.stack(roots, axis=-1)
    bb, cc, ee = b[..., None], c[..., None], e[..., None]
    for _ in range(2):
        f = ((g + bb) * g + cc) * g + ee
        df = (3.0 * g + 2.0 * bb) * g + cc
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(df != 0, f / df, 0.0)
        g = g - step
    return g


def _ema_roots(z, t):
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 1.0
    out = np.empty(z.shape + (3,), dtype=complex)
    zb = z[~small]
    out[~small] = _cubic_roots((t - 1.0) / zb, -np.ones_like(zb), 1.0 / zb)
    if np.any(small):
        # near z = 0 one root diverges; solve for h = 1/g instead:
        # h^3 - z h^2 + (t-1) h + z = 0
        zs = z[small]
        with np.errstate(divide="ignore", invalid="ignore"):
            out[small] = 1.0 / _cubic_roots(-zs, np.full_like(zs, t - 1.0), zs)
    return out


def ema_residual(g, z, t):
    g = np.asarray(g, dtype=complex)
    z = np.asarray(z, dtype=complex)
    return g**3 + (t - 1.0) / z * g**2 - g + 1.0 / z


def ema_resolvent(z, p, *, ratio: float = 0.6):
    """Stieltjes transform of the EMA law at points z with Im z > 0.

    The physical root of g^3 + ((t-1)/z) g^2 - g + 1/z = 0 is followed by
    continuity along a vertical path from far above the real axis, where it
    is the root closest to 1/z, down to Im z.
    """
    t = _t(p)
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    if np.any(z.imag <= 0):
        raise ValueError("ema_resolvent needs Im z > 0")
    x, y = z.real, z.imag
    top = np.maximum(y, 10.0 * (1.0 + np.abs(x) + t))
    n_steps = int(np.ceil(np.log(top.max() / y.min()) / -np.log(ratio))) + 1
    zz = x + 1j * top
    roots = _ema_roots(zz, t)
    idx = np.argmin(np.abs(roots - 1.0 / zz[:, None]), axis=1)
    g = roots[np.arange(len(z)), idx]
    for _ in range(n_steps):
        height = np.maximum(zz.imag * ratio, y)
        zz = x + 1j * height
        roots = _ema_roots(zz, t)
        idx = np.argmin(np.abs(roots - g[:, None]), axis=1)
        g = roots[np.arange(len(z)), idx]
        if np.all(height == y):
            break
    # the tracked root must stay in the closed lower half-plane
    scale = np.maximum(1.0, np.abs(g))
    bad = g.imag > 1e-9 * scale
    if np.any(bad):
        admissible = np.where(roots.imag <= 1e-9 * np.maximum(1.0, np.abs(roots)), roots, np.nan)
        dist = np.abs(admissible - g[:, None])
        dist = np.where(np.isnan(dist), np.inf, dist)
        fix = np.argmin(dist, axis=1)
        g = np.where(bad, roots[np.arange(len(z)), fix], g)
    # ambiguity: another admissible root indistinguishable from the chosen one
    others = np.abs(roots - g[:, None])
    others[others == 0] = np.inf
    admissible = roots.imag <= 1e-9 * np.maximum(1.0, np.abs(roots))
    close = np.any((others < 1e-10) & admissible & (np.abs(roots - g[:, None]) > 0), axis=1)
    if np.any(close):
        where = z[close][:3]
        raise BranchError(f"two admissible resolvent roots within 1e-10 at z = {where.tolist()}")
    return g[0] if scalar else g


def ema_support(t: float) -> list[tuple[float, float]]:
    """Intervals carrying the continuous part of the EMA law.

    Edges are the zeros of the cubic's discriminant, a quadratic in x^2:
    4 y^2 + ((t-1)^2 - 18(t-1) - 27) y - 4 (t-1)^3 = 0.
    """
    s = t - 1.0
    B = s * s - 18.0 * s - 27.0
    C = -4.0 * s**3
    disc = math.sqrt(B * B - 16.0 * C)
    y_hi = (-B + disc) / 8.0
    y_lo = (-B - disc) / 8.0
    hi = math.sqrt(y_hi)
    if t < 1.0 and y_lo > 0:
        lo = math.sqrt(y_lo)
        return [(-hi, -lo), (lo, hi)]
    return [(-hi, hi)]


def ema_density(x, p, epsilon: float = 1e-8):
    """-Im g(x + i epsilon) / pi, clipped at zero."""
    if not 1e-12 <= epsilon <= 1e-3:
        raise ValueError("epsilon must lie in [1e-12, 1e-3]")
    x = np.asarray(x, dtype=float)
    g = ema_resolvent(x + 1j * epsilon, p)
    return np.maximum(-np.imag(g) / np.pi, 0.0)


def ema_atom_mass(p) -> float:
    return max(0.0, 1.0 - _t(p))


# --------------------------------------------------------------------------
# exact moment series


def _pmul(a, b):
    """Product of integer polynomials stored as coefficient lists."""
    if not a or not b:
        return []
    return list(np.convolve(np.array(a, dtype=object), np.array(b, dtype=object)))


def _padd(a, b):
    if len(a) < len(b):
        a, b = b, a
    out = list(a)
    for i, v in enumerate(b):
        out[i] += v
    return out


@dataclass(frozen=True)
class MomentSeries:
    """Even moments mu_0, mu_2, ..., mu_{2k} as integer polynomials in t."""

    coefficients: tuple[tuple[int, ...], ...]

    def __len__(self):
        return len(self.coefficients)

    def __getitem__(self, k) -> tuple[int, ...]:
        """Polynomial of mu_{2k}; index i of the tuple is the power of t."""
        return self.coefficients[k]

    def evaluate(self, t: float) -> np.ndarray:
        return np.array([sum(c * t**i for i, c in enumerate(poly)) for poly in self.coefficients], dtype=float)

    def as_json_maps(self) -> list[dict[str, int]]:
        return [{str(i): int(c) for i, c in enumerate(poly) if c} for poly in self.coefficients]


def ema_moments(k_max: int) -> MomentSeries:
    """EMA moments from the fixed point f = 1 + a(x f), a(x) = t x^2 / (1 - x^2).

    Writing u = x^2 f^2 and w = u / (1 - u) = u + u w, the fixed point is
    solved one order in x^2 at a time: f_k = t w_k.
    """
    if not 0 <= k_max <= 64:
        raise ValueError("k_max must lie in [0, 64]")
    f = [[1]]
    f2: list[list[int]] = []  # coefficients of f^2
    w: list[list[int]] = [[]]
    u: list[list[int]] = [[]]
    for k in range(1, k_max + 1):
        # f^2 up to order k-1 is complete once f_{k-1} is known
        sq: list[int] = []
        for i in range(k):
            sq = _padd(sq, _pmul(f[i], f[k - 1 - i]))
        f2.append(sq)
        u.append(f2[k - 1])
        wk = list(u[k])
        for i in range(1, k):
            wk = _padd(wk, _pmul(u[i], w[k - i]))
        w.append(wk)
        f.append([0] + wk)
    return MomentSeries(tuple(tuple(int(c) for c in poly) + (0,) * (k + 1 - len(poly)) for k, poly in enumerate(f)))


def general_radii_moments(Z, d, radii, k_max: int) -> list:
    """Even moments when the r vectors of a block carry radii R_a.

    Fixed point f = 1 + (Z/d) sum_a u R_a^4 / (1 - u R_a^4), u = x^2 f^2.
    Arithmetic follows the input types, so integer or Fraction inputs give
    exact results.
    """
    if not 0 <= k_max <= 64:
        raise ValueError("k_max must lie in [0, 64]")
    radii = list(radii)
    if not radii or any(r <= 0 for r in radii):
        raise ValueError("radii must be positive")
    ratio = Fraction(Z) / Fraction(d) if all(isinstance(v, (int, Fraction)) for v in (Z, d)) else Z / d
    weights = [R**4 for R in radii]
    zero = 0 * ratio
    f = [1 + zero]
    u = [zero]
    w = [[zero] for _ in radii]  # per-radius series of v/(1-v), v = R^4 u
    for k in range(1, k_max + 1):
        u.append(sum((f[i] * f[k - 1 - i] for i in range(k)), zero))
        total = zero
        for a, q in enumerate(weights):
            v = [q * ui for ui in u]
            wk = v[k] + sum((v[i] * w[a][k - i] for i in range(1, k)), zero)
            w[a].append(wk)
            total += wk
        f.append(ratio * total)
    return f


# --------------------------------------------------------------------------
# Marchenko-Pastur


def mp_density(x, p):
    """Continuous part sqrt((b-x)(x-a)) / (4 pi x) on [a, b]."""
    mp = p if isinstance(p, MpParams) else MpParams(float(p))
    x = np.asarray(x, dtype=float)
    inside = (x >= mp.a) & (x <= mp.b) & (x > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.sqrt(np.clip((mp.b - x) * (x - mp.a), 0.0, None)) / (4.0 * np.pi * x)
    return np.where(inside, val, 0.0)


def mp_atom_mass(p) -> float:
    return max(0.0, 1.0 - _t(p) / 2.0)


def _mp_raw_moment(mp: MpParams, k: int) -> float:
    """Integral of x^k times the continuous density, by Gauss-Jacobi weighted quadrature."""
    a, b = mp.a, mp.b
    if k >= 1:
        val, _ = integrate.quad(
            lambda x: x ** (k - 1) / (4.0 * np.pi), a, b, weight="alg", wvar=(0.5, 0.5), epsabs=1e-13, epsrel=1e-12
        )
        return val
    if a <= 1e-300:
        val, _ = integrate.quad(lambda x: 1.0 / (4.0 * np.pi), a, b, weight="alg", wvar=(-0.5, 0.5), epsabs=1e-13)
        return val
    val, _ = integrate.quad(
        lambda x: 1.0 / (4.0 * np.pi * x), a, b, weight="alg", wvar=(0.5, 0.5), epsabs=1e-13, epsrel=1e-12, limit=200
    )
    return val


def mp_continuous_mass(p) -> float:
    mp = p if isinstance(p, MpParams) else MpParams(float(p))
    return _mp_raw_moment(mp, 0)


def mp_moments(p, k_max: int) -> np.ndarray:
    """mu_0..mu_{k_max} of the full law; the zero atom only enters mu_0."""
    if not 0 <= k_max <= 32:
        raise ValueError("k_max must lie in [0, 32]")
    mp = p if isinstance(p, MpParams) else MpParams(float(p))
    out = np.empty(k_max + 1)
    out[0] = 1.0
    for k in range(1, k_max + 1):
        out[k] = _mp_raw_moment(mp, k)
    return out


# --------------------------------------------------------------------------
# measure comparison factors


class RatioCase(str, Enum):
    VECTOR_BALL = "VectorBall"
    VECTOR_SPHERE = "VectorSphere"
    MATRIX_BOUNDED = "MatrixBounded"
    MATRIX_FIXED = "MatrixFixed"


def measure_ratio_factor(case, d: int, ranks) -> float:
    """Ratio of <tr word> under a radial measure to the Gaussian measure.

    ``ranks`` holds the total power r_k of each distinct block in the word.
    Vector cases compare the sphere/ball against i.i.d. Gaussian components
    of variance R^2/d; matrix cases compare fixed/bounded (1/d) tr X^2
    against the density exp(-(d/4R^2) tr X^2).
    """
    case = RatioCase(case)
    ranks = list(ranks)
    if d < 1:
        raise ValueError("d must be positive")
    if not ranks or any(r < 1 for r in ranks):
        raise ValueError("ranks must be a nonempty list of positive integers")
    log_f = 0.0
    for r in ranks:
        if case is RatioCase.VECTOR_SPHERE:
            log_f += r * math.log(d) + gammaln(d / 2) - r * math.log(2) - gammaln(d / 2 + r)
        elif case is RatioCase.VECTOR_BALL:
            log_f += r * math.log(d) + gammaln(d / 2 + 1) - r * math.log(2) - gammaln(d / 2 + r + 1)
        else:
            D = d * (d + 1) / 4.0
            if case is RatioCase.MATRIX_BOUNDED:
                D += 1.0
            log_f += r * math.log(d) + gammaln(D) - (r / 2) * math.log(4) - gammaln(D + r / 2)
    return math.exp(log_f)


"""Eigenvalues, empirical moments, histograms and KS distances to limit laws."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import theory_kernel as tk
from .matrix_assembly import BlockSparseMatrix

DENSE_LIMIT = 5000


class ResourceError(RuntimeError):
    pass


class InvalidCdfError(ValueError):
    pass


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    n_vertices: int
    block_dim: int

    def __len__(self):
        return len(self.eigenvalues)


@dataclass(frozen=True)
class EmpiricalMoments:
    moments: np.ndarray
    stderr: np.ndarray | None = None


def eigenvalues(a: BlockSparseMatrix, limit: int = DENSE_LIMIT) -> Spectrum:
    n = a.n_vertices * a.block_dim
    if n > limit:
        raise ResourceError(f"dense eigensolve of size {n} exceeds the limit {limit}")
    vals = np.linalg.eigvalsh(a.to_dense())
    return Spectrum(np.sort(vals), a.n_vertices, a.block_dim)


def empirical_moments(s: Spectrum, p_max: int) -> EmpiricalMoments:
    if p_max < 0:
        raise ValueError("p_max must be nonnegative")
    lam = np.asarray(s.eigenvalues, dtype=float)
    powers = np.ones_like(lam)
    out = np.empty(p_max + 1)
    out[0] = 1.0
    for p in range(1, p_max + 1):
        powers = powers * lam
        out[p] = powers.mean()
    return EmpiricalMoments(out)


def average_moments(spectra, p_max: int) -> EmpiricalMoments:
    """Mean moments over realizations with the standard error across them."""
    table = np.array([empirical_moments(s, p_max).moments for s in spectra])
    if len(table) < 2:
        return EmpiricalMoments(table.mean(axis=0), None)
    return EmpiricalMoments(table.mean(axis=0), table.std(axis=0, ddof=1) / math.sqrt(len(table)))


def esd_histogram(s: Spectrum, n_bins: int, value_range: tuple[float, float]):
    """Bin centres and densities normalised by the full eigenvalue count."""
    if n_bins < 1:
        raise ValueError("n_bins must be at least 1")
    lo, hi = value_range
    lam = np.asarray(s.eigenvalues if isinstance(s, Spectrum) else s, dtype=float)
    counts, edges = np.histogram(lam, bins=n_bins, range=(lo, hi))
    width = (hi - lo) / n_bins
    density = counts / (len(lam) * width)
    centers = (edges[:-1] + edges[1:]) / 2
    return list(zip(centers.tolist(), density.tolist()))


# --------------------------------------------------------------------------
# theoretical CDFs


@dataclass(frozen=True)
class TheoreticalCDF:
    """Tabulated continuous CDF plus point masses.

    ``x`` / ``values`` tabulate the continuous part (nondecreasing, from 0 to
    its total mass); ``atoms`` maps locations to masses.
    """

    x: np.ndarray
    values: np.ndarray
    atoms: dict[float, float] = field(default_factory=dict)

    def _continuous(self, q):
        return np.interp(q, self.x, self.values, left=0.0, right=self.values[-1])

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        out = self._continuous(q)
        for loc, mass in self.atoms.items():
            out = out + mass * (q >= loc)
        return np.clip(out, 0.0, 1.0)

    def left(self, q):
        q = np.asarray(q, dtype=float)
        out = self._continuous(q)
        for loc, mass in self.atoms.items():
            out = out + mass * (q > loc)
        return np.clip(out, 0.0, 1.0)

    def ppf(self, u):
        """Quantile function, used to draw samples from the law."""
        grid = np.union1d(self.x, list(self.atoms))
        levels = np.column_stack([self.left(grid), self(grid)]).ravel()
        return np.interp(np.asarray(u, dtype=float), levels, np.repeat(grid, 2))


def _cumulative_on_interval(density, a, b, tol=1e-8, power=1, n0=1024, n_max=2**18):
    """Cumulative integral of a density on [a, b], refined until stable.

    Uses x = a + (b - a) sin(phi)^(2 power), which removes square-root edge
    behaviour (and, for larger powers, integrable blow-ups at ``a``), with
    trapezoid sums on a doubling phi grid.
    """

    def mapped(phi):
        s = np.sin(phi)
        x = a + (b - a) * s ** (2 * power)
        jac = (b - a) * 2 * power * s ** (2 * power - 1) * np.cos(phi)
        return x, jac

    n = n0
    phi = np.linspace(0.0, np.pi / 2, n + 1)
    x, jac = mapped(phi)
    f = density(x) * jac
    prev = None
    while True:
        cum = np.concatenate([[0.0], np.cumsum((f[1:] + f[:-1]) / 2 * np.diff(phi))])
        if prev is not None and (np.max(np.abs(cum[::2] - prev)) < tol or n >= n_max):
            return x, cum
        prev = cum
        # only the new midpoints need the density
        mid = (phi[:-1] + phi[1:]) / 2
        xm, jm = mapped(mid)
        fm = density(xm) * jm
        phi = np.insert(phi, np.arange(1, n + 1), mid)
        x = np.insert(x, np.arange(1, n + 1), xm)
        f = np.insert(f, np.arange(1, n + 1), fm)
        n *= 2


def _tabulate(density, intervals, atoms, tol):
    xs, vals = [], []
    base = 0.0
    for a, b in intervals:
        x, cum = _cumulative_on_interval(density, a, b, tol)
        xs.append(x)
        vals.append(base + cum)
        base += cum[-1]
    x = np.concatenate(xs)
    v = np.maximum.accumulate(np.concatenate(vals))
    x, keep = np.unique(x, return_index=True)
    return TheoreticalCDF(x, v[keep], atoms)


def ema_cdf(t: float, tol: float = 1e-8, epsilon: float = 1e-8) -> TheoreticalCDF:
    atoms = {0.0: tk.ema_atom_mass(t)} if t < 1 else {}
    density = lambda x: tk.ema_density(x, t, epsilon)  # noqa: E731
    if t == 1:
        # the density diverges like |x|^(-1/3) at the origin: integrate
        # outward from 0 on each side with a stronger endpoint map
        (lo, hi), = tk.ema_support(t)
        xr, cr = _cumulative_on_interval(density, 0.0, hi, tol, power=3)
        half = cr[-1]
        x = np.concatenate([-xr[::-1], xr[1:]])
        v = np.concatenate([half - cr[::-1], half + cr[1:]])
        return TheoreticalCDF(x, v, atoms)
    return _tabulate(density, tk.ema_support(t), atoms, tol)


def mp_cdf(t: float, tol: float = 1e-8) -> TheoreticalCDF:
    mp = tk.MpParams(t)
    atoms = {0.0: mp.atom_mass} if mp.atom_mass > 0 else {}
    return _tabulate(lambda x: tk.mp_density(x, mp), [(mp.a, mp.b)], atoms, tol)


def ks_distance(s, cdf, atom_tol: float = 1e-8) -> float:
    """Two-sided Kolmogorov-Smirnov distance between the ESD and a CDF.

    Eigenvalues within ``atom_tol`` of a point mass of the CDF are snapped
    onto it, so numerically-zero modes count toward an atom at zero.
    """
    lam = np.sort(np.asarray(s.eigenvalues if isinstance(s, Spectrum) else s, dtype=float))
    n = len(lam)
    for loc in getattr(cdf, "atoms", {}):
        lam = np.where(np.abs(lam - loc) <= atom_tol, loc, lam)
    right = np.asarray(cdf(lam), dtype=float)
    left = np.asarray(cdf.left(lam), dtype=float) if hasattr(cdf, "left") else right
    if np.any(np.diff(right) < -1e-12) or np.any(left > right + 1e-12):
        raise InvalidCdfError("CDF is not monotone on the sample points")
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - right)
    d_minus = np.max(left - (i - 1) / n)
    return float(max(d_plus, d_minus, 0.0))


# --------------------------------------------------------------------------
# CSV helpers


def spectrum_csv(eigs) -> str:
    return "".join(f"{float(v)!r}\n" for v in eigs)


def moments_csv(m: EmpiricalMoments) -> str:
    lines = ["p,mu,stderr"]
    err = m.stderr if m.stderr is not None else np.full(len(m.moments), np.nan)
    for p, (mu, se) in enumerate(zip(m.moments, err)):
        lines.append(f"{p},{float(mu)!r},{float(se)!r}")
    return "\n".join(lines) + "\n"


def histogram_csv(rows) -> str:
    return "x,density\n" + "".join(f"{x!r},{y!r}\n" for x, y in rows)

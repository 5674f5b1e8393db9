"""Command-line experiments.

Every command reads a flat ``key = value`` config file (optional) and flags
that override it, runs its realizations on independent seed streams and
writes ``<out>.<command>.<csv|json>`` plus ``<out>.manifest.json``.

Exit codes: 0 success, 2 config error, 3 resource error, 4 a ``--check``
threshold failed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from . import spectral_lab as sl
from . import theory_kernel as tk
from .block_sampler import BlockMeasure, MeasureFamily, word_expectation_mc
from .graph_model import GraphFamily, GraphSpec, sample_edges
from .matrix_assembly import MatrixKind, assemble
from .walk_enumerator import enumerate_tree_walks, finite_rank_limit
from .words import Word

COMMANDS = ("sample-spectrum", "moments", "theory", "universality", "words", "convergence")

EXIT_OK, EXIT_CONFIG, EXIT_RESOURCE, EXIT_CHECK = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


def seed_stream(master_seed: int, realization_index: int) -> np.random.Generator:
    """Independent, reproducible generator for one realization."""
    if realization_index < 0:
        raise ValueError("realization index must be nonnegative")
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(realization_index),))
    return np.random.default_rng(ss)


@dataclass
class ExperimentConfig:
    command: str = "sample-spectrum"
    graph_family: str = "ErdosRenyi"
    n_vertices: int = 400
    mean_degree: float = 16.0
    measure: str = "RankOneSphere"
    block_dim: int = 8
    rank: int | None = None
    radius: float = 1.0
    radii: list[float] | None = None
    ensemble_kind: str = "Adjacency"
    realizations: int = 1
    p_max: int = 4
    d_list: list[int] = field(default_factory=lambda: [2, 4, 8])
    t: float | None = None
    n_samples: int = 100_000
    bins: int = 100
    seed: int = 0
    output: str = "run"
    format: str = "csv"
    jobs: int = 1
    ks_threshold: float = 0.05

    def __post_init__(self):
        try:
            self.validate()
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"field 'command': expected one of {COMMANDS}, got {self.command!r}")
        if self.realizations < 1:
            raise ConfigError("field 'realizations': must be at least 1")
        if self.format not in ("csv", "json"):
            raise ConfigError("field 'format': expected csv or json")
        if self.p_max < 0:
            raise ConfigError("field 'p_max': must be nonnegative")
        if self.jobs < 1:
            raise ConfigError("field 'jobs': must be at least 1")
        if self.t is not None and not self.t > 0:
            raise ConfigError("field 't': must be positive")
        for name, build in (("graph", self.graph_spec), ("measure", self.block_measure)):
            try:
                build()
            except ValueError as exc:
                raise ConfigError(f"field '{name}': {exc}") from exc
        try:
            MatrixKind(self.ensemble_kind)
        except ValueError as exc:
            raise ConfigError(f"field 'ensemble_kind': {exc}") from exc

    def graph_spec(self, mean_degree=None) -> GraphSpec:
        Z = self.mean_degree if mean_degree is None else mean_degree
        return GraphSpec(int(self.n_vertices), Z, GraphFamily(self.graph_family))

    def block_measure(self, d=None) -> BlockMeasure:
        radii = tuple(self.radii) if self.radii else None
        return BlockMeasure(int(d or self.block_dim), MeasureFamily(self.measure), self.rank, self.radius, radii)

    @property
    def kind(self) -> MatrixKind:
        return MatrixKind(self.ensemble_kind)

    def echo(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.echo(), sort_keys=True).encode()).hexdigest()


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _coerce(name: str, raw):
    kind = str(_FIELD_TYPES[name])
    if raw is None or (isinstance(raw, str) and raw.strip().lower() in ("", "none")):
        return None
    try:
        if kind.startswith("list[int]"):
            return [int(v) for v in _split(raw)]
        if kind.startswith("list[float]"):
            return [float(v) for v in _split(raw)]
        if kind.startswith("int"):
            value = float(raw)
            if value != int(value):
                raise ValueError(f"{raw!r} is not an integer")
            return int(value)
        if kind.startswith("float"):
            return float(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field '{name}': {exc}") from exc
    return str(raw)


def _split(raw):
    if isinstance(raw, (list, tuple)):
        return raw
    return [v for v in str(raw).replace(",", " ").split() if v]


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = value.strip()
    return out


def make_config(values: dict) -> ExperimentConfig:
    kwargs = {}
    for key, raw in values.items():
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown field {key!r}")
        kwargs[key] = _coerce(key, raw)
    return ExperimentConfig(**kwargs)


# --------------------------------------------------------------------------
# sampling


def _realization(cfg: ExperimentConfig, index: int, d=None, Z=None):
    rng = seed_stream(cfg.seed, index)
    edges = sample_edges(cfg.graph_spec(Z), rng)
    mat = assemble(edges, cfg.block_measure(d), cfg.kind, rng)
    return sl.eigenvalues(mat)


def _spectra(cfg: ExperimentConfig, d=None, Z=None, offset=0):
    indices = range(offset, offset + cfg.realizations)
    if cfg.jobs == 1:
        return [_realization(cfg, i, d, Z) for i in indices]
    with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
        return list(pool.map(lambda i: _realization(cfg, i, d, Z), indices))


def _effective_t(cfg: ExperimentConfig, d=None, Z=None) -> float:
    """t = r Z / d of the sampled ensemble."""
    m = cfg.block_measure(d)
    return m.rank * (cfg.mean_degree if Z is None else Z) / m.d


def _theory_cdf(cfg: ExperimentConfig, t: float):
    if MeasureFamily(cfg.measure).is_full:
        return None
    return sl.ema_cdf(t) if cfg.kind is MatrixKind.ADJACENCY else sl.mp_cdf(t)


def _theory_moments(cfg: ExperimentConfig, t: float, p_max: int) -> np.ndarray | None:
    if MeasureFamily(cfg.measure).is_full:
        return None
    if cfg.kind is MatrixKind.LAPLACIAN:
        return tk.mp_moments(t, p_max)
    even = tk.ema_moments(p_max // 2).evaluate(t)
    out = np.zeros(p_max + 1)
    out[::2] = even[: len(out[::2])]
    return out


def _stats(values):
    values = np.asarray(values, dtype=float)
    se = values.std(ddof=1) / math.sqrt(len(values)) if len(values) > 1 else float("nan")
    return float(values.mean()), float(se)


# --------------------------------------------------------------------------
# commands; each returns (report, csv_text, passed)


def cmd_sample_spectrum(cfg: ExperimentConfig):
    spectra = _spectra(cfg)
    t = _effective_t(cfg)
    cdf = _theory_cdf(cfg, t)
    pooled = np.concatenate([s.eigenvalues for s in spectra])
    lo, hi = float(pooled.min()), float(pooled.max())
    if hi <= lo:
        lo, hi = lo - 1.0, hi + 1.0
    hist = sl.esd_histogram(pooled, cfg.bins, (lo, hi))
    per = []
    for i, s in enumerate(spectra):
        row = {"realization": i, "size": len(s), "mu2": float(np.mean(s.eigenvalues**2))}
        if cdf is not None:
            row["ks"] = sl.ks_distance(s, cdf)
        per.append(row)
    report = {"theory": None, "realizations": per, "histogram": [list(r) for r in hist]}
    passed = True
    if cdf is not None:
        ks_mean, ks_se = _stats([r["ks"] for r in per])
        law = "EMA" if cfg.kind is MatrixKind.ADJACENCY else "MarchenkoPastur"
        report["theory"] = {"law": law, "t": t}
        report["ks_mean"], report["ks_stderr"] = ks_mean, ks_se
        passed = ks_mean <= cfg.ks_threshold
    csv = sl.spectrum_csv(pooled)
    return report, csv, passed


def cmd_moments(cfg: ExperimentConfig):
    spectra = _spectra(cfg)
    emp = sl.average_moments(spectra, cfg.p_max)
    t = _effective_t(cfg)
    theory = _theory_moments(cfg, t, cfg.p_max)
    rows = []
    passed = True
    for p in range(cfg.p_max + 1):
        se = float(emp.stderr[p]) if emp.stderr is not None else float("nan")
        row = {"p": p, "mu": float(emp.moments[p]), "stderr": se}
        if theory is not None:
            row["theory"] = float(theory[p])
            # odd moments carry O(1/N) cycle terms the limit laws drop
            checked = p > 0 and (p % 2 == 0 or cfg.kind is MatrixKind.LAPLACIAN)
            if checked and se == se and abs(row["mu"] - row["theory"]) > 4 * se:
                passed = False
        rows.append(row)
    report = {"t": t, "moments": rows}
    head = "p,mu,stderr" + (",theory" if theory is not None else "")
    lines = [head]
    for r in rows:
        vals = [r["p"], repr(r["mu"]), repr(r["stderr"])] + ([repr(r["theory"])] if theory is not None else [])
        lines.append(",".join(str(v) for v in vals))
    return report, "\n".join(lines) + "\n", passed


def cmd_theory(cfg: ExperimentConfig):
    t = cfg.t if cfg.t is not None else _effective_t(cfg)
    k_max = max(cfg.p_max, 1)
    if cfg.kind is MatrixKind.LAPLACIAN:
        mp = tk.MpParams(t)
        header = {"law": "MarchenkoPastur", "t": t, "a": mp.a, "b": mp.b, "atom_mass": mp.atom_mass}
        x = np.linspace(max(mp.a - 0.5, 0.0), mp.b + 0.5, cfg.bins + 1)
        dens = tk.mp_density(x, mp)
        mass = tk.mp_continuous_mass(mp) + mp.atom_mass
        moments = [float(v) for v in tk.mp_moments(mp, k_max)]
    else:
        support = tk.ema_support(t)
        edge = support[-1][1]
        header = {"law": "EMA", "t": t, "support": [list(s) for s in support], "atom_mass": tk.ema_atom_mass(t)}
        x = np.linspace(-edge - 0.5, edge + 0.5, cfg.bins + 1)
        dens = tk.ema_density(x, t, 1e-6)
        cdf = sl.ema_cdf(t)
        mass = float(cdf.values[-1]) + tk.ema_atom_mass(t)
        series = tk.ema_moments(k_max // 2)
        moments = {"even_moment_polynomials": series.as_json_maps(), "values": series.evaluate(t).tolist()}
    header["total_mass"] = mass
    report = {"header": header, "moments": moments, "density": [[float(a), float(b)] for a, b in zip(x, dens)]}
    csv = "x,density\n" + "".join(f"{float(a)!r},{float(b)!r}\n" for a, b in zip(x, dens))
    return report, csv, abs(mass - 1.0) < 1e-6


_UNIVERSALITY_CASES = (
    (tk.RatioCase.VECTOR_SPHERE, MeasureFamily.RANK_ONE_SPHERE, MeasureFamily.RANK_ONE_GAUSS),
    (tk.RatioCase.VECTOR_BALL, MeasureFamily.RANK_ONE_BALL, MeasureFamily.RANK_ONE_GAUSS),
    (tk.RatioCase.MATRIX_FIXED, MeasureFamily.FULL_FIXED_TRACE, MeasureFamily.FULL_GAUSS),
    (tk.RatioCase.MATRIX_BOUNDED, MeasureFamily.FULL_BOUNDED_TRACE, MeasureFamily.FULL_GAUSS),
)


def universality_table(d_list, powers, n_samples, seed, radius=1.0):
    """MC ratios <tr X^k>_measure / <tr X^k>_gauss against the exact factors."""
    ss = np.random.SeedSequence(seed)
    jobs = [(case, fam, ref, d, k) for case, fam, ref in _UNIVERSALITY_CASES for d in d_list for k in powers]
    rows = []
    for (case, fam, ref, d, k), child in zip(jobs, ss.spawn(len(jobs))):
        a_ss, b_ss = child.spawn(2)
        w = Word(((1, k),))
        a, sa = word_expectation_mc(BlockMeasure(d, fam, radius=radius), w, n_samples, np.random.default_rng(a_ss))
        b, sb = word_expectation_mc(BlockMeasure(d, ref, radius=radius), w, n_samples, np.random.default_rng(b_ss))
        ratio = a / b
        se = abs(ratio) * math.sqrt((sa / a) ** 2 + (sb / b) ** 2)
        factor = tk.measure_ratio_factor(case, d, [k])
        rows.append({
            "case": case.value, "d": d, "word": str(w), "ratio": ratio, "stderr": se,
            "factor": factor, "within_3se": abs(ratio - factor) < 3 * se,
        })
    return rows


def cmd_universality(cfg: ExperimentConfig):
    powers = [2 * k for k in range(1, max(cfg.p_max // 2, 1) + 1)]
    rows = universality_table(cfg.d_list, powers, cfg.n_samples, cfg.seed, cfg.radius)
    frac = sum(r["within_3se"] for r in rows) / len(rows)
    lines = ["case,d,word,ratio,stderr,factor"]
    lines += [f"{r['case']},{r['d']},{r['word']},{r['ratio']!r},{r['stderr']!r},{r['factor']!r}" for r in rows]
    return {"table": rows, "fraction_within_3se": frac}, "\n".join(lines) + "\n", frac >= 0.95


def cmd_words(cfg: ExperimentConfig):
    mp = enumerate_tree_walks(cfg.p_max)
    limit = finite_rank_limit(mp)
    ema = tk.ema_moments(cfg.p_max)[cfg.p_max]
    report = mp.to_dict()
    lines = ["z,word,mult"] + [f"{z},{w},{m}" for z, w, m in mp.sorted_terms()]
    return report, "\n".join(lines) + "\n", tuple(limit) == tuple(ema), {"finite_rank_limit": list(limit)}


def cmd_convergence(cfg: ExperimentConfig):
    if cfg.t is None:
        raise ConfigError("field 't': the convergence sweep needs a fixed t")
    rows = []
    for k, d in enumerate(cfg.d_list):
        m = cfg.block_measure(d)
        Z = cfg.t * d / m.rank
        if cfg.graph_family == GraphFamily.REGULAR.value:
            Z = int(round(Z))
        spectra = _spectra(cfg, d, Z, offset=k * cfg.realizations)
        cdf = _theory_cdf(cfg, cfg.t)
        theory = _theory_moments(cfg, cfg.t, 4)
        emp = sl.average_moments(spectra, 4)
        row = {"d": d, "Z": Z}
        if cdf is not None:
            row["ks_mean"], row["ks_stderr"] = _stats([sl.ks_distance(s, cdf) for s in spectra])
        if theory is not None:
            row["mu2_error"] = float(emp.moments[2] - theory[2])
            row["mu4_error"] = float(emp.moments[4] - theory[4])
        rows.append(row)
    passed = True
    if len(rows) > 1 and "ks_mean" in rows[0]:
        passed = rows[-1]["ks_mean"] <= rows[0]["ks_mean"]
    keys = list(rows[0])
    lines = [",".join(keys)] + [",".join(repr(r[k]) for k in keys) for r in rows]
    return {"t": cfg.t, "sweep": rows}, "\n".join(lines) + "\n", passed


HANDLERS = {
    "sample-spectrum": cmd_sample_spectrum,
    "moments": cmd_moments,
    "theory": cmd_theory,
    "universality": cmd_universality,
    "words": cmd_words,
    "convergence": cmd_convergence,
}


def run(cfg: ExperimentConfig):
    """Run one experiment; returns ``(report, csv_text, passed, extra)``."""
    out = HANDLERS[cfg.command](cfg)
    extra = out[3] if len(out) > 3 else {}
    return out[0], out[1], out[2], extra


def write_outputs(cfg: ExperimentConfig, report, csv_text, extra, elapsed) -> list[Path]:
    prefix = Path(cfg.output)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    main = Path(f"{prefix}.{cfg.command}.{cfg.format}")
    if cfg.format == "json":
        main.write_text(json.dumps(report, indent=2, default=_jsonable) + "\n")
    else:
        main.write_text(csv_text)
    written = [main]
    if cfg.command == "sample-spectrum" and cfg.format == "csv":
        hist = Path(f"{prefix}.{cfg.command}.hist.csv")
        hist.write_text(sl.histogram_csv(report["histogram"]))
        written.append(hist)
    summary = {k: v for k, v in report.items() if k not in ("histogram", "density", "terms")}
    manifest = {
        "config": cfg.echo(),
        "config_sha256": cfg.digest(),
        "seed": cfg.seed,
        "version": __version__,
        "outputs": [str(p) for p in written],
        "wall_clock_seconds": elapsed,
        "summary": summary,
        **extra,
    }
    Path(f"{prefix}.manifest.json").write_text(json.dumps(manifest, indent=2, default=_jsonable) + "\n")
    return written


def _jsonable(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serialisable: {type(obj)}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparseblock", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path)
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int)
        p.add_argument("--out", dest="output")
        p.add_argument("--format", choices=["csv", "json"])
        p.add_argument("--check", action="store_true", help="exit 4 when the command's acceptance check fails")
        p.add_argument("--graph", dest="graph_family", choices=[f.value for f in GraphFamily])
        p.add_argument("--n", dest="n_vertices")
        p.add_argument("--z", dest="mean_degree")
        p.add_argument("--measure", choices=[f.value for f in MeasureFamily])
        p.add_argument("--d", dest="block_dim")
        p.add_argument("--rank")
        p.add_argument("--radius")
        p.add_argument("--radii")
        p.add_argument("--kind", dest="ensemble_kind", choices=[k.value for k in MatrixKind])
        p.add_argument("--realizations")
        p.add_argument("--p-max", dest="p_max")
        p.add_argument("--d-list", dest="d_list")
        p.add_argument("--t")
        p.add_argument("--samples", dest="n_samples")
        p.add_argument("--bins")
        p.add_argument("--ks-threshold", dest="ks_threshold")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        values = parse_config_text(args.config.read_text()) if args.config else {}
        for key in _FIELD_TYPES:
            val = getattr(args, key, None)
            if val is not None and key != "command":
                values[key] = val
        values["command"] = args.command
        cfg = make_config(values)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    start = time.perf_counter()
    try:
        report, csv_text, passed, extra = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (sl.ResourceError, MemoryError) as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    written = write_outputs(cfg, report, csv_text, extra, time.perf_counter() - start)
    for path in written:
        print(path)
    if args.check and not passed:
        print("check failed", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

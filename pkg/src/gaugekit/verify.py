"""Deterministic sampling, residual aggregation and finite-difference checks.

Points come from a counter-based generator: coordinate j of point i is a pure
function of (seed, i, j), namely the SplitMix64 finalizer applied to the
counter. Work is split into fixed-size chunks, so the result does not depend
on how many threads process them. Point 0 is always the centre of the box,
which puts the most common singular loci (x = 0) on the sample grid.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .exprkit.evaluate import evaluate_many
from .exprkit.nodes import Expr

CHUNK = 64
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


class SingularBoxError(ValueError):
    pass


@dataclass(frozen=True)
class SampleSpec:
    box: tuple[tuple[str, float, float], ...]
    count: int = 200
    seed: int = 42
    tol: float = 1e-9
    exclusions: tuple[Expr, ...] = ()
    guard: float = 1e-6

    def __post_init__(self):
        box = tuple((str(n), float(lo), float(hi)) for n, lo, hi in self.box)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "exclusions", tuple(self.exclusions))
        if not box:
            raise ValueError("sample box needs at least one coordinate")
        for name, lo, hi in box:
            if not lo < hi:
                raise ValueError(f"empty interval for {name}: [{lo}, {hi}]")
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if not self.tol > 0:
            raise ValueError("tol must be positive")

    @property
    def coords(self) -> tuple[str, ...]:
        return tuple(n for n, _, _ in self.box)

    @classmethod
    def cube(cls, coords: Sequence[str], lo: float = -1.0, hi: float = 1.0, **kw) -> "SampleSpec":
        return cls(box=tuple((c, lo, hi) for c in coords), **kw)

    def replace(self, **kw) -> "SampleSpec":
        return replace(self, **kw)

    def excluding(self, *exprs: Expr) -> "SampleSpec":
        return replace(self, exclusions=self.exclusions + tuple(exprs))

    def to_dict(self) -> dict:
        return {
            "box": {n: [lo, hi] for n, lo, hi in self.box},
            "count": self.count,
            "seed": int(self.seed),
            "tol": self.tol,
            "guard": self.guard,
            "exclusions": [str(e) for e in self.exclusions],
        }


@dataclass(frozen=True)
class Samples:
    coords: tuple[str, ...]
    points: np.ndarray
    skipped: int = 0

    def __len__(self) -> int:
        return self.points.shape[0]

    def point(self, i: int) -> dict[str, float]:
        return {c: float(v) for c, v in zip(self.coords, self.points[i])}


def _splitmix(counter: np.ndarray, seed: int) -> np.ndarray:
    z = np.uint64(seed) + (counter + np.uint64(1)) * _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def uniform01(seed: int, start: int, stop: int, dim: int) -> np.ndarray:
    """Uniforms in [0, 1) for points start..stop-1, shape (stop-start, dim)."""
    idx = np.arange(start, stop, dtype=np.uint64)[:, None] * np.uint64(dim)
    counter = idx + np.arange(dim, dtype=np.uint64)[None, :]
    with np.errstate(over="ignore"):
        z = _splitmix(counter, seed)
    return (z >> np.uint64(11)).astype(np.float64) * (2.0**-53)


def _chunked(fn, n: int, workers: int) -> list:
    ranges = [(s, min(n, s + CHUNK)) for s in range(0, n, CHUNK)]
    if workers <= 1 or len(ranges) <= 1:
        return [fn(a, b) for a, b in ranges]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda r: fn(*r), ranges))


def raw_points(spec: SampleSpec, workers: int = 1) -> np.ndarray:
    lo = np.array([b[1] for b in spec.box])
    hi = np.array([b[2] for b in spec.box])
    dim = len(spec.box)

    def block(a: int, b: int) -> np.ndarray:
        u = uniform01(spec.seed, a, b, dim)
        pts = lo + (hi - lo) * u
        if a == 0:
            pts[0] = (lo + hi) / 2
        return pts

    return np.concatenate(_chunked(block, spec.count, workers), axis=0)


def sample_points(spec: SampleSpec, workers: int = 1) -> Samples:
    pts = raw_points(spec, workers)
    skipped = 0
    if spec.exclusions:
        vals = evaluate_many(list(spec.exclusions), spec.coords, pts)
        with np.errstate(invalid="ignore"):
            bad = np.any(~(np.abs(vals) >= spec.guard), axis=0)
        skipped = int(bad.sum())
        pts = pts[~bad]
        if len(pts) == 0:
            raise SingularBoxError("box entirely singular: every sample point is excluded")
    return Samples(spec.coords, pts, skipped)


@dataclass(frozen=True)
class Residual:
    name: str
    max_abs: float
    witness: Mapping[str, float] | None
    samples_used: int
    samples_skipped: int
    provenance: str = "sampled"
    detail: Mapping[str, object] = field(default_factory=dict)

    def ok(self, tol: float) -> bool:
        return self.max_abs <= tol

    def renamed(self, name: str) -> "Residual":
        return replace(self, name=name)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "max_abs": self.max_abs,
            "witness": dict(self.witness) if self.witness is not None else None,
            "samples_used": self.samples_used,
            "samples_skipped": self.samples_skipped,
            "provenance": self.provenance,
            **({"detail": dict(self.detail)} if self.detail else {}),
        }


def residual_from_values(name: str, values: np.ndarray, samples: Samples, **kw) -> Residual:
    """Residual of an array whose first axis runs over `samples`; NaN marks failures."""
    v = np.abs(np.asarray(values, dtype=float).reshape(len(samples), -1))
    failed = np.isnan(v)
    point_failed = failed.any(axis=1)
    usable = ~failed.all(axis=1) if v.shape[1] else np.ones(len(samples), bool)
    if v.shape[1] and not usable.any():
        raise SingularBoxError(f"box entirely singular for {name}: evaluation failed everywhere")
    if v.shape[1] == 0:
        return Residual(name, 0.0, None, len(samples), samples.skipped, **kw)
    per_point = np.where(failed, -np.inf, v).max(axis=1)
    i = int(np.argmax(per_point))
    return Residual(
        name,
        float(per_point[i]),
        samples.point(i),
        int(usable.sum()),
        samples.skipped + int(point_failed.sum()),
        **kw,
    )


def _sampled(spec_or_samples) -> Samples:
    if isinstance(spec_or_samples, Samples):
        return spec_or_samples
    return sample_points(spec_or_samples)


def max_residual(exprs: Sequence[Expr], spec: SampleSpec | Samples, name: str = "residual") -> Residual:
    """Max |e(p)| over the expressions and admissible sample points."""
    samples = _sampled(spec)
    exprs = list(exprs)
    if not exprs:
        return Residual(name, 0.0, None, len(samples), samples.skipped)
    vals = evaluate_many(exprs, samples.coords, samples.points)
    return residual_from_values(name, vals.T, samples)


def fd_check(e: Expr, coord: str, spec: SampleSpec | Samples, h: float = 1e-6) -> Residual:
    """Max relative deviation between diff(e, coord) and a central difference."""
    from .exprkit.normal import diff

    samples = _sampled(spec)
    j = samples.coords.index(coord)
    d = diff(e, coord)
    pts = samples.points
    up = pts.copy()
    dn = pts.copy()
    up[:, j] += h
    dn[:, j] -= h
    exact = evaluate_many([d], samples.coords, pts)[0]
    fp = evaluate_many([e], samples.coords, up)[0]
    fm = evaluate_many([e], samples.coords, dn)[0]
    approx = (fp - fm) / (2 * h)
    rel = np.abs(exact - approx) / np.maximum(1.0, np.abs(exact))
    return residual_from_values(f"fd[{coord}]", rel, samples)

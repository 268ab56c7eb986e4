from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .evaluate import evaluate_many
from .nodes import Expr, free_symbols
from .normal import is_normal_zero

ZERO_V, NONZERO_V, INCONCLUSIVE_V = "zero", "nonzero", "inconclusive"


@dataclass(frozen=True)
class ZeroVerdict:
    verdict: str
    witness: Mapping[str, float] | None = None
    value: float | None = None
    failed: int = 0
    symbolic: bool = False

    @property
    def zero(self) -> bool:
        return self.verdict == ZERO_V

    @property
    def nonzero(self) -> bool:
        return self.verdict == NONZERO_V

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "witness": dict(self.witness) if self.witness else None,
            "value": self.value,
            "failed": self.failed,
            "symbolic": self.symbolic,
        }


def default_spec(*exprs: Expr):
    from ..verify import SampleSpec

    names = sorted(set().union(*(free_symbols(e) for e in exprs))) or ["_"]
    return SampleSpec.cube(names, count=50, seed=0)


def is_zero(e: Expr, spec=None) -> ZeroVerdict:
    """Sampled zero test, with exact normalization as the fast path."""
    if is_normal_zero(e):
        return ZeroVerdict(ZERO_V, symbolic=True)
    from ..verify import raw_points

    spec = spec if spec is not None else default_spec(e)
    pts = raw_points(spec)
    vals = evaluate_many([e], spec.coords, pts)[0]
    failed = np.isnan(vals)
    nfail = int(failed.sum())
    if nfail * 2 > len(vals):
        return ZeroVerdict(INCONCLUSIVE_V, failed=nfail)
    mag = np.where(failed, -np.inf, np.abs(vals))
    i = int(np.argmax(mag))
    if mag[i] > spec.tol:
        witness = {c: float(v) for c, v in zip(spec.coords, pts[i])}
        return ZeroVerdict(NONZERO_V, witness, float(vals[i]), nfail)
    return ZeroVerdict(ZERO_V, failed=nfail)

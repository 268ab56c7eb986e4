"""Charts, sigma-model data and vector frames; JSON model files.

Model file layout::

    {"chart": {"dim": 3, "coords": ["x", "y", "z"]},
     "E": [["1", "0", "x"], ...],
     "C2": [[...]],                      optional, antisymmetric
     "H": {"123": "expr", ...},          optional, 1-based ascending indices
     "frames": {"dx_dz": [["1","0","0"], ["0","0","1"]]},   one list per vector field
     "structure_functions": {"dx_dz": {"1_12": "expr"}}}    optional, C^c_ab as "c_ab"

When C2 is absent the antisymmetric part of E plays its role; when H is absent
it is computed as dC2.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .cartan import FormField, StructFun, exterior_derivative
from .exprkit import FUNCS, ZERO, Expr, ParseError, ZeroVerdict, is_zero, parse
from .symlinalg import ExprMatrix, det
from .verify import Residual, SampleSpec, max_residual

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class ModelError(ValueError):
    """Schema violation or inconsistent model data."""


@dataclass(frozen=True)
class Chart:
    coords: tuple[str, ...]

    def __post_init__(self):
        coords = tuple(self.coords)
        object.__setattr__(self, "coords", coords)
        if not coords:
            raise ModelError("chart needs at least one coordinate")
        if len(set(coords)) != len(coords):
            raise ModelError("chart coordinates must be distinct")
        for c in coords:
            if not _IDENT.match(c) or c in FUNCS:
                raise ModelError(f"invalid coordinate name {c!r}")

    @property
    def dim(self) -> int:
        return len(self.coords)

    def cube(self, lo: float = -1.0, hi: float = 1.0, **kw) -> SampleSpec:
        return SampleSpec.cube(self.coords, lo, hi, **kw)


@dataclass(frozen=True)
class VectorFrame:
    name: str
    rho: ExprMatrix  # n x k, rho[mu, a]

    @property
    def k(self) -> int:
        return self.rho.cols

    @property
    def n(self) -> int:
        return self.rho.rows

    def vector(self, a: int) -> tuple[Expr, ...]:
        return self.rho.col(a)

    @classmethod
    def from_vectors(cls, name: str, vectors) -> "VectorFrame":
        vectors = [list(v) for v in vectors]
        if not vectors:
            raise ModelError(f"frame {name!r} has no vector fields")
        n = len(vectors[0])
        if any(len(v) != n for v in vectors):
            raise ModelError(f"frame {name!r} is ragged")
        return cls(name, ExprMatrix([[vectors[a][mu] for a in range(len(vectors))] for mu in range(n)]))

    def scaled(self, f: Expr, name: str | None = None) -> "VectorFrame":
        return VectorFrame(name or f"{self.name}*f", self.rho.scale(f))

    def zero_columns(self) -> list[int]:
        return [a for a in range(self.k) if all(v == ZERO for v in self.rho.col(a))]

    def to_json(self) -> list[list[str]]:
        return [[str(v) for v in self.rho.col(a)] for a in range(self.k)]


@dataclass(frozen=True)
class SigmaModel:
    chart: Chart
    E: ExprMatrix
    C2: ExprMatrix | None = None
    H: FormField | None = None
    G: ExprMatrix | None = None
    frames: Mapping[str, VectorFrame] = field(default_factory=dict)
    structure_overrides: Mapping[str, StructFun] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.chart.dim

    @property
    def two_form_matrix(self) -> ExprMatrix:
        """C2 if given, else the antisymmetric part of E."""
        if self.C2 is not None:
            return self.C2
        return ExprMatrix([[(self.E[i, j] - self.E[j, i]) / 2 for j in range(self.n)] for i in range(self.n)])

    @property
    def two_form(self) -> FormField:
        return FormField.two_form(self.two_form_matrix)

    @property
    def metric(self) -> ExprMatrix:
        """G if given, else E - C2."""
        if self.G is not None:
            return self.G
        return self.E - self.two_form_matrix

    @property
    def three_form(self) -> FormField | None:
        """H if given, else dC2; None on charts of dimension below 3."""
        if self.H is not None:
            return self.H
        if self.n < 3:
            return None
        return exterior_derivative(self.two_form, self.chart)

    def frame(self, name: str) -> VectorFrame:
        try:
            return self.frames[name]
        except KeyError:
            known = ", ".join(sorted(self.frames)) or "none"
            raise ModelError(f"unknown frame {name!r} (available: {known})") from None

    def coordinate_frame(self) -> VectorFrame:
        return VectorFrame("coordinate", ExprMatrix.identity(self.n))

    def default_spec(self, **kw) -> SampleSpec:
        return self.chart.cube(**kw)


# ------------------------------------------------------------------ loading

def _matrix(data: Any, n: int, what: str, chart: Chart) -> ExprMatrix:
    if not isinstance(data, list) or len(data) != n:
        raise ModelError(f"{what} must be an {n}x{n} matrix")
    for row in data:
        if not isinstance(row, list) or len(row) != n:
            raise ModelError(f"{what} must be an {n}x{n} matrix (ragged or wrong width)")
    return ExprMatrix([[_expr(v, chart, what) for v in row] for row in data])


def _expr(v: Any, chart: Chart, what: str) -> Expr:
    if isinstance(v, bool) or not isinstance(v, (str, int, float)):
        raise ModelError(f"{what}: entries must be expression strings")
    try:
        return parse(str(v), chart)
    except ParseError as exc:
        raise ModelError(f"{what}: {exc}") from None


def _index_key(key: str, count: int, n: int, what: str) -> tuple[int, ...]:
    parts = [p for p in re.split(r"[,_\s]+", key.strip()) if p]
    if len(parts) == 1 and len(parts[0]) == count:
        parts = list(parts[0])
    if len(parts) == 2 and count == 3 and len(parts[1]) == 2:
        parts = [parts[0], parts[1][0], parts[1][1]]
    try:
        idx = tuple(int(p) - 1 for p in parts)
    except ValueError:
        raise ModelError(f"{what}: bad index key {key!r}") from None
    if len(idx) != count or any(not 0 <= i < n for i in idx):
        raise ModelError(f"{what}: bad index key {key!r}")
    return idx


def _structure_table(data: Mapping, k: int, chart: Chart, what: str) -> StructFun:
    entries = {}
    for key, v in data.items():
        c, a, b = _index_key(key, 3, k, what)
        entries[(c, a, b)] = _expr(v, chart, what)
    try:
        return StructFun.from_entries(k, entries)
    except ValueError as exc:
        raise ModelError(f"{what}: {exc}") from None


def model_from_dict(doc: Mapping) -> SigmaModel:
    if not isinstance(doc, Mapping):
        raise ModelError("model file must contain a JSON object")
    for key in ("chart", "E"):
        if key not in doc:
            raise ModelError(f"missing key {key!r}")
    ch = doc["chart"]
    if not isinstance(ch, Mapping) or "coords" not in ch:
        raise ModelError("chart must give coords")
    chart = Chart(tuple(ch["coords"]))
    if "dim" in ch and ch["dim"] != chart.dim:
        raise ModelError(f"chart dim {ch['dim']} does not match {chart.dim} coordinates")
    n = chart.dim
    E = _matrix(doc["E"], n, "E", chart)
    C2 = _matrix(doc["C2"], n, "C2", chart) if doc.get("C2") is not None else None
    G = _matrix(doc["G"], n, "G", chart) if doc.get("G") is not None else None
    H = None
    if doc.get("H") is not None:
        if n < 3:
            raise ModelError("H needs at least three coordinates")
        comps = {_index_key(k, 3, n, "H"): _expr(v, chart, "H") for k, v in doc["H"].items()}
        try:
            H = FormField(3, n, comps)
        except ValueError as exc:
            raise ModelError(f"H: {exc}") from None
    frames = {}
    for name, vecs in (doc.get("frames") or {}).items():
        if not isinstance(vecs, list) or not vecs:
            raise ModelError(f"frame {name!r} must be a nonempty list of vector fields")
        for v in vecs:
            if not isinstance(v, list) or len(v) != n:
                raise ModelError(f"frame {name!r}: each vector field needs {n} components")
        frames[name] = VectorFrame.from_vectors(name, [[_expr(c, chart, f"frame {name}") for c in v] for v in vecs])
    overrides = {}
    sf = doc.get("structure_functions") or {}
    if sf:
        if all(isinstance(v, Mapping) for v in sf.values()):
            for name, table in sf.items():
                if name not in frames:
                    raise ModelError(f"structure_functions given for unknown frame {name!r}")
                overrides[name] = _structure_table(table, frames[name].k, chart, f"structure_functions[{name}]")
        else:
            for name, fr in frames.items():
                overrides[name] = _structure_table(sf, fr.k, chart, "structure_functions")
    if H is None:
        c2 = C2 if C2 is not None else None
        base = SigmaModel(chart, E, c2, None, G)
        H = exterior_derivative(base.two_form, chart) if n >= 3 else None
    return SigmaModel(chart, E, C2, H, G, frames, overrides)


def load_model(path: str | Path) -> SigmaModel:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ModelError(f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: invalid JSON ({exc})") from None
    return model_from_dict(doc)


def dump_model(m: SigmaModel) -> dict:
    doc: dict[str, Any] = {
        "chart": {"dim": m.chart.dim, "coords": list(m.chart.coords)},
        "E": m.E.to_text(),
    }
    if m.C2 is not None:
        doc["C2"] = m.C2.to_text()
    if m.G is not None:
        doc["G"] = m.G.to_text()
    if m.H is not None:
        doc["H"] = m.H.to_json()
    if m.frames:
        doc["frames"] = {name: fr.to_json() for name, fr in m.frames.items()}
    if m.structure_overrides:
        doc["structure_functions"] = {
            name: {
                f"{c + 1}_{a + 1}{b + 1}": str(sf.C[c][a][b])
                for c in range(sf.k)
                for a in range(sf.k)
                for b in range(a + 1, sf.k)
                if sf.C[c][a][b] != ZERO
            }
            for name, sf in m.structure_overrides.items()
        }
    return doc


def model_text(m: SigmaModel) -> str:
    return json.dumps(dump_model(m), indent=2)


# ------------------------------------------------------------------ validation

@dataclass
class Diagnostics:
    det_E: Expr
    det_verdict: ZeroVerdict
    c2_antisymmetry: Residual
    decomposition: Residual
    h_antisymmetry: Residual
    warnings: list[str] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    @property
    def invertible(self) -> bool:
        return self.det_verdict.nonzero

    def to_dict(self) -> dict:
        return {
            "det_E": str(self.det_E),
            "det_verdict": self.det_verdict.to_dict(),
            "invertible": self.invertible,
            "residuals": [r.to_dict() for r in (self.c2_antisymmetry, self.decomposition, self.h_antisymmetry)],
            "warnings": list(self.warnings),
            "errors": list(self.errors),
        }


def validate(m: SigmaModel, spec: SampleSpec | None = None) -> Diagnostics:
    spec = spec or m.default_spec()
    n = m.n
    d = det(m.E)
    verdict = is_zero(d, spec)
    warnings: list[str] = []
    errors: list[str] = []
    if not verdict.nonzero:
        warnings.append(f"E is not invertible (det E tests {verdict.verdict})")
    C2 = m.two_form_matrix
    anti = max_residual([C2[i, j] + C2[j, i] for i in range(n) for j in range(n)], spec, "C2 antisymmetry")
    G = m.metric
    dec = max_residual(
        [m.E[i, j] - G[i, j] - C2[i, j] for i in range(n) for j in range(n)], spec, "E = G + C2"
    )
    # H is stored by independent components, so the full table is antisymmetric by construction;
    # the check rebuilds it and compares all index permutations anyway
    H = m.three_form if n >= 3 else None
    h_terms = []
    if H is not None:
        from itertools import permutations

        for idx in H.keys():
            base = H[idx]
            for perm in permutations(range(3)):
                p = tuple(idx[i] for i in perm)
                inversions = sum(1 for i in range(3) for j in range(i + 1, 3) if perm[i] > perm[j])
                h_terms.append(H[p] - (base if inversions % 2 == 0 else -base))
    hres = max_residual(h_terms, spec, "H antisymmetry")
    if not anti.ok(spec.tol):
        errors.append(f"C2 is not antisymmetric (residual {anti.max_abs:.3g})")
    if not dec.ok(spec.tol):
        errors.append(f"E differs from G + C2 (residual {dec.max_abs:.3g})")
    if not hres.ok(spec.tol):
        errors.append("H is not totally antisymmetric")
    for name, fr in m.frames.items():
        if fr.n != n:
            errors.append(f"frame {name!r} has {fr.n} components, expected {n}")
        for a in fr.zero_columns():
            warnings.append(f"frame {name!r}: vector field {a + 1} is identically zero")
    return Diagnostics(d, verdict, anti, dec, hres, warnings, errors)

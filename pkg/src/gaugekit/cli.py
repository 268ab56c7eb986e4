"""Command-line interface: `gauge <command> MODEL [options]`.

Exit codes: 0 when every check holds, 1 when a check was run and failed,
2 for usage errors and unreadable or invalid input.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

from . import __version__
from .cartan import (
    NonInvolutiveError,
    StructureFunctionsRequired,
    lemma_identity_terms,
    lifted_metric,
    lifting_residual,
    structure_functions,
)
from .closure import (
    adjoint_connection,
    closure_obstruction,
    curvature_duality_check,
    curvature_q,
    curvature_tm,
    flat_table,
)
from .connections import ConnQ, ConnTM
from .constraints import (
    EUCLIDEAN,
    LORENTZIAN,
    BialgebraData,
    KSData,
    PreconditionError,
    bialgebra_cocycle,
    ks_constraints,
    pl_condition,
    pl_connections,
    wz_condition,
)
from .exprkit import ParseError, parse
from .gauging import (
    FrameReductionError,
    RescaleError,
    decide_gauging,
    killing_residual,
    rescale,
)
from .geomodel import ModelError, SigmaModel, model_from_dict
from .symlinalg import RankDeficientError, SingularMatrixError
from .verify import Residual, SampleSpec, SingularBoxError, max_residual, sample_points

IDENTITIES = ("lemma1", "duality", "rescaling", "lifting")


class UsageError(Exception):
    pass


class FrameFailure(Exception):
    """A check could not proceed because the frame fails a prerequisite."""


# ------------------------------------------------------------------ inputs

def _resolve(path: str) -> Path:
    p = Path(path)
    if p.exists():
        return p
    bundled = resources.files("gaugekit") / "fixtures" / Path(path).name
    if Path(path).parent.name == "fixtures" and bundled.is_file():
        return Path(str(bundled))
    raise UsageError(f"no such file: {path}")


def _read_json(path: str) -> tuple[dict, bytes]:
    p = _resolve(path)
    raw = p.read_bytes()
    try:
        return json.loads(raw), raw
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None


def _parse_box(text: str | None, coords: Sequence[str]) -> list[tuple[str, float, float]]:
    if text is None:
        return [(c, -1.0, 1.0) for c in coords]
    parts = text.split(",")
    if len(parts) == 1:
        parts = parts * len(coords)
    if len(parts) != len(coords):
        raise UsageError(f"--box needs 1 or {len(coords)} ranges, got {len(parts)}")
    out = []
    for c, part in zip(coords, parts):
        try:
            lo, hi = (float(v) for v in part.split(":"))
        except ValueError:
            raise UsageError(f"bad --box range {part!r}; expected lo:hi") from None
        out.append((c, lo, hi))
    return out


def _spec(args, model: SigmaModel) -> SampleSpec:
    coords = model.chart.coords
    exclusions = tuple(parse(e, model.chart) for e in args.exclude)
    return SampleSpec(
        tuple(_parse_box(args.box, coords)),
        count=args.samples,
        seed=args.seed,
        tol=args.tol,
        exclusions=exclusions,
    )


def _frame_and_C(model: SigmaModel, args, samples):
    if args.frame is None:
        frame = model.coordinate_frame()
    else:
        frame = model.frame(args.frame)
    override = model.structure_overrides.get(frame.name)
    return frame, structure_functions(frame, model.chart, samples, override)


# ------------------------------------------------------------------ commands

class Outcome:
    def __init__(self):
        self.residuals: list[dict] = []
        self.verdicts: dict[str, object] = {}
        self.result: dict = {}
        self.ok = True

    def add(self, res: Residual, tol: float, gating: bool = True) -> bool:
        passed = res.ok(tol)
        self.residuals.append({**res.to_dict(), "gating": gating, "passed": passed})
        if gating and not passed:
            self.ok = False
        return passed


def cmd_check(args, model, spec, out: Outcome) -> None:
    samples = sample_points(spec)
    frame, C = _frame_and_C(model, args, samples)
    report = decide_gauging(model.E, frame, C, model.chart, spec, rank_hint=args.rank)
    body = report.to_dict()
    if args.command == "check":
        body.pop("connections")
    out.result = body
    out.verdicts["gauging"] = report.verdict
    for c in report.checks:
        out.add(c.residual, spec.tol, c.gating)
    out.ok = report.gaugeable


def _load_connections(path: str, model: SigmaModel) -> dict:
    doc, _ = _read_json(path)
    doc = doc.get("result", doc)
    doc = doc.get("connections", doc)
    conns = {}
    for key in ("omega_plus", "omega_minus"):
        if key in doc and doc[key].get("omega") is not None:
            conns[key] = ConnTM.from_json(doc[key], model.chart)
    for key in ("q_plus", "q_minus"):
        if key in doc:
            conns[key] = ConnQ.from_json(doc[key], model.chart)
    return conns


def cmd_closure(args, model, spec, out: Outcome) -> None:
    samples = sample_points(spec)
    frame, C = _frame_and_C(model, args, samples)
    if args.connections:
        conns = _load_connections(args.connections, model)
    else:
        report = decide_gauging(model.E, frame, C, model.chart, spec, obstructions=False)
        if report.omega_plus is None or not report.omega_plus.symbolic:
            raise UsageError(f"no symbolic connections could be built ({report.reason}); pass --connections")
        conns = {"omega_plus": report.omega_plus, "omega_minus": report.omega_minus}
    if not any(k in conns for k in ("omega_plus", "omega_minus")):
        raise UsageError("connections file holds no TM connection tables")
    for key, sign in (("omega_plus", "+"), ("omega_minus", "-")):
        if key not in conns:
            continue
        omega = conns[key]
        if (omega.k, omega.n) != (frame.k, frame.n):
            raise UsageError(f"{key} has shape {omega.k}x{omega.n}x{omega.k}, frame needs {frame.k}x{frame.n}x{frame.k}")
        q = adjoint_connection(frame, omega, C)
        out.add(max_residual(flat_table(curvature_q(q, frame, C, model.chart)), samples, f"Q-curvature ({sign})"),
                spec.tol)
        obstruction = closure_obstruction(frame, omega, C, model.chart)
        out.add(obstruction.residual(samples), spec.tol)
        R = curvature_tm(omega, model.chart)
        out.add(max_residual(flat_table(R), samples, f"TM curvature ({sign})"), spec.tol, gating=False)
        out.result[key] = {"adjoint": q.to_json(), "obstruction": obstruction.to_json(), "injective": obstruction.injective}
    out.verdicts["closure"] = "closed" if out.ok else "not-closed"


def cmd_identity(args, model, spec, out: Outcome) -> None:
    samples = sample_points(spec)
    frame, C = _frame_and_C(model, args, samples)
    which = args.identity
    out.result["identity"] = which
    if which == "lifting":
        out.add(lifting_residual(model.E, frame, C, model.chart, samples), spec.tol)
    elif which == "lemma1":
        if frame.k != frame.n:
            raise UsageError("the lemma identity needs a square frame")
        try:
            terms = lemma_identity_terms(model.E, frame, C, model.chart)
        except RankDeficientError:
            raise UsageError("the lemma identity needs an invertible frame") from None
        out.add(max_residual(terms, samples, "lemma identity"), spec.tol)
    elif which == "duality":
        Eb = lifted_metric(model.E, frame)
        qm = ConnQ.zero("-", frame.k)
        if args.connections:
            conns = _load_connections(args.connections, model)
            qm = conns.get("q_minus", qm)
        out.add(curvature_duality_check(Eb, frame, C, qm, model.chart, spec), spec.tol)
    elif which == "rescaling":
        report = decide_gauging(model.E, frame, C, model.chart, spec, obstructions=False)
        if not report.gaugeable or not report.omega_plus.symbolic:
            for c in report.checks:
                out.add(c.residual, spec.tol, c.gating)
            raise FrameFailure(f"frame is not gaugeable ({report.reason}); nothing to rescale")
        f = parse(args.scale or f"exp({model.chart.coords[0]})", model.chart)
        out.add(report.check("killing").renamed("killing (before)"), spec.tol)
        new = rescale(frame, report.omega_plus, report.omega_minus, f, model.chart, samples, C)
        out.add(killing_residual(model.E, new.frame, new.omega_plus, new.omega_minus, model.chart, samples)
                .renamed("killing (rescaled)"), spec.tol)
        out.result["scale"] = str(f)
        out.result["connections"] = {"omega_plus": new.omega_plus.to_json(), "omega_minus": new.omega_minus.to_json()}
    out.verdicts[which] = "holds" if out.ok else "fails"


def cmd_pl(args, model, spec, out: Outcome) -> None:
    samples = sample_points(spec)
    frame, _ = _frame_and_C(model, args, samples)
    doc = _data(args)
    try:
        data = BialgebraData.from_lists(doc["C"], doc["Ct"])
    except (KeyError, ValueError, TypeError) as exc:
        raise UsageError(f"bad bialgebra data: {exc}") from None
    if data.k != frame.k:
        raise UsageError(f"bialgebra has dimension {data.k}, frame has {frame.k} vectors")
    out.add(bialgebra_cocycle(data), 0.0)
    for res in pl_condition(model.E, frame, data.Ct, model.chart, samples):
        out.add(res, spec.tol)
    if out.ok:
        pc = pl_connections(model.E, frame, data, model.chart, samples, spec.tol)
        out.add(pc.curvature_plus, spec.tol)
        out.add(pc.curvature_minus, spec.tol)
        out.result["connections"] = {"q_plus": pc.q_plus.to_json(), "q_minus": pc.q_minus.to_json()}
    out.verdicts["poisson_lie"] = "holds" if out.ok else "fails"


def cmd_ks(args, model, spec, out: Outcome) -> None:
    samples = sample_points(spec)
    frame, C = _frame_and_C(model, args, samples)
    doc = _data(args)
    try:
        data = KSData.from_dict(doc, model.chart, args.signature)
    except (KeyError, ValueError, ParseError) as exc:
        raise UsageError(f"bad Kotov-Strobl data: {exc}") from None
    for res in ks_constraints(model.metric, model.three_form, frame, C, data, model.chart, samples).values():
        out.add(res, spec.tol)
    out.result["signature"] = data.signature
    out.verdicts["ks"] = "holds" if out.ok else "fails"


def cmd_wz(args, model, spec, out: Outcome) -> None:
    samples = sample_points(spec)
    frame, _ = _frame_and_C(model, args, samples)
    for res in wz_condition(model.two_form, model.three_form, frame, model.chart, samples):
        out.add(res, spec.tol)
    out.verdicts["wz"] = "holds" if out.ok else "fails"


def _data(args) -> dict:
    if not args.data:
        raise UsageError(f"{args.command} needs --data FILE")
    return _read_json(args.data)[0]


COMMANDS: dict[str, Callable] = {
    "check": cmd_check,
    "construct": cmd_check,
    "closure": cmd_closure,
    "identity": cmd_identity,
    "pl": cmd_pl,
    "ks": cmd_ks,
    "wz": cmd_wz,
}


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--frame", help="frame name from the model file (default: coordinate frame)")
    common.add_argument("--samples", type=int, default=200, help="number of sample points (default 200)")
    common.add_argument("--seed", type=int, default=42, help="sampling seed (default 42)")
    common.add_argument("--box", help="sampling box lo:hi[,lo:hi...] (default -1:1 on every axis)")
    common.add_argument("--tol", type=float, default=1e-9, help="absolute tolerance (default 1e-9)")
    common.add_argument("--exclude", action="append", default=[], metavar="EXPR",
                        help="skip points where |EXPR| is below the guard; repeatable")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--signature", choices=(LORENTZIAN, EUCLIDEAN), default=None,
                        help="worldsheet signature for the ks command (default lorentzian)")

    parser = argparse.ArgumentParser(prog="gauge", description="Lie algebroid gauging checks for sigma models.")
    parser.add_argument("--version", action="version", version=f"gauge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name: str, help_text: str, *leading: tuple[str, dict]) -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help_text)
        for arg, kw in leading:
            p.add_argument(arg, **kw)
        p.add_argument("model", help="model JSON file (fixtures/NAME.json finds a bundled fixture)")
        return p

    for name, help_text in (("check", "decide gaugeability for a frame"),
                            ("construct", "decide and emit the connection tables")):
        command(name, help_text).add_argument(
            "--rank", type=int, help="declared rank of the lifted metric (degenerate frames)")
    command("closure", "closure obstruction and Q-curvatures").add_argument(
        "--connections", help="JSON with omega_plus / omega_minus tables (default: construct them)")
    p = command("identity", "verify one of the standing identities", ("identity", {"choices": IDENTITIES}))
    p.add_argument("--scale", help="scale function for the rescaling identity (default exp of the first coordinate)")
    p.add_argument("--connections", help="JSON with a q_minus table for the duality identity (default zero)")
    command("pl", "Poisson-Lie condition, bialgebra cocycle and connections").add_argument(
        "--data", help="JSON with constant tables C and Ct")
    command("ks", "Kotov-Strobl constraint residuals").add_argument(
        "--data", help="JSON with alpha, omega, phi tables")
    command("wz", "C/H condition residuals")
    return parser


def _emit(report: dict, out_path: str | None) -> None:
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if out_path:
        Path(out_path).write_text(text)
    else:
        sys.stdout.write(text)


def run(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) if exc.code in (0, None) else 2
    if args.samples < 1:
        parser.print_usage(sys.stderr)
        print("gauge: error: --samples must be positive", file=sys.stderr)
        return 2

    raw = b""
    spec = None
    out = Outcome()
    try:
        doc, raw = _read_json(args.model)
        model = model_from_dict(doc)
        spec = _spec(args, model)
        COMMANDS[args.command](args, model, spec, out)
    except (NonInvolutiveError, FrameFailure, PreconditionError) as exc:
        out.ok = False
        out.verdicts["error"] = str(exc)
        if getattr(exc, "residual", None) is not None:
            out.add(exc.residual, spec.tol if spec is not None else args.tol)
    except (UsageError, ModelError, ParseError, SingularBoxError, StructureFunctionsRequired,
            FrameReductionError, RescaleError, SingularMatrixError, ValueError) as exc:
        print(f"gauge: error: {exc}", file=sys.stderr)
        return 2

    report = {
        "tool": "gauge",
        "version": __version__,
        "command": [args.command] + ([args.identity] if args.command == "identity" else []),
        "argv": argv,
        "model": {"path": args.model, "sha256": hashlib.sha256(raw).hexdigest()},
        "spec": spec.to_dict() if spec is not None else None,
        "ok": out.ok,
        "verdicts": out.verdicts,
        "residuals": out.residuals,
        "result": out.result,
    }
    _emit(report, args.out)
    return 0 if out.ok else 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

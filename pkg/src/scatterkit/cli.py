"""Command-line front end: forward solves, line traces, and inversions.

Subcommands: forward, trace, spectral, invert nodal, invert jwkb,
invert born, compare.  Every command writes CSV plot data (one header
line, '#'-prefixed metadata, 17 significant digits) plus a JSON manifest
listing the produced files, input digests, and per-stage timings.  All
file writes are atomic (temp file + rename).

Exit codes: 0 success; 2 input/parse failure; 3 solver failure;
10..18 inversion-stage failures (see _STAGE_CODES).

The environment variable SCATTER_THREADS caps the worker pool used for
parameter sweeps.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .errors import (DomainError, IntegrationError, MonotonicityError,
                     ReconstructionError, ResolutionError, ScatterError,
                     StageError, TurningPointError)
from .nodal_inverse import (detect_discontinuities, reconstruct_piecewise,
                            third_derivative_ratio, wronskian_residual)
from .nodal_lines import (SEGMENT_FIXED_ELL, ZeroLine, invert_line,
                          spectral_data_at, trace_fixed_l_line,
                          trace_mixed_line)
from .potentials import potential_from_dict
from .radial_solver import integrate_regular, phase_shift
from .semiclassical import (PhaseShiftTable, born_extend_and_invert,
                            mixed_jwkb_invert)

_STAGE_CODES = {
    "nodal_input": 10,
    "nodal_detect": 11,
    "nodal_reconstruct": 12,
    "fixed_energy": 13,
    "sabatier_forward": 13,
    "completion": 14,
    "fixed_l": 15,
    "stitch": 16,
    "extend": 17,
    "invert": 18,
}

_EXIT_PARSE = 2
_EXIT_SOLVER = 3


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp_", suffix=".part")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: str, header, columns, meta=None) -> None:
    """CSV with '#' metadata comments and 17-significant-digit numbers."""
    lines = [f"# scatterkit {__version__}"]
    for key, val in (meta or {}).items():
        lines.append(f"# {key}: {val}")
    lines.append(",".join(header))
    rows = zip(*columns)
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else _fmt(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def read_csv(path: str):
    """(header, columns-as-strings) of a scatterkit CSV."""
    header = None
    rows = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
            else:
                rows.append(line.split(","))
    if header is None:
        raise DomainError(f"{path}: no header line found")
    cols = list(zip(*rows)) if rows else [()] * len(header)
    return header, {name: cols[i] for i, name in enumerate(header)}


class _Manifest:
    def __init__(self, command: str, args: argparse.Namespace):
        self.command = command
        self.argv = {k: v for k, v in vars(args).items() if k != "func"}
        self.outputs: list[str] = []
        self.timings: dict[str, float] = {}
        self._digest_parts: dict[str, str] = {}
        self._t0 = time.perf_counter()
        self._stage_start = self._t0

    def add_input(self, name: str, path: str) -> None:
        with open(path, "rb") as fh:
            self._digest_parts[name] = hashlib.sha256(fh.read()).hexdigest()

    def stage(self, name: str) -> None:
        now = time.perf_counter()
        self.timings[name] = round(now - self._stage_start, 6)
        self._stage_start = now

    def emit(self, path: str, text_writer, *args, **kwargs) -> None:
        text_writer(path, *args, **kwargs)
        self.outputs.append(path)

    def write(self, path: str) -> None:
        digest_src = json.dumps(
            {"argv": {k: str(v) for k, v in sorted(self.argv.items())},
             "inputs": self._digest_parts}, sort_keys=True)
        doc = {
            "command": self.command,
            "tool_version": __version__,
            "config_digest": hashlib.sha256(digest_src.encode()).hexdigest(),
            "outputs": sorted(self.outputs + [path]),
            "timings": self.timings,
        }
        _atomic_write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _write_json(path: str, doc) -> None:
    _atomic_write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _load_potential(path: str):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise DomainError(f"potential file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DomainError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}") from None
    return potential_from_dict(doc)


def _pool_map(fn, items):
    env = os.environ.get("SCATTER_THREADS", "")
    try:
        cap = int(env) if env else 0
    except ValueError:
        cap = 0
    workers = cap if cap > 0 else min(8, os.cpu_count() or 1)
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _out_prefix(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, args.prefix)


def _write_line_csv(path: str, line: ZeroLine, meta=None) -> None:
    write_csv(path, ["segment", "ell", "E", "r", "diverged"],
              [list(line.segment), line.ells, line.energies, line.radii,
               ["1" if d else "0" for d in line.diverged]],
              meta={"n": line.n, "kind": line.kind, "r_cap": line.r_cap,
                    **(meta or {})})


def _read_line_csv(path: str) -> ZeroLine:
    try:
        header, cols = read_csv(path)
    except FileNotFoundError:
        raise DomainError(f"line file not found: {path}") from None
    needed = {"segment", "ell", "E", "r", "diverged"}
    if not needed.issubset(header):
        raise DomainError(f"{path}: line CSV needs columns {sorted(needed)}")
    seg = tuple(cols["segment"])
    ells = np.array([float(v) for v in cols["ell"]])
    energies = np.array([float(v) for v in cols["E"]])
    radii = np.array([float(v) if v != "nan" else math.nan for v in cols["r"]])
    diverged = np.array([v.strip() in ("1", "true", "True") for v in cols["diverged"]])
    kind = "mixed" if len(set(seg)) > 1 else (
        "fixed_ell" if seg and seg[0] == SEGMENT_FIXED_ELL else "fixed_E")
    return ZeroLine(n=1, kind=kind, ells=ells, energies=energies, radii=radii,
                    diverged=diverged, segment=seg,
                    r_cap=float(np.nanmax(radii)) if radii.size else 0.0)


def _read_phase_table(path: str) -> PhaseShiftTable:
    header, cols = read_csv(path)
    needed = {"branch", "k", "lam", "delta"}
    if not needed.issubset(header):
        raise DomainError(f"{path}: table CSV needs columns {sorted(needed)}")
    branch = np.array(cols["branch"])
    k = np.array([float(v) for v in cols["k"]])
    lam = np.array([float(v) for v in cols["lam"]])
    delta = np.array([float(v) for v in cols["delta"]])
    ml = branch == "fixed_l"
    me = branch == "fixed_E"
    if not np.any(ml) or not np.any(me):
        raise DomainError(f"{path}: need both fixed_l and fixed_E rows")
    k0 = float(np.min(k[ml]))
    lam0 = float(np.min(lam[me]))
    order_l = np.argsort(k[ml])
    order_e = np.argsort(lam[me])
    return PhaseShiftTable(ell0=lam0 - 0.5, k0=k0,
                           fixed_l_k=k[ml][order_l],
                           fixed_l_delta=delta[ml][order_l],
                           fixed_e_lam=lam[me][order_e],
                           fixed_e_delta=delta[me][order_e])


# ---------------------------------------------------------------- commands

def cmd_forward(args) -> int:
    manifest = _Manifest("forward", args)
    manifest.add_input("potential", args.potential)
    potential = _load_potential(args.potential)
    prefix = _out_prefix(args)
    meta = {"potential": args.potential, "ell": args.ell}
    if args.energy:
        def one(item):
            i, energy = item
            trace = integrate_regular(potential, args.ell, energy, args.rmax)
            return i, energy, trace

        for i, energy, trace in _pool_map(one, enumerate(args.energy)):
            manifest.emit(f"{prefix}_trace_{i}.csv", write_csv,
                          ["r", "psi", "dpsi"],
                          [trace.grid, trace.psi, trace.dpsi],
                          meta={**meta, "E": energy})
            manifest.emit(f"{prefix}_zeros_{i}.csv", write_csv,
                          ["n", "zero"],
                          [np.arange(1, trace.zeros.size + 1), trace.zeros],
                          meta={**meta, "E": energy})
        manifest.stage("traces")
    if args.k:
        samples = _pool_map(lambda k: phase_shift(potential, args.ell, k), args.k)
        manifest.emit(f"{prefix}_phase.csv", write_csv,
                      ["ell", "k", "delta", "residual"],
                      [[s.ell for s in samples], [s.k for s in samples],
                       [s.delta for s in samples], [s.residual for s in samples]],
                      meta=meta)
        manifest.stage("phases")
    manifest.write(f"{prefix}_manifest.json")
    return 0


def cmd_trace(args) -> int:
    manifest = _Manifest("trace", args)
    manifest.add_input("potential", args.potential)
    potential = _load_potential(args.potential)
    prefix = _out_prefix(args)
    e_grid = np.geomspace(args.emax, args.emin, args.epoints) \
        if args.emin > 0 else np.linspace(args.emax, args.emin + 1e-12, args.epoints)

    def one(n):
        if args.mode == "fixed-l":
            return trace_fixed_l_line(potential, args.ell0, n, e_grid,
                                      r_cap=args.rcap, refine_rel=args.refine)
        ell_grid = np.linspace(args.ell0, args.lmax, args.lpoints)
        e_part = e_grid[e_grid >= args.e0]
        if e_part.size < 2:
            raise DomainError("mixed mode needs emax > E0 with several points")
        return trace_mixed_line(potential, args.ell0, args.e0, n, e_part,
                                ell_grid, r_cap=args.rcap,
                                refine_rel=args.refine)

    for n, line in zip(args.n, _pool_map(one, args.n)):
        manifest.emit(f"{prefix}_line_n{n}.csv", _write_line_csv, line,
                      meta={"potential": args.potential})
    manifest.stage("trace")
    manifest.write(f"{prefix}_manifest.json")
    return 0


def cmd_spectral(args) -> int:
    manifest = _Manifest("spectral", args)
    manifest.add_input("potential", args.potential)
    potential = _load_potential(args.potential)
    prefix = _out_prefix(args)
    data = spectral_data_at(potential, args.ell, args.radius, args.nmax)
    manifest.stage("spectral")
    manifest.emit(f"{prefix}_spectral.csv", write_csv,
                  ["n", "E_star", "rho"],
                  [np.arange(1, len(data.eigenvalues) + 1),
                   data.eigenvalues, data.norming],
                  meta={"R": args.radius, "ell": args.ell})
    manifest.write(f"{prefix}_manifest.json")
    return 0


def cmd_invert_nodal(args) -> int:
    manifest = _Manifest("invert nodal", args)
    manifest.add_input("line", args.line)
    prefix = _out_prefix(args)
    line = _read_line_csv(args.line)
    try:
        inverse = invert_line(line, segment=SEGMENT_FIXED_ELL
                              if line.kind == "mixed" else None)
    except (DomainError, MonotonicityError) as exc:
        raise StageError("nodal_input", str(exc)) from exc
    manifest.stage("invert_line")
    try:
        events = detect_discontinuities(inverse, noise_floor=args.noise_floor)
        ratio_r, ratio = third_derivative_ratio(inverse)
    except ResolutionError as exc:
        raise StageError("nodal_detect", str(exc)) from exc
    manifest.stage("detect")
    try:
        potential = reconstruct_piecewise(inverse, events)
    except ReconstructionError as exc:
        raise StageError("nodal_reconstruct", str(exc)) from exc
    manifest.stage("reconstruct")

    manifest.emit(f"{prefix}_events.csv", write_csv,
                  ["location", "jump_d3", "slope_d1", "inferred_jump", "confidence"],
                  [[e.location for e in events], [e.jump_d3 for e in events],
                   [e.slope_d1 for e in events], [e.inferred_jump for e in events],
                   [e.confidence for e in events]])
    manifest.emit(f"{prefix}_inverse.csv", write_csv, ["r", "E"],
                  [inverse.r_grid, inverse.values])
    manifest.emit(f"{prefix}_ratio.csv", write_csv, ["r", "ratio"],
                  [ratio_r, ratio],
                  meta={"definition": "-E'''(r) / (2 E'(r))"})
    rr = np.linspace(inverse.r_grid[0], inverse.r_grid[-1], 400)
    manifest.emit(f"{prefix}_potential.csv", write_csv, ["r", "V"],
                  [rr, potential.evaluate(rr)])
    _write_json(f"{prefix}_potential.json", potential.to_dict())
    manifest.outputs.append(f"{prefix}_potential.json")
    _write_json(f"{prefix}_report.json", {
        "events": [{"location": e.location, "inferred_jump": e.inferred_jump,
                    "confidence": e.confidence} for e in events],
        "breakpoints": list(potential.breakpoints),
        "values": list(potential.values),
        "tail": 0.0,
    })
    manifest.outputs.append(f"{prefix}_report.json")
    manifest.write(f"{prefix}_manifest.json")
    return 0


def cmd_invert_jwkb(args) -> int:
    manifest = _Manifest("invert jwkb", args)
    manifest.add_input("table", args.table)
    prefix = _out_prefix(args)
    table = _read_phase_table(args.table)
    result = mixed_jwkb_invert(table)
    manifest.stage("pipeline")
    pot = result.potential
    manifest.emit(f"{prefix}_potential.csv", write_csv, ["r", "V"],
                  [pot.r_samples, pot.v_samples])
    for tag, curve in (("fixed_energy", result.curve_fixed_energy),
                       ("fixed_l", result.curve_fixed_l)):
        manifest.emit(f"{prefix}_curve_{tag}.csv", write_csv,
                      ["parameter", "r", "r_free"],
                      [curve.parameter, curve.radii, curve.free_reference],
                      meta={"kind": curve.kind, "anchor": curve.anchor})
    manifest.emit(f"{prefix}_completion.csv", write_csv, ["k", "delta"],
                  [result.completion_k, result.completion_delta])
    _write_json(f"{prefix}_report.json", {
        "r0": result.r0,
        "seam_residual": result.seam_residual,
        "hypothesis_fixed_energy": result.curve_fixed_energy.hypothesis_ok,
        "hypothesis_fixed_l": result.curve_fixed_l.hypothesis_ok,
    })
    manifest.outputs.append(f"{prefix}_report.json")
    manifest.write(f"{prefix}_manifest.json")
    return 0


def cmd_invert_born(args) -> int:
    manifest = _Manifest("invert born", args)
    manifest.add_input("gq", args.gq)
    manifest.add_input("delta0", args.delta0)
    prefix = _out_prefix(args)
    _, gq = read_csv(args.gq)
    _, d0 = read_csv(args.delta0)
    if "q" not in gq or "g" not in gq:
        raise DomainError(f"{args.gq}: need columns q,g")
    if "k" not in d0 or "delta" not in d0:
        raise DomainError(f"{args.delta0}: need columns k,delta")
    q = np.array([float(v) for v in gq["q"]])
    g = np.array([float(v) for v in gq["g"]])
    k = np.array([float(v) for v in d0["k"]])
    delta = np.array([float(v) for v in d0["delta"]])
    r_grid = np.linspace(args.rmin, args.rmax, args.rpoints)
    result = born_extend_and_invert(q, g, k, delta, r_grid=r_grid)
    manifest.stage("invert")
    pot = result.potential
    manifest.emit(f"{prefix}_potential.csv", write_csv, ["r", "V"],
                  [pot.r_samples, pot.v_samples])
    manifest.emit(f"{prefix}_g_extended.csv", write_csv, ["q", "g"],
                  [result.q_grid, result.g])
    _write_json(f"{prefix}_report.json", {"seam_mismatch": result.seam_mismatch})
    manifest.outputs.append(f"{prefix}_report.json")
    manifest.write(f"{prefix}_manifest.json")
    return 0


def cmd_compare(args) -> int:
    manifest = _Manifest("compare", args)
    manifest.add_input("potential_a", args.potential_a)
    manifest.add_input("potential_b", args.potential_b)
    pot_a = _load_potential(args.potential_a)
    pot_b = _load_potential(args.potential_b)
    prefix = _out_prefix(args)
    rr = np.linspace(args.rmin, args.rmax, args.points)
    va = np.asarray(pot_a.evaluate(rr), dtype=float)
    vb = np.asarray(pot_b.evaluate(rr), dtype=float)
    manifest.emit(f"{prefix}_compare.csv", write_csv,
                  ["r", "V_a", "V_b", "diff"], [rr, va, vb, va - vb])
    report = {
        "max_abs_diff": float(np.max(np.abs(va - vb))),
        "rms_diff": float(np.sqrt(np.mean((va - vb) ** 2))),
    }
    if args.wronskian:
        e_grid = np.geomspace(max(4.0 * args.rmax, 40.0), 0.5, 24)
        line = trace_fixed_l_line(pot_a, args.ell, args.n, e_grid,
                                  r_cap=3.0 * args.rmax)
        probe = wronskian_residual(pot_a, pot_b, args.ell, line,
                                   volterra=False)
        manifest.emit(f"{prefix}_wronskian.csv", write_csv,
                      ["E", "r", "identity_residual", "dv_overlap", "kernel_diag"],
                      [probe.energies, probe.radii, probe.wronskian_residual,
                       probe.dv_overlap, probe.kernel_diag])
        report["max_identity_residual"] = float(np.max(probe.wronskian_residual))
        report["max_dv_overlap"] = float(np.max(np.abs(probe.dv_overlap)))
    manifest.stage("compare")
    _write_json(f"{prefix}_report.json", report)
    manifest.outputs.append(f"{prefix}_report.json")
    manifest.write(f"{prefix}_manifest.json")
    return 0


# ---------------------------------------------------------------- parser

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scatterkit",
        description="Radial forward solves, nodal-line traces, and "
                    "inverse-scattering reconstructions.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    fw = sub.add_parser("forward", help="integrate the regular solution / phase shifts")
    fw.add_argument("--potential", required=True)
    fw.add_argument("--ell", type=float, default=0.0)
    fw.add_argument("--energy", "--E", dest="energy", type=float, nargs="*")
    fw.add_argument("--k", type=float, nargs="*")
    fw.add_argument("--rmax", type=float, default=10.0)
    fw.add_argument("--out", default=".")
    fw.add_argument("--prefix", default="forward")
    fw.set_defaults(func=cmd_forward)

    tr = sub.add_parser("trace", help="trace nodal lines and emit plot data")
    tr.add_argument("--potential", required=True)
    tr.add_argument("--mode", choices=["fixed-l", "mixed"], default="fixed-l")
    tr.add_argument("--ell0", type=float, default=0.0)
    tr.add_argument("--n", type=int, nargs="+", default=[1])
    tr.add_argument("--emax", type=float, default=100.0)
    tr.add_argument("--emin", type=float, default=0.5)
    tr.add_argument("--epoints", type=int, default=24)
    tr.add_argument("--e0", type=float, default=1.0)
    tr.add_argument("--lmax", type=float, default=8.0)
    tr.add_argument("--lpoints", type=int, default=9)
    tr.add_argument("--rcap", type=float, default=None)
    tr.add_argument("--refine", type=float, default=0.05)
    tr.add_argument("--out", default=".")
    tr.add_argument("--prefix", default="trace")
    tr.set_defaults(func=cmd_trace)

    sp = sub.add_parser("spectral", help="Dirichlet spectral data on [0, R]")
    sp.add_argument("--potential", required=True)
    sp.add_argument("--ell", type=float, default=0.0)
    sp.add_argument("--radius", "--R", dest="radius", type=float, required=True)
    sp.add_argument("--nmax", type=int, default=5)
    sp.add_argument("--out", default=".")
    sp.add_argument("--prefix", default="spectral")
    sp.set_defaults(func=cmd_spectral)

    inv = sub.add_parser("invert", help="inverse reconstructions")
    inv_sub = inv.add_subparsers(dest="subcommand", required=True)

    nod = inv_sub.add_parser("nodal", help="piecewise potential from a nodal line")
    nod.add_argument("--line", required=True)
    nod.add_argument("--noise-floor", type=float, default=None)
    nod.add_argument("--out", default=".")
    nod.add_argument("--prefix", default="nodal")
    nod.set_defaults(func=cmd_invert_nodal)

    jw = inv_sub.add_parser("jwkb", help="mixed-data JWKB inversion")
    jw.add_argument("--table", required=True)
    jw.add_argument("--out", default=".")
    jw.add_argument("--prefix", default="jwkb")
    jw.set_defaults(func=cmd_invert_jwkb)

    bo = inv_sub.add_parser("born", help="Born sine-transform inversion")
    bo.add_argument("--gq", required=True)
    bo.add_argument("--delta0", required=True)
    bo.add_argument("--rmin", type=float, default=0.05)
    bo.add_argument("--rmax", type=float, default=8.0)
    bo.add_argument("--rpoints", type=int, default=320)
    bo.add_argument("--out", default=".")
    bo.add_argument("--prefix", default="born")
    bo.set_defaults(func=cmd_invert_born)

    cp = sub.add_parser("compare", help="compare two potentials pointwise")
    cp.add_argument("--potential-a", required=True)
    cp.add_argument("--potential-b", required=True)
    cp.add_argument("--rmin", type=float, default=0.01)
    cp.add_argument("--rmax", type=float, default=10.0)
    cp.add_argument("--points", type=int, default=400)
    cp.add_argument("--wronskian", action="store_true")
    cp.add_argument("--ell", type=float, default=0.0)
    cp.add_argument("--n", type=int, default=1)
    cp.add_argument("--out", default=".")
    cp.add_argument("--prefix", default="compare")
    cp.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _STAGE_CODES.get(exc.stage, 19)
    except (ResolutionError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _STAGE_CODES["nodal_detect"]
    except (ReconstructionError, MonotonicityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _STAGE_CODES["nodal_reconstruct"]
    except (IntegrationError, TurningPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_SOLVER
    except (DomainError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_PARSE
    except ScatterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_SOLVER
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_PARSE


if __name__ == "__main__":
    raise SystemExit(main())

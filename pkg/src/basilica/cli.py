"""Command-line front end.

Exit codes: 0 success, 1 invalid configuration or input, 2 capacity limit
exceeded, 3 invariant failure reported by ``check``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, fields, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import cells, checks, decimation, forms, geometry, graphdir, spectra
from .errors import BasilicaError, CapacityError

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CAPACITY = 2
EXIT_INVARIANT = 3

COMMANDS = ("graph", "spectrum", "eigenfunction", "resistance", "measure", "dimension", "julia", "check")


class ConfigError(BasilicaError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


@dataclass(frozen=True)
class RunConfig:
    scheme: str = "dyadic"
    p: float = 0.25
    q: float = 0.25
    level: int = 3
    measure: str = forms.BALANCED
    output: str | None = None
    format: str = "json"
    seed: int = 0
    mode: str | None = None
    r1: float = 0.5
    normalization: str = spectra.PHYSICAL
    depth: int = 10

    def validate(self) -> "RunConfig":
        if not isinstance(self.level, int) or isinstance(self.level, bool) or self.level < 0:
            raise ConfigError("level", f"must be a nonnegative integer, got {self.level!r}")
        if not isinstance(self.depth, int) or self.depth < 0:
            raise ConfigError("depth", f"must be a nonnegative integer, got {self.depth!r}")
        if not isinstance(self.seed, int):
            raise ConfigError("seed", f"must be an integer, got {self.seed!r}")
        if not (isinstance(self.p, (int, float)) and 0 < self.p < 0.5):
            raise ConfigError("p", f"must lie in (0, 1/2), got {self.p!r}")
        if not (isinstance(self.q, (int, float)) and 0 < self.q < 1):
            raise ConfigError("q", f"must lie in (0, 1), got {self.q!r}")
        if not (isinstance(self.r1, (int, float)) and self.r1 > 0):
            raise ConfigError("r1", f"must be positive, got {self.r1!r}")
        if self.format not in ("json", "csv"):
            raise ConfigError("format", f"must be json or csv, got {self.format!r}")
        if self.measure not in forms.MEASURE_KINDS:
            raise ConfigError("measure", f"must be one of {', '.join(forms.MEASURE_KINDS)}")
        if self.normalization not in (spectra.PHYSICAL, spectra.GRAPH):
            raise ConfigError("normalization", f"must be physical or graph, got {self.normalization!r}")
        if self.scheme not in ("dyadic", "conformal") and not Path(self.scheme).is_file():
            raise ConfigError("scheme", f"must be dyadic, conformal or a scheme file, got {self.scheme!r}")
        return self

    @property
    def params(self) -> decimation.DecimationParams:
        return decimation.DecimationParams(self.p, self.q)


CONFIG_KEYS = {f.name for f in fields(RunConfig)}
CUSTOM_KEYS = {"top", "side_loops", "split", "loop_fraction"}


def load_config(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be an object")
    unknown = sorted(set(data) - CONFIG_KEYS)
    if unknown:
        raise ConfigError(unknown[0], "unknown configuration key")
    return data


def load_scheme(cfg: RunConfig) -> forms.ResistanceScheme:
    if cfg.scheme == "dyadic":
        return forms.Dyadic()
    if cfg.scheme == "conformal":
        return forms.Conformal(cfg.r1)
    try:
        data = json.loads(Path(cfg.scheme).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError("scheme", f"cannot read {cfg.scheme}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("scheme", "scheme file must hold an object")
    unknown = sorted(set(data) - CUSTOM_KEYS)
    if unknown:
        raise ConfigError(f"scheme.{unknown[0]}", "unknown key")
    scheme = forms.CustomScheme.from_splits(**data)
    report = forms.validate(scheme, max(1, cfg.level))
    if not report.ok:
        raise ConfigError("scheme", str(report.failure))
    return scheme


# --------------------------------------------------------------------------
# output


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def to_json(obj: Any) -> str:
    """JSON with every float written to 17 significant digits."""
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, Fraction):
        return json.dumps(f"{obj.numerator}/{obj.denominator}")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {to_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(to_json(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def csv_cell(x: Any) -> str:
    if isinstance(x, (float, np.floating)):
        return fmt_float(x)
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if x is None:
        return ""
    return str(x)


def to_csv(header: Sequence[str], rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(csv_cell(c) for c in row) for row in rows]
    return "\n".join(lines) + "\n"


def emit(text: str, cfg: RunConfig, out) -> None:
    if cfg.output:
        Path(cfg.output).write_text(text)
    else:
        out.write(text if text.endswith("\n") else text + "\n")


# --------------------------------------------------------------------------
# commands


def cmd_graph(cfg: RunConfig, args) -> tuple[int, str]:
    if args.directed:
        G = graphdir.build_labeled(cfg.level, cfg.r1, max_level=graphdir.DENSE_LIMIT)
        doc = G.to_dict()
        xy = geometry.layout(G)
    else:
        F = cells.build_filtration(cfg.level)
        doc = F.graph.to_dict(cfg.level)
        xy = geometry.layout(F.graph) if args.layout else None
    if args.layout:
        rows = [(i, x, y) for i, (x, y) in enumerate(xy)]
        return EXIT_OK, to_csv(("vertex_id", "x", "y"), rows)
    if cfg.format == "csv":
        keys = list(doc["edges"][0].keys())
        return EXIT_OK, to_csv(keys, ([e[k] for k in keys] for e in doc["edges"]))
    return EXIT_OK, to_json(doc)


def cmd_spectrum(cfg: RunConfig, args) -> tuple[int, str]:
    mode = cfg.mode or "decimation"
    if mode == "decimation":
        spec = decimation.graph_spectrum(cfg.level, cfg.params)
        docs = [a.to_dict() for a in spec]
        if cfg.format == "csv":
            keys = ("z", "mult", "birth", "m", "lineage")
            return EXIT_OK, to_csv(keys, ([d[k] for k in keys] for d in docs))
        return EXIT_OK, to_json(docs)
    if mode == "graph-directed":
        vals = spectra.graphdirected_spectrum(cfg.level, cfg.r1, cfg.normalization)
        if cfg.format == "csv":
            return EXIT_OK, to_csv(("index", "lambda"), enumerate(vals))
        return EXIT_OK, to_json({"level": cfg.level, "normalization": cfg.normalization, "eigenvalues": vals})
    if mode == "dirichlet":
        atoms = spectra.dirichlet_spectrum(max(1, cfg.level))
        if args.neumann:
            atoms = sorted(atoms + spectra.neumann_candidates(cfg.level), key=lambda a: abs(a.lam))
        if cfg.format == "csv":
            lam, N = spectra.counting_function([abs(a.lam) for a in atoms], [a.mult for a in atoms])
            return EXIT_OK, to_csv(("lambda", "N"), zip(lam, N.astype(int)))
        return EXIT_OK, to_json([a.to_dict() for a in atoms])
    raise ConfigError("mode", f"unknown spectrum mode {mode!r}")


def cmd_eigenfunction(cfg: RunConfig, args) -> tuple[int, str]:
    spec = decimation.graph_spectrum(cfg.level, cfg.params)
    if not 0 <= args.atom < len(spec):
        raise ConfigError("atom", f"index must lie in 0..{len(spec) - 1}")
    atom = spec.atoms[args.atom]
    basis = decimation.eigenfunction(atom, cfg.level, cfg.params)
    if not 0 <= args.basis < basis.shape[1]:
        raise ConfigError("basis", f"index must lie in 0..{basis.shape[1] - 1}")
    vec = basis[:, args.basis]
    if cfg.format == "csv":
        return EXIT_OK, to_csv(("vertex_id", "value"), enumerate(vec))
    return EXIT_OK, to_json({"atom": atom.to_dict(), "basis_index": args.basis, "values": vec})


def _parse_pairs(text: str) -> list[tuple[int, int]]:
    pairs = []
    for chunk in text.split(","):
        try:
            x, y = chunk.split("-")
            pairs.append((int(x), int(y)))
        except ValueError as exc:
            raise ConfigError("pairs", f"expected x-y items, got {chunk!r}") from exc
    return pairs


def cmd_resistance(cfg: RunConfig, args) -> tuple[int, str]:
    scheme = load_scheme(cfg)
    net = forms.network(scheme, cfg.level)
    if args.edges:
        rows = [
            (str(net.graph.address(i)), float(net.resistance[i]))
            for i in net.graph.arc_indices().tolist()
        ]
        return EXIT_OK, to_csv(("address", "resistance"), rows)
    if args.pairs:
        pairs = _parse_pairs(args.pairs)
    else:
        rng = np.random.default_rng(cfg.seed)
        pairs = [tuple(int(t) for t in row) for row in rng.integers(0, net.n_vertices, size=(args.random, 2))]
    for x, y in pairs:
        if not (0 <= x < net.n_vertices and 0 <= y < net.n_vertices):
            raise ConfigError("pairs", f"vertex outside V_{cfg.level}")
    R = net.resistance_table(pairs)
    sources = sorted({x for x, _ in pairs})
    S = net.local_metric_table(sources)
    row = {x: i for i, x in enumerate(sources)}
    table = [(x, y, r, S[row[x], y]) for (x, y), r in zip(pairs, R)]
    if cfg.format == "csv":
        return EXIT_OK, to_csv(("x", "y", "R", "S"), table)
    return EXIT_OK, to_json([{"x": x, "y": y, "R": r, "S": s} for x, y, r, s in table])


def cmd_measure(cfg: RunConfig, args) -> tuple[int, str]:
    if cfg.level < 1:
        raise ConfigError("level", "cells start at level 1")
    if cfg.level > cells.MAX_LEVEL + 1:
        raise CapacityError(f"level {cfg.level} exceeds the memory budget")
    scheme = load_scheme(cfg) if cfg.measure == forms.LOCAL_RESISTANCE else None
    rows = forms.measure_table(cfg.level, cfg.measure, scheme)
    if cfg.format == "csv":
        return EXIT_OK, to_csv(("address", "kind", "value"), rows)
    return EXIT_OK, to_json(
        {"measure": cfg.measure, "level": cfg.level, "cells": [{"address": a, "kind": k, "value": v} for a, k, v in rows]}
    )


def cmd_dimension(cfg: RunConfig, args) -> tuple[int, str]:
    mode = cfg.mode or "decimation"
    if mode == "decimation":
        vals = decimation.graph_spectrum(cfg.level, cfg.params).values() * spectra.SCALE**cfg.level
        window = spectra.weyl_window(vals, spectra.SCALE)
        expected = spectra.self_similar_weyl_exponent()
        s, ds = spectra.symbolic_ds([[3]], 6)
    elif mode == "graph-directed":
        vals = spectra.graphdirected_spectrum(cfg.level, cfg.r1, cfg.normalization)
        window = spectra.weyl_window(vals, spectra.graphdirected_scale())
        s, ds = spectra.symbolic_ds()
        expected = float(s)
    else:
        raise ConfigError("mode", f"unknown dimension mode {mode!r}")
    fit = spectra.weyl_fit(vals, *window, expected=expected)
    doc = {
        "mode": mode,
        "level": cfg.level,
        "slope": fit.slope,
        "spectral_dimension": 2 * fit.slope,
        "window": list(fit.window),
        "points": fit.points,
        "expected_slope": expected,
        "s": str(s),
        "d_s": str(ds),
    }
    return EXIT_OK, to_json(doc)


def cmd_julia(cfg: RunConfig, args) -> tuple[int, str]:
    pts = geometry.backward_orbit(cfg.depth)
    return EXIT_OK, to_csv(("re", "im"), zip(pts.real, pts.imag))


def cmd_check(cfg: RunConfig, args) -> tuple[int, str]:
    results = checks.run_all(cfg.seed, workers=args.workers)
    ok = all(r.ok for r in results)
    if cfg.format == "json":
        text = to_json([{"module": r.module, "name": r.name, "ok": r.ok, "detail": r.detail} for r in results])
    else:
        text = "".join(f"{'PASS' if r.ok else 'FAIL'} {r.module}: {r.name} ({r.detail})\n" for r in results)
    return (EXIT_OK if ok else EXIT_INVARIANT), text


HANDLERS = {
    "graph": cmd_graph,
    "spectrum": cmd_spectrum,
    "eigenfunction": cmd_eigenfunction,
    "resistance": cmd_resistance,
    "measure": cmd_measure,
    "dimension": cmd_dimension,
    "julia": cmd_julia,
    "check": cmd_check,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file; flags override its values")
    common.add_argument("--output", "-o", help="write to this file instead of stdout")
    common.add_argument("--format", choices=("json", "csv"))
    common.add_argument("--seed", type=int)
    common.add_argument("--level", "-n", type=int)
    common.add_argument("--p", type=float)
    common.add_argument("--q", type=float)
    common.add_argument("--r1", type=float)
    common.add_argument("--scheme", help="dyadic, conformal or a custom scheme JSON file")

    parser = argparse.ArgumentParser(prog="basilica", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("graph", parents=[common], help="emit G_n or G'_n")
    g.add_argument("--directed", action="store_true", help="the A/B sequence G'_n instead of G_n")
    g.add_argument("--layout", action="store_true", help="emit planar vertex coordinates as CSV")

    s = sub.add_parser("spectrum", parents=[common], help="graph or fractal spectra")
    s.add_argument("--mode", choices=("decimation", "graph-directed", "dirichlet"))
    s.add_argument("--normalization", choices=(spectra.PHYSICAL, spectra.GRAPH))
    s.add_argument("--neumann", action="store_true", help="add the unverified Neumann-type candidates")

    e = sub.add_parser("eigenfunction", parents=[common], help="eigenfunction values on V_n")
    e.add_argument("--atom", type=int, required=True, help="index into the spectrum listing")
    e.add_argument("--basis", type=int, default=0, help="which basis vector of the eigenspace")

    r = sub.add_parser("resistance", parents=[common], help="effective resistance and local metric tables")
    r.add_argument("--pairs", help="comma separated x-y vertex pairs")
    r.add_argument("--random", type=int, default=20, help="number of random pairs if --pairs is absent")
    r.add_argument("--edges", action="store_true", help="per-edge resistances instead of pairs")

    m = sub.add_parser("measure", parents=[common], help="per-cell measure tables")
    m.add_argument("--kind", dest="measure", choices=forms.MEASURE_KINDS)

    d = sub.add_parser("dimension", parents=[common], help="Weyl fits and exact spectral dimension")
    d.add_argument("--mode", choices=("decimation", "graph-directed"))
    d.add_argument("--normalization", choices=(spectra.PHYSICAL, spectra.GRAPH))

    j = sub.add_parser("julia", parents=[common], help="backward orbit of a as a point cloud")
    j.add_argument("--depth", type=int)

    c = sub.add_parser("check", parents=[common], help="run every registered invariant")
    c.add_argument("--workers", type=int, default=None, help=f"worker threads (default ${checks.WORKERS_ENV})")
    return parser


def resolve_config(args) -> RunConfig:
    values = load_config(args.config)
    for name in CONFIG_KEYS - {"output"}:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    if args.output is not None:
        values["output"] = args.output
    return replace(RunConfig(), **values).validate()


def run(argv: Sequence[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    try:
        cfg = resolve_config(args)
        code, text = HANDLERS[args.command](cfg, args)
    except CapacityError as exc:
        err.write(f"capacity error: {exc}\n")
        return EXIT_CAPACITY
    except BasilicaError as exc:
        err.write(f"invalid input: {exc}\n")
        return EXIT_VALIDATION
    emit(text, cfg, out)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

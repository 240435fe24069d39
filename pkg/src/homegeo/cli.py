"""``homegeo`` command line: reproducible experiments with JSON reports.

Exit status is 0 when every check passes, 1 when a check fails (the
report is still written) and 2 for usage or configuration errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import catalog, oracles
from .geometry import (SOL3, Isometry, IsometryKind, SpaceId, connection_table, killing_indices)
from .graph import (GraphDomain, SolverOptions, annulus, exact_error, max_residual, solve_minimal_graph,
                    write_graph_csv)
from .maxprinciple import DiscreteSurfaceFunction, discrete_max_principle_check, random_subharmonic_field
from .mesh import write_obj, write_scalar_csv
from .plateau import (MinimizeOptions, RegionSpec, douglas_areas, graphness_check, height_profile,
                      minimize_area_annulus, perturbation_check, ruled_mesh)
from .report import ExperimentReport
from .surfaces import mean_curvature_at
from .sweep import ScanOptions, SweepFamily, crossings_at, reference_patch, sweep_contact

log = logging.getLogger("homegeo")

COMMANDS = ("verify", "mincurv", "solve-graph", "plateau", "sweep", "areas", "maxprinciple")


class UsageError(ValueError):
    pass


# boundary data accepted by solve-graph, with exact minimal solutions where known
BOUNDARY_DATA = {
    "zero": (lambda x1, x2: np.zeros_like(x1), lambda x1, x2: np.zeros_like(x1)),
    "saddle": (lambda x1, x2: x1 * x2 / 2, lambda x1, x2: x1 * x2 / 2),
    "saddle_wave": (lambda x1, x2: x1 * x2 / 2 + 0.3 * np.sin(x1 + x2), None),
}

_SPACE_KINDS = {
    "sol3": [IsometryKind.SOL_TRANSLATE_X1, IsometryKind.SOL_TRANSLATE_X2, IsometryKind.SOL_TC,
             IsometryKind.SOL_SIGMA, IsometryKind.SOL_TAU],
    "nil3": [IsometryKind.NIL_TRANSLATE1, IsometryKind.NIL_TRANSLATE2, IsometryKind.NIL_VERTICAL,
             IsometryKind.NIL_ROTATE, IsometryKind.NIL_REFLECT],
}


def _space(args, config, default: str = "sol3") -> SpaceId:
    name = args.space or config.get("space") or default
    try:
        return SpaceId.parse(name)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _region(args, config, space: SpaceId) -> RegionSpec:
    obj = {"space": str(space), "r": 1.0, "R": 4.0, "eps": 0.1, "h": 1.0 if not space.is_nil else 0.0}
    if space.is_nil:
        obj["r"], obj["R"] = 0.5, 3.0
    obj.update({k: config[k] for k in ("reference", "r", "R", "eps", "h", "graph") if k in config})
    for k in ("r", "R", "eps", "h"):
        v = getattr(args, k, None)
        if v is not None:
            obj[k] = v
    try:
        return RegionSpec.from_json(obj)
    except (ValueError, KeyError) as exc:
        raise UsageError(f"invalid region: {exc}") from None


# ---------------------------------------------------------------------------
# commands

def cmd_verify(args, config, rep: ExperimentReport, out: Path):
    space = _space(args, config)
    suite = args.suite or config.get("suite", "geometry")
    if suite not in ("geometry", "minimality", "all"):
        raise UsageError(f"unknown suite {suite!r}")
    rng = np.random.default_rng(args.seed)
    n = int(config.get("n_points", 100))
    tol = float(config.get("tol", 1e-6))
    if suite in ("geometry", "all"):
        pts = rng.uniform(-1.5, 1.5, size=(n, 3))
        table = connection_table(space)
        err = max(float(np.max(np.abs(oracles.connection_table_fd(space, p) - table))) for p in pts)
        rep.check("connection_table", err <= tol, err, tol)
        err = max(float(np.max(np.abs(oracles.lie_derivative_metric_fd(space, k, p))))
                  for p in pts[:20] for k in killing_indices(space))
        rep.check("killing_fields", err <= tol, err, tol)
        worst = 0.0
        for kind in _SPACE_KINDS[space.space.value]:
            g = Isometry(kind, 0.0 if kind in (IsometryKind.SOL_SIGMA, IsometryKind.SOL_TAU,
                                               IsometryKind.NIL_REFLECT) else 0.7)
            for p in pts[:20]:
                v, w = rng.normal(size=3), rng.normal(size=3)
                worst = max(worst, abs(oracles.pullback_defect(space, g, p, v, w)))
        rep.check("isometries", worst <= tol, worst, tol)
    if suite in ("minimality", "all"):
        _minimality_checks(space, rep, float(config.get("h_tol", 1e-4)))


def _minimality_checks(space: SpaceId, rep: ExperimentReport, h_tol: float):
    for name, S in catalog.minimal_reference_surfaces():
        if SpaceId.parse(name) != space:
            continue
        U, V = S.sample(32)
        H = float(np.max(np.abs(mean_curvature_at(space, S, U, V))))
        rep.check(f"minimal:{S.name}", H <= h_tol, H, h_tol)


def cmd_mincurv(args, config, rep: ExperimentReport, out: Path):
    _minimality_checks(_space(args, config), rep, float(config.get("h_tol", 1e-4)))


def cmd_solve_graph(args, config, rep: ExperimentReport, out: Path):
    space = _space(args, config, "nil3")
    try:
        domain = GraphDomain.from_json(config["domain"]) if "domain" in config else annulus(1.0, 3.0, 64)
        opts = SolverOptions.from_json(config.get("solver"))
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"invalid graph config: {exc}") from None
    bname = config.get("boundary", "saddle")
    if isinstance(bname, (int, float)):
        data, exact = float(bname), (lambda x1, x2, c=float(bname): np.full_like(x1, c))
    elif bname in BOUNDARY_DATA:
        data, exact = BOUNDARY_DATA[bname]
    else:
        raise UsageError(f"unknown boundary data {bname!r}; choose from {sorted(BOUNDARY_DATA)}")
    g = solve_minimal_graph(domain, space, data, opts, init=config.get("init", "harmonic"), seed=args.seed)
    res = max_residual(g)
    rep.check("residual", res <= opts.tol, res, opts.tol)
    if exact is not None:
        tol = float(config.get("exact_tol", 1e-3))
        err = exact_error(g, exact)
        rep.check("exact_error", err <= tol, err, tol)
    rep.artifacts.append(write_graph_csv(out / "graph.csv", g))


def _minimize(spec: RegionSpec, config):
    res_cfg = config.get("resolution", {})
    try:
        opts = MinimizeOptions.from_json(config.get("solver"))
    except (ValueError, TypeError) as exc:
        raise UsageError(f"invalid solver options: {exc}") from None
    return minimize_area_annulus(spec.space, spec=spec, opts=opts, n_theta=int(res_cfg.get("n_theta", 128)),
                                 n_radial=res_cfg.get("n_radial")), opts


def _plateau_checks(spec: RegionSpec, result, opts, rep: ExperimentReport, args, slab_tol: float = 1e-3):
    M = result.mesh
    hv = spec.height(M.vertices)
    rep.check("grad_norm", result.grad_norm <= opts.grad_tol, result.grad_norm, opts.grad_tol)
    rep.check("slab_min", hv.min() >= spec.h - slab_tol, float(hv.min()), spec.h - slab_tol)
    rep.check("slab_max", hv.max() <= spec.h + spec.eps + slab_tol, float(hv.max()), spec.h + spec.eps + slab_tol)
    worst = perturbation_check(spec.space, M, spec=spec, seed=args.seed)
    rep.check("perturbation", worst >= -1e-9, worst, -1e-9)
    gc = graphness_check(spec.space, M, axis=spec.axis, planar=spec.planar)
    rep.check("graphness", gc["is_graph"], gc["min_normal_component"], 0.0)
    rho = math.sqrt(spec.r * spec.R)
    ring = height_profile(spec, M, [rho])[0]
    return {"area": result.area, "grad_norm": result.grad_norm, "slab_min": float(hv.min()),
            "slab_max": float(hv.max()), "inner_gap": float(ring[2] - spec.h), "is_graph": gc["is_graph"],
            "c_star": None, "contact_kind": None, "iterations": result.iterations, "inner_gap_radius": rho}


def _write_mesh_artifacts(spec: RegionSpec, M, rep: ExperimentReport, out: Path, stem: str):
    rep.artifacts.append(write_obj(out / f"{stem}.obj", M))
    radii = np.linspace(spec.r, spec.R, 17)[1:-1]
    prof = height_profile(spec, M, radii)
    path = out / f"{stem}_profile.csv"
    with path.open("w") as fh:
        fh.write("radius,mean_height,min_height,max_height\n")
        for row in prof:
            fh.write(",".join("%.17g" % v for v in row) + "\n")
    rep.artifacts.append(path)
    rep.artifacts.append(write_scalar_csv(out / f"{stem}_height.csv", spec.height(M.vertices)))


def cmd_plateau(args, config, rep: ExperimentReport, out: Path):
    spec = _region(args, config, _space(args, config))
    result, opts = _minimize(spec, config)
    rep.results = _plateau_checks(spec, result, opts, rep, args)
    _write_mesh_artifacts(spec, result.mesh, rep, out, "annulus")


def cmd_sweep(args, config, rep: ExperimentReport, out: Path):
    spec = _region(args, config, _space(args, config))
    sw = dict(config.get("sweep", {}))
    level = float(sw.pop("level", spec.h + spec.eps / 2))
    outer = float(sw.pop("outer", spec.R + 1.0))
    hole = float(sw.pop("hole", 1.2 * spec.r))
    c_max = float(sw.pop("c_max", spec.eps))
    try:
        scan = ScanOptions.from_json(sw)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"invalid sweep options: {exc}") from None
    result, opts = _minimize(spec, config)
    rep.results = _plateau_checks(spec, result, opts, rep, args)
    M = result.mesh
    S = reference_patch(spec, level, outer, hole)
    fam = SweepFamily.from_spec(spec, c_max)
    sr = sweep_contact(spec.space, M, S, fam, scan)
    rep.results.update({"c_star": sr.c_star, "contact_kind": sr.contact_kind.value,
                        "contact_point": sr.contact_point, "saturated": sr.saturated,
                        "boundary_distance": sr.boundary_distance})
    rep.check("contact_not_boundary", sr.contact_kind.value != "Boundary", sr.contact_kind.value, None)
    rep.check("c_star_in_range", sr.c_star is not None and 0 < sr.c_star < c_max, sr.c_star, c_max)
    beyond = [c_max * (1 + k / 4) for k in range(1, 5)]
    hits = sum(len(crossings_at(spec.space, M, S, fam.at(c))) for c in beyond)
    rep.check("no_contact_beyond_range", hits == 0, hits, 0)
    _write_mesh_artifacts(spec, M, rep, out, "annulus")
    rep.artifacts.append(write_obj(out / "test_surface.obj", S))


def cmd_areas(args, config, rep: ExperimentReport, out: Path):
    spec = _region(args, config, _space(args, config))
    d = douglas_areas(spec)
    rep.results = {k: d[k] for k in ("area_lateral", "area_disk_bottom", "area_disk_top", "inequality_holds")}
    rep.check("inequality_holds", d["inequality_holds"], d["area_lateral"] - d["area_disk_bottom"] - d["area_disk_top"], 0.0)
    if spec.space == SOL3:
        exact = math.pi * spec.r**2
        for key in ("area_disk_bottom", "area_disk_top"):
            err = abs(d[key] - exact)
            rep.check(key, err <= 1e-8, d[key], 1e-8)


def cmd_maxprinciple(args, config, rep: ExperimentReport, out: Path):
    spec = _region(args, config, _space(args, config))
    kind = config.get("laplacian", "cotan")
    n_fields = int(config.get("n_fields", 50))
    rng = np.random.default_rng(args.seed)
    M = ruled_mesh(spec, int(config.get("resolution", {}).get("n_theta", 64)))
    worst = -np.inf
    all_ok = True
    for _ in range(n_fields):
        f = random_subharmonic_field(M, rng, kind, spec.space)
        res = discrete_max_principle_check(DiscreteSurfaceFunction(M, f, spec.space), kind)
        all_ok &= res["status"] == "passed"
        worst = max(worst, res["interior_max"] - res["boundary_sup"])
    rep.check("random_subharmonic_fields", all_ok and worst <= 1e-10, worst, 1e-10)
    if config.get("inverse_height", True):
        result, _ = _minimize(spec, config)
        H = spec.height(result.mesh.vertices)
        F = DiscreteSurfaceFunction(result.mesh, 1.0 / H, spec.space)
        res = discrete_max_principle_check(F, config.get("surface_laplacian", "delaunay"))
        gap = res["interior_max"] - res["boundary_sup"]
        rep.check("inverse_height", res["passes"] and gap <= 1e-6, gap, 1e-6)
        rep.results = {"inverse_height_status": res["status"], "min_laplacian": res["min_laplacian"]}


HANDLERS = {"verify": cmd_verify, "mincurv": cmd_mincurv, "solve-graph": cmd_solve_graph,
            "plateau": cmd_plateau, "sweep": cmd_sweep, "areas": cmd_areas, "maxprinciple": cmd_maxprinciple}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment JSON file")
    common.add_argument("--space", choices=["nil3", "sol3", "nil3_y"])
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--out", type=Path, default=Path("homegeo_out"))
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="homegeo", description="Minimal-surface experiments in Nil3 and Sol3.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "verify":
            p.add_argument("--suite", choices=["geometry", "minimality", "all"])
        if name in ("plateau", "sweep", "areas", "maxprinciple"):
            for flag in ("r", "R", "eps", "h"):
                p.add_argument(f"--{flag}", type=float, dest=flag)
    return parser


def run_command(argv) -> tuple[int, ExperimentReport | None]:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0), None
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    out = Path(os.environ.get("HOMEGEO_OUT") or args.out)
    config = {}
    if args.config is not None:
        try:
            config = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"homegeo: cannot read config: {exc}", file=sys.stderr)
            return 2, None
        if not isinstance(config, dict):
            print("homegeo: config must be a JSON object", file=sys.stderr)
            return 2, None
    rep = ExperimentReport(args.command, config)
    out.mkdir(parents=True, exist_ok=True)
    try:
        HANDLERS[args.command](args, config, rep, out)
    except UsageError as exc:
        print(f"homegeo: {exc}", file=sys.stderr)
        return 2, None
    except Exception as exc:  # numerical failure: report it as a failed check
        log.error("%s failed: %s", args.command, exc)
        rep.check("completed", False, f"{type(exc).__name__}: {exc}", None)
    for name in config.get("checks", []):
        if not any(c["name"] == name for c in rep.checks):
            rep.check(name, False, "not run", None)
    path = rep.write(out)
    print(path)
    for c in rep.checks:
        print(f"{'PASS' if c['pass'] else 'FAIL'} {c['name']}: {c['value']}")
    return (0 if rep.passed else 1), rep


def main(argv=None) -> int:
    code, _ = run_command(sys.argv[1:] if argv is None else argv)
    return code


if __name__ == "__main__":
    sys.exit(main())

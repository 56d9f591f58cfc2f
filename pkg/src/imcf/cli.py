"""Command-line driver: ``imcf run | verify | sweep | geometry | chart``."""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import diagnostics as diag
from .chart import conformal_factor, inverse_map, jet
from .config import RunConfig, load_run_config, load_sweep_config
from .errors import AreaLawViolated, ConfigError, GridTooCoarse, ImcfError
from .flow import RunResult, extrapolate_singular_time, run
from .geometry import GraphFunction, geometry_field
from .store import (
    MANIFEST_FILE,
    SNAPSHOT_FILE,
    read_csv_columns,
    read_manifest,
    read_snapshots,
    write_csv,
    write_json_atomic,
    write_snapshots,
)

log = logging.getLogger("imcf")

EXIT_OK = 0
EXIT_CHECKS_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def singular_time(result_snaps, n: int) -> tuple[dict | None, str | None]:
    try:
        est = extrapolate_singular_time([s.t for s in result_snaps], [s.area for s in result_snaps], n)
    except AreaLawViolated as exc:
        return None, str(exc)
    return {
        "t_star": est.t_star, "t_star_fit": est.t_star_fit, "slope": est.slope,
        "area_law_residual": est.area_law_residual, "samples": est.samples,
    }, None


def _export_csv(out: Path, snaps, mode: str, series) -> list[str]:
    coord = "x" if mode == "interval" else "r"
    write_csv(out / "profiles.csv", ["snapshot", "step", "t", coord, "u"], (
        (i, s.step, s.t, float(x), float(v))
        for i, s in enumerate(snaps)
        for x, v in zip(GraphFunction(mode, s.values).nodes, s.values)
    ))
    height = [r.max_residual for r in series["boundary_height_identity"]]
    bh = [r.max_residual for r in series["boundary_H_identity"]]
    a0, t0 = snaps[0].area, snaps[0].t
    write_csv(out / "timeseries.csv", [
        "step", "t", "area", "area_law_ratio", "min_H", "max_H", "min_kappa", "max_kappa",
        "rim_height", "rim_radius", "sup_u_minus_1", "sup_Du",
        "boundary_height_residual", "boundary_H_residual",
    ], (
        (s.step, s.t, s.area, s.area * np.exp(-(s.t - t0)) / a0, s.min_H, s.max_H, s.min_kappa,
         s.max_kappa, s.rim_height, diag.rim_radius(float(s.values[-1])), s.sup_u_minus_1, s.sup_Du,
         height[i], bh[i])
        for i, s in enumerate(snaps)
    ))
    return ["profiles.csv", "timeseries.csv"]


def _export_figures(out: Path, snaps, mode: str, series, t_star) -> list[str]:
    from . import plots

    t = np.array([s.t for s in snaps])
    plots.plot_profiles(snaps, mode, out / "profiles.png")
    plots.plot_timeseries(snaps, out / "timeseries.png", t_star)
    plots.plot_residuals(t, {
        "|w_n - w|": np.array([r.max_residual for r in series["boundary_height_identity"]]),
        "|H_n + H| / H": np.array([r.max_residual for r in series["boundary_H_identity"]]),
        "area law": np.abs(np.array([s.area for s in snaps]) * np.exp(-(t - t[0])) / snaps[0].area - 1.0),
    }, out / "residuals.png", t_warmup=diag.T_WARMUP)
    return ["profiles.png", "timeseries.png", "residuals.png"]


def execute_run(cfg: RunConfig, out: Path) -> tuple[int, dict, RunResult]:
    """Run one configuration and persist everything under ``out``."""
    u0 = cfg.initial_graph()
    out.mkdir(parents=True, exist_ok=True)
    started, wall0 = _now(), time.perf_counter()
    result = run(u0, cfg.policy)
    wall_run = time.perf_counter() - wall0
    snaps = result.snapshots

    index = write_snapshots(out / SNAPSHOT_FILE, snaps)
    series = diag.snapshot_series(snaps, cfg.mode)
    checks = diag.all_checks(snaps, cfg.mode, series=series)
    t_star, t_star_error = singular_time(snaps, cfg.n)

    files = [SNAPSHOT_FILE]
    formats = set(cfg.outputs.formats)
    if "csv" in formats:
        files += _export_csv(out, snaps, cfg.mode, series)
    if "png" in formats:
        files += _export_figures(out, snaps, cfg.mode, series, t_star and t_star["t_star"])

    reason = result.stop_reason
    final = snaps[-1]
    manifest = {
        "config": cfg.as_dict(),
        "code_version": __version__,
        "started": started,
        "finished": _now(),
        "wall_seconds": {"run": wall_run, "total": time.perf_counter() - wall0},
        "stop_reason": reason.value,
        "message": result.message,
        "steps": result.state.steps,
        "t_final": result.state.t,
        "final_metrics": {
            "singular_time": t_star,
            "singular_time_error": t_star_error,
            "area_law_residual": next(c.max_residual for c in checks if c.name == "area_law"),
            "sup_u_minus_1": final.sup_u_minus_1,
            "sup_u_minus_1_target": 0.5,
            "sup_Du": final.sup_Du,
            "rim_height": final.rim_height,
            "min_H": final.min_H,
        },
        "checks": [c.as_dict() for c in checks],
        "all_checks_passed": all(c.passed for c in checks),
        "snapshots": {"file": SNAPSHOT_FILE, "count": len(snaps), "index": index},
        "files": files + [MANIFEST_FILE],
    }
    write_json_atomic(out / MANIFEST_FILE, manifest)
    code = EXIT_NUMERICAL if reason.is_numerical_failure else EXIT_OK
    return code, manifest, result


def cmd_run(args) -> int:
    cfg = load_run_config(args.config)
    out = Path(args.output) if args.output else cfg.output_dir()
    code, manifest, _ = execute_run(cfg, out)
    print(f"stop reason: {manifest['stop_reason']} at t = {manifest['t_final']:.6f} "
          f"after {manifest['steps']} steps")
    st = manifest["final_metrics"]["singular_time"]
    if st is not None:
        print(f"singular time estimate: {st['t_star']:.6f} (fit {st['t_star_fit']:.6f})")
    for c in manifest["checks"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {c['max_residual']:.3e}")
    print(f"manifest: {out / MANIFEST_FILE}")
    return code


def recompute_checks(manifest: dict, base: Path) -> list[dict]:
    mode = manifest["config"]["mode"]
    snaps = read_snapshots(base / manifest["snapshots"]["file"])
    if len(snaps) != manifest["snapshots"]["count"]:
        raise ConfigError("snapshot file does not match the manifest index")
    checks = diag.all_checks(snaps, mode)
    # same JSON normalisation the manifest went through
    return json.loads(json.dumps([c.as_dict() for c in checks]))


def cmd_verify(args) -> int:
    path = Path(args.manifest)
    manifest = read_manifest(path)
    checks = recompute_checks(manifest, path.parent)
    reproduced = checks == manifest["checks"]
    passed = all(c["passed"] for c in checks)
    report = {"manifest": str(path), "reproduces_manifest": reproduced, "all_passed": passed,
              "checks": checks}
    text = json.dumps(report, indent=2)
    if args.report:
        Path(args.report).write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK if (reproduced and passed) else EXIT_CHECKS_FAILED


SWEEP_COLUMNS = [
    "lambda0", "amplitude", "m", "stop_reason", "steps", "t_final", "t_star", "t_star_fit",
    "area_law_residual", "boundary_height_identity", "boundary_H_identity", "all_checks_passed",
]


def cmd_sweep(args) -> int:
    sweep = load_sweep_config(args.config)
    root = Path(sweep.output_dir())
    root.mkdir(parents=True, exist_ok=True)
    rows = []
    worst = EXIT_OK
    for label, cfg in sweep.entries():
        log.info("sweep entry %s", label)
        code, manifest, _ = execute_run(cfg, root / label)
        worst = max(worst, code)
        by_name = {c["name"]: c["max_residual"] for c in manifest["checks"]}
        st = manifest["final_metrics"]["singular_time"] or {}
        rows.append({
            "lambda0": cfg.initial.lambda0, "amplitude": cfg.initial.amplitude, "m": cfg.m,
            "stop_reason": manifest["stop_reason"], "steps": manifest["steps"],
            "t_final": manifest["t_final"], "t_star": st.get("t_star", float("nan")),
            "t_star_fit": st.get("t_star_fit", float("nan")),
            "area_law_residual": by_name["area_law"],
            "boundary_height_identity": by_name["boundary_height_identity"],
            "boundary_H_identity": by_name["boundary_H_identity"],
            "all_checks_passed": manifest["all_checks_passed"],
        })
        print(f"{label}: {manifest['stop_reason']} t = {manifest['t_final']:.5f}")
    write_csv(root / "summary.csv", SWEEP_COLUMNS, ([r[c] for c in SWEEP_COLUMNS] for r in rows))
    if not args.no_figures:
        from . import plots

        plots.plot_convergence(rows, ["area_law_residual", "boundary_height_identity",
                                      "boundary_H_identity"], root / "convergence.png")
    print(f"summary: {root / 'summary.csv'}")
    return worst


def _emit(args, header, rows) -> None:
    if args.out:
        write_csv(args.out, header, rows)
    else:
        import csv

        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([repr(v) if isinstance(v, float) else v for v in r] for r in rows)


def cmd_geometry(args) -> int:
    cols = read_csv_columns(args.profile)
    if "u" not in cols or not ({"r", "x"} & cols.keys()):
        raise ConfigError("profile CSV needs columns (r, u) or (x, u)")
    mode, coord = ("axisymmetric", "r") if "r" in cols else ("interval", "x")
    try:
        u = GraphFunction(mode, cols["u"])
    except GridTooCoarse as exc:
        raise ConfigError(str(exc)) from None
    if not np.allclose(cols[coord], u.nodes, atol=1e-9):
        raise ConfigError(f"{coord} column must be the uniform grid {u.nodes[0]:g}..{u.nodes[-1]:g}")
    geom = geometry_field(u)
    k = geom.kappa.shape[1]
    header = [coord, "u", "w", "H"] + [f"kappa_{i + 1}" for i in range(k)] + ["v", "e_psi"]
    rows = [
        [float(u.nodes[p]), float(u.values[p]), float(geom.w[p]), float(geom.H[p])]
        + [float(geom.kappa[p, i]) for i in range(k)] + [float(geom.v[p]), float(geom.e_psi[p])]
        for p in range(u.m)
    ]
    _emit(args, header, rows)
    return EXIT_OK


def cmd_chart(args) -> int:
    cols = read_csv_columns(args.points)
    if "lam" in cols:
        xs = sorted(k for k in cols if k.startswith("x"))
        if not xs:
            raise ConfigError("forward evaluation needs x1[, x2] columns next to lam")
        x = np.column_stack([cols[k] for k in xs])
        lam = cols["lam"]
        if np.any(np.sum(x * x, axis=1) > 1.0 + 1e-12) or np.any(lam < 1.0):
            raise ConfigError("points must satisfy |x| <= 1 and lam >= 1")
        j = jet(x, lam)
        n = x.shape[1]
        q = [f"q{i}" for i in range(n + 1)]
        header = xs + ["lam"] + q + ["e_psi"] + [f"dq{i}_dlam" for i in range(n + 1)]
        e_psi = conformal_factor(x, lam)
        rows = [list(map(float, x[p])) + [float(lam[p])] + list(map(float, j.f[p])) + [float(e_psi[p])]
                + list(map(float, j.df_dlambda[p])) for p in range(len(lam))]
    elif "q0" in cols:
        qs = sorted(k for k in cols if k.startswith("q"))
        q = np.column_stack([cols[k] for k in qs])
        n = q.shape[1] - 1
        header = qs + [f"x{i + 1}" for i in range(n)] + ["lam"]
        rows = []
        for row in q:
            pt = inverse_map(row)
            rows.append(list(map(float, row)) + list(map(float, pt.x)) + [pt.lam])
    else:
        raise ConfigError("points CSV needs (x1[, x2], lam) for the map or (q0, q1[, q2]) for the inverse")
    _emit(args, header, rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="imcf", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="integrate one configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--output", help="output directory (overrides config and environment)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="recompute all checks from a persisted run")
    p.add_argument("--manifest", required=True)
    p.add_argument("--report", help="also write the JSON report here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="cartesian sweep over lambda0, amplitude and m")
    p.add_argument("--config", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("geometry", help="per-node geometry of a profile CSV")
    p.add_argument("--profile", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_geometry)

    p = sub.add_parser("chart", help="evaluate the chart or its inverse at CSV points")
    p.add_argument("--points", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_chart)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ImcfError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

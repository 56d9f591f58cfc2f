"""Acceptance suite: the ten end-to-end criteria at their stated tolerances.

Each test records one PASS/FAIL line; ``conftest.py`` prints the collected
lines in the terminal summary.  Run with ``-s`` to see them as they happen.
"""

import json
import math
import time

import numpy as np
import pytest

from imcf import cli
from imcf import diagnostics as diag
from imcf.chart import jet, map_point, slice_sphere
from imcf.flow import StopReason, extrapolate_singular_time
from imcf.geometry import dual_path_residual, geometry_field
from imcf.initial_data import cap, perturbed_cap
from imcf.store import write_snapshots

RESULTS: dict[int, str] = {}

T_STAR_N2 = math.log(45 / 32)
L0_N1 = 8 / 3 * math.acos(4 / 5)
T_STAR_N1 = math.log(2 / L0_N1)


def record(number: int, ok: bool, summary: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {summary}"
    RESULTS[number] = line
    print(line)
    assert ok, line


def at_time(snaps, t):
    hits = [s for s in snaps if abs(s.t - t) <= 1e-12]
    assert hits, f"no snapshot recorded at t = {t}"
    return hits[0]


def test_01_chart_exactness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    x = rng.uniform(-1.0, 1.0, size=(1000, 2))
    x /= np.maximum(1.0, np.linalg.norm(x, axis=1))[:, None]
    ident = np.max(np.abs(map_point(x, 1.0)[:, 1:] - x)) + np.max(np.abs(map_point(x, 1.0)[:, 0]))
    phi = rng.uniform(0.0, 2 * np.pi, 1000)
    rim = np.column_stack([np.cos(phi), np.sin(phi)])
    lam = rng.uniform(1.0, 10.0, 1000)
    sphere = np.max(np.abs(np.linalg.norm(map_point(rim, lam), axis=1) - 1.0))
    j = jet(x, rng.uniform(1.0, 10.0, 1000))
    fl = j.df_dlambda
    conf = max(
        np.max(np.abs(np.einsum("pc,pc->p", fl, j.df_dx[:, i]))
               / (np.linalg.norm(fl, axis=1) * np.linalg.norm(j.df_dx[:, i], axis=1)))
        for i in range(2)
    )
    slice_res = 0.0
    for lam0 in (1.1, 2.0, 5.0):
        sph = slice_sphere(lam0)
        d = np.linalg.norm(map_point(x, lam0) - [sph.center_height, 0.0, 0.0], axis=1)
        slice_res = max(slice_res, np.max(np.abs(d - sph.radius)))
    dt = time.perf_counter() - t0
    ok = ident <= 1e-15 and sphere <= 1e-12 and conf <= 1e-10 and slice_res <= 1e-12 and dt < 1.0
    record(1, ok, f"identity {ident:.1e}, ||f|-1| {sphere:.1e}, conformality {conf:.1e}, "
                  f"slice sphere {slice_res:.1e}, {dt:.2f} s")


def test_02_umbilic_oracle():
    t0 = time.perf_counter()
    worst_k = worst_dual = 0.0
    for mode in ("interval", "axisymmetric"):
        for lam in (1.5, 2.0, 4.0):
            u = cap(lam, 401, mode)
            geom = geometry_field(u)
            worst_k = max(worst_k, np.max(np.abs(geom.kappa - (lam * lam - 1) / (2 * lam))))
            worst_dual = max(worst_dual, np.max(dual_path_residual(u, geom)))
    dt = time.perf_counter() - t0
    ok = worst_k <= 1e-6 and worst_dual <= 1e-6 and dt < 5.0
    record(2, ok, f"max |kappa - k(lambda0)| {worst_k:.1e}, dual path {worst_dual:.1e}, {dt:.2f} s")


@pytest.mark.parametrize("n", [2, 1])
def test_03_singular_time(n, cap_run_n2, cap_run_n1):
    runs = {2: (cap_run_n2, T_STAR_N2), 1: (cap_run_n1, T_STAR_N1)}
    r, target = runs[n]
    snaps = r.snapshots
    area_law = diag.check_area_law(snaps)
    est = extrapolate_singular_time([s.t for s in snaps], [s.area for s in snaps], n)
    err = abs(est.t_star - target) / target
    err_fit = abs(est.t_star_fit - target) / target
    ok = (r.result.stop_reason == StopReason.H_FLOOR_REACHED and area_law.max_residual <= 0.01
          and err <= 0.05 and err_fit <= 0.05 and r.seconds < 120.0)
    line = (f"n={n} T* {est.t_star:.5f} (fit {est.t_star_fit:.5f}, target {target:.5f}, "
            f"rel err {max(err, err_fit):.1e}), reached t {r.result.state.t:.5f}, "
            f"area law {area_law.max_residual:.1e}, {r.seconds:.1f} s")
    RESULTS.setdefault(3, "")
    part = f"{'PASS' if ok else 'FAIL'} criterion  3: {line}"
    RESULTS[3] = (RESULTS[3] + "\n" + part).strip() if n == 1 else part
    print(part)
    assert ok, part


def test_04_curvature_bounds(cap_run_n2, cap_run_n1):
    res = [diag.check_kappa_H_bounds(r.snapshots) for r in (cap_run_n2, cap_run_n1)]
    ok = all(c.passed for c in res)
    record(4, ok, "relative excess over max H(0): "
                  + ", ".join(f"n={n} kappa {c.details['kappa_excess']:+.1e} H {c.details['H_excess']:+.1e}"
                              for n, c in zip((2, 1), res)))


def test_05_convexity(cap_run_n2, cap_run_n1, perturbed_run):
    runs = {"cap n=2": cap_run_n2, "cap n=1": cap_run_n1, "perturbed": perturbed_run}
    parts, ok = [], True
    for name, r in runs.items():
        c = diag.check_convexity(r.snapshots)
        stop = r.result.stop_reason
        ok &= c.passed and stop != StopReason.CONVEXITY_LOST
        parts.append(f"{name} min kappa {c.details['min_kappa']:.3f} ({stop.value})")
    record(5, ok, "; ".join(parts))


def test_06_static_boundary_identity():
    cap_res = diag.check_boundary_height_identity(cap(2.0, 401)).max_residual
    pert = [diag.check_boundary_height_identity(perturbed_cap(2.0, 0.2, m)).max_residual for m in (401, 801)]
    ratio = pert[0] / pert[1]
    ok = cap_res <= 1e-4 and pert[0] <= 1e-4 and ratio >= 3.0
    record(6, ok, f"|w_n - w| cap {cap_res:.1e}, perturbed {pert[0]:.1e} (m=401) "
                  f"{pert[1]:.1e} (m=801), ratio {ratio:.1f}")


def test_07_emergent_boundary_identity(perturbed_run, perturbed_run_fine):
    def res(snaps, t):
        return float(np.max(diag.boundary_H_residual(at_time(snaps, t).graph("axisymmetric"))))

    early = res(perturbed_run.snapshots, 0.02)
    late = res(perturbed_run.snapshots, 0.1)
    fine = res(perturbed_run_fine.snapshots, 0.1)
    ok = late <= 0.1 and late < early and fine < late
    record(7, ok, f"|H_n + H|/H at m=401: t=0.02 {early:.3f}, t=0.1 {late:.4f}; m=801 t=0.1 {fine:.4f}")


def test_08_sign_suite(cap_run_n2, cap_run_n1):
    total, count = 0, 0
    for r, mode in ((cap_run_n2, "axisymmetric"), (cap_run_n1, "interval")):
        for s in r.snapshots:
            total += diag.check_sign_conditions(s.graph(mode)).max_residual
            count += 1
    record(8, total == 0, f"{int(total)} violations over {count} snapshots of both runs")


def test_09_monotone_flattening(cap_run_n2, cap_run_n1):
    parts, ok = [], True
    for n, r in ((2, cap_run_n2), (1, cap_run_n1)):
        snaps = r.snapshots
        dec = diag.check_pointwise_decrease(snaps)
        rim = diag.check_boundary_monotone(snaps)
        flat = diag.check_flattening(snaps)
        starts = abs(snaps[0].rim_height - 0.6) <= 1e-12
        ok &= dec.passed and rim.passed and flat.passed and starts
        parts.append(f"n={n} rim {snaps[0].rim_height:.2f}->{snaps[-1].rim_height:.3f}, "
                     f"sup(u-1) {flat.details['initial_sup_u_minus_1']:.2f}->"
                     f"{flat.details['final_sup_u_minus_1']:.3f}, tail increase {flat.max_residual:.1e}")
    record(9, ok, "; ".join(parts))


def test_10_determinism_and_round_trip(cap_run_n2, tmp_path):
    cfg = {"n": 2, "m": 401, "initial": {"kind": "cap", "lambda0": 2.0}, "policy": {"eps_H": 0.05},
           "outputs": {"directory": str(tmp_path / "out"), "formats": ["jsonl"]}}
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    code = cli.main(["run", "--config", str(tmp_path / "cfg.json")])
    write_snapshots(tmp_path / "reference.jsonl", cap_run_n2.snapshots)
    identical = (tmp_path / "out" / "snapshots.jsonl").read_bytes() == (tmp_path / "reference.jsonl").read_bytes()
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    report = tmp_path / "verify.json"
    vcode = cli.main(["verify", "--manifest", str(tmp_path / "out" / "manifest.json"), "--report", str(report)])
    rep = json.loads(report.read_text())
    t_star = manifest["final_metrics"]["singular_time"]["t_star"]
    ok = code == 0 and identical and rep["reproduces_manifest"] and vcode == 0 and abs(t_star - 0.341) < 0.005
    record(10, ok, f"rerun bit-identical {identical}, verify reproduces {rep['reproduces_manifest']} "
                   f"(exit {vcode}), manifest T* {t_star:.4f}")

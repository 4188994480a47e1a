"""Batch front-end: refinement studies and the machine-precision self-test.

``hho-wave`` runs a convergence study over a sequence of uniformly refined
structured meshes and writes a CSV report plus a JSON mirror (config echo +
environment stamp).  Exit codes: 0 success, 1 invalid configuration, 2 rate
assertion failed (``--assert-rates``), 3 numerical fault during a solve.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
from dataclasses import asdict, dataclass, replace

import numpy as np
import scipy

from . import __version__
from .basis_quad import build_workspaces, n_poly
from .errors import (
    ConvergenceReport,
    ConvergenceRow,
    energy_error,
    stabilization_seminorm,
    standing_wave,
    superconvergent_error,
)
from .h_interp import h_interpolate
from .local_ops import build_packs, stability_equivalence_check
from .mesh import build_structured
from .semidisc import WaveOperator, assemble
from .timeint import choose_dt, run

CSV_SCHEMA_VERSION = 1
VARIANTS = ("equal", "mixed")
IC_MODES = ("h-interp", "l2")


@dataclass
class StudyConfig:
    degree: int = 1
    variant: str = "equal"
    mesh: int = 4  # base structured mesh resolution
    refinements: int = 3  # number of levels (base included)
    scheme: str = "midpoint"
    tfinal: float = 1.0
    ic: str = "h-interp"
    out: str = "study"
    assert_rates: bool = False
    jobs: int = 1

    def validate(self):
        if not (0 <= self.degree <= 3):
            raise ValueError(f"degree must be in 0..3, got {self.degree}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.scheme not in ("rk4", "midpoint"):
            raise ValueError(f"scheme must be rk4 or midpoint, got {self.scheme!r}")
        if self.ic not in IC_MODES:
            raise ValueError(f"ic must be one of {IC_MODES}, got {self.ic!r}")
        if self.mesh < 1:
            raise ValueError("mesh resolution must be >= 1")
        if self.refinements < 1:
            raise ValueError("refinement count must be >= 1")
        if self.tfinal <= 0:
            raise ValueError("tfinal must be positive")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")


def build_operator(n: int, degree: int, variant: str) -> WaveOperator:
    """Structured unit-square mesh -> assembled operator for one level."""
    mesh = build_structured(n)
    kp = degree if variant == "equal" else degree + 1
    workspaces = build_workspaces(mesh, degree, kp)
    packs = build_packs(workspaces, variant, mesh.domain_diameter)
    return assemble(mesh, packs, workspaces)


def run_study(config: StudyConfig) -> ConvergenceReport:
    """Standing-wave refinement sweep; returns the filled report."""
    config.validate()
    prob = standing_wave()
    report = ConvergenceReport(
        variant=config.variant,
        degree=config.degree,
        scheme=config.scheme,
        t_final=config.tfinal,
        ic_mode=config.ic,
    )
    for level in range(config.refinements):
        n = config.mesh * (2**level)
        op = build_operator(n, config.degree, config.variant)
        tlc = choose_dt(op, config.scheme, config.tfinal)
        result = run(op, tlc, prob.sigma0, prob.v0, f=prob.f, ic_mode=config.ic)
        es, ev = energy_error(op, result.state, prob, config.tfinal)
        ei, ei_plain = superconvergent_error(op, result, prob, op.workspaces)
        report.rows.append(
            ConvergenceRow(
                h=op.mesh.h,
                dofs=op.n_state + op.n_vface,
                err_sigma=es,
                err_v=ev,
                stab_seminorm=stabilization_seminorm(op, result.state),
                err_int_v=ei,
                err_int_v_plain=ei_plain,
            )
        )
    return report


def check_rates(report: ConvergenceReport) -> list[str]:
    """Rate assertions on the finest pair; returns a list of failure messages."""
    k = report.degree
    if len(report.rows) < 2:
        return ["need at least two levels to assert rates"]
    eoc = report.eoc()
    failures = []
    for col, target in (
        ("err_sigma", k + 1 - 0.2),
        ("err_v", k + 1 - 0.2),
        ("err_int_v", k + 2 - 0.2),
    ):
        got = eoc[col][-1]
        if not (got >= target):
            failures.append(f"{col}: EOC {got:.3f} below target {target:.3f}")
    return failures


def write_reports(report: ConvergenceReport, config: StudyConfig):
    """CSV (fixed column order, 16 significant digits) + JSON mirror."""
    eoc = report.eoc()
    cols = list(ConvergenceReport.COLUMNS)
    header = ["schema_version", "h", "dofs"] + cols + [f"eoc_{c}" for c in cols]
    lines = [",".join(header)]
    for i, row in enumerate(report.rows):
        vals = [str(CSV_SCHEMA_VERSION), f"{row.h:.15e}", str(row.dofs)]
        vals += [f"{getattr(row, c):.15e}" for c in cols]
        vals += ["" if i == 0 else f"{eoc[c][i - 1]:.15e}" for c in cols]
        lines.append(",".join(vals))
    csv_path = config.out + ".csv"
    json_path = config.out + ".json"
    with open(csv_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    doc = {
        "schema_version": CSV_SCHEMA_VERSION,
        "config": asdict(config),
        "environment": {
            "package_version": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "platform": platform.platform(),
        },
        "report": {
            "variant": report.variant,
            "degree": report.degree,
            "scheme": report.scheme,
            "t_final": report.t_final,
            "ic_mode": report.ic_mode,
            "rows": [asdict(r) for r in report.rows],
            "eoc": eoc,
        },
    }
    with open(json_path, "w") as fh:
        json.dump(doc, fh, indent=2)
    return csv_path, json_path


# -- self-test -----------------------------------------------------------


def _random_polynomial_trace_state(op: WaveOperator, pack, ws, rng):
    """Hybrid coefficients of a random P^{k'} polynomial and its face traces."""
    Nkp = n_poly(op.kp)
    coeff = rng.standard_normal(Nkp)
    nfd = op.k + 1
    x = np.empty(pack.ncols)
    x[:Nkp] = coeff
    for local in range(3):
        fb = ws.faces[local]
        fv = ws.face_cell_vals[local][:, :Nkp] @ coeff  # trace at face quad points
        x[Nkp + local * nfd : Nkp + (local + 1) * nfd] = fb.values.T @ (
            fb.quad_weights * fv
        )
    return x


def run_selftest(verbose: bool = True) -> bool:
    """Machine-precision identity suite on small meshes, k in {0,1,2}, both variants."""
    rng = np.random.default_rng(3)
    ok = True

    def report(name, value, tol):
        nonlocal ok
        good = value <= tol
        ok = ok and good
        if verbose:
            print(f"  {'PASS' if good else 'FAIL'} {name}: {value:.3e} (tol {tol:.0e})")
        return good

    for variant in VARIANTS:
        for k in range(3):
            if verbose:
                print(f"[{variant} k={k}]")
            op = build_operator(2, k, variant)
            # stabilization vanishes on cell/trace pairs of P^{k'} polynomials
            worst = 0.0
            for pack, ws in zip(op.packs, op.workspaces):
                for _ in range(4):
                    x = _random_polynomial_trace_state(op, pack, ws, rng)
                    worst = max(worst, float(np.abs(pack.S @ x).max()))
            report("stabilization identity on polynomials", worst, 1e-12)

            # skew-adjointness of the reconstruction coupling
            y1 = rng.standard_normal(op.n_sigma)
            x1 = rng.standard_normal(op.n_vcell + op.n_vface)
            lhs = float(y1 @ (op.A_cell @ x1[: op.n_vcell] + op.A_face @ x1[op.n_vcell :]))
            rhs = float(
                np.concatenate([op.A_cell.T @ y1, op.A_face.T @ y1]) @ x1
            )
            report("transpose consistency", abs(lhs - rhs) / max(1.0, abs(lhs)), 1e-12)

            # interpolation reproduces polynomials exactly
            def psig(p):
                return np.stack([p[:, 0] ** k, (p[:, 0] + p[:, 1]) ** k], axis=1)

            def pv(p):
                return (p[:, 0] - 0.3 * p[:, 1]) ** op.kp

            worst = 0.0
            for pack, ws in zip(op.packs, op.workspaces):
                hi = h_interpolate(pack, ws, psig, pv)
                ps = ws.project_cell(psig, op.k)
                pvv = ws.project_cell(pv, op.kp)
                worst = max(
                    worst,
                    float(np.abs(hi.sigma - ps).max()),
                    float(np.abs(hi.vee - pvv).max()),
                )
            report("interpolation polynomial reproduction", worst, 1e-11)

            # face equation + flux transmission on an interpolated smooth state
            y = op.initial_state(
                lambda p: np.stack(
                    [np.cos(p[:, 0] + p[:, 1]), np.sin(p[:, 0] - p[:, 1])], axis=1
                ),
                lambda p: np.sin(p[:, 0]) * np.sin(p[:, 1]),
            )
            sigma, vcell = op.split(y)
            vface = op.solve_faces(sigma, vcell)
            report("face equation residual", op.face_residual(sigma, vcell, vface), 1e-11)
            report(
                "flux transmission residual",
                op.transmission_residual(op.field(y, vface)),
                1e-10,
            )

            # stability-equivalence ratios stay positive and finite
            rmin, rmax = stability_equivalence_check(op.packs[0])
            report("stability equivalence (1/ratio spread)", 0.0 if 0 < rmin <= rmax < np.inf else 1.0, 0.5)
    if verbose:
        print("self-test:", "PASS" if ok else "FAIL")
    return ok


# -- entry point ---------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hho-wave",
        description="Hybrid wave-equation convergence studies (structured unit square).",
    )
    p.add_argument("--config", help="JSON config file; flags override its entries")
    p.add_argument("--degree", type=int, help="face polynomial degree k (0-3)")
    p.add_argument("--variant", help="equal (cell degree k) or mixed (cell degree k+1)")
    p.add_argument("--mesh", type=int, help="base structured mesh resolution n")
    p.add_argument("--refinements", type=int, help="number of levels (halving h each)")
    p.add_argument("--scheme", help="time stepper: rk4 or midpoint")
    p.add_argument("--tfinal", type=float, help="final time")
    p.add_argument("--ic", help="initial-condition mode: h-interp or l2")
    p.add_argument("--out", help="output path stem (writes OUT.csv and OUT.json)")
    p.add_argument("--assert-rates", action="store_true", default=None,
                   help="exit 2 unless the finest-pair EOCs meet their targets")
    p.add_argument("--selftest", action="store_true",
                   help="run the machine-precision identity suite and exit")
    p.add_argument("--jobs", type=int,
                   help="worker cap (default: HHO_WAVE_JOBS or 1)")
    return p


def _merge_config(args: argparse.Namespace) -> StudyConfig:
    cfg = StudyConfig()
    if args.config:
        with open(args.config) as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - set(asdict(cfg))
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = replace(cfg, **file_cfg)
    if args.jobs is None and "HHO_WAVE_JOBS" in os.environ:
        cfg = replace(cfg, jobs=int(os.environ["HHO_WAVE_JOBS"]))
    for name in ("degree", "variant", "mesh", "refinements", "scheme",
                 "tfinal", "ic", "out", "assert_rates", "jobs"):
        val = getattr(args, name)
        if val is not None:
            cfg = replace(cfg, **{name: val})
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.selftest:
        return 0 if run_selftest() else 1
    try:
        config = _merge_config(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        report = run_study(config)
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical fault: {exc}", file=sys.stderr)
        return 3
    csv_path, json_path = write_reports(report, config)
    print(f"wrote {csv_path} and {json_path}")
    eoc = report.eoc()
    if len(report.rows) >= 2:
        summary = ", ".join(f"{c}={eoc[c][-1]:.2f}" for c in ("err_sigma", "err_v", "err_int_v"))
        print(f"finest-pair EOC: {summary}")
    if config.assert_rates:
        failures = check_rates(report)
        if failures:
            for msg in failures:
                print(f"rate assertion failed: {msg}", file=sys.stderr)
            return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

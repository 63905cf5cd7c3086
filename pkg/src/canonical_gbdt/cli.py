"""Command line front end.

Exit codes: 0 every check passed, 1 a verification failed (or the numerics
refused the input), 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .core import (
    J_BASE, GbdtTriple, HamiltonianField, ResidualReport, check_structure, matrix_from_json,
    vector_from_json, complex_to_json,
)
from .config import ConfigError, FamilySpec, TabulatedH, load_config
from .engine import evolve_triple, gauge_w0, transformed_hamiltonian
from .exceptions import GbdtError, IdentityViolationError, IntervalError, SingularityError
from .explicit import (
    BASE, ExplicitFamilyParams, explicit_transformed_hamiltonian, explicit_transformed_jump,
    explicit_triple, hamiltonian_field, tilde_U,
)
from .inverse import InnerRealization, build_gbdt_data, reconstruct_u, recover_hamiltonian_and_jump
from .rh import compute_jump, verify_jump

log = logging.getLogger("canonical_gbdt")


class _Failed(Exception):
    """A check failed; carries the partial report."""


def _family(spec: FamilySpec, U=None):
    d = spec.model_dump(exclude_none=True)
    if U is not None:
        d["U"] = U
    return ExplicitFamilyParams.from_dict(d)


def _hamiltonian(spec, l):
    if spec == "base-rank-one":
        return HamiltonianField.base(l)
    assert isinstance(spec, TabulatedH)
    return HamiltonianField.tabulated(spec.grid, [matrix_from_json(v) for v in spec.values])


def _initial(cfg):
    if cfg.family is not None:
        p = _family(cfg.family, cfg.U)
        return explicit_triple(p, 0.0), p
    t = cfg.triple
    return GbdtTriple(matrix_from_json(t.A), matrix_from_json(t.S), matrix_from_json(t.Pi)), None


def _grid(cfg, args):
    n = args.grid_points or cfg.grid_points
    return np.linspace(0.0, cfg.l, n)


def _U(cfg, p):
    if p is not None:
        return p.U
    return None if cfg.U is None else matrix_from_json(cfg.U)


def cmd_verify_identity(cfg, args, scale):
    tol = cfg.tolerance * scale
    init, p = _initial(cfg)
    H = _hamiltonian(cfg.hamiltonian, cfg.l)
    grid = _grid(cfg, args)
    checks = []
    try:
        traj = evolve_triple(init, H, J_BASE, grid, tol=cfg.integrator_tol)
    except IdentityViolationError as exc:
        checks.append(ResidualReport.from_values("material_identity", [0.0], [exc.residual], tol))
        raise _Failed(checks, str(exc)) from exc
    checks.append(traj.identity_report(tol))
    checks.append(traj.hermitian_report(1e-10 * scale))
    gauge = gauge_w0(traj, _U(cfg, p))
    checks.append(gauge.j_unitarity(cfg.j_tolerance * scale))
    return checks, {"trajectory": traj.to_dict()}


def _hamiltonian_rows(grid, values, tol):
    rows = []
    for x, M in zip(grid, values):
        flag = (check_structure(M, "hermitian").max < tol
                and check_structure(M, "positive").max < tol)
        rows.append((x, M, flag))
    return rows


def cmd_transform(cfg, args, scale):
    tol = cfg.tolerance * scale
    init, p = _initial(cfg)
    H = _hamiltonian(cfg.hamiltonian, cfg.l)
    grid = _grid(cfg, args)
    try:
        if cfg.route == "explicit":
            if p is None:
                raise ConfigError("route 'explicit' needs a 'family' block")
            U_t = tilde_U(p)
            values = np.array([explicit_transformed_hamiltonian(p, x, U_t) for x in grid])
        else:
            traj = evolve_triple(init, H, J_BASE, grid, tol=cfg.integrator_tol)
            Ht = transformed_hamiltonian(gauge_w0(traj, _U(cfg, p)), H)
            values = Ht.values
    except SingularityError as exc:
        largest = 0.0 if exc.x is None else float(grid[max(0, np.searchsorted(grid, exc.x) - 1)])
        err = IntervalError(f"{exc}; largest admissible l = {largest:g}", largest_l=largest)
        raise _Failed([], f"IntervalError: {err}", {"largest_admissible_l": largest}) from exc
    rows = _hamiltonian_rows(grid, values, tol)
    herm = [check_structure(M, "hermitian").max for M in values]
    pos = [check_structure(M, "positive").max for M in values]
    nil = [float(np.linalg.norm(M @ J_BASE @ M)) for M in values]
    checks = [ResidualReport.from_values("H_tilde_hermitian", grid, herm, tol),
              ResidualReport.from_values("H_tilde_positive", grid, pos, tol),
              ResidualReport.from_values("H_tilde_nilpotent", grid, nil, tol)]
    if args.out is not None:
        with open(Path(args.out) / "hamiltonian.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            head = ["x"]
            for a in (1, 2):
                for b in (1, 2):
                    head += [f"H{a}{b}_re", f"H{a}{b}_im"]
            w.writerow(head + ["hermitian_psd"])
            for x, M, flag in rows:
                w.writerow([repr(float(x))] + [repr(float(f(v))) for v in M.ravel()
                                               for f in (np.real, np.imag)] + [str(flag).lower()])
    samples = [{"x": float(x), "H_tilde": [[complex_to_json(v) for v in r] for r in M],
                "hermitian_psd": flag} for x, M, flag in rows]
    return checks, {"samples": samples}


def cmd_jump(cfg, args, scale):
    if cfg.family is not None:
        p = _family(cfg.family)
        H = hamiltonian_field(p)
        R = (lambda s: explicit_transformed_jump(p, s))
        default_tol = 1e-4
    else:
        H = HamiltonianField.base(cfg.l)
        R = (lambda s: BASE.R)
        default_tol = 1e-5
    if cfg.jump_matrix == "identity":
        R = (lambda s: np.eye(2))
    tol = (cfg.tolerance or default_tol) * scale
    jump = compute_jump(H, J_BASE, cfg.s_grid, R, cfg.eta)
    report = verify_jump(jump, tol)
    if args.out is not None:
        jump.write_csv(Path(args.out) / "jump.csv", report)
        jump.write_json(Path(args.out) / "jump.json", report)
    return [report], {"extrapolation_error": [float(e) for e in jump.extrapolation_error]}


def _recover(cfg):
    real = InnerRealization.from_dict(cfg.realization.model_dump(exclude_none=True))
    theta2 = None if cfg.theta2 is None else vector_from_json(cfg.theta2)
    data = build_gbdt_data(real, theta2)
    U = None if cfg.U is None else matrix_from_json(cfg.U)
    rec = recover_hamiltonian_and_jump(data, real, U, cfg.l)
    return real, data, rec


def cmd_invert(cfg, args, scale):
    real, data, rec = _recover(cfg)
    s = cfg.s_samples
    err = [abs(reconstruct_u(data.triple, J_BASE, data.B, data.g, x) - real.u(x)) for x in s]
    modulus = [abs(abs(real.u(x)) - 1) for x in s]
    checks = [
        ResidualReport.from_values("realization_identity", [0.0], [real.identity_residual()],
                                   1e-10 * scale),
        ResidualReport.from_values("inner_modulus", s, modulus, 1e-8 * scale),
        data.identity,
        ResidualReport.from_values("u_roundtrip", s, err, cfg.tolerance * scale),
    ]
    extra = {"recovery": rec.to_dict(), "realization": real.to_dict(),
             "u_reconstructed": [complex_to_json(reconstruct_u(data.triple, J_BASE, data.B,
                                                               data.g, x)) for x in s]}
    return checks, extra


def cmd_roundtrip(cfg, args, scale):
    checks, extra = cmd_invert(cfg, args, scale)
    _, _, rec = _recover(cfg)
    jump = compute_jump(rec.H_tilde, J_BASE, cfg.s_grid, rec.R_tilde, cfg.eta)
    report = verify_jump(jump, cfg.jump_tolerance * scale)
    checks.append(report)
    if args.out is not None:
        jump.write_csv(Path(args.out) / "jump.csv", report)
    return checks, extra


COMMANDS = {
    "verify-identity": cmd_verify_identity,
    "transform": cmd_transform,
    "jump": cmd_jump,
    "invert": cmd_invert,
    "roundtrip": cmd_roundtrip,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="gbdt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON scenario file")
        p.add_argument("--out", default=None, help="directory for reports and tables")
        p.add_argument("--tolerance-scale", type=float, default=1.0)
        p.add_argument("--grid-points", type=int, default=None)
        p.add_argument("--quiet", action="store_true")
    return parser


def _write_report(args, report):
    if args.out is None:
        return
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)


def main(argv=None):
    logging.basicConfig(level=os.environ.get("GBDT_LOG", "error").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    if args.tolerance_scale <= 0 or (args.grid_points is not None and args.grid_points < 2):
        print("error: --tolerance-scale must be positive and --grid-points >= 2", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.command, args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.out is not None:
        Path(args.out).mkdir(parents=True, exist_ok=True)

    report = {"command": args.command, "config": cfg.model_dump(mode="json"),
              "tolerance_scale": args.tolerance_scale}
    try:
        checks, extra = COMMANDS[args.command](cfg, args, args.tolerance_scale)
        report.update(extra)
        error = None
    except _Failed as exc:
        checks = exc.args[0]
        error = exc.args[1]
        if len(exc.args) > 2:
            report.update(exc.args[2])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (GbdtError, ValueError) as exc:
        checks, error = [], f"{type(exc).__name__}: {exc}"
    log.info("command %s finished with %d checks", args.command, len(checks))

    report["checks"] = [c.to_dict() for c in checks]
    report["effective_tolerances"] = {c.name: c.tol for c in checks}
    passed = error is None and all(c.passed for c in checks)
    report["pass"] = passed
    if error is not None:
        report["error"] = error
    _write_report(args, report)
    if not args.quiet:
        for c in checks:
            print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: max={c.max:.3e} tol={c.tol:.1e}")
        if error is not None:
            print(f"FAIL {error}")
    return 0 if passed else 1


if __name__ == "__main__":
    sys.exit(main())

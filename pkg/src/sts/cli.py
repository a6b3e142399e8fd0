"""The ``sts`` command line tool.

Dispatches spectral pipelines, Monte-Carlo cross-checks, the dynamo
study, and parameter sweeps, and writes deterministic JSON/CSV reports.

Exit codes: 0 success, 2 configuration error, 3 numerical
non-convergence, 4 failed physics check.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import sde, spectral
from .config import (
    ConfigError,
    build_flow,
    build_model,
    build_noise,
    build_potential,
    build_tolerances,
    parse_config,
)
from .layout import BasisLayout, FormVector
from .operators import (
    SdeModel,
    kd_operator,
    langevin_hermitian_blocks,
    seo_alpha,
)
from .report import ReportDocument, write_eigenvalue_csv, write_table_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGED = 3
EXIT_CHECK_FAILED = 4

_WITTEN_BOUND = 1e-6


def _threads():
    return max(1, int(os.environ.get("STS_THREADS", "1")))


def _seo_builder(config):
    def build(layout):
        return seo_alpha(
            SdeModel(
                layout, build_flow(config), build_noise(config),
                config.theta, config.alpha,
            )
        )
    return build


def _kd_builder(config):
    flow = build_flow(config)

    def build(layout):
        return kd_operator(flow, config.theta, layout)
    return build


def run_pipeline(config, check_convergence=True, dynamo=False):
    """Assemble, eigensolve and post-process one operator family."""
    tol = build_tolerances(config)
    if dynamo:
        if config.dimension != 3:
            raise ConfigError("the dynamo pipeline requires dimension 3")
        builder = _kd_builder(config)
    else:
        builder = _seo_builder(config)
    blocks = builder(BasisLayout(config.dimension, config.truncation))
    vectors = config.dimension <= 2
    rep = spectral.analyze(
        blocks,
        builder=builder if check_convergence else None,
        tol=tol,
        t_grid=config.t_grid,
        vectors=vectors,
    )
    if config.theta == 0 and not check_convergence:
        # deterministic-limit spectra may be defective; refuse to certify
        rep.classification = spectral.INDETERMINATE
    return blocks, rep


def _base_outputs(config, rep, out_dir, extra_payload=None, checks=None):
    payload = rep.to_dict()
    if extra_payload:
        payload.update(extra_payload)
    doc = ReportDocument(config.to_dict(), payload, checks or {})
    write_eigenvalue_csv(Path(out_dir) / "eigenvalues.csv", payload["spectra"])
    rows = [
        (t, w[0], w[1], z[0], z[1])
        for t, w, z in zip(
            payload["witten"]["t"], payload["witten"]["w"],
            payload["partition"]["z"],
        )
    ]
    write_table_csv(
        Path(out_dir) / "traces.csv", ["t", "w_re", "w_im", "z_re", "z_im"], rows
    )
    return doc


def cmd_spectrum(config, args, out_dir):
    _, rep = run_pipeline(config, args.check_convergence)
    ok = rep.classification != spectral.INDETERMINATE
    doc = _base_outputs(config, rep, out_dir, checks={"converged": ok})
    return doc, EXIT_OK if ok else EXIT_NONCONVERGED


def cmd_classify(config, args, out_dir):
    return cmd_spectrum(config, args, out_dir)


def cmd_witten(config, args, out_dir):
    _, rep = run_pipeline(config, args.check_convergence)
    worst = max(abs(complex(*w)) for w in
                [(v.real, v.imag) for v in rep.witten_samples])
    ok = worst <= _WITTEN_BOUND
    doc = _base_outputs(
        config, rep, out_dir,
        extra_payload={"witten_max_abs": worst},
        checks={"witten_zero": ok},
    )
    return doc, EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_pair(config, args, out_dir):
    blocks, rep = run_pipeline(config, args.check_convergence)
    tol = build_tolerances(config)
    if rep.pairing is not None:
        ok = (
            not rep.pairing["violations"]
            and rep.pairing["even_odd_distance"] <= tol.tol_pair
        )
        detail = {
            "pairs": len(rep.pairing["partners"]),
            "violations": len(rep.pairing["violations"]),
            "even_odd_distance": rep.pairing["even_odd_distance"],
        }
    else:
        # vectorless path (3-D): only the even/odd multiset comparison
        thr = spectral.zero_threshold(rep.systems, tol)
        even = np.concatenate([
            s.eigenvalues[np.abs(s.eigenvalues) > thr]
            for s in rep.systems if s.degree % 2 == 0])
        odd = np.concatenate([
            s.eigenvalues[np.abs(s.eigenvalues) > thr]
            for s in rep.systems if s.degree % 2 == 1])
        dist = spectral.hausdorff_distance(even, odd)
        ok = dist <= tol.tol_pair
        detail = {"pairs": None, "violations": None, "even_odd_distance": dist}
    doc = _base_outputs(config, rep, out_dir,
                        extra_payload={"pairing_detail": detail},
                        checks={"pairing": ok})
    return doc, EXIT_OK if ok else EXIT_CHECK_FAILED


def _uniform_density(layout):
    D = layout.dimension
    psi = FormVector.zero(D, layout)
    psi.set_coefficient(tuple(range(1, D + 1)), (0,) * D,
                        (2 * np.pi) ** (-D))
    return psi


def cmd_evolve(config, args, out_dir):
    model = build_model(config)
    blocks = seo_alpha(model)
    layout = model.layout
    D = layout.dimension
    psi0 = _uniform_density(layout)
    # perturb with a cos(x1) ripple so the decay is visible
    kappa = tuple(1 if j == 0 else 0 for j in range(D))
    top = tuple(range(1, D + 1))
    psi0.set_coefficient(top, kappa, 0.5 * (2 * np.pi) ** (-D))
    psi0.set_coefficient(top, tuple(-k for k in kappa), 0.5 * (2 * np.pi) ** (-D))
    out = sde.operator_evolve_density(blocks[D], psi0, args.t)
    bins = sde.default_bins(D)
    vals = sde.density_bin_averages(out, bins)
    centers = (np.arange(bins) + 0.5) * 2 * np.pi / bins
    if D == 1:
        rows = [(float(c), float(v)) for c, v in zip(centers, vals)]
        write_table_csv(Path(out_dir) / "density.csv", ["x", "density"], rows)
    else:
        rows = [
            (int(i), float(v)) for i, v in enumerate(vals.ravel())
        ]
        write_table_csv(Path(out_dir) / "density.csv", ["cell", "density"], rows)
    doc = ReportDocument(
        config.to_dict(),
        {"t": args.t, "bins": bins, "min_density": float(vals.min())},
        {"mass_conserved": True, "nonnegative": bool(vals.min() > -1e-8)},
    )
    return doc, EXIT_OK if doc.passed() else EXIT_CHECK_FAILED


def cmd_mc_compare(config, args, out_dir):
    model = build_model(config)
    blocks = seo_alpha(model)
    D = model.dimension
    layout = model.layout
    rng = np.random.default_rng([config.seed, 0])
    dt = min(args.dt, sde.max_stable_dt(model))
    steps = max(1, int(round(args.t / dt)))
    dt = args.t / steps
    states = sde.ensemble_states(model, args.samples, dt, steps, rng)
    bins = sde.default_bins(D)
    hist = sde.ensemble_density(states, bins)
    out = sde.operator_evolve_density(blocks[D], _uniform_density(layout), args.t)
    ref = sde.density_bin_averages(out, bins)
    l1 = sde.l1_distance(hist, ref)
    centers = (np.arange(bins) + 0.5) * 2 * np.pi / bins
    if D == 1:
        rows = [
            (float(c), float(h), float(r))
            for c, h, r in zip(centers, hist.density, ref)
        ]
        write_table_csv(Path(out_dir) / "densities.csv",
                        ["x", "monte_carlo", "operator"], rows)
    ok = l1 <= args.l1_bound
    doc = ReportDocument(
        config.to_dict(),
        {"t": args.t, "samples": args.samples, "dt": dt, "l1_distance": l1},
        {"l1_within_bound": ok},
    )
    return doc, EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_dynamo(config, args, out_dir):
    blocks, rep = run_pipeline(config, args.check_convergence, dynamo=True)
    if rep.classification == spectral.INDETERMINATE:
        doc = _base_outputs(config, rep, out_dir, checks={"converged": False})
        return doc, EXIT_NONCONVERGED
    checks = {"converged": True}
    extra = {}
    if rep.classification in (spectral.BROKEN_REAL, spectral.BROKEN_COMPLEX):
        flow = build_flow(config)
        layout = blocks.layout
        rng = np.random.default_rng([config.seed, 1])
        b0 = FormVector(2, layout, rng.standard_normal(layout.size(2)) + 0j)
        n = layout.n_modes
        for r in range(3):
            b0.coeffs[r * n + layout.mode_index((0, 0, 0))] = 0.0
        gamma, omega = sde.induction_timestep_oracle(
            flow, config.theta, b0, args.dt, args.steps
        )
        e_g = rep.ground["energy"]
        gamma_eig, omega_eig = -e_g.real, abs(e_g.imag)
        checks["growth_rate_2pct"] = abs(gamma - gamma_eig) <= 0.02 * abs(gamma_eig)
        checks["frequency_5pct"] = (
            abs(omega - omega_eig) <= 0.05 * max(omega_eig, 1e-6)
        )
        extra = {
            "oracle": {"gamma": gamma, "omega": omega},
            "eigensolve": {"gamma": gamma_eig, "omega": omega_eig},
        }
    doc = _base_outputs(config, rep, out_dir, extra_payload=extra, checks=checks)
    return doc, EXIT_OK if doc.passed() else EXIT_CHECK_FAILED


def _converged_values(systems, masks):
    out = []
    for k, s in enumerate(systems):
        mask = masks[k] if masks is not None else np.ones(s.size, bool)
        out.append(s.eigenvalues[mask])
    return out


def cmd_langevin_check(config, args, out_dir):
    potential = build_potential(config)
    if potential is None:
        raise ConfigError("langevin-check needs a langevin-cos or langevin-double flow")
    if config.noise != "identity":
        raise ConfigError("langevin-check assumes the identity noise frame")
    tol = build_tolerances(config)
    blocks, rep = run_pipeline(config, check_convergence=True)
    layout = blocks.layout

    def hu_builder(lay):
        return langevin_hermitian_blocks(potential, config.theta, lay)

    hu_blocks = hu_builder(layout)
    hu_systems = [spectral.eigensolve(b) for b in hu_blocks]
    # a 1e-8 equality claim is only meaningful on eigenvalues the
    # truncation has itself resolved to 1e-8, so the match uses a filter
    # that strict instead of the general-purpose tol_converge
    oracle_tol = spectral.Tolerances(
        tol_zero=tol.tol_zero, tol_pair=tol.tol_pair, tol_converge=1e-8
    )
    h_masks = spectral.convergence_masks(rep.systems, _seo_builder(config), oracle_tol)
    hu_masks = spectral.convergence_masks(hu_systems, hu_builder, oracle_tol)
    radius = spectral.spectral_radius(rep.systems)
    h_conv = _converged_values(rep.systems, h_masks)
    hu_conv = _converged_values(hu_systems, hu_masks)
    imag_worst = max(
        (float(np.max(np.abs(v.imag))) if len(v) else 0.0) for v in h_conv
    )
    match_worst = 0.0
    for k in range(layout.dimension + 1):
        for lam in h_conv[k]:
            gap = float(np.min(np.abs(hu_conv[k] - lam)))
            match_worst = max(match_worst, gap / max(1.0, abs(lam)))
    checks = {
        "spectrum_real": imag_worst <= 1e-8 * max(radius, 1.0),
        "matches_hermitian_oracle": match_worst <= 1e-8,
        "unbroken": rep.classification == spectral.UNBROKEN,
    }
    extra = {
        "langevin": {
            "max_imag": imag_worst,
            "oracle_mismatch": match_worst,
            "converged_counts": [int(len(v)) for v in h_conv],
        }
    }
    doc = _base_outputs(config, rep, out_dir, extra_payload=extra, checks=checks)
    return doc, EXIT_OK if doc.passed() else EXIT_CHECK_FAILED


def _sweep_cell(config, theta, value, dynamo):
    params = dict(config.flow["params"])
    params[config.sweep["parameter"]] = value
    flow = dict(config.flow)
    flow["params"] = params
    cell_cfg = replace(config, theta=theta, flow=flow, sweep=None)
    try:
        _, rep = run_pipeline(cell_cfg, check_convergence=True, dynamo=dynamo)
    except (FloatingPointError, np.linalg.LinAlgError):
        return (theta, value, spectral.INDETERMINATE, "", "", "false")
    if rep.ground is None:
        return (theta, value, rep.classification, "", "", "false")
    e = rep.ground["energy"]
    return (theta, value, rep.classification,
            repr(float(e.real)), repr(float(e.imag)), "true")


def cmd_sweep(config, args, out_dir):
    if config.sweep is None:
        raise ConfigError("sweep command needs a 'sweep' section in the config")
    dynamo = args.dynamo
    cells = [
        (theta, value)
        for theta in config.sweep["theta"]
        for value in config.sweep["values"]
    ]
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        rows = list(
            pool.map(lambda c: _sweep_cell(config, c[0], c[1], dynamo), cells)
        )
    write_table_csv(
        Path(out_dir) / "sweep.csv",
        ["theta", config.sweep["parameter"], "classification",
         "re_eg", "im_eg", "converged"],
        rows,
    )
    counts = {}
    for r in rows:
        counts[r[2]] = counts.get(r[2], 0) + 1
    doc = ReportDocument(
        config.to_dict(), {"cells": len(rows), "classifications": counts}, {}
    )
    return doc, EXIT_OK


_COMMANDS = {
    "spectrum": cmd_spectrum,
    "classify": cmd_classify,
    "witten": cmd_witten,
    "pair": cmd_pair,
    "evolve": cmd_evolve,
    "mc-compare": cmd_mc_compare,
    "dynamo": cmd_dynamo,
    "langevin-check": cmd_langevin_check,
    "sweep": cmd_sweep,
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="sts",
        description="Spectral analysis of stochastic flows on flat tori",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--truncation", type=int, default=None)
        p.add_argument("--theta", type=float, default=None)
        p.add_argument("--alpha", type=float, default=None)
        p.add_argument("--t-grid", default=None)
        p.add_argument(
            "--check-convergence", action=argparse.BooleanOptionalAction,
            default=True,
        )
        if name == "evolve":
            p.add_argument("--t", type=float, default=1.0)
        if name == "mc-compare":
            p.add_argument("--t", type=float, default=1.0)
            p.add_argument("--samples", type=int, default=100000)
            p.add_argument("--dt", type=float, default=0.02)
            p.add_argument("--l1-bound", type=float, default=0.05)
        if name == "dynamo":
            p.add_argument("--dt", type=float, default=0.05)
            p.add_argument("--steps", type=int, default=6000)
        if name == "sweep":
            p.add_argument("--dynamo", action="store_true")
    return parser


def _apply_overrides(config, args):
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.truncation is not None:
        updates["truncation"] = args.truncation
    if args.theta is not None:
        updates["theta"] = args.theta
    if args.alpha is not None:
        updates["alpha"] = args.alpha
    if args.t_grid is not None:
        updates["t_grid"] = [float(v) for v in args.t_grid.split(",")]
    return replace(config, **updates) if updates else config


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"sts: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    started = time.perf_counter()
    try:
        config = _apply_overrides(parse_config(text), args)
        out_dir = Path(args.out or config.output)
        out_dir.mkdir(parents=True, exist_ok=True)
        doc, code = _COMMANDS[args.command](config, args, out_dir)
    except ConfigError as exc:
        print(f"sts: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"sts: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    doc.timing = time.perf_counter() - started
    path = doc.write(out_dir)
    failed = [name for name, ok in doc.checks.items() if not ok]
    status = "ok" if not failed else f"FAILED: {', '.join(failed)}"
    print(f"sts {args.command}: {status} ({path})")
    return code


if __name__ == "__main__":
    sys.exit(main())

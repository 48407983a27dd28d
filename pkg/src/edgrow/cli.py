"""Configuration-driven experiment runner.

Subcommands: ``check-kernel`` (structural audits), ``equilibrium``
(profiles and critical constants), ``simulate`` (trajectory with
free-energy/dissipation columns, classification and checkpoints), ``sweep``
(density scan reproducing the convergence dichotomy) and ``weights``
(superlinear weight construction for a profile).

A single JSON document configures a run; every artifact echoes the resolved
configuration so outputs are self-describing.  CSV cells carry 17
significant digits, which keeps downstream tolerance checks meaningful.

Exit codes: 0 ok, 2 kernel audit failed, 3 supercritical request where a
subcritical one is required, 4 integrator failure, 64 config error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import os
import sys
import time
from typing import Any, Mapping, Optional

import numpy as np

from . import diagnostics, dynamics, equilibrium, kernels, thermo
from ._expr import RateExpressionError

__all__ = ["main", "ConfigError"]

EXIT_OK = 0
EXIT_AUDIT_FAILED = 2
EXIT_SUPERCRITICAL = 3
EXIT_INTEGRATOR = 4
EXIT_CONFIG = 64

BDA_PASS_RESIDUAL = 1e-9


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError("config root must be a JSON object")
    return config


def _resolve(config: Mapping[str, Any]) -> dict:
    """Fill defaults so outputs can echo the exact run parameters."""
    analysis = dict(config.get("analysis", {}))
    analysis.setdefault("equilibrium_k_max", 10**6)
    analysis.setdefault("profile_k_max", 1024)
    analysis.setdefault("excess_band_start", 64)
    analysis.setdefault("low_band", 10)
    analysis.setdefault("thermo", True)
    analysis.setdefault("classify", True)
    analysis.setdefault("checkpoint_every", None)
    analysis.setdefault("audit_k_max", 100)
    analysis.setdefault("audit_l_max", 100)
    resolved = dict(config)
    resolved["analysis"] = analysis
    resolved.setdefault("seed", 0)
    resolved.setdefault("n_trunc", 256)
    return resolved


def _build_kernel(config: Mapping[str, Any]) -> kernels.Kernel:
    spec = config.get("kernel")
    if spec is None:
        raise ConfigError("config needs a 'kernel' entry")
    try:
        return kernels.kernel_from_spec(spec)
    except (RateExpressionError, ValueError) as exc:
        raise ConfigError(f"bad kernel spec: {exc}") from exc


def _build_state(
    config: Mapping[str, Any],
    n_trunc: int,
    cp: Optional[equilibrium.ChemicalPotential] = None,
) -> dynamics.ConcentrationProfile:
    spec = config.get("initial_condition", {"type": "vacuum"})
    if not isinstance(spec, Mapping) or "type" not in spec:
        raise ConfigError("initial_condition must be a mapping with a 'type'")
    kind = spec["type"]
    try:
        if kind == "vacuum":
            return dynamics.vacuum_state(n_trunc)
        if kind == "monodisperse":
            rho = float(spec["rho"])
            m = int(spec.get("m", max(1, math.ceil(rho))))
            if m < math.ceil(rho):
                raise ConfigError("monodisperse condition needs m >= ceil(rho)")
            return dynamics.monodisperse_state(rho, m, n_trunc)
        if kind == "geometric":
            return dynamics.geometric_state(float(spec["phi"]), n_trunc)
        if kind == "explicit":
            return dynamics.state_from_values(spec["values"])
        if kind == "equilibrium":
            if cp is None:
                raise ConfigError("equilibrium initial condition needs analysis support")
            profile = equilibrium.equilibrium_profile(
                cp,
                phi=spec.get("phi"),
                rho=spec.get("rho"),
                k_max=n_trunc,
            )
            return dynamics.state_from_profile(profile, n_trunc)
    except ConfigError:
        raise
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad initial condition: {exc}") from exc
    raise ConfigError(f"unknown initial condition type {kind!r}")


def _build_integrator(config: Mapping[str, Any]) -> dynamics.IntegratorConfig:
    spec = config.get("integrator")
    if spec is None or "t_end" not in spec:
        raise ConfigError("config needs integrator.t_end")
    try:
        return dynamics.IntegratorConfig.from_dict(spec)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"bad integrator config: {exc}") from exc


def _write_json(path: str, payload: Mapping) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _ensure_out(out_dir: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    return out_dir


def cmd_check_kernel(config: dict, out_dir: str) -> int:
    """Audit the configured kernel and gate on linear growth plus curl-freeness."""
    resolved = _resolve(config)
    kernel = _build_kernel(resolved)
    analysis = resolved["analysis"]
    report = kernels.audit_assumptions(
        kernel, int(analysis["audit_k_max"]), int(analysis["audit_l_max"])
    )
    bda_holds = math.isfinite(report.bda_max_residual) and (
        report.bda_max_residual <= BDA_PASS_RESIDUAL
    )
    payload = {
        "kernel": kernels.kernel_spec(kernel),
        "report": report.as_dict(),
        "bda_holds_sampled": bda_holds,
        "config": resolved,
    }
    _write_json(os.path.join(_ensure_out(out_dir), "kernel_report.json"), payload)
    return EXIT_OK if (report.k1_ok and bda_holds) else EXIT_AUDIT_FAILED


def cmd_equilibrium(
    config: dict, out_dir: str, rho: Optional[float] = None, phi: Optional[float] = None
) -> int:
    """Write the equilibrium profile and scalar summary for a density or fugacity."""
    resolved = _resolve(config)
    kernel = _build_kernel(resolved)
    analysis = resolved["analysis"]
    if rho is None and phi is None:
        rho = resolved.get("rho")
        phi = resolved.get("phi")
    if (rho is None) == (phi is None):
        raise ConfigError("specify exactly one of rho and phi")
    cp = equilibrium.chemical_potential(kernel, int(analysis["equilibrium_k_max"]))
    out = _ensure_out(out_dir)
    try:
        profile = equilibrium.equilibrium_profile(
            cp,
            phi=None if phi is None else float(phi),
            rho=None if rho is None else float(rho),
            k_max=int(analysis["profile_k_max"]),
        )
    except equilibrium.SupercriticalDensityError as exc:
        _write_json(
            os.path.join(out, "equilibrium_summary.json"),
            {
                "error": f"supercritical, rho_c={exc.rho_c:.12g}",
                "rho": rho,
                "rho_c": equilibrium.tagged_value(exc.rho_c),
                "config": resolved,
            },
        )
        print(f"supercritical, rho_c={exc.rho_c:.12g}", file=sys.stderr)
        return EXIT_SUPERCRITICAL
    equilibrium.profile_to_csv(profile, cp, os.path.join(out, "profile.csv"))
    summary = equilibrium.profile_summary(profile, cp)
    summary["config"] = resolved
    _write_json(os.path.join(out, "equilibrium_summary.json"), summary)
    return EXIT_OK


def _write_trajectory_csv(traj: dynamics.TrajectoryRecord, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,k,c_k\n")
        for i, t in enumerate(traj.times):
            row = traj.states[i]
            t_s = _fmt(t)
            for k in range(traj.n_trunc + 1):
                fh.write(f"{t_s},{k},{_fmt(row[k])}\n")


def _write_summary_csv(traj: dynamics.TrajectoryRecord, path: str) -> None:
    have_thermo = "F" in traj.extras
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,M0,rho,boundary_mass,F,D,D_infinite_terms\n")
        for i, t in enumerate(traj.times):
            if have_thermo:
                f_s = _fmt(traj.extras["F"][i])
                d_s = _fmt(traj.extras["D"][i])
                n_inf = f"{int(traj.extras['D_infinite_terms'][i])}"
            else:
                f_s = d_s = n_inf = ""
            fh.write(
                f"{_fmt(t)},{_fmt(traj.zeroth_moments[i])},{_fmt(traj.first_moments[i])},"
                f"{_fmt(traj.boundary_mass[i])},{f_s},{d_s},{n_inf}\n"
            )


def cmd_simulate(config: dict, out_dir: str, resume: Optional[str] = None) -> int:
    """Integrate the configured system, writing trajectory, summary, report."""
    resolved = _resolve(config)
    analysis = resolved["analysis"]
    out = _ensure_out(out_dir)
    started = time.perf_counter()

    cfg = _build_integrator(resolved)
    if resume is not None:
        # The checkpoint provides the state and clock; the config stays the
        # description of the full run (t_end, tolerances, outputs).
        t0, resumed_state, kernel_spec, _ = dynamics.load_checkpoint(resume)
        kernel = kernels.kernel_from_spec(kernel_spec)
        resolved["kernel"] = dict(kernel_spec)
    else:
        t0 = 0.0
        resumed_state = None
        kernel = _build_kernel(resolved)

    cp: Optional[equilibrium.ChemicalPotential] = None
    if analysis["thermo"] or analysis["classify"]:
        try:
            cp = equilibrium.chemical_potential(kernel, int(analysis["equilibrium_k_max"]))
        except kernels.ZeroRateError:
            cp = None

    if resumed_state is not None:
        state0 = resumed_state
    else:
        state0 = _build_state(resolved, int(resolved["n_trunc"]), cp)

    observers = []
    if analysis["thermo"] and cp is not None:
        observers.append(thermo.make_thermo_observer(kernel, cp))

    checkpoint_path = os.path.join(out, "checkpoint.json")

    def checkpoint_hook(t: float, state: dynamics.ConcentrationProfile) -> None:
        dynamics.save_checkpoint(checkpoint_path, t, state, kernels.kernel_spec(kernel), cfg)

    try:
        traj = dynamics.integrate(
            kernel,
            state0,
            cfg,
            observers=observers,
            t0=t0,
            checkpoint_hook=checkpoint_hook,
            checkpoint_every=analysis["checkpoint_every"],
        )
    except dynamics.IntegratorError as exc:
        _write_json(
            os.path.join(out, "run_report.json"),
            {"error": str(exc), "config": resolved, "last_checkpoint": checkpoint_path},
        )
        print(f"integrator failure: {exc}", file=sys.stderr)
        return EXIT_INTEGRATOR

    _write_trajectory_csv(traj, os.path.join(out, "trajectory.csv"))
    _write_summary_csv(traj, os.path.join(out, "summary.csv"))

    convergence: dict
    if analysis["classify"] and cp is not None and traj.sample_count >= 10:
        try:
            report = diagnostics.classify_longtime(
                traj,
                cp,
                diagnostics.AnalysisConfig(
                    excess_band_start=int(analysis["excess_band_start"]),
                    low_band=int(analysis["low_band"]),
                ),
            )
            convergence = report.as_dict()
            diagnostics.write_convergence_series_csv(
                report, os.path.join(out, "distances.csv")
            )
        except diagnostics.RhoCUnavailableError as exc:
            convergence = {"error": str(exc)}
    else:
        convergence = {"skipped": True}
    _write_json(os.path.join(out, "convergence.json"), convergence)

    drift0, drift1 = traj.moment_drift()
    _write_json(
        os.path.join(out, "run_report.json"),
        {
            "config": resolved,
            "samples": traj.sample_count,
            "t_final": float(traj.times[-1]),
            "moment_drift": {"count": drift0, "mass": drift1},
            "clamped_mass": {
                "count": float(traj.clamp_mass0[-1]),
                "mass": float(traj.clamp_mass1[-1]),
            },
            "boundary_contaminated_from": traj.boundary_contaminated_from,
            "runtime_seconds": time.perf_counter() - started,
        },
    )
    return EXIT_OK


def _sweep_row(args: tuple) -> dict:
    """One density of a sweep; runs in a worker process, so takes plain data."""
    config_json, rho = args
    config = json.loads(config_json)
    resolved = _resolve(config)
    try:
        kernel = _build_kernel(resolved)
        cfg = _build_integrator(resolved)
        analysis = resolved["analysis"]
        cp = equilibrium.chemical_potential(kernel, int(analysis["equilibrium_k_max"]))
        n_trunc = int(resolved["n_trunc"])
        ic = dict(resolved.get("initial_condition", {"type": "monodisperse"}))
        if ic.get("type", "monodisperse") == "monodisperse":
            ic["type"] = "monodisperse"
            ic["rho"] = rho
            ic.setdefault("m", max(1, math.ceil(rho)))
            if rho == 0.0:
                ic = {"type": "vacuum"}
        row_config = dict(resolved)
        row_config["initial_condition"] = ic
        state0 = _build_state(row_config, n_trunc, cp)
        traj = dynamics.integrate(kernel, state0, cfg)
        report = diagnostics.classify_longtime(
            traj,
            cp,
            diagnostics.AnalysisConfig(
                excess_band_start=int(analysis["excess_band_start"]),
                low_band=int(analysis["low_band"]),
            ),
        )
        return {
            "rho": rho,
            "regime": report.regime,
            "weak_d_final": report.weak_distance_series[-1],
            "strong_d_final": report.strong_distance_series[-1],
            "excess_mass": report.excess_mass_series[-1],
            "f_gap": report.free_energy_limit_gap,
            "boundary_mass": report.boundary_mass_series[-1],
            "status": "ok",
        }
    except Exception as exc:  # per-row failures must not kill the sweep
        return {"rho": rho, "status": f"error: {exc}"}


def cmd_sweep(config: dict, out_dir: str, parallel: Optional[int] = None) -> int:
    """Run one simulation per density and aggregate the phase-diagram rows."""
    resolved = _resolve(config)
    densities = resolved.get("densities")
    if densities is None or not isinstance(densities, list):
        raise ConfigError("sweep config needs a 'densities' list")
    if len(set(float(r) for r in densities)) != len(densities):
        raise ConfigError("sweep densities must be distinct")
    if any(float(r) < 0 for r in densities):
        raise ConfigError("sweep densities must be nonnegative")
    _build_kernel(resolved)  # validate before spawning workers
    if densities:
        _build_integrator(resolved)
    degree = parallel if parallel is not None else int(resolved.get("parallelism", 1))
    degree = max(1, degree)

    config_json = json.dumps(resolved, sort_keys=True)
    jobs = [(config_json, float(rho)) for rho in densities]
    if degree == 1 or len(jobs) <= 1:
        rows = [_sweep_row(job) for job in jobs]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=degree) as pool:
            rows = list(pool.map(_sweep_row, jobs))

    out = _ensure_out(out_dir)
    columns = [
        "rho", "regime", "weak_d_final", "strong_d_final",
        "excess_mass", "f_gap", "boundary_mass", "status",
    ]
    with open(os.path.join(out, "sweep.csv"), "w", encoding="utf-8") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            cells = []
            for name in columns:
                value = row.get(name, "")
                if isinstance(value, float):
                    cells.append(_fmt(value))
                else:
                    cells.append(str(value))
            fh.write(",".join(cells) + "\n")
    _write_json(
        os.path.join(out, "sweep_report.json"),
        {"config": resolved, "rows": len(rows)},
    )
    return EXIT_OK


def cmd_weights(config: dict, out_dir: str) -> int:
    """Construct superlinear weights for the configured profile or tails."""
    resolved = _resolve(config)
    spec = resolved.get("weights_input")
    if not isinstance(spec, Mapping) or "type" not in spec:
        raise ConfigError("weights config needs a 'weights_input' mapping")
    k_max = int(resolved.get("weights_k_max", 10000))
    try:
        if spec["type"] == "tails":
            result = diagnostics.superlinear_weights(
                np.asarray(spec["values"], dtype=float), k_max, is_tail_sequence=True
            )
        else:
            n_state = int(resolved.get("n_trunc", 256))
            state = _build_state({"initial_condition": spec}, n_state)
            result = diagnostics.superlinear_weights(state, k_max)
    except (diagnostics.NotIntegrableError, KeyError, ValueError) as exc:
        raise ConfigError(f"bad weights input: {exc}") from exc
    out = _ensure_out(out_dir)
    with open(os.path.join(out, "weights.csv"), "w", encoding="utf-8") as fh:
        fh.write("k,g_k,phi_k\n")
        for k in range(len(result.g)):
            fh.write(f"{k},{_fmt(result.g[k])},{_fmt(result.phi_steps[k])}\n")
    ks = np.arange(len(result.g) - 1, dtype=float)
    bound_margin = float(np.max((ks + 1.0) * np.diff(result.g) - 2.0 * result.g[:-1]))
    _write_json(
        os.path.join(out, "weights_report.json"),
        {
            "k_max": k_max,
            "breakpoints": len(result.ell),
            "first_slopes": list(result.d_slopes[:8]),
            "growth_bound_margin": bound_margin,
            "config": resolved,
        },
    )
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edgrow",
        description="Exchange-driven growth: audits, equilibria, simulation, sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", default=".", help="output directory")

    p_check = sub.add_parser("check-kernel", help="audit kernel assumptions")
    add_common(p_check)

    p_eq = sub.add_parser("equilibrium", help="equilibrium profile and constants")
    add_common(p_eq)
    p_eq.add_argument("--rho", type=float, default=None, help="target density")
    p_eq.add_argument("--phi", type=float, default=None, help="target fugacity")

    p_sim = sub.add_parser("simulate", help="integrate the truncated system")
    add_common(p_sim)
    p_sim.add_argument("--resume", default=None, help="checkpoint to resume from")

    p_sweep = sub.add_parser("sweep", help="density sweep")
    add_common(p_sweep)
    p_sweep.add_argument("--parallel", type=int, default=None, help="worker processes")

    p_w = sub.add_parser("weights", help="superlinear weight construction")
    add_common(p_w)
    return parser


def main(argv: Optional[list] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    try:
        config = _load_config(args.config)
        if args.command == "check-kernel":
            return cmd_check_kernel(config, args.out)
        if args.command == "equilibrium":
            return cmd_equilibrium(config, args.out, rho=args.rho, phi=args.phi)
        if args.command == "simulate":
            return cmd_simulate(config, args.out, resume=args.resume)
        if args.command == "sweep":
            return cmd_sweep(config, args.out, parallel=args.parallel)
        if args.command == "weights":
            return cmd_weights(config, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())

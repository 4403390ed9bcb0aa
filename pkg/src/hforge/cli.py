"""Scenario runner: validate JSON configs, execute them, emit reports.

Subcommands: ``run`` executes a scenario and writes <stem>.report.json
(plus <stem>.csv for sweeps), ``validate`` checks a config without
running, ``list`` prints the scheme catalog.  Exit codes: 0 all
assertions pass, 1 usage/config error, 2 assertion failure.

Angles are radians; frequencies are angular with hbar = 1; one time unit
corresponds to 1 ns in the NV-derived scenarios, so 130 kHz maps to
2 pi * 1.3e-4 rad per time unit.  Complex numbers serialize as [re, im].
"""

import json
import os
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import click
import jsonschema
import numpy as np

from . import __version__, gqc, grape, hqc, protect
from .errors import ConfigError
from .geometry import decompose_phase
from .protect import NoiseDistribution, NoiseModel
from .qcore import gate_fidelity, phase_aligned_distance, propagate
from .tolerances import DEFAULT

SCENARIO_KINDS = ("phase", "holonomy", "scheme", "grape", "sweep", "dd", "dfs")

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["kind", "parameters"],
    "additionalProperties": False,
    "properties": {
        "kind": {"enum": list(SCENARIO_KINDS)},
        "name": {"type": "string"},
        "parameters": {"type": "object"},
        "tolerances": {"type": "object"},
        "seed": {"type": "integer"},
        "output": {"type": "string"},
        "assertions": {"type": "object"},
    },
}

# Required parameter keys (with scalar types) per scenario kind/name.
PARAMETER_SCHEMAS = {
    ("phase", "aa_spin"): {"mu_b0": float, "theta": float, "omega": float},
    ("phase", "oscillator"): {"beta": float, "omega": float, "time": float},
    ("holonomy", "berry_spin_loop"): {"theta": float, "band": int, "samples": int},
    ("scheme", "lambda_resonant"): {"theta": float, "phi": float},
    ("scheme", "single_shot"): {"alpha": float, "beta": float, "gamma": float},
    ("scheme", "sm_two_qubit"): {"theta": float, "phi": float},
    ("scheme", "orange_slice"): {"gamma": float, "theta": float, "phi": float},
    ("scheme", "ion_unconventional"): {"omega_d": float, "delta": float},
    ("scheme", "xy_aux_single"): {"theta": float, "beta": float},
    ("scheme", "xy_aux_two_qubit"): {"theta": float},
    ("grape", "lambda_gate"): {
        "theta": float, "phi": float, "n_segments": int, "total_time": float,
    },
    ("sweep", "lambda_gate"): {
        "theta": float, "phi": float,
        "delta1_max": float, "delta2_max": float, "grid": int,
    },
    ("dd", None): {"kind_pulse": str, "tau": float, "cycles": int},
    ("dfs", None): {"coupling_0a": float, "coupling_1a": float, "dephasing": float},
}


def _complexes(mat: np.ndarray) -> list:
    """Row-major nested [re, im] pairs."""
    mat = np.atleast_2d(np.asarray(mat, complex))
    return [[[float(z.real), float(z.imag)] for z in row] for row in mat]


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}")
    validate_config(cfg, path)
    return cfg


def validate_config(cfg: dict, path: str = "<config>") -> list[str]:
    """Schema-check a config; raises ConfigError with field diagnostics."""
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        field = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path}: field '{field}': {exc.message}")

    kind = cfg["kind"]
    name = cfg.get("name")
    key = (kind, name) if (kind, name) in PARAMETER_SCHEMAS else (kind, None)
    if key not in PARAMETER_SCHEMAS:
        known = sorted(n for k, n in PARAMETER_SCHEMAS if k == kind and n)
        raise ConfigError(
            f"{path}: unknown scenario name {name!r} for kind {kind!r}"
            + (f" (known: {', '.join(known)})" if known else "")
        )
    params = cfg["parameters"]
    for field, ftype in PARAMETER_SCHEMAS[key].items():
        if field not in params:
            raise ConfigError(f"{path}: parameters missing required field '{field}'")
        value = params[field]
        if ftype is float and not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: parameter '{field}' must be a number")
        if ftype is int and not isinstance(value, int):
            raise ConfigError(f"{path}: parameter '{field}' must be an integer")
        if ftype is str and not isinstance(value, str):
            raise ConfigError(f"{path}: parameter '{field}' must be a string")
    for field in ("duration", "tau", "total_time"):
        if field in params and isinstance(params[field], (int, float)):
            if params[field] <= 0:
                raise ConfigError(f"{path}: parameter '{field}' must be positive")
    return []


def scheme_catalog() -> list[dict]:
    """Every runnable builder with its required parameters."""
    catalog = []
    for (kind, name), fields in sorted(
        PARAMETER_SCHEMAS.items(), key=lambda kv: (kv[0][0], kv[0][1] or "")
    ):
        catalog.append(
            {
                "kind": kind,
                "name": name or "(default)",
                "parameters": {f: t.__name__ for f, t in fields.items()},
            }
        )
    return catalog


# ---------------------------------------------------------------------------
# scenario execution
# ---------------------------------------------------------------------------

@dataclass
class RunOutput:
    results: dict
    checks: list      # of (label, passed, value, threshold)
    csv_rows: list    # (delta1, delta2, fidelity) for sweeps


def _run_phase(name, p, tol):
    if name == "aa_spin":
        params = gqc.SpinFieldParams(p["mu_b0"], p["theta"], p["omega"])
        rec = gqc.rotating_spin_record(params, params.period, p.get("samples", 2048))
        eta_p, _ = gqc.rotating_eigenstates(params)
        dec = decompose_phase(rec, eta_p)
        closed, _ = gqc.aa_geometric_phases(params)
        mismatch = abs(
            (dec.geometric - closed + np.pi) % (2 * np.pi) - np.pi
        )
        return RunOutput(
            results={
                "total": dec.total,
                "dynamical": dec.dynamical,
                "geometric": dec.geometric,
                "geometric_principal": dec.geometric_principal,
                "closed_form_geometric": closed,
                "cyclicity_residual": dec.cyclicity_residual,
            },
            checks=[
                ("closed_form_match_mod_2pi", mismatch < 1e-6, mismatch, 1e-6),
                ("cyclic", dec.cyclicity_residual < tol.cyclicity,
                 dec.cyclicity_residual, tol.cyclicity),
            ],
            csv_rows=[],
        )
    if name == "oscillator":
        total, dyn, geo = gqc.unconventional_oscillator_phases(
            p["beta"], p["omega"], p["time"]
        )
        return RunOutput(
            results={"total": total, "dynamical": dyn, "geometric": geo},
            checks=[("unconventional_ratio", abs(dyn + 2 * geo) < 1e-12,
                     abs(dyn + 2 * geo), 1e-12)],
            csv_rows=[],
        )
    raise ConfigError(f"unknown phase scenario {name!r}")


def _run_holonomy(name, p, tol):
    params = gqc.SpinFieldParams(1.0, p["theta"], 0.01)
    value = gqc.spin_berry_phase(params, p["band"], p["samples"])
    expect = (np.pi if p["band"] == 0 else -np.pi) * (1 - np.cos(p["theta"]))
    return RunOutput(
        results={"berry_phase": value, "solid_angle_prediction": expect},
        checks=[("matches_solid_angle", abs(value - expect) < 1e-4,
                 abs(value - expect), 1e-4)],
        csv_rows=[],
    )


def _run_scheme(name, p, tol):
    if name == "lambda_resonant":
        res = hqc.lambda_resonant_gate(hqc.LambdaParams(p["theta"], p["phi"]))
    elif name == "single_shot":
        res = hqc.single_shot_gate(p["alpha"], p["beta"], p["gamma"])
    elif name == "sm_two_qubit":
        res = hqc.sm_two_qubit_gate(p["theta"], p["phi"])
    elif name == "orange_slice":
        r = gqc.orange_slice_gate(p["gamma"], p["theta"], p["phi"])
        dist = phase_aligned_distance(r.gate, r.predicted)
        return RunOutput(
            results={"gate": _complexes(r.gate), "predicted": _complexes(r.predicted)},
            checks=[("gate_matches_closed_form", dist < 1e-8, dist, 1e-8)],
            csv_rows=[],
        )
    elif name == "ion_unconventional":
        r = gqc.ion_unconventional_gate(p["omega_d"], p["delta"], p.get("phi", 0.0))
        checks = [("area_phase_match",
                   abs(r.geometric_phase + r.gamma) < 1e-6,
                   abs(r.geometric_phase + r.gamma), 1e-6)]
        results = {"gate": _complexes(r.gate), "gamma": r.gamma,
                   "geometric_phase": r.geometric_phase}
        if r.cz_decomposition is not None:
            cz_err = float(np.abs(r.cz_decomposition - np.diag([1, 1, 1, -1])).max())
            checks.append(("cz_identity", cz_err < 1e-12, cz_err, 1e-12))
            results["cz"] = _complexes(r.cz_decomposition)
        return RunOutput(results=results, checks=checks, csv_rows=[])
    elif name == "xy_aux_single":
        r = hqc.xy_aux_single_gate(p["theta"], p["beta"])
        dist = phase_aligned_distance(r.gate, r.predicted)
        return RunOutput(
            results={
                "gate": _complexes(r.gate),
                "snapped_theta": r.snapped_theta,
                "theta_error": r.theta_error,
                "leakage": r.leakage,
            },
            checks=[
                ("auxiliary_return", r.leakage < 1e-8, r.leakage, 1e-8),
                ("gate_matches_closed_form", dist < 1e-8, dist, 1e-8),
            ],
            csv_rows=[],
        )
    elif name == "xy_aux_two_qubit":
        r = hqc.xy_aux_two_qubit_gate(p["theta"])
        err = float(np.abs(r.gate - r.predicted).max())
        return RunOutput(
            results={"gate": _complexes(r.gate), "leakage": r.leakage},
            checks=[
                ("matches_printed_matrix", err < 1e-8, err, 1e-8),
                ("auxiliary_return", r.leakage < 1e-8, r.leakage, 1e-8),
            ],
            csv_rows=[],
        )
    else:
        raise ConfigError(f"unknown scheme {name!r}")
    dist = phase_aligned_distance(res.gate, res.predicted)
    return RunOutput(
        results={
            "gate": _complexes(res.gate),
            "predicted": _complexes(res.predicted),
            "cyclicity_residual": res.report.cyclicity_residual,
            "max_k_norm": res.report.max_k_norm,
        },
        checks=[
            ("gate_matches_closed_form", dist < 1e-8, dist, 1e-8),
            ("cyclic_subspace", res.report.cyclicity_residual < tol.cyclicity,
             res.report.cyclicity_residual, tol.cyclicity),
            ("no_dynamical_part", res.report.max_k_norm < tol.dynamical_norm,
             res.report.max_k_norm, tol.dynamical_norm),
        ],
        csv_rows=[],
    )


def _nv_problem(theta, phi, n_segments, total_time, penalty):
    res = hqc.lambda_resonant_gate(hqc.LambdaParams(theta, phi))
    controls = []
    for leg in (0, 1):
        for quad in (1.0, 1.0j):
            c = np.zeros((3, 3), dtype=complex)
            c[2, leg] = quad
            c[leg, 2] = np.conj(quad)
            controls.append(c)
    u_t = np.zeros((3, 3), dtype=complex)
    u_t[:2, :2] = res.predicted
    p0 = np.diag([1.0, 1.0, 0.0]).astype(complex)
    problem = grape.GrapeProblem(
        h_static=np.zeros((3, 3), dtype=complex),
        controls=tuple(controls),
        u_target=u_t,
        p0=p0,
        n_segments=n_segments,
        total_time=total_time,
        penalty=penalty,
    )
    amp = np.pi / total_time
    w0 = np.sin(theta / 2)
    w1 = -np.cos(theta / 2)
    w_init = np.zeros((n_segments, 4))
    w_init[:, 0] = amp * w0
    w_init[:, 2] = amp * w1
    return problem, w_init


def _nv_noise(p):
    sz = np.diag([1.0, -1.0, 0.0]).astype(complex)
    sigma = p.get("thermal_sigma", 2 * np.pi * 1.3e-4)
    amp = p.get("amplitude_halfwidth", 0.02)
    model = NoiseModel(
        error_ops=((sz, NoiseDistribution("gaussian", sigma)),),
        amplitude_error=NoiseDistribution("uniform", amp),
    )
    return model, sz


def _run_grape(name, p, tol, seed):
    problem, w_init = _nv_problem(
        p["theta"], p["phi"], p["n_segments"], p["total_time"],
        p.get("penalty", 1e-6),
    )
    model, _ = _nv_noise(p)
    nodes = p.get("quadrature_nodes", 5)
    cfg = grape.GrapeConfig(
        step=p.get("step", 2e4),
        target_objective=p.get("target_objective", 0.999),
        max_iterations=p.get("max_iterations", 200),
    )
    if p.get("randomize_initial", False):
        rng = np.random.default_rng(seed)
        w_init = w_init + p.get("initial_jitter", 1e-4) * rng.normal(size=w_init.shape)

    def vg(w):
        return grape.averaged_objective_and_gradient(w, problem, model, nodes)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        out = grape.grape_optimize(problem, cfg, w_init, value_and_grad=vg)
    initial_obj = grape.averaged_objective(w_init, problem, model, nodes)
    return RunOutput(
        results={
            "initial_averaged_objective": initial_obj,
            "averaged_objective": out.objective,
            "iterations": int(len(out.trace) - 1),
            "cyclicity_residual": out.holonomy_report.cyclicity_residual,
            "max_k_norm": out.holonomy_report.max_k_norm,
            "controls": [list(map(float, row)) for row in out.controls],
        },
        checks=[
            ("objective_reached", out.objective >= p.get("assert_objective", 0.99),
             out.objective, p.get("assert_objective", 0.99)),
        ],
        csv_rows=[],
    )


def _run_sweep(name, p, tol, threads):
    res = hqc.lambda_resonant_gate(hqc.LambdaParams(p["theta"], p["phi"]))
    u_t = np.zeros((3, 3), dtype=complex)
    u_t[:2, :2] = res.predicted
    p0 = np.diag([1.0, 1.0, 0.0]).astype(complex)
    sz = np.diag([1.0, -1.0, 0.0]).astype(complex)
    n = p["grid"]
    d1 = np.linspace(-p["delta1_max"], p["delta1_max"], n)
    d2 = np.linspace(-p["delta2_max"], p["delta2_max"], n)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            sweep = grape.robustness_sweep(
                res.schedule, u_t, p0, sz, d1, d2, map_fn=pool.map
            )
    else:
        sweep = grape.robustness_sweep(res.schedule, u_t, p0, sz, d1, d2)
    center = float(sweep.fidelities[n // 2, n // 2])
    return RunOutput(
        results={
            "grid": n,
            "center_fidelity": center,
            "min_fidelity": float(sweep.fidelities.min()),
        },
        checks=[("center_cell_exact", abs(center - 1.0) < 1e-8,
                 abs(center - 1.0), 1e-8)],
        csv_rows=list(sweep.rows()),
    )


def _run_dd(p, tol):
    env = np.array([[0.5, 0.2], [0.2, -0.1]], dtype=complex)
    coupling = np.array([[0.3, 0.1], [0.1, -0.2]], dtype=complex)
    r = protect.dd_sequence(
        p["kind_pulse"], p["tau"], env, [("z", coupling)], cycles=p["cycles"]
    )
    return RunOutput(
        results={"residual": r.residual, "cycle_time": r.cycle_time},
        checks=[("residual_small", r.residual < p.get("max_residual", 1.0),
                 r.residual, p.get("max_residual", 1.0))],
        csv_rows=[],
    )


def _run_dfs(p, tol):
    schedule, code = protect.dfs_logical_lambda(p["coupling_0a"], p["coupling_1a"])
    sz = protect.collective_error_ops(3, ("z",))["z"]
    lam = p["dephasing"]
    hs = schedule.matrices() + lam * sz
    from .qcore import ControlSchedule

    rec = propagate(
        ControlSchedule.from_hamiltonians(list(hs), list(schedule.durations)), 1
    )
    enc = code.encoder()
    logical_gate = enc.conj().T @ rec.final_propagator @ enc
    clean = propagate(schedule, 1)
    logical_clean = enc.conj().T @ clean.final_propagator @ enc
    fid = gate_fidelity(logical_gate, logical_clean)
    return RunOutput(
        results={"logical_gate": _complexes(logical_gate),
                 "process_fidelity_vs_clean": fid},
        checks=[("dephasing_immune", fid > 1 - 1e-10, 1 - fid, 1e-10)],
        csv_rows=[],
    )


def execute(cfg: dict, threads: int = 1) -> RunOutput:
    kind = cfg["kind"]
    name = cfg.get("name")
    p = cfg["parameters"]
    tol = DEFAULT
    if cfg.get("tolerances"):
        tol = tol.override(**cfg["tolerances"])
    seed = cfg.get("seed", 0)
    if kind == "phase":
        return _run_phase(name, p, tol)
    if kind == "holonomy":
        return _run_holonomy(name, p, tol)
    if kind == "scheme":
        return _run_scheme(name, p, tol)
    if kind == "grape":
        return _run_grape(name, p, tol, seed)
    if kind == "sweep":
        return _run_sweep(name, p, tol, threads)
    if kind == "dd":
        return _run_dd(p, tol)
    if kind == "dfs":
        return _run_dfs(p, tol)
    raise ConfigError(f"unknown scenario kind {kind!r}")


# ---------------------------------------------------------------------------
# command-line interface
# ---------------------------------------------------------------------------

@click.group()
def main():
    """Geometric/holonomic gate scenario runner."""


def _thread_count(threads):
    if threads is not None:
        return threads
    env = os.environ.get("HFORGE_THREADS")
    return int(env) if env else 1


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", "out_stem", default=None, help="Output file stem.")
@click.option("--threads", type=int, default=None,
              help="Sweep parallelism (HFORGE_THREADS as fallback).")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--tol-override", "tol_overrides", multiple=True,
              help="key=value tolerance override (repeatable).")
def run(config_path, out_stem, threads, seed, tol_overrides):
    """Execute a scenario config and write report files."""
    t_start = time.monotonic()
    try:
        cfg = load_config(config_path)
        if seed is not None:
            cfg["seed"] = seed
        overrides = {}
        for item in tol_overrides:
            if "=" not in item:
                raise ConfigError(f"--tol-override needs key=value, got {item!r}")
            key, _, val = item.partition("=")
            overrides[key.strip()] = float(val)
        if overrides:
            cfg.setdefault("tolerances", {}).update(overrides)
        out = execute(cfg, threads=_thread_count(threads))
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)

    stem = out_stem or cfg.get("output") or Path(config_path).stem
    report = {
        "inputs": cfg,
        "results": out.results,
        "assertions": [
            {"name": n, "passed": bool(ok), "value": v, "threshold": thr}
            for n, ok, v, thr in out.checks
        ],
        "tolerances": (
            DEFAULT.override(**cfg.get("tolerances", {})).as_dict()
        ),
        "versions": {"hforge": __version__, "numpy": np.__version__},
    }
    report_path = Path(f"{stem}.report.json")
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    if out.csv_rows:
        csv_path = Path(f"{stem}.csv")
        lines = ["delta1,delta2,fidelity"]
        lines += [f"{d1!r},{d2!r},{f!r}" for d1, d2, f in out.csv_rows]
        csv_path.write_text("\n".join(lines) + "\n")
    # Wall-clock goes to stderr so report files stay byte-identical per
    # (config, seed).
    click.echo(f"completed in {time.monotonic() - t_start:.2f}s", err=True)
    for n, ok, v, thr in out.checks:
        click.echo(f"{'PASS' if ok else 'FAIL'} {n}: {v:.3e} (threshold {thr:g})")
    sys.exit(0 if all(ok for _, ok, _, _ in out.checks) else 2)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
def validate(config_path):
    """Check a scenario config against the schema without running it."""
    try:
        load_config(config_path)
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo("ok")
    sys.exit(0)


@main.command(name="list")
def list_schemes():
    """Print the scenario catalog with parameter schemas."""
    for entry in scheme_catalog():
        params = ", ".join(f"{k}:{v}" for k, v in entry["parameters"].items())
        click.echo(f"{entry['kind']:9s} {entry['name']:20s} {params}")
    sys.exit(0)


if __name__ == "__main__":
    main()

"""Benchmark command line interface.

Subcommands
-----------
run         one time evolution, observables CSV + summary + figures
converge    error sweep over time steps (optionally mesh sizes), EOC table
groundstate compute or reload a persisted ground state
stability   first energy-threshold crossing per scheme and time step

A YAML config file supplies the run definition; command line flags
override file values.  All outputs land in the directory given by
``--out``: delimited CSV files, a JSON echo of the fully resolved
configuration, and rendered figures (unless ``--no-figures``).
"""
from __future__ import annotations

import argparse
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from .assembly import Operators
from .linalg import SolverError
from .mesh import Mesh
from .observables import eoc, error_norms
from .problems import (
    GradientFlowOptions,
    ProblemSpec,
    build_problem_mesh,
    desk_variant,
    ground_state,
    initial_state,
    load_ground_state,
    problem_catalog,
    save_ground_state,
)
from .reporting import (
    RunReport,
    energy_drift,
    mass_drift,
    plot_blowup_times,
    plot_convergence,
    plot_density,
    plot_error_history,
    plot_observables,
    write_config_echo,
    write_observables_csv,
    write_summary_csv,
)
from .spectral import run_spectral
from .steppers import NewtonOptions, run_evolution

DESK_UNKNOWN_CAP_2D = 300_000

FEM_SCHEMES = ("im", "cn", "re", "lcn", "twostep")
ALL_SCHEMES = FEM_SCHEMES + ("sp2",)


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


# --------------------------------------------------------------- config


def parse_timestep(value) -> float:
    """Accept plain floats and dyadic shorthand like ``2^-8`` or ``2**-8``."""
    if isinstance(value, (int, float)):
        tau = float(value)
    else:
        text = str(value).strip().replace("**", "^")
        if "^" in text:
            base, _, expo = text.partition("^")
            try:
                tau = float(base) ** float(expo)
            except ValueError as exc:
                raise ConfigError(f"cannot parse time step {value!r}") from exc
        else:
            try:
                tau = float(text)
            except ValueError as exc:
                raise ConfigError(f"cannot parse time step {value!r}") from exc
    if tau <= 0.0:
        raise ConfigError(f"time step must be positive, got {value!r}")
    return tau


def load_config(path) -> dict:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be a mapping, got {type(data).__name__}")
    return data


def resolve_section(file_cfg: dict, command: str, overrides: dict) -> dict:
    """Pick the command's section and lay CLI overrides on top."""
    section = file_cfg.get(command, file_cfg)
    if not isinstance(section, dict):
        raise ConfigError(f"config section {command!r} must be a mapping")
    merged = dict(section)
    for key, value in overrides.items():
        if value is not None:
            merged[key] = value
    return merged


def resolve_time_grid(cfg: dict, tau=None) -> tuple[float, int, float]:
    """Consistent (tau, n_steps, t_final); tau*n_steps must equal t_final."""
    tau = parse_timestep(tau if tau is not None else cfg.get("tau"))
    n_steps = cfg.get("n_steps")
    t_final = cfg.get("t_final")
    if n_steps is None and t_final is None:
        raise ConfigError("need t_final or n_steps")
    if n_steps is None:
        t_final = float(t_final)
        n_steps = round(t_final / tau)
    n_steps = int(n_steps)
    if n_steps < 0:
        raise ConfigError("n_steps must be nonnegative")
    if t_final is None:
        t_final = tau * n_steps
    t_final = float(t_final)
    if abs(tau * n_steps - t_final) > 1e-12 * max(1.0, abs(t_final)):
        raise ConfigError(
            f"tau*n_steps = {tau * n_steps!r} does not match t_final = {t_final!r}"
        )
    return tau, n_steps, t_final


def resolve_problem(cfg: dict) -> ProblemSpec:
    catalog = problem_catalog()
    name = cfg.get("problem")
    if name is None:
        raise ConfigError("config needs a problem name")
    if name not in catalog:
        raise ConfigError(f"unknown problem {name!r}; available: {sorted(catalog)}")
    problem = catalog[name]
    profile = cfg.get("profile", "desk")
    if profile not in ("desk", "paper"):
        raise ConfigError(f"profile must be desk or paper, got {profile!r}")
    if profile == "desk":
        problem = desk_variant(problem)
    return problem


def resolve_n_elems(cfg: dict, problem: ProblemSpec) -> int:
    n_elems = int(cfg.get("n_elems", problem.n_desk))
    if n_elems < 1:
        raise ConfigError("n_elems must be positive")
    if problem.dim == 2 and cfg.get("profile", "desk") == "desk":
        unknowns = (n_elems + 1) ** 2
        if unknowns > DESK_UNKNOWN_CAP_2D:
            raise ConfigError(
                f"{unknowns} unknowns exceed the desk profile cap of "
                f"{DESK_UNKNOWN_CAP_2D}; rerun with --profile paper"
            )
    return n_elems


def resolve_newton(cfg: dict) -> NewtonOptions | None:
    raw = cfg.get("newton")
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise ConfigError("newton options must be a mapping")
    known = {"rel_tol", "abs_tol", "max_iter", "damping"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown newton options: {sorted(unknown)}")
    return NewtonOptions(**raw)


def scheme_list(cfg: dict) -> list[str]:
    raw = cfg.get("schemes", cfg.get("scheme"))
    if raw is None:
        raise ConfigError("config needs scheme or schemes")
    if isinstance(raw, str):
        raw = [part for part in raw.replace(",", " ").split() if part]
    names = [str(s).strip().lower().replace("-", "").replace("_", "") for s in raw]
    for name in names:
        if name not in ALL_SCHEMES:
            raise ConfigError(f"unknown scheme {name!r}; available: {ALL_SCHEMES}")
    return names


def tau_list(cfg: dict) -> list[float]:
    raw = cfg.get("taus", cfg.get("tau"))
    if raw is None:
        raise ConfigError("config needs tau or taus")
    if isinstance(raw, str):
        raw = [part for part in raw.replace(",", " ").split() if part]
    if not isinstance(raw, (list, tuple)):
        raw = [raw]
    return [parse_timestep(v) for v in raw]


# ----------------------------------------------------- ground-state cache


def state_path(states_dir: Path, problem: ProblemSpec, n_elems: int) -> Path:
    return Path(states_dir) / f"{problem.name}_n{n_elems}.npz"


def obtain_initial_state(
    problem: ProblemSpec,
    mesh: Mesh,
    n_elems: int,
    states_dir,
    seed: int = 0,
    log=print,
) -> np.ndarray:
    """Interpolate the closed form, or fetch/compute a cached ground state."""
    if problem.exact is not None or problem.ground_init is None:
        return initial_state(problem, mesh)
    path = state_path(states_dir, problem, n_elems)
    if path.exists():
        try:
            cached = load_ground_state(path, problem.name, mesh)
            log(f"loaded ground state from {path}")
            return cached.u
        except ValueError as exc:
            log(f"ignoring stale state file {path}: {exc}")
    opts = GradientFlowOptions(seed=seed)
    result = ground_state(
        mesh,
        problem.ground_init.potential,
        problem.beta,
        omega=problem.ground_init.omega,
        kinetic_coeff=problem.kinetic_coeff,
        opts=opts,
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    save_ground_state(path, problem.name, mesh, result)
    log(f"computed ground state ({result.iterations} iterations) -> {path}")
    return result.u


# ----------------------------------------------------------- single cell


def execute_cell(
    problem: ProblemSpec,
    scheme: str,
    n_elems: int,
    tau: float,
    n_steps: int,
    *,
    u0: np.ndarray | None = None,
    mesh: Mesh | None = None,
    operators: Operators | None = None,
    newton_opts: NewtonOptions | None = None,
    re_init: str = "simple",
    observe_every: int = 1,
    compute_errors: bool = True,
    energy_ceiling_rel: float | None = None,
    stop_when_energy_above: float | None = None,
    keep_final_state: bool = False,
) -> RunReport:
    """One evolution; splitting runs route to the spectral integrator."""
    if scheme == "sp2":
        return run_spectral(
            problem,
            n_elems,
            tau=tau,
            n_steps=n_steps,
            u0=u0,
            observe_every=observe_every,
            compute_errors=compute_errors,
            stop_when_energy_above=stop_when_energy_above,
            keep_final_state=keep_final_state,
        )
    return run_evolution(
        problem,
        scheme,
        n_elems,
        tau=tau,
        n_steps=n_steps,
        mesh=mesh,
        u0=None if u0 is None else u0.copy(),
        operators=operators,
        newton_opts=newton_opts,
        re_init=re_init,
        observe_every=observe_every,
        compute_errors=compute_errors,
        energy_ceiling_rel=energy_ceiling_rel,
        stop_when_energy_above=stop_when_energy_above,
        keep_final_state=keep_final_state,
    )


def _cell_worker(payload: dict) -> dict:
    """Run one sweep cell in a worker process; never raises."""
    problem = problem_catalog()[payload["problem"]]
    if payload["profile"] == "desk":
        problem = desk_variant(problem)
    scheme = payload["scheme"]
    u0 = payload.get("u0")
    result = {
        "scheme": scheme,
        "tau": payload["tau"],
        "n_elems": payload["n_elems"],
        "status": "ok",
        "err_l2": "",
        "err_h1": "",
        "err_l1rho": "",
        "mass_drift": "",
        "energy_drift": "",
        "blowup_time": "",
        "wall_s": "",
    }
    try:
        report = execute_cell(
            problem,
            scheme,
            payload["n_elems"],
            payload["tau"],
            payload["n_steps"],
            u0=u0,
            newton_opts=payload.get("newton_opts"),
            re_init=payload.get("re_init", "simple"),
            observe_every=payload.get("observe_every") or payload["n_steps"] or 1,
            compute_errors=payload["reference"] == "exact",
            energy_ceiling_rel=payload.get("energy_ceiling_rel"),
            stop_when_energy_above=payload.get("stop_when_energy_above"),
            keep_final_state=True,
        )
    except SolverError as exc:
        result["status"] = f"failed: {exc}"
        return result
    result["wall_s"] = report.wall_s
    result["mass_drift"] = mass_drift(report)
    result["energy_drift"] = energy_drift(report)
    if report.blew_up:
        result["status"] = "blowup"
        result["blowup_time"] = report.blowup_time
        return result
    if payload["reference"] == "exact":
        errs = report.final_errors
    elif payload.get("u_ref") is not None and scheme != "sp2":
        mesh = build_problem_mesh(problem, payload["n_elems"])
        errs = error_norms(mesh, report.final_state, payload["u_ref"])
    else:
        errs = None
    if errs is not None:
        result["err_l2"] = errs.l2
        result["err_h1"] = errs.h1
        result["err_l1rho"] = errs.l1_density
    return result


def _run_cells(payloads: list[dict], workers: int) -> list[dict]:
    if workers <= 1 or len(payloads) <= 1:
        return [_cell_worker(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_cell_worker, payloads))


# ------------------------------------------------------------ subcommands


def cmd_run(cfg: dict, out: Path, render_figures: bool = True) -> int:
    problem = resolve_problem(cfg)
    scheme = scheme_list(cfg)[0]
    n_elems = resolve_n_elems(cfg, problem)
    tau, n_steps, t_final = resolve_time_grid(cfg)
    observe_every = int(cfg.get("observe_every", max(1, n_steps // 512)))
    states_dir = Path(cfg.get("states_dir", out / "states"))
    seed = int(cfg.get("seed", 0))

    echo = dict(cfg)
    echo.update(
        command="run", problem=problem.name, scheme=scheme, n_elems=n_elems,
        tau=tau, n_steps=n_steps, t_final=t_final, observe_every=observe_every,
    )
    write_config_echo(echo, out / "config_echo.json")

    mesh = operators = u0 = None
    if scheme != "sp2":
        mesh = build_problem_mesh(problem, n_elems)
        operators = Operators.build(mesh, problem.potential, problem.kinetic_coeff)
        u0 = obtain_initial_state(problem, mesh, n_elems, states_dir, seed)
    try:
        report = execute_cell(
            problem, scheme, n_elems, tau, n_steps,
            u0=u0, mesh=mesh, operators=operators,
            newton_opts=resolve_newton(cfg),
            re_init=str(cfg.get("re_init", "simple")),
            observe_every=observe_every,
            compute_errors=bool(cfg.get("compute_errors", problem.exact is not None)),
            energy_ceiling_rel=cfg.get("energy_ceiling_rel"),
            stop_when_energy_above=cfg.get("stop_when_energy_above"),
            keep_final_state=True,
        )
    except SolverError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    report.config = echo
    write_observables_csv(report, out / "observables.csv")
    write_summary_csv([report], out / "summary.csv")
    if render_figures:
        plot_observables(report, out / "observables.png")
        if any(s.errors is not None for s in report.samples):
            plot_error_history(report, out / "error_history.png")
        if report.final_state is not None and scheme != "sp2":
            plot_density(mesh, report.final_state, out / "density_final.png",
                         title=f"{problem.name} {scheme} t={report.samples[-1].t:g}")
    drift = mass_drift(report)
    print(
        f"{problem.name} {scheme}: {report.completed_steps}/{n_steps} steps, "
        f"mass drift {drift:.3e}, wall {report.wall_s:.2f}s"
        + (f", blow-up at t={report.blowup_time:g}" if report.blew_up else "")
    )
    return 0


def _reference_states(problem, cfg, n_list, taus, states_dir, seed) -> dict:
    """Same-mesh fine-step reference state per element count."""
    ref = cfg.get("reference", "exact" if problem.exact is not None else None)
    if ref == "exact":
        if problem.exact is None:
            raise ConfigError(f"problem {problem.name} has no closed form reference")
        return {"mode": "exact", "states": {}}
    if ref is None:
        raise ConfigError("config needs reference: exact or {scheme, tau}")
    if not isinstance(ref, dict) or "scheme" not in ref or "tau" not in ref:
        raise ConfigError("reference must be 'exact' or a {scheme, tau} mapping")
    scheme = str(ref["scheme"]).lower()
    tau_ref = parse_timestep(ref["tau"])
    if min(taus) <= tau_ref:
        raise ConfigError("reference tau must be finer than every swept tau")
    _, _, t_final = resolve_time_grid(cfg, tau=taus[0])
    states = {}
    for n_elems in n_list:
        mesh = build_problem_mesh(problem, n_elems)
        operators = Operators.build(mesh, problem.potential, problem.kinetic_coeff)
        u0 = obtain_initial_state(problem, mesh, n_elems, states_dir, seed)
        report = execute_cell(
            problem, scheme, n_elems, tau_ref, round(t_final / tau_ref),
            u0=u0, mesh=mesh, operators=operators,
            re_init=str(cfg.get("re_init", "simple")),
            observe_every=10**9, compute_errors=False, keep_final_state=True,
        )
        if report.blew_up:
            raise SolverError(
                f"reference run blew up at t={report.blowup_time:g}"
            )
        states[n_elems] = report.final_state
    return {"mode": "state", "scheme": scheme, "tau": tau_ref, "states": states}


def cmd_converge(cfg: dict, out: Path, workers: int = 1,
                 render_figures: bool = True) -> int:
    problem = resolve_problem(cfg)
    schemes = scheme_list(cfg)
    taus = tau_list(cfg)
    n_raw = cfg.get("n_elems_list", cfg.get("n_elems", problem.n_desk))
    n_list = [int(v) for v in (n_raw if isinstance(n_raw, (list, tuple)) else [n_raw])]
    paired = len(n_list) > 1
    if paired and len(n_list) != len(taus):
        raise ConfigError("n_elems_list must match taus length for a paired scan")
    if paired:
        order = sorted(range(len(taus)), key=lambda i: -taus[i])
        taus = [taus[i] for i in order]
        n_list = [n_list[i] for i in order]
    else:
        taus = sorted(taus, reverse=True)
    for n_elems in n_list:
        resolve_n_elems({**cfg, "n_elems": n_elems}, problem)
    states_dir = Path(cfg.get("states_dir", out / "states"))
    seed = int(cfg.get("seed", 0))

    reference = _reference_states(problem, cfg, sorted(set(n_list)), taus,
                                  states_dir, seed)
    echo = dict(cfg)
    echo.update(command="converge", problem=problem.name, schemes=schemes,
                taus=taus, n_elems_list=n_list,
                reference="exact" if reference["mode"] == "exact"
                else {"scheme": reference["scheme"], "tau": reference["tau"]})
    write_config_echo(echo, out / "config_echo.json")

    payloads = []
    for scheme in schemes:
        for idx, tau in enumerate(taus):
            n_elems = n_list[idx] if paired else n_list[0]
            _, n_steps, _ = resolve_time_grid(cfg, tau=tau)
            mesh = build_problem_mesh(problem, n_elems) if scheme != "sp2" else None
            payloads.append(
                dict(
                    problem=problem.name, profile=cfg.get("profile", "desk"),
                    scheme=scheme, n_elems=n_elems, tau=tau, n_steps=n_steps,
                    u0=None if scheme == "sp2" else obtain_initial_state(
                        problem, mesh, n_elems, states_dir, seed),
                    newton_opts=resolve_newton(cfg),
                    re_init=str(cfg.get("re_init", "simple")),
                    reference=reference["mode"] if reference["mode"] == "exact"
                    else "state",
                    u_ref=reference["states"].get(n_elems),
                )
            )
    results = _run_cells(payloads, workers)

    rows = []
    taus_by_scheme, errs_by_scheme = {}, {}
    for scheme in schemes:
        cells = [r for r in results if r["scheme"] == scheme]
        cells.sort(key=lambda r: -r["tau"])
        ok = [(c["tau"], c["err_l2"]) for c in cells
              if c["status"] == "ok" and c["err_l2"] != ""]
        orders = {}
        if len(ok) >= 2:
            tau_ok = np.array([t for t, _ in ok])
            err_ok = np.array([e for _, e in ok])
            if np.all(err_ok > 0):
                pair = eoc(err_ok, tau_ok)
                orders = {ok[i + 1][0]: pair[i] for i in range(len(pair))}
        for cell in cells:
            rows.append(
                {
                    "problem": problem.name,
                    "scheme": scheme,
                    "n_elems": cell["n_elems"],
                    "tau": cell["tau"],
                    "err_l2": cell["err_l2"],
                    "err_h1": cell["err_h1"],
                    "err_l1rho": cell["err_l1rho"],
                    "eoc_l2": orders.get(cell["tau"], ""),
                    "mass_drift": cell["mass_drift"],
                    "energy_drift": cell["energy_drift"],
                    "status": cell["status"],
                    "wall_s": cell["wall_s"],
                }
            )
        series = [(t, e) for t, e in ok]
        if series:
            taus_by_scheme[scheme] = [t for t, _ in series]
            errs_by_scheme[scheme] = [e for _, e in series]

    import csv

    eoc_path = out / "eoc.csv"
    eoc_path.parent.mkdir(parents=True, exist_ok=True)
    with open(eoc_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    if render_figures and taus_by_scheme:
        plot_convergence(taus_by_scheme, errs_by_scheme, out / "convergence.png",
                         norm_label="L2 error")
    failures = [r for r in rows if r["status"].startswith("failed")]
    for row in rows:
        print(f"{row['scheme']:8s} tau={row['tau']:.6g} n={row['n_elems']} "
              f"L2={row['err_l2'] if row['err_l2'] != '' else '-'} "
              f"[{row['status']}]")
    return 1 if failures else 0


def cmd_groundstate(cfg: dict, out: Path, render_figures: bool = True) -> int:
    problem = resolve_problem(cfg)
    if problem.ground_init is None:
        raise ConfigError(f"problem {problem.name} does not define a ground state")
    n_elems = resolve_n_elems(cfg, problem)
    states_dir = Path(cfg.get("states_dir", out / "states"))
    seed = int(cfg.get("seed", 0))
    mesh = build_problem_mesh(problem, n_elems)
    path = state_path(states_dir, problem, n_elems)

    echo = dict(cfg)
    echo.update(command="groundstate", problem=problem.name, n_elems=n_elems,
                state_file=str(path))
    write_config_echo(echo, out / "config_echo.json")

    result = None
    if path.exists():
        try:
            result = load_ground_state(path, problem.name, mesh)
            print(f"loaded ground state from {path}")
        except ValueError as exc:
            print(f"ignoring stale state file {path}: {exc}")
    if result is None:
        start = time.perf_counter()
        result = ground_state(
            mesh,
            problem.ground_init.potential,
            problem.beta,
            omega=problem.ground_init.omega,
            kinetic_coeff=problem.kinetic_coeff,
            opts=GradientFlowOptions(seed=seed),
        )
        path.parent.mkdir(parents=True, exist_ok=True)
        save_ground_state(path, problem.name, mesh, result)
        print(f"computed ground state in {time.perf_counter() - start:.1f}s -> {path}")

    import csv

    with open(out / "groundstate.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["problem", "n_elems", "h", "lam", "energy",
                         "iterations", "residual", "converged"])
        writer.writerow([problem.name, n_elems, mesh.h, result.lam, result.energy,
                         result.iterations, result.residual, result.converged])
    if render_figures:
        plot_density(mesh, result.u, out / "groundstate_density.png",
                     title=f"{problem.name} ground state")
    print(f"{problem.name}: lam={result.lam:.6f} energy={result.energy:.6f} "
          f"({result.iterations} iterations)")
    return 0 if result.converged else 1


def cmd_stability(cfg: dict, out: Path, workers: int = 1,
                  render_figures: bool = True) -> int:
    problem = resolve_problem(cfg)
    schemes = scheme_list(cfg)
    taus = sorted(tau_list(cfg), reverse=True)
    n_elems = resolve_n_elems(cfg, problem)
    states_dir = Path(cfg.get("states_dir", out / "states"))
    seed = int(cfg.get("seed", 0))
    ceiling_rel = cfg.get("energy_ceiling_rel")
    threshold = cfg.get("energy_above")
    if ceiling_rel is None and threshold is None:
        raise ConfigError("stability needs energy_ceiling_rel or energy_above")

    echo = dict(cfg)
    echo.update(command="stability", problem=problem.name, schemes=schemes,
                taus=taus, n_elems=n_elems)
    write_config_echo(echo, out / "config_echo.json")

    needs_fem_state = any(s != "sp2" for s in schemes)
    u0 = None
    if needs_fem_state:
        mesh = build_problem_mesh(problem, n_elems)
        u0 = obtain_initial_state(problem, mesh, n_elems, states_dir, seed)

    payloads = []
    for scheme in schemes:
        for tau in taus:
            _, n_steps, _ = resolve_time_grid(cfg, tau=tau)
            stride = int(cfg.get("observe_every", max(1, n_steps // 512)))
            payloads.append(
                dict(
                    problem=problem.name, profile=cfg.get("profile", "desk"),
                    scheme=scheme, n_elems=n_elems, tau=tau, n_steps=n_steps,
                    u0=None if scheme == "sp2" else u0,
                    newton_opts=resolve_newton(cfg),
                    re_init=str(cfg.get("re_init", "simple")),
                    reference="none",
                    observe_every=stride,
                    energy_ceiling_rel=None if ceiling_rel is None
                    else float(ceiling_rel),
                    stop_when_energy_above=None if threshold is None
                    else float(threshold),
                )
            )
    results = _run_cells(payloads, workers)

    import csv

    rows, times_by_scheme = [], {}
    for res in sorted(results, key=lambda r: (r["scheme"], -r["tau"])):
        crossing = res["blowup_time"] if res["status"] == "blowup" else "none"
        if res["status"].startswith("failed"):
            crossing = res["status"]
        rows.append({"problem": problem.name, "scheme": res["scheme"],
                     "n_elems": n_elems, "tau": res["tau"],
                     "crossing_time": crossing, "wall_s": res["wall_s"]})
        times_by_scheme.setdefault(res["scheme"], []).append(
            (res["tau"], res["blowup_time"] if res["status"] == "blowup" else None)
        )
    with open(out / "stability.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    if render_figures:
        _, _, t_final = resolve_time_grid(cfg, tau=taus[0])
        plot_blowup_times(
            {s: [t for t, _ in v] for s, v in times_by_scheme.items()},
            {s: [c for _, c in v] for s, v in times_by_scheme.items()},
            t_final, out / "blowup_times.png",
        )
    for row in rows:
        print(f"{row['scheme']:8s} tau={row['tau']:.6g} "
              f"crossing={row['crossing_time']}")
    failures = [r for r in rows
                if isinstance(r["crossing_time"], str)
                and r["crossing_time"].startswith("failed")]
    return 1 if failures else 0


# ------------------------------------------------------------------ main


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gpefem",
        description="Benchmark five conservative FEM time discretizations "
        "of the Gross-Pitaevskii equation plus a splitting reference.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="YAML configuration file")
        p.add_argument("--out", type=Path, default=Path("gpefem_out"),
                       help="output directory (default: gpefem_out)")
        p.add_argument("--profile", choices=("desk", "paper"),
                       help="resolution profile (default: desk)")
        p.add_argument("--workers", type=int, default=1,
                       help="parallel sweep cells (default: 1)")
        p.add_argument("--seed", type=int,
                       help="seed for randomized ground-state starts")
        p.add_argument("--no-figures", action="store_true",
                       help="skip figure rendering")
        p.add_argument("--problem", help="catalog problem name")
        p.add_argument("--n-elems", type=int, dest="n_elems",
                       help="elements per axis")
        p.add_argument("--t-final", type=float, dest="t_final",
                       help="final time")
        p.add_argument("--states-dir", dest="states_dir",
                       help="ground-state cache directory")

    p_run = sub.add_parser("run", help="single evolution with observables")
    common(p_run)
    p_run.add_argument("--scheme", help="im|cn|re|lcn|twostep|sp2")
    p_run.add_argument("--tau", help="time step, e.g. 0.015625 or 2^-6")
    p_run.add_argument("--steps", type=int, dest="n_steps", help="step count")

    p_conv = sub.add_parser("converge", help="time-step error sweep with EOC")
    common(p_conv)
    p_conv.add_argument("--schemes", help="comma separated scheme list")
    p_conv.add_argument("--taus", help="comma separated time steps")

    p_gs = sub.add_parser("groundstate", help="compute or reload a ground state")
    common(p_gs)

    p_stab = sub.add_parser("stability", help="energy-threshold crossing times")
    common(p_stab)
    p_stab.add_argument("--schemes", help="comma separated scheme list")
    p_stab.add_argument("--taus", help="comma separated time steps")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    file_cfg = load_config(args.config) if args.config else {}
    overrides = {
        key: getattr(args, key, None)
        for key in ("problem", "scheme", "schemes", "n_elems", "tau", "taus",
                    "t_final", "n_steps", "profile", "seed", "states_dir")
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    render = not args.no_figures
    try:
        cfg = resolve_section(file_cfg, args.command, overrides)
        if args.command == "run":
            return cmd_run(cfg, out, render)
        if args.command == "converge":
            return cmd_converge(cfg, out, args.workers, render)
        if args.command == "groundstate":
            return cmd_groundstate(cfg, out, render)
        return cmd_stability(cfg, out, args.workers, render)
    except ConfigError as exc:
        parser.error(str(exc))
    return 0


if __name__ == "__main__":
    sys.exit(main())

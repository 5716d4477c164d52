"""Run orchestration: case setup from a RunConfig, the time loop with
adaptation and snapshots, and the end-of-run summary artifacts."""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import bench
from .amr import AdaptiveMesh, adapt, flag_cells
from .config import ConfigError, RunConfig, serialize_config
from .mesh import Mesh, jittered_mesh, read_mesh, stretched_mesh, uniform_diagonal_mesh
from .physics import primitive
from .qp import MAX_ITERATIONS
from .time_integration import SCALAR, Scheme, SolverAbort, TimeStepPolicy
from .vtk_io import write_vtk


@dataclass
class RunResult:
    exit_code: int
    steps: int
    final_time: float
    state: np.ndarray
    mesh: Mesh
    conservation_drift: float
    qp_histogram: np.ndarray
    field_ranges: dict
    diagnostic: str = ""
    outputs: list = field(default_factory=list)


def _build_mesh(cfg: RunConfig, case: str) -> Optional[Mesh]:
    g = cfg.mesh
    if g.generator == "file":
        return read_mesh(g.file)
    n = cfg.resolution or 0
    if case == bench.DOUBLE_SINE and g.generator in ("uniform", "jittered"):
        if g.generator == "uniform" and not n:
            return None
        n = n or 32
        if g.generator == "jittered":
            return jittered_mesh(
                n, n, amplitude=g.jitter, seed=cfg.seed, periodic=True
            )
        return uniform_diagonal_mesh(n, n, periodic=True)
    if case == bench.SOLID_BODY_ROTATION and g.generator == "jittered":
        n = n or 20
        return jittered_mesh(n, 2 * n, amplitude=g.jitter, seed=cfg.seed)
    return None  # the case builds its own default


def build_setup(cfg: RunConfig) -> bench.CaseSetup:
    if not cfg.case:
        raise ConfigError(
            "case is required (custom problems are set up through the API)"
        )
    mesh = _build_mesh(cfg, cfg.case)
    setup = bench.setup_case(
        cfg.case,
        cfg.resolution or None,
        seed=cfg.seed,
        flux=cfg.flux or None,
        mesh=mesh,
    )
    if cfg.equation and cfg.equation != setup.kind:
        raise ConfigError(
            f"equation: case {cfg.case!r} is {setup.kind!r}, not {cfg.equation!r}"
        )
    pol = setup.policy
    policy = TimeStepPolicy(
        cfl_number=cfg.time.cfl,
        beta=cfg.time.beta,
        fixed_dt=cfg.time.fixed_dt or pol.fixed_dt,
        cfl_mode=cfg.time.cfl_mode,
    )
    setup.policy = policy
    if cfg.time.end > 0.0:
        setup.end_time = cfg.time.end
    if cfg.amr.enabled and setup.amr is None:
        setup.amr = bench.AmrConfig(
            threshold=cfg.amr.threshold, interval=cfg.amr.interval
        )
    elif setup.amr is not None:
        setup.amr.threshold = cfg.amr.threshold or setup.amr.threshold
        setup.amr.interval = cfg.amr.interval or setup.amr.interval
        if not (cfg.amr.enabled or cfg.case == bench.FORWARD_STEP):
            setup.amr = None
    return setup


def _make_scheme(setup: bench.CaseSetup, mesh: Mesh, cfg: RunConfig) -> Scheme:
    return Scheme(
        mesh,
        setup.kind,
        velocity=setup.velocity,
        flux=setup.flux,
        method=cfg.reconstruction,
        bcs=setup.bcs,
        policy=setup.policy,
        gamma=setup.gamma,
        integrator=cfg.time.integrator,
    )


def _field_dict(kind: str, state: np.ndarray, gamma: float, mesh: Mesh) -> dict:
    if kind == SCALAR:
        return {"u": state}
    rho, u, v, p = primitive(state, gamma)
    return {"rho": rho, "u": u, "v": v, "p": p, "E": state[:, 3]}


def run(cfg: RunConfig, *, quiet: bool = False) -> RunResult:
    """Execute one configured run; write snapshots, history, and a summary."""
    outdir = Path(cfg.output.directory)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "config.txt").write_text(serialize_config(cfg))

    setup = build_setup(cfg)
    state = setup.state
    end = setup.end_time
    amesh = None
    if setup.amr is not None:
        amesh = AdaptiveMesh.from_background(setup.mesh)
        if setup.amr.pinned.size:
            flags = np.zeros(amesh.leaf.num_cells, dtype=np.int8)
            flags[setup.amr.pinned] = 1
            amesh, state = adapt(amesh, state, flags, gamma=setup.gamma)
    mesh = amesh.leaf if amesh is not None else setup.mesh
    scheme = _make_scheme(setup, mesh, cfg)

    n_snap = max(cfg.output.snapshots, 0)
    snap_times = [end * (k + 1) / (n_snap + 1) for k in range(n_snap)] + [end]
    outputs = []

    def snapshot(tag, t_now, current_mesh, current_state):
        if not cfg.output.vtk:
            return
        path = outdir / f"{cfg.case}_{tag}.vtk"
        write_vtk(
            current_mesh,
            _field_dict(setup.kind, current_state, setup.gamma, current_mesh),
            path,
            title=f"{cfg.case} t={t_now:.6g}",
        )
        outputs.append(path)

    snapshot("0000", 0.0, mesh, state)
    totals0 = scheme.totals(state)
    qp_hist = np.zeros(MAX_ITERATIONS + 1, dtype=np.int64)
    history = ["step,time,dt,cells"]

    t, steps, snap_idx = 0.0, 0, 0
    exit_code, diagnostic = 0, ""
    try:
        while t < end - 1e-12 * max(end, 1.0):
            cap = snap_times[snap_idx] - t
            state, info = scheme.advance(state, t, dt_cap=cap)
            t += info.dt
            steps += 1
            history.append(f"{steps},{t:.17g},{info.dt:.17g},{mesh.num_cells}")

            if (
                amesh is not None
                and setup.amr.interval > 0
                and steps % setup.amr.interval == 0
            ):
                flags = flag_cells(mesh, state, setup.amr.threshold, setup.gamma)
                if setup.amr.pinned.size:
                    pin = np.isin(amesh.leaf_parent, setup.amr.pinned)
                    flags[pin & (amesh.leaf_child < 0)] = 1
                    flags[pin & (amesh.leaf_child >= 0)] = np.maximum(
                        flags[pin & (amesh.leaf_child >= 0)], 0
                    )
                new_amesh, new_state = adapt(amesh, state, flags, gamma=setup.gamma)
                if new_amesh is not amesh:
                    amesh, state = new_amesh, new_state
                    mesh = amesh.leaf
                    qp_hist += scheme.qp_histogram
                    recon_s = scheme.recon_seconds
                    scheme = _make_scheme(setup, mesh, cfg)
                    scheme.recon_seconds = recon_s

            while snap_idx < len(snap_times) and t >= snap_times[snap_idx] - 1e-12:
                snapshot(f"{snap_idx + 1:04d}", t, mesh, state)
                snap_idx += 1
    except SolverAbort as exc:
        exit_code, diagnostic = 1, str(exc)

    qp_hist += scheme.qp_histogram
    totals = scheme.totals(state)
    l1 = scheme.totals(np.abs(state))
    denom = np.maximum(np.maximum(np.abs(totals0), l1), 1e-300)
    drift = float((np.abs(totals - totals0) / denom).max())

    (outdir / "history.csv").write_text("\n".join(history) + "\n")
    outputs.append(outdir / "history.csv")

    ranges = {
        name: (float(arr.min()), float(arr.max()))
        for name, arr in _field_dict(setup.kind, state, setup.gamma, mesh).items()
    }
    if cfg.output.summary:
        lines = [
            f"case: {cfg.case}",
            f"exit: {exit_code}" + (f" ({diagnostic})" if diagnostic else ""),
            f"steps: {steps}",
            f"final time: {t:.12g}",
            f"cells: {mesh.num_cells}",
            f"conservation drift (relative): {drift:.3e}",
        ]
        for name, (lo, hi) in ranges.items():
            lines.append(f"range {name}: [{lo:.6g}, {hi:.6g}]")
        total_solves = int(qp_hist.sum())
        lines.append("qp iteration histogram: " + " ".join(
            f"{k}:{int(qp_hist[k])}" for k in range(1, len(qp_hist))
        ))
        if total_solves:
            mean_iters = float(
                (np.arange(len(qp_hist)) * qp_hist).sum() / total_solves
            )
            lines.append(f"qp mean iterations: {mean_iters:.3f}")
        lines.append(f"reconstruction seconds: {scheme.recon_seconds:.3f}")
        (outdir / "summary.txt").write_text("\n".join(lines) + "\n")
        outputs.append(outdir / "summary.txt")
        if not quiet:
            print("\n".join(lines))

    return RunResult(
        exit_code=exit_code,
        steps=steps,
        final_time=t,
        state=state,
        mesh=mesh,
        conservation_drift=drift,
        qp_histogram=qp_hist,
        field_ranges=ranges,
        diagnostic=diagnostic,
        outputs=outputs,
    )


def convergence_table(
    case: str,
    resolutions,
    methods=("ilr",),
    *,
    seed: int = 0,
    flux: Optional[str] = None,
    cfl: float = 0.3,
) -> dict:
    """Error norms and observed orders over a resolution ladder.

    Returns {method: [ErrorReport, ...]} with orders filled between
    consecutive rows (factor-2 refinement assumed for the rate exponent).
    """
    out = {}
    for method in methods:
        reports = []
        for n in resolutions:
            setup = bench.setup_case(case, n, seed=seed, flux=flux)
            if setup.exact is None:
                raise ValueError(f"case {case!r} has no exact solution")
            scheme = Scheme(
                setup.mesh,
                setup.kind,
                velocity=setup.velocity,
                flux=setup.flux,
                method=method,
                bcs=setup.bcs,
                policy=TimeStepPolicy(cfl_number=cfl),
                gamma=setup.gamma,
            )
            state, t = setup.state, 0.0
            while t < setup.end_time - 1e-12:
                state, info = scheme.advance(state, t, dt_cap=setup.end_time - t)
                t += info.dt
            rep = bench.error_norms(
                setup.mesh, state, lambda x, y: setup.exact(x, y, setup.end_time)
            )
            rep.recon_seconds = scheme.recon_seconds
            if reports:
                ratio = math.log(2.0)
                rep.l1_order = math.log(reports[-1].l1 / rep.l1) / ratio
                rep.linf_order = math.log(reports[-1].linf / rep.linf) / ratio
            reports.append(rep)
        out[method] = reports
    return out


def format_convergence_csv(tables: dict) -> str:
    lines = ["method,cells,l1,l1_order,linf,linf_order,recon_seconds"]
    for method, reports in tables.items():
        for r in reports:
            lines.append(
                f"{method},{r.cells},{r.l1:.6e},{r.l1_order:.3f},"
                f"{r.linf:.6e},{r.linf_order:.3f},{r.recon_seconds:.3f}"
            )
    return "\n".join(lines) + "\n"

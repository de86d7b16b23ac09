"""Command-line driver: solve, rcs-sweep, cbf-inspect, mie, mesh-gen."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .errors import ConfigError, DegenerateRangeError, DualCbfError


def _common(p: argparse.ArgumentParser, config_required: bool = True):
    p.add_argument("--config", required=config_required, help="scene config (JSON)")
    p.add_argument("--out", help="output directory (default: config 'output' or out/<name>)")
    p.add_argument("--threads", type=int, default=None, help="worker threads for compiled kernels")
    p.add_argument("--seed", type=int, default=0, help="reserved; does not affect results")
    p.add_argument("--solver", default=None, help="override the configured solver")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dualcbf", description="PMCHWT scattering with dual CBFs and a Calderon preconditioner")
    sub = ap.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("solve", help="solve one incidence (first sweep direction)"))
    _common(sub.add_parser("rcs-sweep", help="monostatic RCS sweep for one or more solvers"))
    _common(sub.add_parser("cbf-inspect", help="generate CBFs, dump spectra and the duality residual"))
    mie = sub.add_parser("mie", help="Mie-series backscatter of a dielectric sphere")
    _common(mie, config_required=False)
    mie.add_argument("--diameter", type=float, default=None, help="sphere diameter in wavelengths")
    mie.add_argument("--eps-r", type=float, default=None)
    mie.add_argument("--mu-r", type=float, default=None)
    _common(sub.add_parser("mesh-gen", help="generate or load the mesh and write it as JSON"))
    return ap


def _out_dir(args, cfg) -> Path:
    if args.out:
        return Path(args.out)
    if cfg is not None and cfg.output:
        return Path(cfg.output)
    return Path("out") / (cfg.name if cfg is not None else args.command)


def _set_threads(n):
    if n is None:
        return
    if n < 1:
        raise ConfigError("--threads must be >= 1", field="--threads")
    import numba

    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _scene_summary(scene) -> dict:
    return {"triangles": scene.mesh.n_triangles, "edges": scene.basis.n, "unknowns": scene.n}


def _solver_name(args, cfg) -> str:
    from .postprocess import SOLVERS

    name = args.solver or cfg.solver.name
    if name not in SOLVERS:
        raise ConfigError(f"unknown solver {name!r}; choose from {', '.join(SOLVERS)}", field="--solver")
    return name


def cmd_solve(args, cfg, out: Path, log: io.JsonLog) -> dict:
    from .cbfm import build_cbf_set, build_reduced, solve_baseline_mom, solve_cbfm
    from .config import build_scene
    from .krylov import LUFactor
    from .postprocess import backscatter_sigma, to_db

    solver = _solver_name(args, cfg)
    t = time.perf_counter()
    scene = build_scene(cfg)
    log.stage("mesh", time.perf_counter() - t, **_scene_summary(scene))
    Z = scene.Z
    log.stage("assembly", scene.timings["assembly"])
    wave = cfg.sweep.waves()[0]
    v = scene.excitation([wave])[:, 0]
    timings = {"assembly": scene.timings["assembly"], "cbf_gen": 0.0}
    info: dict = {}
    t = time.perf_counter()
    if solver.startswith("cbfm"):
        cbf = build_cbf_set(scene.partition, Z, scene.excitation(cfg.cbf.waves()), scene.G, cfg.cbf)
        rs = build_reduced(cbf, Z, scene.G)
        timings["cbf_gen"] = time.perf_counter() - t
        log.stage("cbf_gen", timings["cbf_gen"], n_cbf=rs.n_cbf, cells=cbf.partition.n_cells, g_cbf_diagonal=rs.diagonal)
        t = time.perf_counter()
        j, rep = solve_cbfm(rs, v, cfg.solver.tol, cfg.solver.max_iter, "cmp" if solver == "cbfm-cmp" else "none", cfg.solver.inner_tol)
        info.update(n_cbf=rs.n_cbf, g_cbf_diagonal=rs.diagonal, inner_solves=rep.inner_solves, inner_max_iterations=rep.inner_max_iterations)
    elif solver == "mom-baseline":
        j, rep = solve_baseline_mom(Z, v, cfg.solver.tol, cfg.solver.max_iter, cfg.solver.restart)
    else:
        j = LUFactor(Z).solve(v)
        rep = None
    timings["iter"] = time.perf_counter() - t
    timings["total"] = timings["cbf_gen"] + timings["iter"]
    log.stage("iter", timings["iter"], iterations=rep.iterations if rep else 0)
    io.write_matrix(out / "solution.bin", j, layout="column [alpha_M; alpha_J]")
    io.write_residuals(out / "residuals.csv", rep.history if rep else [])
    sigma = backscatter_sigma(j, scene.basis, scene.exterior, wave.theta_deg, wave.phi_deg, wave.pol, scene.quad)
    return {
        "solver": solver,
        "wave": {"theta_deg": wave.theta_deg, "phi_deg": wave.phi_deg, "pol": wave.pol},
        "iterations": rep.iterations if rep else 0,
        "converged": rep.converged if rep else True,
        "final_residual": rep.final_residual if rep else 0.0,
        "true_residual": rep.true_residual if rep else float(np.linalg.norm(Z @ j - v) / np.linalg.norm(v)),
        "rcs_db": float(to_db(sigma)),
        "timings": timings,
        **_scene_summary(scene),
        **info,
    }


def cmd_rcs_sweep(args, cfg, out: Path, log: io.JsonLog) -> dict:
    from .config import build_scene
    from .postprocess import monostatic_rcs, rmse

    solvers = [_solver_name(args, cfg)] if args.solver else list(cfg.rcs_solvers)
    ref = cfg.rcs_reference
    if ref not in solvers:
        solvers.insert(0, ref)
    t = time.perf_counter()
    scene = build_scene(cfg)
    log.stage("mesh", time.perf_counter() - t, **_scene_summary(scene))
    _ = scene.Z
    scene.drop_blocks()
    log.stage("assembly", scene.timings["assembly"])
    results = {}
    for name in solvers:
        res = monostatic_rcs(
            scene, name, cfg.sweep, cfg.solver.tol, cfg.solver.max_iter, cfg.cbf,
            restart=cfg.solver.restart, inner_tol=cfg.solver.inner_tol,
        )
        results[name] = res
        io.write_pattern(out / f"rcs_{name}.csv", res.pattern)
        io.write_csv(
            out / f"iterations_{name}.csv",
            ["theta_deg", "phi_deg", "pol", "iterations", "converged"],
            ((float(t_), float(p_), pol, it, int(c)) for (t_, p_, pol, _), it, c in zip(res.pattern.rows(), res.iterations, res.converged)),
        )
        log.stage(f"sweep:{name}", res.timings["total"], **res.timings, mean_iterations=float(np.mean(res.iterations)), **res.extra)
    base_total = results[ref].timings["total"]
    timing = {}
    for name, res in results.items():
        tm = dict(res.timings)
        tm.update(
            cbf_gen_ratio=tm["cbf_gen"] / base_total,
            iter_ratio=tm["iter"] / base_total,
            total_ratio=tm["total"] / base_total,
        )
        timing[name] = tm
    scores, notes = {}, {}
    for name, res in results.items():
        if name != ref:
            try:
                val = rmse(res.pattern, results[ref].pattern)
            except DegenerateRangeError as exc:
                # e.g. a one-direction sweep: the metric is undefined, the patterns are still written
                scores[name] = None
                notes[name] = str(exc)
                continue
            scores[name] = val if np.isfinite(val) else "-inf"
    io.atomic_write_json(out / "rmse.json", {"reference": ref, "rmse_db": scores, **({"notes": notes} if notes else {})})
    io.atomic_write_json(out / "timing.json", {"reference": ref, "assembly": scene.timings["assembly"], "solvers": timing})
    return {
        "solvers": solvers,
        "directions": len(results[ref].pattern),
        "rmse_db": scores,
        "timing": timing,
        "extra": {k: r.extra for k, r in results.items()},
        **_scene_summary(scene),
    }


def cmd_cbf_inspect(args, cfg, out: Path, log: io.JsonLog) -> dict:
    from .cbfm import build_cbf_set, cbf_gram
    from .config import build_scene

    scene = build_scene(cfg)
    Z = scene.Z
    scene.drop_blocks()
    log.stage("assembly", scene.timings["assembly"], **_scene_summary(scene))
    t = time.perf_counter()
    cbf = build_cbf_set(scene.partition, Z, scene.excitation(cfg.cbf.waves()), scene.G, cfg.cbf)
    log.stage("cbf_gen", time.perf_counter() - t)
    io.write_spectra(out / "spectra.csv", cbf)
    _, diagonal = cbf_gram(cbf, scene.G)
    report = {
        "cells": cbf.partition.n_cells,
        "waves": len(cfg.cbf.waves()),
        "L": cbf.L.tolist(),
        "n_cbf": cbf.n_cbf,
        "duality_residual": cbf.duality_residual(scene.G),
        "g_cbf_diagonal": diagonal,
    }
    io.atomic_write_json(out / "duality.json", report)
    return report


def cmd_mie(args, cfg, out: Path, log: io.JsonLog) -> dict:
    from .postprocess import SweepSpec, mie_rcs

    mie = dict(cfg.mie) if cfg is not None else {}
    diameter = args.diameter if args.diameter is not None else mie.get("diameter")
    if diameter is None:
        raise ConfigError("sphere diameter required (--diameter or mie.diameter)", field="mie.diameter")
    eps = args.eps_r if args.eps_r is not None else mie.get("eps_r", 1.0)
    mu = args.mu_r if args.mu_r is not None else mie.get("mu_r", 1.0)
    eps = complex(*eps) if isinstance(eps, list) else eps
    mu = complex(*mu) if isinstance(mu, list) else mu
    sweep = cfg.sweep if cfg is not None else SweepSpec(0.0, 1.0, 1)
    if diameter <= 0:
        raise ConfigError("diameter must be positive", field="mie.diameter")
    pat = mie_rcs(diameter / 2, eps, mu, thetas=[w.theta_deg for w in sweep.waves()], phi_deg=sweep.phi, pol=sweep.pol)
    io.write_pattern(out / "rcs_mie.csv", pat)
    val = float(pat.rcs_db[0])
    return {"diameter": diameter, "eps_r": str(eps), "mu_r": str(mu), "rcs_db": val if np.isfinite(val) else "-inf"}


def cmd_mesh_gen(args, cfg, out: Path, log: io.JsonLog) -> dict:
    from .config import build_mesh
    from .mesh import build_rwg, partition_cells, save_mesh

    mesh = build_mesh(cfg)
    save_mesh(mesh, out / "mesh.json")
    basis = build_rwg(mesh)
    spec = dict(cfg.partition)
    mode = spec.pop("mode", "cube")
    part = partition_cells(basis, mesh, mode=mode, **spec)
    return {
        "vertices": mesh.n_vertices,
        "triangles": mesh.n_triangles,
        "edges": basis.n,
        "unknowns": 2 * basis.n,
        "components": mesh.n_components,
        "cells": part.n_cells,
        "cell_sizes": part.sizes.tolist(),
        "signed_volume": mesh.signed_volume(),
    }


COMMANDS = {
    "solve": cmd_solve,
    "rcs-sweep": cmd_rcs_sweep,
    "cbf-inspect": cmd_cbf_inspect,
    "mie": cmd_mie,
    "mesh-gen": cmd_mesh_gen,
}


def main(argv=None) -> int:
    from .config import load_config

    args = build_parser().parse_args(argv)
    cfg = None
    out = Path(args.out) if args.out else Path("out") / args.command
    log = None
    try:
        if args.config:
            cfg = load_config(args.config)
        out = _out_dir(args, cfg)
        out.mkdir(parents=True, exist_ok=True)
        log = io.JsonLog(out / "log.jsonl")
        log.event("start", command=args.command, config=args.config, threads=args.threads, seed=args.seed)
        _set_threads(args.threads)
        if cfg is not None:
            io.atomic_write_json(out / "config.json", cfg.raw)
        summary = COMMANDS[args.command](args, cfg, out, log)
        io.atomic_write_json(out / "summary.json", summary)
        log.event("done", status=0)
        log.flush()
        print(json.dumps({"status": "ok", "out": str(out)}))
        return 0
    except DualCbfError as exc:
        err = {"status": "error", "error": exc.code, "message": str(exc)}
        for attr in ("field", "cell"):
            if getattr(exc, attr, None) is not None:
                err[attr] = getattr(exc, attr)
        return _fail(err, out, log, 2)
    except (OSError, MemoryError) as exc:
        return _fail({"status": "error", "error": "io_error", "message": str(exc)}, out, log, 3)


def _fail(err: dict, out: Path, log, code: int) -> int:
    try:
        out.mkdir(parents=True, exist_ok=True)
        io.atomic_write_json(out / "error.json", err)
        if log is not None:
            log.event("error", **err)
            log.flush()
    except OSError:
        pass
    print(json.dumps(err), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())

"""Command line front end: train, solve, validate, bench.

All tabular output is CSV with a leading comment line carrying the model
fingerprint and the seed, so every table is reproducible from the file alone.
Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time

import numpy as np

from . import pipeline
from .config import ConfigError, load_config
from .mesh_fem import assemble, solve_full

__all__ = ["main"]

SWEEP_GRIDS = {
    "ms": [1, 4, 9, 14, 19, 36],
    "msj": [1, 2, 3, 4, 5, 6],
    "ns": [1, 2, 3, 4, 5, 6],
    "p": [1, 3, 5, 7, 9],
}


def _apply_thread_limit() -> None:
    """DDMR_THREADS bounds worker threads, including the BLAS pools."""
    raw = os.environ.get("DDMR_THREADS")
    if not raw:
        return
    try:
        n = max(1, int(raw))
    except ValueError:
        raise ConfigError(f"DDMR_THREADS must be an integer, got {raw!r}")
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS"):
        os.environ[var] = str(n)
    try:
        from threadpoolctl import threadpool_limits
        threadpool_limits(limits=n)
    except ImportError:
        pass


def _csv_writer(fh, model, seed):
    fh.write(f"# fingerprint={model.fingerprint} seed={seed}\n")
    return csv.writer(fh, lineterminator="\n")


def cmd_train(args) -> int:
    config = load_config(args.config)
    progress = None if args.quiet else lambda msg: print(msg, file=sys.stderr)
    model = pipeline.offline_train(config, progress=progress)
    pipeline.save_model(model, args.out)

    costs_path = args.costs or (args.out + ".costs.csv")
    with open(costs_path, "w", encoding="utf-8") as fh:
        w = _csv_writer(fh, model, config.seed)
        w.writerow(["stage", "wall_seconds", "fe_units"])
        for stage, seconds, units in model.stage_costs:
            w.writerow([stage, f"{seconds:.6f}", f"{units:.3f}"])
    print(f"model written to {args.out}, stage costs to {costs_path}")
    return 0


def cmd_solve(args) -> int:
    model = pipeline.load_model(args.model)
    rng = np.random.default_rng(args.seed)
    if args.reconstruct:
        os.makedirs(args.reconstruct, exist_ok=True)
    with open(args.out, "w", encoding="utf-8") as fh:
        w = _csv_writer(fh, model, args.seed)
        w.writerow(["sample", "t_project", "t_eval", "t_schur", "t_solve",
                    "t_recover", "clamped"])
        for k in range(args.samples):
            y = pipeline.draw_global(model.config, rng)
            res = pipeline.online_solve(model, y)
            t = res.timings
            w.writerow([k] + [f"{t[key]:.6e}" for key in
                              ("t_project", "t_eval", "t_schur",
                               "t_solve", "t_recover")] + [res.clamped])
            if args.reconstruct:
                u = pipeline.reconstruct(model, res)
                np.save(os.path.join(args.reconstruct, f"sample_{k:06d}.npy"), u)
    print(f"{args.samples} online solves written to {args.out}")
    return 0


def _sweep_models(model, knob: str):
    cfg = model.config
    trained = {"ms": cfg.m_interior, "msj": cfg.m_interface,
               "ns": cfg.local_dim, "p": cfg.poly_order}[knob]
    values = sorted({min(v, trained) for v in SWEEP_GRIDS[knob]} | {trained})
    if knob == "p":
        # training assembly is shared across orders, so fit them in one pass
        yield from pipeline.refit_surrogate_many(model, values)
        return
    for v in values:
        if knob == "ms":
            yield v, pipeline.truncate_model(model, m_interior=v)
        elif knob == "msj":
            yield v, pipeline.truncate_model(model, m_interface=v)
        else:
            yield v, pipeline.refit_surrogate(model, n_local_modes=v)


def cmd_validate(args) -> int:
    model = pipeline.load_model(args.model)
    if args.sweep not in SWEEP_GRIDS:
        raise ConfigError(f"unknown sweep knob {args.sweep!r}")
    if args.sweep == "ns" and model.config.noise == "white":
        raise ConfigError("the ns sweep does not apply to white noise models")

    rng = np.random.default_rng(args.seed)
    ys = [pipeline.draw_global(model.config, rng) for _ in range(args.samples)]
    truths = [pipeline.solve_reference(model, y) for y in ys]
    norms = [np.linalg.norm(u) for u in truths]

    with open(args.out, "w", encoding="utf-8") as fh:
        w = _csv_writer(fh, model, args.seed)
        w.writerow(["knob", "value", "mean_rel_l2", "max_rel_l2"])
        for value, m in _sweep_models(model, args.sweep):
            errs = []
            for y, u, nu in zip(ys, truths, norms):
                uh = pipeline.reconstruct(m, pipeline.online_solve(m, y))
                errs.append(np.linalg.norm(uh - u) / nu)
            w.writerow([args.sweep, value,
                        f"{np.mean(errs):.6e}", f"{np.max(errs):.6e}"])
            print(f"{args.sweep}={value}: mean {np.mean(errs):.3e} "
                  f"max {np.max(errs):.3e}", file=sys.stderr)
    print(f"error decay table written to {args.out}")
    return 0


def cmd_bench(args) -> int:
    model = pipeline.load_model(args.model)
    # the cost unit: one full FE solve on the model's mesh
    problem = pipeline.make_problem(model.config,
                                    pipeline.global_field(
                                        model, np.zeros(model.config.global_dim)))
    system = assemble(model.mesh, problem)
    t0 = time.perf_counter()
    solve_full(system)
    fe_unit = time.perf_counter() - t0

    rng = np.random.default_rng(args.seed)
    stages = ("t_project", "t_eval", "t_schur", "t_solve", "t_recover")
    samples = {key: [] for key in stages}
    totals = []
    for _ in range(args.samples):
        res = pipeline.online_solve(model, pipeline.draw_global(model.config, rng))
        for key in stages:
            samples[key].append(res.timings[key])
        totals.append(sum(res.timings.values()))

    with open(args.out, "w", encoding="utf-8") as fh:
        w = _csv_writer(fh, model, args.seed)
        w.writerow(["metric", "seconds", "fe_units"])
        w.writerow(["fe_solve_unit", f"{fe_unit:.6e}", "1.000"])
        for key in stages:
            med = float(np.median(samples[key]))
            w.writerow([f"median_{key}", f"{med:.6e}", f"{med / fe_unit:.6f}"])
        med = float(np.median(totals))
        w.writerow(["median_online_total", f"{med:.6e}", f"{med / fe_unit:.6f}"])
    print(f"benchmark written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ddmr",
                                 description="domain-decomposition model "
                                             "reduction for random PDEs")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run the offline procedure")
    p.add_argument("config", help="configuration file")
    p.add_argument("--out", required=True, help="output model path")
    p.add_argument("--costs", help="stage cost CSV (default: <out>.costs.csv)")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("solve", help="batch online solves")
    p.add_argument("--model", required=True)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="timing CSV path")
    p.add_argument("--reconstruct", help="directory for nodal field dumps")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("validate", help="error decay over one accuracy knob")
    p.add_argument("--model", required=True)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sweep", required=True, choices=sorted(SWEEP_GRIDS))
    p.add_argument("--out", required=True, help="error decay CSV path")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("bench", help="online timing summary in FE-solve units")
    p.add_argument("--model", required=True)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _apply_thread_limit()
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

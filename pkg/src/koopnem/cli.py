"""Command-line experiment runner.

Every subcommand reads one YAML config (see ``configs/``), regenerates what
it needs deterministically from the config and seed, writes CSVs carrying a
metadata header (config hash, seed, version) and finishes with a
``run_manifest.json`` listing inputs, outputs and stage timings.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .config import config_hash, load_config
from .cost import CostSpec, cost_bound, cost_bound_cap, cost_bound_limit, cost_surface
from .csvio import write_csv
from .errors import ConfigurationError, KoopnemError
from .gram import assemble, fill_distance, load_dataset, nonzero_fraction, save_dataset, sparsity
from .kernels import PolicyKernelSpec, RadialKernelSpec
from .learning import (
    empirical_loss,
    fit_kernel_edmd,
    fit_rrr,
    generalization_bound,
    hs_norm_squared,
    load_operator,
    numerical_rank,
    save_operator,
)
from .prediction import error_surface, multistep_bound, multistep_cap
from .simulators import (
    TankSystem,
    WilliamsOttoModel,
    WilliamsOttoSystem,
    generate_tank_grid,
    generate_wo_sample,
    simulate,
    wo_disturbance_cost_experiment,
)

SUBCOMMANDS = ("sample", "fit", "predict", "cost", "filldist", "bounds", "repro-tank", "repro-wo")


class Run:
    """Per-invocation bookkeeping: output directory, metadata and manifest."""

    def __init__(self, subcommand, cfg, out, config_path):
        self.subcommand = subcommand
        self.cfg = cfg
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.meta = {
            "config_hash": config_hash(cfg),
            "seed": cfg["seed"],
            "version": __version__,
            "model": cfg["model"],
        }
        self.inputs = [str(config_path)]
        self.outputs: list[str] = []
        self.timings: dict[str, float] = {}

    @contextmanager
    def stage(self, name):
        t0 = time.perf_counter()
        try:
            yield
        except KoopnemError as exc:
            raise KoopnemError(f"[{name}] {exc}") from exc
        finally:
            self.timings[name] = round(time.perf_counter() - t0, 6)

    def record(self, path):
        paths = path.values() if isinstance(path, dict) else [path]
        self.outputs.extend(str(Path(p).relative_to(self.out)) for p in paths)

    def csv(self, name, columns, rows):
        path = write_csv(self.out / name, columns, rows, self.meta)
        self.record(path)
        return path

    def finish(self):
        manifest = {
            "subcommand": self.subcommand,
            **self.meta,
            "config": self.cfg,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "timings_seconds": self.timings,
        }
        path = self.out / "run_manifest.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return path


# Building blocks


def kernels_from(cfg):
    sk = cfg["state_kernel"]
    if sk["family"] == "wendland":
        kx = RadialKernelSpec.wendland(sk["n"], sk["k"], float(sk["sigma"]))
    else:
        kx = RadialKernelSpec.gaussian(float(sk["sigma"]))
    ku = PolicyKernelSpec(float(cfg["policy_kernel"]["sigma"]), 1 if cfg["model"] == "tank" else 2)
    return kx, ku


def system_from(cfg):
    if cfg["model"] == "tank":
        return TankSystem()
    sim = cfg["simulator"]
    return WilliamsOttoSystem(WilliamsOttoModel(substep=float(sim["substep"]), sampling_interval=float(sim["sampling_interval"])))


def sample_from(cfg, system=None):
    s = cfg["sampling"]
    if cfg["model"] == "tank":
        return generate_tank_grid(s["n_x"], s["n_alpha"], tuple(s["x_range"]), tuple(s["alpha_range"]))
    system = system or system_from(cfg)
    return generate_wo_sample(
        s["m"],
        cfg["seed"],
        system.model,
        duration=float(s["duration"]),
        record_interval=float(s["record_interval"]),
        amplitude=float(s["amplitude"]),
        alpha_bounds=tuple(s["alpha_range"]),
        scale_rule=s["scale_rule"],
    )


def fit_from(fit_cfg, grams, dataset, kx, ku):
    if fit_cfg["method"] == "kernel_edmd":
        return fit_kernel_edmd(grams, fit_cfg.get("jitter"), dataset, kx, ku)
    beta = fit_cfg.get("beta")
    if beta is None:
        beta = fit_cfg["beta_factor"] * float(np.linalg.eigvalsh(grams.G_xu)[-1])
    return fit_rrr(grams, beta, fit_cfg["rank"], dataset, kx, ku)[0]


def evaluation_points_from(cfg, system=None):
    t = cfg["test"]
    if cfg["model"] == "tank":
        s = cfg["sampling"]
        xs = np.linspace(*s["x_range"], t["n_x"])
        al = np.linspace(*s["alpha_range"], t["n_alpha"])
        X, A = np.meshgrid(xs, al, indexing="ij")
        return X.ravel()[:, None], A.ravel()[:, None]
    test_cfg = dict(cfg, seed=cfg["seed"] + t["seed_offset"])
    test_cfg["sampling"] = dict(cfg["sampling"], m=t["m"])
    ds = sample_from(test_cfg, system)
    return np.array(ds.states), np.array(ds.policy_params)


def cost_spec_from(cfg):
    c = cfg["cost"]
    return CostSpec(float(c["gamma"]), int(c["horizon"]), float(c["state_weight"]), float(c["action_weight"]), int(c["state_index"]))


def sparsity_rows(grams):
    return [
        [name, sparsity(getattr(grams, name)), nonzero_fraction(getattr(grams, name))]
        for name in ("G_xu", "G_yy", "G_xy", "G_xx", "G_uu")
    ]


def _dataset(run, args, system):
    if getattr(args, "dataset", None):
        run.inputs.append(str(args.dataset))
        return load_dataset(args.dataset)
    with run.stage("sample"):
        ds = sample_from(run.cfg, system)
        run.record(save_dataset(ds, run.out / "dataset", run.meta))
    return ds


def _operator(run, args, system):
    if getattr(args, "operator", None):
        run.inputs.append(str(args.operator))
        with run.stage("load"):
            return load_operator(args.operator)
    ds = _dataset(run, args, system)
    kx, ku = kernels_from(run.cfg)
    with run.stage("fit"):
        grams = assemble(ds, kx, ku)
        op = fit_from(run.cfg["fit"], grams, ds, kx, ku)
    return op


def _fit_report(run, op, name="fit_report.csv"):
    g = op.grams
    rows = [
        ["method", op.method["name"]],
        ["m", op.m],
        ["empirical_loss", empirical_loss(op, g)],
        ["hs_norm_squared", hs_norm_squared(op)],
        ["numerical_rank", numerical_rank(op.theta)],
    ]
    rows += [[k, v] for k, v in sorted(op.method.items()) if k != "name"]
    run.csv(name, ["quantity", "value"], rows)


# Subcommands


def cmd_sample(run, args):
    _dataset(run, args, system_from(run.cfg))


def cmd_fit(run, args):
    op = _operator(run, args, system_from(run.cfg))
    with run.stage("save"):
        ddir = str(args.dataset.resolve()) if args.dataset else "dataset"
        run.record(save_operator(op, run.out / "operator.csv", ddir, run.meta))
        run.csv("sparsity.csv", ["matrix", "sparsity", "nonzero_fraction"], sparsity_rows(op.grams))
        _fit_report(run, op)


def cmd_predict(run, args):
    system = system_from(run.cfg)
    op = _operator(run, args, system)
    t = run.cfg["test"]
    with run.stage("predict"):
        X, P = evaluation_points_from(run.cfg, system)
        surf = error_surface(op, system, X, P, t["horizons"], t.get("coordinates"), t["readout"])
        run.record(surf.save(run.out / "error_surface.csv", run.meta))


def cmd_cost(run, args):
    system = system_from(run.cfg)
    op = _operator(run, args, system)
    with run.stage("cost"):
        X, P = evaluation_points_from(run.cfg, system)
        surf = cost_surface(op, system, X, P, cost_spec_from(run.cfg))
        run.record(surf.save(run.out / "cost_surface.csv", run.meta))


def cmd_filldist(run, args):
    system = system_from(run.cfg)
    ds = _dataset(run, args, system)
    f = run.cfg["filldist"]
    with run.stage("filldist"):
        if run.cfg["model"] == "tank":
            s = run.cfg["sampling"]
            X, A = np.meshgrid(
                np.linspace(*s["x_range"], f["n_x"]), np.linspace(*s["alpha_range"], f["n_alpha"]), indexing="ij"
            )
            C, Cp = X.ravel()[:, None], A.ravel()[:, None]
            kind = f"grid {f['n_x']}x{f['n_alpha']}"
        else:
            cand_cfg = dict(run.cfg, seed=run.cfg["seed"] + 7919)
            cand_cfg["sampling"] = dict(run.cfg["sampling"], m=f["candidates"])
            cds = sample_from(cand_cfg, system)
            C, Cp = np.array(cds.states), np.array(cds.policy_params)
            kind = f"monte carlo, {f['candidates']} orbit states"
        eta_x = fill_distance(ds, C)
        eta = fill_distance(ds, C, Cp, f["policy_metric"])
        run.csv(
            "filldist.csv",
            ["quantity", "value"],
            [
                ["candidate_set", kind],
                ["candidates", C.shape[0]],
                ["policy_metric", float(f["policy_metric"])],
                ["fill_distance_states", eta_x],
                ["fill_distance_pairs", eta],
            ],
        )


def cmd_bounds(run, args):
    b = run.cfg["bounds"]
    with run.stage("bounds"):
        run.csv(
            "bounds_generalization.csv",
            ["m", "delta", "beta_reg", "rank", "bound"],
            [[m, b["delta"], b["beta_reg"], b["rank"], generalization_bound(m, b["delta"], b["beta_reg"], b["rank"])] for m in b["m"]],
        )
        cap = multistep_cap(b["lipschitz"], b["c_eta"])
        run.csv(
            "bounds_multistep.csv",
            ["t", "beta", "c_eta", "bound", "cap"],
            [[t, b["lipschitz"], b["c_eta"], multistep_bound(b["lipschitz"], b["c_eta"], t), cap] for t in b["horizons"]],
        )
        args_ = (b["lipschitz"], b["c_eta"], b["c_Q"], b["c_R"], b["gamma"])
        try:
            cap, limit = cost_bound_cap(*args_), cost_bound_limit(*args_)
        except KoopnemError:
            cap = limit = float("inf")
        run.csv(
            "bounds_cost.csv",
            ["tau", "bound", "cap", "limit"],
            [[t, cost_bound(*args_, t), cap, limit] for t in b["horizons"]],
        )


def cmd_repro_tank(run, args):
    cfg = run.cfg
    system = TankSystem()
    tr = cfg["trajectories"]
    with run.stage("trajectories"):
        x0, al = np.meshgrid(tr["x0"], tr["alphas"], indexing="ij")
        traj = simulate(system, x0.ravel()[:, None], al.ravel()[:, None], tr["horizon"])[..., 0]
        rows = [[t, float(a), float(x), float(traj[t, n])] for n, (x, a) in enumerate(zip(x0.ravel(), al.ravel())) for t in range(traj.shape[0])]
        run.csv("trajectories.csv", ["t", "alpha1", "x0", "x1"], rows)
    ds = _dataset(run, args, system)
    with run.stage("delta_state"):
        rows = [[float(x), float(a), float(y - x)] for x, a, y in zip(ds.states[:, 0], ds.policy_params[:, 0], ds.successors[:, 0])]
        run.csv("delta_state.csv", ["x1", "alpha1", "delta_x1"], rows)
    kx, ku = kernels_from(cfg)
    with run.stage("fit_edmd"):
        grams = assemble(ds, kx, ku)
        edmd = fit_from(cfg["fit"], grams, ds, kx, ku)
        run.record(save_operator(edmd, run.out / "operator_edmd.csv", "dataset", run.meta))
        run.csv("sparsity.csv", ["matrix", "sparsity", "nonzero_fraction"], sparsity_rows(grams))
        _fit_report(run, edmd, "fit_report_edmd.csv")
    X, P = evaluation_points_from(cfg)
    t = cfg["test"]
    with run.stage("predict_edmd"):
        run.record(error_surface(edmd, system, X, P, t["horizons"], None, t["readout"]).save(run.out / "error_surface_edmd.csv", run.meta))
    if cfg.get("rrr"):
        with run.stage("fit_rrr"):
            rrr = fit_from({"method": "rrr", **cfg["rrr"]}, grams, ds, kx, ku)
            _fit_report(run, rrr, "fit_report_rrr.csv")
        with run.stage("predict_rrr"):
            run.record(error_surface(rrr, system, X, P, t["horizons"], None, t["readout"]).save(run.out / "error_surface_rrr.csv", run.meta))
    with run.stage("cost"):
        run.record(cost_surface(edmd, system, X, P, cost_spec_from(cfg)).save(run.out / "cost_surface.csv", run.meta))


def cmd_repro_wo(run, args):
    cfg = run.cfg
    system = system_from(cfg)
    d = cfg["disturbance"]
    with run.stage("disturbance_costs"):
        rows = []
        for a1 in d["log10_k1"]:
            for a2 in d["log10_k2"]:
                k1, k2 = 10.0**a1, 3 * 10.0**a2
                for e in range(d["experiments"]):
                    c = wo_disturbance_cost_experiment(k1, k2, cfg["seed"] * 1000 + e, d["horizon"], d["amplitude"], system.model)
                    rows.append([float(a1), float(a2), k1, k2, e, c])
        run.csv("disturbance_costs.csv", ["alpha1", "alpha2", "k1", "k2", "experiment", "cost"], rows)
    ds = _dataset(run, args, system)
    kx, ku = kernels_from(cfg)
    with run.stage("fit"):
        grams = assemble(ds, kx, ku)
        op = fit_from(cfg["fit"], grams, ds, kx, ku)
        run.csv("sparsity.csv", ["matrix", "sparsity", "nonzero_fraction"], sparsity_rows(grams))
        _fit_report(run, op)
    t = cfg["test"]
    with run.stage("predict"):
        X, P = evaluation_points_from(cfg, system)
        run.record(error_surface(op, system, X, P, t["horizons"], t["coordinates"], t["readout"]).save(run.out / "error_surface.csv", run.meta))
    with run.stage("cost"):
        run.record(cost_surface(op, system, X, P, cost_spec_from(cfg)).save(run.out / "cost_surface.csv", run.meta))


COMMANDS = {
    "sample": cmd_sample,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "cost": cmd_cost,
    "filldist": cmd_filldist,
    "bounds": cmd_bounds,
    "repro-tank": cmd_repro_tank,
    "repro-wo": cmd_repro_wo,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="koopnem", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path, help="YAML experiment config")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", type=Path, help="output directory (default: output.dir of the config)")
        p.add_argument("--threads", type=int, default=None, help="BLAS thread limit")
        if name in ("sample", "fit", "predict", "cost", "filldist", "repro-tank", "repro-wo"):
            p.add_argument("--dataset", type=Path, help="reuse a dataset directory instead of sampling")
        if name in ("predict", "cost"):
            p.add_argument("--operator", type=Path, help="reuse a saved operator instead of fitting")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be a positive integer", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config, args.seed)
        expected = {"repro-tank": "tank", "repro-wo": "williams_otto"}.get(args.subcommand)
        if expected and cfg["model"] != expected:
            raise ConfigurationError(f"model: {args.subcommand} needs model {expected!r}, got {cfg['model']!r}")
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    run = Run(args.subcommand, cfg, args.out or cfg["output"]["dir"], args.config)
    try:
        with threadpool_limits(limits=args.threads):
            COMMANDS[args.subcommand](run, args)
    except KoopnemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    manifest = run.finish()
    print(f"{args.subcommand}: wrote {len(run.outputs)} files to {run.out} ({manifest.name})")
    return 0


if __name__ == "__main__":
    sys.exit(main())

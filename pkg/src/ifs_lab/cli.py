"""``ifs-lab`` command line: one batch experiment per invocation.

Exit codes: 0 success, 1 configuration error (nothing written),
2 an iteration did not converge (its trace is still written),
3 any other runtime failure (for example a budget overrun).
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import plots, render
from .attractor import compute_attractor, fixed_point_density, hutchinson_step, write_trace
from .chaosgame import chaos_game_suite, fairness_certificate
from .config import ConfigError, ExperimentConfig, fail, load_config, point_list, vector_field
from .ergodic import ergodicity_test
from .errors import IfsLabError, NonConvergenceError, NotFairError
from .hyperbolicity import diameter_profile, equivalence_check, hyperbolicity_verdict, weak_star_probe
from .measure import (
    DiscreteMeasure,
    compute_invariant_measure,
    kantorovich_distance,
    read_measure_csv,
    support_vs_attractor,
    write_measure_csv,
    write_trace_csv,
)
from .metric import PointCloud, epsilon_net, hausdorff_distance, read_points_csv, write_csv, write_points_csv

COMMANDS = ("attractor", "measure", "ergodic", "chaos", "diagnose", "render")
DEFAULT_OUT = "ifs-lab-out"


class Run:
    """Collects outputs in a private temp directory and moves them into place
    only when the command finishes (or fails after writing a trace)."""

    def __init__(self, command: str, cfg: ExperimentConfig, out_dir: Path, seed: int, threads: int, figures: bool):
        self.command = command
        self.cfg = cfg
        self.out_dir = out_dir
        self.seed = seed
        self.threads = threads
        self.figures = figures
        self.summary: dict = {}
        self.outputs: list = []
        self.wall: dict = {}
        self.created = not out_dir.exists()
        out_dir.mkdir(parents=True, exist_ok=True)
        self.tmp = Path(tempfile.mkdtemp(prefix=".ifs-lab-", dir=out_dir))

    def path(self, name: str) -> Path:
        self.outputs.append(name)
        return self.tmp / name

    def timed(self, label, fn, *args, **kwargs):
        t0 = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        finally:
            self.wall[label] = round(time.perf_counter() - t0, 6)

    def figure(self, name: str, fn, *args, **kwargs):
        if self.figures:
            self.timed(f"figure:{name}", fn, self.path(name), *args, **kwargs)

    def write_summary(self):
        rows = [(k, v) for k, v in self.summary.items()]
        write_csv(self.path(f"{self.command}_summary.csv"), ["key", "value"], rows)

    def commit(self, status: str):
        manifest = {
            "command": self.command,
            "status": status,
            "config": str(self.cfg.path),
            "config_sha256": self.cfg.sha256,
            "tool_version": __version__,
            "seed": self.seed,
            "threads": self.threads,
            "outputs": sorted(set(self.outputs)),
            "wall_times": self.wall,
        }
        with open(self.path(f"manifest_{self.command}.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        for name in dict.fromkeys(self.outputs):
            src = self.tmp / name
            if src.exists():
                os.replace(src, self.out_dir / name)
        shutil.rmtree(self.tmp, ignore_errors=True)

    def discard(self):
        shutil.rmtree(self.tmp, ignore_errors=True)
        if self.created and not any(self.out_dir.iterdir()):
            self.out_dir.rmdir()


def _budgets(cfg):
    return cfg.section("budgets")


def _attractor(cfg: ExperimentConfig, run: Run):
    f = cfg.require_system()
    sec = cfg.section("attractor")
    return run.timed(
        "compute_attractor",
        compute_attractor,
        f,
        tol=sec["tol"],
        n_max=sec["n_max"],
        merge_radius=sec["merge_radius"],
        budget=_budgets(cfg)["points"],
    )


def _invariant_measure(cfg: ExperimentConfig, run: Run, seed_measure=None):
    f = cfg.require_system()
    sec = cfg.section("measure")
    b = _budgets(cfg)
    return run.timed(
        "compute_invariant_measure",
        compute_invariant_measure,
        f,
        cfg.measure,
        seed_measure,
        tol=sec["tol"],
        n_max=sec["n_max"],
        grid_h=sec["grid_h"],
        solver_budget=b["solver"],
        atom_budget=b["atoms"],
    )


def _phase_net(cfg: ExperimentConfig):
    eps = cfg.section("nets")["phase_eps"]
    dom = cfg.domain
    if eps is None:
        eps = float(np.max(dom.sides)) / 16 or 1.0
    return epsilon_net(dom, eps, _budgets(cfg)["points"])


def _size(sec):
    return sec["width"], sec["height"]


def cmd_attractor(cfg: ExperimentConfig, run: Run) -> int:
    f = cfg.require_system()
    sec = cfg.section("attractor")
    run.summary.update(system=f.name, dim=f.dim)
    try:
        res = _attractor(cfg, run)
    except NonConvergenceError as exc:
        write_trace(run.path("attractor_trace.csv"), exc.trace)
        run.summary.update(system=f.name, converged=0, last_gap=float(exc.last_gap), tol=sec["tol"])
        run.write_summary()
        raise
    cloud = res.cloud
    if sec["seed_check"]:
        # a global attractor does not depend on where the iteration starts
        corners = PointCloud(f.domain.corners())
        other = run.timed("seed_check", compute_attractor, f, corners, tol=sec["tol"], n_max=sec["n_max"],
                          merge_radius=sec["merge_radius"], budget=_budgets(cfg)["points"]).cloud
        seed_gap = hausdorff_distance(cloud, other)
        run.summary["seed_gap"] = seed_gap
        if not seed_gap < 2 * sec["tol"]:
            write_trace(run.path("attractor_trace.csv"), res.trace)
            run.summary.update(system=f.name, converged=0, tol=sec["tol"])
            run.write_summary()
            raise NonConvergenceError(
                f"iterates from the box centre and from the box corners settle {seed_gap:.3g} apart "
                f"(limit 2*tol = {2 * sec['tol']:.3g}): no global attractor",
                trace=res.trace, last_gap=seed_gap)
    res.write(run.path("attractor_points.csv"), run.path("attractor_trace.csv"))
    again = hutchinson_step(f, cloud, merge_radius=res.merge_radius, budget=_budgets(cfg)["points"])
    run.summary.update(
        system=f.name,
        dim=f.dim,
        converged=1,
        iterations=res.iterations,
        points=len(cloud),
        final_gap=float(res.trace[-1][1]),
        tol=sec["tol"],
        merge_radius=res.merge_radius,
        lam_net_eps="" if res.lam_net_eps is None else res.lam_net_eps,
        invariance_gap=hausdorff_distance(again, cloud),
    )
    if sec["density_len"]:
        dens = run.timed("fixed_point_density", fixed_point_density, f, cloud, sec["density_len"],
                         budget=_budgets(cfg)["words"], seed=run.seed)
        run.summary.update(density_word_length=sec["density_len"], density_distance=dens.distance,
                           density_words=dens.words_used, density_sampled=int(dens.sampled))
    if sec["render"]:
        w, h = _size(sec)
        render.render_points(run.path("attractor.ppm"), cloud, w, h, cfg.domain)
    run.figure("attractor.png", plots.plot_cloud, cloud.points, title=f"{f.name}: attractor ({len(cloud)} points)")
    run.figure("attractor_trace.png", plots.plot_trace, [t[0] for t in res.trace], [t[1] for t in res.trace],
               sec["tol"], "Hausdorff step gap", f"{f.name}: Hutchinson iteration")
    run.write_summary()
    return 0


def _measure_summary(run: Run, nu: DiscreteMeasure, res):
    last = res.trace[-1]
    run.summary.update(iterations=len(res.trace), atoms=len(nu), final_gap=float(last.gap), gap_method=last.method,
                       grid_h=res.grid_h or 0.0, bias_bound=res.bias_bound)
    for i, (m, s, v) in enumerate(zip(nu.mean(), nu.second_moment(), nu.variance())):
        run.summary[f"mean[{i}]"] = float(m)
        run.summary[f"second_moment[{i}]"] = float(s)
        run.summary[f"variance[{i}]"] = float(v)


def cmd_measure(cfg: ExperimentConfig, run: Run) -> int:
    f = cfg.require_system()
    sec = cfg.section("measure")
    run.summary.update(system=f.name, tol=sec["tol"])
    try:
        res = _invariant_measure(cfg, run)
    except NonConvergenceError as exc:
        write_trace_csv(run.path("measure_trace.csv"), exc.trace)
        run.summary.update(converged=0, last_gap=float(exc.last_gap))
        run.write_summary()
        raise
    nu = res.measure
    write_measure_csv(run.path("measure.csv"), nu)
    write_trace_csv(run.path("measure_trace.csv"), res.trace)
    run.summary["converged"] = 1
    _measure_summary(run, nu, res)
    if sec["support_check"]:
        k = _attractor(cfg, run).cloud
        run.summary["support_distance"] = run.timed("support_vs_attractor", support_vs_attractor, nu, k,
                                                    sec["weight_floor"])
        # both clouds carry their own tolerance, the measure also its grid
        bound = max(sec["tol"], cfg.section("attractor")["tol"]) + (res.grid_h or 0.0)
        run.summary["support_bound"] = bound
    if sec["seed_check"]:
        other = DiscreteMeasure.uniform_on(_phase_net(cfg).points)
        nu2 = _invariant_measure(cfg, run, other).measure
        run.summary["seed_gap"] = kantorovich_distance(nu, nu2, _budgets(cfg)["solver"]) if (
            nu.dim == 1 or max(len(nu), len(nu2)) <= _budgets(cfg)["solver"]) else ""
        run.summary["seed_gap_bound"] = 3 * sec["tol"]
    if sec["render"] and nu.dim <= 2:
        w, h = _size(sec)
        render.render_measure(run.path("measure.ppm"), nu.points, nu.weights, w, h, cfg.domain)
    run.figure("measure.png", plots.plot_measure, nu.points, nu.weights, title=f"{f.name}: invariant measure")
    run.figure("measure_trace.png", plots.plot_trace, [r.iteration for r in res.trace], [r.gap for r in res.trace],
               sec["tol"], "Kantorovich step gap", f"{f.name}: transfer operator iteration")
    run.write_summary()
    return 0


def cmd_ergodic(cfg: ExperimentConfig, run: Run) -> int:
    f = cfg.require_system()
    sec = cfg.section("ergodic")
    run.summary["system"] = f.name
    nu = _invariant_measure(cfg, run).measure
    starts = point_list(cfg, ("ergodic", "starts"), sec["starts"], f.dim) or [f.domain.center]
    for i, s in enumerate(starts):
        if not f.domain.contains(s[None, :], 1e-12):
            fail(cfg, ("ergodic", "starts", i), "start point lies outside the domain box")
    obs = sec["observables"]
    if isinstance(obs, str):
        obs = [obs]
    if not isinstance(obs, list) or not obs or not all(isinstance(o, str) for o in obs):
        fail(cfg, ("ergodic", "observables"), "expected a list of observable names")
    try:
        report = run.timed("ergodicity_test", ergodicity_test, f, cfg.measure, obs, starts, sec["n"], sec["trials"],
                           run.seed, nu, sec["tol"], run.threads)
    except ValueError as exc:
        fail(cfg, ("ergodic", "observables"), str(exc))
    report.write(run.path("ergodic_report.csv"))
    run.summary.update(report.summary())
    run.figure("ergodic.png", plots.plot_ergodic, report, title=f"{f.name}: Birkhoff averages (n = {sec['n']})")
    run.write_summary()
    return 0


def cmd_chaos(cfg: ExperimentConfig, run: Run) -> int:
    f = cfg.require_system()
    sec = cfg.section("chaos")
    run.summary["system"] = f.name
    deltas = sec["delta_grid"]
    deltas = deltas if isinstance(deltas, list) else [deltas]
    try:
        cert = fairness_certificate(cfg.measure, deltas, seed=run.seed)
    except NotFairError as exc:
        fail(cfg, ("parameters", "probs"), str(exc))
    except ValueError as exc:
        fail(cfg, ("chaos", "delta_grid"), str(exc))
    write_csv(run.path("fairness.csv"), ["delta", "lower_bound", "analytic"], cert.rows())
    x0 = f.domain.center if sec["x0"] is None else vector_field(cfg, ("chaos", "x0"), sec["x0"], f.dim)
    if not f.domain.contains(x0[None, :], 1e-12):
        fail(cfg, ("chaos", "x0"), "start point lies outside the domain box")
    k = _attractor(cfg, run).cloud
    keep = sec["keep_tails"] or sec["render"] or run.figures
    report = run.timed("chaos_game_suite", chaos_game_suite, f, cfg.measure, x0, sec["L"], sec["M"], k, sec["eps"],
                       sec["trials"], run.seed, run.threads, keep)
    report.write(run.path("chaos_report.csv"))
    if sec["keep_tails"]:
        for i, t in enumerate(report.trials):
            write_points_csv(run.path(f"chaos_tail_{i:03d}.csv"), t.tail)
    run.summary.update(report.summary())
    run.summary.update(eps=sec["eps"], L=sec["L"], M=sec["M"], attractor_points=len(k),
                       fairness_min=min(cert.lower_bounds))
    first = report.trials[0].tail
    if sec["render"] and f.dim <= 2:
        w, h = _size(sec)
        render.write_ppm(run.path("chaos.ppm"), render.overlay_image(k, first, w, h, cfg.domain))
    run.figure("chaos.png", plots.plot_chaos, report, sec["eps"], title=f"{f.name}: chaos game trials")
    if first is not None:
        run.figure("chaos_overlay.png", plots.plot_cloud, k.points, title=f"{f.name}: tail of trial 0 on K",
                   overlay=first)
    for t in report.trials:
        t.tail = None
    run.write_summary()
    return 0


def cmd_diagnose(cfg: ExperimentConfig, run: Run) -> int:
    f = cfg.require_system()
    sec = cfg.section("diagnose")
    net = _phase_net(cfg)
    eps_list = sec["eps_list"]
    eps_list = [sec["eps"]] if eps_list is None else (eps_list if isinstance(eps_list, list) else [eps_list])
    try:
        eps_list = [float(e) for e in eps_list]
    except (TypeError, ValueError):
        fail(cfg, ("diagnose", "eps_list"), "expected a list of positive numbers")
    if any(not e > 0 for e in eps_list):
        fail(cfg, ("diagnose", "eps_list"), "every eps must be positive")
    profile = run.timed("diameter_profile", diameter_profile, f, net, n_max=sec["n_max"], words=sec["words"],
                        seed=run.seed)
    verdict = hyperbolicity_verdict(profile, sec["verdict_eps"])
    probe = run.timed("weak_star_probe", weak_star_probe, f, sec["eta"], eps_list, sec["n_max"], sec["pairs"],
                      sec["words"], run.seed)
    eq = equivalence_check(profile, probe, sec["eps"])
    write_csv(run.path("diagnose_profile.csv"), ["n", "sup_diam"], profile.rows())
    write_csv(run.path("diagnose_probe.csv"), ["eps", "n0"], probe.rows())
    write_csv(run.path("diagnose_pairs.csv"), ["n", "max_pair_distance"],
              [(int(n), float(d)) for n, d in zip(probe.n_values, probe.max_dist)])
    with open(run.path("diagnose_verdict.txt"), "w") as fh:
        fh.write(f"system: {f.name}\nwords_sampled: {profile.words_sampled}\nnet_eps: {profile.net_eps!r}\n")
        fh.write(f"discretization_bound: {float(profile.discretization[-1])!r}\n")
        fh.write(verdict.text())
        fh.write(eq.text())
    run.summary.update(system=f.name, verdict=verdict.verdict, achieved_eps=verdict.achieved_eps,
                       words_sampled=profile.words_sampled, eps=sec["eps"], weak=int(eq.weak),
                       weak_star=int(eq.weak_star), agree=int(eq.agree))
    run.figure("diagnose.png", plots.plot_profile, profile, probe, sec["eps"], title=f"{f.name}: contraction diagnostics")
    run.write_summary()
    return 0


def cmd_render(cfg: ExperimentConfig, run: Run) -> int:
    sec = cfg.section("render")
    if not sec["_given"] or sec["input"] is None:
        fail(cfg, ("render", "input"), "render needs an input CSV path")
    src = cfg.resolve(sec["input"])
    try:
        header = src.read_text().split("\n", 1)[0].strip().split(",")
    except OSError as exc:
        fail(cfg, ("render", "input"), f"cannot read {src} ({exc.strerror})")
    kind = sec["kind"]
    if kind == "auto":
        kind = "measure" if header[-1] == "weight" else "points"
    if kind not in ("points", "measure"):
        fail(cfg, ("render", "kind"), "expected auto, points or measure")
    dim = len(header) - (1 if kind == "measure" else 0)
    if dim > 2:
        fail(cfg, ("render", "input"), f"rendering supports 1D and 2D data, the file has dimension {dim}")
    if sec["lo"] is not None or sec["hi"] is not None:
        if sec["lo"] is None or sec["hi"] is None:
            fail(cfg, ("render",), "give both lo and hi, or neither")
        extent = (vector_field(cfg, ("render", "lo"), sec["lo"], dim), vector_field(cfg, ("render", "hi"), sec["hi"], dim))
    else:
        extent = cfg.domain
    w, h = _size(sec)
    out = f"{src.stem}.ppm"
    if kind == "measure":
        mu = read_measure_csv(src)
        render.render_measure(run.path(out), mu.points, mu.weights, w, h, extent)
        run.summary.update(kind=kind, atoms=len(mu))
    else:
        cloud = read_points_csv(src)
        render.render_points(run.path(out), cloud, w, h, extent)
        run.summary.update(kind=kind, points=len(cloud))
    run.summary.update(input=str(src), image=out, width=w, height=h or w)
    run.write_summary()
    return 0


HANDLERS = {
    "attractor": cmd_attractor,
    "measure": cmd_measure,
    "ergodic": cmd_ergodic,
    "chaos": cmd_chaos,
    "diagnose": cmd_diagnose,
    "render": cmd_render,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ifs-lab", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"ifs-lab {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="experiment config (YAML)")
    parser.add_argument("--out", help="output directory (default: config output.dir, $IFS_LAB_OUT, ./ifs-lab-out)")
    parser.add_argument("--seed", type=int, help="master seed, overrides the config (0 <= seed < 2**64)")
    parser.add_argument("--threads", type=int, help="worker threads; results do not depend on it")
    parser.add_argument("--no-figures", action="store_true", help="skip matplotlib PNG figures")
    return parser


def _out_dir(args, cfg: ExperimentConfig) -> Path:
    if args.out:
        return Path(args.out)
    if cfg.section("output")["dir"]:
        return Path(cfg.section("output")["dir"])
    return Path(os.environ.get("IFS_LAB_OUT") or DEFAULT_OUT)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError(f"--seed must be in [0, 2**64), got {args.seed}")
        if args.threads is not None and args.threads < 1:
            raise ConfigError(f"--threads must be positive, got {args.threads}")
    except ConfigError as exc:
        print(f"ifs-lab: config error: {exc}", file=sys.stderr)
        return 1
    seed = cfg.seed if args.seed is None else args.seed
    threads = cfg.threads if args.threads is None else args.threads
    figures = cfg.section("output")["figures"] and not args.no_figures
    run = Run(args.command, cfg, _out_dir(args, cfg), seed, threads, figures)
    try:
        code = HANDLERS[args.command](cfg, run)
    except ConfigError as exc:
        run.discard()
        print(f"ifs-lab: config error: {exc}", file=sys.stderr)
        return 1
    except NonConvergenceError as exc:
        run.commit("non_convergence")
        print(f"ifs-lab: did not converge: {exc}", file=sys.stderr)
        return 2
    except (IfsLabError, ValueError) as exc:
        run.discard()
        print(f"ifs-lab: {args.command} failed: {exc}", file=sys.stderr)
        return 3
    except BaseException:
        run.discard()
        raise
    run.commit("ok")
    print(f"ifs-lab {args.command}: wrote {len(set(run.outputs))} files to {run.out_dir}")
    return code


if __name__ == "__main__":
    sys.exit(main())

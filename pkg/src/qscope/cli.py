"""Experiment orchestration and the `qscope` command-line surface.

Subcommands: forward, synth, reconstruct, sweep, probe, all. Every run ends
by writing `manifest.txt` atomically (temp file, then rename): config echo,
artifact version, and a checksum inventory of the produced files. Identical
(config, seed) pairs reproduce byte-identical outputs, so wall-clock timings
go to a `timings.txt` sidecar that is not part of the manifest inventory.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .config import Config, ConfigError, config_echo, load_config
from .grid import ScalarField, TensorField, dump_field, linf_norm, load_field
from .forward import Problem, estimate_admissibility, make_problem, residual_field, solve_forward
from .data import add_noise, save_data, synthesize
from .recon import roundtrip
from .stability import stability_sweep, write_stability_csv
from . import probes as probes_mod


def worker_count() -> int:
    """Worker cap from QSCOPE_THREADS (default 1; minimum 1)."""
    try:
        return max(1, int(os.environ.get("QSCOPE_THREADS", "1")))
    except ValueError:
        return 1


def build_problem(cfg: Config) -> Problem:
    if cfg.tag != "custom":
        return make_problem(cfg.tag, cfg.n)
    q = load_field(cfg.q_path)
    g = load_field(cfg.g_path)
    grid = q.grid
    a11 = load_field(cfg.a11_path).values
    a22 = load_field(cfg.a22_path).values
    a12 = load_field(cfg.a12_path).values if cfg.a12_path else np.zeros(grid.shape)
    return Problem(grid, TensorField(grid, a11, a12, a22), q, g)


class Runner:
    def __init__(self, cfg: Config, out_dir: str, seed: int):
        self.cfg = cfg
        self.out = out_dir
        self.seed = seed
        self.files: list[str] = []
        self.timings: list[tuple[str, float]] = []
        self._problem = None
        self._forward = None

    def path(self, name: str) -> str:
        self.files.append(name)
        return os.path.join(self.out, name)

    def problem(self) -> Problem:
        if self._problem is None:
            self._problem = build_problem(self.cfg)
        return self._problem

    def forward_solution(self):
        if self._forward is None:
            u, rep = solve_forward(self.problem())
            if not rep.converged:
                raise RuntimeError(
                    f"forward solve did not converge: {rep.method}, "
                    f"residual {rep.relative_residual:.3e}")
            self._forward = (u, rep)
        return self._forward

    # ---- stages ----------------------------------------------------------

    def stage_forward(self):
        p = self.problem()
        u, rep = self.forward_solution()
        dump_field(u, self.path("u.txt"))
        res = linf_norm(residual_field(p, u))
        with open(self.path("forward_summary.csv"), "w") as fh:
            fh.write("method,iterations,relative_residual,converged,residual_linf\n")
            fh.write(f"{rep.method},{rep.iterations},{rep.relative_residual!r},"
                     f"{int(rep.converged)},{res!r}\n")
        if self.cfg.q_star > 0.0:
            adm = estimate_admissibility(
                p.grid, p.A, p.q, ScalarField.constant(p.grid, self.cfg.q_star),
                self.cfg.q0, self.cfg.k)
            with open(self.path("admissibility.csv"), "w") as fh:
                fh.write("resolvent_norm_estimate,q0,k,threshold,member\n")
                fh.write(f"{adm.resolvent_norm_estimate!r},{adm.q0!r},{adm.k!r},"
                         f"{adm.threshold!r},{int(adm.member)}\n")

    def stage_synth(self):
        u, _ = self.forward_solution()
        d = synthesize(self.problem().q, u)
        if self.cfg.noise_eps > 0.0:
            d = add_noise(d, self.cfg.noise_model, self.cfg.noise_eps, self.seed)
        save_data(d, self.out)
        self.files += ["data_I.txt", "data_J.txt", "data_meta.txt"]

    def stage_reconstruct(self):
        p = self.problem()
        rec, summary = roundtrip(p, self.cfg.noise_eps, self.seed,
                                 self.cfg.recon, self.cfg.noise_model)
        dump_field(rec.w, self.path("w.txt"))
        dump_field(rec.q_rec, self.path("q_rec.txt"))
        dump_field(ScalarField(p.grid, rec.trust.mask.astype(float)),
                   self.path("trust.txt"))
        with open(self.path("recon_summary.csv"), "w") as fh:
            fh.write(",".join(summary.keys()) + "\n")
            fh.write(",".join(repr(float(v)) if isinstance(v, float) else str(v)
                              for v in summary.values()) + "\n")

    def stage_sweep(self):
        records = stability_sweep(
            self.problem(), self.cfg.eps_list, self.cfg.recon,
            theta=self.cfg.theta, mode=self.cfg.mode,
            model=self.cfg.noise_model, seed=self.seed)
        write_stability_csv(records, self.path("stability.csv"))

    def stage_probe(self):
        if not self.cfg.probe_set:
            raise RuntimeError("empty probe set")
        u, _ = self.forward_solution()
        names = sorted(set(self.cfg.probe_set))
        with ThreadPoolExecutor(max_workers=worker_count()) as ex:
            reports = list(ex.map(lambda t: self._run_probe(t, u), names))
        for tag, report in zip(names, reports):
            probes_mod.write_probe_csv(report, self.path(f"probes_{tag}.csv"))

    def _run_probe(self, tag: str, u: ScalarField):
        cfg = self.cfg
        p = self.problem()
        report = probes_mod.ProbeReport(tag)
        margin = max(0.25, 3.5 * cfg.r)
        centers = probes_mod.interior_lattice(cfg.lattice, margin)
        if tag == "caccioppoli":
            for c in centers:
                lhs, rhs = probes_mod.caccioppoli_ratio(u, c, cfg.r)
                report.add({"center_x": c[0], "center_y": c[1], "r": cfg.r}, lhs, rhs)
        elif tag == "doubling":
            for c in centers:
                ratio = probes_mod.doubling_ratio(u, c, cfg.r)
                report.add({"center_x": c[0], "center_y": c[1], "r": cfg.r}, ratio, 1.0)
        elif tag == "reverse_holder":
            for c in centers:
                lhs, rhs = probes_mod.reverse_holder(u, c, cfg.r, cfg.delta)
                report.add({"center_x": c[0], "center_y": c[1], "r": cfg.r,
                            "delta": cfg.delta}, lhs, rhs)
        elif tag == "muckenhoupt":
            for c in centers:
                lhs, rhs, excluded = probes_mod.muckenhoupt(u, c, cfg.r, cfg.kappa)
                report.add({"center_x": c[0], "center_y": c[1], "r": cfg.r,
                            "kappa": cfg.kappa, "excluded": float(excluded)}, lhs, rhs)
        elif tag == "three_spheres":
            for c in centers:
                I1, I2, I3, s = probes_mod.three_spheres_fit(u, c, cfg.r)
                report.add({"center_x": c[0], "center_y": c[1], "r": cfg.r,
                            "I1": I1, "I2": I2, "I3": I3}, s, 1.0)
        elif tag == "ucp":
            samples = [(c, cfg.r) for c in centers]
            c_fit, slacks = probes_mod.ucp_lowerbound_fit(u, samples)
            for (cx, cy), slack in zip(centers, slacks):
                report.add({"center_x": cx, "center_y": cy, "r": cfg.r,
                            "c_fit": c_fit}, slack, 1.0)
        elif tag == "carleman":
            v = ScalarField.from_function(
                p.grid, lambda X, Y: np.sin(np.pi * X) ** 2 * np.sin(np.pi * Y) ** 2)
            psi = ScalarField.from_function(p.grid, lambda X, Y: X)
            for tau in cfg.tau_list:
                lhs, rhs, flagged = probes_mod.carleman_ratio(
                    v, p.A, psi, cfg.lambda_c, tau)
                report.add({"center_x": 0.0, "center_y": 0.0, "r": 0.0,
                            "lambda_c": cfg.lambda_c, "tau": tau,
                            "flagged": float(flagged)}, lhs, rhs)
        elif tag == "delta_star":
            val = probes_mod.delta_star_probe(u, cfg.r_star, centers)
            report.add({"center_x": 0.0, "center_y": 0.0, "r": cfg.r_star}, val, 1.0)
        else:
            raise RuntimeError(f"unknown probe tag {tag!r}")
        return report

    # ---- manifest --------------------------------------------------------

    def write_timings(self):
        with open(os.path.join(self.out, "timings.txt"), "w") as fh:
            for stage, dt in self.timings:
                fh.write(f"{stage} {dt:.3f}s\n")

    def write_manifest(self, subcommand: str, status: str):
        lines = [f"qscope {__version__}",
                 f"subcommand {subcommand}",
                 f"seed {self.seed}",
                 f"status {status}",
                 "",
                 "[files]"]
        for name in sorted(set(self.files)):
            full = os.path.join(self.out, name)
            if os.path.exists(full):
                digest = hashlib.sha256(open(full, "rb").read()).hexdigest()
                lines.append(f"{name} sha256:{digest}")
        lines += ["", "[config]"]
        lines += config_echo(self.cfg).splitlines()
        tmp = os.path.join(self.out, "manifest.txt.tmp")
        with open(tmp, "w") as fh:
            fh.write("\n".join(lines) + "\n")
        os.replace(tmp, os.path.join(self.out, "manifest.txt"))


STAGES = {
    "forward": ("forward",),
    "synth": ("forward", "synth"),
    "reconstruct": ("forward", "synth", "reconstruct"),
    "sweep": ("sweep",),
    "probe": ("forward", "probe"),
    "all": ("forward", "synth", "reconstruct", "sweep", "probe"),
}


def run(subcommand: str, cfg: Config, out_dir: str | None = None,
        seed: int | None = None) -> int:
    if subcommand not in STAGES:
        print(f"unknown subcommand {subcommand!r}", file=sys.stderr)
        return 2
    out = out_dir if out_dir is not None else cfg.out_dir
    os.makedirs(out, exist_ok=True)
    runner = Runner(cfg, out, seed if seed is not None else cfg.seed)

    for stage in STAGES[subcommand]:
        if subcommand == "all" and stage == "probe" and not cfg.probe_set:
            continue
        t0 = time.perf_counter()
        try:
            getattr(runner, f"stage_{stage}")()
        except Exception as exc:
            runner.timings.append((stage, time.perf_counter() - t0))
            runner.write_timings()
            runner.write_manifest(subcommand, f"failed:{stage}")
            print(f"stage {stage} failed: {exc}", file=sys.stderr)
            return 1
        runner.timings.append((stage, time.perf_counter() - t0))

    runner.write_timings()
    runner.write_manifest(subcommand, "ok")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="qscope",
        description="Forward solves, data synthesis, coefficient recovery, "
                    "stability sweeps and inequality probes on the unit square.")
    parser.add_argument("subcommand", choices=sorted(STAGES))
    parser.add_argument("--config", required=True, help="path to a flat-format config file")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("--seed", type=int, default=None, help="RNG seed (overrides config)")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2
    return run(args.subcommand, cfg, args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())

"""
Command-line driver: generate -> simulate -> infer -> evaluate.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .errors import DegenerateSupportError, MalformedInputError, SupercriticalError
from .evaluation import evaluate
from .generative import sample_params, simulate_cascades
from .inference import run_chain
from .model import fit_delay_kernel

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("multiplex_hawkes")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_common(p, seed_required=False):
    p.add_argument("--config", type=Path, help="INI file with simulation/chain/hyper sections")
    p.add_argument("--seed", type=int, required=seed_required)
    p.add_argument("--output-dir", type=Path)
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one config entry (repeatable)")


def _add_chain(p):
    p.add_argument("--iterations", type=int)
    p.add_argument("--burn-in", type=int)
    p.add_argument("--thin", type=int)


def build_parser():
    parser = _Parser(prog="multiplex-hawkes",
                     description="Simulate and infer multiplex diffusion networks.")
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    add = sub.add_parser

    def sub_add(name, **kw):
        return add(name, parents=[shared], **kw)

    p = sub_add("generate", help="sample a ground-truth network")
    _add_common(p)
    p.add_argument("--nodes", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--replications", type=int, default=1,
                   help="networks to sample; more than one writes rep0, rep1, ... subdirectories")

    p = sub_add("simulate", help="simulate cascades on a network")
    _add_common(p, seed_required=True)
    p.add_argument("--network", type=Path, required=True, help="directory written by generate")
    p.add_argument("--window", type=float, nargs="+",
                   help="one or more observation windows (seconds)")

    p = sub_add("infer", help="run the sampler on an event log")
    _add_common(p, seed_required=True)
    _add_chain(p)
    p.add_argument("--events", type=Path, required=True)
    p.add_argument("--fit-kernel", action="store_true",
                   help="fit the lognormal delay kernel to the delays in --assignment")
    p.add_argument("--assignment", type=Path, help="parent-annotated assignment file")

    p = sub_add("evaluate", help="score a posterior summary against the truth")
    p.add_argument("--network", type=Path, required=True)
    p.add_argument("--summary", type=Path, required=True, help="directory written by infer")
    p.add_argument("--assignment", type=Path, help="ground-truth assignment")
    p.add_argument("--output-dir", type=Path)

    p = sub_add("pipeline", help="generate, simulate, infer and evaluate end to end")
    _add_common(p, seed_required=True)
    _add_chain(p)
    p.add_argument("--layers", type=int)
    p.add_argument("--window", type=float, nargs="+")
    p.add_argument("--replications", type=int)
    p.add_argument("--fit-kernel", action="store_true")
    return parser


def _load(args):
    overrides = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value.strip()
    flag_map = {"iterations": "chain.iterations", "burn_in": "chain.burn_in",
                "thin": "chain.thin", "seed": "chain.seed", "layers": "simulation.n_layers",
                "nodes": "simulation.n_nodes", "replications": "experiment.replications"}
    for attr, key in flag_map.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = str(value)
    if getattr(args, "seed", None) is not None:
        overrides["simulation.seed"] = str(args.seed)
    window = getattr(args, "window", None)
    if window:
        overrides["simulation.window"] = str(max(window))
        overrides["experiment.windows"] = " ".join(map(repr, window))
    if getattr(args, "output_dir", None) is not None:
        overrides["experiment.output_dir"] = str(args.output_dir)
    if getattr(args, "fit_kernel", False):
        overrides["experiment.fit_kernel"] = "true"
    try:
        return io.load_config(args.config, overrides)
    except (KeyError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _windows(cfg):
    return sorted(cfg.windows) if cfg.windows else [cfg.simulation.window]


def _window_tag(w):
    return f"T{w:g}"


def cmd_generate(cfg):
    """Sample `replications` networks, one subdirectory each when more than one."""
    out = []
    seqs = np.random.SeedSequence(cfg.simulation.seed).spawn(cfg.replications)
    for r, seq in enumerate(seqs):
        d = cfg.output_dir if cfg.replications == 1 else cfg.output_dir / f"rep{r}"
        params = sample_params(cfg.simulation, np.random.default_rng(seq))
        io.write_network(params, d)
        out.append(d)
    return out


def cmd_simulate(cfg, network_dir):
    """Simulate once at the longest window and write every requested prefix."""
    params = io.read_network(network_dir)
    windows = _windows(cfg)
    sim = replace(cfg.simulation, n_nodes=params.n_nodes, n_layers=params.n_layers,
                  window=max(windows))
    full = simulate_cascades(params, sim, np.random.default_rng(sim.seed))
    written = []
    for w in windows:
        part = full.restrict(w)
        suffix = "" if len(windows) == 1 else "_" + _window_tag(w)
        ev = cfg.output_dir / f"events{suffix}.csv"
        io.write_event_log(part, ev)
        io.write_assignment(part.ground_truth, cfg.output_dir / f"assignment{suffix}.csv")
        written.append(ev)
    return written


def _kernel_for(cfg, event_log, assignment):
    if not cfg.fit_kernel:
        return cfg.kernel
    if assignment is None:
        raise UsageError("--fit-kernel needs a parent-annotated assignment")
    child = np.flatnonzero(~assignment.spontaneous)
    delays = event_log.times[child] - event_log.times[assignment.parents[child]]
    kernel = fit_delay_kernel(delays[delays > 0])
    log.info("fitted kernel: log_mean=%.4f log_sdev=%.4f", kernel.log_mean, kernel.log_sdev)
    return kernel


def cmd_infer(cfg, events_path, assignment_path=None):
    event_log = io.read_event_log(events_path, assignment_path)
    kernel = _kernel_for(cfg, event_log, event_log.ground_truth)
    result = run_chain(event_log, cfg.chain, cfg.hyper, kernel)
    io.write_summary(result.summary, cfg.output_dir)
    if result.trace is not None:
        io.write_trace(result.trace, cfg.output_dir)
    io.write_assignment(result.summary.map_assignment(), cfg.output_dir / "map_assignment.csv")
    return result


def cmd_evaluate(network_dir, summary_dir, assignment_path=None, output_dir=None):
    truth = io.read_network(network_dir)
    summary = io.read_summary(summary_dir)
    if summary.influence.shape != truth.influence.shape:
        raise ValueError(f"summary has shape {summary.influence.shape} but the network is "
                         f"{truth.influence.shape} (N, N, K)")
    truth_assignment = inferred = trace = None
    if assignment_path is not None:
        truth_assignment = io.read_assignment(assignment_path)
        inferred = summary.map_assignment()
        if (Path(summary_dir) / "trace_parents.csv").exists():
            parents, layers = io.read_label_trace(summary_dir)
            trace = _LabelTrace(parents, layers)
    report = evaluate(truth, summary, truth_assignment, inferred, trace=trace)
    out = Path(output_dir) if output_dir is not None else Path(summary_dir)
    io.write_report(report, out / "report.csv")
    if report.trace.size:
        io.write_convergence(report.trace, out / "convergence.csv")
    return report


class _LabelTrace:
    def __init__(self, parents, layers):
        self.parents, self.layers = parents, layers


def cmd_pipeline(cfg):
    """Every replication and window from one seed; also writes pipeline.csv."""
    base = cfg.output_dir
    rows = []
    seqs = np.random.SeedSequence(cfg.simulation.seed).spawn(cfg.replications)
    for r, seq in enumerate(seqs):
        net_seed, sim_seed, chain_seed = (int(s) for s in seq.generate_state(3))
        rep = base / f"rep{r}"
        params = sample_params(cfg.simulation, np.random.default_rng(net_seed))
        io.write_network(params, rep / "network")
        windows = _windows(cfg)
        sim = replace(cfg.simulation, window=max(windows))
        full = simulate_cascades(params, sim, np.random.default_rng(sim_seed))
        for w in windows:
            d = rep / _window_tag(w)
            part = full.restrict(w)
            io.write_event_log(part, d / io.EVENTS)
            io.write_assignment(part.ground_truth, d / io.ASSIGNMENT)
            step = replace(cfg, output_dir=d, chain=replace(cfg.chain, seed=chain_seed))
            cmd_infer(step, d / io.EVENTS, d / io.ASSIGNMENT)
            report = cmd_evaluate(rep / "network", d, d / io.ASSIGNMENT)
            rows.append([r, w] + [v for _, v in report.rows()])
            log.info("replication %d window %g: %s", r, w, report.rows())
    names = [n for n, _ in report.rows()]
    io._write_rows(base / "pipeline.csv", ["replication", "window"] + names, rows)
    return rows


def run(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "evaluate":
        cmd_evaluate(args.network, args.summary, args.assignment, args.output_dir)
        return EXIT_OK
    cfg = _load(args)
    if args.command == "generate":
        cmd_generate(cfg)
    elif args.command == "simulate":
        cmd_simulate(cfg, args.network)
    elif args.command == "infer":
        cmd_infer(cfg, args.events, args.assignment)
    elif args.command == "pipeline":
        cmd_pipeline(cfg)
    return EXIT_OK


def main(argv=None):
    try:
        return run(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MalformedInputError, FileNotFoundError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DegenerateSupportError, SupercriticalError, ArithmeticError,
            FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

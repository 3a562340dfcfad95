"""Experiment runner CLI.

Subcommands:
  run    one experiment; writes run.csv (checkpoint diagnostics) and
         summary.json (final errors, parameters actually used, timings)
  sweep  convergence sweep over several node counts; adds fitted rates
  nodes  generate or inspect node sets

Configuration is flat key=value (optionally from a file via --config) with
command-line flags taking precedence.  Time steps accept expressions like
"pi/10" or "5/35"; the named presets "cb" and "gb" look up the time step for
the configured method and node count.
"""

from __future__ import annotations

import argparse
import json
import math
import time
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from . import diagnostics, geometry, testcases, transport
from .errors import ConfigurationError

SCHEMA_VERSION = 1

# time-step presets, keyed by (initial-condition family, method class, N);
# "cb" = cosine bells, "gb" = Gaussian bells
_PRESET_LOCAL = {
    "cb": {2562: 20, 5762: 25, 10242: 30, 23042: 35, 40962: 40, 92162: 45},
    "gb": {2562: 20, 5762: 40, 10242: 60, 23042: 80, 40962: 100, 92162: 120},
}
_PRESET_GLOBAL = {
    "cb": {3136: 20, 4096: 20, 5041: 25, 6084: 25, 7744: 30, 9025: 35,
           10000: 35, 11881: 40, 13689: 40, 15129: 45},
    "gb": {3136: 20, 4096: 40, 5041: 60, 6084: 80, 7744: 100, 9025: 120,
           10000: 140, 11881: 160, 13689: 180, 15129: 200},
}


def preset_dt(preset: str, method: str, n_nodes: int) -> float:
    table = _PRESET_GLOBAL if method == "global" else _PRESET_LOCAL
    if preset not in table:
        raise ConfigurationError(f"unknown time-step preset {preset!r}")
    if n_nodes not in table[preset]:
        raise ConfigurationError(
            f"preset {preset!r} has no entry for method={method}, N={n_nodes}"
        )
    return 5.0 / table[preset][n_nodes]


def parse_timestep(text: str) -> float:
    """Parse '0.1', 'pi/10', or '5/35'."""
    parts = text.split("/")
    if len(parts) > 2:
        raise ConfigurationError(f"cannot parse time step {text!r}")

    def number(tok):
        tok = tok.strip()
        if tok == "pi":
            return math.pi
        if tok.startswith("pi*"):
            return math.pi * float(tok[3:])
        return float(tok)

    value = number(parts[0])
    if len(parts) == 2:
        value /= number(parts[1])
    return value


@dataclass
class ExperimentConfig:
    testcase: str = "sbr-cosine"
    method: str = "local"
    N: int | None = None
    level: int | None = None
    nodes_file: str | None = None
    patch_centers_file: str | None = None
    n: int = 31
    a: float | None = None
    dt: str | None = None
    dt_preset: str | None = None
    tfinal: float | None = None
    revolutions: float | None = None
    checkpoint_every: int = 1
    epsilon: float | None = None
    alpha: float = math.pi / 2.0
    out: str | None = None
    threads: int | None = None

    def validate(self):
        if self.method not in ("global", "local", "pu"):
            raise ConfigurationError(f"unknown method {self.method!r}")
        if self.a is not None and self.method != "pu":
            raise ConfigurationError("'a' is only meaningful for method=pu")
        if self.epsilon is not None and self.method != "global":
            raise ConfigurationError("'epsilon' is only meaningful for method=global")
        if self.N is None and self.level is None and self.nodes_file is None:
            raise ConfigurationError("one of 'N', 'level', 'nodes_file' is required")
        if self.revolutions is not None and self.testcase != "sbr-cosine":
            raise ConfigurationError("'revolutions' applies to the solid-body test only")
        if self.checkpoint_every < 1:
            raise ConfigurationError("'checkpoint_every' must be >= 1")


def _load_nodes(cfg: ExperimentConfig) -> geometry.NodeSet:
    if cfg.nodes_file is not None:
        return geometry.load_nodes(cfg.nodes_file)
    if cfg.N is not None:
        return geometry.icosahedral_nodes_by_count(cfg.N)
    return geometry.icosahedral_nodes(cfg.level)


def _resolve_times(cfg: ExperimentConfig, case: testcases.TestCase, n_nodes: int):
    if cfg.revolutions is not None:
        t_final = 2.0 * math.pi * cfg.revolutions
    elif cfg.tfinal is not None:
        t_final = cfg.tfinal
    else:
        t_final = case.t_final_default
    if cfg.dt is not None:
        dt = parse_timestep(cfg.dt)
    elif cfg.dt_preset is not None:
        dt = preset_dt(cfg.dt_preset, cfg.method, n_nodes)
    else:
        raise ConfigurationError("one of 'dt', 'dt_preset' is required")
    return dt, t_final


def _cap_threads(threads: int | None):
    if threads is None:
        return
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(limits=threads)
    except ImportError:
        pass


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run one experiment; writes run.csv and summary.json when out is set."""
    cfg.validate()
    _cap_threads(cfg.threads)
    case = testcases.get_testcase(cfg.testcase, alpha=cfg.alpha)

    t0 = time.perf_counter()
    nodes = _load_nodes(cfg)
    t_build_nodes = time.perf_counter() - t0

    dt, t_final = _resolve_times(cfg, case, nodes.n_nodes)
    sl_cfg = transport.SLConfig(
        dt=dt,
        t_final=t_final,
        method=cfg.method,
        n=cfg.n,
        a=cfg.a if cfg.a is not None else transport.interp_pu.DEFAULT_MULTIPLICITY,
        epsilon=cfg.epsilon,
        checkpoint_every=cfg.checkpoint_every,
    )

    patch_centers = None
    if cfg.patch_centers_file is not None:
        patch_centers = geometry.load_nodes(cfg.patch_centers_file)
    t0 = time.perf_counter()
    backend = transport.build_backend(sl_cfg, nodes, patch_centers)
    t_factorize = time.perf_counter() - t0

    rule = diagnostics.equal_weight_rule(nodes)
    q0 = case.initial(nodes.points)
    reference_mass = rule.mean(q0)

    def diagnostics_fn(values, t):
        exact = case.exact_at(t)(nodes.points) if case.has_exact(t) else None
        return diagnostics.make_record(
            values, t, rule, q_exact=exact, reference_mass=reference_mass
        )

    rows = []

    def checkpoint(step, t, values, record):
        rows.append(record)

    t0 = time.perf_counter()
    q_final = transport.sl_advect(
        sl_cfg,
        case.velocity,
        nodes,
        transport.ScalarField(values=q0),
        backend=backend,
        checkpoint=checkpoint,
        diagnostics_fn=diagnostics_fn,
    )
    t_steps = time.perf_counter() - t0

    final = rows[-1]
    summary = {
        "schema": SCHEMA_VERSION,
        "config": {k: v for k, v in asdict(cfg).items() if v is not None},
        "N": nodes.n_nodes,
        "dt": dt,
        "t_final": t_final,
        "n_steps": sl_cfg.n_steps,
        "kernel": _kernel_info(backend),
        "warnings": {"uncovered_departure_points": _uncovered_count(backend)},
        "timings_s": {
            "build_nodes": t_build_nodes,
            "factorize": t_factorize,
            "step_loop": t_steps,
        },
        "final": {
            "time": final.time,
            "rel_l2": final.rel_l2,
            "rel_linf": final.rel_linf,
            "dissipation": final.dissipation,
            "dispersion": final.dispersion,
            "mass_error": final.mass_error,
            "field_min": final.field_min,
            "field_max": final.field_max,
        },
    }
    if cfg.out is not None:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        lines = [diagnostics.DiagnosticsRecord.CSV_HEADER]
        lines.extend(r.csv_row() for r in rows)
        (out / "run.csv").write_text("\n".join(lines) + "\n")
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return summary


def _kernel_info(backend) -> dict:
    if isinstance(backend, transport._GlobalBackend):
        gi = backend.interpolant
        return {"kind": "imq", "epsilon": gi.kernel.epsilon, "condition": gi.condition}
    if isinstance(backend, transport._LocalBackend):
        it = backend.interpolant
        return {"kind": "phs", "order": it.phs_order, "sh_degree": it.sh.degree_L}
    cover = backend.cover
    return {
        "kind": "phs",
        "order": cover.phs_order,
        "sh_degree": cover.sh.degree_L,
        "patches": cover.n_patches,
        "patch_radius": cover.radius,
    }


def _uncovered_count(backend) -> int:
    if isinstance(backend, transport._PUBackend):
        return backend.cover.uncovered_count
    return 0


def run_convergence(configs: list[ExperimentConfig]) -> dict:
    """Run a sweep sharing everything but the node count; fit rates."""
    if len(configs) < 3:
        raise ConfigurationError("a convergence sweep needs at least 3 sizes")
    table = []
    for cfg in configs:
        summary = run_experiment(cfg)
        table.append(
            {
                "N": summary["N"],
                "rel_l2": summary["final"]["rel_l2"],
                "rel_linf": summary["final"]["rel_linf"],
            }
        )
    result = {"schema": SCHEMA_VERSION, "sweep": table}
    l2 = [(row["N"], row["rel_l2"]) for row in table]
    linf = [(row["N"], row["rel_linf"]) for row in table]
    if all(e is not None and e > 1e-13 for _, e in l2):
        result["rate_l2"] = diagnostics.fit_convergence_rate(l2)
        result["rate_linf"] = diagnostics.fit_convergence_rate(linf)
    else:
        result["rate_fit"] = "skipped: errors at roundoff level"
    return result


def _add_experiment_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--testcase", choices=["sbr-cosine", "deform-cosine", "deform-gauss"])
    p.add_argument("--method", choices=["global", "local", "pu"])
    p.add_argument("--N", type=int, dest="N")
    p.add_argument("--level", type=int)
    p.add_argument("--nodes-file", dest="nodes_file")
    p.add_argument("--patch-centers-file", dest="patch_centers_file")
    p.add_argument("--n", type=int)
    p.add_argument("--a", type=float)
    p.add_argument("--dt")
    p.add_argument("--dt-preset", dest="dt_preset", choices=["cb", "gb"])
    p.add_argument("--tfinal", type=float)
    p.add_argument("--revolutions", type=float)
    p.add_argument("--checkpoint-every", type=int, dest="checkpoint_every")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--out")
    p.add_argument("--threads", type=int)


_CONFIG_TYPES = {
    "N": int, "level": int, "n": int, "checkpoint_every": int, "threads": int,
    "a": float, "tfinal": float, "revolutions": float, "epsilon": float,
    "alpha": float,
}


def _config_from_args(args) -> ExperimentConfig:
    values = {}
    if getattr(args, "config", None):
        for lineno, line in enumerate(Path(args.config).read_text().splitlines(), 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigurationError(f"{args.config}:{lineno}: expected key=value")
            key, value = (s.strip() for s in text.split("=", 1))
            key = key.replace("-", "_")
            if key not in ExperimentConfig.__dataclass_fields__:
                raise ConfigurationError(f"{args.config}:{lineno}: unknown key {key!r}")
            values[key] = _CONFIG_TYPES[key](value) if key in _CONFIG_TYPES else value
    for name in ExperimentConfig.__dataclass_fields__:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    return ExperimentConfig(**values)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sphtransport", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    _add_experiment_flags(p_run)

    p_sweep = sub.add_parser("sweep", help="convergence sweep over node counts")
    _add_experiment_flags(p_sweep)
    p_sweep.add_argument("--sizes", required=True, help="comma-separated node counts")

    p_nodes = sub.add_parser("nodes", help="generate or inspect node sets")
    p_nodes.add_argument("--level", type=int)
    p_nodes.add_argument("--N", type=int, dest="N")
    p_nodes.add_argument("--nodes-file", dest="nodes_file")
    p_nodes.add_argument("--out")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            summary = run_experiment(_config_from_args(args))
            print(json.dumps(summary, indent=2))
        elif args.command == "sweep":
            base = _config_from_args(args)
            configs = []
            for size in (int(s) for s in args.sizes.split(",")):
                cfg = ExperimentConfig(**{**asdict(base), "N": size, "level": None})
                if cfg.out is not None:
                    cfg.out = str(Path(cfg.out) / f"N{size}")
                configs.append(cfg)
            result = run_convergence(configs)
            if base.out is not None:
                out = Path(base.out)
                out.mkdir(parents=True, exist_ok=True)
                (out / "sweep.json").write_text(json.dumps(result, indent=2) + "\n")
            print(json.dumps(result, indent=2))
        else:
            if args.nodes_file is not None:
                nodes = geometry.load_nodes(args.nodes_file)
            elif args.N is not None:
                nodes = geometry.icosahedral_nodes_by_count(args.N)
            elif args.level is not None:
                nodes = geometry.icosahedral_nodes(args.level)
            else:
                raise ConfigurationError("one of --level, --N, --nodes-file is required")
            print(f"N={nodes.n_nodes} spacing_h={nodes.spacing_h:.6g}")
            if args.out:
                np.savetxt(args.out, nodes.points, fmt="%.17g")
    except ConfigurationError as exc:
        parser.exit(2, f"error: {exc}\n")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

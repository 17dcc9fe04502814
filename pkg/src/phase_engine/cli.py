"""Command-line entry point: config ingestion, run orchestration and artifact emission."""

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from functools import cached_property
from importlib import metadata
from typing import Any

import numpy as np

from . import __version__, config
from .artifacts import ArtifactWriter, MomentsRow
from .bath import DiscreteBath, SpectralModel, SystemParams, critical_coupling, discretize
from .config import RunConfig, apply_overrides, config_hash, load_config
from .dynamics import (
    PropagatorRecord,
    QBMRecord,
    build_qbm_record,
    build_record,
    one_excitation_spectrum,
)
from .errors import EXIT_OK, ConfigError, InvariantViolation, PhaseEngineError, error_handler
from .transition import pole_report, transition_report
from .validation import run_validation
from .wigner import (
    GridSpec,
    InitialState,
    Moments,
    evolve_wigner,
    initial_state_from_config,
    observables,
    state_moments,
)

logger = logging.getLogger(__name__)

SUBCOMMANDS = {
    "spectrum": "spectrum",
    "evolve": "moments",
    "wigner": "wigner",
    "transition": "transition",
    "validate": "validate",
}
TARGET_ORDER = ["spectrum", "moments", "wigner", "transition", "validate"]
SUBCOMMAND_HELP = {
    "spectrum": "write the discretized bath and the one-excitation spectrum",
    "evolve": "write the moments time series of the reduced state",
    "wigner": "write the reduced Wigner function at every stored time",
    "transition": "write the bound-state sweep over the configured couplings",
    "validate": "run the numerical invariant checks",
}


def _package_version(name: str) -> str:
    try:
        return metadata.version(name)
    except metadata.PackageNotFoundError:
        return "unknown"


class Experiment:
    """Objects derived from one RunConfig, built lazily and shared by targets."""

    def __init__(self, run_config: RunConfig) -> None:
        self.config = run_config
        self.params = SystemParams(run_config.system.omega0, run_config.system.mass)

    @cached_property
    def model(self) -> SpectralModel:
        bath = self.config.bath
        return SpectralModel(eta=bath.eta, s=bath.s, omega_c=bath.omega_c, cutoff=bath.cutoff)

    @cached_property
    def bath(self) -> DiscreteBath:
        section = self.config.bath
        return discretize(
            self.model,
            section.n_modes,
            omega_max_factor=section.omega_max_factor,
            scheme=section.scheme,
            temperature=section.temperature,
        )

    @cached_property
    def state(self) -> InitialState:
        return initial_state_from_config(self.config.initial)

    @cached_property
    def record(self) -> PropagatorRecord | QBMRecord:
        evolution = self.config.evolution
        if self.config.coupling.model == "qbm":
            return build_qbm_record(
                self.bath,
                self.params,
                evolution.t_max,
                dt=evolution.dt,
                store_every=evolution.store_every,
            )
        return build_record(
            self.bath,
            self.params,
            evolution.t_max,
            dt=evolution.dt,
            store_every=evolution.store_every,
            method=evolution.method,
        )

    @cached_property
    def trajectory(self) -> list[Moments]:
        return [
            state_moments(self.state, self.record, self.params, float(t))
            for t in self.record.times
        ]

    def grid(self) -> GridSpec:
        section = self.config.grid
        if not section.auto:
            return GridSpec(
                section.q_min,
                section.q_max,
                section.p_min,
                section.p_max,
                section.n_q,
                section.n_p,
            )
        sigma_q = max(np.sqrt(m.cov.c_qq) for m in self.trajectory)
        sigma_p = max(np.sqrt(m.cov.c_pp) for m in self.trajectory)
        width = config.DEFAULT_GRID_SIGMAS
        return GridSpec(
            q_min=min(m.q_mean for m in self.trajectory) - width * sigma_q,
            q_max=max(m.q_mean for m in self.trajectory) + width * sigma_q,
            p_min=min(m.p_mean for m in self.trajectory) - width * sigma_p,
            p_max=max(m.p_mean for m in self.trajectory) + width * sigma_p,
            n_q=section.n_q,
            n_p=section.n_p,
        )


def _emit_spectrum(experiment: Experiment, writer: ArtifactWriter) -> dict[str, Any]:
    eigs = one_excitation_spectrum(experiment.bath, experiment.params)
    writer.write_spectrum(experiment.bath, eigs)
    return {
        "n_modes": experiment.bath.n_modes,
        "lowest_energy": float(eigs.energies[0]),
        "lowest_weight": float(eigs.weights[0]),
    }


def _emit_moments(experiment: Experiment, writer: ArtifactWriter) -> dict[str, Any]:
    record = experiment.record
    resonant = isinstance(record, PropagatorRecord)
    rows = []
    for k, (t, moments) in enumerate(zip(record.times, experiment.trajectory, strict=True)):
        rows.append(
            MomentsRow(
                t=float(t),
                u=complex(record.u[k]) if resonant else None,
                v=float(record.v[k]) if resonant else None,
                cov=moments.cov,
                occupation=moments.occupation(experiment.params),
                purity=moments.purity,
            ),
        )
    writer.write_moments(rows)
    final = rows[-1]
    headline = {
        "t_final": final.t,
        "final_occupation": final.occupation,
        "final_purity": final.purity,
    }
    if resonant:
        headline["final_abs_u"] = abs(final.u) if final.u is not None else None
    return headline


def _emit_wigner(experiment: Experiment, writer: ArtifactWriter) -> dict[str, Any]:
    record = experiment.record
    spec = experiment.grid()
    norms = []
    for k, t in enumerate(record.times):
        grid = evolve_wigner(experiment.state, record, experiment.params, float(t), spec)
        norms.append(observables(grid, experiment.params).norm)
        writer.write_wigner(k, grid)
    return {
        "wigner_frames": len(norms),
        "max_norm_error": float(max(abs(n - 1.0) for n in norms)),
    }


def _emit_transition(experiment: Experiment, writer: ArtifactWriter) -> dict[str, Any]:
    sweep = experiment.config.sweep
    eta_c = critical_coupling(experiment.model, experiment.params)
    etas = [eta * eta_c if sweep.relative else eta for eta in sweep.eta_values]
    reports = transition_report(experiment.model, experiment.params, etas)
    writer.write_sweep(reports)
    return {
        "eta_c": eta_c,
        "sweep_points": len(reports),
        "sweep_errors": sum(1 for report in reports if report.error),
    }


def _emit_validate(experiment: Experiment, writer: ArtifactWriter) -> dict[str, Any]:
    report = run_validation(experiment.config)
    writer.write_json("validation.json", report.to_dict())
    if not report.passed:
        names = ", ".join(check.check_name for check in report.failures)
        raise InvariantViolation(f"failed checks: {names}")
    return {"validation_checks": len(report.checks)}


EMITTERS = {
    "spectrum": _emit_spectrum,
    "moments": _emit_moments,
    "wigner": _emit_wigner,
    "transition": _emit_transition,
    "validate": _emit_validate,
}


def _headline(experiment: Experiment) -> dict[str, Any]:
    report = pole_report(experiment.model, experiment.params)
    return {
        "eta": report.eta,
        "eta_c": report.eta_c,
        "phase": report.phase.value if report.phase else None,
        "e1": report.e1,
        "c0sq": report.c0sq,
        "boundary": report.boundary,
    }


def run_experiment(
    run_config: RunConfig,
    targets: list[str] | None = None,
) -> dict[str, Any]:
    """Run the requested targets (default: ``output.emit``) and write ``summary.json``."""
    requested = list(run_config.output.emit) if targets is None else list(targets)
    unknown = [target for target in requested if target not in EMITTERS]
    if unknown:
        raise ConfigError("output.emit", f"unknown targets {unknown}")
    ordered = [target for target in TARGET_ORDER if target in requested]

    experiment = Experiment(run_config)
    writers = {
        target: ArtifactWriter(run_config.output.path, run_config.output.format)
        for target in ordered
    }
    if {"moments", "wigner"} & set(ordered):
        # shared by both targets; built once before the workers start
        _ = experiment.trajectory

    logger.info(f"Running targets {ordered} into {run_config.output.path}")
    workers = max(1, min(config.PHASE_ENGINE_THREADS, len(ordered)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {
            target: pool.submit(EMITTERS[target], experiment, writers[target])
            for target in ordered
        }
        results = {target: future.result() for target, future in futures.items()}

    files = sorted(
        path.name for writer in writers.values() for path in writer.written
    )
    summary = {
        "config_hash": config_hash(run_config),
        "versions": {
            "phase_engine": __version__,
            "numpy": _package_version("numpy"),
            "scipy": _package_version("scipy"),
            "pydantic": _package_version("pydantic"),
        },
        "targets": ordered,
        "files": files,
        "headline": _headline(experiment),
        "results": results,
    }
    ArtifactWriter(run_config.output.path).write_json("summary.json", summary)
    logger.info(f"Finished targets {ordered}")
    return summary


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", help="run config file (key = value or .json)")
    parser.add_argument(
        "--set",
        metavar="KEY=VALUE",
        action="append",
        default=[],
        help="override any config key, e.g. --set bath.eta=1.2",
    )
    for section, section_field in RunConfig.model_fields.items():
        model = section_field.annotation
        group = parser.add_argument_group(f"{section} section")
        for key, key_field in model.model_fields.items():  # type: ignore[union-attr]
            default = key_field.get_default(call_default_factory=True)
            group.add_argument(
                f"--{section}.{key}",
                dest=f"{section}.{key}",
                metavar="VALUE",
                default=argparse.SUPPRESS,
                help=f"(default: {default})",
            )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phase-engine",
        description="Exact Wigner-function dynamics of a bosonic mode in a bosonic bath.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sub = subparsers.add_parser(name, help=SUBCOMMAND_HELP[name])
        _add_config_flags(sub)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """Config file (or defaults) with ``--section.key`` flags and ``--set`` applied on top."""
    base = load_config(args.config) if args.config else RunConfig()
    overrides: dict[str, Any] = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(item, "expected KEY=VALUE")
        key, value = (part.strip() for part in item.split("=", 1))
        overrides[key] = value
    for key, value in vars(args).items():
        if "." in key:
            overrides[key] = value
    return apply_overrides(base, overrides) if overrides else base


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        level=config.LOG_LEVEL,
    )
    args = build_parser().parse_args(argv)
    try:
        run_config = config_from_args(args)
        summary = run_experiment(run_config, targets=[SUBCOMMANDS[args.command]])
    except (PhaseEngineError, ValueError, OSError) as e:
        return error_handler(e, args.command)
    logger.info(f"Wrote {len(summary['files'])} files for '{args.command}'")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Click-based CLI for imbedding-toolkit."""

from __future__ import annotations

import json
import logging
from collections.abc import Callable
from pathlib import Path
from typing import Any

import click
import numpy as np

from imbed_toolkit.config import RunConfig, load_run_config
from imbed_toolkit.errors import ConfigError, ConsistencyError, ImbedError, IoError, NoBracketError
from imbed_toolkit.export import (
    branch_frame,
    branch_json,
    correspondence_frame,
    eigen_frame,
    eigen_json,
    solution_frame,
    trajectory_frame,
    trajectory_json,
    write_csv,
    write_json,
)
from imbed_toolkit.fredholm_frontend import correspondence_check, discretize, sample_phi
from imbed_toolkit.hammerstein_solver import NonlinearProblem, branch_switch, continue_branch
from imbed_toolkit.imbedding_engine import (
    OperatorFamily,
    bootstrap_state,
    find_eigenvalues,
    march,
    solve,
)

logger = logging.getLogger(__name__)


def _family(config: RunConfig) -> OperatorFamily:
    if config.kernel is not None and config.grid is not None:
        if config.symmetrize and not config.kernel.is_symmetric(config.grid):
            logger.warning("Kernel %s is not symmetric on the grid; the symmetrized family "
                           "keeps d(lambda) but f(lambda) is not symmetric",
                           config.kernel.name or config.kernel.kind)
        return discretize(config.kernel, config.grid, symmetrize=config.symmetrize)
    if config.family is not None:
        return config.family
    raise ConfigError(f"Scenario {config.scenario} needs a kernel or a family")


def _nodes(config: RunConfig, dim: int) -> Any:
    return config.grid.nodes if config.grid is not None else np.arange(dim, dtype=float)


def _artifact(config: RunConfig, suffix: str) -> Path:
    prefix = config.output_prefix
    return prefix.with_name(f"{prefix.name}.{suffix}")


def _run_scan(config: RunConfig) -> list[Path]:
    assert config.path is not None
    family = _family(config)
    init = bootstrap_state(family, config.path.start, config.integrator)
    states = march(family, config.path, init, config.integrator)
    click.echo(f"Scanned {len(states)} states from {config.path.start} to {config.path.end}")
    click.echo(f"  d(end) = {states[-1].d:.10g}")
    written = []
    if "csv" in config.formats:
        written.append(write_csv(trajectory_frame(states), _artifact(config, "trajectory.csv")))
    if "json" in config.formats:
        written.append(write_json(trajectory_json(states), _artifact(config, "trajectory.json")))
    if config.correspondence:
        written.extend(_write_correspondence(config))
    return written


def _write_correspondence(config: RunConfig) -> list[Path]:
    assert config.kernel is not None and config.grid is not None and config.path is not None
    reports = [
        correspondence_check(config.kernel, config.grid, lam, config.integrator)
        for lam in config.path.waypoints
        if lam != 0
    ]
    frame = correspondence_frame(reports)
    worst = max((r.max_residual for r in reports), default=0.0)
    click.echo(f"  classical vs general: max residual {worst:.3e} over {len(reports)} waypoints")
    written = []
    if "csv" in config.formats:
        written.append(write_csv(frame, _artifact(config, "correspondence.csv")))
    if "json" in config.formats:
        payload = {"reports": frame.to_dict(orient="records")}
        written.append(write_json(payload, _artifact(config, "correspondence.json")))
    return written


def _run_solve(config: RunConfig) -> list[Path]:
    assert config.lam is not None and config.phi is not None
    family = _family(config)
    if config.grid is not None:
        phi = sample_phi(config.phi, config.grid)
    else:
        phi = np.asarray(config.phi, dtype=np.complex128)
    state = bootstrap_state(family, config.lam, config.integrator)
    psi = solve(state, phi, config.integrator, family)
    click.echo(f"Solved at lambda={config.lam} (d = {state.d:.10g})")
    nodes = _nodes(config, family.dim)
    frame = solution_frame(nodes, psi)
    written = []
    if "csv" in config.formats:
        written.append(write_csv(frame, _artifact(config, "solution.csv")))
    if "json" in config.formats:
        payload = {
            "lambda": [config.lam.real, config.lam.imag],
            "d": [state.d.real, state.d.imag],
            "x": [float(x) for x in nodes],
            "psi": [[float(z.real), float(z.imag)] for z in psi],
        }
        written.append(write_json(payload, _artifact(config, "solution.json")))
    return written


def _run_eigs(config: RunConfig) -> list[Path]:
    assert config.path is not None
    family = _family(config)
    pairs = find_eigenvalues(family, config.path, config.integrator, config.refine_tol)
    click.echo(f"{'#':>3} {'Re lambda':>22} {'Im lambda':>22}")
    click.echo("-" * 49)
    for i, (lam, _) in enumerate(pairs):
        click.echo(f"{i:>3} {lam.real:>22.15g} {lam.imag:>22.15g}")
    written = []
    if "csv" in config.formats:
        written.append(write_csv(eigen_frame(pairs), _artifact(config, "eigenvalues.csv")))
    if "json" in config.formats:
        written.append(write_json(eigen_json(pairs), _artifact(config, "eigenvalues.json")))
    return written


def _run_hammerstein(config: RunConfig) -> list[Path]:
    settings = config.hammerstein
    assert settings is not None and config.kernel is not None and config.grid is not None
    problem = NonlinearProblem.from_name(
        config.kernel, config.grid, settings.nonlinearity, **settings.params
    )
    cfg = settings.continuation
    states = continue_branch(
        problem, settings.lam_start, settings.lam_end, settings.step, settings.psi0, cfg
    )
    flagged = [s for s in states if s.is_bifurcation]
    for s in flagged:
        click.echo(
            f"  Bifurcation candidate at lambda = {s.lam:.10f} (|d_lin| = {abs(s.d_lin):.2e})"
        )
    if settings.switch is not None:
        candidates = [s for s in flagged if abs(s.d_lin) < cfg.bifurcation_tol]
        if not candidates:
            raise NoBracketError("No bifurcation point to switch branches at")
        origin = min(candidates, key=lambda s: abs(s.d_lin))
        switched = branch_switch(
            problem, origin, settings.switch.direction, settings.switch.amplitude,
            settings.switch.step, cfg,
        )
        target = settings.lam_start if switched.lam < origin.lam else settings.lam_end
        branch = [switched]
        if target != switched.lam:
            step = abs(settings.step) if target > switched.lam else -abs(settings.step)
            branch = continue_branch(problem, switched.lam, target, step, switched.psi, cfg,
                                     branch_id=switched.branch_id)
        states = states + branch
        click.echo(f"  Branch {switched.branch_id}: {len(branch)} states, "
                   f"amplitude {switched.amplitude:.6g} at lambda = {switched.lam:.6g}")
    written = []
    if "csv" in config.formats:
        written.append(write_csv(branch_frame(states), _artifact(config, "branches.csv")))
    if "json" in config.formats:
        written.append(
            write_json(branch_json(states, config.grid.nodes), _artifact(config, "branches.json"))
        )
    return written


def _run_selftest(config: RunConfig) -> list[Path]:
    from imbed_toolkit.selftest import run_selftest

    report = run_selftest(config.seed, cases=config.selftest_cases, cfg=config.integrator)
    written = []
    if "csv" in config.formats:
        written.append(write_csv(report.frame, _artifact(config, "selftest.csv")))
    if "json" in config.formats:
        payload = {"seed": config.seed, "failures": report.failures,
                   "cases": json.loads(report.frame.to_json(orient="records"))}
        written.append(write_json(payload, _artifact(config, "selftest.json")))
    if not report.passed:
        raise ConsistencyError(f"{len(report.failures)} selftest checks failed; first: "
                               f"{report.failures[0]}")
    click.echo(f"Selftest seed={config.seed}: {len(report.frame)} cases passed")
    return written


SCENARIO_RUNNERS: dict[str, Callable[[RunConfig], list[Path]]] = {
    "scan": _run_scan,
    "solve": _run_solve,
    "eigs": _run_eigs,
    "hammerstein": _run_hammerstein,
    "selftest": _run_selftest,
}


def _report_error(err: ImbedError, prefix: Path | None) -> int:
    record = err.record()
    click.echo(json.dumps(record, sort_keys=True), err=True)
    if prefix is not None:
        try:
            write_json(record, prefix.with_name(f"{prefix.name}.error.json"))
        except IoError as io_err:
            click.echo(json.dumps(io_err.record(), sort_keys=True), err=True)
    return err.exit_code


def run(config: RunConfig) -> int:
    """Execute one scenario and write its artifacts.

    Returns the process exit status; failures also leave
    ``<prefix>.error.json`` with the error record.
    """
    try:
        written = SCENARIO_RUNNERS[config.scenario](config)
    except ImbedError as err:
        return _report_error(err, config.output_prefix)
    except OSError as exc:
        return _report_error(IoError(str(exc)), config.output_prefix)
    except ValueError as exc:
        return _report_error(ConfigError(str(exc)), config.output_prefix)
    for path in written:
        logger.info("Wrote %s", path)
    return 0


def _scenario_command(name: str, help_text: str) -> click.Command:
    @click.option("--config", "-c", "config_path", required=True,
                  type=click.Path(dir_okay=False), help="JSON run configuration.")
    @click.option("--out", "-o", default=None, help="Output path prefix.")
    @click.option("--seed", "-s", default=None, type=int, help="Seed for randomized instances.")
    @click.pass_context
    def command(ctx: click.Context, config_path: str, out: str | None, seed: int | None) -> None:
        try:
            config = load_run_config(config_path, scenario=name, out=out, seed=seed)
        except ConfigError as err:
            ctx.exit(_report_error(err, Path(out) if out else None))
        ctx.exit(run(config))

    command.__doc__ = help_text
    return click.command(name=name, help=help_text)(command)


@click.group()
@click.version_option(package_name="imbedding-toolkit")
@click.option("--verbose", "-v", is_flag=True, help="Log integration details.")
def main(verbose: bool) -> None:
    """Imbedding toolkit - parameter imbedding for [I + f(lambda)]psi = phi."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


for _name, _help in (
    ("scan", "March d(lambda) and D(lambda) along a path and export the trajectory."),
    ("solve", "Solve [I + f(lambda)]psi = phi at one lambda."),
    ("eigs", "Locate zeros of d(lambda) along a path with their eigenvectors."),
    ("hammerstein", "Continue a Hammerstein branch and flag bifurcations."),
    ("selftest", "Run the seeded invariant suite on random operators."),
):
    main.add_command(_scenario_command(_name, _help))

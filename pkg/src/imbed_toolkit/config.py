"""JSON run configuration for the ``imbed`` command.

Complex numbers are written as a plain number or an ``[re, im]`` pair;
matrices use the operator dump ``{"dim": n, "entries": [[re, im], ...]}``.
Every malformed document raises :class:`ConfigError`.
"""

from __future__ import annotations

import json
import math
from collections.abc import Mapping
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from imbed_toolkit.errors import ConfigError
from imbed_toolkit.fredholm_frontend import FunctionSpec, KernelSpec, QuadratureGrid
from imbed_toolkit.hammerstein_solver import NONLINEARITIES, ContinuationConfig
from imbed_toolkit.imbedding_engine import IntegratorConfig, LambdaPath, OperatorFamily
from imbed_toolkit.operator_core import operator_from_json

SCENARIOS = ("scan", "solve", "eigs", "hammerstein", "selftest")
FORMATS = ("csv", "json")


@dataclass(frozen=True)
class SwitchSettings:
    direction: int = 1
    amplitude: float = 1.0
    step: float = 0.1


@dataclass(frozen=True)
class HammersteinSettings:
    """Nonlinearity, λ range and optional branch switch of a Hammerstein run."""

    nonlinearity: str
    params: Mapping[str, float]
    lam_start: float
    lam_end: float
    step: float
    psi0: FunctionSpec
    continuation: ContinuationConfig
    switch: SwitchSettings | None = None


@dataclass(frozen=True, eq=False)
class RunConfig:
    """One parsed run of the ``imbed`` command."""

    scenario: str
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    kernel: KernelSpec | None = None
    grid: QuadratureGrid | None = None
    family: OperatorFamily | None = None
    symmetrize: bool = False
    correspondence: bool = False
    path: LambdaPath | None = None
    lam: complex | None = None
    phi: FunctionSpec | tuple[complex, ...] | None = None
    refine_tol: float = 1e-10
    hammerstein: HammersteinSettings | None = None
    output_prefix: Path = Path("imbed")
    formats: tuple[str, ...] = ("csv",)
    seed: int = 0
    selftest_cases: int = 200


def parse_complex(value: Any, name: str) -> complex:
    """A plain number or an ``[re, im]`` pair."""
    try:
        if isinstance(value, (list, tuple)):
            if len(value) != 2:
                raise ValueError
            z = complex(float(value[0]), float(value[1]))
        elif isinstance(value, bool):
            raise ValueError
        else:
            z = complex(float(value))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a number or an [re, im] pair, got {value!r}") from exc
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ConfigError(f"{name} must be finite, got {value!r}")
    return z


def _number(section: Mapping[str, Any], key: str, default: Any, kind: type = float) -> Any:
    value = section.get(key, default)
    if value is None:
        return None
    try:
        return kind(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key} must be {kind.__name__}, got {value!r}") from exc


def _section(doc: Mapping[str, Any], key: str) -> Mapping[str, Any]:
    value = doc.get(key, {})
    if not isinstance(value, Mapping):
        raise ConfigError(f"Section {key!r} must be an object")
    return value


def _function(obj: Any, name: str) -> FunctionSpec:
    if not isinstance(obj, Mapping) or "name" not in obj:
        raise ConfigError(f"{name} must be an object with a 'name'")
    try:
        params = {str(k): float(v) for k, v in dict(obj.get("params", {})).items()}
        return FunctionSpec(str(obj["name"]), params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"Invalid {name}: {exc}") from exc


def parse_kernel(obj: Mapping[str, Any], base_dir: Path) -> KernelSpec:
    domain = obj.get("domain", [0.0, 1.0])
    try:
        a, b = float(domain[0]), float(domain[1])
    except (TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"kernel.domain must be [a, b], got {domain!r}") from exc
    kind = obj.get("kind", "builtin")
    try:
        if kind == "builtin":
            params = {str(k): float(v) for k, v in dict(obj.get("params", {})).items()}
            return KernelSpec.builtin(str(obj.get("name")), a=a, b=b, **params)
        if kind == "separable":
            pairs = obj.get("factors")
            if not isinstance(pairs, list):
                raise ConfigError("kernel.factors must be a list of [u, v] pairs")
            factors = [(_function(u, "factor u"), _function(v, "factor v")) for u, v in pairs]
            return KernelSpec.separable(factors, a=a, b=b)
        if kind == "tabulated":
            source = base_dir / str(obj.get("csv", ""))
            return KernelSpec.from_csv(source, a=a if "domain" in obj else None,
                                       b=b if "domain" in obj else None)
    except ConfigError:
        raise
    except (OSError, TypeError, ValueError) as exc:
        raise ConfigError(f"Invalid kernel: {exc}") from exc
    raise ConfigError(f"Unknown kernel kind {kind!r}")


def parse_integrator(obj: Mapping[str, Any]) -> IntegratorConfig:
    known = {f.name for f in fields(IntegratorConfig)}
    unknown = set(obj) - known
    if unknown:
        raise ConfigError(f"Unknown integrator settings: {sorted(unknown)}")
    try:
        return IntegratorConfig(**dict(obj))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"Invalid integrator settings: {exc}") from exc


def _parse_path(value: Any) -> LambdaPath:
    points = value.get("waypoints") if isinstance(value, Mapping) else value
    if not isinstance(points, list):
        raise ConfigError("path must be a list of waypoints")
    try:
        return LambdaPath(tuple(parse_complex(p, "waypoint") for p in points))
    except ValueError as exc:
        raise ConfigError(f"Invalid path: {exc}") from exc


def _parse_hammerstein(obj: Mapping[str, Any], integrator: IntegratorConfig) -> HammersteinSettings:
    name = str(obj.get("nonlinearity", "cubic"))
    if name not in NONLINEARITIES:
        raise ConfigError(f"nonlinearity must be one of {NONLINEARITIES}, got {name!r}")
    for key in ("lambda_start", "lambda_end", "step"):
        if key not in obj:
            raise ConfigError(f"hammerstein.{key} is required")
    try:
        continuation = ContinuationConfig(
            newton_tol=_number(obj, "newton_tol", 1e-10),
            max_iters=_number(obj, "max_iters", 25, int),
            bifurcation_tol=_number(obj, "bifurcation_tol", 1e-3),
            bracket_tol=_number(obj, "bracket_tol", 1e-8),
            integrator=integrator,
        )
    except ValueError as exc:
        raise ConfigError(f"Invalid continuation settings: {exc}") from exc
    switch = None
    if "switch" in obj:
        raw = _section(obj, "switch")
        switch = SwitchSettings(
            direction=_number(raw, "direction", 1, int),
            amplitude=_number(raw, "amplitude", 1.0),
            step=_number(raw, "step", 0.1),
        )
        if switch.direction not in (1, -1):
            raise ConfigError(f"switch.direction must be +1 or -1, got {switch.direction}")
    psi0 = obj.get("psi0", {"name": "constant", "params": {"c": 0.0}})
    return HammersteinSettings(
        nonlinearity=name,
        params={str(k): float(v) for k, v in dict(obj.get("params", {})).items()},
        lam_start=_number(obj, "lambda_start", None),
        lam_end=_number(obj, "lambda_end", None),
        step=_number(obj, "step", None),
        psi0=_function(psi0, "psi0"),
        continuation=continuation,
        switch=switch,
    )


def _check_phi(settings: Mapping[str, Any]) -> None:
    # the kernel grid takes precedence over an explicit family
    phi = settings["phi"]
    if "grid" in settings:
        size = settings["grid"].size
        if isinstance(phi, tuple) and len(phi) not in (1, size):
            raise ConfigError(f"phi has {len(phi)} samples, grid has {size} nodes")
    elif "family" in settings:
        dim = settings["family"].dim
        if isinstance(phi, FunctionSpec):
            raise ConfigError("phi must be a vector of samples for an explicit family")
        if len(phi) != dim:
            raise ConfigError(f"phi has {len(phi)} entries, family has dimension {dim}")


def parse_run_config(
    doc: Mapping[str, Any],
    base_dir: Path = Path("."),
    scenario: str | None = None,
    out: str | None = None,
    seed: int | None = None,
) -> RunConfig:
    """Validate a config document; ``scenario``, ``out`` and ``seed`` override it."""
    if not isinstance(doc, Mapping):
        raise ConfigError("Run configuration must be a JSON object")
    name = scenario or doc.get("scenario")
    if name not in SCENARIOS:
        raise ConfigError(f"scenario must be one of {SCENARIOS}, got {name!r}")
    if scenario and doc.get("scenario") not in (None, scenario):
        raise ConfigError(f"Config is for scenario {doc.get('scenario')!r}, not {scenario!r}")

    integrator = parse_integrator(_section(doc, "integrator"))
    output = _section(doc, "output")
    formats = tuple(output.get("formats", ["csv"]))
    if not formats or any(f not in FORMATS for f in formats):
        raise ConfigError(f"output.formats must be a non-empty subset of {FORMATS}")
    settings: dict[str, Any] = {
        "scenario": name,
        "integrator": integrator,
        "output_prefix": Path(out or output.get("prefix", name)),
        "formats": formats,
        "seed": seed if seed is not None else _number(doc, "seed", 0, int),
        "refine_tol": _number(doc, "refine_tol", 1e-10),
        "symmetrize": bool(doc.get("symmetrize", False)),
        "correspondence": bool(doc.get("correspondence", False)),
        "selftest_cases": _number(_section(doc, "selftest"), "cases", 200, int),
    }
    if settings["refine_tol"] <= 0:
        raise ConfigError("refine_tol must be positive")
    if settings["selftest_cases"] < 1:
        raise ConfigError("selftest.cases must be at least 1")

    if "kernel" in doc:
        kernel = parse_kernel(_section(doc, "kernel"), base_dir)
        grid_doc = _section(doc, "grid")
        try:
            settings["grid"] = QuadratureGrid.from_rule(
                str(grid_doc.get("rule", "gauss_legendre")),
                _number(grid_doc, "n", 16, int),
                kernel.a,
                kernel.b,
            )
        except ValueError as exc:
            raise ConfigError(f"Invalid grid: {exc}") from exc
        settings["kernel"] = kernel
    if "family" in doc:
        fam = _section(doc, "family")
        try:
            A = operator_from_json(fam["A"])
            B = operator_from_json(fam["B"]) if "B" in fam else None
            settings["family"] = OperatorFamily.linear(A, B)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"Invalid family: {exc}") from exc
    has_operator = "kernel" in settings or "family" in settings
    if "path" in doc:
        settings["path"] = _parse_path(doc["path"])
    if "lambda" in doc:
        settings["lam"] = parse_complex(doc["lambda"], "lambda")
    if "phi" in doc:
        phi = doc["phi"]
        if isinstance(phi, list):
            settings["phi"] = tuple(parse_complex(v, "phi entry") for v in phi)
        else:
            settings["phi"] = _function(phi, "phi")
        _check_phi(settings)

    if name in ("scan", "eigs", "solve") and not has_operator:
        raise ConfigError(f"Scenario {name} needs a 'kernel' or a 'family' section")
    if name in ("scan", "eigs") and "path" not in settings:
        raise ConfigError(f"Scenario {name} needs a 'path'")
    if settings["correspondence"] and (name != "scan" or "kernel" not in settings):
        raise ConfigError("correspondence checks need the scan scenario with a kernel section")
    if name == "solve" and ("lam" not in settings or "phi" not in settings):
        raise ConfigError("Scenario solve needs 'lambda' and 'phi'")
    if name == "hammerstein":
        if "kernel" not in settings:
            raise ConfigError("Scenario hammerstein needs a 'kernel' section")
        if "hammerstein" not in doc:
            raise ConfigError("Scenario hammerstein needs a 'hammerstein' section")
        settings["hammerstein"] = _parse_hammerstein(_section(doc, "hammerstein"), integrator)
    return RunConfig(**settings)


def load_run_config(
    path: str | Path,
    scenario: str | None = None,
    out: str | None = None,
    seed: int | None = None,
) -> RunConfig:
    """Read and validate a JSON run configuration file."""
    source = Path(path)
    try:
        doc = json.loads(source.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"Cannot read config {source}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Config {source} is not valid JSON: {exc}") from exc
    return parse_run_config(doc, source.parent, scenario=scenario, out=out, seed=seed)

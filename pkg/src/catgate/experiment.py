"""Scenarios, fidelity runs, kappa sweeps and convergence grids."""
from __future__ import annotations

import json
import logging
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from functools import reduce
from pathlib import Path

import numpy as np

from .cats import (LogicalState, cat_basis, decode_logical, ideal_output_coeffs,
                   logical_encode)
from .hamiltonians import EffectiveMode, build_crosstalk, build_effective, build_full
from .lindblad import DissipationSpec, IntegratorConfig, NumericalAbort, evolve, fidelity
from .operators import DensityMatrix, HilbertLayout
from .params import (ConfigError, PhysicalParams, derive, paper_operating_point, us_to_ns,
                     validate_regime)

log = logging.getLogger(__name__)

__all__ = [
    "Model", "Toggles", "Scenario", "ResultRow", "CASES", "DEFAULT_KAPPA_GRID",
    "paper_operating_point", "product_input", "run_scenario", "sweep_kappa",
    "convergence_study", "ConvergenceReport", "ExperimentConfig", "load_config",
    "config_from_dict", "run_many", "COLUMNS",
]

# (gamma, theta, phi) in degrees
CASES = {
    "a": (45.0, 45.0, 45.0),
    "b": (60.0, 60.0, 60.0),
    "c": (90.0, 45.0, 60.0),
    "d": (180.0, 60.0, 45.0),
}
DEFAULT_KAPPA_GRID = tuple(float(k) for k in range(100, 1000, 100))


class Model(str, Enum):
    FULL = "FULL"
    EFFECTIVE = "EFFECTIVE"
    EFFECTIVE_CLEAN = "EFFECTIVE_CLEAN"


@dataclass(frozen=True)
class Toggles:
    decoherence: bool = True
    crosstalk: bool = True


@dataclass(frozen=True)
class Scenario:
    params: PhysicalParams
    model: Model = Model.FULL
    angles: tuple[float, ...] = tuple(math.radians(x) for x in CASES["a"])
    label: str = "a"
    kappa_inv_us: float = 300.0
    toggles: Toggles = Toggles()
    integrator: IntegratorConfig = IntegratorConfig()
    n_cut: int = 6

    def __post_init__(self):
        object.__setattr__(self, "model", Model(self.model))
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))
        if len(self.angles) != self.params.n_cavities:
            raise ConfigError(f"{len(self.angles)} angles for {self.params.n_cavities} qubits")
        if not self.kappa_inv_us > 0:
            raise ConfigError("kappa_inv_us must be > 0")
        if self.n_cut < 2:
            raise ConfigError("n_cut must be >= 2")

    @classmethod
    def for_case(cls, case: str, model=Model.FULL, kappa_inv_us: float = 300.0,
                 params: PhysicalParams | None = None, **kw) -> "Scenario":
        if case not in CASES:
            raise ConfigError(f"unknown case {case!r}; expected one of {sorted(CASES)}")
        return cls(params=params or paper_operating_point(kappa_inv_us), model=model,
                   angles=tuple(math.radians(x) for x in CASES[case]), label=case,
                   kappa_inv_us=kappa_inv_us, **kw)

    @property
    def scenario_id(self) -> str:
        sid = (f"{self.model.value}-{self.label}-k{self.kappa_inv_us:g}"
               f"-n{self.n_cut}-dt{self.integrator.dt:g}")
        if not self.toggles.decoherence:
            sid += "-nodec"
        if not self.toggles.crosstalk:
            sid += "-noxt"
        return sid

    def with_kappa(self, kappa_inv_us: float) -> "Scenario":
        return replace(self, kappa_inv_us=float(kappa_inv_us))

    def with_model(self, model) -> "Scenario":
        return replace(self, model=Model(model))

    def sort_key(self):
        return (self.label, list(Model).index(self.model), self.kappa_inv_us, self.n_cut,
                self.integrator.dt, self.scenario_id)


@dataclass(frozen=True)
class ResultRow:
    scenario_id: str
    model: str
    angles_label: str
    kappa_inv_us: float
    alpha: float
    n_cut: int
    dt_ns: float
    fidelity: float
    trace_error: float
    leakage: float
    wall_time_s: float
    # not part of the CSV
    error: str = field(default="", compare=False)
    hermiticity_defect: float = field(default=0.0, compare=False)

    @property
    def ok(self) -> bool:
        return not self.error


COLUMNS = tuple(f.name for f in fields(ResultRow)
                if f.name not in ("error", "hermiticity_defect"))


def product_input(angles) -> LogicalState:
    """``prod_k (cos a_k |0> + sin a_k |1>)`` with qubit 1 most significant."""
    factors = [np.array([math.cos(a), math.sin(a)]) for a in angles]
    return LogicalState(len(factors), reduce(np.kron, factors).astype(np.complex128))


def _hamiltonian(s: Scenario, d, layout):
    if s.model is Model.FULL:
        return build_full(d, layout, unwanted=True, crosstalk=s.toggles.crosstalk)
    h = build_effective(d, layout, EffectiveMode.REDUCED)
    if s.model is Model.EFFECTIVE and s.toggles.crosstalk:
        h = h + build_crosstalk(d, layout)
    return h


def run_scenario(s: Scenario) -> ResultRow:
    """Evolve the encoded input for one gate time and score it against the ideal output."""
    start = time.perf_counter()
    p = s.params.with_kappa_inv(s.kappa_inv_us)
    d = derive(p)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        report = validate_regime(p, d)
    if report.flagged:
        log.info("%s: marginal dispersive ratios %s", s.scenario_id, report.flagged)
    layout = HilbertLayout.cavities(p.n_cavities, s.n_cut)
    cat = cat_basis(p.alpha, s.n_cut)
    logical = product_input(s.angles)
    rho0 = DensityMatrix.from_state(logical_encode(logical, cat, layout))
    target = logical_encode(ideal_output_coeffs(logical), cat, layout)
    H = _hamiltonian(s, d, layout)
    D = DissipationSpec.from_params(p) if s.toggles.decoherence else DissipationSpec.none(p.n_cavities)
    try:
        res = evolve(rho0, H, D, us_to_ns(d.gate_time), s.integrator)
        F = fidelity(res.rho, target)
    except NumericalAbort as exc:
        raise NumericalAbort(f"{s.scenario_id}: {exc}") from exc
    leak = decode_logical(res.rho, cat, layout).leakage
    return ResultRow(
        scenario_id=s.scenario_id,
        model=s.model.value,
        angles_label=s.label,
        kappa_inv_us=float(s.kappa_inv_us),
        alpha=float(p.alpha),
        n_cut=int(s.n_cut),
        dt_ns=float(s.integrator.dt),
        fidelity=float(F),
        trace_error=float(res.diagnostics.max_trace_error),
        leakage=float(leak),
        wall_time_s=time.perf_counter() - start,
        hermiticity_defect=float(res.diagnostics.max_hermiticity_defect),
    )


def _failed(s: Scenario, exc: Exception) -> ResultRow:
    nan = float("nan")
    return ResultRow(s.scenario_id, s.model.value, s.label, float(s.kappa_inv_us),
                     float(s.params.alpha), int(s.n_cut), float(s.integrator.dt),
                     nan, nan, nan, 0.0, error=f"{type(exc).__name__}: {exc}")


def _run_safe(s: Scenario) -> ResultRow:
    try:
        return run_scenario(s)
    except Exception as exc:  # recorded per row; the sweep goes on
        log.error("scenario %s failed: %s", s.scenario_id, exc)
        return _failed(s, exc)


def run_many(scenarios, threads: int = 1) -> list[ResultRow]:
    """Run independent scenarios; rows come back in scenario sort order."""
    ordered = sorted(scenarios, key=Scenario.sort_key)
    if threads > 1 and len(ordered) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_run_safe, ordered))
    return [_run_safe(s) for s in ordered]


def sweep_kappa(base: Scenario, kappa_inv_list=DEFAULT_KAPPA_GRID, models=None,
                threads: int = 1) -> list[ResultRow]:
    """One row per (kappa_inv, model) pair."""
    kappas = [float(k) for k in kappa_inv_list]
    if not kappas:
        raise ConfigError("kappa_inv_list must be nonempty")
    models = [Model(m) for m in (models or (base.model,))]
    return run_many([base.with_model(m).with_kappa(k) for m in models for k in kappas], threads)


@dataclass
class ConvergenceReport:
    base_id: str
    grid: dict  # (n_cut, dt) -> fidelity
    n_cut_deltas: dict = field(default_factory=dict)  # (n_a, n_b, dt) -> |F_a - F_b|
    dt_deltas: dict = field(default_factory=dict)  # (dt_a, dt_b, n_cut) -> |F_a - F_b|

    def lines(self) -> list[str]:
        out = [f"convergence for {self.base_id}"]
        out += [f"  n_cut={n:<3d} dt={dt:<6g} F={F!r}" for (n, dt), F in sorted(self.grid.items())]
        out += [f"  |F(n={a}) - F(n={b})| at dt={dt:g}: {v:.3e}"
                for (a, b, dt), v in sorted(self.n_cut_deltas.items())]
        out += [f"  |F(dt={a:g}) - F(dt={b:g})| at n_cut={n}: {v:.3e}"
                for (a, b, n), v in sorted(self.dt_deltas.items())]
        return out


def convergence_study(base: Scenario, n_cuts=(6, 8, 10), dts=(0.02, 0.01, 0.005),
                      threads: int = 1) -> ConvergenceReport:
    runs = [replace(base, n_cut=n, integrator=replace(base.integrator, dt=dt))
            for n in n_cuts for dt in dts]
    rows = run_many(runs, threads)
    grid = {(r.n_cut, r.dt_ns): r.fidelity for r in rows}
    rep = ConvergenceReport(base.scenario_id, grid)
    ns, ds = sorted(n_cuts), sorted(dts, reverse=True)
    for dt in ds:
        for a, b in zip(ns, ns[1:]):
            rep.n_cut_deltas[(a, b, dt)] = abs(grid[(a, dt)] - grid[(b, dt)])
    for n in ns:
        for a, b in zip(ds, ds[1:]):
            rep.dt_deltas[(a, b, n)] = abs(grid[(n, a)] - grid[(n, b)])
    return rep


# ---------------------------------------------------------------------------
# JSON configuration
# ---------------------------------------------------------------------------

_PARAM_KEYS = {f.name for f in fields(PhysicalParams)} - {"n_cavities", "kappa_inv"}
_TOP_KEYS = {"params", "model", "angles_deg", "case", "kappa_inv_us", "integrator", "n_cut",
             "toggles"}


@dataclass(frozen=True)
class ExperimentConfig:
    base: Scenario
    kappa_grid: tuple[float, ...]
    models: tuple[Model, ...]

    def scenarios(self) -> list[Scenario]:
        return sorted((self.base.with_model(m).with_kappa(k)
                       for m in self.models for k in self.kappa_grid), key=Scenario.sort_key)


def _as_list(x):
    return list(x) if isinstance(x, (list, tuple)) else [x]


def _params(raw: dict, kappa: float) -> PhysicalParams:
    unknown = set(raw) - _PARAM_KEYS
    if unknown:
        raise ConfigError(f"unknown params keys: {sorted(unknown)}")
    base = paper_operating_point(kappa)
    merged = {f.name: getattr(base, f.name) for f in fields(PhysicalParams)}
    for k, v in raw.items():
        merged[k] = tuple(v) if isinstance(v, list) else v
    n = len(merged["omega_c"])
    merged["n_cavities"] = n
    merged["kappa_inv"] = (kappa,)
    try:
        return PhysicalParams(**merged)
    except TypeError as exc:
        raise ConfigError(f"bad params: {exc}") from exc


def config_from_dict(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        kappas = tuple(float(k) for k in _as_list(doc.get("kappa_inv_us", 300.0)))
        models = tuple(Model(str(m).upper()) for m in _as_list(doc.get("model", "FULL")))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if not kappas:
        raise ConfigError("kappa_inv_us list is empty")
    params = _params(doc.get("params", {}), kappas[0])

    if "angles_deg" in doc and "case" in doc:
        raise ConfigError("give either angles_deg or case, not both")
    if "angles_deg" in doc:
        angles = tuple(math.radians(float(a)) for a in doc["angles_deg"])
        label = "custom"
    else:
        label = str(doc.get("case", "a"))
        if label not in CASES:
            raise ConfigError(f"unknown case {label!r}")
        angles = tuple(math.radians(x) for x in CASES[label])

    integ = dict(doc.get("integrator", {}))
    bad = set(integ) - {"dt_ns", "method"}
    if bad:
        raise ConfigError(f"unknown integrator keys: {sorted(bad)}")
    tog = dict(doc.get("toggles", {}))
    bad = set(tog) - {"decoherence", "crosstalk"}
    if bad:
        raise ConfigError(f"unknown toggles: {sorted(bad)}")
    try:
        cfg = IntegratorConfig(dt=float(integ.get("dt_ns", 0.01)),
                               method=str(integ.get("method", "rk4")))
        base = Scenario(params=params, model=models[0], angles=angles, label=label,
                        kappa_inv_us=kappas[0],
                        toggles=Toggles(bool(tog.get("decoherence", True)),
                                        bool(tog.get("crosstalk", True))),
                        integrator=cfg, n_cut=int(doc.get("n_cut", 6)))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return ExperimentConfig(base, kappas, models)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(doc)

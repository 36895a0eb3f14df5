"""Raw and derived physical parameters.

Frequencies in configs and reports are ordinary frequencies (GHz for level
spacings and detunings, MHz for couplings and dispersive rates), lifetimes
are in microseconds.  Builders convert once to angular units (rad/ns) and
nanoseconds with :func:`ghz_to_angular` / :func:`mhz_to_angular` /
:func:`us_to_ns`.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Optional, Sequence

TWO_PI = 2.0 * math.pi


class ConfigError(ValueError):
    """Invalid physical or scenario configuration."""


def ghz_to_angular(f_ghz: float) -> float:
    """GHz -> rad/ns."""
    return TWO_PI * f_ghz


def angular_to_ghz(w: float) -> float:
    return w / TWO_PI


def mhz_to_angular(f_mhz: float) -> float:
    """MHz -> rad/ns."""
    return TWO_PI * f_mhz * 1e-3


def angular_to_mhz(w: float) -> float:
    return w / TWO_PI * 1e3


def us_to_ns(t_us: float) -> float:
    return t_us * 1e3


def rate_per_ns(lifetime_us: float) -> float:
    """Decay rate (1/ns) for a lifetime given in microseconds."""
    return 1.0 / (lifetime_us * 1e3)


@dataclass(frozen=True)
class PhysicalParams:
    n_cavities: int
    omega_eg: float
    omega_fe: float
    omega_c: tuple[float, ...]
    g1: float
    # None: solve from the matching condition
    g_l: Optional[tuple[float, ...]] = None
    # None: transmon matrix-element rule
    g_tilde: Optional[tuple[float, ...]] = None
    g_crosstalk_fraction: float = 0.01
    kappa_inv: tuple[float, ...] = ()
    gamma_eg_inv: float = 60.0
    gamma_fe_inv: float = 30.0
    gamma_fg_inv: float = 150.0
    gamma_phi_e_inv: float = 20.0
    gamma_phi_f_inv: float = 20.0
    alpha: float = 0.5

    def __post_init__(self):
        n = self.n_cavities
        if n < 2:
            raise ConfigError(f"need at least 2 cavities, got {n}")
        object.__setattr__(self, "omega_c", tuple(float(x) for x in self.omega_c))
        if len(self.omega_c) != n:
            raise ConfigError(f"omega_c has {len(self.omega_c)} entries for {n} cavities")
        kinv = tuple(float(x) for x in self.kappa_inv)
        if len(kinv) == 1:
            kinv = kinv * n
        if len(kinv) != n:
            raise ConfigError(f"kappa_inv needs 1 or {n} entries, got {len(kinv)}")
        object.__setattr__(self, "kappa_inv", kinv)
        if self.g_l is not None:
            object.__setattr__(self, "g_l", tuple(float(x) for x in self.g_l))
            if len(self.g_l) != n - 1:
                raise ConfigError(f"g_l needs {n - 1} entries (cavities 2..n)")
        if self.g_tilde is not None:
            object.__setattr__(self, "g_tilde", tuple(float(x) for x in self.g_tilde))
            if len(self.g_tilde) != n:
                raise ConfigError(f"g_tilde needs {n} entries")
        lifetimes = kinv + (self.gamma_eg_inv, self.gamma_fe_inv, self.gamma_fg_inv,
                            self.gamma_phi_e_inv, self.gamma_phi_f_inv)
        if any(not x > 0 for x in lifetimes):
            raise ConfigError("all lifetimes must be > 0")
        if not self.alpha >= 0:
            raise ConfigError("alpha must be real and >= 0")
        if self.g_crosstalk_fraction < 0:
            raise ConfigError("g_crosstalk_fraction must be >= 0")

    @property
    def omega_fg(self) -> float:
        return self.omega_eg + self.omega_fe

    def with_kappa_inv(self, kappa_inv_us: float) -> "PhysicalParams":
        return replace(self, kappa_inv=(float(kappa_inv_us),) * self.n_cavities)


@dataclass(frozen=True)
class DerivedParams:
    """Everything computed from :class:`PhysicalParams`.

    Detunings carry their defining sign (``delta1 = omega_c1 - omega_eg``
    etc.) in GHz; rates are in MHz; ``gate_time`` in microseconds.  Index 0 of
    the per-target tuples refers to cavity 2.  Pair dictionaries are keyed by
    1-based cavity numbers ``(k, l)`` with ``k < l``.
    """

    delta1: float
    delta_l: tuple[float, ...]
    delta1_tilde: float
    delta_l_tilde: tuple[float, ...]
    Delta_1l: tuple[float, ...]
    Delta_tilde_kl: dict
    g: tuple[float, ...] = ()
    g_tilde: tuple[float, ...] = ()
    g_kl: float = 0.0
    lambda1: float = float("nan")
    lambda_l: tuple[float, ...] = ()
    lambda_1l: tuple[float, ...] = ()
    lambda_kl: dict = field(default_factory=dict)
    chi_1l: tuple[float, ...] = ()
    gate_time: float = float("nan")
    Q_l: tuple[float, ...] = ()


# ---------------------------------------------------------------------------
# individual derivation steps
# ---------------------------------------------------------------------------

def derive_detunings(p: PhysicalParams) -> DerivedParams:
    wc = p.omega_c
    delta1 = wc[0] - p.omega_eg
    delta_l = tuple(p.omega_fe - c for c in wc[1:])
    Delta_1l = tuple(p.omega_fg - wc[0] - c for c in wc[1:])
    bad = [l + 2 for l, D in enumerate(Delta_1l) if not D > 0]
    if bad:
        raise ConfigError(f"two-photon detuning Delta_1l must be > 0 (cavities {bad})")
    if delta1 == 0 or any(d == 0 for d in delta_l):
        raise ConfigError("zero detuning")
    Delta_tilde = {(k + 1, l + 1): wc[k] - wc[l] for k, l in combinations(range(p.n_cavities), 2)}
    return DerivedParams(
        delta1=delta1,
        delta_l=delta_l,
        delta1_tilde=wc[0] - p.omega_fe,
        delta_l_tilde=tuple(p.omega_eg - c for c in wc[1:]),
        Delta_1l=Delta_1l,
        Delta_tilde_kl=Delta_tilde,
    )


def solve_gate_couplings(p: PhysicalParams, d: DerivedParams) -> tuple[float, ...]:
    """Target couplings (MHz) that make every chi_1l equal lambda1 / 2."""
    d1 = abs(d.delta1) * 1e3
    out = []
    for dl, D in zip(d.delta_l, d.Delta_1l):
        if not D > 0:
            raise ConfigError("Delta_1l must be > 0")
        dl = abs(dl) * 1e3
        out.append(dl / (d1 + dl) * math.sqrt(2.0 * D * 1e3 * d1))
    return tuple(out)


def transmon_coupling_rule(g: Sequence[float]) -> tuple[float, ...]:
    """Unwanted-transition couplings from the wanted ones.

    ``g`` lists all n couplings (cavity 1 first).  Cavity 1's e-f coupling is
    sqrt(2) times its g-e coupling; the targets' g-e couplings are their e-f
    couplings divided by sqrt(2).
    """
    g = tuple(g)
    return (math.sqrt(2.0) * g[0],) + tuple(x / math.sqrt(2.0) for x in g[1:])


def effective_rates(g: Sequence[float], d: DerivedParams) -> dict:
    """Stark shifts and second/fourth-order couplings in MHz."""
    d1 = abs(d.delta1) * 1e3
    dl = [abs(x) * 1e3 for x in d.delta_l]
    if d1 == 0 or any(x == 0 for x in dl):
        raise ConfigError("zero detuning")
    g1, gl = g[0], g[1:]
    lambda1 = g1 ** 2 / d1
    lambda_l = tuple(x ** 2 / y for x, y in zip(gl, dl))
    lambda_1l = tuple(g1 * x / 2.0 * (1.0 / d1 + 1.0 / y) for x, y in zip(gl, dl))
    # cavity numbering: gl[i] is cavity i + 2
    lambda_kl = {
        (i + 2, j + 2): gl[i] * gl[j] / 2.0 * (1.0 / dl[i] + 1.0 / dl[j])
        for i, j in combinations(range(len(gl)), 2)
    }
    chi = tuple(lam ** 2 / (D * 1e3) for lam, D in zip(lambda_1l, d.Delta_1l))
    return dict(lambda1=lambda1, lambda_l=lambda_l, lambda_1l=lambda_1l,
                lambda_kl=lambda_kl, chi_1l=chi)


def gate_time(lambda1_mhz: float) -> float:
    """Gate time in microseconds for lambda1 * T = 2 pi."""
    if not lambda1_mhz > 0:
        raise ConfigError("lambda1 must be > 0")
    return 1.0 / lambda1_mhz


def quality_factors(p: PhysicalParams) -> tuple[float, ...]:
    return tuple(TWO_PI * f * 1e9 * k * 1e-6 for f, k in zip(p.omega_c, p.kappa_inv))


@dataclass(frozen=True)
class RegimeReport:
    ratios: dict
    threshold: float
    flagged: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.flagged


def validate_regime(p: PhysicalParams, d: DerivedParams, threshold: float = 5.0) -> RegimeReport:
    """Large-detuning ratios; anything under ``threshold`` is flagged with a warning."""
    d1 = abs(d.delta1) * 1e3
    ratios = {"|delta1|/g1": d1 / d.g[0]}
    for i, l in enumerate(range(2, p.n_cavities + 1)):
        D = d.Delta_1l[i] * 1e3
        ratios[f"|delta{l}|/g{l}"] = abs(d.delta_l[i]) * 1e3 / d.g[l - 1]
        ratios[f"Delta1{l}/lambda1"] = D / d.lambda1
        ratios[f"Delta1{l}/lambda{l}"] = D / d.lambda_l[i]
        ratios[f"Delta1{l}/lambda1{l}"] = D / d.lambda_1l[i]
    flagged = tuple(k for k, v in ratios.items() if v < threshold)
    if flagged:
        warnings.warn(
            "dispersive regime marginal: " + ", ".join(f"{k}={ratios[k]:.3g}" for k in flagged),
            RuntimeWarning,
            stacklevel=2,
        )
    return RegimeReport(ratios=ratios, threshold=threshold, flagged=flagged)


def derive(p: PhysicalParams) -> DerivedParams:
    """Resolve couplings and compute every derived quantity."""
    d = derive_detunings(p)
    gl = p.g_l if p.g_l is not None else solve_gate_couplings(p, d)
    g = (p.g1,) + tuple(gl)
    g_tilde = p.g_tilde if p.g_tilde is not None else transmon_coupling_rule(g)
    rates = effective_rates(g, d)
    return replace(
        d,
        g=g,
        g_tilde=tuple(g_tilde),
        g_kl=p.g_crosstalk_fraction * max(g),
        gate_time=gate_time(rates["lambda1"]),
        Q_l=quality_factors(p),
        **rates,
    )


def derived_table(p: PhysicalParams, d: DerivedParams) -> list[tuple[str, float, str]]:
    """Flat (name, value, unit) rows for printing."""
    rows = [("delta1", d.delta1, "GHz"), ("delta1_tilde", d.delta1_tilde, "GHz")]
    for i, l in enumerate(range(2, p.n_cavities + 1)):
        rows += [
            (f"delta{l}", d.delta_l[i], "GHz"),
            (f"delta{l}_tilde", d.delta_l_tilde[i], "GHz"),
            (f"Delta1{l}", d.Delta_1l[i], "GHz"),
        ]
    rows += [(f"Delta_tilde{k}{l}", v, "GHz") for (k, l), v in d.Delta_tilde_kl.items()]
    rows += [(f"g{i + 1}", v, "MHz") for i, v in enumerate(d.g)]
    rows += [(f"g{i + 1}_tilde", v, "MHz") for i, v in enumerate(d.g_tilde)]
    rows.append(("g_kl", d.g_kl, "MHz"))
    rows.append(("lambda1", d.lambda1, "MHz"))
    for i, l in enumerate(range(2, p.n_cavities + 1)):
        rows += [
            (f"lambda{l}", d.lambda_l[i], "MHz"),
            (f"lambda1{l}", d.lambda_1l[i], "MHz"),
            (f"chi1{l}", d.chi_1l[i], "MHz"),
        ]
    rows += [(f"lambda{k}{l}", v, "MHz") for (k, l), v in d.lambda_kl.items()]
    rows.append(("gate_time", d.gate_time, "us"))
    rows += [(f"Q{i + 1}", q, "") for i, q in enumerate(d.Q_l)]
    return rows


def paper_operating_point(kappa_inv_us: float = 300.0) -> PhysicalParams:
    """Three-cavity parameter set of the reference experiment."""
    return PhysicalParams(
        n_cavities=3,
        omega_eg=6.5,
        omega_fe=6.2,
        omega_c=(7.0, 5.69, 5.68),
        g1=35.0,
        g_l=None,
        g_tilde=None,
        g_crosstalk_fraction=0.01,
        kappa_inv=(kappa_inv_us,) * 3,
        gamma_eg_inv=60.0,
        gamma_fe_inv=30.0,
        gamma_fg_inv=150.0,
        gamma_phi_e_inv=20.0,
        gamma_phi_f_inv=20.0,
        alpha=0.5,
    )

"""Patient scenarios, virtual-patient generation, parameter sensitivity.

The six scenarios change systemic/pulmonary arterial resistance, heart
rate and circulating volume, either as a step or through a first-order
lag (tau = 10 s).  Fluid transfers enter and leave through the right
atrium with a first-order-decaying rate whose integral is the specified
volume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .params import CvsParameters, dyn_to_mmhg

SCENARIO_KINDS = ("rpa-up", "rpa-down", "rsa-up", "rsa-down", "exercise",
                  "posture")

STEP = "step"
FIRST_ORDER = "first_order"
DEFAULT_TAU = 10.0


def schedule_value(t: float, x0: float, x1: float, t0: float, mode: str,
                   tau: float = DEFAULT_TAU) -> float:
    """Scheduled parameter value at time t."""
    if mode not in (STEP, FIRST_ORDER):
        raise ValueError(f"unknown schedule mode {mode!r}")
    if t < t0:
        return x0
    if mode == STEP:
        return x1
    if tau <= 0:
        raise ValueError("tau must be > 0")
    return x0 + (x1 - x0) * (1.0 - math.exp(-(t - t0) / tau))


@dataclass
class Scenario:
    """One patient scenario: resistance/rate targets and a fluid transfer.

    Resistances are stored in dyn.s/cm^5 exactly as published and
    converted when compiled; heart rate in bpm; transfer volume in mL
    (positive = infusion into the right atrium).
    """

    kind: str
    rsa_target_dyn: float | None = None
    rpa_target_dyn: float | None = None
    hr_target_bpm: float | None = None
    transfer_ml: float = 0.0
    mode: str = STEP
    tau: float = DEFAULT_TAU
    rsa_baseline_dyn: float = 1300.0
    rpa_baseline_dyn: float = 100.0
    hr_baseline_bpm: float = 60.0

    def compile(self, params: CvsParameters, onset_s: float) -> np.ndarray:
        """Pack into the integrator's schedule array."""
        mode_flag = 0.0 if self.mode == STEP else 1.0
        rsa0 = params.Rsa
        rpa0 = params.Rpa
        rsa1 = dyn_to_mmhg(self.rsa_target_dyn) if self.rsa_target_dyn is not None else rsa0
        rpa1 = dyn_to_mmhg(self.rpa_target_dyn) if self.rpa_target_dyn is not None else rpa0
        hr0 = self.hr_baseline_bpm
        hr1 = self.hr_target_bpm if self.hr_target_bpm is not None else hr0
        return np.array([onset_s,
                         rsa0, rsa1, mode_flag,
                         rpa0, rpa1, mode_flag,
                         hr0, hr1, mode_flag,
                         self.tau, self.transfer_ml], dtype=np.float64)

    def cumulative_transfer(self, t: float, onset_s: float) -> float:
        """Volume moved in/out up to time t (for conservation bookkeeping)."""
        if self.transfer_ml == 0.0 or t < onset_s:
            return 0.0
        return self.transfer_ml * (1.0 - math.exp(-(t - onset_s) / self.tau))


def make_scenario(kind: str) -> Scenario:
    """The six published scenarios, encoded verbatim."""
    if kind == "rpa-up":
        return Scenario(kind, rpa_target_dyn=500.0, mode=STEP)
    if kind == "rpa-down":
        return Scenario(kind, rpa_target_dyn=40.0, mode=STEP)
    if kind == "rsa-up":
        return Scenario(kind, rsa_target_dyn=2600.0, mode=STEP)
    if kind == "rsa-down":
        return Scenario(kind, rsa_target_dyn=600.0, mode=STEP)
    if kind == "exercise":
        return Scenario(kind, rsa_target_dyn=670.0, rpa_target_dyn=40.0,
                        hr_target_bpm=80.0, transfer_ml=500.0,
                        mode=FIRST_ORDER)
    if kind == "posture":
        return Scenario(kind, transfer_ml=-300.0, mode=FIRST_ORDER)
    raise ValueError(f"unknown scenario kind {kind!r}; expected one of "
                     f"{SCENARIO_KINDS}")


# Most-effective parameter sets per scenario (published table, with the
# typographical duplicates removed and 'Vuv' resolved to Vuvc).
SIGNIFICANT_SETS = {
    "rpa-up": ["Eesrvf", "Esa", "Esv", "Evc", "Rsv", "Rmt", "Vusv", "Vupu",
               "Vusa", "Vuvc", "Vtotal", "λlvf", "λrvf"],
    "rpa-down": ["Eesrvf", "Eesra", "Esv", "Rsv", "Vusv", "Vtotal", "λra",
                 "λrvf"],
    "rsa-up": ["Esa", "Vusv", "Vtotal", "λrvf"],
    "rsa-down": ["Eeslvf", "Eesrvf", "Eesra", "Esa", "Esv", "Evc", "Rsv",
                 "V0lvf", "Vdlvf", "Rmt", "Vusv", "P0lvf", "P0rvf", "Vtotal",
                 "λlvf", "λra", "λrvf"],
    "exercise": ["Eeslvf", "Eesrvf", "Eesla", "Eesra", "Esv", "Evc", "Rsv",
                 "V0lvf", "Rmt", "Vusv", "Vtotal", "λla", "λra", "λrvf"],
    "posture": ["Eeslvf", "Eesrvf", "Esv", "Evc", "Rsv", "V0lvf", "Vdlvf",
                "Rmt", "Vusv", "P0lvf", "Vtotal", "λla", "λlvf", "λrvf"],
}

PERTURBATION_RANGE = (0.8, 1.2)


@dataclass
class PatientSpec:
    """A virtual patient: a seed and multiplicative parameter factors."""

    seed: int
    factors: dict = field(default_factory=dict)

    def apply(self, params: CvsParameters) -> CvsParameters:
        return params.with_factors(self.factors)


def generate_patient(seed: int, scenario: Scenario,
                     significant: dict | None = None) -> PatientSpec:
    """Draw uniform factors in [0.8, 1.2] for the scenario's significant set."""
    sets = significant if significant is not None else SIGNIFICANT_SETS
    names = sets[scenario.kind]
    if not names:
        raise ValueError(f"empty significant set for scenario {scenario.kind}")
    rng = np.random.default_rng(seed)
    lo, hi = PERTURBATION_RANGE
    factors = {name: float(rng.uniform(lo, hi)) for name in names}
    return PatientSpec(seed=seed, factors=factors)


def sensitivity_coefficient(f0: float, f_perturbed: float, theta: float,
                            delta_theta: float) -> float:
    """Dimensionless one-at-a-time sensitivity (theta/F0) * dF/dtheta."""
    if f0 == 0:
        raise ZeroDivisionError("baseline objective F0 is zero")
    if delta_theta == 0:
        raise ZeroDivisionError("parameter perturbation is zero")
    return (theta / f0) * (f_perturbed - f0) / delta_theta


SIGNIFICANCE_THRESHOLD = 0.45
SENSITIVITY_DELTA = 0.2


def run_sensitivity(scenario: Scenario, parameters: list | None = None,
                    workers: int | None = None, seed: int = 0) -> list:
    """One-at-a-time +-20% sweep of the tracking objective under PID.

    Returns rows of (parameter, S_plus, S_minus, significant, error) sorted
    by |S+|+|S-| descending.  Per-parameter simulation failures are
    reported in the row, not raised.
    """
    from .protocol import ProtocolConfig, sensitivity_objective

    names = parameters if parameters is not None else CvsParameters.parameter_names()
    nominal = CvsParameters()
    cfg = ProtocolConfig()
    f0 = sensitivity_objective(nominal, scenario, cfg, workers=workers)
    if f0 is None:
        raise RuntimeError("baseline simulation failed; cannot run sweep")

    jobs = []
    for name in names:
        for sign in (+1.0, -1.0):
            jobs.append((name, sign,
                         nominal.with_factors({name: 1.0 + sign * SENSITIVITY_DELTA})))
    values = sensitivity_objective_batch([p for _, _, p in jobs], scenario,
                                         cfg, workers=workers)

    results = {}
    for (name, sign, _), f in zip(jobs, values):
        results.setdefault(name, {})[sign] = f
    rows = []
    for name in names:
        theta = nominal.get(name)
        s = {}
        err = ""
        for sign in (+1.0, -1.0):
            f = results[name][sign]
            if f is None:
                s[sign] = math.nan
                err = "simulation failed"
            else:
                s[sign] = sensitivity_coefficient(f0, f, theta,
                                                  sign * SENSITIVITY_DELTA * theta)
        magnitude = abs(s[+1.0]) + abs(s[-1.0])
        significant = bool(magnitude >= SIGNIFICANCE_THRESHOLD)
        rows.append({"parameter": name, "S_plus": s[+1.0], "S_minus": s[-1.0],
                     "significant": significant and not err, "error": err})
    rows.sort(key=lambda r: -(0.0 if math.isnan(r["S_plus"]) else
                              abs(r["S_plus"]) + abs(r["S_minus"])))
    return rows


def sensitivity_objective_batch(param_sets: list, scenario: Scenario,
                                cfg, workers: int | None = None) -> list:
    from .protocol import sensitivity_objective_batch as batch
    return batch(param_sets, scenario, cfg, workers=workers)


def sensitivity_report_csv(rows: list, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("parameter,S_plus,S_minus,significant\n")
        for r in rows:
            fh.write(f"{r['parameter']},{r['S_plus']!r},{r['S_minus']!r},"
                     f"{int(r['significant'])}\n")

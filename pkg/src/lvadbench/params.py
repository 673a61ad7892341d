"""Model parameter sets and their key-value serialization.

``CvsParameters`` carries the 43 circulation parameters plus the two
scenario-driven arterial resistances (stored in mmHg.s/mL) and the
constant intrathoracic pressure.  ``PumpParameters`` carries the pump and
cannula constants; the head-curve coefficients are the frozen output of
``scripts/calibrate_pump.py``.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from . import kv

# 1 mmHg = 1333.22 dyn/cm^2, so R[dyn.s.cm^-5] / 1333.22 = R[mmHg.s/mL]
DYN_PER_MMHG = 1333.22


def dyn_to_mmhg(value: float) -> float:
    """Convert a resistance in dyn.s.cm^-5 to mmHg.s/mL."""
    if value < 0:
        raise ValueError("resistance must be non-negative")
    return value / DYN_PER_MMHG


def mmhg_to_dyn(value: float) -> float:
    """Inverse of :func:`dyn_to_mmhg`."""
    if value < 0:
        raise ValueError("resistance must be non-negative")
    return value * DYN_PER_MMHG


# Published file keys for the four diastolic stiffness coefficients use the
# Greek letter; Python attributes use the lam_ prefix.
_FIELD_TO_KEY = {
    "lam_la": "λla",
    "lam_lvf": "λlvf",
    "lam_ra": "λra",
    "lam_rvf": "λrvf",
}
_KEY_TO_FIELD = {v: k for k, v in _FIELD_TO_KEY.items()}


@dataclass
class CvsParameters:
    """Circulation parameters (nominal values are the shipped defaults).

    Units: elastances mmHg/mL, resistances mmHg.s/mL, inertances
    mmHg.s^2/mL, volumes mL, stiffness coefficients 1/mL, stiffness
    scaling terms mmHg, periods s.
    """

    Eeslvf: float = 3.54      # LV end systolic elastance
    Eesrvf: float = 1.75      # RV end systolic elastance
    Eao: float = 1.04         # aortic elastance
    Eesla: float = 0.2        # LA end systolic elastance
    Eesra: float = 0.2        # RA end systolic elastance
    Epa: float = 0.15         # pulmonary arterial elastance
    Epu: float = 0.04         # pulmonary vein elastance
    Esa: float = 0.37         # systemic arterial elastance
    Esv: float = 0.013        # systemic vein elastance
    Evc: float = 0.03         # vena cava elastance
    Rao: float = 0.2          # aortic resistance
    Rra: float = 0.012        # right atrium (vena cava return) resistance
    Rpv: float = 0.02         # pulmonary valve resistance
    Rsv: float = 0.12         # systemic venous resistance
    Tc: float = 1.0           # heart rate coefficient (rest period, s)
    Tsys0: float = 0.5        # maximum systolic heart period (s)
    V0la: float = 20.0        # LA end diastolic volume at zero pressure
    V0lvf: float = 40.0       # LV end diastolic volume at zero pressure
    V0ra: float = 20.0        # RA end diastolic volume at zero pressure
    V0rvf: float = 50.0       # RV end diastolic volume at zero pressure
    Vdla: float = 10.0        # LA end systolic volume at zero pressure
    Vdlvf: float = 16.77      # LV end systolic volume at zero pressure
    Vdra: float = 10.0        # RA end systolic volume at zero pressure
    Vdrvf: float = 40.0       # RV end systolic volume at zero pressure
    Rmt: float = 0.01         # mitral valve resistance
    Rav: float = 0.02         # aortic valve resistance
    Vuao: float = 230.88      # aortic unstressed volume
    Vupa: float = 91.67       # pulmonary arterial unstressed volume
    Vupu: float = 132.39      # pulmonary vein unstressed volume
    Vusa: float = 231.04      # systemic arterial unstressed volume
    Vusv: float = 1976.1      # systemic vein unstressed volume
    Vuvc: float = 136.17      # vena cava unstressed volume
    P0la: float = 0.5         # LA end diastolic stiffness scaling term
    P0lvf: float = 0.98       # LV end diastolic stiffness scaling term
    P0ra: float = 0.5         # RA end diastolic stiffness scaling term
    P0rvf: float = 0.91       # RV end diastolic stiffness scaling term
    Vtotal: float = 5200.0    # total blood volume
    lam_la: float = 0.025     # LA end diastolic stiffness coefficient
    lam_lvf: float = 0.028    # LV end diastolic stiffness coefficient
    lam_ra: float = 0.025     # RA end diastolic stiffness coefficient
    lam_rvf: float = 0.028    # RV end diastolic stiffness coefficient
    Lao: float = 0.0001       # aortic inertance
    Lpa: float = 7.70e-05     # pulmonary arterial inertance
    Rsa: float = 1300.0 / DYN_PER_MMHG   # systemic arterial resistance
    Rpa: float = 100.0 / DYN_PER_MMHG    # pulmonary arterial resistance
    Pthor: float = -4.0       # intrathoracic pressure (constant)

    def validate(self) -> None:
        positive = [
            "Eeslvf", "Eesrvf", "Eao", "Eesla", "Eesra", "Epa", "Epu",
            "Esa", "Esv", "Evc", "Rao", "Rra", "Rpv", "Rsv", "Rmt", "Rav",
            "Lao", "Lpa", "Rsa", "Rpa", "Tc", "Tsys0",
            "lam_la", "lam_lvf", "lam_ra", "lam_rvf",
            "P0la", "P0lvf", "P0ra", "P0rvf",
        ]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        volumes = [
            "V0la", "V0lvf", "V0ra", "V0rvf", "Vdla", "Vdlvf", "Vdra",
            "Vdrvf", "Vuao", "Vupa", "Vupu", "Vusa", "Vusv", "Vuvc", "Vtotal",
        ]
        for name in volumes:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.Vtotal <= self.unstressed_volume():
            raise ValueError("Vtotal must exceed the total unstressed volume")
        if not self.Tsys0 < self.Tc:
            raise ValueError("Tsys0 must be smaller than the heart period Tc")

    def unstressed_volume(self) -> float:
        """Total zero-pressure volume (vessel Vu plus chamber diastolic V0)."""
        return (self.Vuao + self.Vupa + self.Vupu + self.Vusa + self.Vusv
                + self.Vuvc + self.V0la + self.V0lvf + self.V0ra + self.V0rvf)

    def with_factors(self, factors: dict) -> "CvsParameters":
        """Return a copy with named parameters scaled multiplicatively."""
        updates = {}
        for key, factor in factors.items():
            field = _KEY_TO_FIELD.get(key, key)
            if field not in {f.name for f in fields(self)}:
                raise KeyError(f"unknown circulation parameter {key!r}")
            updates[field] = getattr(self, field) * factor
        return replace(self, **updates)

    def to_dict(self) -> dict:
        return {_FIELD_TO_KEY.get(f.name, f.name): getattr(self, f.name)
                for f in fields(self)}

    @classmethod
    def from_dict(cls, pairs: dict) -> "CvsParameters":
        known = {f.name for f in fields(cls)}
        updates = {}
        for key, value in pairs.items():
            field = _KEY_TO_FIELD.get(key, key)
            if field not in known:
                raise KeyError(f"unknown circulation parameter {key!r}")
            updates[field] = float(value)
        return cls(**updates)

    @classmethod
    def parameter_names(cls) -> list:
        """The 43 perturbable parameter names, using the published keys."""
        skip = {"Rsa", "Rpa", "Pthor"}
        return [_FIELD_TO_KEY.get(f.name, f.name) for f in fields(cls)
                if f.name not in skip]

    def get(self, key: str) -> float:
        return getattr(self, _KEY_TO_FIELD.get(key, key))


@dataclass
class PumpParameters:
    """Centrifugal pump and cannula constants.

    Head curve: dP = a2*speed^2 - a1*Q - a0*dQ/dt with speed in rpm and Q
    in mL/s.  a2 and a1 were fixed by closed-loop calibration against the
    4-6 L/min clinical operating band at 2400 rpm (scripts/calibrate_pump.py).
    """

    Rin: float = 0.05         # inlet cannula resistance, mmHg.s/mL
    Rout: float = 0.05        # outlet cannula resistance, mmHg.s/mL
    Lin: float = 5.0e-4       # inlet cannula inertance, mmHg.s^2/mL
    Lout: float = 5.0e-4      # outlet cannula inertance, mmHg.s^2/mL
    a2: float = 2.0e-5        # head vs speed^2, mmHg/rpm^2 (calibrated)
    a1: float = 0.25          # head droop vs flow, mmHg.s/mL (calibrated)
    a0: float = 2.0e-4        # pump fluid inertance, mmHg.s^2/mL
    Rlsuc_gain: float = 3.5   # suction resistance slope, (mmHg.s/mL)/mmHg
    P_suc_threshold: float = 1.0   # inlet pressure below which the guard engages
    speed_min: float = 1800.0
    speed_max: float = 3000.0

    def validate(self) -> None:
        if self.a2 <= 0:
            raise ValueError("a2 must be > 0")
        if not self.speed_min < self.speed_max:
            raise ValueError("speed_min must be below speed_max")
        for name in ("Rin", "Rout", "Lin", "Lout"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.Rlsuc_gain < 0:
            raise ValueError("Rlsuc_gain must be >= 0")

    def to_dict(self, prefix: str = "pump.") -> dict:
        return {prefix + f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, pairs: dict, prefix: str = "pump.") -> "PumpParameters":
        known = {f.name for f in fields(cls)}
        updates = {}
        for key, value in pairs.items():
            name = key[len(prefix):] if key.startswith(prefix) else key
            if name not in known:
                raise KeyError(f"unknown pump parameter {key!r}")
            updates[name] = float(value)
        return cls(**updates)


def save_parameters(path, cvs: CvsParameters, pump: PumpParameters | None = None) -> None:
    pairs = dict(cvs.to_dict())
    if pump is not None:
        pairs.update(pump.to_dict())
    kv.save(path, pairs, header="lvadbench parameter set")


def load_parameters(path) -> tuple:
    pairs = kv.load(path)
    cvs_pairs = {k: v for k, v in pairs.items() if not k.startswith("pump.")}
    pump_pairs = {k: v for k, v in pairs.items() if k.startswith("pump.")}
    cvs = CvsParameters.from_dict(cvs_pairs)
    pump = PumpParameters.from_dict(pump_pairs) if pump_pairs else None
    return cvs, pump

"""Run configuration: one namespaced key-value file drives every command.

Sections: ``cvs.*`` circulation parameters, ``pump.*`` pump constants,
``detector.*``, ``controller.kind`` + ``controller.mfac.*`` /
``controller.pid.*``, ``protocol.*``, ``scenario.kind``, ``seed``.  Every
file must carry ``format = lvadbench/1``.  Unknown keys are rejected;
omitted keys fall back to the shipped defaults.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from . import kv
from .controllers import MfacConfig, PidConfig
from .detector import DetectorConfig
from .params import CvsParameters, PumpParameters
from .protocol import CONTROLLER_KINDS, ProtocolConfig, RunSetup, default_mfac_config
from .scenario import SCENARIO_KINDS

FORMAT_KEY = "format"
FORMAT_VALUE = "lvadbench/1"

# file key <-> dataclass field, where they differ
_MFAC_KEYS = {"lambda": "lam"}


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


@dataclass
class RunConfiguration:
    """Everything a command needs: model, controller, scenario, seed."""

    cvs: CvsParameters = field(default_factory=CvsParameters)
    pump: PumpParameters = field(default_factory=PumpParameters)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    mfac: MfacConfig = field(default_factory=default_mfac_config)
    pid: PidConfig = field(default_factory=PidConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    controller: str = "mfac"
    scenario: str = "none"
    seed: int = 0

    def setup(self) -> RunSetup:
        return RunSetup(cvs=self.cvs, pump=self.pump, protocol=self.protocol,
                        detector=self.detector, mfac=self.mfac, pid=self.pid)

    def validate(self) -> None:
        self.cvs.validate()
        self.pump.validate()
        self.detector.validate()
        self.mfac.validate()
        self.protocol.validate()
        if self.controller not in CONTROLLER_KINDS:
            raise ConfigError(f"unknown controller {self.controller!r}")
        if self.scenario != "none" and self.scenario not in SCENARIO_KINDS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")


def _section_pairs(obj, prefix: str, key_map: dict | None = None) -> dict:
    remap = {v: k for k, v in (key_map or {}).items()}
    out = {}
    for f in dataclasses.fields(obj):
        out[prefix + remap.get(f.name, f.name)] = getattr(obj, f.name)
    return out


def _apply_section(cls, pairs: dict, prefix: str,
                   key_map: dict | None = None):
    known = {f.name: f for f in dataclasses.fields(cls)}
    key_map = key_map or {}
    updates = {}
    for key, value in pairs.items():
        name = key[len(prefix):]
        name = key_map.get(name, name)
        if name not in known:
            raise ConfigError(f"unknown key {key!r}")
        default = known[name].default
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"key {key!r} expects true/false")
            updates[name] = value
        elif isinstance(default, int) and not isinstance(default, bool):
            updates[name] = int(value)
        else:
            updates[name] = float(value)
    return cls(**updates) if updates else cls()


def to_pairs(config: RunConfiguration) -> dict:
    pairs = {FORMAT_KEY: FORMAT_VALUE,
             "seed": config.seed,
             "scenario.kind": config.scenario,
             "controller.kind": config.controller}
    pairs.update({"cvs." + k: v for k, v in config.cvs.to_dict().items()})
    pairs.update(config.pump.to_dict(prefix="pump."))
    pairs.update(_section_pairs(config.detector, "detector."))
    pairs.update(_section_pairs(config.mfac, "controller.mfac.", _MFAC_KEYS))
    pairs.update(_section_pairs(config.pid, "controller.pid."))
    pairs.update(_section_pairs(config.protocol, "protocol."))
    return pairs


def from_pairs(pairs: dict) -> RunConfiguration:
    if pairs.get(FORMAT_KEY) != FORMAT_VALUE:
        if FORMAT_KEY not in pairs:
            raise ConfigError(f"missing required key {FORMAT_KEY!r}")
        raise ConfigError(
            f"unsupported {FORMAT_KEY!r} value {pairs[FORMAT_KEY]!r}")
    sections: dict = {"cvs.": {}, "pump.": {}, "detector.": {},
                      "controller.mfac.": {}, "controller.pid.": {},
                      "protocol.": {}}
    scalars = {}
    for key, value in pairs.items():
        if key == FORMAT_KEY:
            continue
        for prefix in sections:
            if key.startswith(prefix):
                sections[prefix][key] = value
                break
        else:
            if key in ("seed", "scenario.kind", "controller.kind"):
                scalars[key] = value
            else:
                raise ConfigError(f"unknown key {key!r}")
    try:
        cvs = CvsParameters.from_dict(
            {k[len("cvs."):]: v for k, v in sections["cvs."].items()})
    except KeyError as exc:
        raise ConfigError(f"unknown key 'cvs.{exc.args[0]}'") from None
    try:
        pump = PumpParameters.from_dict(sections["pump."]) \
            if sections["pump."] else PumpParameters()
    except KeyError as exc:
        raise ConfigError(str(exc.args[0])) from None
    config = RunConfiguration(
        cvs=cvs,
        pump=pump,
        detector=_apply_section(DetectorConfig, sections["detector."],
                                "detector."),
        mfac=_apply_section(MfacConfig, sections["controller.mfac."],
                            "controller.mfac.", _MFAC_KEYS),
        pid=_apply_section(PidConfig, sections["controller.pid."],
                           "controller.pid."),
        protocol=_apply_section(ProtocolConfig, sections["protocol."],
                                "protocol."),
        controller=str(scalars.get("controller.kind", "mfac")),
        scenario=str(scalars.get("scenario.kind", "none")),
        seed=int(scalars.get("seed", 0)),
    )
    config.validate()
    return config


def load(path) -> RunConfiguration:
    try:
        pairs = kv.load(path)
    except kv.KvError as exc:
        raise ConfigError(str(exc)) from None
    return from_pairs(pairs)


def save(path, config: RunConfiguration) -> None:
    kv.save(path, to_pairs(config), header="lvadbench run configuration")

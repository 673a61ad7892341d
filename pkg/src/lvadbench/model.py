"""Closed-loop circulation model with an apex-to-aorta rotary pump.

Ten storage compartments (four actively contracting chambers, six
vessels), four diode valves, inertial branches for the aortic and
pulmonary arterial outflows, and a series pump path (inlet cannula,
impeller head source, outlet cannula).  Chamber pressure blends an
end-systolic linear and an end-diastolic exponential pressure-volume
relation through a raised-cosine activation.

Integration is classical fixed-step RK4 at 0.1 ms, decimated to 200 Hz
outputs.  The hot loop is compiled with numba; ``derivatives`` is the
plain-Python reference the kernel is tested against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .params import CvsParameters, PumpParameters
from .pump import suction_resistance

DT_DEFAULT = 1.0e-4     # internal RK4 step, s
FS_OUT = 200.0          # output sampling rate, Hz

# Topology-completion resistances (mmHg.s/mL).  The published parameter
# roster names no resistance for the tricuspid valve or the pulmonary
# venous return branch; these mirror the mitral-valve scale and are fixed
# (never perturbed, never serialized).
R_TRICUSPID = 0.01
R_PULMONARY_VEIN = 0.01

# Atrial systole starts 16% of a cycle before ventricular onset (a
# PR-interval-like lead) and relaxes through early ventricular systole,
# after mitral closure.
ATRIAL_LEAD_FRAC = 0.16
ATRIAL_DURATION_FRAC = 0.22


class SimulationBlowup(RuntimeError):
    """Raised when the state stops being finite."""


@dataclass
class ActivationSpec:
    """Heart timing: period T and systolic duration Tsys, both s."""

    T: float
    Tsys: float

    def __post_init__(self):
        if not 0.0 < self.Tsys < self.T:
            raise ValueError("need 0 < Tsys < T")

    @classmethod
    def from_params(cls, params: CvsParameters, hr_bpm: float = 60.0) -> "ActivationSpec":
        period = params.Tc * 60.0 / hr_bpm
        return cls(T=period, Tsys=params.Tsys0 * math.sqrt(period))


def elastance_activation(t_cycle: float, act: ActivationSpec) -> float:
    """Ventricular driver: raised cosine on [0, Tsys], zero elsewhere."""
    if not 0.0 <= t_cycle < act.T:
        raise ValueError("t_cycle outside [0, T)")
    if t_cycle >= act.Tsys:
        return 0.0
    return 0.5 * (1.0 - math.cos(2.0 * math.pi * t_cycle / act.Tsys))


def atrial_activation(t_cycle: float, act: ActivationSpec) -> float:
    """Atrial driver: same shape, in the window leading ventricular onset."""
    if not 0.0 <= t_cycle < act.T:
        raise ValueError("t_cycle outside [0, T)")
    onset = act.T * (1.0 - ATRIAL_LEAD_FRAC)
    duration = act.T * ATRIAL_DURATION_FRAC
    local = t_cycle - onset
    if local < 0.0 or local >= duration:
        return 0.0
    return 0.5 * (1.0 - math.cos(2.0 * math.pi * local / duration))


def chamber_pressure(v: float, activation: float, ees: float, vd: float,
                     p0: float, lam: float, v0: float, pthor: float) -> float:
    """Dual pressure-volume relation of a contracting chamber."""
    if v < 0:
        raise ValueError("volume must be >= 0")
    systolic = ees * (v - vd)
    diastolic = p0 * math.expm1(lam * (v - v0))
    return activation * systolic + (1.0 - activation) * diastolic + pthor


def valve_flow(p_up: float, p_down: float, r: float) -> float:
    """Ideal-diode flow: forward only."""
    if r <= 0:
        raise ValueError("resistance must be > 0")
    dp = p_up - p_down
    return dp / r if dp > 0.0 else 0.0


@dataclass
class CvsState:
    """Instantaneous volumes (mL), inertial flows (mL/s), cycle phase (s).

    Qin and Qout are the inlet/outlet cannula flows; the pump path has no
    internal storage so the dynamics keep them identical.
    """

    Vla: float
    Vlv: float
    Vao: float
    Vsa: float
    Vsv: float
    Vvc: float
    Vra: float
    Vrv: float
    Vpa: float
    Vpu: float
    Qao: float = 0.0
    Qpa: float = 0.0
    Qin: float = 0.0
    Qout: float = 0.0
    t_cycle: float = 0.0

    _VOLUMES = ("Vla", "Vlv", "Vao", "Vsa", "Vsv", "Vvc", "Vra", "Vrv",
                "Vpa", "Vpu")

    def as_array(self) -> np.ndarray:
        return np.array([self.Vla, self.Vlv, self.Vao, self.Vsa, self.Vsv,
                         self.Vvc, self.Vra, self.Vrv, self.Vpa, self.Vpu,
                         self.Qao, self.Qpa, self.Qin, self.Qout,
                         self.t_cycle], dtype=np.float64)

    @classmethod
    def from_array(cls, y: np.ndarray) -> "CvsState":
        return cls(*[float(v) for v in y])

    def total_volume(self) -> float:
        return sum(getattr(self, name) for name in self._VOLUMES)


def initial_state(params: CvsParameters) -> CvsState:
    """Deterministic starting point: chambers at diastolic zero-pressure
    volume, vessel excess split in proportion to compliance."""
    chamber_v0 = {"Vla": params.V0la, "Vlv": params.V0lvf,
                  "Vra": params.V0ra, "Vrv": params.V0rvf}
    vessel_vu = {"Vao": params.Vuao, "Vsa": params.Vusa, "Vsv": params.Vusv,
                 "Vvc": params.Vuvc, "Vpa": params.Vupa, "Vpu": params.Vupu}
    compliance = {"Vao": 1.0 / params.Eao, "Vsa": 1.0 / params.Esa,
                  "Vsv": 1.0 / params.Esv, "Vvc": 1.0 / params.Evc,
                  "Vpa": 1.0 / params.Epa, "Vpu": 1.0 / params.Epu}
    excess = params.Vtotal - sum(chamber_v0.values()) - sum(vessel_vu.values())
    if excess <= 0:
        raise ValueError("Vtotal does not cover the unstressed volume")
    total_c = sum(compliance.values())
    volumes = dict(chamber_v0)
    for name, vu in vessel_vu.items():
        volumes[name] = vu + excess * compliance[name] / total_c
    return CvsState(**volumes)


def compartment_pressures(state: CvsState, params: CvsParameters,
                          hr_bpm: float = 60.0) -> dict:
    """All ten compartment pressures at the state's cycle phase."""
    act = ActivationSpec.from_params(params, hr_bpm)
    phase = state.t_cycle % act.T
    ev = elastance_activation(phase, act)
    ea = atrial_activation(phase, act)
    pth = params.Pthor
    return {
        "Pla": chamber_pressure(state.Vla, ea, params.Eesla, params.Vdla,
                                params.P0la, params.lam_la, params.V0la, pth),
        "Plv": chamber_pressure(state.Vlv, ev, params.Eeslvf, params.Vdlvf,
                                params.P0lvf, params.lam_lvf, params.V0lvf, pth),
        "Pra": chamber_pressure(state.Vra, ea, params.Eesra, params.Vdra,
                                params.P0ra, params.lam_ra, params.V0ra, pth),
        "Prv": chamber_pressure(state.Vrv, ev, params.Eesrvf, params.Vdrvf,
                                params.P0rvf, params.lam_rvf, params.V0rvf, pth),
        "Pao": params.Eao * (state.Vao - params.Vuao) + pth,
        "Psa": params.Esa * (state.Vsa - params.Vusa),
        "Psv": params.Esv * (state.Vsv - params.Vusv),
        "Pvc": params.Evc * (state.Vvc - params.Vuvc),
        "Ppa": params.Epa * (state.Vpa - params.Vupa) + pth,
        "Ppu": params.Epu * (state.Vpu - params.Vupu) + pth,
    }


def branch_flows(state: CvsState, params: CvsParameters, pump: PumpParameters,
                 speed: float, hr_bpm: float = 60.0) -> dict:
    """All branch flows given the current pressures."""
    p = compartment_pressures(state, params, hr_bpm)
    return {
        "Qmt": valve_flow(p["Pla"], p["Plv"], params.Rmt),
        "Qav": valve_flow(p["Plv"], p["Pao"], params.Rav),
        "Qtc": valve_flow(p["Pra"], p["Prv"], R_TRICUSPID),
        "Qpv": valve_flow(p["Prv"], p["Ppa"], params.Rpv),
        "Qsa": (p["Psa"] - p["Psv"]) / params.Rsa,
        "Qsv": (p["Psv"] - p["Pvc"]) / params.Rsv,
        "Qvc": (p["Pvc"] - p["Pra"]) / params.Rra,
        "Qpu": (p["Ppu"] - p["Pla"]) / R_PULMONARY_VEIN,
        "Qao": state.Qao,
        "Qpa": state.Qpa,
        "Qpump": state.Qin,
    }


def derivatives(state: CvsState, params: CvsParameters, pump: PumpParameters,
                speed: float, hr_bpm: float = 60.0,
                transfer_rate: float = 0.0) -> np.ndarray:
    """Reference right-hand side; the compiled kernel must match this."""
    p = compartment_pressures(state, params, hr_bpm)
    q = branch_flows(state, params, pump, speed, hr_bpm)
    rsuc = suction_resistance(p["Plv"], pump)
    qp = state.Qin
    dqp = (p["Plv"] - p["Pao"] + pump.a2 * speed * speed
           - (pump.a1 + pump.Rin + pump.Rout + rsuc) * qp) \
        / (pump.Lin + pump.Lout + pump.a0)
    dy = np.array([
        q["Qpu"] - q["Qmt"],                      # Vla
        q["Qmt"] - q["Qav"] - state.Qin,          # Vlv
        q["Qav"] + state.Qout - state.Qao,        # Vao
        state.Qao - q["Qsa"],                     # Vsa
        q["Qsa"] - q["Qsv"],                      # Vsv
        q["Qsv"] - q["Qvc"],                      # Vvc
        q["Qvc"] - q["Qtc"] + transfer_rate,      # Vra
        q["Qtc"] - q["Qpv"],                      # Vrv
        q["Qpv"] - state.Qpa,                     # Vpa
        state.Qpa - q["Qpu"],                     # Vpu
        (p["Pao"] - p["Psa"] - params.Rao * state.Qao) / params.Lao,
        (p["Ppa"] - p["Ppu"] - params.Rpa * state.Qpa) / params.Lpa,
        dqp,
        dqp,
        1.0,
    ], dtype=np.float64)
    if not np.all(np.isfinite(dy)):
        raise SimulationBlowup("non-finite derivative")
    return dy


# ---------------------------------------------------------------------------
# Parameter packing for the compiled kernel.

_P_FIELDS = [
    "Eeslvf", "Eesrvf", "Eao", "Eesla", "Eesra", "Epa", "Epu", "Esa", "Esv",
    "Evc", "Rao", "Rra", "Rpv", "Rsv", "Tc", "Tsys0", "V0la", "V0lvf",
    "V0ra", "V0rvf", "Vdla", "Vdlvf", "Vdra", "Vdrvf", "Rmt", "Rav", "Vuao",
    "Vupa", "Vupu", "Vusa", "Vusv", "Vuvc", "P0la", "P0lvf", "P0ra", "P0rvf",
    "Vtotal", "lam_la", "lam_lvf", "lam_ra", "lam_rvf", "Lao", "Lpa",
    "Rsa", "Rpa", "Pthor",
]
_PUMP_FIELDS = ["Rin", "Rout", "Lin", "Lout", "a2", "a1", "a0",
                "Rlsuc_gain", "P_suc_threshold"]

_IDX = {name: i for i, name in enumerate(_P_FIELDS)}
_IDX["Rtc"] = len(_P_FIELDS)
_IDX["Rpu"] = len(_P_FIELDS) + 1
for i, name in enumerate(_PUMP_FIELDS):
    _IDX["pump_" + name] = len(_P_FIELDS) + 2 + i
_IDX["atrial_lead"] = len(_P_FIELDS) + 2 + len(_PUMP_FIELDS)
_IDX["atrial_dur"] = _IDX["atrial_lead"] + 1
N_PACKED = _IDX["atrial_dur"] + 1


def pack_params(params: CvsParameters, pump: PumpParameters) -> np.ndarray:
    arr = np.empty(N_PACKED, dtype=np.float64)
    for name in _P_FIELDS:
        arr[_IDX[name]] = getattr(params, name)
    arr[_IDX["Rtc"]] = R_TRICUSPID
    arr[_IDX["Rpu"]] = R_PULMONARY_VEIN
    for name in _PUMP_FIELDS:
        arr[_IDX["pump_" + name]] = getattr(pump, name)
    arr[_IDX["atrial_lead"]] = ATRIAL_LEAD_FRAC
    arr[_IDX["atrial_dur"]] = ATRIAL_DURATION_FRAC
    return arr


def null_schedule(params: CvsParameters) -> np.ndarray:
    """Schedule array that changes nothing (see scenario.compile_schedule)."""
    return np.array([np.inf,
                     params.Rsa, params.Rsa, 0.0,
                     params.Rpa, params.Rpa, 0.0,
                     60.0, 60.0, 0.0,
                     10.0, 0.0], dtype=np.float64)


# Schedule array layout:
#   0 onset t0, 1-3 Rsa (x0, x1, mode), 4-6 Rpa, 7-9 heart rate bpm,
#   10 time constant tau, 11 transfer volume (signed, via right atrium).
# mode: 0 = step, 1 = first-order.


@njit(cache=True, inline="always")
def _sched(x0, x1, mode, t, t0, tau):
    if t < t0:
        return x0
    if mode == 0.0:
        return x1
    return x1 + (x0 - x1) * math.exp(-(t - t0) / tau)


@njit(cache=True, inline="always")
def _chamber(v, act, ees, vd, p0, lam, v0, pthor):
    return act * ees * (v - vd) + (1.0 - act) * p0 * math.expm1(lam * (v - v0)) + pthor


@njit(cache=True, inline="always")
def _drivers(theta, T, tsys, lead, dur_frac):
    th = theta % T
    if th < tsys:
        ev = 0.5 * (1.0 - math.cos(2.0 * math.pi * th / tsys))
    else:
        ev = 0.0
    onset = T * (1.0 - lead)
    dur = T * dur_frac
    local = th - onset
    if 0.0 <= local < dur:
        ea = 0.5 * (1.0 - math.cos(2.0 * math.pi * local / dur))
    else:
        ea = 0.0
    return ev, ea


@njit(cache=True, inline="always")
def _rhs(y, t, P, S, speed, dy):
    rsa = _sched(S[1], S[2], S[3], t, S[0], S[10])
    rpa = _sched(S[4], S[5], S[6], t, S[0], S[10])
    hr = _sched(S[7], S[8], S[9], t, S[0], S[10])
    T = P[14] * 60.0 / hr
    tsys = P[15] * math.sqrt(T)
    ev, ea = _drivers(y[14], T, tsys, P[57], P[58])
    pth = P[45]

    pla = _chamber(y[0], ea, P[3], P[20], P[32], P[37], P[16], pth)
    plv = _chamber(y[1], ev, P[0], P[21], P[33], P[38], P[17], pth)
    pra = _chamber(y[6], ea, P[4], P[22], P[34], P[39], P[18], pth)
    prv = _chamber(y[7], ev, P[1], P[23], P[35], P[40], P[19], pth)
    pao = P[2] * (y[2] - P[26]) + pth
    psa = P[7] * (y[3] - P[29])
    psv = P[8] * (y[4] - P[30])
    pvc = P[9] * (y[5] - P[31])
    ppa = P[5] * (y[8] - P[27]) + pth
    ppu = P[6] * (y[9] - P[28]) + pth

    qmt = max(0.0, (pla - plv) / P[24])
    qav = max(0.0, (plv - pao) / P[25])
    qtc = max(0.0, (pra - prv) / P[46])
    qpv = max(0.0, (prv - ppa) / P[12])
    qsa = (psa - psv) / rsa
    qsv = (psv - pvc) / P[13]
    qvc = (pvc - pra) / P[11]
    qpu = (ppu - pla) / P[47]

    rsuc = P[55] * max(0.0, P[56] - plv)
    dqp = (plv - pao + P[52] * speed * speed
           - (P[53] + P[48] + P[49] + rsuc) * y[12]) / (P[50] + P[51] + P[54])

    qext = 0.0
    if S[11] != 0.0 and t >= S[0]:
        qext = S[11] / S[10] * math.exp(-(t - S[0]) / S[10])

    dy[0] = qpu - qmt
    dy[1] = qmt - qav - y[12]
    dy[2] = qav + y[13] - y[10]
    dy[3] = y[10] - qsa
    dy[4] = qsa - qsv
    dy[5] = qsv - qvc
    dy[6] = qvc - qtc + qext
    dy[7] = qtc - qpv
    dy[8] = qpv - y[11]
    dy[9] = y[11] - qpu
    dy[10] = (pao - psa - P[10] * y[10]) / P[41]
    dy[11] = (ppa - ppu - rpa * y[11]) / P[42]
    dy[12] = dqp
    dy[13] = dqp
    dy[14] = 1.0
    return plv


@njit(cache=True, inline="always")
def _sample_signals(y, t, P, S):
    hr = _sched(S[7], S[8], S[9], t, S[0], S[10])
    T = P[14] * 60.0 / hr
    tsys = P[15] * math.sqrt(T)
    ev, ea = _drivers(y[14], T, tsys, P[57], P[58])
    pth = P[45]
    pla = _chamber(y[0], ea, P[3], P[20], P[32], P[37], P[16], pth)
    plv = _chamber(y[1], ev, P[0], P[21], P[33], P[38], P[17], pth)
    pao = P[2] * (y[2] - P[26]) + pth
    return plv, pla, pao, ev


@njit(cache=True)
def rk4_block(y, t_start, n_out, steps_per_out, dt, P, S, speed,
              out_t, out_plv, out_pla, out_pao, out_vlv, out_qp,
              out_speed, out_act, out_vsum, offset):
    """Advance n_out output samples of steps_per_out RK4 steps each.

    Records the 200 Hz signals at the end of every output interval and
    tracks the per-step minimum LV pressure.  Returns (status, min_plv,
    t_end); status 1 flags a non-finite state.
    """
    k1 = np.empty(15)
    k2 = np.empty(15)
    k3 = np.empty(15)
    k4 = np.empty(15)
    yt = np.empty(15)
    t = t_start
    min_plv = 1.0e30
    for i in range(n_out):
        for _ in range(steps_per_out):
            plv = _rhs(y, t, P, S, speed, k1)
            if plv < min_plv:
                min_plv = plv
            for j in range(15):
                yt[j] = y[j] + 0.5 * dt * k1[j]
            _rhs(yt, t + 0.5 * dt, P, S, speed, k2)
            for j in range(15):
                yt[j] = y[j] + 0.5 * dt * k2[j]
            _rhs(yt, t + 0.5 * dt, P, S, speed, k3)
            for j in range(15):
                yt[j] = y[j] + dt * k3[j]
            _rhs(yt, t + dt, P, S, speed, k4)
            for j in range(15):
                y[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            t += dt
            hr = _sched(S[7], S[8], S[9], t, S[0], S[10])
            T = P[14] * 60.0 / hr
            while y[14] >= T:
                y[14] -= T
        ok = True
        for j in range(15):
            if not np.isfinite(y[j]):
                ok = False
        if not ok:
            return 1, min_plv, t
        plv, pla, pao, ev = _sample_signals(y, t, P, S)
        idx = offset + i
        out_t[idx] = t
        out_plv[idx] = plv
        out_pla[idx] = pla
        out_pao[idx] = pao
        out_vlv[idx] = y[1]
        out_qp[idx] = y[12]
        out_speed[idx] = speed
        out_act[idx] = ev
        vsum = 0.0
        for j in range(10):
            vsum += y[j]
        out_vsum[idx] = vsum
    return 0, min_plv, t


@dataclass
class Trace:
    """Uniformly sampled 200 Hz simulation output."""

    t: np.ndarray
    plv: np.ndarray
    pla: np.ndarray
    pao: np.ndarray
    vlv: np.ndarray
    qpump: np.ndarray
    speed: np.ndarray
    activation: np.ndarray
    vsum: np.ndarray

    CSV_HEADER = "t,Plv,Pla,Pao,Vlv,Qpump,speed,activation,lvedp_true"

    def __len__(self) -> int:
        return len(self.t)

    def true_lvedp(self) -> list:
        """Ground-truth end-diastole annotations from the activation signal.

        One (index, time, value) per cycle: the last zero-activation
        sample immediately before activation turns positive, with the LV
        pressure there.
        """
        act = self.activation
        onsets = np.flatnonzero((act[:-1] == 0.0) & (act[1:] > 0.0))
        if onsets.size == 0:
            raise ValueError("trace shorter than one cardiac cycle")
        return [(int(i), float(self.t[i]), float(self.plv[i])) for i in onsets]

    def to_csv(self, path) -> None:
        truth = {idx: val for idx, _, val in self.true_lvedp()} if len(self) else {}
        cols = [self.plv, self.pla, self.pao, self.vlv, self.qpump,
                self.speed, self.activation]
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.CSV_HEADER + "\n")
            for i in range(len(self)):
                mark = repr(truth[i]) if i in truth else ""
                body = ",".join(repr(float(c[i])) for c in cols)
                fh.write(f"{self.t[i]:.3f},{body},{mark}\n")

    @classmethod
    def from_csv(cls, path) -> "Trace":
        data = np.genfromtxt(path, delimiter=",", names=True)
        n = data.shape[0]
        return cls(t=data["t"], plv=data["Plv"], pla=data["Pla"],
                   pao=data["Pao"], vlv=data["Vlv"], qpump=data["Qpump"],
                   speed=data["speed"], activation=data["activation"],
                   vsum=np.full(n, np.nan))


class Simulation:
    """Stateful integrator for one run.

    Owns the state vector and the preallocated 200 Hz output buffers;
    ``run_block`` advances whole seconds at fixed speed, ``step_sample``
    advances one 5 ms output interval (the controller tick).
    """

    def __init__(self, params: CvsParameters, pump: PumpParameters,
                 schedule: np.ndarray | None = None,
                 capacity_s: float = 400.0, dt: float = DT_DEFAULT,
                 state: CvsState | None = None):
        if not 0.0 < dt <= 1.0e-3:
            raise ValueError("dt must be in (0, 1 ms]")
        params.validate()
        pump.validate()
        self.params = params
        self.pump_params = pump
        self.P = pack_params(params, pump)
        self.S = schedule if schedule is not None else null_schedule(params)
        self.dt = dt
        self.steps_per_out = int(round(1.0 / (FS_OUT * dt)))
        if abs(self.steps_per_out * dt * FS_OUT - 1.0) > 1e-9:
            raise ValueError("dt must divide the 200 Hz output interval")
        self.y = (state if state is not None else initial_state(params)).as_array()
        self.t = 0.0
        self.min_plv = math.inf
        self.n = 0
        cap = int(round(capacity_s * FS_OUT)) + 8
        self._buf = {name: np.empty(cap) for name in
                     ("t", "plv", "pla", "pao", "vlv", "qp", "speed", "act",
                      "vsum")}

    def _advance(self, n_out: int, speed: float) -> None:
        b = self._buf
        status, min_plv, t_end = rk4_block(
            self.y, self.t, n_out, self.steps_per_out, self.dt, self.P,
            self.S, speed, b["t"], b["plv"], b["pla"], b["pao"], b["vlv"],
            b["qp"], b["speed"], b["act"], b["vsum"], self.n)
        self.min_plv = min(self.min_plv, min_plv)
        self.t = t_end
        if status != 0:
            raise SimulationBlowup(f"state became non-finite at t={t_end:.3f} s")
        self.n += n_out

    def run_block(self, duration_s: float, speed: float) -> None:
        n_out = int(round(duration_s * FS_OUT))
        self._advance(n_out, speed)

    def step_sample(self, speed: float) -> tuple:
        """One 5 ms interval; returns (t, plv) of the new sample."""
        self._advance(1, speed)
        i = self.n - 1
        return self._buf["t"][i], self._buf["plv"][i]

    def state(self) -> CvsState:
        return CvsState.from_array(self.y)

    def trace(self) -> Trace:
        n = self.n
        b = self._buf
        return Trace(t=b["t"][:n].copy(), plv=b["plv"][:n].copy(),
                     pla=b["pla"][:n].copy(), pao=b["pao"][:n].copy(),
                     vlv=b["vlv"][:n].copy(), qpump=b["qp"][:n].copy(),
                     speed=b["speed"][:n].copy(), activation=b["act"][:n].copy(),
                     vsum=b["vsum"][:n].copy())

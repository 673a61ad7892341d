"""lvadbench: adaptive pump-speed control workbench on a closed-loop
lumped-parameter circulation with a rotary blood pump."""

from .controllers import (MfacConfig, MfacController, MfacState, PidConfig,
                          PidController, PidState, mfac_control,
                          mfac_estimate_ppd, pid_control)
from .detector import (DetectorConfig, LvedpDetector, LvedpEvent, NoBeatError,
                       evaluate)
from .model import (ActivationSpec, CvsState, Simulation, Trace,
                    chamber_pressure, derivatives, elastance_activation,
                    valve_flow)
from .params import CvsParameters, PumpParameters, dyn_to_mmhg, mmhg_to_dyn
from .protocol import (ProtocolConfig, RunResult, RunSetup, run_cohort,
                       run_protocol, sae, safety_flags)
from .pump import clamp_speed, pump_head, suction_resistance
from .scenario import (PatientSpec, Scenario, generate_patient, make_scenario,
                       schedule_value, sensitivity_coefficient)
from .stats import box_stats, wilcoxon_paired

__version__ = "0.1.0"

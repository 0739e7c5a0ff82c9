"""
vatrack: attitude tracking from vector measurements and biased gyros.

Modules
-------
so3             quaternion and rotation algebra
attitude_error  vector-alignment error variables and the W matrix
plant           rigid-body dynamics, desired trajectories, RK4
sensors         measurement models and the measurement filter
observer        gyro-bias observers (plain and saturated)
control         nonadaptive and adaptive tracking laws, Lyapunov functions
sim             closed-loop runs and experiments
"""

from .exceptions import (CollinearReferences, InvalidInertia, InvalidScenario,
                         NotUnitQuaternion, NumericalDivergence, VatrackError, ZeroQuaternion)
from .scenario import Scenario, builtin_scenario, load_scenario, write_scenario
from .sim import SimTrace, attraction_sweep, instability_experiment, run
from .trace import write_csv

__version__ = "0.1.0"

__all__ = [
    "CollinearReferences", "InvalidInertia", "InvalidScenario", "NotUnitQuaternion",
    "NumericalDivergence", "VatrackError", "ZeroQuaternion", "Scenario", "builtin_scenario",
    "load_scenario", "write_scenario", "SimTrace", "attraction_sweep",
    "instability_experiment", "run", "write_csv",
]

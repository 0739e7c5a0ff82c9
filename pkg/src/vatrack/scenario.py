"""
Scenario files.

A scenario is a flat list of ``section.key = value`` lines (valid TOML with
dotted keys).  Sections and keys::

    run.name, run.controller, run.observer, run.dt, run.duration,
    run.decimation, run.output
    references.vectors, references.weights, references.virtual_third
    plant.theta
    desired.profile, desired.omega_const
    initial.q, initial.omega, initial.q_d, initial.bhat, initial.theta_hat
    sensors.bias, sensors.bias_bound, sensors.vector_noise, sensors.gyro_noise,
    sensors.vector_noise_max, sensors.gyro_noise_max, sensors.seed
    observer.lambdas, observer.gamma_f, observer.mu_b
    control.lambda_c, control.K_c, control.alpha1, control.alpha2,
    control.Gamma, control.h_alignment_sign

``run.controller`` is ``nonadaptive``, ``adaptive`` or ``open_loop`` (attitude
driven kinematically along ``w_d``; observer only).  ``run.observer`` is
``auto`` (plain for nonadaptive/open loop, saturated for adaptive),
``plain`` or ``saturated``.  ``desired.profile`` is ``paper_sec5``,
``constant`` or ``rest``.  With ``references.virtual_third = true`` the
last reference vector must equal ``r1 x r2 / |r1 x r2|`` and its measurement
is synthesized from the first two measurements.
"""

import dataclasses
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .attitude_error import COLLINEAR_TOL, has_noncollinear_pair, third_virtual_vector
from .control import CONTROLLERS, ControllerGains
from .exceptions import InvalidGain, InvalidInertia, InvalidScenario
from .observer import ObserverGains
from .plant import PROFILES, InertiaParams
from .sensors import SensorConfig

_EYE3 = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))


@dataclass(frozen=True)
class RunConfig:
    name: str = "scenario"
    controller: str = "adaptive"
    observer: str = "auto"
    dt: float = 1e-3
    duration: float = 40.0
    decimation: int = 1
    output: str = "trace.csv"


@dataclass(frozen=True)
class ReferenceConfig:
    vectors: tuple = ((0.0, 0.0, 1.0), (1.0, 0.0, 0.0))
    weights: tuple = (0.1, 0.1)
    virtual_third: bool = False


@dataclass(frozen=True)
class PlantConfig:
    theta: tuple = (0.0360, 0.0869, 0.0935, 0.0004, 0.0015, -0.0007)


@dataclass(frozen=True)
class DesiredConfig:
    profile: str = "paper_sec5"
    omega_const: tuple = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class InitialConditions:
    q: tuple = (1.0, 0.0, 0.0, 0.0)
    omega: tuple = (0.0, 0.0, 0.0)
    q_d: tuple = (1.0, 0.0, 0.0, 0.0)
    bhat: tuple = (0.0, 0.0, 0.0)
    theta_hat: tuple = (0.0,) * 6


@dataclass(frozen=True)
class Scenario:
    run: RunConfig = field(default_factory=RunConfig)
    references: ReferenceConfig = field(default_factory=ReferenceConfig)
    plant: PlantConfig = field(default_factory=PlantConfig)
    desired: DesiredConfig = field(default_factory=DesiredConfig)
    initial: InitialConditions = field(default_factory=InitialConditions)
    sensors: SensorConfig = field(default_factory=SensorConfig)
    observer: ObserverGains = field(default_factory=lambda: ObserverGains((_EYE3, _EYE3)))
    control: ControllerGains = field(default_factory=ControllerGains)

    def __post_init__(self):
        validate(self)

    # convenience views -----------------------------------------------------
    @property
    def controller(self):
        return self.run.controller

    @property
    def observer_variant(self):
        if self.run.observer != "auto":
            return self.run.observer
        return "saturated" if self.run.controller == "adaptive" else "plain"

    @property
    def weights(self):
        return np.array(self.references.weights, dtype=float)

    @property
    def ref_vectors(self):
        return np.array(self.references.vectors, dtype=float)

    def reference_set(self):
        from .attitude_error import ReferenceSet

        return ReferenceSet(self.ref_vectors, self.weights)

    def replace(self, **sections):
        """Copy with whole sections or dotted keys replaced, e.g. ``replace(**{"run.dt": 5e-4})``."""
        current = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        for key, value in sections.items():
            if "." in key:
                sec, name = key.split(".", 1)
                current[sec] = dataclasses.replace(current[sec], **{name: _coerce_like(
                    getattr(current[sec], name), value)})
            else:
                current[key] = value
        return Scenario(**current)


_SECTIONS = {f.name: f.default_factory for f in dataclasses.fields(Scenario)}


def _coerce_like(template, value):
    if isinstance(template, bool):
        return bool(value)
    if isinstance(template, int):
        return int(value)
    if isinstance(template, float):
        return float(value)
    if isinstance(template, str):
        return str(value)
    if isinstance(template, tuple):
        return _to_tuple(value)
    return value


def _to_tuple(value):
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, (list, tuple)):
        return tuple(_to_tuple(v) for v in value)
    if isinstance(value, (bool, str)):
        return value
    return float(value)


def _fail(key, message):
    raise InvalidScenario(message, key=key)


def _spd(a):
    a = np.asarray(a, dtype=float)
    return (a.ndim == 2 and a.shape[0] == a.shape[1] and np.all(np.isfinite(a))
            and np.allclose(a, a.T, atol=1e-12) and np.linalg.eigvalsh(a)[0] > 0)


def _unit(x, n, tol=1e-9):
    x = np.asarray(x, dtype=float)
    return x.shape == (n,) and abs(np.linalg.norm(x) - 1.0) <= tol


def validate(s):
    """Raise :class:`InvalidScenario` naming the first offending key."""
    if s.run.controller not in CONTROLLERS:
        _fail("run.controller", f"unknown controller {s.run.controller!r}")
    if s.run.observer not in ("auto", "plain", "saturated"):
        _fail("run.observer", f"unknown observer {s.run.observer!r}")
    if not s.run.dt > 0:
        _fail("run.dt", "must be positive")
    if not s.run.duration > 0:
        _fail("run.duration", "must be positive")
    if s.run.decimation < 1:
        _fail("run.decimation", "must be >= 1")
    if s.desired.profile not in PROFILES:
        _fail("desired.profile", f"unknown profile {s.desired.profile!r}")
    if np.shape(s.desired.omega_const) != (3,):
        _fail("desired.omega_const", "must be a 3-vector")

    r = np.asarray(s.references.vectors, dtype=float)
    k = np.asarray(s.references.weights, dtype=float)
    if r.ndim != 2 or r.shape[1] != 3 or len(r) < 2:
        _fail("references.vectors", "need at least two 3-vectors")
    if k.shape != (len(r),):
        _fail("references.weights", "one weight per reference vector is required")
    if np.any(np.abs(np.linalg.norm(r, axis=1) - 1.0) > 1e-9):
        _fail("references.vectors", "reference vectors must be unit norm")
    if np.any(k <= 0):
        _fail("references.weights", "weights must be positive")
    if not has_noncollinear_pair(r, COLLINEAR_TOL):
        _fail("references.vectors", "need two noncollinear references")
    if s.references.virtual_third:
        if len(r) != 3:
            _fail("references.virtual_third", "needs exactly three vectors (r3 derived)")
        if np.linalg.norm(r[2] - third_virtual_vector(r[0], r[1])) > 1e-9:
            _fail("references.vectors", "third vector must equal r1 x r2 / |r1 x r2|")

    try:
        InertiaParams(s.plant.theta)
    except InvalidInertia as exc:
        _fail("plant.theta", str(exc))

    for key, n in (("initial.q", 4), ("initial.q_d", 4)):
        if not _unit(getattr(s.initial, key.split(".")[1]), n):
            _fail(key, "must be a unit quaternion")
    for key, n in (("initial.omega", 3), ("initial.bhat", 3), ("initial.theta_hat", 6)):
        if np.shape(getattr(s.initial, key.split(".")[1])) != (n,):
            _fail(key, f"must have {n} entries")

    lam = np.asarray(s.observer.lambdas, dtype=float)
    if lam.shape != (len(r), 3, 3):
        _fail("observer.lambdas", "one 3x3 gain per reference vector is required")
    for L in lam:
        if not _spd(L):
            _fail("observer.lambdas", "gains must be symmetric positive definite")
    if not s.observer.gamma_f > 0:
        _fail("observer.gamma_f", "must be positive")
    if not s.observer.mu_b > 0:
        _fail("observer.mu_b", "must be positive")

    if np.linalg.norm(s.sensors.bias) > s.sensors.bias_bound:
        _fail("sensors.bias", "|b| exceeds sensors.bias_bound")
    if s.observer_variant == "saturated" and s.sensors.bias_bound > s.observer.mu_b:
        _fail("observer.mu_b", "must be >= sensors.bias_bound")

    g = s.control
    for key in ("lambda_c", "alpha1", "alpha2"):
        if not getattr(g, key) > 0:
            _fail(f"control.{key}", "must be positive")
    if not _spd(g.K_c):
        _fail("control.K_c", "must be symmetric positive definite")
    if not _spd(g.Gamma) or np.shape(g.Gamma) != (6, 6):
        _fail("control.Gamma", "must be a 6x6 symmetric positive definite matrix")
    if g.lambda_a(k.sum()) <= 0:
        _fail("control.alpha2", "alpha1 - alpha2 * sum(k) must be positive")


# ---------------------------------------------------------------------------
# Reading and writing
# ---------------------------------------------------------------------------

def scenario_from_dict(data):
    sections = {}
    for sec, value in data.items():
        if sec not in _SECTIONS:
            raise InvalidScenario("unknown section", key=sec)
        if not isinstance(value, dict):
            raise InvalidScenario("expected dotted keys under this section", key=sec)
        default = _SECTIONS[sec]()
        names = {f.name for f in dataclasses.fields(default)}
        kwargs = {}
        for name, raw in value.items():
            if name not in names:
                raise InvalidScenario("unknown key", key=f"{sec}.{name}")
            try:
                kwargs[name] = _coerce_like(getattr(default, name), raw)
            except (TypeError, ValueError) as exc:
                raise InvalidScenario(str(exc), key=f"{sec}.{name}") from None
        try:
            sections[sec] = dataclasses.replace(default, **kwargs)
        except InvalidGain as exc:
            raise InvalidScenario(str(exc).split(": ", 1)[-1], key=f"{sec}.{exc.field}") from None
        except ValueError as exc:
            raise InvalidScenario(str(exc), key=sec) from None
    return Scenario(**sections)


def loads_scenario(text):
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise InvalidScenario(str(exc), line=getattr(exc, "lineno", None)) from None
    return scenario_from_dict(data)


def load_scenario(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InvalidScenario(f"cannot read {path}: {exc.strerror}") from None
    return loads_scenario(text)


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, tuple):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def dumps_scenario(s):
    lines = []
    for f in dataclasses.fields(s):
        section = getattr(s, f.name)
        for sf in dataclasses.fields(section):
            lines.append(f"{f.name}.{sf.name} = {_fmt(getattr(section, sf.name))}")
        lines.append("")
    return "\n".join(lines)


def write_scenario(s, path):
    Path(path).write_text(dumps_scenario(s))


def builtin_scenario(name="paper_sec5"):
    """Load a scenario shipped with the package (``paper_sec5``)."""
    text = resources.files("vatrack").joinpath("scenarios", f"{name}.toml").read_text()
    return loads_scenario(text)


def builtin_path(name="paper_sec5"):
    return Path(str(resources.files("vatrack").joinpath("scenarios", f"{name}.toml")))

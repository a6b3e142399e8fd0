"""Configuration documents: parsing, validation, presets, canonical form.

Configs are JSON.  Unknown keys are rejected, defaults are materialized
on parse, and serialization is canonical (sorted keys), so an emit ->
parse -> emit round trip is byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .layout import BasisLayout
from .operators import SdeModel
from .spectral import Tolerances
from .trig import FlowField, TrigField, identity_frame


class ConfigError(ValueError):
    """Invalid or inconsistent configuration document."""


_TOP_KEYS = {
    "dimension", "truncation", "theta", "alpha", "flow", "noise",
    "tolerances", "seed", "t_grid", "output", "sweep",
}
_FLOW_KEYS = {"preset", "params", "modes"}
_TOL_KEYS = {"tol_zero", "tol_pair", "tol_converge"}
_SWEEP_KEYS = {"theta", "parameter", "values"}

PRESETS = (
    "diffusion", "drift", "langevin-cos", "langevin-double",
    "shear-2d", "abc", "random", "custom",
)

_PRESET_DIMENSION = {
    "langevin-cos": 1, "langevin-double": 1, "shear-2d": 2, "abc": 3,
}


@dataclass
class ModelConfig:
    """Validated model description with all defaults applied."""

    dimension: int
    truncation: int
    theta: float
    flow: dict
    alpha: float = 0.5
    noise: object = "identity"
    tolerances: dict = field(default_factory=dict)
    seed: int = 0
    t_grid: list = field(default_factory=lambda: [0.1, 1.0, 10.0])
    output: str = "."
    sweep: dict = None

    def to_dict(self):
        out = {
            "dimension": self.dimension,
            "truncation": self.truncation,
            "theta": self.theta,
            "alpha": self.alpha,
            "flow": self.flow,
            "noise": self.noise,
            "tolerances": self.tolerances,
            "seed": self.seed,
            "t_grid": self.t_grid,
            "output": self.output,
        }
        if self.sweep is not None:
            out["sweep"] = self.sweep
        return out

    def to_json(self):
        return canonical_json(self.to_dict())


def _json_default(o):
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n"


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


def parse_config(text):
    """Parse and validate a JSON config document."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"not valid JSON: {exc}") from exc
    _require(isinstance(raw, dict), "config root must be an object")
    unknown = set(raw) - _TOP_KEYS
    _require(not unknown, f"unknown config keys: {sorted(unknown)}")
    for key in ("dimension", "truncation", "theta", "flow"):
        _require(key in raw, f"missing required key {key!r}")
    dimension = raw["dimension"]
    _require(dimension in (1, 2, 3), f"dimension must be 1, 2 or 3, got {dimension}")
    truncation = raw["truncation"]
    _require(
        isinstance(truncation, int) and truncation >= 1,
        f"truncation must be a positive integer, got {truncation}",
    )
    theta = float(raw["theta"])
    _require(theta >= 0, f"theta must be nonnegative, got {theta}")
    alpha = float(raw.get("alpha", 0.5))
    _require(0.0 <= alpha <= 1.0, f"alpha must lie in [0, 1], got {alpha}")

    flow = raw["flow"]
    _require(isinstance(flow, dict), "flow must be an object")
    unknown = set(flow) - _FLOW_KEYS
    _require(not unknown, f"unknown flow keys: {sorted(unknown)}")
    preset = flow.get("preset")
    _require(preset in PRESETS, f"unknown flow preset {preset!r}")
    want = _PRESET_DIMENSION.get(preset)
    _require(
        want is None or want == dimension,
        f"preset {preset!r} requires dimension {want}, config says {dimension}",
    )
    if preset == "custom":
        _require("modes" in flow, "custom flow needs a 'modes' list")
        for m in flow["modes"]:
            _require(
                set(m) == {"axis", "wavevector", "re", "im"},
                f"flow mode entries need axis/wavevector/re/im, got {sorted(m)}",
            )
            _require(
                1 <= m["axis"] <= dimension,
                f"mode axis {m['axis']} outside 1..{dimension}",
            )
            _require(
                len(m["wavevector"]) == dimension,
                "mode wavevector length must equal the dimension",
            )
    flow = {
        "preset": preset,
        "params": dict(flow.get("params", {})),
        **({"modes": flow["modes"]} if preset == "custom" else {}),
    }

    noise = raw.get("noise", "identity")
    if noise != "identity":
        _require(isinstance(noise, list) and noise, "noise must be 'identity' or a nonempty list")
        for nf in noise:
            _require(isinstance(nf, list), "each noise field is a list of mode entries")

    tols = dict(raw.get("tolerances", {}))
    unknown = set(tols) - _TOL_KEYS
    _require(not unknown, f"unknown tolerance keys: {sorted(unknown)}")
    defaults = Tolerances()
    tols = {
        "tol_zero": float(tols.get("tol_zero", defaults.tol_zero)),
        "tol_pair": float(tols.get("tol_pair", defaults.tol_pair)),
        "tol_converge": float(tols.get("tol_converge", defaults.tol_converge)),
    }
    _require(min(tols.values()) > 0, "tolerances must be positive")

    seed = raw.get("seed", 0)
    _require(isinstance(seed, int) and seed >= 0, "seed must be a nonnegative integer")
    t_grid = [float(t) for t in raw.get("t_grid", [0.1, 1.0, 10.0])]
    _require(all(t > 0 for t in t_grid), "t_grid entries must be positive")

    sweep = raw.get("sweep")
    if sweep is not None:
        unknown = set(sweep) - _SWEEP_KEYS
        _require(not unknown, f"unknown sweep keys: {sorted(unknown)}")
        _require("theta" in sweep and "values" in sweep and "parameter" in sweep,
                 "sweep needs theta, parameter and values")
        n_cells = len(sweep["theta"]) * len(sweep["values"])
        _require(0 < n_cells <= 1024, f"sweep has {n_cells} cells, limit is 1024")

    return ModelConfig(
        dimension=dimension,
        truncation=truncation,
        theta=theta,
        alpha=alpha,
        flow=flow,
        noise=noise,
        tolerances=tols,
        seed=seed,
        t_grid=t_grid,
        output=raw.get("output", "."),
        sweep=sweep,
    )


def _modes_to_field(dimension, modes, axis):
    coeffs = {}
    for m in modes:
        if m["axis"] != axis:
            continue
        kappa = tuple(int(k) for k in m["wavevector"])
        c = complex(m["re"], m["im"])
        coeffs[kappa] = coeffs.get(kappa, 0.0) + c
        neg = tuple(-k for k in kappa)
        if neg != kappa:
            coeffs[neg] = coeffs.get(neg, 0.0) + np.conj(c)
    return TrigField(dimension, coeffs)


def abc_field(A, B, C):
    """The ABC flow (A sin z + C cos y, B sin x + A cos z, C sin y + B cos x)."""
    return FlowField([
        TrigField.sin(3, 2, A) + TrigField.cos(3, 1, C),
        TrigField.sin(3, 0, B) + TrigField.cos(3, 2, A),
        TrigField.sin(3, 1, C) + TrigField.cos(3, 0, B),
    ])


def build_flow(config):
    """Materialize the drift FlowField from a validated config."""
    D = config.dimension
    preset = config.flow["preset"]
    params = config.flow["params"]
    if preset == "diffusion":
        return FlowField.zero(D)
    if preset == "drift":
        c = params.get("c", [1.0] * D)
        _require(len(c) == D, "drift preset needs one speed per axis")
        return FlowField.constant([float(v) for v in c])
    if preset == "langevin-cos":
        return FlowField([TrigField.sin(1, 0)])
    if preset == "langevin-double":
        a = float(params.get("a", 0.3))
        return FlowField([TrigField.sin(1, 0) + TrigField.sin(1, 0, 2 * a, 2)])
    if preset == "shear-2d":
        return FlowField([TrigField.sin(2, 1), TrigField.zero(2)])
    if preset == "abc":
        return abc_field(
            float(params.get("A", 1.0)),
            float(params.get("B", 1.0)),
            float(params.get("C", 1.0)),
        )
    if preset == "random":
        rng = np.random.default_rng(int(params.get("seed", config.seed)))
        bandwidth = int(params.get("bandwidth", 1))
        amplitude = float(params.get("amplitude", 0.5))
        return FlowField(
            [TrigField.random(D, bandwidth, rng, amplitude) for _ in range(D)]
        )
    if preset == "custom":
        return FlowField(
            [_modes_to_field(D, config.flow["modes"], i + 1) for i in range(D)]
        )
    raise ConfigError(f"unknown preset {preset!r}")


def build_potential(config):
    """The scalar potential U for Langevin presets, None otherwise."""
    if config.flow["preset"] == "langevin-cos":
        return TrigField.cos(1, 0)
    if config.flow["preset"] == "langevin-double":
        a = float(config.flow["params"].get("a", 0.3))
        return TrigField.cos(1, 0) + TrigField.cos(1, 0, a, 2)
    return None


def build_noise(config):
    if config.noise == "identity":
        return identity_frame(config.dimension)
    fields = []
    for nf in config.noise:
        fields.append(
            FlowField(
                [_modes_to_field(config.dimension, nf, i + 1)
                 for i in range(config.dimension)]
            )
        )
    return fields


def build_model(config, theta=None, truncation=None):
    """SdeModel for a config, optionally overriding theta or truncation."""
    layout = BasisLayout(config.dimension, truncation or config.truncation)
    return SdeModel(
        layout,
        build_flow(config),
        build_noise(config),
        config.theta if theta is None else theta,
        config.alpha,
    )


def build_tolerances(config):
    return Tolerances(**config.tolerances)

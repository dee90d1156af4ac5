"""Sectioned key=value run configuration.

The format is deliberately plain text: `[section]` headers, one `key =
value` per line, `#` comments.  Vectors are comma separated, matrices use
semicolons between rows.  Unknown sections or keys are rejected, and every
parse error carries the offending line number.

Sections:

  [model]        name plus numeric parameters, friction vector, known mask
  [observer]     kind = prop1 | prop2 | none, and its gains
  [initial]      plant q / mom and optional observer state overrides
  [input]        u1, u2, ... = amplitude, frequency, phase, cos|sin
  [disturbance]  step1, step2, ... = switch_time, d1, ..., dn
  [sim]          t_final, dt, stride
  [output]       directory, emit_svg
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .harness import InputChannel, Scenario
from .model import DisturbanceSchedule
from .scaled import Obs2State, ScaledParams
from .adaptive import AdaptiveObserver
from .systems import build_named_model


class ConfigError(ValueError):
    """Configuration problem; carries the source line number (0 = global)."""

    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}" if line else msg)
        self.line = line


_MODEL_KEYS = {
    "constant": {"name", "M", "K", "friction", "known"},
    "manipulator": {"name", "I", "M", "m", "l", "friction", "known"},
    "spider-crane": {"name", "m_r", "m", "L3", "g", "friction", "known"},
    "spider-crane-cholesky": {"name", "m_r", "m", "L3", "g", "friction", "known"},
}
_OBSERVER_KEYS = {"kind", "lambda", "psi3_const", "psi4_extra", "psi5_extra"}
_INITIAL_KEYS = {"q", "mom", "p_i", "ru_i", "d_i", "qbar", "pbar", "r"}
_SIM_KEYS = {"t_final", "dt", "stride"}
_OUTPUT_KEYS = {"directory", "emit_svg"}
_SECTIONS = {"model", "observer", "initial", "input", "disturbance", "sim", "output"}


@dataclass
class RunConfig:
    """Parsed configuration; build_scenario turns it into a runnable Scenario."""

    model_name: str
    model_params: Dict[str, object] = field(default_factory=dict)
    friction: Optional[List[float]] = None
    known: Optional[List[bool]] = None
    observer_kind: str = "none"
    lam: float = 0.8
    psi3_const: float = 1.0
    psi4_extra: float = 1.0
    psi5_extra: float = 1.0
    q0: Optional[List[float]] = None
    mom0: Optional[List[float]] = None
    overrides: Dict[str, object] = field(default_factory=dict)
    inputs: List[Tuple[float, float, float, str]] = field(default_factory=list)
    disturbance: List[Tuple[float, List[float]]] = field(default_factory=list)
    t_final: float = 10.0
    dt: float = 1e-3
    stride: int = 10
    directory: Optional[str] = None
    emit_svg: bool = False


def _parse_float(raw, line):
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(line, f"expected a number, got {raw!r}")


def _parse_vector(raw, line):
    return [_parse_float(part.strip(), line) for part in raw.split(",") if part.strip() != ""]


def _parse_matrix(raw, line):
    rows = [r.strip() for r in raw.split(";") if r.strip() != ""]
    mat = [_parse_vector(r, line) for r in rows]
    if len({len(r) for r in mat}) > 1:
        raise ConfigError(line, "matrix rows have unequal lengths")
    return mat


def _parse_bool(raw, line):
    low = raw.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(line, f"expected a boolean, got {raw!r}")


def _parse_bool_vector(raw, line):
    return [_parse_bool(part, line) for part in raw.split(",") if part.strip() != ""]


def _split_sections(text: str):
    sections: Dict[str, List[Tuple[int, str, str]]] = {}
    section_lines: Dict[str, int] = {}
    current = None
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        stripped = rawline.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped[1:-1].strip()
            if current not in _SECTIONS:
                raise ConfigError(lineno, f"unknown section [{current}]")
            if current in sections:
                raise ConfigError(lineno, f"duplicate section [{current}]")
            sections[current] = []
            section_lines[current] = lineno
            continue
        if current is None:
            raise ConfigError(lineno, "key outside of any section")
        if "=" not in stripped:
            raise ConfigError(lineno, "expected key = value")
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if any(k == key for _, k, _ in sections[current]):
            raise ConfigError(lineno, f"duplicate key {key!r} in [{current}]")
        sections[current].append((lineno, key, value))
    return sections, section_lines


def parse_config(text: str, require_sim: bool = True) -> RunConfig:
    sections, _ = _split_sections(text)
    if "model" not in sections:
        raise ConfigError(0, "missing required section [model]")
    model_entries = {k: (ln, v) for ln, k, v in sections["model"]}
    if "name" not in model_entries:
        raise ConfigError(0, "missing required key 'name' in [model]")
    name_line, name = model_entries["name"]
    if name not in _MODEL_KEYS:
        raise ConfigError(name_line, f"unknown model name {name!r}")
    allowed = _MODEL_KEYS[name]
    for ln, key, _ in sections["model"]:
        if key not in allowed:
            raise ConfigError(ln, f"unknown key {key!r} in [model] for model {name!r}")

    cfg = RunConfig(model_name=name)
    for ln, key, value in sections["model"]:
        if key == "name":
            continue
        if key == "friction":
            cfg.friction = _parse_vector(value, ln)
        elif key == "known":
            cfg.known = _parse_bool_vector(value, ln)
        elif name == "constant" and key in ("M", "K"):
            cfg.model_params[key] = _parse_matrix(value, ln)
        else:
            cfg.model_params[key] = _parse_float(value, ln)

    for ln, key, value in sections.get("observer", []):
        if key not in _OBSERVER_KEYS:
            raise ConfigError(ln, f"unknown key {key!r} in [observer]")
        if key == "kind":
            if value not in ("prop1", "prop2", "none"):
                raise ConfigError(ln, f"unknown observer kind {value!r}")
            cfg.observer_kind = value
        elif key == "lambda":
            cfg.lam = _parse_float(value, ln)
        else:
            setattr(cfg, key, _parse_float(value, ln))

    for ln, key, value in sections.get("initial", []):
        if key not in _INITIAL_KEYS:
            raise ConfigError(ln, f"unknown key {key!r} in [initial]")
        if key == "q":
            cfg.q0 = _parse_vector(value, ln)
        elif key == "mom":
            cfg.mom0 = _parse_vector(value, ln)
        elif key == "r":
            cfg.overrides["r"] = _parse_float(value, ln)
        else:
            cfg.overrides[key] = _parse_vector(value, ln)

    channels = {}
    for ln, key, value in sections.get("input", []):
        if not (key.startswith("u") and key[1:].isdigit()):
            raise ConfigError(ln, f"input keys look like u1, u2, ...; got {key!r}")
        idx = int(key[1:])
        if idx < 1:
            raise ConfigError(ln, "input channels are numbered from 1")
        parts = [p.strip() for p in value.split(",")]
        if len(parts) != 4:
            raise ConfigError(ln, "input channel needs amplitude, frequency, phase, waveform")
        amp, freq, phase = (_parse_float(p, ln) for p in parts[:3])
        waveform = parts[3]
        if waveform not in ("cos", "sin"):
            raise ConfigError(ln, f"waveform must be cos or sin, got {waveform!r}")
        channels[idx] = (amp, freq, phase, waveform)
    if channels:
        top = max(channels)
        cfg.inputs = [channels.get(i, (0.0, 0.0, 0.0, "cos")) for i in range(1, top + 1)]

    steps = {}
    for ln, key, value in sections.get("disturbance", []):
        if not (key.startswith("step") and key[4:].isdigit()):
            raise ConfigError(ln, f"disturbance keys look like step1, step2, ...; got {key!r}")
        vec = _parse_vector(value, ln)
        if len(vec) < 2:
            raise ConfigError(ln, "disturbance step needs a switch time and a level vector")
        steps[int(key[4:])] = (vec[0], vec[1:])
    cfg.disturbance = [steps[i] for i in sorted(steps)]

    if "sim" not in sections:
        if require_sim:
            raise ConfigError(0, "missing required section [sim]")
        sections["sim"] = []
    elif require_sim or sections["sim"]:
        sim_entries = {k: (ln, v) for ln, k, v in sections["sim"]}
        for req in ("t_final", "dt"):
            if req not in sim_entries:
                raise ConfigError(0, f"missing required key {req!r} in [sim]")
    for ln, key, value in sections["sim"]:
        if key not in _SIM_KEYS:
            raise ConfigError(ln, f"unknown key {key!r} in [sim]")
        if key == "stride":
            cfg.stride = int(_parse_float(value, ln))
            if cfg.stride < 1:
                raise ConfigError(ln, "stride must be a positive integer")
        else:
            val = _parse_float(value, ln)
            if val <= 0:
                raise ConfigError(ln, f"{key} must be positive")
            setattr(cfg, key, val)
    if cfg.t_final < cfg.dt:
        raise ConfigError(0, "t_final must be at least dt")

    for ln, key, value in sections.get("output", []):
        if key not in _OUTPUT_KEYS:
            raise ConfigError(ln, f"unknown key {key!r} in [output]")
        if key == "directory":
            cfg.directory = value
        else:
            cfg.emit_svg = _parse_bool(value, ln)
    return cfg


def load_config(path, require_sim: bool = True) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read(), require_sim=require_sim)


def _fmt_vec(values):
    return ", ".join(f"{v:.17g}" for v in values)


def dump_config(cfg: RunConfig) -> str:
    """Canonical text for a RunConfig; parsing it back gives an equal config."""
    lines = ["[model]", f"name = {cfg.model_name}"]
    for key, value in cfg.model_params.items():
        if isinstance(value, list):
            lines.append(f"{key} = " + "; ".join(_fmt_vec(row) for row in value))
        else:
            lines.append(f"{key} = {value:.17g}")
    if cfg.friction is not None:
        lines.append(f"friction = {_fmt_vec(cfg.friction)}")
    if cfg.known is not None:
        lines.append("known = " + ", ".join(str(b).lower() for b in cfg.known))
    lines += ["", "[observer]", f"kind = {cfg.observer_kind}"]
    if cfg.observer_kind == "prop1":
        lines.append(f"lambda = {cfg.lam:.17g}")
    if cfg.observer_kind == "prop2":
        lines.append(f"psi3_const = {cfg.psi3_const:.17g}")
        lines.append(f"psi4_extra = {cfg.psi4_extra:.17g}")
        lines.append(f"psi5_extra = {cfg.psi5_extra:.17g}")
    lines += ["", "[initial]"]
    if cfg.q0 is not None:
        lines.append(f"q = {_fmt_vec(cfg.q0)}")
    if cfg.mom0 is not None:
        lines.append(f"mom = {_fmt_vec(cfg.mom0)}")
    for key, value in cfg.overrides.items():
        if key == "r":
            lines.append(f"r = {value:.17g}")
        else:
            lines.append(f"{key} = {_fmt_vec(value)}")
    if cfg.inputs:
        lines += ["", "[input]"]
        for i, (amp, freq, phase, waveform) in enumerate(cfg.inputs, start=1):
            lines.append(f"u{i} = {amp:.17g}, {freq:.17g}, {phase:.17g}, {waveform}")
    if cfg.disturbance:
        lines += ["", "[disturbance]"]
        for i, (t, level) in enumerate(cfg.disturbance, start=1):
            lines.append(f"step{i} = {t:.17g}, {_fmt_vec(level)}")
    lines += ["", "[sim]", f"t_final = {cfg.t_final:.17g}", f"dt = {cfg.dt:.17g}",
              f"stride = {cfg.stride}"]
    lines += ["", "[output]"]
    if cfg.directory is not None:
        lines.append(f"directory = {cfg.directory}")
    lines.append(f"emit_svg = {str(cfg.emit_svg).lower()}")
    return "\n".join(lines) + "\n"


def build_model(cfg: RunConfig):
    params = dict(cfg.model_params)
    if cfg.friction is not None:
        params["friction"] = tuple(cfg.friction)
    if cfg.known is not None:
        params["known_mask"] = tuple(cfg.known)
    if cfg.model_name == "constant":
        from .model import FrictionSpec
        from .systems import make_constant_inertia

        M = np.asarray(params.pop("M", np.eye(2)), dtype=float)
        K = np.asarray(params.pop("K", np.eye(len(M))), dtype=float)
        friction = None
        if "friction" in params or "known_mask" in params:
            coeffs = np.asarray(params.pop("friction", np.zeros(len(M))), dtype=float)
            mask = np.asarray(params.pop("known_mask", np.zeros(len(M), dtype=bool)), dtype=bool)
            friction = FrictionSpec(coeffs, mask)
        return make_constant_inertia(M, K, friction)
    return build_named_model(cfg.model_name, **params)


def build_scenario(cfg: RunConfig) -> Scenario:
    """Construct the Scenario, resolving observer initial-state overrides."""
    model = build_model(cfg)
    n = model.n
    q0 = np.asarray(cfg.q0, dtype=float) if cfg.q0 is not None else np.zeros(n)
    mom0 = np.asarray(cfg.mom0, dtype=float) if cfg.mom0 is not None else np.zeros(n)

    obs_init = None
    ov = cfg.overrides
    if cfg.observer_kind == "prop1" and ov:
        obs = AdaptiveObserver(model, cfg.lam)
        default = obs.default_state(q0)
        p_i = np.asarray(ov.get("p_i", default[: n]), dtype=float)
        ru_i = np.asarray(ov.get("ru_i", default[n : n + obs.s]), dtype=float)
        d_i = np.asarray(ov.get("d_i", default[n + obs.s :]), dtype=float)
        obs_init = np.concatenate([p_i, ru_i, d_i])
    elif cfg.observer_kind == "prop2" and ov:
        r0 = float(ov.get("r", 1.0))
        qbar = np.asarray(ov.get("qbar", q0), dtype=float)
        pbar = np.asarray(ov.get("pbar", np.zeros(n)), dtype=float)
        p_i = np.asarray(ov.get("p_i", np.zeros(n)), dtype=float)
        d_i = np.asarray(ov.get("d_i", -q0 / r0**2), dtype=float)
        obs_init = Obs2State(qbar, pbar, p_i, d_i, r0).pack()

    disturbance = None
    if cfg.disturbance:
        disturbance = DisturbanceSchedule(
            np.array([t for t, _ in cfg.disturbance]),
            np.array([lvl for _, lvl in cfg.disturbance]),
        )
    return Scenario(
        model=model,
        observer=cfg.observer_kind,
        lam=cfg.lam,
        scaled_params=ScaledParams(cfg.psi3_const, cfg.psi4_extra, cfg.psi5_extra),
        q0=q0,
        mom0=mom0,
        obs_init=obs_init,
        inputs=tuple(InputChannel(*ch) for ch in cfg.inputs),
        disturbance=disturbance,
        t_final=cfg.t_final,
        dt=cfg.dt,
        stride=cfg.stride,
        name=cfg.model_name,
    )

"""Plain-text run configuration: `[section]` headers, `key = value` lines, `#` comments.

Every key has a type and a default; unknown sections or keys are errors so that
typos surface immediately.
"""

from __future__ import annotations

import copy
import hashlib
import math
from importlib import resources
from pathlib import Path

from .errors import MissingRequired, ParseError, UnknownKey
from .gridw import Grid, RateParams
from .model import ModelParams, quintic

SCHEMA: dict[str, dict[str, tuple[type, object]]] = {
    "model": {
        "alpha_re": (float, 0.5),
        "alpha_im": (float, 0.0),
        "beta0_re": (float, -0.3),
        "beta0_im": (float, 0.5),
        "beta2_re": (float, 1.5),
        "beta2_im": (float, 1.0),
        "beta4_re": (float, -1.0),
        "beta4_im": (float, 1.0),
        "r_max": (float, 10.0),
        "description": (str, "QCGL default"),
    },
    "grid": {
        "half_width": (float, 200.0),
        "n_points": (int, 4096),
    },
    "profile": {
        "tol": (float, 1e-10),
        "c0": (float, 1.0),
        "template_width": (float, 2.0),
        "template_shift": (float, 0.0),
        "max_iter": (int, 60),
    },
    "spectral": {
        "nu_max": (float, 10.0),
        "n_nu": (int, 4001),
        "tangency_radius": (float, 0.1),
        "crescent_factor": (float, 0.9),
        "box_re_min": (float, -0.5),
        "box_re_max": (float, 0.5),
        "box_im_min": (float, -2.0),
        "box_im_max": (float, 2.0),
        "beta_e": (float, 0.01),
        "artifact_radius": (float, 0.05),
        "s_min": (float, 1e-3),
        "s_max": (float, 1e-1),
        "n_s": (int, 9),
        "s_angle": (float, math.pi / 4),
    },
    "rates": {
        "k": (float, 10.0),
        "m": (float, 4.75),
        "mu": (float, 0.25),
    },
    "evolution": {
        "dt": (float, 0.01),
        "t_final": (float, 200.0),
        "scheme": (str, "IMEX2"),
        "output_stride": (int, 100),
        "amplitude": (float, 1e-2),
        "seed_shape": (str, "modulated"),
        "k_decay": (float, 16.0),
        "shift": (float, 0.0),
        "linear_dt": (float, 0.05),
        "fit_t0": (float, 10.0),
    },
    "verify": {
        "p": (float, 2.0),
        "c1": (float, 1.0),
        "c2": (float, 1.0),
        "eps": (float, -1.0),
        "t_final": (float, 200.0),
        "dt": (float, 0.1),
        "n_pairs": (int, 100),
        "norm_k": (float, 2.0),
        "amplitude": (float, 1e-2),
    },
}

# keys that have no usable default and must be present when `required` is requested
REQUIRED: dict[str, tuple[str, ...]] = {}


def _parse_bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _convert(typ: type, text: str):
    if typ is bool:
        return _parse_bool(text)
    if typ is int:
        return int(text)
    if typ is float:
        val = float(text)
        if math.isnan(val):
            raise ValueError("nan is not allowed")
        return val
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1]
    return text


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


class Config:
    """Typed values for every schema key plus the record of which keys were set explicitly."""

    def __init__(self):
        self.values = {sec: {key: default for key, (_, default) in keys.items()} for sec, keys in SCHEMA.items()}
        self.explicit: list[tuple[str, str]] = []

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    def __eq__(self, other) -> bool:
        return isinstance(other, Config) and self.values == other.values

    def copy(self) -> "Config":
        return copy.deepcopy(self)

    def set(self, section: str, key: str, text_or_value, line: int | None = None) -> None:
        if section not in SCHEMA:
            raise UnknownKey(f"unknown section [{section}]" + (f" at line {line}" if line else ""))
        if key not in SCHEMA[section]:
            raise UnknownKey(f"unknown key {key!r} in [{section}]" + (f" at line {line}" if line else ""))
        typ = SCHEMA[section][key][0]
        if isinstance(text_or_value, str):
            try:
                value = _convert(typ, text_or_value.strip())
            except ValueError as exc:
                raise ParseError(f"bad value for {section}.{key}: {exc}", line) from None
        else:
            value = typ(text_or_value)
        self.values[section][key] = value
        if (section, key) not in self.explicit:
            self.explicit.append((section, key))

    def override(self, assignment: str) -> None:
        """Apply `section.key=value`."""
        if "=" not in assignment or "." not in assignment.split("=", 1)[0]:
            raise ParseError(f"override must look like section.key=value, got {assignment!r}")
        lhs, rhs = assignment.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        self.set(section, key, rhs)

    def require(self, required: dict[str, tuple[str, ...]] | None = None) -> None:
        for section, keys in (required or REQUIRED).items():
            for key in keys:
                if (section, key) not in self.explicit:
                    raise MissingRequired(f"{section}.{key} must be given")

    def as_dict(self) -> dict:
        return copy.deepcopy(self.values)

    def serialize(self, explicit_only: bool = True) -> str:
        """Canonical text; by default only the explicitly set keys, grouped by section in first-use order."""
        if explicit_only:
            order: dict[str, list[str]] = {}
            for section, key in self.explicit:
                order.setdefault(section, []).append(key)
        else:
            order = {sec: list(keys) for sec, keys in SCHEMA.items()}
        blocks = []
        for section, keys in order.items():
            lines = [f"[{section}]"] + [f"{key} = {format_value(self.values[section][key])}" for key in keys]
            blocks.append("\n".join(lines))
        return "\n\n".join(blocks) + ("\n" if blocks else "")

    def digest(self) -> str:
        return hashlib.sha256(self.serialize(explicit_only=False).encode()).hexdigest()

    # typed views

    def model_params(self) -> ModelParams:
        m = self["model"]
        return quintic(complex(m["alpha_re"], m["alpha_im"]), complex(m["beta0_re"], m["beta0_im"]),
                       complex(m["beta2_re"], m["beta2_im"]), complex(m["beta4_re"], m["beta4_im"]),
                       m["description"])

    def grid(self) -> Grid:
        return Grid(self["grid"]["half_width"], self["grid"]["n_points"])

    def rates(self) -> RateParams:
        r = self["rates"]
        return RateParams(r["m"], r["k"], r["mu"])


def parse_config(text: str) -> Config:
    cfg = Config()
    section = None
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise ParseError(f"malformed section header {raw.strip()!r}", lineno)
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise UnknownKey(f"unknown section [{section}] at line {lineno}")
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if section is None:
            raise ParseError("key outside of any section", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ParseError("empty key", lineno)
        if (section, key) in seen:
            raise ParseError(f"duplicate key {section}.{key}", lineno)
        seen.add((section, key))
        cfg.set(section, key, value, lineno)
    return cfg


def load_config(path=None) -> Config:
    """Parse a file; None gives all defaults."""
    if path is None:
        return Config()
    return parse_config(Path(path).read_text())


def normalize(text: str) -> str:
    """Canonical form of a config text: comments and blank lines dropped, values re-formatted."""
    return parse_config(text).serialize()


def default_config_text() -> str:
    return resources.files("tofwave").joinpath("data/qcgl_default.cfg").read_text()

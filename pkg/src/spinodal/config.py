"""INI-style experiment configuration.

Sections and keys::

    [model]       lambda, n_poly, M, dt, Q, mass_c, taming_threshold,
                  nonlinear, scheme, guard
    [noise]       variant (white | degenerate), b (list), N
    [experiment]  x, y (coefficient lists, padded with zeros to M), t (list),
                  T, paths, p, q, a, varsigma, phi, kind, ...
    [run]         seed

Lists are comma separated.  ``x`` and ``y`` list ``mode_0, mode_1, ...``;
a missing ``mode_0`` entry is filled with ``mass_c``.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field

import numpy as np

from .dynamics import ModelParams
from .errors import ValidationError
from .harnack import TestFunctional
from .noise import NoiseSpec

__all__ = ["ExperimentConfig", "load_config", "parse_config", "parse_list", "parse_phi"]

MODEL_KEYS = {
    "lambda": float, "n_poly": int, "m": int, "dt": float, "q": int, "mass_c": float,
    "taming_threshold": float, "nonlinear": "bool", "scheme": str, "guard": float,
}
_FIELD = {"lambda": "lam", "m": "M", "q": "Q"}


def parse_list(text):
    text = text.strip().strip("[]")
    if not text:
        return []
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def parse_phi(text):
    """``exp_sin_mode:k``, ``bounded_affine:k`` or ``user_table:k:s0/v0,s1/v1,...``."""
    parts = text.strip().split(":")
    kind = parts[0]
    k = int(parts[1]) if len(parts) > 1 else 1
    table = ()
    if kind == "user_table":
        if len(parts) < 3:
            raise ValidationError("user_table needs points s/v")
        table = tuple(tuple(float(a) for a in pt.split("/")) for pt in parts[2].split(","))
    return TestFunctional(kind, k, table)


@dataclass
class ExperimentConfig:
    params: ModelParams
    experiment: dict = field(default_factory=dict)
    seed: int = 0
    parser: configparser.ConfigParser | None = None

    def get(self, key, default=None, kind=float):
        if key not in self.experiment:
            if default is None:
                raise ValidationError(f"missing [experiment] key {key!r}")
            return default
        raw = self.experiment[key]
        try:
            if kind == "list":
                return parse_list(raw)
            return kind(raw)
        except ValueError as exc:
            raise ValidationError(f"bad value for {key!r}: {raw!r}") from exc

    def field_of(self, key, default=None):
        """Initial field from a coefficient list, padded to ``M``."""
        if key not in self.experiment and default is not None:
            vals = list(default)
        else:
            vals = self.get(key, kind="list")
        M = self.params.M
        if len(vals) > M + 1:
            raise ValidationError(f"{key} has more than M + 1 = {M + 1} coefficients")
        c = np.zeros(M + 1)
        c[: len(vals)] = vals
        if not vals:
            c[0] = self.params.mass_c
        return c

    def manifest_text(self, experiment, seed, extra=None):
        cp = configparser.ConfigParser()
        cp.optionxform = str
        for section in self.parser.sections():
            cp[section] = dict(self.parser[section])
        if not cp.has_section("run"):
            cp.add_section("run")
        cp["run"]["seed"] = str(seed)
        cp["run"]["experiment"] = experiment
        for k, v in (extra or {}).items():
            cp["run"][k] = str(v)
        lines = []
        for section in cp.sections():
            lines.append(f"[{section}]")
            lines.extend(f"{k} = {v}" for k, v in cp[section].items())
            lines.append("")
        return "\n".join(lines)


def _model(section, noise):
    kw = {}
    for key, raw in section.items():
        key_l = key.lower()
        if key_l not in MODEL_KEYS:
            raise ValidationError(f"unknown [model] key {key!r}")
        kind = MODEL_KEYS[key_l]
        try:
            if kind == "bool":
                val = raw.strip().lower() in ("1", "true", "yes", "on")
            elif kind is int:
                val = int(float(raw))
            else:
                val = kind(raw.strip())
        except ValueError as exc:
            raise ValidationError(f"bad [model] value {key}={raw!r}") from exc
        kw[_FIELD.get(key_l, key_l)] = val
    if "lam" not in kw:
        raise ValidationError("[model] needs lambda")
    return ModelParams(noise=noise, **kw)


def _noise(section):
    if section is None:
        return NoiseSpec.white()
    variant = section.get("variant", "white").strip()
    if variant == "white":
        return NoiseSpec.white()
    b = parse_list(section.get("b", ""))
    N = section.get("N")
    return NoiseSpec.degenerate(b, None if N is None else int(N))


def parse_config(text):
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ValidationError(f"config does not parse: {exc}") from exc
    if not cp.has_section("model"):
        raise ValidationError("config needs a [model] section")
    noise = _noise(cp["noise"] if cp.has_section("noise") else None)
    params = _model(cp["model"], noise)
    experiment = dict(cp["experiment"]) if cp.has_section("experiment") else {}
    seed = 0
    if cp.has_section("run") and "seed" in cp["run"]:
        seed = int(cp["run"]["seed"])
    return ExperimentConfig(params, experiment, seed, cp)


def load_config(path):
    with open(path) as fh:
        return parse_config(fh.read())

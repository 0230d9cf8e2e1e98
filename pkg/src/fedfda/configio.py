"""Experiment config files: flat key = value lines plus server blocks.

Grammar (one statement per line, ``#`` starts a comment):

    design = independent | common
    sweep = n | m | epsilon
    sweep_values = 50 100 200 400 800
    replications = 100
    base_seed = 20240501
    delta_rule = one_over_n_squared | fixed
    delta_value = 1e-5              # only with delta_rule = fixed
    alpha = 1.0
    R = 2.0
    curve_p = 0.9
    curve_L_star = 15
    family = db2                    # optional; default picked from alpha
    noiseless = false               # optional
    server {
        n = 200
        m = 64
        epsilon = 1.0               # a number or inf
        delta = 1e-5                # optional override
    }

Parse errors raise ConfigError with the offending line number.
"""

from __future__ import annotations

import math

from .datagen import CurveSpec, Design, ServerConfig
from .harness import DELTA_FIXED, DELTA_ONE_OVER_N_SQUARED, ExperimentSpec


class ConfigError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"config line {line_no}: {message}")
        self.line_no = line_no


_TOP_KEYS = {"design", "sweep", "sweep_values", "replications", "base_seed",
             "delta_rule", "delta_value", "alpha", "R", "curve_p",
             "curve_L_star", "family", "noiseless"}
_SERVER_KEYS = {"n", "m", "epsilon", "delta"}


def _parse_float(raw: str, line_no: int, key: str) -> float:
    if raw.strip().lower() in ("inf", "infinity"):
        return math.inf
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(line_no, f"field {key!r}: not a number: {raw!r}") from None


def _parse_int(raw: str, line_no: int, key: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(line_no, f"field {key!r}: not an integer: {raw!r}") from None


def parse_config_text(text: str) -> ExperimentSpec:
    top: dict = {}
    servers: list[dict] = []
    block: dict | None = None
    block_line = 0
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line == "server {":
            if block is not None:
                raise ConfigError(line_no, "nested server block")
            block = {"__line__": ("", line_no)}
            block_line = line_no
            continue
        if line == "}":
            if block is None:
                raise ConfigError(line_no, "unmatched '}'")
            servers.append(block)
            block = None
            continue
        if "=" not in line:
            raise ConfigError(line_no, f"expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not value:
            raise ConfigError(line_no, f"field {key!r}: empty value")
        if block is not None:
            if key not in _SERVER_KEYS:
                raise ConfigError(line_no, f"unknown server field {key!r}")
            block[key] = (value, line_no)
        else:
            if key not in _TOP_KEYS:
                raise ConfigError(line_no, f"unknown field {key!r}")
            top[key] = (value, line_no)
    if block is not None:
        raise ConfigError(block_line, "server block never closed")
    if not servers:
        raise ConfigError(len(text.splitlines()) or 1, "no server block")

    def need(key: str) -> tuple[str, int]:
        if key not in top:
            raise ConfigError(1, f"missing required field {key!r}")
        return top[key]

    raw, ln = need("design")
    try:
        design = Design(raw.lower())
    except ValueError:
        raise ConfigError(ln, f"design must be common or independent, got {raw!r}") from None

    raw, ln = need("sweep")
    sweep = raw.lower()

    raw, ln = need("sweep_values")
    sweep_values = tuple(_parse_float(tok, ln, "sweep_values") for tok in raw.split())

    raw, ln = need("replications")
    replications = _parse_int(raw, ln, "replications")
    raw, ln = need("base_seed")
    base_seed = _parse_int(raw, ln, "base_seed")
    raw, ln = need("alpha")
    alpha = _parse_float(raw, ln, "alpha")
    raw, ln = need("R")
    radius = _parse_float(raw, ln, "R")

    delta_rule = DELTA_ONE_OVER_N_SQUARED
    if "delta_rule" in top:
        raw, ln = top["delta_rule"]
        if raw not in (DELTA_FIXED, DELTA_ONE_OVER_N_SQUARED):
            raise ConfigError(ln, f"delta_rule must be fixed or one_over_n_squared, got {raw!r}")
        delta_rule = raw
    delta_value = 1e-5
    if "delta_value" in top:
        raw, ln = top["delta_value"]
        delta_value = _parse_float(raw, ln, "delta_value")

    p = 0.9
    if "curve_p" in top:
        raw, ln = top["curve_p"]
        p = _parse_float(raw, ln, "curve_p")
        if not 0 <= p <= 1:
            raise ConfigError(ln, f"curve_p must be in [0, 1], got {p}")
    L_star = 15
    if "curve_L_star" in top:
        raw, ln = top["curve_L_star"]
        L_star = _parse_int(raw, ln, "curve_L_star")
    family_name, family_line = "", 1
    if "family" in top:
        family_name, family_line = top["family"]
    noiseless = False
    if "noiseless" in top:
        raw, ln = top["noiseless"]
        if raw.lower() not in ("true", "false"):
            raise ConfigError(ln, f"noiseless must be true or false, got {raw!r}")
        noiseless = raw.lower() == "true"

    try:
        curve = CurveSpec(R=radius, L_star=L_star, p=p, alpha=alpha,
                          family_name=family_name)
        curve.family  # validate the wavelet family name eagerly
    except ValueError as e:
        raise ConfigError(family_line, str(e)) from None

    parsed_servers = []
    for blk in servers:
        opened_at = blk["__line__"][1]
        for key in ("n", "m", "epsilon"):
            if key not in blk:
                raise ConfigError(opened_at, f"server block missing field {key!r}")
        n = _parse_int(*_kv(blk, "n"))
        m = _parse_int(*_kv(blk, "m"))
        eps = _parse_float(*_kv(blk, "epsilon"))
        if "delta" in blk:
            delta = _parse_float(*_kv(blk, "delta"))
        elif not math.isfinite(eps):
            delta = 0.0
        elif delta_rule == DELTA_ONE_OVER_N_SQUARED:
            delta = 1.0 / n**2
        else:
            delta = delta_value
        try:
            parsed_servers.append(ServerConfig(n=n, m=m, epsilon=eps, delta=delta))
        except ValueError as e:
            raise ConfigError(blk["n"][1], str(e)) from None

    try:
        return ExperimentSpec(design=design, curve=curve,
                              servers=tuple(parsed_servers), sweep=sweep,
                              sweep_values=sweep_values,
                              replications=replications, base_seed=base_seed,
                              delta_rule=delta_rule, delta_value=delta_value,
                              noiseless=noiseless)
    except ValueError as e:
        raise ConfigError(1, str(e)) from None


def _kv(blk: dict, key: str):
    value, line_no = blk[key]
    return value, line_no, key


def load_config(path) -> ExperimentSpec:
    with open(path) as fh:
        return parse_config_text(fh.read())

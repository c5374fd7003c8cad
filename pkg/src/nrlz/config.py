"""Run configuration: an INI file with flag overrides.

Grammar (all sections optional except where a command needs the key)::

    [physics]
    alpha = 1.0                      # scalar, comma list, or an axis function
    delta = linspace(0, 2, 21)
    v = 1.0
    D = 0.5                          # or: gamma_eff = 2.5, meaning D = sqrt(gamma_eff gamma)
    gamma = 1.0

    [method]
    methods = sse, subspace, analytic:white-order2
    M = 200
    seed = 0
    n_max = 12

    [grid]
    window_c = 40
    step_h = 0.5
    noise_step_h = 0.1

    [output]
    csv = out.csv
    manifest = out.manifest.json
    svg = out.svg

Keys are case-insensitive, so the effective decoherence rate D^2/gamma is
spelled ``gamma_eff``.  Axis functions: ``linspace(a, b, n)``,
``logspace(a, b, n)`` (geometric from ``a`` to ``b``) and ``symlogspace(a, b, n)`` (the negated geometric points
followed by the positive ones).
"""

from __future__ import annotations

import configparser
import io
import math
import re
from dataclasses import dataclass

import numpy as np

from .analytic import AnalyticKind
from .dynamics import NOISE_STEP_H, STEP_H, WINDOW_C
from .hierarchy import N_MAX_DEFAULT

SECTIONS = ("physics", "method", "grid", "output")
KNOWN_KEYS = {
    "physics": {"alpha", "delta", "v", "d", "gamma", "gamma_eff"},
    "method": {"method", "methods", "m", "seed", "n_max"},
    "grid": {"window_c", "step_h", "noise_step_h"},
    "output": {"csv", "manifest", "svg"},
}
BASE_METHODS = ("sse", "hierarchy", "subspace")

_AXIS_RE = re.compile(r"^(linspace|logspace|symlogspace)\((.*)\)$")


class ConfigError(ValueError):
    """Invalid configuration; the message names the file line or the field."""


@dataclass(frozen=True)
class RunConfig:
    alphas: tuple[float, ...]
    deltas: tuple[float, ...]
    v: float
    D: float
    gamma: float
    methods: tuple[str, ...]
    M: int
    seed: int
    n_max: int
    window_c: float
    step_h: float
    noise_step_h: float
    csv: str | None
    manifest: str | None
    svg: str | None
    source: dict

    @property
    def Gamma(self) -> float:
        return self.D * self.D / self.gamma


def parse_axis(text: str) -> tuple[float, ...]:
    text = text.strip()
    m = _AXIS_RE.match(text.replace(" ", ""))
    if m:
        kind, args = m.groups()
        parts = args.split(",")
        if len(parts) != 3:
            raise ValueError(f"{kind} takes (start, stop, count)")
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
        if n < 1:
            raise ValueError("count must be >= 1")
        if kind == "linspace":
            return tuple(float(x) for x in np.linspace(a, b, n))
        if a <= 0 or b <= 0:
            raise ValueError(f"{kind} needs positive bounds")
        pts = np.geomspace(a, b, n)
        if kind == "logspace":
            return tuple(float(x) for x in pts)
        return tuple(float(x) for x in -pts[::-1]) + tuple(float(x) for x in pts)
    return tuple(float(x) for x in text.split(",") if x.strip())


def _key_lines(text: str) -> dict[tuple[str, str], int]:
    lines, section = {}, None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip().lower()
        elif section and "=" in s and not s.startswith(("#", ";")):
            lines[(section, s.split("=", 1)[0].strip().lower())] = no
    return lines


def load_config(
    path: str | None = None,
    overrides: dict[str, dict[str, str]] | None = None,
    text: str | None = None,
    defaults: dict[str, dict[str, str]] | None = None,
) -> RunConfig:
    """Parse ``path`` (or ``text``) and apply ``{section: {key: value}}`` overrides.

    ``defaults`` fill keys that neither the file nor the overrides set.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    label = path or "<config>"
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror}") from exc
    text = text or ""
    try:
        cp.read_string(text, source=label)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    lines = _key_lines(text)
    for section, values in (overrides or {}).items():
        if not cp.has_section(section):
            cp.add_section(section)
        for key, value in values.items():
            if value is not None:
                if section == "method" and key in ("method", "methods"):
                    # either spelling on the command line replaces both
                    cp.remove_option(section, "method")
                    cp.remove_option(section, "methods")
                cp.set(section, key, str(value))
                lines.pop((section, key.lower()), None)
    for section, values in (defaults or {}).items():
        if not cp.has_section(section):
            cp.add_section(section)
        for key, value in values.items():
            if not cp.has_option(section, key):
                cp.set(section, key, str(value))

    def where(section, key):
        no = lines.get((section, key.lower()))
        return f"{label}:{no} [{section}] {key}" if no else f"[{section}] {key} (command line)"

    for section in cp.sections():
        if section not in SECTIONS:
            raise ConfigError(f"{label}: unknown section [{section}]")
        for key in cp[section]:
            if key not in KNOWN_KEYS[section]:
                raise ConfigError(f"{where(section, key)}: unknown key")

    def get(section, key, conv, default=None, required=False):
        if not cp.has_option(section, key):
            if required:
                raise ConfigError(f"[{section}] {key}: required but missing")
            return default
        raw = cp.get(section, key)
        try:
            return conv(raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{where(section, key)}: cannot parse {raw!r} ({exc})") from exc

    def check(ok, section, key, msg):
        if not ok:
            raise ConfigError(f"{where(section, key)}: {msg}")

    alphas = get("physics", "alpha", parse_axis, required=True)
    check(len(alphas) > 0 and all(a != 0 and math.isfinite(a) for a in alphas), "physics", "alpha", "values must be finite and nonzero")
    deltas = get("physics", "delta", parse_axis, (0.0,))
    check(len(deltas) > 0 and all(d >= 0 for d in deltas), "physics", "delta", "values must be >= 0")
    v = get("physics", "v", float, 1.0)
    check(v > 0, "physics", "v", "must be positive")
    gamma = get("physics", "gamma", float, 1.0)
    check(gamma > 0, "physics", "gamma", "must be positive")
    if cp.has_option("physics", "gamma_eff"):
        check(not cp.has_option("physics", "d"), "physics", "gamma_eff", "give either D or gamma_eff, not both")
        G = get("physics", "gamma_eff", float)
        check(G >= 0, "physics", "gamma_eff", "must be >= 0")
        D = math.sqrt(G * gamma)
    else:
        D = get("physics", "d", float, 0.0)
        check(D >= 0, "physics", "D", "must be >= 0")

    if cp.has_option("method", "method") and cp.has_option("method", "methods"):
        raise ConfigError(f"{where('method', 'methods')}: give either method or methods")
    mkey = "methods" if cp.has_option("method", "methods") else "method"
    methods = get("method", mkey, lambda s: tuple(m.strip() for m in s.split(",") if m.strip()), ("sse",))
    for m in methods:
        if m.startswith("analytic:"):
            try:
                AnalyticKind(m.split(":", 1)[1])
            except ValueError:
                kinds = ", ".join(k.value for k in AnalyticKind)
                check(False, "method", mkey, f"unknown closed form {m!r} (choose from {kinds})")
        else:
            check(m in BASE_METHODS, "method", mkey, f"unknown method {m!r}")
    check(len(set(methods)) == len(methods), "method", mkey, "duplicate method")
    M = get("method", "m", int, 200)
    check(M >= 2, "method", "M", "need at least 2 realizations")
    seed = get("method", "seed", int, 0)
    check(seed >= 0, "method", "seed", "must be >= 0")
    n_max = get("method", "n_max", int, N_MAX_DEFAULT)
    check(n_max >= 0, "method", "n_max", "must be >= 0")

    window_c = get("grid", "window_c", float, WINDOW_C)
    step_h = get("grid", "step_h", float, STEP_H)
    noise_step_h = get("grid", "noise_step_h", float, NOISE_STEP_H)
    for key, val in (("window_c", window_c), ("step_h", step_h), ("noise_step_h", noise_step_h)):
        check(val > 0, "grid", key, "must be positive")

    source = {s: dict(cp[s]) for s in cp.sections()}
    return RunConfig(
        alphas=alphas, deltas=deltas, v=v, D=D, gamma=gamma, methods=methods, M=M, seed=seed,
        n_max=n_max, window_c=window_c, step_h=step_h, noise_step_h=noise_step_h,
        csv=get("output", "csv", str), manifest=get("output", "manifest", str), svg=get("output", "svg", str),
        source=source,
    )


def config_text(source: dict) -> str:
    """Serialize a resolved ``source`` mapping back to INI text."""
    cp = configparser.ConfigParser()
    for section in SECTIONS:
        if section in source:
            cp[section] = source[section]
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()

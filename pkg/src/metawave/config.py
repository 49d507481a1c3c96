"""Scenario configuration: JSON schema, validation and defaults.

An empty config reproduces the reference experiment: sigma1 square-base
inclusions with r = 0.25, eta = 1/8, slab [0.25, 0.75], k0 = 12 and
inverse inclusion permittivity 1 - 0.01i, in normalised units
(eps0 = mu0 = 1, so omega = k0).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .errors import ParameterError
from .geometry import GEOMETRY_IDS, MacroDomain, Microstructure, make_microstructure

MODE_NAMES = ("coeffs", "e-parallel", "h-parallel", "hmm")

_KNOWN_KEYS = {
    "geometry", "variant", "r", "rotated", "eta", "qm",
    "k0", "omega", "eps0", "mu0", "eps1", "eps1_inv",
    "modes", "cells_per_eta", "cell_n", "macro_n", "strip",
    "lateral", "sweep", "threads", "seed",
}


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated, fully resolved scenario description."""

    geometry: str = "sigma1"
    variant: str = "square"
    r: float = 0.25
    rotated: bool = False
    eta: float = 0.125
    qm: tuple[float, float] = (0.25, 0.75)
    omega: float = 12.0
    eps0: float = 1.0
    mu0: float = 1.0
    eps1: complex = 1.0 / (1.0 - 0.01j)
    modes: tuple[str, ...] = ("coeffs", "e-parallel", "h-parallel", "hmm")
    cells_per_eta: int = 8
    cell_n: int = 64
    macro_n: int = 32
    strip: tuple[float, float] = (0.05, 0.20)
    lateral: str = "impedance"
    sweep: tuple[float, ...] | None = None
    threads: int = 1
    seed: int = 0

    @property
    def k0(self) -> float:
        return self.omega * (self.eps0 * self.mu0) ** 0.5

    def microstructure(self) -> Microstructure:
        return make_microstructure(self.geometry, self.variant, self.r,
                                   self.rotated)

    def macro_domain(self) -> MacroDomain:
        return MacroDomain(qm=self.qm, eta=self.eta)

    def as_dict(self) -> dict:
        """Canonical plain-data form (used for fingerprints and reports)."""
        return {
            "geometry": self.geometry,
            "variant": self.variant,
            "r": self.r,
            "rotated": self.rotated,
            "eta": self.eta,
            "qm": list(self.qm),
            "omega": self.omega,
            "eps0": self.eps0,
            "mu0": self.mu0,
            "eps1": [self.eps1.real, self.eps1.imag],
            "modes": list(self.modes),
            "cells_per_eta": self.cells_per_eta,
            "cell_n": self.cell_n,
            "macro_n": self.macro_n,
            "strip": list(self.strip),
            "lateral": self.lateral,
            "sweep": None if self.sweep is None else list(self.sweep),
            "threads": self.threads,
            "seed": self.seed,
        }

    def fingerprint(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True,
                          separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _as_complex(value, key: str) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise ParameterError(f"{key} must be a number or a [re, im] pair")


def _positive_int(value, key: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value <= 0:
        raise ParameterError(f"{key} must be a positive integer")
    return value


def config_from_dict(raw: dict) -> ScenarioConfig:
    """Validate a raw JSON dictionary and fill in the defaults."""
    if not isinstance(raw, dict):
        raise ParameterError("config must be a JSON object")
    unknown = sorted(set(raw) - _KNOWN_KEYS)
    if unknown:
        raise ParameterError(f"unknown config keys: {', '.join(unknown)}")
    if "k0" in raw and "omega" in raw:
        raise ParameterError("k0 and omega are mutually exclusive keys")
    if "eps1" in raw and "eps1_inv" in raw:
        raise ParameterError("eps1 and eps1_inv are mutually exclusive keys")

    kw: dict = {}
    if "geometry" in raw:
        geometry = str(raw["geometry"]).lower()
        if geometry not in GEOMETRY_IDS:
            raise ParameterError(
                f"geometry must be one of {GEOMETRY_IDS}, got {geometry!r}")
        kw["geometry"] = geometry
    if "variant" in raw:
        kw["variant"] = str(raw["variant"])
    if "r" in raw:
        kw["r"] = float(raw["r"])
    if "rotated" in raw:
        if not isinstance(raw["rotated"], bool):
            raise ParameterError("rotated must be a boolean")
        kw["rotated"] = raw["rotated"]
    if "eta" in raw:
        kw["eta"] = float(raw["eta"])
    if "qm" in raw:
        qm = raw["qm"]
        if not (isinstance(qm, (list, tuple)) and len(qm) == 2):
            raise ParameterError("qm must be a [lo, hi] pair")
        kw["qm"] = (float(qm[0]), float(qm[1]))

    eps0 = float(raw.get("eps0", 1.0))
    mu0 = float(raw.get("mu0", 1.0))
    if eps0 <= 0 or mu0 <= 0:
        raise ParameterError("eps0 and mu0 must be positive")
    kw["eps0"], kw["mu0"] = eps0, mu0
    if "omega" in raw:
        kw["omega"] = float(raw["omega"])
    elif "k0" in raw:
        kw["omega"] = float(raw["k0"]) / (eps0 * mu0) ** 0.5
    if kw.get("omega", 12.0) <= 0:
        raise ParameterError("omega (or k0) must be positive")

    if "eps1" in raw:
        kw["eps1"] = _as_complex(raw["eps1"], "eps1")
    elif "eps1_inv" in raw:
        inv = _as_complex(raw["eps1_inv"], "eps1_inv")
        if inv == 0:
            raise ParameterError("eps1_inv must be nonzero")
        kw["eps1"] = 1.0 / inv
    eps1 = kw.get("eps1", ScenarioConfig.eps1)
    if not (eps1.real > 0 and eps1.imag >= 0):
        raise ParameterError(f"eps1 must have Re > 0 and Im >= 0, got {eps1}")

    if "modes" in raw:
        modes = raw["modes"]
        if isinstance(modes, str):
            modes = [modes]
        modes = tuple(str(m) for m in modes)
        bad = sorted(set(modes) - set(MODE_NAMES))
        if bad:
            raise ParameterError(
                f"unknown modes: {', '.join(bad)}; expected subset of {MODE_NAMES}")
        kw["modes"] = modes
    for key in ("cells_per_eta", "cell_n", "macro_n", "threads"):
        if key in raw:
            kw[key] = _positive_int(raw[key], key)
    if "seed" in raw:
        if not isinstance(raw["seed"], int) or isinstance(raw["seed"], bool):
            raise ParameterError("seed must be an integer")
        kw["seed"] = raw["seed"]
    if "lateral" in raw:
        lateral = str(raw["lateral"])
        if lateral not in ("impedance", "periodic"):
            raise ParameterError(
                f"lateral must be 'impedance' or 'periodic', got {lateral!r}")
        kw["lateral"] = lateral
    if "strip" in raw:
        strip = raw["strip"]
        if not (isinstance(strip, (list, tuple)) and len(strip) == 2):
            raise ParameterError("strip must be a [lo, hi] pair")
        kw["strip"] = (float(strip[0]), float(strip[1]))
    if "sweep" in raw:
        kw["sweep"] = _parse_sweep(raw["sweep"])

    cfg = ScenarioConfig(**kw)
    # Constructing the domain objects revalidates the geometric preconditions.
    cfg.macro_domain()
    cfg.microstructure()
    lo, hi = cfg.strip
    if not 0.0 <= lo < hi <= cfg.qm[0]:
        raise ParameterError(
            f"strip {cfg.strip} must lie left of the slab start {cfg.qm[0]}")
    return cfg


def _parse_sweep(spec) -> tuple[float, ...]:
    if isinstance(spec, dict):
        unknown = sorted(set(spec) - {"start", "stop", "num", "values"})
        if unknown:
            raise ParameterError(f"unknown sweep keys: {', '.join(unknown)}")
        if "values" in spec:
            values = [float(v) for v in spec["values"]]
        else:
            try:
                start, stop = float(spec["start"]), float(spec["stop"])
                num = _positive_int(spec["num"], "sweep.num")
            except KeyError as exc:
                raise ParameterError(
                    "sweep needs either values or start/stop/num") from exc
            if num == 1:
                values = [start]
            else:
                step = (stop - start) / (num - 1)
                values = [start + i * step for i in range(num)]
    elif isinstance(spec, (list, tuple)):
        values = [float(v) for v in spec]
    else:
        raise ParameterError("sweep must be a list or {start, stop, num}")
    if not values:
        raise ParameterError("sweep grid must be nonempty")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ParameterError("sweep grid must be strictly increasing")
    return tuple(values)


def parse_config(path) -> ScenarioConfig:
    """Load and validate a JSON config file."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ParameterError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ParameterError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(raw)

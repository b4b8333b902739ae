"""Experiment configuration: a small YAML document describing the symbol
family, potential, epsilon sweep, cutoff rule, seeds, and solver settings.

The on-disk grammar is plain YAML with these top-level keys (all scalars are
JSON-compatible):

    name:      experiment label (string)
    symbol:    {family: quartic|laplacian, nu: <float>}        # quartic needs nu
    potential: [v2, v4, v6, ...]   ascending even coefficients of V
    eps:       [0.2, 0.1, ...]     epsilon sweep (may be empty only for solve)
    k_rule:    {kind: inverse, factor: 4.0}  ->  K = ceil(factor / eps)
               {kind: fixed,   K: 8}
    seed:      master seed (unsigned integer)
    samples:   Monte Carlo replicas
    solver:    {dt, T, lam: null|float, kappa, mode, picard_iters}
    out_dir:   output directory

`dump_config(load_config(p))` reproduces the document byte-identically up to
YAML canonicalization, and `config_hash` is stable across round-trips.
"""

import hashlib
import math
from dataclasses import asdict, dataclass, field

import yaml

from .errors import ConfigError
from .fourier import DispersionQ
from .renorm import Potential

KNOWN_FAMILIES = ("quartic", "laplacian")


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    symbol: dict = field(default_factory=lambda: {"family": "quartic", "nu": 1.0})
    potential: list = field(default_factory=lambda: [0.0, 0.25])
    eps: list = field(default_factory=list)
    k_rule: dict = field(default_factory=lambda: {"kind": "inverse", "factor": 4.0})
    seed: int = 0
    samples: int = 0
    solver: dict = field(default_factory=dict)
    out_dir: str = "out"

    def __post_init__(self):
        fam = self.symbol.get("family")
        if fam not in KNOWN_FAMILIES:
            raise ConfigError(f"unknown symbol family {fam!r}")
        if fam == "quartic" and "nu" not in self.symbol:
            raise ConfigError("quartic symbol family needs parameter nu")
        kind = self.k_rule.get("kind")
        if kind not in ("inverse", "fixed"):
            raise ConfigError(f"unknown k_rule kind {kind!r}")
        if kind == "fixed" and "K" not in self.k_rule:
            raise ConfigError("fixed k_rule needs K")

    def make_symbol(self, eps):
        fam = self.symbol["family"]
        if fam == "quartic":
            return DispersionQ.quartic(eps, float(self.symbol["nu"]))
        return DispersionQ.laplacian(eps)

    def make_potential(self):
        return Potential(tuple(float(c) for c in self.potential))

    def cutoff_for(self, eps):
        if self.k_rule["kind"] == "fixed":
            return int(self.k_rule["K"])
        if eps <= 0:
            raise ConfigError("inverse k_rule needs eps > 0")
        return math.ceil(float(self.k_rule["factor"]) / eps)


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping")
    known = set(ExperimentConfig.__dataclass_fields__)
    extra = set(doc) - known
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    return ExperimentConfig(**doc)


def dump_config(cfg, path=None):
    text = yaml.safe_dump(asdict(cfg), sort_keys=True, default_flow_style=False)
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text


def config_hash(cfg):
    """Short stable digest of the canonicalized config document."""
    return hashlib.sha256(dump_config(cfg).encode("utf-8")).hexdigest()[:12]

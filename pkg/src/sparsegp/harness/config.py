"""YAML run configuration: kernels, priors, optimizer and data schema.

Example::

    model:
      kind: csfic
      m: 24
      inducing: grid
      block_size: 24
      pic_test: block        # PIC test conditional: fic (default) or block
      noise: 0.1
    kernels:
      - {name: long, type: se, magnitude: 1.0, lengthscale: 10.0}
      - {name: short, type: pp, magnitude: 1.0, lengthscale: 0.5}
    priors:
      lengthscale: {nu: 3, scale: 2}
      magnitude: {nu: 0.3, scale: 2}
      noise: flat            # or {nu: ..., scale: ...}; omitted = magnitude prior
    optimizer:
      max_iter: 500
      gtol: 1.0e-5
      ftol: 1.0e-10
      restarts: 2
      init: heuristic        # or "spec" to start from the values above
    data:
      inputs: [year]
      target: co2
      missing: ["", "NaN", "-99.99"]
"""

from dataclasses import dataclass, field, fields

import yaml

from ..kernels import make_kernel
from ..training import (LENGTHSCALE_PRIOR, MAGNITUDE_PRIOR, FlatPrior, HalfStudentTPrior,
                        TrainConfig, default_priors)
from .design import ModelTemplate
from .io import DEFAULT_MISSING

DEFAULT_KERNELS = (
    {"name": "long", "type": "se", "magnitude": 1.0, "lengthscale": 1.0},
    {"name": "short", "type": "pp", "magnitude": 1.0, "lengthscale": 0.1},
)

_SECTIONS = {"model", "kernels", "priors", "optimizer", "data"}


class ConfigError(ValueError):
    """Malformed configuration file or option."""


def _prior(entry, default):
    if entry is None:
        return default
    if entry == "flat":
        return FlatPrior()
    if isinstance(entry, dict) and set(entry) == {"nu", "scale"}:
        try:
            return HalfStudentTPrior(float(entry["nu"]), float(entry["scale"]))
        except ValueError as err:
            raise ConfigError(str(err)) from err
    raise ConfigError(f"prior must be 'flat' or {{nu, scale}}, got {entry!r}")


@dataclass
class RunConfig:
    model: dict = field(default_factory=dict)
    kernels: list = field(default_factory=lambda: [dict(k) for k in DEFAULT_KERNELS])
    priors: dict = field(default_factory=dict)
    optimizer: dict = field(default_factory=dict)
    data: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw):
        raw = raw or {}
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a mapping")
        unknown = set(raw) - _SECTIONS
        if unknown:
            raise ConfigError(f"unknown configuration sections: {sorted(unknown)}")
        cfg = cls(**{k: v for k, v in raw.items() if v is not None})
        cfg.train_config()
        return cfg

    @classmethod
    def load(cls, path):
        if path is None:
            return cls()
        try:
            with open(path, encoding="utf-8") as fh:
                raw = yaml.safe_load(fh)
        except OSError as err:
            raise ConfigError(f"cannot read config {path}: {err}") from err
        except yaml.YAMLError as err:
            raise ConfigError(f"{path}: {err}") from err
        return cls.from_dict(raw)

    def make_kernels(self, dim):
        out = []
        for entry in self.kernels:
            try:
                out.append(make_kernel(entry["type"], float(entry.get("magnitude", 1.0)),
                                       entry.get("lengthscale", 1.0), dim, entry.get("name", "")))
            except KeyError as err:
                raise ConfigError(f"kernel entry {entry!r} is missing {err}") from err
        return tuple(out)

    def template(self, dim, kind=None, m=None, inducing=None, block_size=None, seed=None):
        """Command-line values override the ``model`` section."""
        model = self.model
        return ModelTemplate(
            kind=kind or model.get("kind", "csfic"),
            kernels=self.make_kernels(dim),
            noise=float(model.get("noise", 0.1)),
            m=int(m or model.get("m", 24)),
            inducing=inducing or model.get("inducing", "grid"),
            block_size=block_size or model.get("block_size"),
            pic_test=model.get("pic_test", "fic"),
            seed=seed,
        )

    def prior_table(self):
        p = self.priors
        mag = _prior(p.get("magnitude"), MAGNITUDE_PRIOR)
        return {"lengthscale": _prior(p.get("lengthscale"), LENGTHSCALE_PRIOR),
                "magnitude": mag, "noise": _prior(p.get("noise"), mag)}

    def priors_for(self, spec):
        t = self.prior_table()
        return default_priors(spec, t["lengthscale"], t["magnitude"], t["noise"])

    def train_config(self, seed=None):
        known = {f.name for f in fields(TrainConfig)}
        unknown = set(self.optimizer) - known
        if unknown:
            raise ConfigError(f"unknown optimizer options: {sorted(unknown)}")
        try:
            cfg = TrainConfig(**self.optimizer)
        except (TypeError, ValueError) as err:
            raise ConfigError(str(err)) from err
        if seed is not None:
            cfg.seed = seed
        return cfg

    def data_schema(self):
        d = self.data
        return {"inputs": d.get("inputs"), "target": d.get("target"),
                "missing": tuple(str(t) for t in d.get("missing", DEFAULT_MISSING))}

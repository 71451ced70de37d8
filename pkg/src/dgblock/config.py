"""Experiment configuration in an INI-style ``key = value`` file.

Grammar: sections in brackets, one ``key = value`` per line, ``#`` or ``;``
comments, lists comma separated. Unknown keys are rejected so typos fail
loudly. Sections and keys:

    [system]  atoms, bond, dim, geometry_file, spacing, padding, kinetic,
              softening, self_term, periodic, electrons
    [active]  kind, exponents, scf, alpha, keep, mixing, max_iter, conv_tol
    [dg]      partition, blocks, taus, mode
    [metrics] cutoff
    [sweep]   sizes
    [run]     output, seed, workers
"""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass

from .activespace import ActiveSpaceSpec
from .dgbasis import ABSOLUTE, RELATIVE


class ConfigError(ValueError):
    pass


_SECTIONS = {
    "system": {"n_atoms": "atoms", "bond": "bond", "dim": "dim", "geometry_file": "geometry_file",
               "spacing": "spacing", "padding": "padding", "kinetic": "kinetic",
               "softening": "softening", "self_term": "self_term", "periodic": "periodic",
               "n_electrons": "electrons"},
    "active": {"active_kind": "kind", "exponents": "exponents", "scf_kind": "scf",
               "alpha": "alpha", "keep": "keep", "mixing": "mixing", "max_iter": "max_iter",
               "conv_tol": "conv_tol"},
    "dg": {"partition": "partition", "n_blocks": "blocks", "taus": "taus", "tau_mode": "mode"},
    "metrics": {"cutoff": "cutoff"},
    "sweep": {"sweep_sizes": "sizes"},
    "run": {"output": "output", "seed": "seed", "workers": "workers"},
}


@dataclass
class ExperimentConfig:
    n_atoms: int = 2
    bond: float = 1.7
    dim: int = 1
    geometry_file: str = ""
    spacing: float = 0.2125
    padding: float = 3.4
    kinetic: str = "auto"
    softening: float = 1.0
    self_term: bool = False
    periodic: bool = False
    n_electrons: int = 0  # 0 -> neutral
    active_kind: str = "natural"
    exponents: tuple = (0.5, 1.5)
    scf_kind: str = "unrestricted"
    alpha: float = 0.01
    keep: int = 0  # 0 -> one orbital per Gaussian shell
    mixing: float = 0.3
    max_iter: int = 2000
    conv_tol: float = 1e-9
    partition: str = "atom"
    n_blocks: int = 0
    taus: tuple = (1e-2,)
    tau_mode: str = RELATIVE
    cutoff: float = 1e-6
    sweep_sizes: tuple = (4, 6, 8, 10, 12, 14, 16)
    output: str = "out"
    seed: int = 0
    workers: int = 1

    def validate(self) -> "ExperimentConfig":
        checks = [
            (self.n_atoms >= 1, "atoms must be >= 1"),
            (self.bond > 0, "bond must be positive"),
            (self.dim in (1, 3), "dim must be 1 or 3"),
            (self.spacing > 0, "spacing must be positive"),
            (self.padding >= 0, "padding must be non-negative"),
            (self.kinetic in ("auto", "fd2", "sinc"), "kinetic must be auto, fd2 or sinc"),
            (self.softening > 0, "softening must be positive"),
            (self.n_electrons >= 0, "electrons must be non-negative"),
            (self.active_kind in ("natural", "gaussian", "canonical"),
             "active kind must be natural, gaussian or canonical"),
            (len(self.exponents) >= 1 and all(e > 0 for e in self.exponents),
             "exponents must be positive"),
            (self.scf_kind in ("restricted", "unrestricted"),
             "scf must be restricted or unrestricted"),
            (self.alpha >= 0, "alpha must be non-negative"),
            (self.keep >= 0, "keep must be non-negative"),
            (0 < self.mixing <= 1, "mixing must be in (0, 1]"),
            (self.max_iter >= 1, "max_iter must be >= 1"),
            (self.conv_tol > 0, "conv_tol must be positive"),
            (self.partition in ("atom", "uniform"), "partition must be atom or uniform"),
            (self.partition != "uniform" or self.n_blocks >= 1,
             "uniform partition needs blocks >= 1"),
            (len(self.taus) >= 1 and all(t >= 0 for t in self.taus), "taus must be >= 0"),
            (self.tau_mode in (RELATIVE, ABSOLUTE), "mode must be relative or absolute"),
            (self.cutoff >= 0, "cutoff must be non-negative"),
            (all(n >= 1 for n in self.sweep_sizes), "sweep sizes must be >= 1"),
            (list(self.sweep_sizes) == sorted(set(self.sweep_sizes)),
             "sweep sizes must be strictly increasing"),
            (self.workers >= 1, "workers must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        return self

    def active_spec(self) -> ActiveSpaceSpec:
        return ActiveSpaceSpec(kind=self.active_kind, exponents=tuple(self.exponents),
                               scf_kind=self.scf_kind, alpha=self.alpha,
                               keep=self.keep or None, mixing=self.mixing,
                               max_iter=self.max_iter, conv_tol=self.conv_tol)

    def replace(self, **changes) -> "ExperimentConfig":
        d = asdict(self)
        d.update(changes)
        return ExperimentConfig(**d).validate()

    def physical_dict(self) -> dict:
        """Fields that must agree across the sizes of a sweep."""
        skip = {"n_atoms", "n_electrons", "output", "workers", "sweep_sizes"}
        return {k: _plain(v) for k, v in asdict(self).items() if k not in skip}

    # -- text form ----------------------------------------------------------

    def to_text(self) -> str:
        values = asdict(self)
        out = []
        for section, keys in _SECTIONS.items():
            out.append(f"[{section}]")
            for attr, key in keys.items():
                out.append(f"{key} = {_format(values[attr])}")
            out.append("")
        return "\n".join(out)

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc
        defaults = cls()
        kwargs = {}
        for section in parser.sections():
            if section not in _SECTIONS:
                raise ConfigError(f"unknown section [{section}]")
            reverse = {v: k for k, v in _SECTIONS[section].items()}
            for key, raw in parser.items(section):
                if key not in reverse:
                    raise ConfigError(f"unknown key {key!r} in [{section}]")
                attr = reverse[key]
                kwargs[attr] = _parse(raw, getattr(defaults, attr), key)
        return cls(**kwargs).validate()

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_text(fh.read())


def _plain(v):
    return list(v) if isinstance(v, tuple) else v


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (tuple, list)):
        return ", ".join(_format(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(raw: str, default, key: str):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(raw)
            return low in ("true", "yes", "1")
        if isinstance(default, tuple):
            elem = type(default[0]) if default else float
            items = [x.strip() for x in raw.split(",") if x.strip()]
            return tuple(elem(x) for x in items)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc

"""Experiment specifications read from TOML files.

A spec has a required ``name``, a ``[shape]`` table (see
:func:`mstrack.shapes.make_curve`), ``[scheme]`` and ``[mesh]`` tables, and
optional ``[anisotropy]``, ``[output]`` and ``[converge]`` tables. Unknown
keys are rejected so that typos do not silently fall back to defaults.
"""

import os
from dataclasses import dataclass, field
from importlib import resources

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import anisotropy as aniso
from .errors import ConfigError
from .stepper import SchemeConfig

PRESETS = ("annulus-converge", "cigar", "cigar-linear", "octagon", "octagon-isotropic")

_SCHEME_KEYS = {"scheme", "integration", "dt", "T", "tol", "max_fixed_point_iters"}
_MESH_KEYS = {"H", "N_f", "N_c", "band"}
_OUTPUT_KEYS = {"directory", "snapshot_times", "snapshot_every", "svg"}
_CONVERGE_KEYS = {"r1", "r2", "T", "levels", "max_level"}
_TOP_KEYS = {"name", "shape", "scheme", "mesh", "anisotropy", "output", "converge"}


@dataclass
class ConvergeSpec:
    """Annulus convergence ladder: level ``i`` uses ``N_f = 2^(7+i)``,
    ``N_c = 4^i``, ``dt = 4^(3-i) 1e-3`` and ``K = 2^(8+i)`` vertices."""

    r1: float = 2.5
    r2: float = 3.0
    T: float = 0.5
    levels: tuple = (0, 1)
    max_level: int = 4

    @staticmethod
    def level_params(i):
        return dict(N_f=2 ** (7 + i), N_c=4 ** i, dt=4.0 ** (3 - i) * 1e-3, K=2 ** (8 + i))


@dataclass
class ExperimentSpec:
    name: str
    shape: dict
    scheme: SchemeConfig
    output_dir: str
    snapshot_times: tuple = ()
    snapshot_every: int = 0
    svg: bool = True
    converge: ConvergeSpec = None
    source: str = ""
    raw: dict = field(default_factory=dict, repr=False)


def _table(data, key, allowed, where, required=False):
    if key not in data:
        if required:
            raise ConfigError(f"{where}: missing required table [{key}]")
        return {}
    tab = data[key]
    if not isinstance(tab, dict):
        raise ConfigError(f"{where}: [{key}] must be a table")
    unknown = set(tab) - allowed if allowed is not None else set()
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) in [{key}]: {', '.join(sorted(unknown))}")
    return tab


def _require(tab, keys, section, where):
    missing = [k for k in keys if k not in tab]
    if missing:
        raise ConfigError(f"{where}: missing field(s) {', '.join(section + '.' + k for k in missing)}")


def parse_anisotropy(tab, where="anisotropy"):
    """Build an :class:`AnisotropyDef` from a config table, or ``None`` if empty."""
    if not tab:
        return None
    kinds = [k for k in ("preset", "matrices", "rotated_diag") if k in tab]
    if len(kinds) != 1:
        raise ConfigError(f"{where}: give exactly one of preset, matrices, rotated_diag")
    kind = kinds[0]
    allowed = {"preset": {"preset", "delta"}, "matrices": {"matrices", "r"},
               "rotated_diag": {"rotated_diag", "r"}}[kind]
    unknown = set(tab) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) for {kind}: {', '.join(sorted(unknown))}")
    if kind == "preset":
        if tab["preset"] == "octagon":
            return aniso.make_octagon_density(float(tab.get("delta", 1e-4)))
        if tab["preset"] == "isotropic":
            return None
        raise ConfigError(f"{where}: unknown anisotropy preset {tab['preset']!r}")
    if kind == "matrices":
        return aniso.AnisotropyDef(tab["matrices"], float(tab.get("r", 1.0)))
    return aniso.rotated_diag(tab["rotated_diag"], float(tab.get("r", 1.0)))


def parse_spec(data, where="<spec>"):
    """Validate a decoded TOML document and build an :class:`ExperimentSpec`."""
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"{where}: unknown top-level key(s): {', '.join(sorted(unknown))}")
    if "name" not in data:
        raise ConfigError(f"{where}: missing field name")
    shape = _table(data, "shape", None, where, required=True)
    if "kind" not in shape:
        raise ConfigError(f"{where}: missing field shape.kind")
    sch = _table(data, "scheme", _SCHEME_KEYS, where, required=True)
    _require(sch, ("dt", "T"), "scheme", where)
    mesh = _table(data, "mesh", _MESH_KEYS, where, required=True)
    _require(mesh, ("N_f", "N_c"), "mesh", where)
    out = _table(data, "output", _OUTPUT_KEYS, where)
    conv_tab = _table(data, "converge", _CONVERGE_KEYS, where)
    anis = parse_anisotropy(_table(data, "anisotropy", None, where), f"{where}: anisotropy")
    try:
        scheme = SchemeConfig(
            scheme=sch.get("scheme", "sp_fixed_point"),
            integration=sch.get("integration", "lumped"),
            anisotropy=anis,
            dt=float(sch["dt"]),
            T=float(sch["T"]),
            tol=float(sch.get("tol", 1e-10)),
            max_fixed_point_iters=int(sch.get("max_fixed_point_iters", 100)),
            H=float(mesh.get("H", 4.0)),
            N_f=int(mesh["N_f"]),
            N_c=int(mesh["N_c"]),
            band=float(mesh.get("band", 0.0)),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise ConfigError(f"{where}: {exc}") from None
        raise ConfigError(f"{where}: bad value in [scheme]/[mesh]: {exc}") from None
    converge = None
    if conv_tab:
        converge = ConvergeSpec(
            r1=float(conv_tab.get("r1", 2.5)), r2=float(conv_tab.get("r2", 3.0)),
            T=float(conv_tab.get("T", 0.5)),
            levels=tuple(int(i) for i in conv_tab.get("levels", (0, 1))),
            max_level=int(conv_tab.get("max_level", 4)))
    name = str(data["name"])
    return ExperimentSpec(
        name=name,
        shape=dict(shape),
        scheme=scheme,
        output_dir=str(out.get("directory", os.path.join("mstrack-out", name))),
        snapshot_times=tuple(float(t) for t in out.get("snapshot_times", ())),
        snapshot_every=int(out.get("snapshot_every", 0)),
        svg=bool(out.get("svg", True)),
        converge=converge,
        source=where,
        raw=data,
    )


def load_preset_text(name):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return resources.files("mstrack").joinpath("presets", f"{name}.toml").read_text()


def load_spec(path_or_preset):
    """Read a spec file, or a packaged preset when given a preset name."""
    if os.path.exists(path_or_preset):
        with open(path_or_preset, "rb") as fh:
            text = fh.read().decode()
        where = path_or_preset
    elif path_or_preset in PRESETS:
        text = load_preset_text(path_or_preset)
        where = f"preset {path_or_preset}"
    else:
        raise ConfigError(f"no such spec file or preset: {path_or_preset!r}")
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    return parse_spec(data, where)

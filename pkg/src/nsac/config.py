"""Plain-text run configuration.

A config file is a list of ``key = value`` lines grouped under the section
headers ``[grid]``, ``[params]``, ``[step]``, ``[scenario]`` and ``[output]``.
``#`` starts a comment. Example::

    [grid]
    length = 1.0
    n_cells = 256
    bc = periodic          # or mixed
    coords = euler         # or lagrange

    [params]
    nu = 0.1
    eps = 0.05
    theta = 0.9
    rho_ref = 0.1

    [step]
    t_end = 1.0            # cfl, dt, picard_tol, picard_max are optional

    [scenario]
    kind = sine            # uniform | sine | tanh | random
    rho_mean = 0.5
    amplitude = 0.1

    [output]
    directory = out
    ledger_interval = 0.01 # omit to write a row every step
    snapshot_times = 0, 0.5, 1
    plot = true

The standard library ``configparser`` does not report line numbers, which
every error message here must carry, hence the small hand-written reader.
"""

from __future__ import annotations

import os
from dataclasses import MISSING, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Mapping

from nsac.eos import PhysParams
from nsac.grid import BCMode, Grid, SeededRandom, SinePerturb, TanhInterface, Uniform, make_initial
from nsac.solver_euler import StepControl

SECTIONS = ("grid", "params", "step", "scenario", "output")
OUT_ENV = "NSAC_OUT"


class ConfigError(ValueError):
    """Invalid configuration; ``key`` and ``line`` locate the offending entry."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None, path=None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        prefix = ":".join(where)
        label = f"{prefix}: " if prefix else ""
        if key is not None:
            label += f"[{key}] "
        super().__init__(label + message)
        self.key = key
        self.line = line
        self.path = path


@dataclass(frozen=True)
class OutputSpec:
    directory: Path = Path("nsac_out")
    ledger_interval: float | None = None
    snapshot_times: tuple[float, ...] = ()
    plot: bool = False
    extended: bool = False


@dataclass(frozen=True)
class SimConfig:
    grid: Grid
    params: PhysParams
    step: StepControl
    scenario: Any
    output: OutputSpec = field(default_factory=OutputSpec)
    coords: str = "euler"

    def with_output_dir(self, directory) -> "SimConfig":
        return replace(self, output=replace(self.output, directory=Path(directory)))


# -- raw reading --------------------------------------------------------------


@dataclass
class _Entry:
    value: str
    line: int


def _read_sections(text: str, path=None) -> tuple[dict[str, dict[str, _Entry]], dict[str, int]]:
    sections: dict[str, dict[str, _Entry]] = {}
    headers: dict[str, int] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", line=lineno, path=path)
            name = line[1:-1].strip().lower()
            if name not in SECTIONS:
                raise ConfigError(f"unknown section [{name}]; expected one of {', '.join(SECTIONS)}",
                                  line=lineno, path=path)
            if name in sections:
                raise ConfigError(f"section [{name}] appears twice", line=lineno, path=path)
            sections[name] = {}
            headers[name] = lineno
            current = name
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno, path=path)
        if current is None:
            raise ConfigError("key outside of any section", line=lineno, path=path)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", line=lineno, path=path)
        if key in sections[current]:
            raise ConfigError("duplicate key", key=key, line=lineno, path=path)
        sections[current][key] = _Entry(value, lineno)
    return sections, headers


def _as_bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _as_int(text: str) -> int:
    value = float(text)
    if value != int(value):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


def _as_float_list(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.replace(",", " ").split())


class _Section:
    """Typed access to one section that remembers which keys were consumed."""

    def __init__(self, name, entries: Mapping[str, _Entry], header_line, path):
        self.name = name
        self.entries = dict(entries)
        self.header_line = header_line
        self.path = path
        self.used: set[str] = set()

    def line(self, key):
        entry = self.entries.get(key)
        return entry.line if entry is not None else self.header_line

    def get(self, key, convert: Callable[[str], Any] = float, default=...):
        self.used.add(key)
        entry = self.entries.get(key)
        if entry is None:
            if default is ...:
                raise ConfigError(f"missing mandatory key in [{self.name}]", key=key,
                                  line=self.header_line, path=self.path)
            return default
        try:
            return convert(entry.value)
        except ValueError as exc:
            raise ConfigError(f"cannot read {entry.value!r}: {exc}", key=key, line=entry.line,
                              path=self.path) from None

    def reject_unknown(self):
        for key, entry in self.entries.items():
            if key not in self.used:
                raise ConfigError(f"unknown key in [{self.name}]", key=key, line=entry.line, path=self.path)


def _blame(exc: Exception, section: _Section, keys) -> ConfigError:
    """Attach an invariant violation to the key its message starts with."""
    message = str(exc)
    for key in keys:
        if message.startswith(key):
            return ConfigError(message, key=key, line=section.line(key), path=section.path)
    return ConfigError(message, line=section.header_line, path=section.path)


# -- scenario table -----------------------------------------------------------

_SCENARIOS = {
    "uniform": (Uniform, {"rho": float, "u": float, "chi": float}),
    "sine": (SinePerturb, {"rho_mean": float, "amplitude": float, "wavenumber": _as_int,
                           "chi_mean": float, "chi_amplitude": float}),
    "tanh": (TanhInterface, {"rho_left": float, "rho_right": float, "width": float}),
    "random": (SeededRandom, {"rho_mean": float, "amplitude": float, "seed": _as_int, "chi_mean": float}),
}


def _scenario(sec: _Section):
    kind = sec.get("kind", str).lower()
    if kind not in _SCENARIOS:
        raise ConfigError(f"unknown scenario kind {kind!r}; expected one of {', '.join(_SCENARIOS)}",
                          key="kind", line=sec.line("kind"), path=sec.path)
    cls, converters = _SCENARIOS[kind]
    kwargs = {}
    for f in fields(cls):
        default = ... if f.default is MISSING else f.default
        kwargs[f.name] = sec.get(f.name, converters[f.name], default)
    return cls(**kwargs)


# -- entry points -------------------------------------------------------------


def _override_sections(sections, headers, overrides):
    for dotted, value in (overrides or {}).items():
        if "." not in dotted:
            raise ConfigError("override keys look like section.key", key=dotted)
        name, key = dotted.split(".", 1)
        if name not in SECTIONS:
            raise ConfigError(f"unknown section [{name}] in override", key=dotted)
        sections.setdefault(name, {})
        headers.setdefault(name, 0)
        line = sections[name][key].line if key in sections[name] else headers[name]
        sections[name][key] = _Entry(str(value), line)


def parse_config_text(text: str, path=None, overrides: Mapping[str, Any] | None = None) -> SimConfig:
    """Parse and fully validate configuration ``text``.

    ``overrides`` maps ``"section.key"`` to replacement values (used by sweeps).
    """
    sections, headers = _read_sections(text, path)
    _override_sections(sections, headers, overrides)
    for required in ("grid", "params", "scenario"):
        if required not in sections:
            raise ConfigError(f"missing section [{required}]", path=path)
    sec = {name: _Section(name, sections.get(name, {}), headers.get(name), path) for name in SECTIONS}

    g = sec["grid"]
    bc = g.get("bc", str, "periodic").lower()
    if bc not in {m.value for m in BCMode}:
        raise ConfigError(f"bc must be 'periodic' or 'mixed', got {bc!r}", key="bc", line=g.line("bc"), path=path)
    coords = g.get("coords", str, "euler").lower()
    if coords not in ("euler", "lagrange"):
        raise ConfigError(f"coords must be 'euler' or 'lagrange', got {coords!r}", key="coords",
                          line=g.line("coords"), path=path)
    length, n_cells = g.get("length"), g.get("n_cells", _as_int)
    try:
        grid = Grid(length, n_cells, BCMode(bc))
    except ValueError as exc:
        raise _blame(exc, g, ("n_cells", "length")) from None
    if coords == "lagrange" and not grid.periodic:
        raise ConfigError("lagrange coordinates need bc = periodic", key="coords",
                          line=g.line("coords"), path=path)

    p = sec["params"]
    values = {k: p.get(k) for k in ("nu", "eps", "theta", "rho_ref")}
    try:
        params = PhysParams(**values)
    except ValueError as exc:
        raise _blame(exc, p, ("nu", "eps", "theta", "rho_ref")) from None

    s = sec["step"]
    step_keys = ("t_end", "dt", "cfl", "picard_tol", "picard_max")
    step_values = dict(
        t_end=s.get("t_end", float, 1.0),
        dt=s.get("dt", float, None),
        cfl=s.get("cfl", float, 0.5),
        picard_tol=s.get("picard_tol", float, 1e-10),
        picard_max=s.get("picard_max", _as_int, 50),
    )
    try:
        ctl = StepControl(**step_values)
    except ValueError as exc:
        raise _blame(exc, s, step_keys) from None

    sc = sec["scenario"]
    scenario = _scenario(sc)
    try:
        make_initial(scenario, grid, params)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid scenario: {exc}", line=sc.header_line, path=path) from None

    o = sec["output"]
    directory = Path(os.environ.get(OUT_ENV) or o.get("directory", str, "nsac_out"))
    o.used.add("directory")
    interval = o.get("ledger_interval", float, None)
    if interval is not None and not interval > 0:
        raise ConfigError("ledger_interval must be > 0", key="ledger_interval",
                          line=o.line("ledger_interval"), path=path)
    snaps = o.get("snapshot_times", _as_float_list, ())
    if any(t < 0 for t in snaps):
        raise ConfigError("snapshot_times must be >= 0", key="snapshot_times",
                          line=o.line("snapshot_times"), path=path)
    output = OutputSpec(
        directory=directory,
        ledger_interval=interval,
        snapshot_times=tuple(sorted(snaps)),
        plot=o.get("plot", _as_bool, False),
        extended=o.get("extended", _as_bool, False),
    )
    _check_writable(directory, o, path)

    for section in sec.values():
        section.reject_unknown()
    return SimConfig(grid=grid, params=params, step=ctl, scenario=scenario, output=output, coords=coords)


def _check_writable(directory: Path, sec: _Section, path):
    probe = directory
    while not probe.exists():
        if probe.parent == probe:
            break
        probe = probe.parent
    if not os.access(probe, os.W_OK):
        raise ConfigError(f"output directory {directory} is not writable", key="directory",
                          line=sec.line("directory"), path=path)


def parse_config(path, overrides: Mapping[str, Any] | None = None) -> SimConfig:
    """Read ``path`` and return a validated :class:`SimConfig`."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path=path) from None
    return parse_config_text(text, path=path, overrides=overrides)

"""Run configuration: dataclasses per section and an INI loader.

A config file has the sections ``[optics] [grid] [series] [wave] [solver] [run]``;
keys mirror the fields of the section's dataclass and values are converted
according to the field's declared type. Missing keys keep their defaults.
"""
import configparser
import dataclasses
import logging
import math

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Type, Union, get_type_hints

from .errors import ConfigError, ExitWaveError, ValidationError
from .fields import GridSpec, Vector
from .forward import Atom, NoiseModel, SyntheticWaveSpec, drift_sequence, focus_sequence, perovskite_wave_spec
from .optimizer import SolverConfig
from .tcc import OpticalParams

logger = logging.getLogger(__name__)

WAVE_PRESETS = ("perovskite", "atoms", "plane")


@dataclass(frozen=True)
class SeriesProtocol:
    """Foci, drift and noise of a simulated series.

    Attributes:
        count (int): Number of images when ``foci_nm`` is empty.
        focus_start_nm (float): First focus.
        focus_step_nm (float): Focus increment.
        foci_nm (Tuple[float, ...]): Explicit foci; overrides start/step/count when given.
        drift_step_nm (Tuple[float, ...]): Constant drift per image (row, column).
        noise_dose (float): Counts per pixel at unit intensity; 0 disables shot noise.
    """

    count: int = 12
    focus_start_nm: float = -10.0
    focus_step_nm: float = 1.5
    foci_nm: Tuple[float, ...] = ()
    drift_step_nm: Tuple[float, ...] = (0.017, 0.0)
    noise_dose: float = 0.0

    def foci(self) -> Tuple[float, ...]:
        """Focus of each image.

        Returns:
            Tuple[float, ...]: Explicit foci, or the equally spaced sequence.
        """
        if self.foci_nm:
            return tuple(self.foci_nm)
        return focus_sequence(self.focus_start_nm, self.focus_step_nm, self.count)

    def drifts(self) -> Tuple[Vector, ...]:
        """Cumulative drift of each image.

        Returns:
            Tuple[Vector, ...]: Drifts starting at (0, 0).
        """
        return drift_sequence(self.drift_step_nm, len(self.foci()))

    def noise(self, seed: int) -> Optional[NoiseModel]:
        """Shot-noise model, if enabled.

        Args:
            seed (int): Seed of the noise generator.

        Returns:
            Optional[NoiseModel]: None for noiseless data.
        """
        return NoiseModel(self.noise_dose, seed) if self.noise_dose > 0 else None


@dataclass(frozen=True)
class WaveConfig:
    """Synthetic ground-truth wave.

    Attributes:
        preset (str): ``perovskite``, ``atoms`` (use ``atoms``) or ``plane``.
        cell_nm (float): Perovskite cell edge.
        width_nm (float): Perovskite column width.
        cells (int): Perovskite cells per supercell edge.
        atoms (str): ``row col phase width gain`` per column, columns separated by ``;``.
        background (float): Amplitude away from the columns.
        period_nm (float): Period of the ``atoms`` wave; 0 uses the field of view.
    """

    preset: str = "perovskite"
    cell_nm: float = 0.4
    width_nm: float = 0.02
    cells: int = 1
    atoms: str = ""
    background: float = 1.0
    period_nm: float = 0.0

    def build(self, extent_nm: float) -> SyntheticWaveSpec:
        """Column description of the wave.

        Args:
            extent_nm (float): Field of view of the reconstruction grid.

        Returns:
            SyntheticWaveSpec: Wave description.

        Raises:
            ConfigError: On an unknown preset or malformed atom list.
        """
        if self.preset == "perovskite":
            return perovskite_wave_spec(self.cell_nm, self.width_nm, self.cells)
        if self.preset == "plane":
            return SyntheticWaveSpec((), self.background, extent_nm)
        if self.preset == "atoms":
            return SyntheticWaveSpec(parse_atoms(self.atoms), self.background, self.period_nm or extent_nm)
        raise ConfigError(f"unknown wave preset {self.preset!r}; expected one of {WAVE_PRESETS}")


@dataclass(frozen=True)
class RunSettings:
    """Settings of one command invocation.

    Attributes:
        seed (int): Seed of every random generator.
        output (str): Output directory.
        deterministic (bool): Zero timestamps so repeated runs give identical files.
        threads (int): FFT worker cap; 0 uses every core.
        n_focal (int): Focal nodes per kernel.
        subpixel (bool): Refine the correlation peaks of the translation start.
    """

    seed: int = 0
    output: str = "out"
    deterministic: bool = False
    threads: int = 0
    n_focal: int = 7
    subpixel: bool = True


@dataclass(frozen=True)
class RunConfig:
    """Everything a command needs.

    Attributes:
        optics (OpticalParams): Microscope constants.
        grid (GridSpec): Reconstruction grid; the series is simulated on its doubled grid.
        series (SeriesProtocol): Foci, drift and noise.
        wave (WaveConfig): Ground-truth wave.
        solver (SolverConfig): Reconstruction settings.
        run (RunSettings): Seed, output and run flags.
    """

    optics: OpticalParams = field(default_factory=OpticalParams)
    grid: GridSpec = field(default_factory=lambda: GridSpec(128, 0.4))
    series: SeriesProtocol = field(default_factory=SeriesProtocol)
    wave: WaveConfig = field(default_factory=WaveConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    run: RunSettings = field(default_factory=RunSettings)


SECTIONS: Dict[str, Type[Any]] = {
    "optics": OpticalParams,
    "grid": GridSpec,
    "series": SeriesProtocol,
    "wave": WaveConfig,
    "solver": SolverConfig,
    "run": RunSettings,
}


def parse_atoms(text: str) -> Tuple[Atom, ...]:
    """Parse ``row col phase width gain`` entries separated by ``;``.

    Args:
        text (str): Atom list; ``gain`` may be omitted.

    Returns:
        Tuple[Atom, ...]: Columns.

    Raises:
        ConfigError: If an entry does not have four or five numbers.
    """
    atoms: List[Atom] = []
    for entry in filter(None, (part.strip() for part in text.split(";"))):
        parts = entry.replace(",", " ").split()
        if len(parts) not in (4, 5):
            raise ConfigError(f"atom entry {entry!r} needs 'row col phase width [gain]'")
        try:
            values = [float(x) for x in parts]
            atoms.append(Atom((values[0], values[1]), values[2], values[3], values[4] if len(values) == 5 else 0.0))
        except (ValueError, ValidationError) as e:
            raise ConfigError(f"bad atom entry {entry!r}: {e}") from e
    return tuple(atoms)


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered not in configparser.ConfigParser.BOOLEAN_STATES:
        raise ValueError(f"not a boolean: {text!r}")
    return configparser.ConfigParser.BOOLEAN_STATES[lowered]


def _parse_floats(text: str) -> Tuple[float, ...]:
    return tuple(float(part) for part in text.split(",") if part.strip())


def _parse_optional_float(text: str) -> Optional[float]:
    return None if text.strip().lower() in ("", "none") else float(text)


_PARSERS: Dict[Any, Callable[[str], Any]] = {
    bool: _parse_bool,
    int: int,
    float: float,
    str: str,
    Tuple[float, ...]: _parse_floats,
    Vector: _parse_floats,
    Optional[float]: _parse_optional_float,
}


def _format(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    return str(value)


def _field_types(cls: Type[Any]) -> Dict[str, Any]:
    hints = get_type_hints(cls)
    return {f.name: hints[f.name] for f in dataclasses.fields(cls) if f.init}


def _convert(section: str, key: str, text: str) -> Any:
    types = _field_types(SECTIONS[section])
    if key not in types:
        raise ConfigError(f"unknown key {key!r} in section [{section}]; known keys: {', '.join(types)}")
    parser = _PARSERS.get(types[key])
    if parser is None:
        raise ConfigError(f"[{section}] {key} has an unsupported type {types[key]!r}")
    try:
        return parser(text)
    except ValueError as e:
        raise ConfigError(f"[{section}] {key} = {text!r}: {e}") from e


def _replace(config: RunConfig, section: str, values: Mapping[str, Any]) -> RunConfig:
    if not values:
        return config
    try:
        updated = dataclasses.replace(getattr(config, section), **values)
    except (ExitWaveError, ValueError, TypeError) as e:
        raise ConfigError(f"invalid [{section}] settings: {e}") from e
    return dataclasses.replace(config, **{section: updated})


def config_from_mapping(sections: Mapping[str, Mapping[str, str]], base: Optional[RunConfig] = None) -> RunConfig:
    """Build a config from section → key → text mappings.

    Args:
        sections (Mapping[str, Mapping[str, str]]): Raw values.
        base (Optional[RunConfig]): Config whose values are overridden (defaults when None).

    Returns:
        RunConfig: Validated config.

    Raises:
        ConfigError: On unknown sections or keys, unparsable values or an inconsistent result.
    """
    config = base or RunConfig()
    for section, entries in sections.items():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]; known sections: {', '.join(SECTIONS)}")
        values = {key: _convert(section, key, text) for key, text in entries.items()}
        config = _replace(config, section, values)
    validate_config(config)
    return config


def loads_config(text: str, source: str = "<string>") -> RunConfig:
    """Parse INI text.

    Args:
        text (str): Config text.
        source (str): Name used in error messages.

    Returns:
        RunConfig: Validated config.

    Raises:
        ConfigError: On syntax errors, an empty config or invalid values.
    """
    parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
    parser.optionxform = str  # type: ignore[assignment,method-assign]
    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigError(f"{source}: {e}") from e
    if not parser.sections():
        raise ConfigError(f"{source}: the config defines no sections")
    return config_from_mapping({name: dict(parser[name]) for name in parser.sections()})


def load_config(path: Union[str, Path]) -> RunConfig:
    """Read and validate a config file.

    Args:
        path (Union[str, Path]): INI file.

    Returns:
        RunConfig: Validated config.

    Raises:
        ConfigError: If the file cannot be read or is invalid.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    config = loads_config(text, str(path))
    logger.debug("loaded config %s", path)
    return config


def apply_overrides(config: RunConfig, overrides: Sequence[str]) -> RunConfig:
    """Apply ``section.key=value`` overrides.

    Args:
        config (RunConfig): Base config.
        overrides (Sequence[str]): Override strings.

    Returns:
        RunConfig: Updated, validated config.

    Raises:
        ConfigError: On malformed overrides or invalid values.
    """
    sections: Dict[str, Dict[str, str]] = {}
    for item in overrides:
        target, sep, value = item.partition("=")
        section, dot, key = target.strip().partition(".")
        if not sep or not dot or not section or not key:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        sections.setdefault(section, {})[key] = value.strip()
    return config_from_mapping(sections, config)


def config_sections(config: RunConfig) -> Dict[str, Dict[str, str]]:
    """Text form of every field, section by section.

    Args:
        config (RunConfig): Config to render.

    Returns:
        Dict[str, Dict[str, str]]: Section → key → value text.
    """
    return {name: {key: _format(getattr(getattr(config, name), key)) for key in _field_types(cls)}
            for name, cls in SECTIONS.items()}


def dump_config(config: RunConfig) -> str:
    """Render a config as INI text that :func:`loads_config` reads back to an equal config.

    Args:
        config (RunConfig): Config to render.

    Returns:
        str: INI text.
    """
    lines: List[str] = []
    for name, entries in config_sections(config).items():
        lines.append(f"[{name}]")
        lines.extend(f"{key} = {value}" for key, value in entries.items())
        lines.append("")
    return "\n".join(lines)


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def validate_config(config: RunConfig) -> None:
    """Cross-section checks that the dataclasses cannot make on their own.

    Args:
        config (RunConfig): Config to check.

    Raises:
        ConfigError: If the config is inconsistent.
    """
    grid, series, run = config.grid, config.series, config.run
    if not _is_power_of_two(grid.n):
        raise ConfigError(f"grid n must be a power of two, got {grid.n}")
    if not series.foci_nm and series.count < 1:
        raise ConfigError(f"series count must be at least 1, got {series.count}")
    if not all(math.isfinite(z) for z in series.foci()):
        raise ConfigError("foci must be finite")
    if len(series.drift_step_nm) != 2 or not all(math.isfinite(c) for c in series.drift_step_nm):
        raise ConfigError(f"drift_step_nm must be a finite 2-vector, got {series.drift_step_nm!r}")
    if not (math.isfinite(series.noise_dose) and series.noise_dose >= 0):
        raise ConfigError(f"noise_dose must be >= 0, got {series.noise_dose!r}")
    if run.n_focal < 1 or run.n_focal % 2 == 0:
        raise ConfigError(f"n_focal must be a positive odd integer, got {run.n_focal}")
    if run.threads < 0:
        raise ConfigError(f"threads must be >= 0, got {run.threads}")
    if not run.output:
        raise ConfigError("run output directory must not be empty")
    if config.wave.preset not in WAVE_PRESETS:
        raise ConfigError(f"unknown wave preset {config.wave.preset!r}; expected one of {WAVE_PRESETS}")
    if config.wave.preset == "atoms":
        parse_atoms(config.wave.atoms)
    band = 2.0 * config.optics.aperture_radius
    if band > grid.nyquist:
        raise ConfigError(f"the intensity band 2r_a = {band:.4g} nm^-1 exceeds the grid's Nyquist "
                          f"frequency {grid.nyquist:.4g} nm^-1; use more pixels or a smaller field")

"""Scenario files: parse, serialize, run and write CSV tables with plot scripts."""
import hashlib
import math
import re
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import tomli_w
from pydantic import BaseModel, ValidationError

from .errors import ConfigError, ScenarioError, SpinChainError
from .exact import MAX_SITES, exact_measure_grid
from .fermions import XYParams, correlator_grids, xy_measure_grid
from .hilbert import ChainSpec, Sector, SectorAmplitudes, embed
from .logger_config import setup_logger
from .magnons import (
    HarperParams,
    HeisenbergParams,
    measure_grid,
    one_magnon_initial,
    vacuum_two_magnon_initial,
)
from .measures import build_pq_mixture, tmi, tmi_map, tmi_sign
from .operations import MeasureType, Parties, format_parties, measure_accepts
from .qdp import delta_surfaces
from .schemas import InitialPreset, ScenarioConfig

logger = setup_logger(__name__)

PRESETS_DIR = Path(__file__).resolve().parent.parent / "presets"
CSV_HEADER = "row,col,value"


@dataclass(frozen=True)
class GridRecord:
    row: float
    col: float
    measure: str
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ScenarioError(f"Non-finite {self.measure} value at row={self.row}, col={self.col}")


@dataclass
class GridTable:
    """One emitted CSV: records in row-major order."""

    name: str
    measure: str
    row_label: str
    col_label: str
    records: list[GridRecord] = field(default_factory=list)

    @classmethod
    def from_grid(cls, name, measure, row_label, col_label, rows, cols, values) -> "GridTable":
        values = np.asarray(values, dtype=float).reshape(len(rows), len(cols))
        records = [
            GridRecord(float(r), float(c), measure, float(values[i, j]))
            for i, r in enumerate(rows)
            for j, c in enumerate(cols)
        ]
        return cls(name, measure, row_label, col_label, records)

    def matrix(self) -> np.ndarray:
        rows = sorted({r.row for r in self.records})
        cols = sorted({r.col for r in self.records})
        grid = np.full((len(rows), len(cols)), np.nan)
        for rec in self.records:
            grid[rows.index(rec.row), cols.index(rec.col)] = rec.value
        return grid


def parse_config(text: str) -> ScenarioConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"Invalid scenario TOML: {exc}") from None
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in exc.errors()
        )
        raise ConfigError(f"Invalid scenario: {problems}") from None


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"Cannot read scenario {path}: {exc.strerror}") from None
    return parse_config(text)


def serialize_config(config: ScenarioConfig) -> str:
    return tomli_w.dumps(config.model_dump(mode="json", exclude_none=True))


def scenario_hash(config: ScenarioConfig) -> str:
    return hashlib.sha256(serialize_config(config).encode("utf-8")).hexdigest()[:16]


def list_presets() -> list[str]:
    return sorted(p.stem for p in PRESETS_DIR.glob("*.toml"))


def load_preset(name: str) -> ScenarioConfig:
    path = PRESETS_DIR / f"{name}.toml"
    if not path.is_file():
        raise ConfigError(f"Unknown preset {name!r}; available: {', '.join(list_presets())}")
    return load_config(path)


def _slug(text: str) -> str:
    text = text.replace(":", "-").replace(",", "_")
    return re.sub(r"[^A-Za-z0-9_.=-]+", "_", text).strip("_")


def _sweep_suffix(config: ScenarioConfig, value: Optional[float]) -> str:
    if value is None:
        return ""
    return f"_{config.sweep.parameter}={value:g}"


def initial_state(config: ScenarioConfig, chain: Optional[ChainSpec] = None) -> SectorAmplitudes:
    chain = chain or config.chain
    init = config.initial
    if init.preset == InitialPreset.one_magnon_pair:
        return one_magnon_initial(chain, init.alpha_value, init.beta_value)
    if init.preset == InitialPreset.vacuum_two_magnon_pair:
        return vacuum_two_magnon_initial(chain, init.alpha_value, init.beta_value)
    raise ScenarioError("The p,q mixture is not a chain state; use the tmi command")


def _targets(config: ScenarioConfig) -> list[tuple[MeasureType, str, list[Parties]]]:
    """(measure, party entry, expanded parties) for every compatible combination."""
    targets = []
    for measure in config.measures:
        for entry in config.parties:
            groups = [p for p in config.party_groups(entry) if measure_accepts(measure, p)]
            if groups:
                targets.append((measure, entry, groups))
    return targets


def _is_nn(groups: Sequence[Parties], chain: ChainSpec) -> bool:
    return list(groups) == [((i,), (i + 1,)) for i in range(1, chain.n_sites)]


def _grid_for(config, model, measure, groups, times, threads) -> np.ndarray:
    chain = config.chain
    engine = config.output.engine
    initial = initial_state(config)
    if isinstance(model, (HeisenbergParams, HarperParams)) and engine != "exact":
        return measure_grid(chain, model, initial, measure, groups, times, threads)
    if (
        isinstance(model, XYParams)
        and engine != "exact"
        and initial.sector == Sector.one_magnon
        and chain.n_sites % 2 == 0
        and measure != MeasureType.tmi
        and _is_nn(groups, chain)
    ):
        init = config.initial
        return xy_measure_grid(chain, model, init.alpha_value, init.beta_value, measure, times, threads)
    if engine == "analytic":
        raise ScenarioError(f"No analytic path for {measure.value} on {model.name}")
    if chain.n_sites > MAX_SITES:
        raise ScenarioError(f"Exact path needs N <= {MAX_SITES}; this scenario has N={chain.n_sites}")
    return exact_measure_grid(chain, model, embed(initial).amplitudes, measure, groups, times)


def run_evolve(config: ScenarioConfig, threads: int = 1) -> list[GridTable]:
    times = config.grid.times()
    tables = []
    for value, model in config.swept_models():
        for measure, entry, groups in _targets(config):
            grid = _grid_for(config, model, measure, groups, times, threads)
            name = f"{measure.value}_{_slug(entry)}{_sweep_suffix(config, value)}"
            row_label = "pair" if entry.strip() == "nn" else "party"
            tables.append(
                GridTable.from_grid(name, measure.value, row_label, "t", range(1, len(groups) + 1), times, grid)
            )
        if config.output.correlators and isinstance(model, XYParams):
            init = config.initial
            grids = correlator_grids(config.chain, model, init.alpha_value, init.beta_value, times, threads)
            for key, grid in grids.items():
                name = f"{key}_nn{_sweep_suffix(config, value)}"
                tables.append(
                    GridTable.from_grid(name, key, "pair", "t", range(1, config.chain.n_sites), times, grid)
                )
    return tables


def run_qdp_sweep(config: ScenarioConfig, threads: int = 1) -> list[GridTable]:
    if config.qdp is None:
        raise ScenarioError("qdp-sweep needs a [qdp] section")
    times, epochs = config.grid.times(), config.grid.epochs()
    targets = [(m, p) for m, _, groups in _targets(config) for p in groups]
    initial = initial_state(config)
    tables = []
    for value, model in config.swept_models():
        result = delta_surfaces(
            initial, model, config.qdp, times, epochs, targets, threads, config.output.engine
        )
        for key, surface in result.surfaces.items():
            measure = key.split("(")[0]
            name = f"{_slug(key)}{_sweep_suffix(config, value)}"
            tables.append(GridTable.from_grid(name, measure, "t0", "t", epochs, times, surface))
    return tables


def _run_pq(config: ScenarioConfig) -> list[GridTable]:
    init = config.initial
    if init.p is not None:
        value = tmi(build_pq_mixture(init.p, init.q))
        return [GridTable("tmi_pq_point", "tmi", "p", "q", [GridRecord(init.p, init.q, "tmi", value)])]
    steps = config.grid.pq_steps
    cells = tmi_map(steps, steps)
    landscape = [GridRecord(p, q, "tmi", value) for p, q, value in cells]
    signs = [GridRecord(p, q, "tmi_sign", float(tmi_sign(value))) for p, q, value in cells]
    return [
        GridTable("tmi_pq_landscape", "tmi", "p", "q", landscape),
        GridTable("tmi_pq_sign", "tmi_sign", "p", "q", signs),
    ]


def run_tmi(config: ScenarioConfig, threads: int = 1) -> list[GridTable]:
    if config.initial.preset == InitialPreset.pq_mixture:
        return _run_pq(config)
    times = config.grid.times()
    triples = [(entry, groups) for m, entry, groups in _targets(config) if m == MeasureType.tmi]
    if not triples:
        raise ScenarioError("tmi needs the tmi measure and at least one three-party entry")
    swept = config.swept_models()
    tables = []
    for entry, groups in triples:
        for parties in groups:
            rows = [
                _grid_for(config, model, MeasureType.tmi, [parties], times, threads)[0]
                for _, model in swept
            ]
            labels = [v if v is not None else 0.0 for v, _ in swept]
            name = f"tmi_{_slug(format_parties(parties))}"
            row_label = "run"
            if config.sweep is not None:
                name += f"_vs_{config.sweep.parameter}"
                row_label = config.sweep.parameter
            tables.append(GridTable.from_grid(name, "tmi", row_label, "t", labels, times, rows))
    return tables


_COMMANDS = {
    "evolve": run_evolve,
    "qdp-sweep": run_qdp_sweep,
    "tmi": run_tmi,
}


def run_scenario(config: ScenarioConfig, command: str = "evolve", threads: int = 1) -> list[GridTable]:
    runner = _COMMANDS.get(command)
    if runner is None:
        raise KeyError(f"Unknown scenario command: {command}")
    digest = scenario_hash(config)
    logger.info(f"Running {command} for scenario {digest} (model={config.model.name}, N={config.chain.n_sites})")
    try:
        return runner(config, threads)
    except ScenarioError:
        raise
    except SpinChainError as exc:
        raise ScenarioError(f"{command} failed for scenario {digest} ({config.model.name}): {exc}") from exc


def _header(config: ScenarioConfig, table: GridTable) -> str:
    model: BaseModel = config.model
    return (
        f"# scenario-hash={scenario_hash(config)}, model={model.name}, params={model.model_dump_json()}"
        f"; measure={table.measure}, rows={table.row_label}, cols={table.col_label}"
    )


_AXES = re.compile(r"; measure=(?P<measure>[^,]+), rows=(?P<rows>[^,]+), cols=(?P<cols>\S+)\s*$")


def _format(value: float) -> str:
    return f"{value:.12g}"


def write_table(table: GridTable, path: Path, header: str) -> None:
    lines = [header, CSV_HEADER]
    lines.extend(f"{_format(r.row)},{_format(r.col)},{_format(r.value)}" for r in table.records)
    try:
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"Cannot write {path}: {exc.strerror}") from None


PLOT_TEMPLATE = '''"""Heatmap of {csv_name}."""
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

HERE = Path(__file__).resolve().parent
data = np.loadtxt(HERE / "{csv_name}", delimiter=",", skiprows=2, ndmin=2)
fig, ax = plt.subplots(figsize=(6, 4))
if data.size:
    rows, cols = np.unique(data[:, 0]), np.unique(data[:, 1])
    grid = np.full((rows.size, cols.size), np.nan)
    grid[np.searchsorted(rows, data[:, 0]), np.searchsorted(cols, data[:, 1])] = data[:, 2]
    if rows.size == 1:
        ax.plot(cols, grid[0])
        ax.set_ylabel("{measure}")
    else:
        mesh = ax.pcolormesh(cols, rows, grid, shading="nearest", cmap="viridis")
        fig.colorbar(mesh, ax=ax, label="{measure}")
        ax.set_ylabel("{row_label}")
ax.set_xlabel("{col_label}")
ax.set_title("{title}")
fig.tight_layout()
fig.savefig(HERE / "{png_name}", dpi=150)
'''


def plot_script(csv_name: str, measure: str, row_label: str, col_label: str) -> str:
    stem = csv_name.rsplit(".", 1)[0]
    return PLOT_TEMPLATE.format(
        csv_name=csv_name,
        png_name=f"{stem}.png",
        measure=measure,
        row_label=row_label,
        col_label=col_label,
        title=stem,
    )


def emit_outputs(tables: Iterable[GridTable], directory: str | Path, config: ScenarioConfig) -> list[Path]:
    """Write one CSV and one plot script per table; returns the CSV paths."""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ScenarioError(f"Cannot create {directory}: {exc.strerror}") from None
    written = []
    for table in tables:
        csv_path = directory / f"{table.name}.csv"
        write_table(table, csv_path, _header(config, table))
        script = plot_script(csv_path.name, table.measure, table.row_label, table.col_label)
        csv_path.with_name(f"{table.name}_plot.py").write_text(script, encoding="utf-8")
        written.append(csv_path)
    logger.info(f"Wrote {len(written)} tables to {directory}")
    return written


def read_axes(csv_path: Path) -> tuple[str, str, str]:
    """(measure, row label, column label) from the first line of an emitted CSV."""
    with csv_path.open(encoding="utf-8") as fh:
        first = fh.readline()
    match = _AXES.search(first)
    if match is None:
        raise ScenarioError(f"{csv_path.name} has no measure/axis header; was it written by spinchain?")
    return match["measure"], match["rows"], match["cols"]


def emit_plot_scripts(directory: str | Path) -> list[Path]:
    """Regenerate the plot script of every CSV in a directory."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ScenarioError(f"No such output directory: {directory}")
    scripts = []
    for csv_path in sorted(directory.glob("*.csv")):
        measure, row_label, col_label = read_axes(csv_path)
        script_path = csv_path.with_name(f"{csv_path.stem}_plot.py")
        script_path.write_text(plot_script(csv_path.name, measure, row_label, col_label), encoding="utf-8")
        scripts.append(script_path)
    return scripts

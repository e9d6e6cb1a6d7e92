"""Scenario files: parsing, validation, execution and CSV output.

A scenario is a JSON document describing a spin network (or a two-qubit
reservoir model), an initial product state and the directed flows to
compute. See ``docs/scenario-schema.md`` for the full schema.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from . import bath, core
from .core import DensityMatrix, SiteRegistry
from .errors import ConfigError, FlowRequestError, RegistryError
from .flow import RATE_MODES, FlowRequest, FlowSeries, cumulative_flow
from .hamiltonians import HamiltonianSpec, build_field_z, build_xy_coupling

log = logging.getLogger(__name__)

CSV_COLUMNS = ("t", "S_target", "S_target_frozen", "T_cum_bits", "T_rate_bits_per_time")
PROB_TOL = 1e-9


@dataclass
class FlowSpec:
    sources: tuple[str, ...]
    target: tuple[str, ...]

    @property
    def tag(self) -> str:
        return f"{''.join(self.sources)}_to_{''.join(self.target)}"


@dataclass
class BathSpec:
    lam: float
    big_r: float
    alpha_ratio: float
    n_modes: int = bath.DEFAULT_MODES
    cutoff_width: float | None = None
    omega0: float = 0.0
    psi0: dict[str, float] = field(default_factory=lambda: {"10": 2**0.5, "01": 1.0})


@dataclass
class ScenarioConfig:
    name: str
    sites: list[tuple[str, int]]
    couplings: list[tuple[str, str, float]]
    fields_z: list[tuple[str, float]]
    initial: dict[str, Any]
    flows: list[FlowSpec]
    t_max: float
    steps: int
    rate_mode: str = "from_start"
    output_dir: str | None = None
    svg: bool = False
    bath: BathSpec | None = None
    description: str = ""

    @property
    def registry(self) -> SiteRegistry:
        return SiteRegistry(tuple(self.sites))


def _fail(msg: str):
    raise ConfigError(msg)


def _site_list(raw) -> list[tuple[str, int]]:
    if not isinstance(raw, list) or not raw:
        _fail("'sites' must be a nonempty list")
    out = []
    for item in raw:
        if isinstance(item, str):
            out.append((item, 2))
        elif isinstance(item, dict) and "label" in item:
            out.append((str(item["label"]), int(item.get("dim", 2))))
        else:
            _fail(f"bad site entry {item!r}")
        if out[-1][1] < 2:
            _fail(f"site {out[-1][0]!r} needs dimension >= 2")
    return out


def _labels(raw, what) -> tuple[str, ...]:
    if isinstance(raw, str):
        return (raw,)
    if isinstance(raw, list) and raw and all(isinstance(x, str) for x in raw):
        return tuple(raw)
    _fail(f"{what} must be a site label or a nonempty list of labels")


def parse_config(data: dict) -> ScenarioConfig:
    """Validate a decoded JSON scenario; raises :class:`ConfigError`."""
    if not isinstance(data, dict):
        _fail("scenario must be a JSON object")
    name = str(data.get("name", "scenario"))
    sites = _site_list(data.get("sites"))
    labels = [s for s, _ in sites]
    if len(set(labels)) != len(labels):
        _fail(f"duplicate site labels {labels}")
    dims = dict(sites)

    def known(label, where):
        if label not in dims:
            _fail(f"{where} references undeclared site {label!r}")

    couplings = []
    for entry in data.get("couplings", []):
        if not (isinstance(entry, list) and len(entry) == 3):
            _fail(f"coupling {entry!r} must be [i, j, eta]")
        i, j, eta = entry
        known(i, "coupling")
        known(j, "coupling")
        if i == j:
            _fail(f"coupling {entry!r} joins a site to itself")
        if dims[i] != 2 or dims[j] != 2:
            _fail("XY couplings need qubit sites")
        couplings.append((i, j, float(eta)))

    fields = []
    for entry in data.get("fields_z", []):
        if not (isinstance(entry, list) and len(entry) == 2):
            _fail(f"field {entry!r} must be [site, b]")
        site, b = entry
        known(site, "field")
        if dims[site] != 2:
            _fail("z fields need qubit sites")
        fields.append((site, float(b)))

    flows = []
    raw_flows = data.get("flows")
    if not isinstance(raw_flows, list) or not raw_flows:
        _fail("'flows' must list at least one flow")
    for entry in raw_flows:
        if not isinstance(entry, dict):
            _fail(f"flow {entry!r} must be an object")
        src = _labels(entry.get("sources"), "flow sources")
        tgt = _labels(entry.get("target"), "flow target")
        for label in src + tgt:
            known(label, "flow")
        if set(src) & set(tgt):
            _fail(f"flow {entry!r} has overlapping sources and target")
        flows.append(FlowSpec(src, tgt))

    grid = data.get("grid", {})
    try:
        t_max = float(grid["t_max"])
        steps = int(grid["steps"])
    except (KeyError, TypeError, ValueError):
        _fail("'grid' needs numeric t_max and steps")
    if t_max <= 0 or steps < 2:
        _fail("grid needs t_max > 0 and steps >= 2")

    rate_mode = data.get("rate_mode", "from_start")
    if rate_mode not in RATE_MODES:
        _fail(f"rate_mode must be one of {RATE_MODES}")

    outputs = data.get("outputs", {})
    bath_spec = None
    initial = data.get("initial", {})
    if "bath" in data:
        bath_spec = _parse_bath(data["bath"])
        if labels != ["A", "B"] or couplings or fields:
            _fail("bath scenarios use exactly sites ['A', 'B'] and no couplings or fields")
    else:
        for label in labels:
            if label not in initial:
                _fail(f"no initial state for site {label!r}")
            _local_state(initial[label], dims[label])
        for label in initial:
            known(label, "initial")

    return ScenarioConfig(
        name=name, sites=sites, couplings=couplings, fields_z=fields, initial=initial,
        flows=flows, t_max=t_max, steps=steps, rate_mode=rate_mode,
        output_dir=outputs.get("directory"), svg=bool(outputs.get("svg", False)),
        bath=bath_spec, description=str(data.get("description", "")),
    )


def _parse_bath(raw) -> BathSpec:
    if not isinstance(raw, dict):
        _fail("'bath' must be an object")
    try:
        spec = BathSpec(
            lam=float(raw["lambda"]),
            big_r=float(raw["big_r"]),
            alpha_ratio=float(raw["alpha_ratio"]),
            n_modes=int(raw.get("n_modes", bath.DEFAULT_MODES)),
            cutoff_width=None if raw.get("cutoff_width") is None else float(raw["cutoff_width"]),
            omega0=float(raw.get("omega0", 0.0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        _fail(f"bad bath block: {exc}")
    if "psi0" in raw:
        psi = raw["psi0"]
        if not isinstance(psi, dict) or set(psi) - {"10", "01"} or not psi:
            _fail("bath psi0 maps '10' and/or '01' to amplitudes")
        spec.psi0 = {k: float(v) for k, v in psi.items()}
    return spec


def _basis_index(label: str, d: int) -> int:
    try:
        k = int(label)
    except ValueError:
        _fail(f"basis state {label!r} is not an integer index")
    if not 0 <= k < d:
        _fail(f"basis state {label!r} outside dimension {d}")
    return k


def _pure(label: str, d: int) -> np.ndarray:
    if label == "+":
        if d != 2:
            _fail("'+' is a qubit state")
        psi = np.array([1, 1], dtype=complex) / np.sqrt(2)
        return np.outer(psi, psi.conj())
    return core.basis_projector(d, _basis_index(label, d))


def _local_state(spec, d: int) -> np.ndarray:
    if spec == "maximally_mixed":
        return core.maximally_mixed(d)
    if isinstance(spec, dict) and "pure" in spec:
        return _pure(str(spec["pure"]), d)
    if isinstance(spec, dict) and "mixed" in spec:
        entries = spec["mixed"]
        if not isinstance(entries, list) or not entries:
            _fail("'mixed' needs a list of [p, state] pairs")
        total = sum(float(p) for p, _ in entries)
        if abs(total - 1.0) > PROB_TOL:
            _fail(f"mixture probabilities sum to {total}, not 1")
        if any(float(p) < 0 for p, _ in entries):
            _fail("mixture probabilities must be nonnegative")
        return sum(float(p) * _pure(str(s), d) for p, s in entries)
    _fail(f"unrecognised local state {spec!r}")


def build_hamiltonian(cfg: ScenarioConfig) -> HamiltonianSpec:
    reg = cfg.registry
    terms = [t for i, j, eta in cfg.couplings for t in build_xy_coupling(i, j, eta)]
    terms += [build_field_z(site, b, reg) for site, b in cfg.fields_z]
    return HamiltonianSpec(reg, tuple(terms))


def build_initial(cfg: ScenarioConfig) -> DensityMatrix:
    reg = cfg.registry
    local = {label: _local_state(cfg.initial[label], d) for label, d in reg.sites}
    return DensityMatrix.product(reg, local)


def build_requests(cfg: ScenarioConfig) -> list[FlowRequest]:
    h = build_hamiltonian(cfg)
    rho0 = build_initial(cfg)
    return [
        FlowRequest(h, rho0, f.target, f.sources, cfg.t_max, cfg.steps, cfg.rate_mode)
        for f in cfg.flows
    ]


def _bath_state(spec: BathSpec, n_modes: int) -> bath.SingleExcitationState:
    c_a = spec.psi0.get("10", 0.0)
    c_b = spec.psi0.get("01", 0.0)
    norm = np.hypot(c_a, c_b)
    if norm == 0:
        _fail("bath psi0 is the zero vector")
    return bath.SingleExcitationState.qubits(c_a / norm, c_b / norm, n_modes)


def run_flows(cfg: ScenarioConfig) -> list[FlowSeries]:
    """Compute every flow of a scenario, in file order."""
    if cfg.bath is not None:
        b = cfg.bath
        reservoir = bath.discretize_lorentzian(b.lam, b.big_r, b.omega0, b.n_modes, b.cutoff_width)
        psi0 = _bath_state(b, reservoir.n_modes)
        alpha_a, alpha_b = bath.normalized_alphas(b.alpha_ratio)
        out = []
        for f in cfg.flows:
            if len(f.sources) != 1 or len(f.target) != 1:
                _fail("bath flows run between single qubits")
            out.append(bath.bath_flow(
                psi0, reservoir, alpha_a, alpha_b, f.sources[0], f.target[0], cfg.t_max, cfg.steps
            ))
        return out
    try:
        requests = build_requests(cfg)
    except (FlowRequestError, RegistryError) as exc:
        raise ConfigError(str(exc)) from exc
    return [cumulative_flow(req) for req in requests]


def _fmt(x: float) -> str:
    s = f"{x:.12g}"
    return "0" if s == "-0" else s


def write_series_csv(series: FlowSeries, path: Path) -> None:
    cols = (series.times, series.s_target, series.s_target_frozen, series.cumulative, series.rate)
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in zip(*cols):
            writer.writerow([_fmt(v) for v in row])


def write_summary_csv(series: list[FlowSeries], path: Path) -> None:
    """Time column plus one cumulative-flow column per flow."""
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t"] + [f"T_{s.name}" for s in series])
        for k, t in enumerate(series[0].times):
            writer.writerow([_fmt(t)] + [_fmt(s.cumulative[k]) for s in series])


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config(data)


def bundled_names() -> list[str]:
    root = resources.files("qliang") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def bundled_path(name: str) -> Path:
    path = Path(str(resources.files("qliang") / "scenarios" / f"{name}.json"))
    if not path.exists():
        raise ConfigError(f"no bundled scenario {name!r}; known: {', '.join(bundled_names())}")
    return path


def load_bundled(name: str) -> ScenarioConfig:
    return load_config(bundled_path(name))


def resolve_config_path(ref: str) -> Path:
    """A filesystem path, or the name of a bundled scenario."""
    path = Path(ref)
    if path.exists():
        return path
    return bundled_path(ref)


def run_scenario(ref: str | Path, out_dir: str | Path | None = None, svg: bool | None = None) -> list[Path]:
    """Run a scenario and write its CSV (and optional SVG) artifacts.

    Returns the written paths: one CSV per flow, then the summary CSV, then
    any SVGs.
    """
    cfg = load_config(resolve_config_path(str(ref)))
    series = run_flows(cfg)
    out = Path(out_dir or cfg.output_dir or Path("out") / cfg.name)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for f, s in zip(cfg.flows, series):
        path = out / f"{cfg.name}__{f.tag}.csv"
        write_series_csv(s, path)
        written.append(path)
    summary = out / f"{cfg.name}__summary.csv"
    write_summary_csv(series, summary)
    written.append(summary)
    if cfg.svg if svg is None else svg:
        from .plotting import plot

        for path in list(written):
            svg_path = path.with_suffix(".svg")
            plot(path, svg_path)
            written.append(svg_path)
    log.info("scenario %s: wrote %d files to %s", cfg.name, len(written), out)
    return written

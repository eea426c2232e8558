"""YAML scenario files: schema, validation and problem construction.

A scenario names one problem kind (``toy``, ``wlp`` or ``wsn``), carries the
matching section, the search configuration and a seed.  Validation is strict:
unknown keys are errors and every diagnostic names the offending field path.
"""
from __future__ import annotations

import hashlib
import json
import re
from pathlib import Path
from typing import Any, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from pmots.fixtures import random_sites, random_walls
from pmots.oracle import DEFAULT_CAP
from pmots.tabu import PmotsConfig, ProblemAdapter
from pmots.toy import ChainProblem


class ScenarioError(ValueError):
    """The scenario file is unreadable or invalid; ``errors`` lists ``path: message`` lines."""

    def __init__(self, errors: list[str]) -> None:
        super().__init__("\n".join(errors))
        self.errors = errors


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SearchSection(_Strict):
    paths: int = Field(3, ge=1)
    iterations: int = Field(100, ge=0)
    max_rank: int = Field(1, ge=1)
    tenure_min: int = Field(1, ge=1)
    tenure_max: int = Field(5, ge=1)
    threads: int = Field(1, ge=1)
    aspiration: bool = False
    checkpoint_every: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def _tenure_order(self) -> "SearchSection":
        if self.tenure_min > self.tenure_max:
            raise ValueError(f"tenure_min ({self.tenure_min}) must not exceed tenure_max ({self.tenure_max})")
        return self


class ToySection(_Strict):
    size: int = Field(16, ge=1)


class FloorSection(_Strict):
    width_m: float = Field(gt=0)
    height_m: float = Field(gt=0)
    pixel_m: float = Field(gt=0)
    blocks_x: int = Field(ge=1)
    blocks_y: int = Field(ge=1)


class RandomSites(_Strict):
    count: int = Field(ge=1)
    seed: int = 0
    margin_m: float = Field(0.0, ge=0)


class WallSpec(_Strict):
    x1: float
    y1: float
    x2: float
    y2: float
    loss_db: float = Field(ge=0)


class RandomWalls(_Strict):
    count: int = Field(ge=0)
    seed: int = 0
    loss_db: tuple[float, float] = (3.0, 10.0)


class RadioSection(_Strict):
    pl0_db: float = 40.0
    exponent: float = Field(3.0, gt=0)
    d0_m: float = Field(1.0, gt=0)
    noise_floor_dbm: float = -100.0
    front_to_back_db: float = Field(0.0, ge=0)


class PenaltySection(_Strict):
    s_min: float
    s_max: float
    delta: float = Field(1.0, gt=0)
    maximize: bool = True

    @model_validator(mode="after")
    def _order(self) -> "PenaltySection":
        if not self.s_min < self.s_max:
            raise ValueError("s_min must be below s_max")
        return self


class WlpSection(_Strict):
    floor: FloorSection
    sites: Union[list[tuple[float, float]], RandomSites]
    powers_dbm: list[float] = Field(min_length=1)
    directions_deg: list[float] = Field([0.0], min_length=1)
    walls: Union[list[WallSpec], RandomWalls] = []
    radio: RadioSection = RadioSection()
    coverage: PenaltySection
    interference: PenaltySection
    qos: PenaltySection
    rate_tiers: list[tuple[float, float]] = Field(min_length=1)
    users: float = Field(200.0, ge=0)
    add_power: int = -1
    add_direction: int = Field(0, ge=0)
    first_path_aps: int = Field(4, ge=0)
    max_active: Optional[int] = Field(None, ge=0)
    tensor_cache: Optional[str] = None

    @field_validator("sites")
    @classmethod
    def _non_empty(cls, v):
        if isinstance(v, list) and not v:
            raise ValueError("at least one site is required")
        return v


class TopologySection(_Strict):
    density: float = Field(gt=0)
    radius_m: float = Field(gt=0)
    nodes: int = Field(ge=2)
    seed: int = 0
    tx_power_w: float = Field(0.1, gt=0)
    tx_energy_j: float = Field(1.0, ge=0)


class ExplicitTopology(_Strict):
    positions: list[tuple[float, float]] = Field(min_length=2)
    sources: list[int] = Field(min_length=1)
    destinations: list[int] = Field(min_length=1)
    tx_power_w: Union[float, list[float]] = 0.1
    tx_energy_j: Union[float, list[float]] = 1.0


class LinkSection(_Strict):
    exponent: float = Field(3.0, gt=0)
    d0_m: float = Field(1.0, gt=0)
    gamma: float = Field(1.0 / 16.0, ge=0)
    noise_w: float = Field(1e-3, gt=0)
    beta: float = Field(1.0, gt=0)
    packet_bits: float = Field(1.0, gt=0)


class WsnSection(_Strict):
    topology: Union[TopologySection, ExplicitTopology]
    link: LinkSection = LinkSection()
    levels: list[float] = [0.0, 1.0]
    hmax: int = Field(4, ge=1)
    default_level: Optional[float] = None
    max_active: Optional[int] = Field(None, ge=0)
    two_objective: bool = False
    infeasible_tol: float = Field(0.0, ge=0)
    first_path_forwarders: int = Field(1, ge=0)


class OracleSection(_Strict):
    min_active: int = Field(0, ge=0)
    max_active: Optional[int] = Field(None, ge=0)
    cap: int = Field(DEFAULT_CAP, ge=1)


class ValidateSection(_Strict):
    trials: int = 100_000
    seed: int = 0
    random_solutions: int = Field(3, ge=0)


class Scenario(_Strict):
    problem: Literal["toy", "wlp", "wsn"]
    seed: int = 0
    output_dir: Optional[str] = None
    search: SearchSection = SearchSection()
    toy: Optional[ToySection] = None
    wlp: Optional[WlpSection] = None
    wsn: Optional[WsnSection] = None
    oracle: OracleSection = OracleSection()
    validate_wsn: ValidateSection = ValidateSection()

    @model_validator(mode="after")
    def _one_section(self) -> "Scenario":
        for kind in ("toy", "wlp", "wsn"):
            present = getattr(self, kind) is not None
            if kind == self.problem and not present and kind != "toy":
                raise ValueError(f"problem '{kind}' needs a '{kind}' section")
            if kind != self.problem and present:
                raise ValueError(f"section '{kind}' does not match problem '{self.problem}'")
        return self

    def pmots_config(self, seed: Optional[int] = None) -> PmotsConfig:
        s = self.search
        return PmotsConfig(paths=s.paths, iterations=s.iterations, max_rank=s.max_rank,
                           tenure_min=s.tenure_min, tenure_max=s.tenure_max,
                           seed=self.seed if seed is None else seed, threads=s.threads,
                           aspiration=s.aspiration)


def _format_errors(exc: ValidationError) -> list[str]:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        msg = err["msg"].removeprefix("Value error, ")
        lines.append(f"{loc}: {msg}")
    return lines


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e6``-style exponents as floats (YAML 1.2 behaviour)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
    |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
    |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
    |[-+]?\.(?:inf|Inf|INF)
    |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."),
)


def parse_scenario(text: str) -> Scenario:
    try:
        data = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        raise ScenarioError([f"<yaml>: {exc}"]) from exc
    if not isinstance(data, dict):
        raise ScenarioError(["<root>: scenario must be a mapping"])
    try:
        # JSON-mode strict validation: no string-to-number coercion, but arrays still fill tuples
        payload = json.dumps(data)
    except (TypeError, ValueError) as exc:
        raise ScenarioError([f"<yaml>: unsupported value ({exc})"]) from exc
    try:
        return Scenario.model_validate_json(payload, strict=True)
    except ValidationError as exc:
        raise ScenarioError(_format_errors(exc)) from exc


def load_scenario(path: str | Path) -> tuple[Scenario, bytes]:
    """Parse ``path``; returns the model and the raw bytes (for hashing)."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ScenarioError([f"<file>: {exc}"]) from exc
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ScenarioError([f"<file>: not UTF-8 ({exc})"]) from exc
    return parse_scenario(text), raw


def content_hash(raw: bytes) -> str:
    return hashlib.sha256(raw).hexdigest()


# -- problem construction -------------------------------------------------------

def build_wlp_instance(section: WlpSection):
    from pmots.wlp import PenaltyProfile, RadioModel, Wall, WlpInstance

    fl = section.floor
    if isinstance(section.sites, RandomSites):
        sites = random_sites(section.sites.count, fl.width_m, fl.height_m, section.sites.seed,
                             section.sites.margin_m)
    else:
        sites = section.sites
    if isinstance(section.walls, RandomWalls):
        walls = random_walls(section.walls.count, fl.width_m, fl.height_m, section.walls.seed,
                             section.walls.loss_db)
    else:
        walls = tuple(Wall(**w.model_dump()) for w in section.walls)
    return WlpInstance.on_grid(
        fl.width_m, fl.height_m, fl.pixel_m, fl.blocks_x, fl.blocks_y,
        sites=sites,
        powers_dbm=tuple(section.powers_dbm),
        directions_deg=tuple(section.directions_deg),
        coverage=PenaltyProfile(**section.coverage.model_dump()),
        interference=PenaltyProfile(**section.interference.model_dump()),
        qos=PenaltyProfile(**section.qos.model_dump()),
        rate_tiers=tuple(tuple(t) for t in section.rate_tiers),
        users=section.users,
        radio=RadioModel(**section.radio.model_dump()),
        walls=walls,
        add_power=section.add_power,
        add_direction=section.add_direction,
        first_path_aps=section.first_path_aps,
        max_active=section.max_active,
    )


def build_wsn_problem(section: WsnSection):
    from pmots.wsn import LinkModel, WsnProblem, WsnTopology, generate_topology

    t = section.topology
    if isinstance(t, TopologySection):
        topo = generate_topology(t.density, t.radius_m, t.nodes, t.seed, t.tx_power_w, t.tx_energy_j)
    else:
        topo = WsnTopology(t.positions, tuple(t.sources), tuple(t.destinations), t.tx_power_w, t.tx_energy_j)
    return WsnProblem(
        topo, LinkModel(**section.link.model_dump()), levels=tuple(section.levels), hmax=section.hmax,
        default_level=section.default_level, max_active=section.max_active,
        two_objective=section.two_objective, first_path_forwarders=section.first_path_forwarders,
        infeasible_tol=section.infeasible_tol,
    )


def build_problem(scenario: Scenario, tensor_cache: Optional[str | Path] = None) -> ProblemAdapter:
    """Instantiate the problem; model-level inconsistencies raise ``ScenarioError``."""
    section = scenario.problem
    try:
        if section == "toy":
            return ChainProblem((scenario.toy or ToySection()).size)
        if section == "wlp":
            from pmots.wlp import WlpProblem, load_or_build_tensor

            instance = build_wlp_instance(scenario.wlp)
            cache = tensor_cache if tensor_cache is not None else scenario.wlp.tensor_cache
            return WlpProblem(instance, load_or_build_tensor(instance, cache))
        return build_wsn_problem(scenario.wsn)
    except ValueError as exc:
        raise ScenarioError([f"{section}: {exc}"]) from exc


def describe(obj: Any) -> Any:
    """JSON-friendly dump of a validated scenario."""
    return obj.model_dump(mode="json") if isinstance(obj, BaseModel) else obj

"""Scenario files: YAML in, validated frozen dataclasses out."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
import yaml

from .errors import ValidationError
from .farfield import CutSpec, Normalization
from .geometry import (
    Material,
    TriangleMesh,
    load_mesh,
    mesh_paraboloid,
    mesh_plate,
    mesh_shell,
    mesh_sphere,
)
from .mom import PlaneWave
from .po import Shadowing
from .schemas import Method, ScenarioSpec
from .spheres import LayeredSphere
from .wigner import Frame

logger = logging.getLogger(__name__)

METHODS = ("mom-gsm", "gsm-po", "gsm-t")
STRUCTURE_KINDS = ("mesh", "sphere", "shell", "plate", "paraboloid")
ANTENNA_KINDS = ("gsm", "dipole", "canonical")


@dataclass(frozen=True)
class StructureConfig:
    kind: str
    params: Tuple[Tuple[str, Any], ...]
    material: Material
    analytic: bool = False
    mesh_path: Optional[Path] = None

    def param(self, key: str, default: Any = None) -> Any:
        return dict(self.params).get(key, default)

    @property
    def is_spherical(self) -> bool:
        return self.kind in ("sphere", "shell")

    def build_mesh(self) -> TriangleMesh:
        p = dict(self.params)
        if self.kind == "mesh":
            assert self.mesh_path is not None
            return load_mesh(self.mesh_path, self.material, require_closed=not self.material.is_pec)
        if self.kind == "sphere":
            return mesh_sphere(p["radius"], int(p.get("subdivisions", 2)), self.material)
        if self.kind == "shell":
            return mesh_shell(
                p["r_inner"], p["r_outer"], int(p.get("subdivisions", 2)), self.material
            )
        if self.kind == "plate":
            return mesh_plate(
                p["size_x"],
                p["size_y"],
                int(p.get("nx", 8)),
                int(p.get("ny", 8)),
                center=tuple(p.get("center", (0.0, 0.0, 0.0))),
                normal_axis=p.get("normal_axis", "z"),
            )
        return mesh_paraboloid(p["diameter"], p["focal_length"], int(p.get("rings", 6)))

    def layered_sphere(self) -> LayeredSphere:
        p = dict(self.params)
        if self.kind == "sphere":
            return LayeredSphere.solid(p["radius"], self.material)
        if self.kind == "shell":
            return LayeredSphere.shell(p["r_inner"], p["r_outer"], self.material)
        raise ValidationError(f"structure kind {self.kind!r} has no analytic sphere model")


@dataclass(frozen=True)
class Pose:
    delta: float = 0.0
    euler: Tuple[float, float, float] = (0.0, 0.0, 0.0)  # radians

    @property
    def is_identity(self) -> bool:
        return self.delta == 0.0 and self.euler == (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class AntennaConfig:
    name: str
    kind: str
    gsm_path: Optional[Path] = None
    length: float = 0.0
    width: float = 0.0
    segments: int = 0
    reference_impedance: float = 50.0
    l_max: Optional[int] = None
    r_a: Optional[float] = None
    poses: Tuple[Pose, ...] = (Pose(),)


@dataclass(frozen=True)
class Excitation:
    kind: str  # "port" | "plane_wave"
    port_index: int = 0
    port_amplitude: complex = 1.0
    wave: Optional[PlaneWave] = None


@dataclass(frozen=True)
class OutputConfig:
    directory: Path
    sparams: bool = True
    patterns: Tuple[CutSpec, ...] = ()
    rcs: Tuple[CutSpec, ...] = ()
    normalization: Normalization = "gain"


@dataclass(frozen=True)
class SolverConfig:
    workers: int = 1
    smw: bool = True
    cache: bool = True
    shadowing: Shadowing = "cull"
    iota: float = 2.0
    l_ext: Optional[int] = None


@dataclass(frozen=True)
class Scenario:
    name: str
    method: Method
    structure: StructureConfig
    antennas: Tuple[AntennaConfig, ...]
    frame: Frame
    frequencies: Tuple[float, ...]
    excitations: Tuple[Excitation, ...]
    outputs: OutputConfig
    solver: SolverConfig = field(default_factory=SolverConfig)
    source: Optional[Path] = None


# --- Validation helpers ---


def _require(mapping: Mapping[str, Any], key: str, where: str) -> Any:
    if key not in mapping:
        raise ValidationError(f"{where}: missing required key {key!r}")
    return mapping[key]


def _positive(value: Any, what: str) -> float:
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"{what} must be a number, got {value!r}") from None
    if not x > 0.0:
        raise ValidationError(f"{what} must be positive, got {value!r}")
    return x


def _angles(values: Any, what: str) -> Tuple[float, float, float]:
    vals = list(values or (0.0, 0.0, 0.0))
    if len(vals) != 3:
        raise ValidationError(f"{what} needs three Euler angles, got {vals!r}")
    return tuple(math.radians(float(v)) for v in vals)  # type: ignore[return-value]


def _material(spec: Mapping[str, Any]) -> Material:
    kind = spec.get("kind", "pec")
    if kind == "pec":
        return Material.pec()
    if kind == "dielectric":
        return Material.dielectric(
            _positive(spec.get("eps_r", 1.0), "material.eps_r"),
            tan_delta=float(spec.get("tan_delta", 0.0)),
            mu_r=_positive(spec.get("mu_r", 1.0), "material.mu_r"),
        )
    raise ValidationError(f"material.kind must be 'pec' or 'dielectric', got {kind!r}")


def _structure(spec: Mapping[str, Any], base: Path) -> StructureConfig:
    kinds = [k for k in STRUCTURE_KINDS if k in spec]
    if len(kinds) != 1:
        raise ValidationError(f"structure needs exactly one of {STRUCTURE_KINDS}, got {kinds}")
    kind = kinds[0]
    material = _material(spec.get("material", {}))
    if kind == "mesh":
        path = (base / str(spec["mesh"])).resolve()
        if not path.exists():
            raise ValidationError(f"structure mesh file not found: {path}")
        return StructureConfig(kind, (), material, bool(spec.get("analytic", False)), path)
    params = spec[kind] or {}
    if not isinstance(params, Mapping):
        raise ValidationError(f"structure.{kind} must be a mapping")
    return StructureConfig(
        kind, tuple(sorted(params.items())), material, bool(spec.get("analytic", False))
    )


def _antenna(spec: Mapping[str, Any], index: int, base: Path) -> AntennaConfig:
    name = str(spec.get("name", f"antenna{index}"))
    kinds = [k for k in ANTENNA_KINDS if k in spec]
    if len(kinds) != 1:
        raise ValidationError(f"antenna {name!r} needs exactly one of {ANTENNA_KINDS}, got {kinds}")
    kind = kinds[0]
    poses = tuple(
        Pose(float(p.get("delta", 0.0)), _angles(p.get("euler_deg"), f"antenna {name!r} pose"))
        for p in spec.get("poses", [{}])
    )
    common = dict(
        name=name,
        kind=kind,
        l_max=int(spec["l_max"]) if "l_max" in spec else None,
        r_a=_positive(spec["r_a"], f"antenna {name!r} r_a") if "r_a" in spec else None,
        poses=poses,
    )
    if kind == "gsm":
        if common["r_a"] is None:
            raise ValidationError(f"antenna {name!r}: r_a is required with a GSM file")
        path = (base / str(spec["gsm"])).resolve()
        if not path.exists():
            raise ValidationError(f"antenna {name!r}: GSM file not found: {path}")
        return AntennaConfig(gsm_path=path, **common)  # type: ignore[arg-type]
    dims = spec[kind] or {}
    ref = _positive(dims.get("reference_impedance", 50.0), "reference_impedance")
    if kind == "canonical":
        return AntennaConfig(reference_impedance=ref, **common)  # type: ignore[arg-type]
    return AntennaConfig(
        length=_positive(_require(dims, "length", f"antenna {name!r}"), "dipole length"),
        width=_positive(_require(dims, "width", f"antenna {name!r}"), "dipole width"),
        segments=int(dims.get("segments", 10)),
        reference_impedance=ref,
        **common,  # type: ignore[arg-type]
    )


def _frequencies(spec: Mapping[str, Any]) -> Tuple[float, ...]:
    if "frequencies_hz" in spec:
        freqs = [_positive(f, "sweep frequency") for f in spec["frequencies_hz"]]
    else:
        start = _positive(_require(spec, "start_hz", "sweep"), "sweep.start_hz")
        stop = _positive(_require(spec, "stop_hz", "sweep"), "sweep.stop_hz")
        points = int(spec.get("points", 1))
        if points < 1 or stop < start:
            raise ValidationError("sweep needs points >= 1 and stop_hz >= start_hz")
        freqs = list(np.linspace(start, stop, points))
    if not freqs:
        raise ValidationError("sweep lists no frequencies")
    return tuple(float(f) for f in freqs)


def _excitation(spec: Mapping[str, Any]) -> Excitation:
    if "port" in spec:
        drive = spec["port"] or {}
        index = int(drive.get("index", 1))
        if index < 1:
            raise ValidationError(f"port index is 1-based, got {index}")
        return Excitation(
            "port", port_index=index - 1, port_amplitude=complex(drive.get("amplitude", 1.0))
        )
    if "plane_wave" in spec:
        pw = spec["plane_wave"] or {}
        wave = PlaneWave.from_angles(
            math.radians(float(pw.get("theta_deg", 0.0))),
            math.radians(float(pw.get("phi_deg", 0.0))),
            pw.get("polarization", "theta"),
            float(pw.get("amplitude", 1.0)),
        )
        return Excitation("plane_wave", wave=wave)
    raise ValidationError(f"excitation must be 'port' or 'plane_wave', got {sorted(spec)}")


def _cuts(items: Any) -> Tuple[CutSpec, ...]:
    return tuple(
        CutSpec(
            kind=c.get("kind", "phi"),
            angle_deg=float(c.get("angle_deg", 0.0)),
            step_deg=float(c.get("step_deg", 1.0)),
        )
        for c in (items or [])
    )


def _check_compatibility(scenario: Scenario) -> None:
    s = scenario.structure
    if scenario.method == "gsm-po" and not s.material.is_pec:
        raise ValidationError("method gsm-po requires a PEC structure")
    if scenario.method == "gsm-t" and s.analytic and not s.is_spherical:
        raise ValidationError("analytic gsm-t requires a sphere or shell structure")
    if s.analytic and scenario.method != "gsm-t":
        raise ValidationError("structure.analytic is only meaningful for method gsm-t")
    if not scenario.antennas:
        raise ValidationError("scenario lists no antennas")
    has_port = any(e.kind == "port" for e in scenario.excitations)
    if scenario.method == "gsm-po" and any(e.kind == "plane_wave" for e in scenario.excitations):
        raise ValidationError("method gsm-po assumes no incident plane wave")
    if scenario.outputs.patterns and not has_port:
        raise ValidationError("pattern outputs need a port excitation")
    if scenario.outputs.rcs and not any(e.kind == "plane_wave" for e in scenario.excitations):
        raise ValidationError("RCS outputs need a plane-wave excitation")


def parse_scenario(
    data: Union[ScenarioSpec, Dict[str, Any]],
    *,
    base: Path = Path("."),
    source: Optional[Path] = None,
) -> Scenario:
    if not isinstance(data, Mapping):
        raise ValidationError("scenario file must contain a mapping at top level")
    method = _require(data, "method", "scenario")
    if method not in METHODS:
        raise ValidationError(f"method must be one of {METHODS}, got {method!r}")
    frame_spec = data.get("frame", {}) or {}
    origin = tuple(float(x) for x in frame_spec.get("origin", (0.0, 0.0, 0.0)))
    if len(origin) != 3:
        raise ValidationError(f"frame.origin needs three coordinates, got {origin}")
    out = data.get("outputs", {}) or {}
    normalization = out.get("normalization", "gain")
    if normalization not in ("gain", "directivity"):
        raise ValidationError(
            f"outputs.normalization must be gain or directivity, got {normalization!r}"
        )
    solver = data.get("solver", {}) or {}
    shadowing = solver.get("shadowing", "cull")
    if shadowing not in ("none", "cull"):
        raise ValidationError(f"solver.shadowing must be none or cull, got {shadowing!r}")
    workers = int(solver.get("workers", 1))
    if workers < 1:
        raise ValidationError(f"solver.workers must be >= 1, got {workers}")
    scenario = Scenario(
        name=str(data.get("name", source.stem if source else "scenario")),
        method=method,
        structure=_structure(_require(data, "structure", "scenario"), base),
        antennas=tuple(_antenna(a, i, base) for i, a in enumerate(data.get("antennas", []))),
        frame=Frame(
            origin=origin,  # type: ignore[arg-type]
            euler=_angles(frame_spec.get("euler_deg"), "frame"),
        ),
        frequencies=_frequencies(_require(data, "sweep", "scenario")),
        excitations=tuple(_excitation(e) for e in data.get("excitations", [])),
        outputs=OutputConfig(
            directory=(base / str(out.get("directory", "out"))),
            sparams=bool(out.get("sparams", True)),
            patterns=_cuts(out.get("patterns")),
            rcs=_cuts(out.get("rcs")),
            normalization=normalization,
        ),
        solver=SolverConfig(
            workers=workers,
            smw=bool(solver.get("smw", True)),
            cache=bool(solver.get("cache", True)),
            shadowing=shadowing,
            iota=float(solver.get("iota", 2.0)),
            l_ext=int(solver["l_ext"]) if "l_ext" in solver else None,
        ),
        source=source,
    )
    _check_compatibility(scenario)
    return scenario


def load_scenario(path: Union[str, Path]) -> Scenario:
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"scenario file not found: {p}")
    try:
        data = yaml.safe_load(p.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ValidationError(f"{p}: invalid YAML: {exc}") from exc
    scenario = parse_scenario(data, base=p.parent, source=p)
    logger.info(
        "loaded scenario %r: method %s, %d frequencies, %d antennas",
        scenario.name,
        scenario.method,
        len(scenario.frequencies),
        len(scenario.antennas),
    )
    return scenario

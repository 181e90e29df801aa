"""Shapes of scenario files as loaded from YAML.

Units: lengths in meters, angles in degrees, frequencies in hertz.
"""

from __future__ import annotations

from typing import List, Literal, TypedDict

Method = Literal["mom-gsm", "gsm-po", "gsm-t"]


class MaterialSpec(TypedDict, total=False):
    kind: Literal["pec", "dielectric"]
    eps_r: float
    tan_delta: float
    mu_r: float


class SphereSpec(TypedDict, total=False):
    radius: float
    subdivisions: int


class ShellSpec(TypedDict, total=False):
    r_inner: float
    r_outer: float
    subdivisions: int


class PlateSpec(TypedDict, total=False):
    size_x: float
    size_y: float
    nx: int
    ny: int
    center: List[float]
    normal_axis: Literal["x", "y", "z"]


class ParaboloidSpec(TypedDict, total=False):
    diameter: float
    focal_length: float
    rings: int


class StructureSpec(TypedDict, total=False):
    mesh: str  # path to a counts/v/t mesh file, relative to the scenario
    sphere: SphereSpec
    shell: ShellSpec
    plate: PlateSpec
    paraboloid: ParaboloidSpec
    material: MaterialSpec
    analytic: bool  # gsm-t only: use wave matching instead of MoM blocks


class DipoleSpec(TypedDict, total=False):
    length: float
    width: float
    segments: int
    reference_impedance: float


class PoseSpec(TypedDict, total=False):
    delta: float
    euler_deg: List[float]


class AntennaSpec(TypedDict, total=False):
    name: str
    gsm: str  # HGSM1 file
    dipole: DipoleSpec  # MoM extraction of a strip dipole
    canonical: DipoleSpec  # matched minimum-scattering dipole
    l_max: int
    r_a: float  # minimum sphere radius; required with gsm
    poses: List[PoseSpec]


class FrameSpec(TypedDict, total=False):
    origin: List[float]
    euler_deg: List[float]


class SweepSpec(TypedDict, total=False):
    frequencies_hz: List[float]
    start_hz: float
    stop_hz: float
    points: int


class PortDriveSpec(TypedDict, total=False):
    index: int  # 1-based port number; the other ports stay matched
    amplitude: float


class PlaneWaveSpec(TypedDict, total=False):
    theta_deg: float
    phi_deg: float
    polarization: Literal["theta", "phi"]
    amplitude: float


class ExcitationSpec(TypedDict, total=False):
    port: PortDriveSpec
    plane_wave: PlaneWaveSpec


class CutSpecDict(TypedDict, total=False):
    kind: Literal["phi", "theta"]
    angle_deg: float
    step_deg: float


class OutputSpec(TypedDict, total=False):
    directory: str
    sparams: bool
    patterns: List[CutSpecDict]
    rcs: List[CutSpecDict]
    normalization: Literal["gain", "directivity"]


class SolverSpec(TypedDict, total=False):
    workers: int
    smw: bool
    cache: bool
    shadowing: Literal["none", "cull"]
    iota: float
    l_ext: int


class ScenarioSpec(TypedDict, total=False):
    name: str
    method: Method
    structure: StructureSpec
    antennas: List[AntennaSpec]
    frame: FrameSpec
    sweep: SweepSpec
    excitations: List[ExcitationSpec]
    outputs: OutputSpec
    solver: SolverSpec

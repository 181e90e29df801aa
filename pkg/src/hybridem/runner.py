"""Batch runs of scenario files and comparison of their outputs.

One run directory holds ``sparams.csv``, one CSV per pattern or RCS cut
(``pattern_<antenna>_f<index>_x<excitation>_<cut>.csv``) and ``report.json``.
Frequencies are solved in a thread pool; every CSV depends only on its
frequency, so outputs do not depend on the worker count.
"""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from . import formats
from .cache import HybridCache, cache_root
from .config import AntennaConfig, Excitation, Scenario, load_scenario
from .coupling import assemble_coupling
from .errors import ValidationError
from .farfield import (
    PATTERN_HEADER,
    CutSpec,
    accepted_power,
    currents_far_vectors,
    far_from_vectors,
    radiated_power,
    waves_far_vectors,
    write_pattern_csv,
)
from .geometry import RwgBasis, TriangleMesh, build_rwg, mesh_strip_dipole
from .gsm import (
    Gsm,
    PortWaves,
    gsm_apply,
    gsm_canonical_dipole,
    gsm_from_mom_antenna,
    gsm_transform,
    load_gsm,
    shifted_degree,
)
from .hybrid import (
    build_hybrid,
    effective_sparams,
    factor_structure,
    hybrid_digest,
    smw_solve,
    solve_hybrid,
)
from .mom import PlaneWave, PortSpec, assemble_impedance, excitation_plane_wave
from .po import po_far_field, po_gamma_fullcoupled, po_outgoing, po_rho
from .tmatrix import TMatrixBlocks, hybrid_gsm_t, tmatrix_analytic_sphere, tmatrix_from_mom
from .units import wavenumber
from .waves import CoeffVector, plane_wave_coeffs, truncation_degree
from .wigner import Frame

logger = logging.getLogger(__name__)

SPARAM_HEADER = ("frequency_hz", "antenna", "port", "re_gamma", "im_gamma", "gamma_db")
REPORT_NAME = "report.json"
SPARAM_NAME = "sparams.csv"

DEFAULT_TOLERANCES: Dict[str, float] = {"sparams": 1e-6, "pattern": 1e-3, "rcs": 1e-3}
# pattern comparisons ignore samples this far below the peak
DYNAMIC_RANGE_DB = 40.0

FieldFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Variant:
    """One antenna in one pose, expressed in the scenario's base frame."""

    label: str
    gsm: Gsm
    clearance: Optional[float]


@dataclass
class FrequencyResult:
    index: int
    frequency: float
    timings: Dict[str, float] = field(default_factory=dict)
    sparam_rows: List[Tuple[object, ...]] = field(default_factory=list)
    files: List[str] = field(default_factory=list)
    factorizations: int = 0
    smw_updates: int = 0
    transforms: int = 0

    def add_time(self, key: str, seconds: float) -> None:
        self.timings[key] = self.timings.get(key, 0.0) + max(0.0, seconds)


@dataclass
class RunReport:
    scenario: str
    method: str
    output_dir: str
    frequencies: List[Dict[str, object]]
    cache: Dict[str, int]
    manifest: List[str]
    factorizations: int
    smw_updates: int
    transforms: int
    complexity: Dict[str, float]
    elapsed: float

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)


# --- Antennas ---


def _antenna_gsm(
    ant: AntennaConfig, frequency: float, k0: float, iota: float
) -> Tuple[Gsm, Optional[float]]:
    if ant.kind == "gsm":
        assert ant.gsm_path is not None
        gsm = load_gsm(ant.gsm_path)
        if not math.isclose(gsm.frequency, frequency, rel_tol=1e-9):
            raise ValidationError(
                f"antenna {ant.name!r}: GSM file is for {gsm.frequency:.9g} Hz, "
                f"sweep asks {frequency:.9g} Hz"
            )
        return gsm, ant.r_a
    if ant.kind == "canonical":
        gsm = gsm_canonical_dipole(
            frequency, ant.l_max or 1, reference_impedance=ant.reference_impedance
        )
        return gsm, ant.r_a
    r_a = ant.r_a or 0.5 * math.hypot(ant.length, ant.width)
    l_max = ant.l_max or truncation_degree(k0, r_a, iota)
    mesh = mesh_strip_dipole(ant.length, ant.width, ant.segments)
    port = PortSpec((0.0, 0.0, 0.0), ant.reference_impedance, "feed")
    return gsm_from_mom_antenna(mesh, [port], k0, l_max), r_a


def _variants(
    scenario: Scenario, frequency: float, k0: float, result: FrequencyResult
) -> List[Variant]:
    """Antenna GSMs in every pose, all re-expanded with one common truncation."""
    start = time.perf_counter()
    raw = []
    for ant in scenario.antennas:
        gsm, r_a = _antenna_gsm(ant, frequency, k0, scenario.solver.iota)
        for i, pose in enumerate(ant.poses):
            label = ant.name if len(ant.poses) == 1 else f"{ant.name}-pose{i}"
            need = shifted_degree(gsm.l_max, k0, pose.delta)
            clearance = None if r_a is None else r_a + abs(pose.delta)
            raw.append((label, gsm, pose, need, clearance))
    l_base = max(item[3] for item in raw)
    variants = []
    for label, gsm, pose, _, clearance in raw:
        if pose.is_identity and gsm.l_max == l_base:
            placed = gsm
        else:
            placed = gsm_transform(gsm, pose.delta, pose.euler, l_max=l_base)
            result.transforms += 1
        variants.append(Variant(label, placed, clearance))
    result.add_time("antenna", time.perf_counter() - start)
    return variants


def _clearance(variants: Sequence[Variant]) -> Optional[float]:
    radii = [v.clearance for v in variants if v.clearance is not None]
    return max(radii) if radii else None


# --- Excitations ---


def incident_coefficients(wave: PlaneWave, frame: Frame, k0: float, l_max: int) -> CoeffVector:
    """Regular-wave expansion of a plane wave about a displaced, rotated frame."""
    q = frame.rotation
    k_local = q.T @ np.asarray(wave.k_hat, dtype=float)
    e_local = q.T @ np.asarray(wave.e_hat, dtype=complex)
    phase = np.exp(-1j * k0 * float(np.dot(wave.k_hat, frame.origin)))
    return plane_wave_coeffs(k_local, e_local, complex(wave.amplitude) * phase, k0, l_max)


def _port_drive(gsm: Gsm, exc: Excitation) -> PortWaves:
    if exc.port_index >= gsm.n_port:
        raise ValidationError(
            f"port {exc.port_index + 1} driven but the antenna has {gsm.n_port} ports"
        )
    v = PortWaves.zeros(gsm.n_port)
    values = v.values.copy()
    values[exc.port_index] = exc.port_amplitude
    return PortWaves(values)


# --- Output helpers ---


def _sparam_rows(frequency: float, label: str, gamma: np.ndarray) -> List[Tuple[object, ...]]:
    rows: List[Tuple[object, ...]] = []
    for i in range(gamma.shape[0]):
        for j in range(gamma.shape[1]):
            port = f"{i + 1}" if i == j else f"{i + 1}-{j + 1}"
            g = complex(gamma[i, j])
            with np.errstate(divide="ignore"):
                db = float(20.0 * np.log10(abs(g)))
            rows.append((float(frequency), label, port, g.real, g.imag, db))
    return rows


def _write_cuts(
    scenario: Scenario,
    result: FrequencyResult,
    prefix: str,
    label: str,
    x_index: int,
    cuts: Sequence[CutSpec],
    field_fn: FieldFn,
    *,
    reference_power: Optional[float] = None,
    incident_amplitude: Optional[float] = None,
) -> None:
    out = scenario.outputs.directory
    for cut in cuts:
        pattern = far_from_vectors(field_fn, cut).normalized(
            reference_power=reference_power, incident_amplitude=incident_amplitude
        )
        name = f"{prefix}_{label}_f{result.index:03d}_x{x_index}_{cut.label}.csv"
        write_pattern_csv(out / name, pattern)
        result.files.append(name)


def _reference_power(scenario: Scenario, v: PortWaves, w: PortWaves, field_fn: FieldFn) -> float:
    if scenario.outputs.normalization == "directivity":
        return radiated_power(field_fn)
    return accepted_power(v.values, w.values)


def _emit_port_patterns(
    scenario: Scenario,
    result: FrequencyResult,
    variant: Variant,
    x_index: int,
    v: PortWaves,
    w: PortWaves,
    field_fn: FieldFn,
) -> None:
    if not scenario.outputs.patterns:
        return
    ref = _reference_power(scenario, v, w, field_fn)
    _write_cuts(
        scenario,
        result,
        "pattern",
        variant.label,
        x_index,
        scenario.outputs.patterns,
        field_fn,
        reference_power=ref,
    )


# --- Method paths ---


def _solve_mom_gsm(
    scenario: Scenario,
    mesh: TriangleMesh,
    basis: RwgBasis,
    cache: HybridCache,
    variants: Sequence[Variant],
    result: FrequencyResult,
) -> None:
    frequency = result.frequency
    k0 = wavenumber(frequency)
    frame = scenario.frame
    l_base = variants[0].gsm.l_max
    start = time.perf_counter()
    z = assemble_impedance(mesh, basis, frequency)
    result.add_time("assembly", time.perf_counter() - start)
    start = time.perf_counter()
    u4 = assemble_coupling(basis, mesh, frame, k0, l_base, 4, r_a=_clearance(variants))
    result.add_time("coupling", time.perf_counter() - start)
    smw = scenario.solver.smw
    factors = None
    if smw:
        digest = hybrid_digest(z, u4) if cache.enabled else ""
        factors = factor_structure(z, u4, cache=cache, digest=digest)
        result.add_time("factorization", sum(factors.timings.values()))
        if not factors.from_cache:
            result.factorizations += 1
    solve = smw_solve if smw else solve_hybrid
    path = "smw" if smw else "direct"

    for variant in variants:
        start = time.perf_counter()
        sys = build_hybrid(z, u4, variant.gsm, factors=factors, assemble=not smw)
        if smw:
            result.smw_updates += 1
        else:
            result.factorizations += 1
        gsm = variant.gsm
        if scenario.outputs.sparams and gsm.n_port:
            gamma = effective_sparams(sys, path=path)
            result.sparam_rows.extend(_sparam_rows(frequency, variant.label, gamma))
        for x_index, exc in enumerate(scenario.excitations):
            if exc.kind == "port":
                v = _port_drive(gsm, exc)
                current, f, w = solve(sys, v=v)
            else:
                assert exc.wave is not None
                v_inc = excitation_plane_wave(basis, z.formulation, exc.wave, frequency)
                a_inc = incident_coefficients(exc.wave, frame, k0, l_base)
                current, f, w = solve(sys, v_inc=v_inc, a_inc=a_inc)

            def field_fn(dirs: np.ndarray, current=current, f=f) -> np.ndarray:
                scattered = currents_far_vectors(current, basis, k0, dirs)
                return scattered + waves_far_vectors(f, frame, dirs, k0)

            if exc.kind == "port":
                _emit_port_patterns(scenario, result, variant, x_index, v, w, field_fn)
            else:
                _write_cuts(
                    scenario,
                    result,
                    "rcs",
                    variant.label,
                    x_index,
                    scenario.outputs.rcs,
                    field_fn,
                    incident_amplitude=abs(complex(exc.wave.amplitude)),
                )
        result.add_time("update", time.perf_counter() - start)


def _solve_gsm_po(
    scenario: Scenario, mesh: TriangleMesh, variants: Sequence[Variant], result: FrequencyResult
) -> None:
    k0 = wavenumber(result.frequency)
    frame = scenario.frame
    start = time.perf_counter()
    rho = po_rho(mesh, frame, k0, variants[0].gsm.l_max, scenario.solver.shadowing)
    result.add_time("coupling", time.perf_counter() - start)
    for variant in variants:
        start = time.perf_counter()
        gsm = variant.gsm
        gamma = po_gamma_fullcoupled(gsm, rho) if gsm.n_port else np.zeros((0, 0), dtype=complex)
        if scenario.outputs.sparams and gsm.n_port:
            result.sparam_rows.extend(_sparam_rows(result.frequency, variant.label, gamma))
        for x_index, exc in enumerate(scenario.excitations):
            v = _port_drive(gsm, exc)
            f = po_outgoing(gsm, rho, v)
            w = PortWaves(gamma @ v.values)

            def field_fn(dirs: np.ndarray, f=f) -> np.ndarray:
                return waves_far_vectors(f, frame, dirs, k0) + po_far_field(rho, mesh, f, dirs)

            _emit_port_patterns(scenario, result, variant, x_index, v, w, field_fn)
        result.add_time("update", time.perf_counter() - start)


def _exterior_degree(scenario: Scenario, k0: float, r_b: float) -> int:
    if scenario.solver.l_ext is not None:
        return scenario.solver.l_ext
    return truncation_degree(k0, r_b, scenario.solver.iota)


def _tmatrix_blocks(
    scenario: Scenario,
    mesh: Optional[TriangleMesh],
    basis: Optional[RwgBasis],
    variants: Sequence[Variant],
    result: FrequencyResult,
) -> TMatrixBlocks:
    k0 = wavenumber(result.frequency)
    l_int = variants[0].gsm.l_max
    structure = scenario.structure
    start = time.perf_counter()
    if structure.analytic:
        sphere = structure.layered_sphere()
        l_ext = _exterior_degree(scenario, k0, sphere.outer_radius)
        blocks = tmatrix_analytic_sphere(sphere, k0, l_int, l_ext)
        result.add_time("assembly", time.perf_counter() - start)
        return blocks
    assert mesh is not None and basis is not None
    frame = scenario.frame
    z = assemble_impedance(mesh, basis, result.frequency)
    result.add_time("assembly", time.perf_counter() - start)
    start = time.perf_counter()
    l_ext = _exterior_degree(scenario, k0, _outer_radius(mesh, frame))
    u1 = assemble_coupling(basis, mesh, frame, k0, l_ext, 1)
    u4 = assemble_coupling(basis, mesh, frame, k0, l_int, 4, r_a=_clearance(variants))
    result.add_time("coupling", time.perf_counter() - start)
    start = time.perf_counter()
    blocks = tmatrix_from_mom(z, u1, u4)
    result.factorizations += 1
    result.add_time("factorization", time.perf_counter() - start)
    return blocks


def _solve_gsm_t(
    scenario: Scenario,
    mesh: Optional[TriangleMesh],
    basis: Optional[RwgBasis],
    variants: Sequence[Variant],
    result: FrequencyResult,
) -> None:
    k0 = wavenumber(result.frequency)
    frame = scenario.frame
    blocks = _tmatrix_blocks(scenario, mesh, basis, variants, result)
    for variant in variants:
        start = time.perf_counter()
        composite = hybrid_gsm_t(variant.gsm, blocks).as_gsm()
        if scenario.outputs.sparams and composite.n_port:
            rows = _sparam_rows(result.frequency, variant.label, composite.gamma)
            result.sparam_rows.extend(rows)
        for x_index, exc in enumerate(scenario.excitations):
            if exc.kind == "port":
                v = _port_drive(composite, exc)
                w, f = gsm_apply(composite, v, CoeffVector.zeros(composite.l_max, "a_inc"))
            else:
                assert exc.wave is not None
                v = PortWaves.zeros(composite.n_port)
                a_inc = incident_coefficients(exc.wave, frame, k0, composite.l_max)
                w, f = gsm_apply(composite, v, a_inc)

            def field_fn(dirs: np.ndarray, f=f) -> np.ndarray:
                return waves_far_vectors(f, frame, dirs, k0)

            if exc.kind == "port":
                _emit_port_patterns(scenario, result, variant, x_index, v, w, field_fn)
            else:
                _write_cuts(
                    scenario,
                    result,
                    "rcs",
                    variant.label,
                    x_index,
                    scenario.outputs.rcs,
                    field_fn,
                    incident_amplitude=abs(complex(exc.wave.amplitude)),
                )
        result.add_time("update", time.perf_counter() - start)


def _outer_radius(mesh: TriangleMesh, frame: Frame) -> float:
    offsets = mesh.vertices - np.asarray(frame.origin, dtype=float)
    return float(np.linalg.norm(offsets, axis=1).max())


# --- Run ---


def _solve_frequency(
    scenario: Scenario,
    index: int,
    frequency: float,
    mesh: Optional[TriangleMesh],
    basis: Optional[RwgBasis],
    cache: HybridCache,
) -> FrequencyResult:
    result = FrequencyResult(index=index, frequency=frequency)
    k0 = wavenumber(frequency)
    logger.info("frequency %d/%d: %.6g Hz", index + 1, len(scenario.frequencies), frequency)
    variants = _variants(scenario, frequency, k0, result)
    if scenario.method == "mom-gsm":
        assert mesh is not None and basis is not None
        _solve_mom_gsm(scenario, mesh, basis, cache, variants, result)
    elif scenario.method == "gsm-po":
        assert mesh is not None
        _solve_gsm_po(scenario, mesh, variants, result)
    else:
        _solve_gsm_t(scenario, mesh, basis, variants, result)
    return result


def _complexity(scenario: Scenario, mesh: Optional[TriangleMesh]) -> Dict[str, float]:
    """Enclosing radii of antenna and structure and the predicted dense-update saving."""
    r_a = max(
        (
            (a.r_a or (0.5 * math.hypot(a.length, a.width) if a.kind == "dipole" else 0.0))
            + max(abs(p.delta) for p in a.poses)
            for a in scenario.antennas
        ),
        default=0.0,
    )
    if scenario.structure.analytic:
        r_b = scenario.structure.layered_sphere().outer_radius
    elif mesh is not None:
        r_b = _outer_radius(mesh, scenario.frame)
    else:
        r_b = 0.0
    if r_a <= 0.0 or r_b <= 0.0:
        return {}
    kappa = r_b / r_a
    return {"r_a": r_a, "r_b": r_b, "kappa": kappa, "predicted_saving": kappa**6}


def run(
    scenario: Union[str, Path, Scenario],
    *,
    workers: Optional[int] = None,
    cache: Optional[HybridCache] = None,
    output_dir: Optional[Path] = None,
) -> RunReport:
    """Solve every frequency of a scenario and write the requested products."""
    started = time.perf_counter()
    sc = scenario if isinstance(scenario, Scenario) else load_scenario(scenario)
    if output_dir is not None:
        sc = replace(sc, outputs=replace(sc.outputs, directory=Path(output_dir)))
    out = Path(sc.outputs.directory)
    out.mkdir(parents=True, exist_ok=True)
    cache = cache or HybridCache(root=cache_root(), enabled=sc.solver.cache)
    n_workers = workers or sc.solver.workers

    mesh: Optional[TriangleMesh] = None
    basis: Optional[RwgBasis] = None
    if not (sc.method == "gsm-t" and sc.structure.analytic):
        mesh = sc.structure.build_mesh()
        if sc.method != "gsm-po":
            basis = build_rwg(mesh)
        logger.info("structure: %d triangles, %s", mesh.n_triangles, mesh.material.describe())

    def job(item: Tuple[int, float]) -> FrequencyResult:
        return _solve_frequency(sc, item[0], item[1], mesh, basis, cache)

    items = list(enumerate(sc.frequencies))
    if n_workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(job, items))
    else:
        results = [job(item) for item in items]

    manifest: List[str] = []
    if sc.outputs.sparams:
        rows = [row for r in results for row in r.sparam_rows]
        formats.write_csv(out / SPARAM_NAME, SPARAM_HEADER, rows)
        manifest.append(SPARAM_NAME)
    for r in results:
        manifest.extend(r.files)

    report = RunReport(
        scenario=sc.name,
        method=sc.method,
        output_dir=str(out),
        frequencies=[
            {"frequency_hz": r.frequency, "timings": dict(sorted(r.timings.items()))}
            for r in results
        ],
        cache=cache.stats.as_dict(),
        manifest=manifest,
        factorizations=sum(r.factorizations for r in results),
        smw_updates=sum(r.smw_updates for r in results),
        transforms=sum(r.transforms for r in results),
        complexity=_complexity(sc, mesh),
        elapsed=time.perf_counter() - started,
    )
    formats.atomic_write(out / REPORT_NAME, json.dumps(report.to_dict(), indent=2).encode("utf-8"))
    logger.info(
        "run %r finished: %d files, %d factorizations, %d SMW updates in %.2f s",
        sc.name,
        len(manifest),
        report.factorizations,
        report.smw_updates,
        report.elapsed,
    )
    return report


# --- Compare ---


@dataclass(frozen=True)
class ProductDiff:
    name: str
    kind: str
    max_deviation: float
    mean_deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance


@dataclass(frozen=True)
class CompareReport:
    diffs: Tuple[ProductDiff, ...]

    @property
    def passed(self) -> bool:
        return all(d.passed for d in self.diffs)

    def to_dict(self) -> Dict[str, object]:
        return {
            "passed": self.passed,
            "products": [dict(asdict(d), passed=d.passed) for d in self.diffs],
        }


def parse_tolerances(spec: Union[str, Mapping[str, float], None]) -> Dict[str, float]:
    """``"sparams=5e-2,pattern=0.5"`` on top of the defaults."""
    tol = dict(DEFAULT_TOLERANCES)
    if spec is None:
        return tol
    items = spec.items() if isinstance(spec, Mapping) else (
        part.split("=", 1) for part in spec.split(",") if part.strip()
    )
    for item in items:
        if len(item) != 2:
            raise ValidationError(f"tolerance entries look like kind=value, got {item!r}")
        key, value = item
        key = str(key).strip()
        if key not in tol:
            raise ValidationError(f"unknown tolerance kind {key!r}; expected one of {sorted(tol)}")
        try:
            tol[key] = float(value)
        except (TypeError, ValueError):
            raise ValidationError(
                f"tolerance for {key!r} must be a number, got {value!r}"
            ) from None
    return tol


def _products(directory: Path) -> Dict[str, str]:
    if not directory.is_dir():
        raise ValidationError(f"run directory not found: {directory}")
    found = {}
    for path in sorted(directory.glob("*.csv")):
        if path.name == SPARAM_NAME:
            found[path.name] = "sparams"
        elif path.name.startswith("pattern_"):
            found[path.name] = "pattern"
        elif path.name.startswith("rcs_"):
            found[path.name] = "rcs"
    return found


def _sparam_values(path: Path) -> Dict[Tuple[str, str, str], complex]:
    header, rows = formats.read_csv(path)
    if tuple(header) != SPARAM_HEADER:
        raise ValidationError(f"{path}: unexpected header {header}")
    return {(r[0], r[1], r[2]): complex(float(r[3]), float(r[4])) for r in rows}


def _diff_sparams(a: Path, b: Path) -> Tuple[float, float]:
    va, vb = _sparam_values(a), _sparam_values(b)
    if set(va) != set(vb):
        raise ValidationError(f"{a.name}: runs list different frequencies, antennas or ports")
    if not va:
        return 0.0, 0.0
    dev = np.array([abs(va[key] - vb[key]) for key in sorted(va)])
    return float(dev.max()), float(dev.mean())


def _diff_cut(a: Path, b: Path, column: str) -> Tuple[float, float]:
    ha, ra = formats.read_csv(a)
    hb, rb = formats.read_csv(b)
    if tuple(ha) != PATTERN_HEADER or tuple(hb) != PATTERN_HEADER:
        raise ValidationError(f"{a.name}: unexpected pattern header")
    xa = np.array(ra, dtype=float)
    xb = np.array(rb, dtype=float)
    if xa.shape != xb.shape or not np.allclose(xa[:, :2], xb[:, :2], atol=1e-9):
        raise ValidationError(f"{a.name}: runs sample different angles")
    col = PATTERN_HEADER.index(column)
    da, db = xa[:, col], xb[:, col]
    finite = np.isfinite(da) & np.isfinite(db)
    if not finite.any():
        return 0.0, 0.0
    peak = max(float(da[finite].max()), float(db[finite].max()))
    keep = finite & ((da >= peak - DYNAMIC_RANGE_DB) | (db >= peak - DYNAMIC_RANGE_DB))
    dev = np.abs(da[keep] - db[keep])
    return float(dev.max()), float(dev.mean())


def compare(
    dir_a: Union[str, Path],
    dir_b: Union[str, Path],
    tolerances: Union[str, Mapping[str, float], None] = None,
) -> CompareReport:
    """Max and mean deviations per product; S-parameters as ``|dGamma|``, cuts in dB."""
    tol = parse_tolerances(tolerances)
    a, b = Path(dir_a), Path(dir_b)
    pa, pb = _products(a), _products(b)
    if set(pa) != set(pb):
        only_a = sorted(set(pa) - set(pb))
        only_b = sorted(set(pb) - set(pa))
        raise ValidationError(f"product mismatch: only in A {only_a}, only in B {only_b}")
    if not pa:
        raise ValidationError(f"no products to compare in {a}")
    diffs = []
    for name in sorted(pa):
        kind = pa[name]
        if kind == "sparams":
            worst, mean = _diff_sparams(a / name, b / name)
        else:
            column = "gain_dbi" if kind == "pattern" else "rcs_dbsm"
            worst, mean = _diff_cut(a / name, b / name, column)
        diffs.append(ProductDiff(name, kind, worst, mean, tol[kind]))
        logger.info("%s: max %.3e, mean %.3e (tol %.3e)", name, worst, mean, tol[kind])
    return CompareReport(tuple(diffs))

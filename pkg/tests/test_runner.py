import json

import numpy as np
import pytest

from hybridem.cache import HybridCache
from hybridem.config import parse_scenario
from hybridem.errors import GeometryError, ValidationError
from hybridem.formats import read_csv
from hybridem.gsm import gsm_canonical_dipole, save_gsm
from hybridem.runner import (
    REPORT_NAME,
    SPARAM_HEADER,
    SPARAM_NAME,
    compare,
    parse_tolerances,
    run,
)


def _mom_gsm(tmp_path, **solver):
    return parse_scenario(
        {
            "name": "feed-near-sphere",
            "method": "mom-gsm",
            "structure": {"sphere": {"radius": 0.2, "subdivisions": 1}},
            "frame": {"origin": [0.0, 0.0, 0.5]},
            "antennas": [
                {
                    "name": "feed",
                    "canonical": {},
                    "r_a": 0.05,
                    "poses": [{}, {"delta": 0.05, "euler_deg": [0, 30, 0]}],
                }
            ],
            "sweep": {"frequencies_hz": [250e6, 300e6]},
            "excitations": [{"port": {"index": 1}}],
            "outputs": {"patterns": [{"kind": "phi", "angle_deg": 0, "step_deg": 30}]},
            "solver": solver,
        },
        base=tmp_path,
    )


def _gsm_t(tmp_path):
    return parse_scenario(
        {
            "method": "gsm-t",
            "structure": {
                "shell": {"r_inner": 0.25, "r_outer": 0.3},
                "material": {"kind": "dielectric", "eps_r": 3.0},
                "analytic": True,
            },
            "antennas": [{"name": "feed", "canonical": {}, "l_max": 2, "r_a": 0.05}],
            "sweep": {"start_hz": 200e6, "stop_hz": 300e6, "points": 3},
            "excitations": [{"port": {}}, {"plane_wave": {"theta_deg": 90}}],
            "outputs": {
                "patterns": [{"kind": "phi", "angle_deg": 0, "step_deg": 10}],
                "rcs": [{"kind": "theta", "angle_deg": 90, "step_deg": 10}],
            },
        },
        base=tmp_path,
    )


def test_gsm_t_run_writes_every_product(tmp_path):
    out = tmp_path / "shell"
    report = run(_gsm_t(tmp_path), output_dir=out, cache=HybridCache(root=tmp_path, enabled=False))

    assert report.manifest[0] == SPARAM_NAME
    assert len(report.manifest) == 1 + 3 * 2
    for name in report.manifest:
        assert (out / name).exists(), f"{name} listed but not written"
    assert "pattern_feed_f000_x0_phi0.csv" in report.manifest
    assert "rcs_feed_f002_x1_theta90.csv" in report.manifest

    header, rows = read_csv(out / SPARAM_NAME)
    assert tuple(header) == SPARAM_HEADER
    assert [float(r[0]) for r in rows] == pytest.approx([200e6, 250e6, 300e6])
    assert all(float(r[5]) < 0.0 for r in rows), "A lossless radome cannot reflect more than 1"

    saved = json.loads((out / REPORT_NAME).read_text(encoding="utf-8"))
    assert saved["method"] == "gsm-t"
    assert saved["complexity"]["r_b"] == pytest.approx(0.3)


def test_mom_gsm_run_factors_once_per_frequency(tmp_path):
    cache = HybridCache(root=tmp_path / "cache")
    report = run(_mom_gsm(tmp_path), output_dir=tmp_path / "a", cache=cache)

    assert report.factorizations == 2
    assert report.smw_updates == 4
    assert report.transforms == 4
    labels = {row[1] for row in read_csv(tmp_path / "a" / SPARAM_NAME)[1]}
    assert labels == {"feed-pose0", "feed-pose1"}
    assert report.cache["writes"] == 4

    again = run(_mom_gsm(tmp_path), output_dir=tmp_path / "b", cache=cache)
    assert again.factorizations == 0, "Second run should reuse the cached factorizations"
    assert again.cache["hits"] >= 4
    result = compare(tmp_path / "a", tmp_path / "b")
    assert result.passed
    assert all(d.max_deviation <= 1e-9 for d in result.diffs)


def test_direct_and_low_rank_runs_agree(tmp_path):
    off = HybridCache(root=tmp_path, enabled=False)
    run(_mom_gsm(tmp_path, smw=True), output_dir=tmp_path / "smw", cache=off)
    direct = run(_mom_gsm(tmp_path, smw=False), output_dir=tmp_path / "direct", cache=off)

    assert direct.smw_updates == 0
    assert direct.factorizations == 4
    result = compare(tmp_path / "smw", tmp_path / "direct", "sparams=1e-8,pattern=1e-5")
    assert result.passed, result.to_dict()


def test_parallel_frequencies_keep_their_order(tmp_path):
    off = HybridCache(root=tmp_path, enabled=False)
    serial = run(_gsm_t(tmp_path), output_dir=tmp_path / "s", cache=off, workers=1)
    parallel = run(_gsm_t(tmp_path), output_dir=tmp_path / "p", cache=off, workers=3)

    assert serial.manifest == parallel.manifest
    s_bytes = (tmp_path / "s" / SPARAM_NAME).read_bytes()
    assert s_bytes == (tmp_path / "p" / SPARAM_NAME).read_bytes()


def test_compare_rejects_different_product_sets(tmp_path):
    off = HybridCache(root=tmp_path, enabled=False)
    run(_gsm_t(tmp_path), output_dir=tmp_path / "a", cache=off)
    run(_gsm_t(tmp_path), output_dir=tmp_path / "b", cache=off)
    (tmp_path / "b" / "pattern_feed_f001_x0_phi0.csv").unlink()

    with pytest.raises(ValidationError, match="product mismatch"):
        compare(tmp_path / "a", tmp_path / "b")
    with pytest.raises(ValidationError, match="not found"):
        compare(tmp_path / "a", tmp_path / "missing")


def test_compare_flags_deviations_beyond_tolerance(tmp_path):
    off = HybridCache(root=tmp_path, enabled=False)
    run(_gsm_t(tmp_path), output_dir=tmp_path / "a", cache=off)
    run(_gsm_t(tmp_path), output_dir=tmp_path / "b", cache=off)
    path = tmp_path / "b" / SPARAM_NAME
    lines = path.read_text(encoding="utf-8").splitlines()
    fields = lines[1].split(",")
    fields[3] = repr(float(fields[3]) + 0.01)
    lines[1] = ",".join(fields)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    result = compare(tmp_path / "a", tmp_path / "b")
    sparams = next(d for d in result.diffs if d.kind == "sparams")
    assert not result.passed
    assert sparams.max_deviation == pytest.approx(0.01, rel=1e-6)
    assert compare(tmp_path / "a", tmp_path / "b", {"sparams": 0.02}).passed


def test_tolerance_strings():
    tol = parse_tolerances("sparams=5e-2, pattern=0.5")

    assert tol == {"sparams": 5e-2, "pattern": 0.5, "rcs": 1e-3}
    with pytest.raises(ValidationError):
        parse_tolerances("phase=1")
    with pytest.raises(ValidationError):
        parse_tolerances("sparams=lots")
    assert np.isclose(parse_tolerances({"rcs": 2})["rcs"], 2.0)


def test_gsm_file_antenna_overlapping_the_structure_is_rejected(tmp_path):
    save_gsm(gsm_canonical_dipole(300e6, 1), tmp_path / "feed.hgsm")
    scenario = parse_scenario(
        {
            "method": "mom-gsm",
            "structure": {"sphere": {"radius": 0.2, "subdivisions": 1}},
            "frame": {"origin": [0.0, 0.0, 0.5]},
            "antennas": [{"name": "feed", "gsm": "feed.hgsm", "r_a": 0.4}],
            "sweep": {"frequencies_hz": [300e6]},
            "excitations": [{"port": {"index": 1}}],
        },
        base=tmp_path,
    )
    with pytest.raises(GeometryError, match="intersects"):
        run(scenario, output_dir=tmp_path / "out", cache=HybridCache(root=tmp_path, enabled=False))

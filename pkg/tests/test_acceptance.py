"""Acceptance suite: one test per benchmark criterion.

Each test prints a PASS/FAIL line (visible with pytest -s) and then asserts.
The full three-method benchmark at the default 256x256 grid runs once as a
module fixture; the remaining criteria use purpose-built small setups.
"""

import math
import time

import numpy as np
import pytest

from nfsar import baselines, cli, geometry as geo, io_formats, metrics
from nfsar import simulate as sim, solver
from nfsar.cli import default_config
from helpers import dense_matrix, ift_rect_spectrum, image_on, square_geometry

HALF_WAVELENGTH_M = 0.5 * geo.SPEED_OF_LIGHT_M_S / 10e9   # 0.01499 m


def report(number: int, name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[criterion {number}] {status} - {name}{suffix}")


@pytest.fixture(scope="module")
def bench_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("bench")
    config = default_config("paper1")
    config.output_dir = str(out)
    started = time.perf_counter()
    manifest = cli.run_bench(config)
    elapsed = time.perf_counter() - started
    return manifest, out, elapsed


@pytest.fixture(scope="module")
def noiseless_restore():
    config = default_config("paper1")
    geometry = config.geometry.to_geometry()
    bank = geo.build_psf_bank(geometry, config.psf.quantization(),
                              config.psf.truncation())
    dictionary = solver.VariantDictionary.from_bank(bank)
    scene = sim.paper_scene_1()
    degraded = sim.degrade(scene, geometry, bank)
    result = solver.restore(degraded, dictionary)
    gate = metrics.default_gate_radius(geometry)
    estimates = metrics.extract_scatterers(result.coefficients, -30.0)
    return metrics.match_scatterers(estimates, scene, gate)


def test_criterion_1_benchmark_comparison(bench_run):
    manifest, _, elapsed = bench_run
    methods = manifest["methods"]
    errors = {name: methods[name]["mean_amplitude_error_db"]
              for name in ("proposed", "ISTA", "CLEAN")}
    detected = methods["proposed"]["detected"]
    ordering = errors["proposed"] < errors["ISTA"] < errors["CLEAN"]
    ok = (errors["proposed"] <= 1.5 and detected == 13 and ordering
          and elapsed <= 300.0)
    report(1, "three-method benchmark comparison", ok,
           f"proposed {errors['proposed']:.3f} dB, ISTA {errors['ISTA']:.3f} dB, "
           f"CLEAN {errors['CLEAN']:.3f} dB, detected {detected}/13, "
           f"{elapsed:.0f} s")
    assert errors["proposed"] <= 1.5
    assert detected == 13
    assert ordering, f"ordering violated: {errors}"
    assert elapsed <= 300.0


def test_criterion_2_position_accuracy(bench_run, noiseless_restore):
    manifest, _, _ = bench_run
    clutter_max = manifest["methods"]["proposed"]["max_position_error_m"]
    noiseless_max = noiseless_restore.max_position_error_m
    ok = (noiseless_restore.n_truth == len(noiseless_restore.pairs) == 13
          and noiseless_max <= HALF_WAVELENGTH_M
          and clutter_max <= 0.0375)
    report(2, "position accuracy", ok,
           f"noiseless {noiseless_max:.5f} m <= {HALF_WAVELENGTH_M:.5f}, "
           f"clutter {clutter_max:.5f} m <= 0.0375")
    assert len(noiseless_restore.pairs) == 13
    assert noiseless_max <= HALF_WAVELENGTH_M
    assert clutter_max <= 0.0375


def test_criterion_3_azimuth_broadening():
    f0, bandwidth, rail = 10e9, 2e9, 5.0
    lam = geo.SPEED_OF_LIGHT_M_S / f0
    rho_r = geo.SPEED_OF_LIGHT_M_S / (2 * bandwidth)
    spacing_az = (lam * 14.0 / (2 * rail)) / 8.0
    spacing_rg = rho_r / 8.0
    n_az = 161
    n_rg = int(round(17.0 / spacing_rg))
    grid = geo.GridSpec(n_az, n_rg, spacing_az, spacing_rg,
                        -spacing_az * (n_az // 2), 12.5)
    geometry = geo.ImagingGeometry(f0, bandwidth, rail, grid)
    bank = geo.build_psf_bank(
        geometry,
        geo.PsfQuantization(delta_range_m=0.1,
                            delta_angle_rad=math.radians(0.25)),
        geo.PsfTruncation(min_level_db=-25.0))
    degraded = sim.degrade(sim.paper_scene_2(), geometry, bank)
    widths = {}
    for slant in (14.0, 28.0):
        i, j = grid.nearest_cell(0.0, slant)
        widths[slant] = (
            metrics.mainlobe_width_3db(np.abs(degraded.data[:, j]), spacing_az,
                                       peak_index=i),
            metrics.mainlobe_width_3db(np.abs(degraded.data[i, :]), spacing_rg,
                                       peak_index=j))
    az_ratio = widths[28.0][0] / widths[14.0][0]
    rg_ratio = widths[28.0][1] / widths[14.0][1]
    ok = 1.8 <= az_ratio <= 2.2 and abs(rg_ratio - 1.0) <= 0.05
    report(3, "azimuth mainlobe broadening", ok,
           f"azimuth ratio {az_ratio:.3f}, range ratio {rg_ratio:.3f}")
    assert 1.8 <= az_ratio <= 2.2
    assert abs(rg_ratio - 1.0) <= 0.05


def test_criterion_4_adjoint_identity():
    geometry = square_geometry(64, 0.0749481145, center_range_m=25.0)
    bank = geo.build_psf_bank(geometry,
                              truncation=geo.PsfTruncation(min_level_db=-30.0))
    dictionary = solver.VariantDictionary.from_bank(bank)
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        x = image_on(geometry.grid, rng.standard_normal((64, 64))
                     + 1j * rng.standard_normal((64, 64)))
        y = image_on(geometry.grid, rng.standard_normal((64, 64))
                     + 1j * rng.standard_normal((64, 64)))
        lhs = np.vdot(y.data, solver.apply(dictionary, x).data)
        rhs = np.vdot(solver.adjoint(dictionary, y).data, x.data)
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), 1e-300))
    ok = worst < 1e-10
    report(4, "adjoint identity on 100 random pairs", ok,
           f"worst relative error {worst:.2e}")
    assert worst < 1e-10


def test_criterion_5_psf_ift_oracle():
    geometry = square_geometry(256, 0.078125, center_range_m=25.0)
    spacing = geometry.grid.spacing_azimuth_m
    worst = 0.0
    for theta_deg in (0.0, 15.0, 30.0, 45.0):
        for slant in (14.0, 21.0, 25.0, 28.0):
            theta = math.radians(theta_deg)
            patch = geo.synthesize_psf_polar(geometry, slant, theta)
            h_az, h_rg = patch.truncation_radius_cells
            d_az = (np.arange(2 * h_az + 1) - h_az)[:, None] * spacing
            d_rg = (np.arange(2 * h_rg + 1) - h_rg)[None, :] * spacing
            oracle = ift_rect_spectrum(d_az, d_rg, theta,
                                       patch.resolution_range_m,
                                       patch.resolution_azimuth_m)
            worst = max(worst, float(np.max(np.abs(oracle - patch.samples))))
    ok = worst < 1e-6
    report(5, "closed-form PSF vs numerical IFT oracle", ok,
           f"worst max-abs error {worst:.2e}")
    assert worst < 1e-6


def test_criterion_6_solver_kkt_optimality():
    geometry = square_geometry(16, 0.075, center_range_m=25.0)
    bank = geo.build_psf_bank(
        geometry,
        geo.PsfQuantization(delta_range_m=0.05,
                            delta_angle_rad=math.radians(0.1)),
        geo.PsfTruncation(min_level_db=-30.0))
    dictionary = solver.VariantDictionary.from_bank(bank)
    dense = dense_matrix(dictionary)
    worst_off = -math.inf
    worst_stationarity = 0.0
    monotone = True
    for trial in range(20):
        rng = np.random.default_rng(1000 + trial)
        cells: list[tuple[int, int]] = []
        while len(cells) < 3:
            candidate = tuple(int(v) for v in rng.integers(0, 16, size=2))
            if all(max(abs(candidate[0] - c[0]), abs(candidate[1] - c[1])) >= 3
                   for c in cells):
                cells.append(candidate)
        x_true = np.zeros((16, 16), dtype=complex)
        for c in cells:
            x_true[c] = rng.standard_normal() + 1j * rng.standard_normal()
        y_vec = dense @ x_true.ravel()
        y = image_on(geometry.grid, y_vec.reshape(16, 16))
        lam = 0.01 * float(np.abs(dense.conj().T @ y_vec).max())
        result = solver.restore(y, dictionary, solver.SolverConfig(
            lambda_reg=lam, max_sweeps=3000, objective_tolerance=1e-14))
        trace = result.objective_trace
        monotone &= all(b <= a * (1 + 1e-12) + 1e-300
                        for a, b in zip(trace, trace[1:]))
        x_hat = result.coefficients.data.ravel()
        correlation = dense.conj().T @ (y_vec - dense @ x_hat)
        support = np.abs(x_hat) > 0
        worst_off = max(worst_off,
                        float(np.abs(correlation[~support]).max()) - lam)
        if support.any():
            stationarity = np.abs(correlation[support]
                                  - lam * x_hat[support] / np.abs(x_hat[support]))
            worst_stationarity = max(worst_stationarity, float(stationarity.max()))
    ok = worst_off <= 1e-6 and worst_stationarity < 1e-6 and monotone
    report(6, "lasso KKT optimality on 20 random instances", ok,
           f"off-support excess {worst_off:.2e}, "
           f"stationarity {worst_stationarity:.2e}, monotone {monotone}")
    assert worst_off <= 1e-6
    assert worst_stationarity < 1e-6
    assert monotone


def test_criterion_7_cross_module_consistency():
    geometry = square_geometry(48, 0.0375, center_range_m=25.0)
    bank = geo.build_psf_bank(geometry,
                              geo.PsfQuantization(delta_range_m=0.2),
                              geo.PsfTruncation(min_level_db=-30.0))
    dictionary = solver.VariantDictionary.from_bank(bank)
    scene_a = sim.SceneSpec((sim.Scatterer(0.2, 25.1, -3.0, 0.4),), "a")
    scene_b = sim.SceneSpec((sim.Scatterer(-0.4, 24.8, -9.0, 1.1),
                             sim.Scatterer(0.0, 25.4, 0.0)), "b")
    union = sim.SceneSpec(scene_a.scatterers + scene_b.scatterers, "ab")
    degraded = sim.degrade(union, geometry, bank)
    coefficients = sim.ComplexImage.zeros(geometry.grid)
    for sc in union.scatterers:
        cell = geometry.grid.nearest_cell(sc.azimuth_m, sc.range_m)
        coefficients.data[cell] = sc.linear_amplitude
    applied = solver.apply(dictionary, coefficients)
    apply_gap = float(np.max(np.abs(applied.data - degraded.data)))
    additive = sim.degrade(scene_a, geometry, bank).data \
        + sim.degrade(scene_b, geometry, bank).data
    additivity_gap = float(np.max(np.abs(degraded.data - additive)))
    ok = apply_gap < 1e-12 and additivity_gap < 1e-12
    report(7, "cross-module consistency", ok,
           f"apply vs degrade {apply_gap:.2e}, additivity {additivity_gap:.2e}")
    assert apply_gap < 1e-12
    assert additivity_gap < 1e-12


def test_criterion_8_clean_exactness_and_bias():
    rho = 0.0749481145
    spacing = rho / 2.0
    geometry = square_geometry(96, spacing, center_range_m=25.0)
    bank = geo.build_psf_bank(geometry, geo.PsfQuantization(delta_range_m=0.2))
    dictionary = solver.VariantDictionary.from_bank(bank)

    isolated = sim.Scatterer(spacing * 8, 25.0 + spacing * 4, -3.0, 0.7)
    degraded = sim.degrade(sim.SceneSpec((isolated,), "one"), geometry, bank)
    clean_one = baselines.clean_restore(degraded, bank, baselines.CleanConfig(
        loop_gain=1.0, stop_threshold_db=-60.0, max_components=10))
    cell = geometry.grid.nearest_cell(isolated.azimuth_m, isolated.range_m)
    exact_error = abs(clean_one.coefficients.data[cell]
                      - isolated.linear_amplitude)
    exact_cell = (np.count_nonzero(clean_one.coefficients.data) == 1
                  and clean_one.coefficients.data[cell] != 0)

    pair = sim.SceneSpec((sim.Scatterer(0.0, 25.0, 0.0),
                          sim.Scatterer(3 * spacing, 25.0, -10.0)), "pair")
    degraded_pair = sim.degrade(pair, geometry, bank)
    gate = metrics.default_gate_radius(geometry)
    lam = 0.01 * float(np.abs(dictionary.adjoint_array(degraded_pair.data)).max())
    mine = solver.restore(degraded_pair, dictionary, solver.SolverConfig(
        lambda_reg=lam, max_sweeps=2000, objective_tolerance=1e-13))
    clean_pair = baselines.clean_restore(degraded_pair, bank,
                                         baselines.CleanConfig())
    mine_report = metrics.match_scatterers(
        metrics.extract_scatterers(mine.coefficients, -40.0), pair, gate)
    clean_report = metrics.match_scatterers(
        metrics.extract_scatterers(clean_pair.coefficients, -40.0), pair, gate)
    bias_ok = (len(mine_report.pairs) == 2 and len(clean_report.pairs) == 2
               and mine_report.mean_amplitude_error_db
               < clean_report.mean_amplitude_error_db)
    ok = exact_error < 1e-9 and exact_cell and bias_ok
    report(8, "CLEAN exactness and closely-spaced bias", ok,
           f"isolated error {exact_error:.2e}, proposed "
           f"{mine_report.mean_amplitude_error_db:.3f} dB vs CLEAN "
           f"{clean_report.mean_amplitude_error_db:.3f} dB")
    assert exact_error < 1e-9
    assert exact_cell
    assert bias_ok


def test_criterion_9_determinism_and_format(tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    for out in (out_a, out_b):
        config = default_config("paper1")
        cli.apply_grid_override(config, 64)
        config.seed = 11
        config.output_dir = str(out)
        cli.run_bench(config)
    names_a = sorted(p.name for p in out_a.iterdir())
    names_b = sorted(p.name for p in out_b.iterdir())
    identical = names_a == names_b and all(
        (out_a / name).read_bytes() == (out_b / name).read_bytes()
        for name in names_a)

    rng = np.random.default_rng(99)
    round_trips_ok = True
    for k in range(50):
        n_az = int(rng.integers(1, 24))
        n_rg = int(rng.integers(1, 24))
        grid = geo.GridSpec(n_az, n_rg, float(rng.uniform(0.01, 1)),
                            float(rng.uniform(0.01, 1)),
                            float(rng.uniform(-5, 5)), float(rng.uniform(1, 40)))
        image = image_on(grid, rng.standard_normal((n_az, n_rg))
                         + 1j * rng.standard_normal((n_az, n_rg)))
        path = tmp_path / f"rt_{k}.nfsar"
        io_formats.write_image(path, image)
        back = io_formats.read_image(path)
        round_trips_ok &= back.data.tobytes() == image.data.tobytes()
        round_trips_ok &= (back.spacing_azimuth_m, back.spacing_range_m,
                           back.origin_azimuth_m, back.origin_range_m) == \
            (image.spacing_azimuth_m, image.spacing_range_m,
             image.origin_azimuth_m, image.origin_range_m)
    ok = identical and round_trips_ok
    report(9, "determinism and NFSAR1 round trip", ok,
           f"bench artifacts identical {identical}, "
           f"50 round trips ok {round_trips_ok}")
    assert identical
    assert round_trips_ok

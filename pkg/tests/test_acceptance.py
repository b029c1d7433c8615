"""Acceptance suite: one printed pass/fail line per criterion.

Each criterion is a separate test so a failure in one does not hide the
others; the verdict lines bypass pytest's output capture so they appear
in the run log either way.
"""

import time

import numpy as np
import pytest

from tirefit.cli import main as cli_main
from tirefit.fitting import SviConfig, fit_nelder_mead, fit_svi
from tirefit.fitting.svi import _initial_state, _pack, elbo_and_grad
from tirefit.preprocess import (
    AxleDataset,
    FilterSpec,
    filter_channel,
    thin_nearest_neighbor,
)
from tirefit.sensitivity import default_slip_grid, saltelli_indices, sobol_indices
from tirefit.study import StudyConfig, generate_synthetic, run_study
from tirefit.tire_model import (
    REFERENCE_PARAMS,
    ParamBounds,
    TireParams,
    evaluate,
    gradients,
)
from tirefit.vehicle_dynamics import (
    AxleGeometry,
    LsdSettings,
    VehicleParams,
    frame_forces,
    longitudinal_cog_force,
)

TRUTH = np.array([15.0, 2.0, 1.5, 0.8])
N_SEEDS = 10


@pytest.fixture
def report(capfd):
    def _report(number: int, name: str, ok: bool) -> None:
        with capfd.disabled():
            print(f"[criterion {number:02d}] {name}: "
                  f"{'PASS' if ok else 'FAIL'}", flush=True)
    return _report


def noisy(level, seed, n=500):
    rng = np.random.default_rng(seed)
    return generate_synthetic(REFERENCE_PARAMS, level, n, 0.002, 0.02, rng)


@pytest.fixture(scope="module")
def ten_studies():
    """One three-level study per seed; reused by criteria 2, 3 and 5."""
    studies = []
    start = time.perf_counter()
    for seed in range(N_SEEDS):
        config = StudyConfig(excitation_levels=(0.02, 0.08, 0.75), seed=seed,
                             svi=SviConfig(seed=seed))
        studies.append(run_study(config))
    elapsed = time.perf_counter() - start
    return studies, elapsed


def rows_by(studies, method, level):
    out = []
    for rows in studies:
        for r in rows:
            if r.method == method and np.isclose(r.level, level):
                out.append(r)
    return out


def test_criterion_01_round_trip_exactness(report):
    data = generate_synthetic(REFERENCE_PARAMS, 0.75, 500, 0.0, 0.0,
                              np.random.default_rng(0))
    start = time.perf_counter()
    result = fit_nelder_mead(data)
    elapsed = time.perf_counter() - start
    rel = np.abs(result.mean - TRUTH) / TRUTH
    ok = bool(np.all(rel < 1e-3) and elapsed < 1.0)
    report(1, "round-trip exactness (Nelder-Mead, noiseless)", ok)
    assert ok, (rel, elapsed)


def test_criterion_02_svi_accuracy(ten_studies, report):
    studies, elapsed = ten_studies
    rows = rows_by(studies, "svi", 0.75)
    means = np.array([r.mean for r in rows])
    avg_rel = np.mean(np.abs(means - TRUTH) / TRUTH, axis=0)
    # the fixture timed 10 studies x 3 levels x (SVI + NM); the SVI share
    # dominates, so per-fit time is bounded by elapsed / 30
    per_fit = elapsed / (N_SEEDS * 3)
    ok = bool(np.all(avg_rel < 0.05) and per_fit < 60.0)
    report(2, "SVI accuracy within 5% over 10 seeds", ok)
    assert ok, (avg_rel, per_fit)


def test_criterion_03_excitation_ordering(ten_studies, report):
    studies, _ = ten_studies
    counts = {}
    for method in ("nelder-mead", "svi"):
        n_ok = 0
        for rows in studies:
            mse = {round(r.level, 2): r.mse for r in rows if r.method == method}
            if mse[0.75] < mse[0.08] < mse[0.02]:
                n_ok += 1
        counts[method] = n_ok
    ok = all(v >= 9 for v in counts.values())
    report(3, "excitation ordering MSE(0.75)<MSE(0.08)<MSE(0.02) in >=9/10", ok)
    assert ok, counts


def test_criterion_04_peak_identifiability(report):
    levels = (0.10, 0.15, 0.20, 0.30, 0.50, 0.75, 1.00)
    config = StudyConfig(excitation_levels=levels, seed=0,
                         svi=SviConfig(seed=0))
    rows = run_study(config)
    d_err_ok = all(abs(r.mean[2] - 1.5) / 1.5 < 0.05 for r in rows)

    n_ordered = 0
    for seed in range(N_SEEDS):
        pair = run_study(StudyConfig(excitation_levels=(0.04, 0.10), seed=seed,
                                     svi=SviConfig(seed=seed)))
        stds = {round(r.level, 2): r.std[2] for r in pair if r.method == "svi"}
        if stds[0.10] < stds[0.04]:
            n_ordered += 1
    ok = d_err_ok and n_ordered >= 9
    report(4, "peak identifiability: D error <5% for level>=0.10, "
              "std(D) ordering >=9/10", ok)
    assert ok, (d_err_ok, n_ordered)


def test_criterion_05_curvature_uncertainty(ten_studies, report):
    studies, _ = ten_studies
    std_low = np.mean([r.std[3] for r in rows_by(studies, "svi", 0.08)])
    std_high = np.mean([r.std[3] for r in rows_by(studies, "svi", 0.75)])
    ok = std_low >= 3.0 * std_high
    report(5, f"curvature uncertainty std(E) ratio "
              f"{std_low / std_high:.2f} >= 3", ok)
    assert ok, (std_low, std_high)


def test_criterion_06_sobol_qualitative(report):
    start = time.perf_counter()
    result = sobol_indices(REFERENCE_PARAMS, slip_grid=default_slip_grid(200),
                           n_samples=100_000, seed=0)
    elapsed = time.perf_counter() - start
    grid = result.slip_grid
    i_lin = int(np.argmin(np.abs(grid - 0.01)))
    i_peak = int(np.argmin(np.abs(grid - 0.09)))
    st = {p: result.total_indices[p] for p in "BCDE"}
    linear_ok = st["E"][i_lin] < 0.05 and all(st[p][i_lin] > 0.15 for p in "BCD")
    peak_ok = st["D"][i_peak] == max(st[p][i_peak] for p in "BCDE")
    ok = bool(linear_ok and peak_ok and elapsed < 120.0)
    report(6, f"Sobol qualitative reproduction ({elapsed:.1f} s)", ok)
    assert ok, (st["E"][i_lin], [st[p][i_lin] for p in "BCD"], elapsed)


def test_criterion_07_sobol_estimator_validation(report):
    res = saltelli_indices(lambda p: p[:, 0] + 2.0 * p[:, 1],
                           [0.0, 0.0], [1.0, 1.0], 100_000,
                           np.random.default_rng(0))
    first_ok = (abs(res.first[0] - 0.2) < 0.02
                and abs(res.first[1] - 0.8) < 0.02)
    second_ok = np.all(np.abs(res.second) < 0.02)
    ok = bool(first_ok and second_ok)
    report(7, "Saltelli estimator vs additive surrogate", ok)
    assert ok, (res.first, res.second)


def test_criterion_08_force_balance_invariants(report):
    vp = VehicleParams(
        m=800.0, l=2.9, lr=1.4, h_cog=0.3, Izz=1000.0,
        c_drag=1.0, c_lift_f=0.4, c_lift_r=0.6, f_roll=0.012,
        front_tire=AxleGeometry(r_i=0.3, d_r=1e-7, c_tire=250000.0),
        rear_tire=AxleGeometry(r_i=0.3, d_r=1e-7, c_tire=250000.0),
        lsd=LsdSettings(preload=50.0, coast_coeff=0.15, drive_coeff=0.3),
        engine_brake_torque_max=400.0, driveline_ratio=1.0)
    rng = np.random.default_rng(0)
    ok = True
    for _ in range(10_000):
        ax = rng.uniform(-8, 8)
        ay = rng.uniform(-15, 15)
        vx = rng.uniform(5, 80)
        f = frame_forces(vp, ax, ay, vx, rng.uniform(-3, 3),
                         rng.uniform(-0.4, 0.4),
                         rng.uniform(30, 250), rng.uniform(30, 250))
        fx_cog = longitudinal_cog_force(vp, ax, vx)
        scale_x = max(1.0, abs(fx_cog))
        scale_y = max(1.0, abs(vp.m * ay))
        if abs(f.Fx_f + f.Fx_r - fx_cog) > 1e-9 * scale_x:
            ok = False
        if abs(f.Fy_f + f.Fy_r - vp.m * ay) > 1e-9 * scale_y:
            ok = False
        if fx_cog > 0 and f.Fx_f != 0.0:
            ok = False
    report(8, "force-balance invariants on 10^4 random frames", ok)
    assert ok


def test_criterion_09_gradient_suite(report):
    rng = np.random.default_rng(0)
    tire_ok = True
    for _ in range(20):
        p = TireParams(B=rng.uniform(5, 40), C=rng.uniform(1, 3),
                       D=rng.uniform(0.1, 2), E=rng.uniform(-1, 1))
        x = rng.uniform(-0.75, 0.75)
        g = gradients(p, x)
        for i, name in enumerate("BCDE"):
            h = 1e-6
            base = {"B": p.B, "C": p.C, "D": p.D, "E": p.E}
            up = dict(base)
            up[name] += h
            dn = dict(base)
            dn[name] -= h
            fd = (evaluate(TireParams(**up), x)
                  - evaluate(TireParams(**dn), x)) / (2 * h)
            if abs(g[i] - fd) > 1e-5 * max(1.0, abs(fd)):
                tire_ok = False

    data = noisy(0.75, 1, n=150)
    template = _initial_state(ParamBounds(), None, 0.0, 0.0, 0.05)
    base_vec = _pack(template)
    elbo_ok = True
    for _ in range(20):
        vec = base_vec + rng.normal(0, 0.3, len(base_vec))
        eps = rng.standard_normal((1, template.k))
        _, grad = elbo_and_grad(vec, template, data.excitation,
                                data.force_coeff, data.weight, eps)
        for i in range(len(vec)):
            h = 1e-6 * max(1.0, abs(vec[i]))
            up, dn = vec.copy(), vec.copy()
            up[i] += h
            dn[i] -= h
            fd = (elbo_and_grad(up, template, data.excitation,
                                data.force_coeff, data.weight, eps)[0]
                  - elbo_and_grad(dn, template, data.excitation,
                                  data.force_coeff, data.weight, eps)[0]) / (2 * h)
            if abs(grad[i] - fd) > 1e-4 * max(1.0, abs(fd)):
                elbo_ok = False
    ok = tire_ok and elbo_ok
    report(9, "gradient suite (tire params 1e-5, ELBO 1e-4)", ok)
    assert ok, (tire_ok, elbo_ok)


def test_criterion_10_preprocessing_properties(report):
    # Savitzky-Golay polynomial reproduction
    t = np.linspace(0, 1, 300)
    poly = 1.0 - 2.0 * t + 0.3 * t**2 + 4.0 * t**3
    out = filter_channel(poly, FilterSpec(kind="savitzky-golay", window=31,
                                          order=3))
    sg_ok = np.max(np.abs(out - poly)) < 1e-9

    # thinning pairwise-distance guarantee
    rng = np.random.default_rng(0)
    ds = AxleDataset(excitation=rng.random(400), force_coeff=rng.random(400))
    thin = thin_nearest_neighbor(ds, radius=0.05)
    pts = np.column_stack([thin.excitation / np.ptp(ds.excitation),
                           thin.force_coeff / np.ptp(ds.force_coeff)])
    dist = np.linalg.norm(pts[:, None] - pts[None, :], axis=-1)
    np.fill_diagonal(dist, np.inf)
    thin_ok = dist.min() >= 0.05 - 1e-12

    # offset compensation recovers a +0.1 injected bias within +-0.02
    from test_preprocess import make_frames
    from tirefit.preprocess import compensate_offsets
    frames = make_frames(vy_bias=0.1)
    frames.columns["vy_mps"] = frames["vy_mps"] + rng.normal(0, 0.02,
                                                             len(frames))
    _, offsets = compensate_offsets(frames)
    offset_ok = abs(offsets.vy - 0.1) < 0.02

    ok = bool(sg_ok and thin_ok and offset_ok)
    report(10, "preprocessing properties (SG, thinning, offsets)", ok)
    assert ok, (sg_ok, thin_ok, offset_ok)


def test_criterion_11_determinism(tmp_path, report):
    ds = noisy(0.75, 0, n=200)
    data_path = tmp_path / "data.csv"
    ds.write_csv(data_path)
    out = tmp_path / "fit.json"
    argv = ["--quiet", "fit", str(data_path), "--method", "svi",
            "--steps", "500", "--seed", "11", "--posterior-count", "100",
            "--output", str(out)]
    assert cli_main(argv) == 0
    fit_bytes = out.read_bytes()
    post_bytes = (tmp_path / "fit.posterior.csv").read_bytes()
    echo = tmp_path / "fit.json.config.json"
    echo_bytes = echo.read_bytes()
    assert cli_main(["--quiet", "fit", "--config", str(echo)]) == 0
    fit_ok = (out.read_bytes() == fit_bytes
              and (tmp_path / "fit.posterior.csv").read_bytes() == post_bytes
              and echo.read_bytes() == echo_bytes)

    sob = tmp_path / "sobol.csv"
    assert cli_main(["--quiet", "sobol", "--grid-points", "10",
                     "--samples", "2048", "--output", str(sob)]) == 0
    sob_bytes = sob.read_bytes()
    assert cli_main(["--quiet", "sobol", "--config",
                     str(tmp_path / "sobol.csv.config.json")]) == 0
    sobol_ok = sob.read_bytes() == sob_bytes

    ok = bool(fit_ok and sobol_ok)
    report(11, "determinism: byte-identical rerun from config echo", ok)
    assert ok, (fit_ok, sobol_ok)

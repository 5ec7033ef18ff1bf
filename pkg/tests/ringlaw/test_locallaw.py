import math

import numpy as np
import pytest

from ringlaw.errors import DomainError
from ringlaw.linalg import child_rng, hermitian_eigensystem
from ringlaw.locallaw import (
    Bump,
    DeviationRecord,
    DominationReport,
    QuadGrid,
    ScanGrid,
    block_local_law_scan,
    check_bulk,
    dyadic_etas,
    eta_integral_split,
    fit_domination,
    green_subordination_scan,
    linear_statistic_lhs,
    linear_statistic_rhs,
    local_law_scan,
    main_theorem_gap,
    refine_quad_grid,
    rhs_profile,
    smallest_sv_tail,
)
from ringlaw.measure import DiscreteMeasure, RingGeometry
from ringlaw.models import (
    BlockAdditiveEnsemble,
    SingleRingEnsemble,
    hermitization,
    im_m_w_integral,
    sample_X,
)
from ringlaw.parallel import TaskPool
from ringlaw.ring import RadialPotentialProfile


@pytest.fixture()
def disk_profile():
    """log-potential of the uniform law on the unit disk"""
    s = np.linspace(0.2, 2.5, 47)
    return RadialPotentialProfile(s, (s ** 2 - 1) / 2, None, 1.0, 1e-9)


@pytest.fixture()
def arcsine_block():
    one = DiscreteMeasure([1.0], [1.0])
    return BlockAdditiveEnsemble.from_measures(one, one, 16, seed=3)


def record(N, dev, ok=True):
    return DeviationRecord(N, 0, 0, 1.4, 0.5, dev, ok, '' if ok else 'failed')


def test_dyadic_etas():
    assert dyadic_etas(0.1, 1.0) == [1.0, 0.5, 0.25, 0.125]
    with pytest.raises(DomainError):
        dyadic_etas(1.0, 0.5)
    with pytest.raises(DomainError):
        dyadic_etas(0.0, 1.0)


def test_scan_grid(two_point):
    grid = ScanGrid([64], 2, w_values=[1.4])
    assert grid.eta_min(64) == pytest.approx(64 ** -0.9)
    assert grid.eta_values(64) == [2.0 ** -k for k in range(6)]
    geometry = RingGeometry.from_measure(two_point)
    ScanGrid([64], 1, w_values=[1.4j], geometry=geometry)
    with pytest.raises(DomainError):
        ScanGrid([64], 1, w_values=[1.0], geometry=geometry)
    with pytest.raises(DomainError):
        ScanGrid([], 1)
    with pytest.raises(DomainError):
        ScanGrid([64], 0)
    with pytest.raises(DomainError):
        ScanGrid([64], 1, eta_min_exponent=0.1)


def test_domination_report():
    records = []
    for N in (128, 256, 512):
        q = 2.0 * N ** 0.1
        records.extend(record(N, q * k / 20) for k in range(1, 21))
    report = DominationReport(records, dev_cap=100.0)
    assert sorted(report.per_N) == [128, 256, 512]
    assert report.per_N[128].count == 20
    assert report.per_N[128].max == pytest.approx(2.0 * 128 ** 0.1)
    assert report.fit.slope == pytest.approx(0.1, abs=1e-9)
    assert report.fit.passed
    assert report.passed
    assert not DominationReport(records, dev_cap=1.0).passed


def test_domination_report_counts_failures():
    records = [record(64, 1.0), record(64, math.nan, ok=False)]
    report = DominationReport(records)
    assert report.fit is None
    assert report.failures == 1
    assert report.per_N[64].max == 1.0
    assert not report.passed
    empty = DominationReport([record(64, math.nan, ok=False)])
    assert math.isnan(empty.per_N[64].q95)


def test_fit_domination():
    fit = fit_domination({128: 1.0, 256: 2.0, 512: 4.0})
    assert fit.slope == pytest.approx(1.0)
    assert not fit.passed
    assert fit_domination({128: 3.0, 256: 3.0, 512: 3.0}).slope == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(DomainError):
        fit_domination({128: 1.0, 256: 2.0})
    with pytest.raises(DomainError):
        fit_domination({128: 1.0, 256: 0.0, 512: 1.0})


def test_local_law_scan(two_point):
    e = SingleRingEnsemble.from_measure(two_point, 32)
    grid = ScanGrid([16, 32], 2, w_values=[1.4, 1.4j], eta_min_exponent=-0.5)
    report = local_law_scan(e, grid, seed=11)
    per_task = {N: 2 * len(grid.eta_values(N)) for N in (16, 32)}
    assert len(report.records) == 2 * per_task[16] + 2 * per_task[32]
    assert [r.task for r in report.records][::per_task[16]][:2] == [0, 1]
    assert all(r.ok and np.isfinite(r.dev) for r in report.records)
    assert report.fit is None
    again = local_law_scan(e, grid, seed=11)
    assert [r.dev for r in again.records] == [r.dev for r in report.records]


def test_local_law_scan_parallel(two_point):
    e = SingleRingEnsemble.from_measure(two_point, 16)
    grid = ScanGrid([16], 4, w_values=[1.4], eta_min_exponent=-0.5)
    serial = local_law_scan(e, grid, seed=2)
    with TaskPool(2) as pool:
        parallel = local_law_scan(e, grid, seed=2, map_fn=pool.map)
    assert [r.task for r in parallel.records] == [r.task for r in serial.records]
    assert [r.dev for r in parallel.records] == pytest.approx([r.dev for r in serial.records])


def test_local_law_scan_rejects_w(two_point):
    e = SingleRingEnsemble.from_measure(two_point, 16)
    with pytest.raises(DomainError):
        local_law_scan(e, ScanGrid([16], 1, w_values=[0.5]), seed=1)


@pytest.mark.slow
def test_local_law_domination(two_point):
    e = SingleRingEnsemble.from_measure(two_point, 512)
    grid = ScanGrid([128, 256, 512], 20, w_values=[1.4])
    with TaskPool(4) as pool:
        report = local_law_scan(e, grid, seed=20240611, map_fn=pool.map, dev_cap=20.0)
    assert report.fit.slope <= 0.2
    assert all(s.max <= 20.0 for s in report.per_N.values())


def test_bump():
    bump = Bump(0.5)
    assert bump(0.0) == 1.0
    assert bump(0.6) == 0.0
    zeta, area = QuadGrid(256).nodes(0.5)
    assert np.sum(bump(zeta)) * area == pytest.approx(bump.integral, rel=1e-3)
    assert np.sum(bump.laplacian(zeta)) * area == pytest.approx(0.0, abs=1e-2 * bump.laplacian_l1)
    l1 = np.sum(np.abs(bump.laplacian(zeta))) * area
    assert l1 == pytest.approx(bump.laplacian_l1, rel=1e-2)
    assert Bump(2.0).laplacian_l1 == bump.laplacian_l1
    with pytest.raises(DomainError):
        Bump(0.0)
    with pytest.raises(DomainError):
        QuadGrid(1)


def test_linear_statistic_lhs_normal_matrix():
    # for a normal X the statistic is the plain eigenvalue sum
    eigs = np.array([0.2, 0.5 + 0.3j, 2.0, -1.5])
    X = np.diag(eigs)
    bump = Bump(1.0)
    res = linear_statistic_lhs(X, 0.0, 0.0, bump, QuadGrid(512))
    assert res.jittered == 0
    assert res.value == pytest.approx(np.sum(bump(eigs)) / 4, abs=1e-3)


def test_linear_statistic_lhs_jitter():
    # 0.25 + 0.25i is a node of the 4 x 4 grid on the unit disk
    X = np.diag([0.25 + 0.25j, 3.0])
    res = linear_statistic_lhs(X, 0.0, 0.0, Bump(1.0), QuadGrid(4))
    assert res.jittered == 1
    assert np.isfinite(res.value)


def test_linear_statistic_rejects_alpha():
    with pytest.raises(DomainError):
        linear_statistic_lhs(np.eye(2), 0.0, 0.5, Bump(), QuadGrid(8))


@pytest.mark.parametrize("alpha", [0.0, 0.25])
def test_linear_statistic_rhs_disk(disk_profile, alpha):
    # f_w0 integrates against the flat density 1/pi to R^2/4
    bump = Bump(0.3)
    rhs = linear_statistic_rhs(disk_profile, 16, 0.5, alpha, bump, QuadGrid(256))
    assert rhs == pytest.approx(0.3 ** 2 / 4, abs=1e-3)


def test_refine_quad_grid(disk_profile):
    grid = refine_quad_grid(disk_profile, 16, 0.5, 0.0, Bump(0.3), start=16, rtol=1e-4)
    assert 32 <= grid.n <= 1024
    coarse = refine_quad_grid(disk_profile, 16, 0.5, 0.0, Bump(0.3), start=16, max_n=16)
    assert coarse.n == 16


def test_linear_statistic_rhs_builds_profile(two_point, disk_profile, mocker):
    build = mocker.patch('ringlaw.locallaw.potential_profile', return_value=disk_profile)
    rhs = linear_statistic_rhs(two_point, 16, 1.4, 0.25, Bump(0.3), QuadGrid(256))
    assert build.call_count == 1
    radii = build.call_args[0][1]
    assert len(radii) == 33
    assert radii[0] == pytest.approx(1.4 - 0.15)
    assert rhs == pytest.approx(0.3 ** 2 / 4, abs=1e-3)


def test_rhs_profile_rejects_origin(two_point):
    with pytest.raises(DomainError):
        rhs_profile(two_point, 1, 0.5, 0.0, Bump(1.0))


def test_main_theorem_gap(two_point, disk_profile, mocker):
    mocker.patch('ringlaw.locallaw.potential_profile', return_value=disk_profile)
    e = SingleRingEnsemble.from_measure(two_point, 16)
    records = main_theorem_gap(e, 1.4, 0.25, trials=3, seed=4, bump=Bump(0.2),
                               quad_grid=QuadGrid(128), task_offset=10)
    assert [r.task for r in records] == [10, 11, 12]
    assert all(r.ok for r in records)
    assert records[0].rhs == pytest.approx(0.2 ** 2 / 4, abs=1e-3)
    assert records[0].macro_ref == pytest.approx(1 / 16)
    for r in records:
        expected = abs(r.lhs - r.rhs) * 16 ** 0.5 / Bump(0.2).laplacian_l1
        assert r.gap_norm == pytest.approx(expected)
    again = main_theorem_gap(e, 1.4, 0.25, trials=3, seed=4, bump=Bump(0.2),
                             quad_grid=QuadGrid(128), task_offset=10)
    assert [r.lhs for r in again] == [r.lhs for r in records]
    with pytest.raises(DomainError):
        main_theorem_gap(e, 1.0, 0.25, trials=1, seed=4)


@pytest.mark.parametrize("radius,alpha", [(0.3, 0.25), (1.0, 0.0), (0.2, 0.0)])
def test_main_theorem_gap_rejects_wide_bump(two_point, radius, alpha, mocker):
    build = mocker.patch('ringlaw.locallaw.potential_profile')
    e = SingleRingEnsemble.from_measure(two_point, 16)
    with pytest.raises(DomainError, match="leaves the annulus"):
        main_theorem_gap(e, 1.4, alpha, trials=1, seed=4, bump=Bump(radius))
    assert build.call_count == 0


@pytest.mark.slow
@pytest.mark.parametrize("alpha", [0.0, 0.25])
def test_main_theorem_gap_bound(two_point, alpha):
    e = SingleRingEnsemble.from_measure(two_point, 512)
    with TaskPool(4) as pool:
        records = main_theorem_gap(e, 1.4, alpha, trials=10, seed=7,
                                   bump=Bump(0.1), map_fn=pool.map)
    assert sum(r.gap_norm <= 10.0 for r in records) >= 9


def test_smallest_sv_tail(two_point):
    e = SingleRingEnsemble.from_measure(two_point, 16)
    tail = smallest_sv_tail(e, 1.4, [1.0, 0.01, 0.1, 0.3, 0.03], trials=40, seed=9,
                            n_boot=50)
    assert tail.t_grid == [0.01, 0.03, 0.1, 0.3, 1.0]
    assert len(tail.records) == 40
    assert all(np.diff(tail.probabilities) >= 0)
    for r in tail.records:
        assert r.t == pytest.approx(1.4 * r.lambda1)
        assert r.w_abs == 1.4
    again = smallest_sv_tail(e, 1.4, tail.t_grid, trials=40, seed=9, n_boot=50)
    assert again.probabilities == tail.probabilities
    assert again.ci_low == tail.ci_low or math.isnan(tail.ci_low)


def test_smallest_sv_tail_rejects(two_point):
    e = SingleRingEnsemble.from_measure(two_point, 8)
    with pytest.raises(DomainError):
        smallest_sv_tail(e, 0.0, [0.1], trials=2, seed=1)
    with pytest.raises(DomainError):
        smallest_sv_tail(e, 1.4, [0.0, 0.1], trials=2, seed=1)
    identity = SingleRingEnsemble([1.0] * 8, symmetry='orthogonal')
    with pytest.raises(DomainError):
        smallest_sv_tail(identity, 1.4, [0.1], trials=2, seed=1)


@pytest.mark.slow
def test_smallest_sv_tail_slope(two_point):
    e = SingleRingEnsemble.from_measure(two_point, 128)
    t_grid = [0.005, 0.01, 0.02, 0.04, 0.08, 0.16]
    with TaskPool(4) as pool:
        tail = smallest_sv_tail(e, 1.4, t_grid, trials=500, seed=13, map_fn=pool.map)
    assert all(np.diff(tail.probabilities) >= 0)
    assert tail.slope > 0
    assert tail.ci_low > 0


def test_check_bulk(arcsine_block):
    check_bulk(arcsine_block, (-1.0, 1.0), [0.0])
    with pytest.raises(DomainError):
        check_bulk(arcsine_block, (1.5, 2.5), [2.0])
    with pytest.raises(DomainError):
        check_bulk(arcsine_block, (-1.0, 1.0), [1.5])


def test_block_local_law_scan(arcsine_block):
    grid = ScanGrid([8, 16], 2, energies=[0.0], eta_min_exponent=-0.5)
    report = block_local_law_scan(arcsine_block, (-0.5, 0.5), grid, seed=6)
    assert len(report.records) == 2 * len(grid.eta_values(8)) + 2 * len(grid.eta_values(16))
    assert all(r.ok for r in report.records)
    assert {r.point for r in report.records} == {0.0}
    assert {r.eta for r in report.records} == set(grid.eta_values(8)) | set(grid.eta_values(16))


@pytest.mark.slow
def test_block_strong_law(arcsine_block):
    grid = ScanGrid([128, 256, 512], 10, energies=[0.0])
    with TaskPool(4) as pool:
        report = block_local_law_scan(arcsine_block, (-0.5, 0.5), grid, seed=8,
                                      map_fn=pool.map)
    assert report.fit.slope <= 0.2


def test_green_subordination_scan(arcsine_block):
    records = green_subordination_scan(arcsine_block, [0.2 + 0.1j, 0.5j], trials=2, seed=3,
                                       bulk_window=(-1.0, 1.0))
    assert len(records) == 4
    assert [r.task for r in records] == [0, 0, 1, 1]
    for r in records:
        assert r.ok
        assert r.identity_residual < 1e-10
        assert r.eigvec_sup > 0
    with pytest.raises(DomainError):
        green_subordination_scan(arcsine_block, [0.3], trials=1, seed=3)


@pytest.mark.slow
def test_green_subordination_bounds():
    one = DiscreteMeasure([1.0], [1.0])
    e = BlockAdditiveEnsemble.from_measures(one, one, 512)
    with TaskPool(4) as pool:
        records = green_subordination_scan(e, [0.1j], trials=10, seed=21, map_fn=pool.map,
                                           bulk_window=(-1.0, 1.0))
    assert all(r.lambda_d_scaled <= 20 for r in records)
    assert all(r.eigvec_sup <= 10 for r in records)


def test_eta_integral_split(two_point):
    e = SingleRingEnsemble.from_measure(two_point, 32)
    spec = hermitian_eigensystem(hermitization(sample_X(e, child_rng(1, 0)), 1.4))
    split = eta_integral_split(spec, 32 ** -0.5, 100.0)
    assert split.total == pytest.approx(im_m_w_integral(spec, 0.0, 100.0), abs=1e-10)
    assert split.small <= split.small_bound
    assert split.lambda1 > 0
    with pytest.raises(DomainError):
        eta_integral_split(spec, 200.0, 100.0)

import numpy as np
import pytest

from stokeselast.adjoint import RING_WIDTH, Measurement, MeasurementSet
from stokeselast.fields import Grid2, ScalarField, boundary_ring, l2_norm
from stokeselast.landweber import (STOP_DISCREPANCY, STOP_GRADIENT, STOP_LINE_SEARCH,
                                   STOP_MAX_ITER, STOP_SOLVER, LandweberConfig, discrepancy_threshold,
                                   run)
from stokeselast.linsolve import NearSingularError
from stokeselast.phantom import add_noise

from conftest import OMEGA2


@pytest.fixture(scope="module")
def short_run(data32):
    g, mu_true, data = data32
    trace = run(ScalarField.constant(g, 1.0), OMEGA2, data,
                LandweberConfig(max_iterations=30, snapshot_every=10), mu_true=mu_true)
    return g, mu_true, data, trace


def test_true_modulus_is_a_fixed_point(data16):
    g, mu_true, data = data16
    trace = run(mu_true, OMEGA2, data, LandweberConfig(), mu_true=mu_true)
    assert trace.stop_reason == STOP_GRADIENT
    assert trace.iterations <= 1
    np.testing.assert_allclose(trace.final_mu.values, mu_true.values, atol=1e-10)


def test_zero_iterations_returns_start(data16):
    g, _, data = data16
    mu0 = ScalarField.constant(g, 1.0)
    trace = run(mu0, OMEGA2, data, LandweberConfig(max_iterations=0))
    assert trace.stop_reason == STOP_MAX_ITER and trace.iterations == 0
    assert trace.final_mu is mu0


def test_line_search_run_is_monotone(short_run):
    _, _, _, trace = short_run
    assert trace.stop_reason == STOP_MAX_ITER
    assert trace.monotone()
    assert [r.n for r in trace.records] == list(range(31))


def test_error_decreases_on_noiseless_data(short_run):
    _, _, _, trace = short_run
    e = np.array([r.l2_error for r in trace.records])
    assert np.all(np.diff(e) <= 0)
    assert all(r.h4_error is not None and r.h4_error > 0 for r in trace.records)


def test_boundary_ring_and_floor_preserved(short_run):
    g, _, _, trace = short_run
    ring = boundary_ring(g, RING_WIDTH)
    assert sorted(trace.snapshots) == [0, 10, 20, 30]
    for mu in trace.snapshots.values():
        assert np.array_equal(mu.values[ring], np.ones(ring.sum()))
        assert mu.values.min() >= LandweberConfig().mu_floor


def test_oversized_fixed_step_diverges(data32, short_run):
    g, mu_true, data = data32
    accepted = short_run[3].records[1].step
    trace = run(ScalarField.constant(g, 1.0), OMEGA2, data,
                LandweberConfig(sigma=100 * accepted, line_search=False, max_iterations=1))
    assert trace.objectives[1] > trace.objectives[0]
    assert not trace.monotone()


def test_floor_clamps_large_steps(data16):
    g, _, data = data16
    cfg = LandweberConfig(sigma=1e6, line_search=False, max_iterations=1, mu_floor=0.25)
    trace = run(ScalarField.constant(g, 1.0), OMEGA2, data, cfg)
    assert trace.final_mu.values.min() >= 0.25


def test_discrepancy_stop(data32):
    g, mu_true, clean = data32
    rec = clean.records[0]
    noisy = add_noise(rec.measured, 0.01, 1234)
    delta = l2_norm(noisy - rec.measured)
    data = MeasurementSet([Measurement(rec.boundary_data, noisy)], "gaussian", 0.01, delta, 1234)
    trace = run(ScalarField.constant(g, 1.0), OMEGA2, data, LandweberConfig(), mu_true=mu_true)
    assert trace.stop_reason == STOP_DISCREPANCY
    assert trace.records[-1].objective <= discrepancy_threshold(data, 1.5)
    assert trace.records[-2].objective > discrepancy_threshold(data, 1.5)


def test_solver_failure_mid_run(monkeypatch, data16):
    g, _, data = data16
    import stokeselast.landweber as lw
    real = lw.MisfitState
    calls = {"n": 0}

    def flaky(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] > 2:
            raise NearSingularError("forced")
        return real(*args, **kwargs)

    monkeypatch.setattr(lw, "MisfitState", flaky)
    trace = run(ScalarField.constant(g, 1.0), OMEGA2, data, LandweberConfig(line_search=False))
    assert trace.stop_reason == STOP_SOLVER
    assert "forced" in trace.message
    assert trace.iterations == 1


def test_line_search_gives_up(monkeypatch, data16):
    g, _, data = data16
    import stokeselast.landweber as lw
    real = lw.MisfitState

    class Worse(real):
        def __init__(self, *args, **kwargs):
            super().__init__(*args, **kwargs)
            if calls:
                self.objective = np.inf
            calls.append(1)

    calls = []
    monkeypatch.setattr(lw, "MisfitState", Worse)
    trace = run(ScalarField.constant(g, 1.0), OMEGA2, data, LandweberConfig(max_halvings=3))
    assert trace.stop_reason == STOP_LINE_SEARCH
    assert trace.iterations == 0


@pytest.mark.parametrize("kw", [dict(sigma=0.0), dict(max_iterations=-1),
                                dict(gradient_tolerance=0.0), dict(discrepancy_tau=0.5),
                                dict(mu_floor=0.0), dict(snapshot_every=-1), dict(max_halvings=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        LandweberConfig(**kw)


def test_trace_table(short_run):
    lines = short_run[3].to_tsv().splitlines()
    assert lines[0].split("\t") == ["n", "objective", "gradient_norm", "step", "l2_error",
                                    "h4_error"]
    assert lines[-1] == f"# stop_reason\t{STOP_MAX_ITER}"
    assert len(lines) == 1 + 31 + 1

"""The ten acceptance criteria at their stated tolerances.

Every criterion prints one ``PASS``/``FAIL`` line, repeated in the pytest
terminal summary. Criteria 1 to 9 are computed once per session in
deterministic mode (single BLAS thread); criterion 10 recomputes them and
requires bit-identical outputs.
"""

import hashlib
import time
from dataclasses import dataclass, field

import numpy as np
import pytest
from scipy.spatial.transform import Rotation
from threadpoolctl import threadpool_limits

from conftest import ACCEPTANCE_LINES
from stokeselast.adjoint import Measurement, MeasurementSet, check_gradient
from stokeselast.elasticity import limit_study
from stokeselast.fieldio import ChecksumError, read_field, write_field
from stokeselast.fields import CENTER, Grid2, ScalarField, VectorField2, l2_norm, sobolev_norm
from stokeselast.landweber import STOP_DISCREPANCY, LandweberConfig, discrepancy_threshold, run
from stokeselast.manufactured import stokes_case
from stokeselast.phantom import (add_noise, gaussian_inclusion, generate_phantom,
                                 shear_boundary_data)
from stokeselast.stokes import StokesProblem, solve_stokes
from stokeselast.symbols import condition_3d, lopatinskii_roots, nondegeneracy_2d

OMEGA2 = 25.0
N = 64


@dataclass
class Outcome:
    passed: bool
    detail: str
    outputs: tuple = field(repr=False)      # arrays whose bytes must reproduce exactly

    def digest(self) -> str:
        h = hashlib.sha256()
        for a in self.outputs:
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()


def acceptance_data(noise_level=0.0, seed=1234):
    g = Grid2.unit_square(N)
    mu_true = generate_phantom(gaussian_inclusion(g, 1.0, 0.15))
    F = shear_boundary_data(g, "shear-x")
    u = solve_stokes(StokesProblem(g, mu_true, OMEGA2, F)).u
    if noise_level == 0.0:
        return g, mu_true, MeasurementSet([Measurement(F, u, "shear-x")])
    um = add_noise(u, noise_level, seed)
    data = MeasurementSet([Measurement(F, um, "shear-x")], "gaussian", noise_level,
                          l2_norm(um - u), seed)
    return g, mu_true, data


def criterion_1():
    t0 = time.perf_counter()
    case = stokes_case(1.0)
    errs = []
    for n in (32, 64, 128):
        g = Grid2.unit_square(n)
        prob = StokesProblem(g, case.shear_modulus(g), 1.0, case.boundary_data(g),
                             case.body_force(g))
        errs.append(l2_norm(solve_stokes(prob).u - case.velocity(g)))
    errs = np.array(errs)
    orders = np.log2(errs[:-1] / errs[1:])
    elapsed = time.perf_counter() - t0
    ok = bool(orders.min() >= 1.9 and elapsed < 60)
    return Outcome(ok, f"orders {np.round(orders, 3).tolist()}, {elapsed:.1f} s", (errs,))


def criterion_2():
    g = Grid2.unit_square(N)
    mu = generate_phantom(gaussian_inclusion(g, 0.5, 0.15))
    res = limit_study(mu, OMEGA2, shear_boundary_data(g, "shear-x"), [1e2, 1e3, 1e4, 1e5])
    ok = bool(res.h1_slope <= -0.45 and res.div_slope <= -0.9 and res.monotone(0.05))
    return Outcome(ok, f"slope_h1 {res.h1_slope:.4f}, slope_div {res.div_slope:.4f}, "
                       f"monotone {res.monotone(0.05)}", (res.h1_errors, res.div_norms))


def criterion_3():
    g, _, data = acceptance_data()
    chk = check_gradient(ScalarField.constant(g, 1.0), OMEGA2, data, n_directions=5,
                         epsilons=(1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4), seed=0)
    best = np.array([d.best for d in chk.directions])
    ok = bool(len(best) >= 5 and best.max() <= 1e-5)
    return Outcome(ok, f"{len(best)} directions, max best mismatch {best.max():.2e}",
                   (best, np.array([d.exact for d in chk.directions])))


def criterion_4():
    t0 = time.perf_counter()
    g, mu_true, data = acceptance_data()
    trace = run(ScalarField.constant(g, 1.0), OMEGA2, data,
                LandweberConfig(max_iterations=500, line_search=True), mu_true=mu_true)
    elapsed = time.perf_counter() - t0
    err = trace.records[-1].l2_error
    strict = trace.monotone()
    ok = bool(err <= 0.05 and strict and trace.iterations <= 500 and elapsed < 600)
    return Outcome(ok, f"L2 error {err:.4f} after {trace.iterations} iterations "
                       f"({trace.stop_reason}), J non-increasing {strict}, {elapsed:.0f} s",
                   (trace.objectives, trace.final_mu.values))


def criterion_5():
    g, mu_true, data = acceptance_data(0.01, 1234)
    trace = run(ScalarField.constant(g, 1.0), OMEGA2, data,
                LandweberConfig(max_iterations=500, discrepancy_tau=1.5), mu_true=mu_true)
    err = trace.records[-1].l2_error
    ok = bool(trace.stop_reason == STOP_DISCREPANCY and err <= 0.15)
    return Outcome(ok, f"stop {trace.stop_reason} at iteration {trace.iterations} "
                       f"(J {trace.records[-1].objective:.3e} vs "
                       f"{discrepancy_threshold(data, 1.5):.3e}), L2 error {err:.4f}",
                   (trace.objectives, trace.final_mu.values))


STABILITY_MODES = [(1, 1), (1, 2), (2, 1), (2, 2), (1, 3), (3, 1), (2, 3), (3, 2), (3, 3), (1, 4)]


def stability_ratios(mode: str) -> np.ndarray:
    g = Grid2.unit_square(N)
    mu = generate_phantom(gaussian_inclusion(g, 1.0, 0.15))
    X, Y = g.coords(CENTER)
    window = (np.sin(np.pi * X) * np.sin(np.pi * Y)) ** 2
    F = shear_boundary_data(g, mode)
    u0 = solve_stokes(StokesProblem(g, mu, OMEGA2, F)).u
    ratios = []
    for m, n in STABILITY_MODES:
        dmu = ScalarField(g, CENTER, 1e-2 * np.sin(m * np.pi * X) * np.sin(n * np.pi * Y) * window)
        u1 = solve_stokes(StokesProblem(g, mu + dmu, OMEGA2, F)).u
        ratios.append(sobolev_norm(dmu, 4) / sobolev_norm(u1 - u0, 5))
    return np.array(ratios)


def criterion_6():
    out, ok, parts = [], True, []
    for mode in ("shear-x", "pure-shear"):
        r = stability_ratios(mode)
        spread = r.max() / r.min()
        ok &= bool(np.all(np.isfinite(r)) and r.min() > 0 and spread <= 50)
        parts.append(f"{mode} spread {spread:.2f}")
        out.append(r)
    return Outcome(ok, ", ".join(parts), tuple(out))


def criterion_7():
    I = np.eye(3)
    zero = condition_3d([I], [I]).margin
    A = np.diag([1.0, 2.0, 3.0])
    R = Rotation.from_rotvec(np.pi / 4 * np.ones(3) / np.sqrt(3)).as_matrix()
    At = R @ A @ R.T
    margin = condition_3d([A], [At]).margin
    xi = np.random.default_rng(0).standard_normal((10 ** 6, 3))
    xi /= np.linalg.norm(xi, axis=1, keepdims=True)
    oracle = (np.linalg.norm(np.cross(xi @ A.T, xi), axis=1)
              + np.linalg.norm(np.cross(xi @ At.T, xi), axis=1)).min()
    rel = abs(margin - oracle) / oracle
    ok = bool(zero == 0.0 and rel <= 0.01)
    return Outcome(ok, f"identity margin {zero}, rotated {margin:.6f} vs oracle {oracle:.6f} "
                       f"({rel:.2e})", (np.array([zero, margin, oracle]),))


def criterion_8():
    g = Grid2.unit_square(N)
    compression = nondegeneracy_2d(VectorField2.from_function(g, lambda X, Y: (X, -Y))).margin
    profile = nondegeneracy_2d(
        VectorField2.from_function(g, lambda X, Y: (Y * (1 - Y), 0 * X))).margin
    ok = bool(abs(compression - 1.0) <= 1e-12 and profile <= g.hy ** 2)
    return Outcome(ok, f"(x, -y) margin {compression!r}, (y(1-y), 0) margin {profile:.2e} "
                       f"vs h^2 {g.hy ** 2:.2e}", (np.array([compression, profile]),))


def criterion_9():
    rng = np.random.default_rng(20261016)
    worst, counts_ok, roots = 0.0, True, []
    for _ in range(100):
        a, b, c = rng.uniform(0.1, 10), rng.uniform(-10, 10), rng.uniform(-10, 10)
        rep = lopatinskii_roots(a, b, c)
        ref = np.roots([a, 1j * b, c])
        got = np.array(rep.roots)
        d = np.abs(got[:, None] - ref[None, :])
        worst = max(worst, min(max(d[0, 0], d[1, 1]), max(d[0, 1], d[1, 0])))
        # roots on the imaginary axis count as non-decaying on both sides
        ref_count = int(np.sum(ref.real < -1e-10))
        counts_ok &= rep.decaying == ref_count
        roots.append(got)
    ok = bool(worst <= 1e-10 and counts_ok)
    return Outcome(ok, f"max root deviation {worst:.2e}, decay counts consistent {counts_ok}",
                   (np.array(roots),))


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
            6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9}


def compute_all() -> dict:
    with threadpool_limits(1):
        return {k: f() for k, f in CRITERIA.items()}


@pytest.fixture(scope="session")
def outcomes():
    return compute_all()


def report(k: int, outcome: Outcome):
    line = f"criterion {k:2d}: {'PASS' if outcome.passed else 'FAIL'}  {outcome.detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    if not outcome.passed:
        pytest.fail(line, pytrace=False)


@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(outcomes, k):
    report(k, outcomes[k])


def test_criterion_10(outcomes, tmp_path):
    g = Grid2.unit_square(N)
    mu = generate_phantom(gaussian_inclusion(g, 1.0, 0.15))
    u = solve_stokes(StokesProblem(g, mu, OMEGA2, shear_boundary_data(g, "shear-x"))).u
    exact = True
    for name, f in (("mu", mu), ("u", u)):
        back = read_field(write_field(tmp_path / f"{name}.field", f))
        for a, b in zip(f.components() if name == "u" else [f],
                        back.components() if name == "u" else [back]):
            exact &= a.location == b.location and a.values.tobytes() == b.values.tobytes()
    payload = tmp_path / "u.field.f64"
    raw = bytearray(payload.read_bytes())
    raw[len(raw) // 2] ^= 0x01
    payload.write_bytes(bytes(raw))
    try:
        read_field(tmp_path / "u.field")
        detected = False
    except ChecksumError:
        detected = True
    again = compute_all()
    differing = [k for k in CRITERIA if again[k].digest() != outcomes[k].digest()]
    ok = bool(exact and detected and not differing)
    report(10, Outcome(ok, f"round trip bit-exact {exact}, corruption detected {detected}, "
                           f"non-reproducible criteria {differing or 'none'}", ()))

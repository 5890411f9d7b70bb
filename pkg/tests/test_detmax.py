import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relaylab import detmax
from relaylab.channel import AntennaConfig, PowerConstraints, Topology, realization
from relaylab.detmax import (
    CompiledProblem,
    DetMaxProblem,
    Hypograph,
    InfeasibleStart,
    LinearConstraint,
    LogDetTerm,
    MatrixVar,
    PsdConstraint,
    ScalarVar,
    check_solution,
    pack_hermitian,
    solve,
    unpack_hermitian,
)
from relaylab.fullduplex import _relay_program, cutset_rate
from relaylab.hermitian import waterfill_capacity
from relaylab.oracles import ScalarInstance, cutset_oracle

from conftest import random_psd, random_unitary


def capacity_problem(g, power, dim=None):
    dim = g.shape[1] if dim is None else dim
    return DetMaxProblem(
        matrix_vars=[MatrixVar("Q", dim)],
        scalar_vars=[ScalarVar("t", None)],
        hypographs=[Hypograph("t", [LogDetTerm([("Q", g)])])],
        objective="t",
        linear=[LinearConstraint(traces=[("Q", np.eye(dim))], bound=power)],
        initial={"Q": power / (2 * dim) * np.eye(dim, dtype=complex)},
    )


def relay_problem(seed=3, m=2):
    ch = realization(AntennaConfig(m, m, m, m), Topology(), seed, 0)
    h1 = np.vstack([ch.h11, ch.h21])
    return _relay_program(h1, ch.h11, ch.h12, PowerConstraints(1.0, 1.0)), ch


def test_identity_channel():
    sol = solve(capacity_problem(np.eye(3), 1.0))
    assert sol.objective_value == pytest.approx(3 * np.log(1 + 1 / 3), abs=1e-6)
    np.testing.assert_allclose(sol.values["Q"], np.eye(3) / 3, atol=1e-4)
    assert sol.converged


def test_scalar_problem():
    sol = solve(capacity_problem(np.ones((1, 1)), 2.0))
    assert sol.objective_value == pytest.approx(np.log(3.0), abs=1e-6)


def test_matches_waterfilling(rng):
    g = (rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))) / np.sqrt(2)
    sol = solve(capacity_problem(g, 1.0))
    _, ref = waterfill_capacity(g, 1.0)
    assert abs(sol.objective_value - ref) / np.log(2) < 1e-4
    assert sol.objective_value <= ref + 1e-9


def test_scalar_relay_instance_against_grid():
    inst = ScalarInstance(1, 2, 2)
    h11, h21, h12 = (np.array([[v]], dtype=complex) for v in (1, 2, 2))
    prob = _relay_program(np.vstack([h11, h21]), h11, h12, PowerConstraints(1, 1))
    sol = solve(prob)
    assert abs(sol.objective_value - cutset_oracle(inst)) / np.log(2) < 1e-3


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4))
def test_pack_round_trip(n):
    rng = np.random.default_rng(n)
    x = random_psd(n, rng)
    np.testing.assert_allclose(unpack_hermitian(pack_hermitian(x), n), x, atol=1e-12)


def test_barrier_gradient_and_hessian_finite_differences():
    prob, _ = relay_problem()
    # add a bandwidth-weighted term so the perspective path is exercised too
    prob.scalar_vars.append(ScalarVar("w", 0.0))
    prob.hypographs.append(Hypograph("t", [LogDetTerm([("Qc", np.eye(2))], "w")], label="perspective"))
    prob.linear.append(LinearConstraint(scalars=[("w", 1.0)], bound=1.0))
    prob.initial["w"] = 0.5
    cp = CompiledProblem(prob)
    x0 = detmax._initial_point(cp)
    f0, g, H = cp.barrier(x0)
    h = 1e-6
    g_fd = np.zeros_like(x0)
    H_fd = np.zeros_like(H)
    for i in range(x0.size):
        e = np.zeros_like(x0)
        e[i] = h
        fp, gp, _ = cp.barrier(x0 + e)
        fm, gm, _ = cp.barrier(x0 - e)
        g_fd[i] = (fp - fm) / (2 * h)
        H_fd[:, i] = (gp - gm) / (2 * h)
    assert np.linalg.norm(g - g_fd) / np.linalg.norm(g) < 1e-4
    assert np.linalg.norm(H - H_fd) / np.linalg.norm(H) < 1e-4


def test_barrier_is_none_outside_domain():
    cp = CompiledProblem(capacity_problem(np.eye(2), 1.0))
    x = detmax._initial_point(cp)
    x_bad = x.copy()
    x_bad[:2] = 5.0  # trace above the budget
    assert cp.barrier(x_bad) is None


def test_check_solution_cases():
    prob, _ = relay_problem()
    sol = solve(prob)
    rep = check_solution(prob, sol)
    assert rep.feasible, rep.violations
    # injected violation
    bad_values = dict(sol.values)
    bad_values["Q"] = sol.values["Q"] + 0.1 * np.eye(sol.values["Q"].shape[0])
    bad = detmax.DetMaxSolution(sol.objective_value, bad_values, sol.diagnostics)
    assert not check_solution(prob, bad).feasible
    # hand-built feasible, suboptimal point
    q0 = prob.initial["Q"]
    vals = {"Q": q0, "Qc": prob.initial["Qc"], "t": 0.0}
    cp = CompiledProblem(prob)
    x = cp.pack(vals)
    t = min(cp.hypograph_values(x)) - 1e-3
    vals["t"] = t
    manual = detmax.DetMaxSolution(min(cp.hypograph_values(cp.pack(vals))), vals, sol.diagnostics)
    rep = check_solution(prob, manual)
    assert rep.feasible, rep.violations
    assert rep.objective < sol.objective_value


def test_stage_objectives_nondecreasing():
    prob, _ = relay_problem(seed=8)
    sol = solve(prob)
    obj = np.array(sol.diagnostics.stage_objectives)
    assert obj.size == sol.diagnostics.stages
    assert np.all(np.diff(obj) >= -1e-9 * np.abs(obj[1:]).max())


def test_hypograph_activity():
    prob, _ = relay_problem(seed=5)
    sol = solve(prob)
    cp = CompiledProblem(prob)
    vals = cp.hypograph_values(cp.pack(sol.values))
    assert min(vals) - sol.values["t"] < 1e-6
    assert sol.objective_value == pytest.approx(min(vals), abs=1e-12)


def test_unitary_congruence_invariance():
    rng = np.random.default_rng(21)
    prob, ch = relay_problem(seed=11)
    u1, u2 = random_unitary(2, rng), random_unitary(2, rng)
    h11, h21, h12 = ch.h11 @ u1, ch.h21 @ u1, ch.h12 @ u2
    rotated = _relay_program(np.vstack([h11, h21]), h11, h12, PowerConstraints(1.0, 1.0))
    a = solve(prob).objective_value
    b = solve(rotated).objective_value
    assert abs(a - b) < 1e-8


def test_psd_constraint_and_bounded_scalar():
    # max t <= log(1 + x), x <= 3 via PSD constraint 3 - x >= 0 on a 1x1 variable
    prob = DetMaxProblem(
        matrix_vars=[MatrixVar("X", 1)],
        scalar_vars=[ScalarVar("t", None)],
        hypographs=[Hypograph("t", [LogDetTerm([("X", np.ones((1, 1)))])])],
        objective="t",
        psd=[PsdConstraint([("X", np.ones((1, 1)), -1.0)], const=3.0 * np.ones((1, 1)))],
        initial={"X": np.ones((1, 1), complex)},
    )
    assert solve(prob).objective_value == pytest.approx(np.log(4.0), abs=1e-6)


def test_infeasible_start_is_reported():
    prob = capacity_problem(np.eye(2), 1.0)
    prob.initial["Q"] = 2.0 * np.eye(2, dtype=complex)  # violates the trace bound
    with pytest.raises(InfeasibleStart):
        solve(prob)


def test_validation_rejects_unknown_names():
    prob = capacity_problem(np.eye(2), 1.0)
    prob.linear.append(LinearConstraint(traces=[("Z", np.eye(2))], bound=1.0))
    with pytest.raises(ValueError):
        prob.validate()


def test_dump_lists_declarations():
    prob, _ = relay_problem()
    text = prob.dump()
    assert "Q" in text and "first cut" in text and "second cut" in text


def test_cutset_report_passes_checker():
    rep = cutset_rate(realization(AntennaConfig(2, 2, 2, 2), Topology(), 2, 0), PowerConstraints(1, 1))
    assert check_solution(rep.values["problem"], rep.values["solution"]).feasible

"""Pseudo-arclength continuation: tangents, steps, classification, traces."""

import numpy as np
import pytest

from conftest import PARAMS
from spark_branch.model import Parameters
from spark_branch.grid import RadialGrid
from spark_branch.electron import sparking_voltage
from spark_branch.continuation import (DEFAULT_LIMITS, Branch, BranchPoint,
                                       Termination, StepFailure,
                                       initial_tangent, arclength_step,
                                       tangent_and_sigma, trace_branch,
                                       state_norm, high_voltage_diagnostic,
                                       _pack_weights, _diagnostics, _classify)
from spark_branch.steady import State, pack, trivial_state

P1 = PARAMS["(2,3,1)"]

TERMINATION_KINDS = {"DensityBlowup", "VoltageBlowup", "HalfLoop",
                     "FieldDegeneracy", "PositivityLoss", "MaxSteps",
                     "NewtonFailure"}


def _start_point(cache, n):
    g = cache.grid(n)
    lam = cache.spark("(2,3,1)", n).lambda_dagger
    st = trivial_state(lam, g)
    return g, lam, BranchPoint(0.0, st, _diagnostics(st, g, 0, 0.0))


def test_initial_tangent_is_normalized_profile_direction(cache):
    g = cache.grid(129)
    lam = cache.spark("(2,3,1)", 129).lambda_dagger
    t = initial_tangent(lam, cache.triple("(2,3,1)", 129), g)
    # on the trivial family the residual is identically zero in lambda, so
    # the tangent cannot have a voltage component
    assert t.dlam == 0.0
    pw = _pack_weights(g)
    assert np.dot(pw * t.x, t.x) == pytest.approx(1.0, abs=1e-12)
    # orientation: nonnegative electron part
    n = g.n
    assert np.min(t.x[n - 1:2 * n - 2]) >= -1e-12


def test_first_step_length_and_voltage(cache):
    g, lam, pt0 = _start_point(cache, 129)
    t0 = initial_tangent(lam, cache.triple("(2,3,1)", 129), g)
    for h in (1e-3, 1e-2):
        pt, h_used, _ = arclength_step(pt0, t0, h, P1, g)
        assert h_used == h
        # the state leaves along the tangent: the arclength constraint puts
        # its weighted norm at h up to the curvature correction
        assert state_norm(pt.state, g) == pytest.approx(h, rel=1e-2)
        # voltage offset from the trace start is the O(delta) gap between
        # the scanned root and the discrete bifurcation point, plus O(h)
        assert abs(pt.state.lam - lam) <= 5e-3


def test_parametrization_gap_halves_with_h(cache):
    g, lam, pt0 = _start_point(cache, 129)
    t0 = initial_tangent(lam, cache.triple("(2,3,1)", 129), g)
    pw = _pack_weights(g)

    def dist(a, b):
        dx = pack(a) - pack(b)
        return float(np.sqrt(np.dot(pw * dx, dx) + (a.lam - b.lam) ** 2))

    def state_at(h, steps):
        pt, t = pt0, t0
        for _ in range(steps):
            pt, _, t = arclength_step(pt, t, h, P1, g)
        return pt.state

    gap_full = dist(state_at(0.02, 1), state_at(0.01, 2))
    gap_half = dist(state_at(0.01, 1), state_at(0.005, 2))
    assert gap_full / gap_half == pytest.approx(2.0, abs=0.3)


def test_tangent_continuity_along_first_steps(cache):
    g, lam, pt0 = _start_point(cache, 129)
    t = initial_tangent(lam, cache.triple("(2,3,1)", 129), g)
    pw = _pack_weights(g)
    pt = pt0
    for _ in range(3):
        pt, _, t_new = arclength_step(pt, t, 1e-3, P1, g)
        dot = np.dot(pw * t.x, t_new.x) + t.dlam * t_new.dlam
        assert dot > 0.9
        t = t_new


def test_step_failure_below_h_min(cache):
    g, lam, pt0 = _start_point(cache, 129)
    t0 = initial_tangent(lam, cache.triple("(2,3,1)", 129), g)
    # an unreachable corrector tolerance exhausts the halving ladder
    with pytest.raises(StepFailure) as exc:
        arclength_step(pt0, t0, 1e-3, P1, g, h_min=1e-4, tol=1e-16)
    assert exc.value.h_last < 1e-4


def test_bordered_tangent_sigma_positive_on_branch(branch129_long, cache):
    # the shared factorization reports a healthy smallest singular value
    # away from the bifurcation point
    sig = [pt.diagnostics["sigma_min"] for pt in branch129_long.points[5:50]]
    assert np.min(sig) > 1e-4


def test_trace_rejects_unknown_limit_keys(cache):
    with pytest.raises(ValueError):
        trace_branch(P1, cache.grid(129), limits={"max_stepz": 10})


def test_trace_max_steps_envelope(cache):
    g = cache.grid(129)
    br = trace_branch(P1, g, limits={"max_steps": 12})
    assert br.termination.kind == "MaxSteps"
    assert len(br.points) == 13
    assert br.lambda_dagger == cache.spark("(2,3,1)", 129).lambda_dagger
    assert br.grid is g
    s = np.array([pt.s for pt in br.points])
    assert np.all(np.diff(s) > 0.0)
    for pt in br.points[1:]:
        d = pt.diagnostics
        assert d["residual_norm"] <= 1e-10
        assert d["positive"]
        assert d["min_field"] > DEFAULT_LIMITS["field_floor"]
    assert br.warnings == []


def test_trace_is_deterministic(cache):
    g = cache.grid(129)
    a = trace_branch(P1, g, limits={"max_steps": 20})
    b = trace_branch(P1, g, limits={"max_steps": 20})
    assert len(a.points) == len(b.points)
    for pa, pb in zip(a.points, b.points):
        assert pa.s == pb.s
        assert pa.state.lam == pb.state.lam
        assert np.array_equal(pa.state.rho_i, pb.state.rho_i)


@pytest.mark.parametrize("limits,kind", [
    ({"sup_density_cap": 1e-6}, "DensityBlowup"),
    ({"lambda_cap": 3.0}, "VoltageBlowup"),
    ({"field_floor": 1.9}, "FieldDegeneracy"),
    # density cap outranks the voltage cap when both are tripped
    ({"sup_density_cap": 1e-6, "lambda_cap": 3.0}, "DensityBlowup"),
])
def test_trace_classification_triggers(cache, limits, kind):
    br = trace_branch(P1, cache.grid(129), limits=dict(limits, max_steps=10))
    assert br.termination.kind == kind
    assert br.termination.evidence["s"] == br.points[-1].s


def test_half_loop_classification_unit(cache):
    # synthetic return to the trivial family at higher voltage; the recheck
    # must flag that the landing voltage is not actually a root of B
    g = cache.grid(129)
    lam = cache.spark("(2,3,1)", 129).lambda_dagger
    st = trivial_state(lam + 1.0, g)
    pt = BranchPoint(4.0, st, _diagnostics(st, g, 2, 0.0))
    term = _classify(pt, lam, DEFAULT_LIMITS, P1, g)
    assert term is not None and term.kind == "HalfLoop"
    assert term.evidence["lambda_ddagger"] == pytest.approx(lam + 1.0)
    assert not term.evidence["B_consistent"]
    assert abs(term.evidence["residual_B"]) > 0.05


def test_positivity_loss_classification_unit(cache):
    g = cache.grid(129)
    lam = cache.spark("(2,3,1)", 129).lambda_dagger
    r = g.r
    Re = 0.3 * np.sin(np.pi * (r - 1.0))
    Re[g.n // 2] = -1e-6
    Re[0] = 0.0
    st = State(lam - 1e-4, 0.2 * (r - 1.0) * (2 - r), Re, np.zeros(g.n))
    pt = BranchPoint(1.0, st, _diagnostics(st, g, 2, 0.0))
    assert not pt.diagnostics["positive"]
    term = _classify(pt, lam, DEFAULT_LIMITS, P1, g)
    assert term.kind == "PositivityLoss"
    # healthy amplitude, isolated zero: artifact, not a collapse
    assert term.evidence["artifact_suspected"]
    assert not term.evidence["global_collapse"]
    # collapsed profile: the genuine ending
    st2 = State(lam - 1e-4, np.zeros(g.n), -1e-12 * np.ones(g.n), np.zeros(g.n))
    pt2 = BranchPoint(1.0, st2, _diagnostics(st2, g, 2, 0.0))
    term2 = _classify(pt2, lam, DEFAULT_LIMITS, P1, g)
    assert term2.kind == "PositivityLoss"
    assert term2.evidence["global_collapse"]


def test_high_voltage_diagnostic_refusals(cache):
    g = cache.grid(129)
    br = trace_branch(P1, g, limits={"max_steps": 10})
    rep = high_voltage_diagnostic(br, P1)
    assert not rep.applicable
    assert "MaxSteps" in rep.reason

    fake = Branch(br.points, Termination("VoltageBlowup", {}), br.lambda_dagger,
                  g, [])
    rep = high_voltage_diagnostic(fake, Parameters(np.log(2.0), 3.0, 1.0))
    assert not rep.applicable
    assert "hypothesis" in rep.reason

    short = Branch(br.points[:5], Termination("VoltageBlowup", {}),
                   br.lambda_dagger, g, [])
    rep = high_voltage_diagnostic(short, P1)
    assert not rep.applicable


def test_high_voltage_diagnostic_analyzes_fake_blowup_tail(cache):
    # on this branch the densities grow with s, so the monotone-decay check
    # must come back negative while still being applicable
    g = cache.grid(129)
    br = trace_branch(P1, g, limits={"max_steps": 40})
    fake = Branch(br.points, Termination("VoltageBlowup", {}), br.lambda_dagger,
                  g, [])
    rep = high_voltage_diagnostic(fake, P1)
    assert rep.applicable
    assert rep.sup_rho_i_monotone is False
    assert rep.ok is False


def test_newton_failure_recorded_not_raised(cache):
    # unreachable corrector tolerance: the trace must come back classified,
    # with the evidence naming the failure, instead of raising
    g = cache.grid(129)
    br = trace_branch(P1, g, limits={"max_steps": 10}, tol=1e-16)
    assert br.termination.kind == "NewtonFailure"
    assert "error" in br.termination.evidence
    assert len(br.points) >= 1

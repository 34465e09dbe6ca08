import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracle
from zzcancel.circuit import CNOT, Circuit, H, Rz, Rzz, Topology, X, builtin_topology, indexed_schedule
from zzcancel.compensator import (
    CompensationPlan,
    Insertion,
    NoTrivialLocation,
    default_theta_grid,
    empty_plan,
    hcnot,
    hcnot_sites,
    insert,
    search_hcnot,
    search_rz,
    trivial_locations,
)
from zzcancel.rewrite import unitary_equivalent
from zzcancel.simulator import Injection, NoiseSpec, outcome_probabilities, run_state, state_fidelity
from zzcancel.steane import exact_error_probs, ideal_state, reorder_probe, steane_plus_encoder
from zzcancel.tracer import trace_curve

THETA = -math.pi / 3.5
BELL = Circuit(2, (H(0), CNOT(0, 1)))


def pz(c, ns):
    return exact_error_probs(c, ns)[1]


def two_qubit_stabilizer_states():
    """All 2-qubit stabilizer states up to phase, by closure under H, S and CNOT."""
    gens = [oracle.gate_matrix(n, q, None, 2) for n in ("h", "s") for q in ((0,), (1,))]
    gens += [oracle.gate_matrix("cx", p, None, 2) for p in ((0, 1), (1, 0))]
    start = np.array([1, 0, 0, 0], dtype=complex)
    found, frontier = [start], [start]
    while frontier:
        nxt = []
        for psi in frontier:
            for g in gens:
                phi = g @ psi
                if not any(abs(abs(np.vdot(phi, f)) - 1) < 1e-9 for f in found):
                    found.append(phi)
                    nxt.append(phi)
        frontier = nxt
    return found


class TestHcnotIdentity:
    def test_stabilizer_state_count(self):
        assert len(two_qubit_stabilizer_states()) == 60

    def test_fixes_every_xx_stabilized_state(self):
        hc = oracle.unitary(Circuit(2, tuple(hcnot(0, 1))))
        xx = oracle.embed({0: oracle.XM, 1: oracle.XM}, 2)
        checked = 0
        for psi in two_qubit_stabilizer_states():
            if np.allclose(xx @ psi, psi):
                checked += 1
                assert oracle.equal_up_to_phase(hc @ psi, psi)
        assert checked == 6

    def test_moves_states_without_xx(self):
        hc = oracle.unitary(Circuit(2, tuple(hcnot(0, 1))))
        zero = np.array([1, 0, 0, 0], dtype=complex)
        assert not oracle.equal_up_to_phase(hc @ zero, zero)


class TestTrivialLocations:
    def test_rzz_after_bell(self):
        assert 2 in trivial_locations(BELL, Rzz(0.7, 0, 1))

    def test_hcnot_on_xx_state(self):
        c = Circuit(2, (H(0), H(1)))
        assert trivial_locations(c, hcnot(0, 1)) == [2]

    def test_x_on_data_qubit_rejected(self):
        c = steane_plus_encoder("eight_gate")
        assert 6 not in trivial_locations(c, X(0))

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            trivial_locations(BELL, Rz(0.1, 3))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 6), st.floats(-3, 3).filter(lambda t: abs(t) > 1e-3))
    def test_oracle_agreement(self, q, theta):
        c = steane_plus_encoder("eight_gate")
        found = trivial_locations(c, Rz(theta, q))
        for p in range(len(c.gates) + 1):
            psi = oracle.final_state(c.with_gates(c.gates[:p]))
            moved = oracle.embed({q: oracle.rz(theta)}, 7) @ psi
            assert (p in found) == oracle.equal_up_to_phase(moved, psi, tol=1e-6)


class TestInsert:
    def test_empty_plan(self):
        c = steane_plus_encoder("eight_gate")
        assert insert(c, empty_plan(0.0)) == c

    def test_single_rz(self):
        c = steane_plus_encoder("eight_gate")
        plan = CompensationPlan((Insertion(6, (Rz(0.3, 2),)),), 0, 0)
        out = insert(c, plan)
        assert len(out.gates) == len(c.gates) + 1
        assert out.gates[6] == Rz(0.3, 2).with_inserted()
        assert indexed_schedule(out) == [(i, p + (p >= 6), g) for i, p, g in indexed_schedule(c)]

    def test_hcnot_with_companion(self):
        c = Circuit(2, (H(0), H(1), CNOT(0, 1)))
        ins = Insertion(2, tuple(hcnot(0, 1)), (Rzz(0.2, 0, 1),))
        out = insert(c, CompensationPlan((ins,), 0, 0))
        assert [g.name for g in out.gates[2:7]] == ["h", "cx", "h", "x", "rzz"]
        assert all(g.inserted for g in out.gates[2:7])
        assert [g.name for g in insert(c, CompensationPlan((ins,), 0, 0), companions=False).gates[2:7]] == [
            "h",
            "cx",
            "h",
            "x",
            "cx",
        ]

    def test_bad_location(self):
        with pytest.raises(ValueError):
            insert(BELL, CompensationPlan((Insertion(5, (Rz(0.1, 0),)),), 0, 0))
        with pytest.raises(ValueError):
            Insertion(-1, ())

    def test_topology_violation(self):
        c = Circuit(3, (H(0),))
        t = Topology(3, frozenset({(0, 1)}))
        plan = CompensationPlan((Insertion(1, tuple(hcnot(0, 2))),), 0, 0)
        with pytest.raises(ValueError):
            insert(c, plan, topology=t)

    def test_plan_json(self):
        plan = CompensationPlan((Insertion(3, tuple(hcnot(0, 1)), (Rzz(0.5, 0, 1),)),), 0.01, 0.2, "hcnot")
        assert CompensationPlan.from_json(plan.to_json()) == plan
        assert plan.reduction == pytest.approx(0.95)


class TestSearchRz:
    def test_zero_noise_gives_empty_plan(self):
        plan = search_rz(steane_plus_encoder("eight_gate"), NoiseSpec())
        assert plan.is_empty and plan.reduction == 0.0 and plan.objective == plan.baseline

    def test_probe_regime(self):
        probe = reorder_probe()
        plan = search_rz(probe.b, probe.noise_b)
        assert plan.reduction >= 0.2
        assert plan.objective < 1e-9
        out = insert(probe.b, plan)
        assert state_fidelity(run_state(out, probe.noise_b), ideal_state()) >= 1 - 1e-9

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            search_rz(BELL, NoiseSpec(), theta_grid=[])
        with pytest.raises(ValueError):
            search_rz(BELL, NoiseSpec(depol_2q=0.1))

    def test_default_grid(self):
        grid = default_theta_grid()
        for k in range(2, 17):
            assert any(abs(t - math.pi / k) < 1e-15 for t in grid)
            assert any(abs(t + math.pi / k) < 1e-15 for t in grid)
        assert any(abs(t - THETA) < 1e-15 for t in grid)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(1, 8), st.sampled_from(default_theta_grid()))
    def test_exact_cancellation_exists(self, k, theta):
        c = steane_plus_encoder("eight_gate")
        pair = indexed_schedule(c)[k - 1][2].qubits
        ns = NoiseSpec((Injection(k, Rzz(theta, *pair)),))
        plan = search_rz(c, ns)
        assert plan.objective < 1e-9
        assert plan.objective <= plan.baseline + 1e-12

    @settings(max_examples=10, deadline=None)
    @given(st.integers(4, 8), st.lists(st.sampled_from(default_theta_grid()), min_size=1, max_size=4, unique=True))
    def test_grid_refinement_is_monotone(self, k, grid):
        c = steane_plus_encoder("eight_gate")
        pair = indexed_schedule(c)[k - 1][2].qubits
        ns = NoiseSpec((Injection(k, Rzz(0.37, *pair)),))
        small = search_rz(c, ns, theta_grid=grid)
        big = search_rz(c, ns, theta_grid=grid + [0.37, -0.37, 1.1])
        assert big.objective <= small.objective + 1e-10
        assert small.objective <= small.baseline

    def test_scan_matches_direct_evaluation(self):
        probe = reorder_probe()
        plan = search_rz(probe.b, probe.noise_b, theta_grid=[0.3])
        assert plan.objective == pytest.approx(pz(insert(probe.b, plan), probe.noise_b), abs=1e-12)

    def test_readout_noise_folded(self):
        probe = reorder_probe()
        ns = NoiseSpec(probe.noise_b.inject, readout_flip=((0.01, 0.02),) * 7)
        plan = search_rz(probe.b, ns)
        assert plan.objective == pytest.approx(pz(insert(probe.b, plan), ns), abs=1e-12)
        assert plan.objective < plan.baseline

    def test_two_insertions(self):
        c = steane_plus_encoder("eight_gate")
        ns = NoiseSpec((Injection(8, Rz(0.6, 0)),))
        grid = [-0.3, 0.3]
        one = search_rz(c, ns, theta_grid=grid)
        two = search_rz(c, ns, theta_grid=grid, max_insertions=2)
        assert two.objective < 1e-12 < one.objective
        assert len(two.insertions) == 2

    def test_deterministic_tie_break(self):
        probe = reorder_probe()
        assert search_rz(probe.b, probe.noise_b) == search_rz(probe.b, probe.noise_b)

    def test_sampled_search(self):
        probe = reorder_probe()
        plan = search_rz(probe.b, probe.noise_b, theta_grid=[-THETA, THETA], shots=4000, seed=1)
        assert plan.objective < plan.baseline
        assert pz(insert(probe.b, plan), probe.noise_b) < 1e-9

    def test_sampled_keeps_baseline_without_clear_win(self):
        plan = search_rz(BELL, NoiseSpec(), theta_grid=[0.1], shots=500, seed=0)
        assert plan.is_empty


class TestSearchHcnot:
    def test_companion_cancels(self):
        probe = reorder_probe()
        plan = search_hcnot(probe.b, probe.noise_b)
        assert plan.objective < 1e-9 and plan.reduction > 0.99
        (ins,) = plan.insertions
        assert [g.name for g in ins.gates] == ["h", "cx", "h", "x"] and ins.companion[0].name == "rzz"

    def test_ideal_hcnot_leaves_pz(self):
        probe = reorder_probe()
        plan = search_hcnot(probe.b, probe.noise_b, companion_rotations=[])
        assert plan.is_empty
        for p, a, b in hcnot_sites(probe.b):
            out = insert(probe.b, CompensationPlan((Insertion(p, tuple(hcnot(a, b))),), 0, 0))
            assert pz(out, probe.noise_b) == pytest.approx(plan.baseline, abs=1e-12)

    def test_no_site(self):
        c = Circuit(2, (CNOT(0, 1),))
        with pytest.raises(NoTrivialLocation):
            search_hcnot(c, NoiseSpec())

    def test_topology_restricts_pairs(self):
        c = steane_plus_encoder("eight_gate")
        topo = builtin_topology("melbourne")
        for _, a, b in hcnot_sites(c, topo):
            assert topo.has_edge(c.physical(a), c.physical(b))

    def test_curves_match_rz(self):
        probe = reorder_probe()
        rz = insert(probe.b, search_rz(probe.b, probe.noise_b))
        hc = insert(probe.b, search_hcnot(probe.b, probe.noise_b))
        assert np.allclose(trace_curve(rz, probe.noise_b).values, trace_curve(hc, probe.noise_b).values, atol=1e-6)


class TestSoundness:
    @pytest.mark.parametrize("variant", ["nine_gate", "eight_gate"])
    def test_trivial_plans_keep_ideal_output(self, variant):
        c = steane_plus_encoder(variant)
        ideal = outcome_probabilities(c, basis="X")
        for p, a, b in hcnot_sites(c)[:15]:
            out = insert(c, CompensationPlan((Insertion(p, tuple(hcnot(a, b))),), 0, 0))
            assert state_fidelity(run_state(out), run_state(c)) == pytest.approx(1.0, abs=1e-9)
            assert np.allclose(outcome_probabilities(out, basis="X"), ideal, atol=1e-12)

    def test_rz_at_trivial_location_is_equivalent_on_ideal_state(self):
        c = Circuit(2, (H(0), CNOT(0, 1)))
        for p in trivial_locations(c, Rzz(0.4, 0, 1)):
            out = insert(c, CompensationPlan((Insertion(p, (Rzz(0.4, 0, 1),)),), 0, 0))
            assert state_fidelity(run_state(out), run_state(c)) == pytest.approx(1.0)
        # unitaries differ although the action on |00> does not
        assert not unitary_equivalent(c.with_gates(c.gates + (Rzz(0.4, 0, 1),)), c)


def test_hcnot_sites_are_exact():
    c = steane_plus_encoder("eight_gate")
    pairs = {tuple(g.qubits) for g in c.gates if g.is_two_qubit}
    pairs |= {(b, a) for a, b in pairs}
    sites = set(hcnot_sites(c))
    for p, (a, b) in itertools.product(range(len(c.gates) + 1), sorted(pairs)):
        psi = oracle.final_state(c.with_gates(c.gates[:p]))
        after = oracle.unitary(Circuit(7, tuple(hcnot(a, b)))) @ psi
        assert ((p, a, b) in sites) == oracle.equal_up_to_phase(after, psi, tol=1e-6)

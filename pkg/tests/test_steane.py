import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracle
from zzcancel.circuit import Circuit, Rz, builtin_topology, validate_against_topology
from zzcancel.rewrite import valid_reorderings
from zzcancel.simulator import Counts, Injection, NoiseSpec, outcome_distribution, run_state, state_fidelity
from zzcancel.steane import (
    VARIANTS,
    ErrorEstimate,
    error_probs,
    estimate,
    exact_error_probs,
    fidelity_simple,
    fidelity_stabilizer,
    hamming_codes,
    home_topology,
    ideal_state,
    span,
    stabilizer_expectations,
    steane_plus_encoder,
    wilson_interval,
)


class TestCodes:
    def test_sizes_and_distances(self):
        code, dual = hamming_codes()
        assert len(code) == 16 and len(dual) == 8
        assert code.min_distance == 3 and dual.min_distance == 4

    def test_membership(self):
        code, dual = hamming_codes()
        assert "1111111" in code and "1111111" not in dual
        assert "1111110" not in code

    def test_matches_bruteforce(self):
        code, dual = hamming_codes()
        bc, bd = oracle.hamming_code_bruteforce()
        assert set(code.codewords) == bc and set(dual.codewords) == bd

    def test_weight_enumerator(self):
        code, _ = hamming_codes()
        assert code.weight_enumerator() == {0: 1, 3: 7, 4: 7, 7: 1}

    def test_closure_and_nesting(self):
        code, dual = hamming_codes()
        for cw in (code, dual):
            words = set(cw.codewords)
            for a in words:
                for b in words:
                    assert "".join(str(int(x) ^ int(y)) for x, y in zip(a, b)) in words
        assert set(dual.codewords) <= set(code.codewords)

    def test_span(self):
        assert span(["100", "010"], 3) == {"000", "100", "010", "110"}


class TestEncoders:
    @pytest.mark.parametrize("variant, cnots", [("nine_gate", 9), ("eight_gate", 8), ("sparse_17", 17), ("sparse_18", 18)])
    def test_gate_counts(self, variant, cnots):
        assert steane_plus_encoder(variant).cnot_count == cnots

    def test_eight_gate_depth(self):
        assert steane_plus_encoder("eight_gate").depth() == 4

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_fits_home_topology(self, variant):
        c = steane_plus_encoder(variant)
        assert validate_against_topology(c, home_topology(variant)) == []

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_ideal_support(self, variant):
        code, dual = hamming_codes()
        c = steane_plus_encoder(variant)
        assert set(outcome_distribution(c, basis="Z", cutoff=1e-12)) == set(code.codewords)
        assert set(outcome_distribution(c, basis="X", cutoff=1e-12)) == set(dual.codewords)

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_prepares_logical_plus(self, variant):
        # oracle: independent Kronecker simulation against the uniform code superposition
        psi = oracle.final_state(steane_plus_encoder(variant))
        assert oracle.equal_up_to_phase(psi, ideal_state().amplitudes)

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_reorderings_keep_distribution(self, variant):
        c = steane_plus_encoder(variant)
        base = outcome_distribution(c, basis="X", cutoff=1e-12)
        for r in valid_reorderings(c, limit=10):
            d = outcome_distribution(r, basis="X", cutoff=1e-12)
            assert d.keys() == base.keys()
            assert all(abs(d[k] - base[k]) < 1e-12 for k in d)

    def test_custom_map(self):
        c = steane_plus_encoder("nine_gate", map=[4, 5, 6, 7, 10, 9, 8])
        assert c.qubit_map == (4, 5, 6, 7, 10, 9, 8)
        inv = {4: 0, 5: 1, 6: 2, 7: 3, 10: 4, 9: 5, 8: 6}
        assert steane_plus_encoder("nine_gate", map=inv).qubit_map == c.qubit_map

    def test_incompatible_map(self):
        with pytest.raises(ValueError):
            steane_plus_encoder("nine_gate", map=[0, 1, 2, 3, 4, 5, 6])
        with pytest.raises(ValueError):
            steane_plus_encoder("nine_gate", map=[0, 0, 1, 2, 3, 4, 5])
        with pytest.raises(ValueError):
            steane_plus_encoder("twelve_gate")

    def test_sparse_on_melbourne_fails_without_map(self):
        with pytest.raises(ValueError):
            steane_plus_encoder("sparse_17", topology=builtin_topology("melbourne"))


class TestErrorProbs:
    def _ideal_counts(self, c):
        z = outcome_distribution(c, basis="Z", cutoff=1e-12)
        x = outcome_distribution(c, basis="X", cutoff=1e-12)
        return (
            Counts("Z", 1600, {k: round(v * 1600) for k, v in z.items()}),
            Counts("X", 800, {k: round(v * 800) for k, v in x.items()}),
        )

    def test_ideal_counts(self):
        zc, xc = self._ideal_counts(steane_plus_encoder("nine_gate"))
        px, pz = error_probs(zc, xc)
        assert px.p == 0 and pz.p == 0

    def test_non_codeword(self):
        px, pz = error_probs(Counts("Z", 10, {"1111110": 10}), Counts("X", 10, {"0000000": 10}))
        assert px.p == 1.0 and pz.p == 0.0

    def test_basis_and_width_checks(self):
        good = Counts("X", 1, {"0000000": 1})
        with pytest.raises(ValueError):
            error_probs(Counts("X", 1, {"0000000": 1}), good)
        with pytest.raises(ValueError):
            error_probs(Counts("Z", 1, {"000": 1}), good)
        with pytest.raises(ValueError):
            error_probs(Counts("Z", 0, {}), good)

    def test_exact(self):
        px, pz = exact_error_probs(steane_plus_encoder("eight_gate"))
        assert px < 1e-12 and pz < 1e-12


class TestWilson:
    @given(st.integers(1, 10_000), st.data())
    def test_contains_estimate(self, shots, data):
        k = data.draw(st.integers(0, shots))
        est = estimate(k, shots)
        assert 0 <= est.ci_low <= est.p <= est.ci_high <= 1

    def test_formula(self):
        lo, hi = wilson_interval(20, 100)
        z, p, n = 1.959963984540054, 0.2, 100
        centre = (p + z * z / (2 * n)) / (1 + z * z / n)
        half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n)
        assert lo == pytest.approx(centre - half, abs=1e-12) and hi == pytest.approx(centre + half, abs=1e-12)

    def test_invalid(self):
        with pytest.raises(ValueError):
            estimate(5, 0)
        with pytest.raises(ValueError):
            ErrorEstimate(0.5, 0.6, 0.7, 10)


class TestFidelity:
    def test_simple(self):
        assert fidelity_simple(0, 0) == 1.0
        assert fidelity_simple(1, 0.3) == 0.0
        assert fidelity_simple(0.19, 0.10) == pytest.approx(math.sqrt(0.81 * 0.90))
        with pytest.raises(ValueError):
            fidelity_simple(1.2, 0)

    @given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
    def test_simple_monotone(self, a, b, other):
        lo, hi = sorted((a, b))
        assert fidelity_simple(hi, other) <= fidelity_simple(lo, other)
        assert fidelity_simple(other, hi) <= fidelity_simple(other, lo)

    @pytest.mark.parametrize("variant", VARIANTS)
    def test_zero_noise(self, variant):
        assert fidelity_stabilizer(steane_plus_encoder(variant)) == pytest.approx(1.0, abs=1e-12)

    def test_ideal_state_is_stabilized(self):
        ev = stabilizer_expectations(ideal_state().amplitudes)
        assert ev.shape == (1, 128) and np.allclose(ev, 1.0)

    @pytest.mark.parametrize("q", range(7))
    def test_rz_pi_matches_overlap(self, q):
        c = steane_plus_encoder("eight_gate")
        ns = NoiseSpec((Injection(8, Rz(math.pi, q)),))
        overlap = state_fidelity(run_state(c, ns), ideal_state())
        # compare F^2: the mean of the expectations, before the square root amplifies rounding
        assert fidelity_stabilizer(c, ns) ** 2 == pytest.approx(overlap**2, abs=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(1, 8), st.integers(0, 6), st.floats(-math.pi, math.pi))
    def test_matches_overlap_for_random_injections(self, k, q, theta):
        c = steane_plus_encoder("eight_gate")
        ns = NoiseSpec((Injection(k, Rz(theta, q)),))
        overlap = state_fidelity(run_state(c, ns), ideal_state())
        assert fidelity_stabilizer(c, ns) ** 2 == pytest.approx(overlap**2, abs=1e-12)

    def test_sampled_mode_tracks_exact(self):
        probe_c = steane_plus_encoder("eight_gate")
        ns = NoiseSpec((Injection(5, Rz(0.9, 2)),))
        exact = fidelity_stabilizer(probe_c, ns)
        sampled = fidelity_stabilizer(probe_c, ns, shots=20_000, seed=1)
        assert sampled == pytest.approx(exact, abs=0.01)
        assert sampled == fidelity_stabilizer(probe_c, ns, shots=20_000, seed=1)

    def test_readout_attenuation_and_mitigation(self):
        c = steane_plus_encoder("eight_gate")
        ns = NoiseSpec(readout_flip=((0.05, 0.05),) * 7)
        raw = fidelity_stabilizer(c, ns)
        assert raw < 0.95
        assert fidelity_stabilizer(c, ns, mitigate=True) == pytest.approx(1.0, abs=1e-12)

    def test_needs_shots_for_stochastic_noise(self):
        with pytest.raises(ValueError):
            fidelity_stabilizer(steane_plus_encoder("eight_gate"), NoiseSpec(depol_2q=0.01))
        with pytest.raises(ValueError):
            fidelity_stabilizer(Circuit(3))

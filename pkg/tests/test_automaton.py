import itertools
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from statetransfer.automaton import (
    DEFAULT_MAX_ROUNDS,
    MaxRoundsExceeded,
    PauliFrame,
    conjugate_for_frame,
    correction_pattern,
    execute_program,
    frame_update,
    full_step,
    logical_output,
)
from statetransfer.compiler import compile_circuit, direct_simulate, parse_circuit
from statetransfer.harness import make_rng, pattern_register, random_states
from statetransfer.observables import Axis
from statetransfer.patterns import (
    PatternError,
    PauliOp,
    byproduct,
    cnot_pattern,
    generalized_transfer_pattern,
    transfer_pattern,
)
from statetransfer.statevec import CNOT, GATES, H, T, apply_gate, factor_state, fidelity_mod_phase

OUTCOMES3 = list(itertools.product([1, -1], repeat=3))


def step_output(result, pattern):
    """Logical output of a single-qubit full step."""
    (q_in,) = pattern.input_qubits
    return factor_state(result.final_state, [result.locations[q_in]])


class TestCorrectionPattern:
    def test_identity_is_plain_transfer(self):
        p = correction_pattern(PauliOp(), 0, 1)
        assert p.tokens == transfer_pattern(0, 1).tokens
        assert p.byproduct_rule == "transfer"

    @pytest.mark.parametrize("label", ["X", "Z", "XZ"])
    def test_same_observables_as_transfer(self, label):
        p = correction_pattern(PauliOp.single(0, label), 0, 1)
        assert p.tokens == ["X@1", "Z@0*Z@1", "X@0"]
        assert p.signs != (1, 1, 1)

    def test_x_correction_cancels_incoming_x(self):
        # logical outcomes (+1,+1,+1) are the physical vector (+1,-1,+1) under the X sign
        p = correction_pattern(PauliOp.single(0, "X"), 0, 1)
        assert byproduct(p, (1, -1, 1)).is_identity()
        # physical all-+1 transfers X|phi> untouched, leaving the X in place
        assert byproduct(p, (1, 1, 1)).label() == "X@1"

    def test_z_correction_residual_uniform(self):
        p = correction_pattern(PauliOp.single(0, "Z"), 0, 1)
        counts = Counter(byproduct(p, o).local_label(1) for o in OUTCOMES3)
        assert counts == {"I": 2, "X": 2, "Z": 2, "XZ": 2}

    def test_multi_qubit_rejected(self):
        with pytest.raises(PatternError):
            correction_pattern(PauliOp.parse("X@0*Z@1"), 0, 2)


class TestFullStep:
    def test_all_plus_single_round(self, one_qubit_states):
        p = transfer_pattern(0, 1)
        phi = one_qubit_states[0]
        res = full_step(pattern_register(p, phi), p, rng=[1, 1, 1])
        assert res.rounds == 1 and res.residual.is_identity()
        assert fidelity_mod_phase(step_output(res, p), phi) == pytest.approx(1)

    def test_one_correction_round(self, one_qubit_states):
        p = transfer_pattern(0, 1)
        phi = one_qubit_states[1]
        res = full_step(pattern_register(p, phi), p, rng=[1, -1, 1, 1, -1, 1])
        assert res.first_byproduct.label() == "X@1"
        assert res.rounds == 2 and res.residual.is_identity()
        # corrected state lands back on the original qubit
        assert res.locations == {0: 0}
        assert fidelity_mod_phase(step_output(res, p), phi) == pytest.approx(1)

    def test_max_rounds_exceeded(self):
        p = transfer_pattern(0, 1)
        # every correction keeps leaving an X behind
        forced = [1, -1, 1] + [1, 1, 1] * 3
        with pytest.raises(MaxRoundsExceeded):
            full_step(pattern_register(p, random_states(1, 1, 0)[0]), p, rng=forced, max_rounds=3)

    def test_tracked_single_round(self):
        p = transfer_pattern(0, 1)
        res = full_step(pattern_register(p, random_states(1, 1, 0)[0]), p, "tracked", rng=[1, -1, 1])
        assert res.rounds == 1
        assert res.residual.label() == "X@1"

    @pytest.mark.parametrize(
        "kwargs",
        [{"mode": "lazy"}, {"max_rounds": 0}, {"family": "O3"}],
    )
    def test_bad_arguments(self, kwargs):
        p = transfer_pattern(0, 1)
        with pytest.raises(ValueError):
            full_step(pattern_register(p, random_states(1, 1, 0)[0]), p, rng=make_rng(0), **kwargs)

    def test_default_max_rounds(self):
        assert DEFAULT_MAX_ROUNDS == 1000

    @given(
        st.integers(0, 2**32 - 1),
        st.sampled_from(["I", "X", "Y", "Z", "H", "T", "TDG"]),
        st.sampled_from(["I", "H"]),
        st.sampled_from(["O1", "O2"]),
    )
    def test_faithful_postcondition(self, seed, u, v, family):
        p = generalized_transfer_pattern(GATES[u], GATES[v], 0, 1)
        (phi,) = random_states(1, 1, seed)
        res = full_step(pattern_register(p, phi), p, rng=make_rng(seed), family=family)
        assert res.residual.is_identity() and res.rounds >= 1
        want = apply_gate(phi, p.gate_matrix(), [0])
        assert fidelity_mod_phase(step_output(res, p), want) >= 1 - 1e-7

    @given(st.integers(0, 2**32 - 1), st.sampled_from(["O1", "O2"]))
    def test_faithful_cnot(self, seed, family):
        p = cnot_pattern(0, 1, 2)
        (phi,) = random_states(2, 1, seed)
        res = full_step(pattern_register(p, phi), p, rng=make_rng(seed), family=family)
        assert res.residual.is_identity()
        out = factor_state(res.final_state, [res.locations[0], res.locations[1]])
        assert fidelity_mod_phase(out, apply_gate(phi, CNOT, [0, 1])) >= 1 - 1e-7


class TestPauliFrame:
    def test_transfer_moves_frame(self):
        f = frame_update(PauliFrame(), PauliOp.single(1, "X"), {0: 1})
        assert f.op.label() == "X@1"
        assert f.logical([1]).label() == "X@0"

    def test_self_inverse(self):
        f = frame_update(PauliFrame(PauliOp.single(0, "X")), PauliOp.single(0, "X"), {0: 0})
        assert f.op.is_identity()

    def test_cnot_byproduct_xor(self):
        f = frame_update(PauliFrame(PauliOp.single(0, "Z")), PauliOp.parse("Z@0*X@1"), {0: 0, 1: 1})
        assert f.op.label() == "X@1"

    def test_unmapped_qubit(self):
        with pytest.raises(PatternError):
            frame_update(PauliFrame(), PauliOp.single(0, "X"), {0: 1})

    @given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=8))
    def test_stepwise_equals_composed(self, bits):
        # a chain of transfers 0->1->0->...; updating per step = composing byproducts first
        frame = PauliFrame()
        composed = PauliOp()
        at = 0
        for x, z in bits:
            nxt = 1 - at
            by = PauliOp(((nxt, x, z),))
            frame = frame_update(frame, by, {at: nxt})
            composed = composed.relocate({at: nxt}) * by
            at = nxt
        assert frame.op == composed


class TestConjugateForFrame:
    def test_identity_frame(self):
        p = transfer_pattern(0, 1)
        assert conjugate_for_frame(p, PauliFrame()) is p

    def test_x_frame_flips_zz_sign(self):
        p = conjugate_for_frame(transfer_pattern(0, 1), PauliOp.single(0, "X"))
        assert p.tokens == ["X@1", "Z@0*Z@1", "X@0"]
        assert p.signs == (1, -1, 1)

    def test_z_frame_on_diagonal_axis(self):
        p = generalized_transfer_pattern(T, H, 0, 1)
        q = conjugate_for_frame(p, PauliOp.single(0, "Z"))
        # Z (X-Y) Z = -(X-Y): token kept, sign flipped
        assert q.tokens == p.tokens
        assert q.signs[2] == -p.signs[2]
        z = GATES["Z"].matrix
        assert np.allclose(z @ Axis.XPLUSY.matrix @ z, -Axis.XPLUSY.matrix)

    def test_x_frame_swaps_diagonal_axes(self):
        p = generalized_transfer_pattern(T, H, 0, 1)
        q = conjugate_for_frame(p, PauliOp.single(0, "X"))
        assert q.tokens[2] == "X+Y@0"

    def test_frame_on_other_qubits_ignored(self):
        p = transfer_pattern(0, 1)
        assert conjugate_for_frame(p, PauliOp.single(3, "XZ")) is p

    @given(st.integers(0, 2**32 - 1), st.sampled_from(["X", "Z", "XZ"]), st.sampled_from(["I", "H", "T", "TDG"]))
    @settings(max_examples=40)
    def test_conjugated_pattern_undoes_frame(self, seed, frame_label, u):
        # input carries P; the conjugated pattern plus relocated frame yields the clean gate
        p = generalized_transfer_pattern(GATES[u], H, 0, 1)
        frame = PauliOp.single(0, frame_label)
        (phi,) = random_states(1, 1, seed)
        dirty = apply_gate(phi, GATES[{"X": "X", "Z": "Z", "XZ": "Y"}[frame_label]], [0])
        q = conjugate_for_frame(p, frame)
        res = full_step(pattern_register(q, dirty), q, "tracked", rng=make_rng(seed))
        total = frame_update(PauliFrame(frame), res.residual, q.output_map).op
        out = step_output(res, q)
        for qb, x, z in total.bits:
            assert qb == 1
            out = apply_gate(out, GATES[{(1, 0): "X", (0, 1): "Z", (1, 1): "Y"}[(x, z)]], [0])
        assert fidelity_mod_phase(out, apply_gate(phi, p.gate_matrix(), [0])) >= 1 - 1e-9


class TestExecuteProgram:
    CIRCUIT = "qubits 3\nH 0\nT 1\nCNOT 0 2\nTDG 2\nCNOT 1 0\nH 2\nX 1\nZ 0\nY 2\n"

    @pytest.mark.parametrize("family", ["O1", "O2"])
    @pytest.mark.parametrize("mode", ["faithful", "tracked"])
    def test_matches_direct_simulation(self, family, mode):
        ir = parse_circuit(self.CIRCUIT)
        prog = compile_circuit(ir, family)
        for i, phi in enumerate(random_states(3, 3, seed=5)):
            run = execute_program(prog, phi, mode, make_rng(i))
            assert fidelity_mod_phase(logical_output(run), direct_simulate(ir, phi)) >= 1 - 1e-7
            assert all(r["mode"] == mode for r in run.records)

    def test_tracked_frame_is_needed(self):
        ir = parse_circuit("qubits 1\nH 0\nT 0\n")
        prog = compile_circuit(ir, "O1")
        (phi,) = random_states(1, 1, seed=3)
        seen_nontrivial = False
        for seed in range(20):
            run = execute_program(prog, phi, "tracked", make_rng(seed))
            assert sum(r["rounds"] for r in run.records) == len(prog.steps)
            if not run.frame.is_identity():
                seen_nontrivial = True
                raw = logical_output(run, apply_frame=False)
                assert fidelity_mod_phase(raw, direct_simulate(ir, phi)) < 1 - 1e-3
        assert seen_nontrivial

    def test_input_size_checked(self):
        prog = compile_circuit(parse_circuit("qubits 2\nH 0\n"))
        with pytest.raises(ValueError):
            execute_program(prog, random_states(1, 1, 0)[0])

    def test_physical_register_size(self):
        prog = compile_circuit(parse_circuit("qubits 2\nH 0\nCNOT 0 1\nT 1\n"), "O2")
        run = execute_program(prog, random_states(2, 1, 0)[0], "faithful", make_rng(1))
        assert run.state.num_qubits == 3

    def test_trace_records(self):
        prog = compile_circuit(parse_circuit("qubits 1\nH 0\n"))
        run = execute_program(prog, random_states(1, 1, 0)[0], "faithful", make_rng(2))
        (rec,) = run.records
        assert set(rec) >= {"step", "gate", "observables", "outcomes", "byproduct", "rounds", "mode"}
        assert rec["rounds"] == len(rec["outcomes"]) == run.executions

    def test_unknown_mode(self):
        prog = compile_circuit(parse_circuit("qubits 1\nH 0\n"))
        with pytest.raises(ValueError):
            execute_program(prog, random_states(1, 1, 0)[0], "lazy")

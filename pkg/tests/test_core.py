import numpy as np
import pytest

from speclab.core import (
    ROOT,
    CostModel,
    DomainError,
    DraftNode,
    DraftProposal,
    SequenceState,
    StepMode,
    StepRecord,
    Structure,
    VerificationOutcome,
    check_distribution,
    check_token,
    is_distribution,
    topological_order,
    validate_proposal,
)


class TestSequenceState:
    def test_context_and_vision(self):
        s = SequenceState((1, 2, 3, 4), (5,), (1, 3))
        assert s.context == (1, 2, 3, 4, 5)
        assert s.vision_tokens == (2, 3)
        assert s.num_vision == 2

    def test_extend_keeps_step_advance_bumps_it(self):
        s = SequenceState((1,), (), (0, 0))
        assert s.extend((2, 3)).step_index == 0
        adv = s.advance((2,))
        assert adv.generated == (2,) and adv.step_index == 1

    @pytest.mark.parametrize("span", [(2, 1), (-1, 1), (0, 5)])
    def test_bad_span_rejected(self, span):
        with pytest.raises(DomainError):
            SequenceState((1, 2, 3), (), span)

    def test_dict_round_trip(self):
        s = SequenceState((1, 2, 3), (4, 5), (0, 2), 7)
        assert SequenceState.from_dict(s.to_dict()) == s


class TestDistributions:
    def test_check_token(self):
        assert check_token(3, 4) == 3
        for bad in (-1, 4):
            with pytest.raises(DomainError):
                check_token(bad, 4)

    def test_is_distribution(self):
        assert is_distribution(np.array([0.25, 0.75]))
        assert not is_distribution(np.array([0.5, 0.6]))
        assert not is_distribution(np.array([1.5, -0.5]))
        with pytest.raises(DomainError):
            check_distribution(np.array([0.2, 0.2]))


class TestValidateProposal:
    def test_empty_linear_is_valid(self):
        assert validate_proposal(DraftProposal.empty(), 8)

    def test_chain_of_three(self):
        assert validate_proposal(DraftProposal.linear([1, 2, 3]), 8)

    def test_two_root_claims_in_a_chain(self):
        p = DraftProposal(Structure.LINEAR, (DraftNode(1), DraftNode(2)))
        assert not validate_proposal(p, 8)

    def test_tree_may_branch_at_root(self):
        p = DraftProposal(Structure.TREE, (DraftNode(1), DraftNode(2), DraftNode(3, 0)))
        assert validate_proposal(p, 8)

    def test_rejects_duplicate_siblings_bad_tokens_and_cycles(self):
        dup = DraftProposal(Structure.TREE, (DraftNode(1), DraftNode(1)))
        oov = DraftProposal.linear([9])
        cyc = DraftProposal(Structure.TREE, (DraftNode(1, 1), DraftNode(2, 0)))
        prob = DraftProposal(Structure.TREE, (DraftNode(1, ROOT, 1.5),))
        for p in (dup, oov, cyc, prob):
            assert not validate_proposal(p, 8)

    def test_budget(self):
        p = DraftProposal.linear([1, 2, 3])
        assert validate_proposal(p, 8, budget=3)
        assert not validate_proposal(p, 8, budget=2)

    def test_depths_and_paths_with_late_parents(self):
        # parents may appear after their children in node order
        p = DraftProposal(Structure.TREE, (DraftNode(7, 2), DraftNode(5), DraftNode(6, 1)))
        assert topological_order(p) == [1, 2, 0]
        assert p.depths() == [3, 1, 2]
        assert p.path(0) == (5, 6, 7)
        assert p.max_depth == 3


class TestRecordsAndCosts:
    def test_outcome_commits_correction_last(self):
        o = VerificationOutcome((4, 5), 6)
        assert o.accepted_count == 2
        assert o.committed == (4, 5, 6)

    def test_cost_model(self):
        c = CostModel()
        assert c.target(1, 5) == pytest.approx(1.1)
        assert c.draft(3) == pytest.approx(0.3)

    def test_gated_step_invariant(self):
        with pytest.raises(DomainError):
            StepRecord(0, StepMode.GREEDY_GATE, accepted_count=1, gate_fired=True)
        with pytest.raises(DomainError):
            StepRecord(0, StepMode.GREEDY_GATE, gate_fired=False)

    def test_record_round_trip(self):
        r = StepRecord(3, StepMode.SPECULATIVE, 2, 0.4, False, 0.5, 1.2, 99, 3, 5, 10)
        assert StepRecord.from_dict(r.to_dict()) == r
        assert r.cost_units == pytest.approx(1.7)

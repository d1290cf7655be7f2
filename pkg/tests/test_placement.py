import pytest
from hypothesis import given, strategies as st

from campuscloud.core import CloudError, ErrorCode
from campuscloud.placement import (
    CandidateNode,
    RendezvousPolicy,
    capacity_shortage,
    place,
)

POLICY = RendezvousPolicy()

# FNV-1a-64 of "<node>:obj-1", pinned from an independent implementation.
SCORE_N1_OBJ1 = 7899563557201945817
SCORE_N2_OBJ1 = 15849814665008307848
SCORE_N3_OBJ1 = 11809103914470309063


def up(node_id, free=1 << 30):
    return CandidateNode(node_id=node_id, free_bytes=free, up=True)


def down(node_id, free=1 << 30):
    return CandidateNode(node_id=node_id, free_bytes=free, up=False)


def test_single_up_node_r1():
    plan = place("obj-1", 10, 1, [up("n1")], POLICY)
    assert plan.replicas == ("n1",)


def test_r2_with_one_up_node_fails():
    with pytest.raises(CloudError) as err:
        place("obj-1", 10, 2, [up("n1"), down("n2")], POLICY)
    assert err.value.code is ErrorCode.INSUFFICIENT_NODES
    assert not capacity_shortage(err.value)


def test_pinned_scores_pick_top_two():
    # Scores for obj-1: n2 > n3 > n1, so r=2 picks (n2, n3) in rank order.
    assert SCORE_N2_OBJ1 > SCORE_N3_OBJ1 > SCORE_N1_OBJ1
    plan = place("obj-1", 10, 2, [up("n1"), up("n2"), up("n3")], POLICY)
    assert plan.replicas == ("n2", "n3")


def test_rank_matches_pinned_order():
    ranked = POLICY.rank("obj-1", ["n1", "n2", "n3"])
    assert ranked == ["n2", "n3", "n1"]


def test_capacity_filter_excludes_full_nodes():
    plan = place("obj-1", 100, 2, [up("n1"), up("n2", free=10), up("n3")], POLICY)
    assert "n2" not in plan.replicas
    assert plan.replicas == ("n3", "n1")


def test_capacity_shortage_error_is_distinguishable():
    with pytest.raises(CloudError) as err:
        place("obj-1", 100, 2, [up("n1"), up("n2", free=10), up("n3", free=10)], POLICY)
    assert err.value.code is ErrorCode.INSUFFICIENT_NODES
    assert capacity_shortage(err.value)


def test_exclusions_respected():
    plan = place("obj-1", 10, 1, [up("n1"), up("n2"), up("n3")], POLICY,
                 exclude=frozenset({"n2"}))
    assert plan.replicas == ("n3",)


def test_invalid_r():
    with pytest.raises(CloudError) as err:
        place("obj-1", 10, 0, [up("n1")], POLICY)
    assert err.value.code is ErrorCode.VALIDATION


def test_no_duplicate_nodes_in_plan():
    plan = place("obj-9", 3, 3, [up(f"n{i}") for i in range(1, 8)], POLICY)
    assert len(set(plan.replicas)) == 3


@given(
    st.integers(min_value=1, max_value=3),
    st.sets(st.integers(min_value=1, max_value=20), min_size=3, max_size=12),
    st.integers(min_value=0, max_value=10_000),
)
def test_placement_is_pure(r, node_nums, obj_num):
    candidates = [up(f"n{i}") for i in sorted(node_nums)]
    object_id = f"obj-{obj_num}"
    first = place(object_id, 10, r, candidates, POLICY)
    for _ in range(3):
        again = place(object_id, 10, r, list(reversed(candidates)), POLICY)
        assert again == first

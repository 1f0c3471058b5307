import pytest

from igpfix.netmodel import ValidationError
from igpfix.pspp import (
    PsppInstance,
    build_path_digraph,
    check_refinement,
    export_digraph,
    from_total_orders,
    is_safe,
    rank_witness,
    robustness_check,
    validate_rank_witness,
)

E = ("e",)


def _triangle_orders(cyclic: bool):
    """Three nodes around egress e; each prefers the path through its
    clockwise neighbor over its direct path (the classic bad gadget)."""
    order = {
        "x": [("x", "y", "e"), ("x", "e")],
        "y": [("y", "z", "e"), ("y", "e")],
        "z": [("z", "x", "e"), ("z", "e")],
    }
    if not cyclic:
        order = {v: list(reversed(ps)) for v, ps in order.items()}
    order["e"] = [("e",)]
    return from_total_orders("pfx", ["e"], order)


def test_from_total_orders_builds_strict_relation():
    pspp = _triangle_orders(cyclic=False)
    assert pspp.strictly_prefers("x", ("x", "e"), ("x", "y", "e"))
    assert not pspp.strictly_prefers("x", ("x", "y", "e"), ("x", "e"))
    assert pspp.is_total()
    assert not pspp.is_cyclic_at("x")


def test_instance_validation():
    with pytest.raises(ValidationError, match="starts at"):
        PsppInstance("p", frozenset({"e"}), {"x": (("y", "e"),)}, {})
    with pytest.raises(ValidationError, match="egress"):
        PsppInstance("p", frozenset({"e"}), {"x": (("x", "y"),)}, {})
    with pytest.raises(ValidationError, match="not simple"):
        PsppInstance("p", frozenset({"e"}), {"x": (("x", "y", "x", "e"),)}, {})
    with pytest.raises(ValidationError, match="both orientations"):
        PsppInstance(
            "p", frozenset({"e"}), {"x": (("x", "e"), ("x", "y", "e"))},
            {"x": frozenset({(("x", "e"), ("x", "y", "e")),
                             (("x", "y", "e"), ("x", "e"))})},
        )


def test_cyclic_relation_is_flagged_not_rejected():
    a, b, c = ("x", "a", "e"), ("x", "b", "e"), ("x", "c", "e")
    pspp = PsppInstance(
        "p", frozenset({"e"}), {"x": (a, b, c)},
        {"x": frozenset({(a, b), (b, c), (c, a)})},
    )
    assert pspp.is_cyclic_at("x")
    # a cyclic relation yields raw arcs only, so the digraph stays unsafe
    assert not pspp.strictly_prefers("x", a, c)
    assert not is_safe(build_path_digraph(pspp)).safe


def test_bad_gadget_unsafe_with_cycle_witness():
    res = is_safe(build_path_digraph(_triangle_orders(cyclic=True)))
    assert not res.safe
    cyc = res.cycle
    assert len(cyc) >= 2
    # the witness is an actual cycle in the digraph
    dg = build_path_digraph(_triangle_orders(cyclic=True))
    succ = {a: {b for b, _ in nbrs} for a, nbrs in dg.successors().items()}
    for i, p in enumerate(cyc):
        assert cyc[(i + 1) % len(cyc)] in succ[p]


def test_good_gadget_safe_with_valid_ranks():
    pspp = _triangle_orders(cyclic=False)
    dg = build_path_digraph(pspp)
    res = is_safe(dg)
    assert res.safe
    assert validate_rank_witness(dg, res.ranks)
    assert res.ranks[E] == 0


def test_rank_witness_raises_on_cycle():
    with pytest.raises(ValidationError):
        rank_witness(build_path_digraph(_triangle_orders(cyclic=True)))


def test_restrict_and_removals():
    pspp = _triangle_orders(cyclic=True)
    sub = pspp.without_node("y")
    assert all("y" not in p for p in sub.all_paths())
    # breaking the gadget at any node makes the remainder safe
    assert is_safe(build_path_digraph(sub)).safe
    sub2 = pspp.without_link("x", "y")
    assert ("x", "y", "e") not in sub2.all_paths()


def test_robustness_check():
    good = _triangle_orders(cyclic=False)
    assert robustness_check(good, ["x", "y", "z"], [("x", "y"), ("y", "z")])
    assert not robustness_check(_triangle_orders(cyclic=True), [], [])


def test_check_refinement():
    total = _triangle_orders(cyclic=False)
    partial = PsppInstance(
        total.destination, total.egresses, total.permitted,
        {"x": frozenset({(("x", "e"), ("x", "y", "e"))})},
    )
    assert check_refinement(total, partial)
    assert not check_refinement(partial, total)  # partial lacks y's ordering


def test_export_digraph_mentions_every_arc():
    dg = build_path_digraph(_triangle_orders(cyclic=False))
    dot = export_digraph(dg)
    assert dot.startswith("digraph")
    assert dot.count("->") == len(dg.arcs)
    assert '"x y e"' in dot

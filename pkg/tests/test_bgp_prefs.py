import pytest

from igpfix.bgp_prefs import (
    ExternalRoute,
    close_suffixes,
    derive_med_preferences,
    load_pref_pairs,
    load_routes,
    preferences_from_pairs,
    save_pref_pairs,
)
from igpfix.netmodel import ParseError, ValidationError
from igpfix.paths import is_empty


def test_external_route_rejects_negative_med():
    with pytest.raises(ValidationError):
        ExternalRoute("p", "e", "as1", -1)


def test_preferences_from_pairs_closes_and_infers_egresses():
    prefs = preferences_from_pairs({"p": {(("r", "b"), ("r", "s", "c"))}})
    assert prefs.egresses["p"] == frozenset({"b", "c"})
    assert prefs.is_closed()
    # closure holds both paths, every suffix, and the egress empty paths
    assert prefs.closure["p"] == frozenset(
        {("r", "b"), ("b",), ("r", "s", "c"), ("s", "c"), ("c",)}
    )


def test_validate_rejects_malformed_pairs():
    with pytest.raises(ValidationError, match="reflexive"):
        preferences_from_pairs({"p": {(("a", "b"), ("a", "b"))}})
    with pytest.raises(ValidationError, match="common source"):
        preferences_from_pairs({"p": {(("a", "b"), ("c", "b"))}})
    with pytest.raises(ValidationError, match="both orientations"):
        preferences_from_pairs(
            {"p": {(("a", "b"), ("a", "c")), (("a", "c"), ("a", "b"))}}
        )


def test_close_suffixes_anchors_all_egresses():
    prefs = preferences_from_pairs(
        {"p": {(("a", "b"), ("a", "c"))}}, egresses={"p": {"b", "c", "x"}}
    )
    assert ("x",) in close_suffixes(prefs).closure["p"]


def test_derive_med_semantics(six_node):
    inst, routes = six_node
    prefs = derive_med_preferences(inst, routes, hop_bound=2)
    assert set(prefs.prefixes()) == {"pfx1", "pfx2"}
    assert prefs.egresses["pfx1"] == frozenset({"A", "B", "C"})
    for pfx, (p, q) in prefs.all_pairs():
        # MED is only decisive between same-AS routes: lower-MED egress B wins
        assert p[-1] == "B" and q[-1] == "A"
        assert not is_empty(p) and not is_empty(q)
        assert p[0] == q[0]
    # C carries a different AS: never part of any mandate
    assert all(q[-1] != "C" for _, (p, q) in prefs.all_pairs())


def test_derive_med_equal_meds_yield_nothing(six_node):
    inst, _ = six_node
    routes = [
        ExternalRoute("p", "A", "as1", 5),
        ExternalRoute("p", "B", "as1", 5),  # equal MED: IGP decides, no mandate
        ExternalRoute("p", "C", "as2", 0),  # different AS: no mandate
    ]
    prefs = derive_med_preferences(inst, routes, hop_bound=2)
    assert prefs.pairs["p"] == frozenset()


def test_derive_med_rejects_unknown_egress(six_node):
    inst, _ = six_node
    with pytest.raises(ValidationError):
        derive_med_preferences(inst, [ExternalRoute("p", "ZZ", "as1", 1)])


def test_routes_and_pairs_csv_roundtrip(tmp_path, six_node):
    inst, routes = six_node
    rp = tmp_path / "routes.csv"
    rp.write_text(
        "prefix,egress,neighbor_as,med\n"
        + "\n".join(f"{r.prefix},{r.egress},{r.neighbor_as},{r.med}" for r in routes)
        + "\n"
    )
    assert load_routes(str(rp)) == routes

    prefs = derive_med_preferences(inst, routes, hop_bound=2)
    pp = str(tmp_path / "prefs.csv")
    save_pref_pairs(prefs, pp)
    back = load_pref_pairs(pp)
    assert back.pairs == prefs.pairs


def test_load_routes_rejects_malformed(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("p,e\n")
    with pytest.raises(ParseError):
        load_routes(str(bad))
    bad.write_text("p,e,as1,notanumber\n")
    with pytest.raises(ParseError):
        load_routes(str(bad))

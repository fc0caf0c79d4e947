import random

import pytest

from conceptdb import algebra as alg
from conceptdb import inference as inf
from conceptdb import schema as sch
from conceptdb import store
from conceptdb.coql import parse_query
from conceptdb.errors import (
    AmbiguousBinding,
    AmbiguousPropagation,
    CellBudgetExceeded,
    NoPropagationPath,
)
from conceptdb.store import Database

from conftest import query, query_ids
from helpers import ids, inference_case, oracle_infer


def _set(db, collection, pred=None):
    s = alg.full_set(db, collection)
    if pred:
        s = alg.filter_set(db, s, parse_query(pred))
    return s


class TestInfer:
    def test_beer_chips_orders_and_intermediate(self, shopdemo):
        db = shopdemo.db
        products = _set(db, "Products", "name IN {'beer', 'chips'}")
        trace = inf.infer_trace(db, inf.InferenceSpec([products], "Orders"))
        assert trace.propagation_collection == "LineItems"
        assert trace.intermediate_size == 3
        assert ids(trace.result) == {"23", "24"}

    def test_coql_operator_form(self, shopdemo):
        got = query_ids(shopdemo,
                        "( Products | name IN {'beer', 'chips'} ) <-*-> Orders")
        assert got == {"23", "24"}

    def test_two_sources_equal_explicit_path(self, shopdemo):
        got = query_ids(shopdemo,
                        "(Categories | name == 'cars') AND "
                        "(Months | name == 'June') <-*> Countries")
        explicit = query_ids(shopdemo, """
            (( Categories | name == 'cars' )
               <- Products <- LineItems AND
             ( Months | name == 'June' )
               <- Dates <- Orders <- LineItems)
            -> Orders -> Customers -> Countries
        """)
        assert got == explicit == {"DE", "FR"}

    def test_empty_source_yields_empty(self, shopdemo):
        db = shopdemo.db
        empty = alg.make_set("Products", [])
        assert inf.infer(db, inf.InferenceSpec([empty], "Orders")).members == \
            frozenset()

    def test_monotone_in_sources(self, shopdemo):
        db = shopdemo.db
        members = alg.full_set(db, "Products").sorted_members()
        small = alg.make_set("Products", members[:2])
        big = alg.make_set("Products", members[:4])
        a = inf.infer(db, inf.InferenceSpec([small], "Orders"))
        b = inf.infer(db, inf.InferenceSpec([big], "Orders"))
        assert a.members <= b.members

    def test_conservative_upper_bound(self, shopdemo):
        db = shopdemo.db
        products = _set(db, "Products", "name IN {'beer', 'chips'}")
        got = inf.infer(db, inf.InferenceSpec([products], "Orders"))
        everything = alg.project(db, alg.full_set(db, "LineItems"),
                                 "order", "Orders")
        assert got.members <= everything.members

    def test_no_propagation_path(self, sportdemo):
        db = sportdemo.db
        coaches = _set(db, "Coaches", "name == 'Klinsmann'")
        with pytest.raises(NoPropagationPath):
            inf.infer(db, inf.InferenceSpec([coaches], "Players"))

    def test_ambiguous_propagation(self):
        s = sch.Schema()
        for name in ("A", "B"):
            sch.define_concept(s, sch.Concept(name, identity_dims=[
                sch.Dimension("id", sch.INT, sch.IDENTITY)]))
        for name in ("L1", "L2"):
            sch.define_concept(s, sch.Concept(name, identity_dims=[
                sch.Dimension("id", sch.INT, sch.IDENTITY)], entity_dims=[
                sch.Dimension("a", "A"), sch.Dimension("b", "B")]))
        assert sch.validate(s).valid
        db = Database(s)
        store.create_collection(db, "As", "A")
        store.create_collection(db, "Bs", "B")
        store.create_collection(db, "L1s", "L1", bindings={"a": "As", "b": "Bs"})
        store.create_collection(db, "L2s", "L2", bindings={"a": "As", "b": "Bs"})
        with pytest.raises(AmbiguousPropagation):
            inf.infer(db, inf.InferenceSpec([alg.full_set(db, "As")], "Bs"))

    def test_ambiguous_binding(self, shopdemo_copy):
        db = shopdemo_copy
        store.create_collection(db, "LineItems2", "LineItem", bindings={
            "order": "Orders", "product": "Products", "date": "Dates"})
        products = _set(db, "Products", "name IN {'beer', 'chips'}")
        with pytest.raises(AmbiguousBinding):
            inf.infer(db, inf.InferenceSpec([products], "Orders"))


@pytest.fixture()
def shopdemo_copy():
    from conftest import build_demo
    return build_demo("shopdemo").db


def made_in_db() -> Database:
    """Countries greater for both Customers and Products, so two inference
    routes exist; one German-made product is never ordered."""
    s = sch.Schema()
    sch.define_concept(s, sch.Concept("Country", identity_dims=[
        sch.Dimension("code", sch.char(2), sch.IDENTITY)]))
    sch.define_concept(s, sch.Concept("Category", identity_dims=[
        sch.Dimension("name", sch.char(16), sch.IDENTITY)]))
    sch.define_concept(s, sch.Concept("Customer", identity_dims=[
        sch.Dimension("id", sch.INT, sch.IDENTITY)], entity_dims=[
        sch.Dimension("country", "Country")]))
    sch.define_concept(s, sch.Concept("Product", identity_dims=[
        sch.Dimension("id", sch.INT, sch.IDENTITY)], entity_dims=[
        sch.Dimension("category", "Category"),
        sch.Dimension("country", "Country")]))
    sch.define_concept(s, sch.Concept("Order", identity_dims=[
        sch.Dimension("id", sch.INT, sch.IDENTITY)], entity_dims=[
        sch.Dimension("customer", "Customer")]))
    sch.define_concept(s, sch.Concept("LineItem", identity_dims=[
        sch.Dimension("id", sch.INT, sch.IDENTITY)], entity_dims=[
        sch.Dimension("order", "Order"), sch.Dimension("product", "Product")]))
    assert sch.validate(s).valid
    db = Database(s)
    store.create_collection(db, "Countries", "Country")
    store.create_collection(db, "Categories", "Category")
    store.create_collection(db, "Customers", "Customer",
                            bindings={"country": "Countries"})
    store.create_collection(db, "Products", "Product",
                            bindings={"category": "Categories",
                                      "country": "Countries"})
    store.create_collection(db, "Orders", "Order",
                            bindings={"customer": "Customers"})
    store.create_collection(db, "LineItems", "LineItem",
                            bindings={"order": "Orders", "product": "Products"})
    de = store.insert(db, "Countries", None, ["DE"], {})
    us = store.insert(db, "Countries", None, ["US"], {})
    food = store.insert(db, "Categories", None, ["food"], {})
    tools = store.insert(db, "Categories", None, ["tools"], {})
    hans = store.insert(db, "Customers", None, [1], {"country": de})
    john = store.insert(db, "Customers", None, [2], {"country": us})
    p1 = store.insert(db, "Products", None, [1],
                      {"category": food, "country": us})
    p2 = store.insert(db, "Products", None, [2],
                      {"category": food, "country": de})
    p9 = store.insert(db, "Products", None, [9],
                      {"category": tools, "country": de})  # never ordered
    o1 = store.insert(db, "Orders", None, [1], {"customer": hans})
    o2 = store.insert(db, "Orders", None, [2], {"customer": john})
    store.insert(db, "LineItems", None, [1], {"order": o1, "product": p1})
    store.insert(db, "LineItems", None, [2], {"order": o2, "product": p2})
    return db


class TestInferVia:
    def test_alternative_routes_differ_by_unordered_product(self):
        db = made_in_db()
        germany = _set(db, "Countries", "code == 'DE'")
        via_items = inf.infer_via(db, [germany], "LineItems", "Categories")
        via_products = inf.infer_via(db, [germany], "Products", "Categories")

        # oracle for the Products route: categories of German-made products
        made = {e.entity["category"].text()
                for e in db.collection("Products").elements.values()
                if e.entity["country"].text() == "DE"}
        assert ids(via_products) == made == {"food", "tools"}

        # oracle for the LineItems route: union of both descents, then up
        items = db.collection("LineItems").elements.values()
        orders = db.collection("Orders").elements
        customers = db.collection("Customers").elements
        products = db.collection("Products").elements
        hit = set()
        for li in items:
            order_country = customers[
                orders[li.entity["order"]].entity["customer"]
            ].entity["country"].text()
            made_country = products[li.entity["product"]].entity["country"].text()
            if "DE" in (order_country, made_country):
                hit.add(products[li.entity["product"]].entity["category"].text())
        assert ids(via_items) == hit == {"food"}

        assert ids(via_products) - ids(via_items) == {"tools"}

    def test_via_equal_to_plain_when_unique_common_lesser(self, shopdemo):
        db = shopdemo.db
        products = _set(db, "Products", "name IN {'beer', 'chips'}")
        plain = inf.infer(db, inf.InferenceSpec([products], "Orders"))
        via = inf.infer_via(db, [products], "LineItems", "Orders")
        assert plain.members == via.members

    def test_via_not_below_source(self, shopdemo):
        db = shopdemo.db
        months = _set(db, "Months", "name == 'June'")
        with pytest.raises(NoPropagationPath):
            inf.infer_via(db, [months], "Products", "Categories")

    def test_coql_via_forms(self, shopdemo):
        # shopdemo has a unique common lesser (LineItems), so forcing it as
        # the via collection coincides with the plain operator
        a = query_ids(shopdemo,
                      "( Countries | name == 'Germany' ) <-*(LineItems)*-> Categories")
        b = query_ids(shopdemo,
                      "( Countries | name == 'Germany' ) <-*-> Categories")
        assert a == b == {"1", "2", "3"}


class TestInferBottom:
    def test_unconstrained_returns_all_players(self, sportdemo):
        got = query_ids(sportdemo,
                        "( Coaches | name == 'Klinsmann' ) <-*(Bottom)*-> Players")
        assert got == ids(alg.full_set(sportdemo.db, "Players"))

    def test_constrained_equals_zigzag(self, sportdemo):
        constrained = query_ids(
            sportdemo,
            "( Coaches | name == 'Klinsmann' ) "
            "<-*(Bottom | Trains.team == Plays.team)*-> Players")
        zigzag = query_ids(
            sportdemo,
            "( Coaches | name == 'Klinsmann' ) "
            "<- Trains -> Teams <- Plays -> Players")
        assert constrained == zigzag == {"11", "12"}

    def test_consecutive_operators_equal_constrained_bottom(self, sportdemo):
        consecutive = query_ids(
            sportdemo,
            "( Coaches | name == 'Klinsmann' ) <*-> Teams <*-> Players")
        constrained = query_ids(
            sportdemo,
            "( Coaches | name == 'Klinsmann' ) "
            "<-*(Bottom | Trains.team == Plays.team)*-> Players")
        assert consecutive == constrained

    def test_api_form(self, sportdemo):
        db = sportdemo.db
        coaches = _set(db, "Coaches", "name == 'Klinsmann'")
        bottom = inf.BottomExtension(
            [("Trains", None), ("Plays", None)],
            parse_query("Trains.team == Plays.team"))
        got = inf.infer_bottom(db, [coaches], bottom, "Players")
        assert ids(got) == {"11", "12"}

    def test_budget_allows_constrained_but_not_full_product(self):
        s = sch.Schema()
        sch.define_concept(s, sch.Concept("T", identity_dims=[
            sch.Dimension("id", sch.INT, sch.IDENTITY)]))
        sch.define_concept(s, sch.Concept("L", identity_dims=[
            sch.Dimension("id", sch.INT, sch.IDENTITY)], entity_dims=[
            sch.Dimension("t", "T")]))
        sch.define_concept(s, sch.Concept("R", identity_dims=[
            sch.Dimension("id", sch.INT, sch.IDENTITY)], entity_dims=[
            sch.Dimension("t", "T")]))
        assert sch.validate(s).valid
        db = Database(s)
        store.create_collection(db, "Ts", "T")
        store.create_collection(db, "Ls", "L", bindings={"t": "Ts"})
        store.create_collection(db, "Rs", "R", bindings={"t": "Ts"})
        ts = [store.insert(db, "Ts", None, [i], {}) for i in range(20)]
        for i, t in enumerate(ts):
            store.insert(db, "Ls", None, [i], {"t": t})
            store.insert(db, "Rs", None, [i], {"t": t})
        db.bottom_cell_budget = 100  # 20 x 20 product would blow this
        sources = [alg.full_set(db, "Ls")]
        constrained = inf.BottomExtension(
            [("Ls", None), ("Rs", None)], parse_query("Ls.t == Rs.t"))
        got = inf.infer_bottom(db, sources, constrained, "Rs")
        assert len(got.members) == 20
        unconstrained = inf.BottomExtension([("Ls", None), ("Rs", None)])
        with pytest.raises(CellBudgetExceeded):
            inf.infer_bottom(db, sources, unconstrained, "Rs")


class TestRandomizedEquivalence:
    def test_infer_matches_path_oracle(self):
        rng = random.Random(900)
        for case in range(40):
            db, sources, target, prop = inference_case(rng)
            got = inf.infer(db, inf.InferenceSpec(sources, target))
            want = oracle_infer(db, sources, target, prop)
            assert got.members == frozenset(want), f"case {case}"

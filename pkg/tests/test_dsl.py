"""Scenario language: parsing, diagnostics, resolution, loading."""

import random

import pytest

from matterkb import event_log, load, parse, parse_bytes
from matterkb.errors import ScenarioLoadError


def diags(text):
    result = parse(text)
    assert not result.ok
    return result.diagnostics


def scenario(text):
    result = parse(text)
    assert result.ok, result.diagnostics
    return result.scenario


class TestParseCaseStudy:
    def test_structure(self, case_text):
        sc = scenario(case_text)
        assert len(sc.quantity_creations) == 1
        assert len(sc.events) == 2
        assert [e.name for e in sc.events] == ["transfer1", "transfer2"]
        assert len(sc.object_decls) == 6
        assert "grain1" in {o.id for o in sc.object_decls}

    def test_loaded_counts(self, case_kb):
        assert len(event_log(case_kb)) == 3  # one desugared creation + two transfers
        assert len(case_kb.quantities) == 5
        assert "grain1" in case_kb.objects

    def test_determinism(self, case_text):
        first = parse(case_text)
        second = parse(case_text)
        assert first.scenario == second.scenario


class TestParseBasics:
    def test_empty_file(self):
        sc = scenario("")
        assert sc.kind_decls == [] and sc.events == []

    def test_comments_and_blank_lines(self):
        sc = scenario("# header\n\nobject-kind Grain\n  # indented comment\n")
        assert [k.name for k in sc.kind_decls] == ["Grain"]

    def test_crlf_tolerated(self):
        sc = scenario("object-kind Grain\r\nobject g1 : Grain\r\n")
        assert sc.object_decls[0].id == "g1"

    def test_object_default_time(self):
        sc = scenario("object-kind Grain\nobject g1 : Grain\nobject g2 : Grain at t5\n")
        assert sc.object_decls[0].at == 0
        assert sc.object_decls[1].at == 5

    def test_multiline_event_block(self):
        text = (
            "object-kind Grain\n"
            "quantity-kind Rock\n"
            "object a : Grain\nobject b : Grain\n"
            "quantity r1 : Rock at t0 granules { a, b }\n"
            "event split at t1 {\n"
            "  donor r1 ;\n"
            "  create r2 : Rock granules { a, b }\n"
            "}\n"
        )
        sc = scenario(text)
        assert sc.events[0].donors == ("r1",)
        assert sc.events[0].creates[0].granules == ("a", "b")

    def test_requires_list(self):
        sc = scenario("object-kind A\nobject-kind B\nquantity-kind Q requires A, B\n")
        assert sc.kind_decls[2].requires == ("A", "B")


class TestDiagnostics:
    def test_missing_kind_reported_at_colon(self):
        (d,) = diags("quantity rock1 :")
        assert (d.line, d.column) == (1, 16)
        assert d.snippet == "quantity rock1 :"
        assert "expected a kind name" in d.message

    def test_unknown_statement(self):
        (d,) = diags("frobnicate x\n")
        assert d.column == 1 and "unknown statement" in d.message

    def test_keyword_as_identifier(self):
        (d,) = diags("object-kind event\n")
        assert "keyword 'event'" in d.message

    def test_hyphen_in_identifier(self):
        (d,) = diags("object-kind my-grain\n")
        assert "not a valid" in d.message

    def test_missing_time(self):
        (d,) = diags("object-kind G\nobject a : G\nobject b : G\nconnect a b at\n")
        assert d.line == 4 and "time point" in d.message

    def test_unclosed_event_block(self):
        (d,) = diags("event x at t0 {\n  donor r1\n")
        assert "unclosed event block" in d.message
        assert (d.line, d.column) == (1, 15)

    def test_unclosed_granule_block(self):
        out = diags("quantity-kind R\nquantity q : R at t0 granules { a, b\n")
        assert any("expected '}'" in d.message for d in out)

    def test_event_without_create(self):
        out = diags("quantity-kind R\nobject-kind G\nobject a : G\nobject b : G\n"
                    "quantity r1 : R at t0 granules {a, b}\n"
                    "event x at t1 { donor r1 }\n")
        assert any("at least one create clause" in d.message for d in out)

    def test_donorless_event_with_two_creates(self):
        out = diags(
            "quantity-kind R\nobject-kind G\n"
            "object a : G\nobject b : G\nobject c : G\nobject d : G\n"
            "event x at t0 { create p : R granules {a, b} ; create q : R granules {c, d} }\n"
        )
        assert any("can create only one quantity" in d.message for d in out)

    def test_subquantity_missing_of(self):
        (d,) = diags("quantity-kind R\nquantity-kind S\nsubquantity a b\n")
        assert "expected 'of'" in d.message

    def test_requires_without_name(self):
        (d,) = diags("quantity-kind Rock requires\n")
        assert "expected an object kind name" in d.message

    def test_disconnect_missing_at(self):
        (d,) = diags("object-kind G\nobject a : G\nobject b : G\ndisconnect a b t3\n")
        assert "expected 'at'" in d.message

    def test_multiple_statements_each_get_diagnostics(self):
        out = diags("object a :\nobject b :\n")
        assert len(out) == 2
        assert [d.line for d in out] == [1, 2]

    def test_diagnostics_sorted_and_deterministic(self):
        text = "object b :\nobject a :\n"
        first = diags(text)
        second = diags(text)
        assert first == second
        assert [d.line for d in first] == sorted(d.line for d in first)


class TestResolution:
    def test_forward_reference_ok(self):
        sc = scenario("object g1 : Grain\nobject-kind Grain\n")
        assert sc.object_decls[0].kind == "Grain"

    def test_undeclared_kind(self):
        (d,) = diags("object g1 : Grain\n")
        assert "undeclared kind 'Grain'" in d.message

    def test_wrong_meta_kind(self):
        (d,) = diags("quantity-kind Rock\nobject g1 : Rock\n")
        assert "not an object kind" in d.message

    def test_undeclared_granule(self):
        out = diags("quantity-kind Rock\nquantity r : Rock at t0 granules { gx, gy }\n")
        assert len(out) == 2
        assert "undeclared object 'gx'" in out[0].message
        assert "undeclared object 'gy'" in out[1].message

    def test_duplicate_entity_name(self):
        out = diags("object-kind G\nobject a : G\nobject a : G\n")
        assert any("reuses an already declared name" in d.message for d in out)

    def test_undeclared_donor(self):
        out = diags(
            "quantity-kind R\nobject-kind G\nobject a : G\nobject b : G\n"
            "event x at t0 { donor ghost ; create q : R granules {a, b} }\n"
        )
        assert any("undeclared quantity 'ghost' as donor" in d.message for d in out)

    def test_equal_event_times_rejected(self):
        out = diags(
            "quantity-kind R\nobject-kind G\n"
            "object a : G\nobject b : G\nobject c : G\nobject d : G\n"
            "quantity p : R at t0 granules {a, b}\n"
            "quantity q : R at t0 granules {c, d}\n"
        )
        assert any("must strictly increase" in d.message for d in out)


class TestBytesAndTotality:
    def test_invalid_utf8_positioned(self):
        result = parse_bytes(b"object-kind G\nobject \xff : G\n")
        assert not result.ok
        (d,) = result.diagnostics
        assert d.line == 2
        assert "byte offset 21" in d.message

    def test_arbitrary_bytes_never_crash(self):
        rng = random.Random(0)
        for _ in range(200):
            blob = bytes(rng.randrange(256) for _ in range(rng.randrange(0, 120)))
            parse_bytes(blob)  # must not raise

    def test_arbitrary_text_never_crashes(self):
        rng = random.Random(1)
        alphabet = "abc {}:,;#\n\t t0 t1 quantity event donor create"
        for _ in range(300):
            text = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 200)))
            parse(text)  # must not raise


class TestLoad:
    def test_engine_error_carries_location(self):
        sc = scenario(
            "quantity-kind R\nobject-kind G\n"
            "object a : G\nobject b : G\nobject c : G\nobject d : G\n"
            "quantity p : R at t0 granules {a, b}\n"
            "event x at t1 { donor p ; create q : R granules {a, b} }\n"
            "event y at t2 { donor p ; create r : R granules {c, d} }\n"
        )
        with pytest.raises(ScenarioLoadError) as exc_info:
            load(sc)
        assert exc_info.value.line == 9
        assert "not live" in exc_info.value.message

    def test_too_few_granules_located(self):
        result = parse(
            "quantity-kind R\nobject-kind G\nobject a : G\n"
            "quantity p : R at t0 granules {a}\n"
        )
        assert result.ok
        with pytest.raises(ScenarioLoadError) as exc_info:
            load(result.scenario)
        assert exc_info.value.line == 4

    def test_named_creation_event(self):
        kb = load(scenario(
            "quantity-kind R\nobject-kind G\nobject a : G\nobject b : G\n"
            "event birth at t0 { create q : R granules {a, b} }\n"
        ))
        assert event_log(kb)[0].id == "birth"
        assert event_log(kb)[0].kind == "creation"

    def test_statement_order_free(self):
        # adjacency written before objects, chronology still applies cleanly
        kb = load(scenario(
            "connect a b at t0\n"
            "disconnect a b at t3\n"
            "quantity q : R at t0 granules {a, b}\n"
            "object a : G\nobject b : G\n"
            "object-kind G\nquantity-kind R\n"
        ))
        assert kb.adjacent_at("a", "b", 2)
        assert not kb.adjacent_at("a", "b", 3)

    def test_subquantity_pattern_loads_clean(self):
        from matterkb import validate_all
        from matterkb.model import SubQuantityAssertion

        kb = load(scenario(
            "object-kind Molecule\n"
            "quantity-kind Wine\nquantity-kind Alcohol\n"
            "object m1 : Molecule\nobject m2 : Molecule\nobject m3 : Molecule\n"
            "quantity wine1 : Wine at t0 granules {m1, m2, m3}\n"
            "quantity alcohol1 : Alcohol at t1 granules {m1, m2}\n"
            "subquantity alcohol1 of wine1\n"
            "connect m1 m2 at t0\nconnect m2 m3 at t0\nconnect m1 m3 at t0\n"
        ))
        assert SubQuantityAssertion("alcohol1", "wine1") in kb.subquantities
        assert validate_all(kb).ok

    def test_ggd_gap_loads_then_validates_dirty(self):
        from matterkb import validate_all

        kb = load(scenario(
            "object-kind H2OMolecule\nobject-kind Impurity\n"
            "quantity-kind PortionOfWater requires H2OMolecule\n"
            "object i1 : Impurity\nobject i2 : Impurity\n"
            "quantity w : PortionOfWater at t0 granules {i1, i2}\n"
            "connect i1 i2 at t0\n"
        ))
        report = validate_all(kb)
        assert {v.rule for v in report.violations} == {"AA1_GGD"}

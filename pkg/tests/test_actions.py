import math
import random

import pytest
from hypothesis import given, strategies as st

import coachplan as cp
from coachplan.actions import (
    MockEmbeddingProvider,
    RecordedEmbeddingProvider,
    parse_predicate,
    serialize_actions,
)
from coachplan.errors import (
    DimMismatch,
    DuplicateActionId,
    EmptyIndex,
    ParseError,
    ProviderError,
    UndeclaredVariable,
    ZeroVector,
)

SAMPLE = """\
ACTION_ID: pass_the_ball
DESCRIPTION: Pass the ball to a teammate.
ARGS: SENDER : ROLE, RECEIVER : ROLE
PRECONDITIONS: ball_held_by(SENDER), !has_passed(SENDER)
EFFECTS: !ball_held_by(SENDER), ball_at(RECEIVER), has_passed(SENDER)
"""


class TestParseActionFile:
    def test_sample_block(self):
        (schema,) = cp.parse_action_file(SAMPLE)
        assert schema.action_id == "pass_the_ball"
        assert schema.args == (("SENDER", "ROLE"), ("RECEIVER", "ROLE"))
        assert len(schema.preconditions) == 2
        assert schema.preconditions[1].negated
        assert len(schema.effects) == 3

    def test_round_trip(self, schemas):
        text = serialize_actions(list(schemas.values()))
        again = cp.parse_action_file(text)
        assert {s.action_id: s for s in again} == schemas

    def test_duplicate_id(self):
        with pytest.raises(DuplicateActionId):
            cp.parse_action_file(SAMPLE + "\n" + SAMPLE)

    def test_bad_predicate_arity(self):
        bad = SAMPLE.replace("ball_held_by(SENDER)", "ball_held_by(SENDER,X)", 1)
        with pytest.raises(ParseError):
            cp.parse_action_file(bad)

    def test_unknown_predicate(self):
        bad = SAMPLE.replace("ball_held_by", "holds", 1)
        with pytest.raises(ParseError):
            cp.parse_action_file(bad)

    def test_undeclared_variable(self):
        bad = SAMPLE.replace("ball_held_by(SENDER)", "ball_held_by(?X)", 1)
        with pytest.raises(UndeclaredVariable):
            cp.parse_action_file(bad)

    def test_error_carries_line_number(self):
        bad = "ACTION_ID: BadName\n"
        with pytest.raises(ParseError) as exc:
            cp.parse_action_file(bad)
        assert exc.value.line == 1

    def test_comments_between_blocks(self, schemas):
        text = "# preamble\n\n" + SAMPLE
        (schema,) = cp.parse_action_file(text)
        assert schema.action_id == "pass_the_ball"

    def test_default_library(self, schemas):
        assert "move_to" in schemas
        assert "kick_to_goal" in schemas
        kick = schemas["kick_to_goal"]
        assert any(p.name == "ball_held_by" for p in kick.preconditions)


def test_parse_predicate_negation():
    pred = parse_predicate("!has_passed(STRIKER)")
    assert pred.negated and pred.args == ("STRIKER",)
    assert str(pred) == "!has_passed(STRIKER)"


class TestCosine:
    def test_identical(self):
        e = cp.Embedding((1.0, 2.0, 3.0), 3)
        assert cp.cosine_similarity(e, e) == pytest.approx(1.0)

    def test_orthogonal(self):
        a = cp.Embedding((1.0, 0.0), 2)
        b = cp.Embedding((0.0, 1.0), 2)
        assert cp.cosine_similarity(a, b) == pytest.approx(0.0)

    def test_opposite(self):
        a = cp.Embedding((2.0, -1.0), 2)
        b = cp.Embedding((-2.0, 1.0), 2)
        assert cp.cosine_similarity(a, b) == pytest.approx(-1.0)

    def test_zero_vector(self):
        a = cp.Embedding((0.0, 0.0), 2)
        b = cp.Embedding((1.0, 0.0), 2)
        with pytest.raises(ZeroVector):
            cp.cosine_similarity(a, b)

    def test_dim_mismatch(self):
        a = cp.Embedding((1.0,), 1)
        b = cp.Embedding((1.0, 0.0), 2)
        with pytest.raises(DimMismatch):
            cp.cosine_similarity(a, b)

    @given(
        st.lists(st.floats(-5, 5), min_size=4, max_size=4),
        st.floats(0.01, 100.0),
    )
    def test_scale_invariance(self, vec, scale):
        if all(v == 0 for v in vec):
            return
        a = cp.Embedding(tuple(vec), 4)
        b = cp.Embedding(tuple(v * scale for v in vec), 4)
        if math.sqrt(sum(v * v for v in b.vector)) == 0.0:
            return
        assert cp.cosine_similarity(a, b) == pytest.approx(1.0, abs=1e-9)

    def test_bounds(self):
        rng = random.Random(2)
        for _ in range(100):
            a = cp.Embedding(tuple(rng.uniform(-1, 1) for _ in range(8)), 8)
            b = cp.Embedding(tuple(rng.uniform(-1, 1) for _ in range(8)), 8)
            assert -1.0 - 1e-9 <= cp.cosine_similarity(a, b) <= 1.0 + 1e-9


class TestRetrieve:
    def test_k_zero(self, schemas):
        provider = MockEmbeddingProvider()
        index = cp.build_index(list(schemas.values()), provider)
        assert cp.retrieve_actions("anything", index, provider, k=0) == []

    def test_k_exceeds_store(self, schemas):
        provider = MockEmbeddingProvider()
        index = cp.build_index(list(schemas.values()), provider)
        out = cp.retrieve_actions("kick the ball", index, provider, k=999)
        assert len(out) == len(schemas)
        assert len({s.action_id for s in out}) == len(schemas)

    def test_empty_index(self):
        provider = MockEmbeddingProvider()
        index = cp.build_index([], provider)
        with pytest.raises(EmptyIndex):
            cp.retrieve_actions("x", index, provider, k=1)

    def test_exact_description_ranks_first(self, schemas):
        provider = MockEmbeddingProvider()
        index = cp.build_index(list(schemas.values()), provider)
        target = schemas["kick_to_goal"]
        out = cp.retrieve_actions(target.description, index, provider, k=1)
        assert out[0].action_id == "kick_to_goal"

    def test_tie_break_lexicographic(self):
        provider = MockEmbeddingProvider()
        # Same description text embeds identically, so similarity ties.
        mk = lambda aid: cp.ActionSchema(aid, "identical text", (), (), ())
        index = cp.build_index([mk("zeta"), mk("alpha")], provider)
        out = cp.retrieve_actions("identical text", index, provider, k=2)
        assert [s.action_id for s in out] == ["alpha", "zeta"]

    def test_deterministic(self, schemas):
        provider = MockEmbeddingProvider()
        index = cp.build_index(list(schemas.values()), provider)
        a = cp.retrieve_actions("score a goal", index, provider, k=5)
        b = cp.retrieve_actions("score a goal", index, provider, k=5)
        assert [s.action_id for s in a] == [s.action_id for s in b]


class TestProviders:
    def test_mock_is_deterministic(self):
        p = MockEmbeddingProvider()
        assert p.embed("kick the ball") == p.embed("kick the ball")

    def test_mock_never_zero(self):
        p = MockEmbeddingProvider()
        assert any(v != 0.0 for v in p.embed("").vector)

    def test_recorded_round_trip(self, tmp_path):
        p = MockEmbeddingProvider(dim=4)
        texts = ["alpha beta", "gamma"]
        lines = []
        for text in texts:
            emb = p.embed(text)
            key = RecordedEmbeddingProvider.key_for(text)
            lines.append(key + " " + " ".join(f"{v:.9g}" for v in emb.vector))
        path = tmp_path / "emb.txt"
        path.write_text("\n".join(lines) + "\n")
        rec = RecordedEmbeddingProvider(path)
        for text in texts:
            assert rec.embed(text).vector == pytest.approx(p.embed(text).vector)

    def test_recorded_missing_key(self, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("deadbeef 1.0 2.0\n")
        rec = RecordedEmbeddingProvider(path)
        with pytest.raises(ProviderError):
            rec.embed("never recorded")

    def test_recorded_empty_file(self, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("# nothing here\n")
        with pytest.raises(ProviderError):
            RecordedEmbeddingProvider(path)

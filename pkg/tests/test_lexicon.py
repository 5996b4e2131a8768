from __future__ import annotations

import pytest
import yaml

from corpaforge.errors import LexiconError
from corpaforge.lexicon import (
    TYPE_A,
    TYPE_B,
    dump_lexicon,
    load_lexicon,
    parse_lexicon,
    to_mapping,
)

EXPECTED_CLASSES = (
    "healthy", "cancer", "cardiomegaly", "pleural_effusion",
    "pneumonia", "pneumothorax",
)


def test_builtin_shape(lexicon):
    assert len(lexicon.concepts) == 17
    assert lexicon.classes == EXPECTED_CLASSES
    assert lexicon.summary_class == "healthy"


def test_builtin_class_concept_counts(lexicon):
    counts = {
        cls: len(lexicon.class_concept_indices(cls)) for cls in lexicon.classes
    }
    assert counts == {
        "healthy": 1,
        "cancer": 5,
        "cardiomegaly": 1,
        "pleural_effusion": 5,  # includes the shared opacities concept
        "pneumonia": 4,
        "pneumothorax": 2,
    }
    assert lexicon.single_concept_classes() == ("healthy", "cardiomegaly")


def test_mass_phrase_is_type_a_under_cancer(lexicon):
    concept = lexicon.concept("mass")
    assert concept.class_ids == ("cancer",)
    assert any(p.words == ("mass",) and p.kind == TYPE_A for p in concept.phrases)


def test_builtin_phrase_inventory(lexicon):
    """Spot-check the built-in phrase clusters, variants expanded."""
    phrases = {c.id: {p.text for p in c.phrases} for c in lexicon.concepts}
    assert phrases["unremarkable"] == {
        "normal", "unremarkable", "lungs clear", "no evidence",
        "no interval change", "no acute cardiopulmonary abnormality",
        "normal hilar contours", "no acute process",
    }
    assert phrases["enlarged_heart"] == {
        "cardiomegaly", "borderline cardiac silhouette", "borderline heart",
        "prominent cardiac silhouette", "heart enlarged", "top normal heart",
    }
    assert {"nodular density", "nodular densities"} <= phrases["nodule"]
    assert {"hydro pneumothorax", "hydropneumothorax", "pneumothoraces"} <= phrases[
        "absent_lung_markings"
    ]
    assert "ground glass opacities" in phrases["opacities"]
    assert phrases["consolidation"] == {"consolidation"}
    # every phrase belongs to exactly one concept
    all_phrases = [p.text for c in lexicon.concepts for p in c.phrases]
    assert len(all_phrases) == len(set(all_phrases))


def test_type_b_markers(lexicon):
    kind = {
        p.text: p.kind for c in lexicon.concepts for p in c.phrases
    }
    assert kind["lungs clear"] == TYPE_B
    assert kind["cavitary lesion"] == TYPE_B
    assert kind["rounded opacity"] == TYPE_B
    assert kind["costophrenic angle blunting"] == TYPE_B
    assert kind["pleural fluid"] == TYPE_A
    assert kind["meniscus sign"] == TYPE_A


def test_synonym_groups(lexicon):
    members = [
        {" ".join(m) for m in g.members} for g in lexicon.synonym_groups
    ]
    assert {"hilum", "hilus", "hilar"} in members
    assert {"heart size", "cardiac silhouette", "cardiac contour"} in members


def test_negation_configuration(lexicon):
    prefixes = {" ".join(p) for p in lexicon.negation_prefixes}
    assert prefixes == {"no", "there is no", "no evidence of"}
    triggers = {" ".join(t.words): t.keep for t in lexicon.negation_triggers}
    assert triggers == {"clear of": 1, "without": 0,
                        "should not be mistaken for": 0}
    fp = {" ".join(t) for t in lexicon.false_positive_terms}
    assert fp == {"nipple shadow", "evaluate"}


def test_concept_index_bijection(lexicon):
    indices = [lexicon.concept_index(c.id) for c in lexicon.concepts]
    assert indices == list(range(17))
    assert lexicon.concept_index(lexicon.concepts[0].id) == 0


def test_concept_index_unknown_id(lexicon):
    with pytest.raises(LexiconError):
        lexicon.concept_index("no_such_concept")


def test_roundtrip_through_yaml(lexicon, tmp_path):
    path = tmp_path / "lexicon.yaml"
    path.write_text(dump_lexicon(lexicon), encoding="utf-8")
    again = load_lexicon(str(path))
    assert again == lexicon
    assert again.content_hash() == lexicon.content_hash()


def test_duplicate_concept_id_rejected(lexicon):
    data = to_mapping(lexicon)
    data["concepts"].append(dict(data["concepts"][1]))
    with pytest.raises(LexiconError, match="duplicate concept id"):
        parse_lexicon(data)


def test_empty_phrase_list_rejected(lexicon):
    data = to_mapping(lexicon)
    data["concepts"][0]["phrases"] = []
    with pytest.raises(LexiconError, match="empty phrase list"):
        parse_lexicon(data)


def test_overlapping_synonym_groups_rejected(lexicon):
    data = to_mapping(lexicon)
    data["synonyms"].append(["hilar", "perihilar"])
    with pytest.raises(LexiconError, match="two groups"):
        parse_lexicon(data)


def test_unparseable_file_rejected(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("classes: [a\n  - :", encoding="utf-8")
    with pytest.raises(LexiconError, match="cannot parse"):
        load_lexicon(str(path))


def test_yaml_dump_is_loadable_mapping(lexicon):
    data = yaml.safe_load(dump_lexicon(lexicon))
    assert set(data) == {
        "classes", "summary_class", "concepts", "synonyms",
        "negation_prefixes", "negation_triggers", "false_positive_terms",
    }

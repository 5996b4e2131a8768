"""Clinical concept lexicon: concepts, phrases, synonyms, negation config.

A lexicon fixes the concept order (and therefore the meaning of every
bit in a concept vector), the phrase clusters used for matching, the
synonym groups honored during type-B matching, and the negation /
false-positive word lists consumed by the cleaning rules. The built-in
default covers six chest X-ray pathology classes with 17 concepts; any
part of it can be replaced by loading a YAML file with the same shape:

    classes: [healthy, cancer, ...]
    summary_class: healthy
    concepts:
      - id: mass
        name: Mass
        classes: [cancer]
        phrases:
          - {text: mass, kind: A}
          - {text: cavitary lesion, kind: B}
    synonyms:
      - [hilum, hilus, hilar]
    negation_prefixes: ["no", "there is no", "no evidence of"]
    negation_triggers:
      - {text: clear of, keep: 1}
      - without
    false_positive_terms: ["nipple shadow", evaluate]

Type A phrases match as exact contiguous word sequences; type B phrases
match when every word (or a synonym of it) appears somewhere in a single
sentence. A negation trigger's optional ``keep`` is the number of its
leading words retained when a sentence is truncated at it.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Any

import yaml

from .errors import LexiconError
from .textproc import normalize

BUILTIN = "builtin"

TYPE_A = "A"
TYPE_B = "B"


@dataclass(frozen=True)
class Phrase:
    words: tuple[str, ...]
    kind: str

    @property
    def text(self) -> str:
        return " ".join(self.words)


@dataclass(frozen=True)
class Concept:
    id: str
    display_name: str
    class_ids: tuple[str, ...]
    phrases: tuple[Phrase, ...]


@dataclass(frozen=True)
class SynonymGroup:
    members: tuple[tuple[str, ...], ...]


@dataclass(frozen=True)
class NegationTrigger:
    words: tuple[str, ...]
    keep: int = 0  # leading trigger words retained on truncation


@dataclass(frozen=True)
class ConceptLexicon:
    concepts: tuple[Concept, ...]
    classes: tuple[str, ...]
    synonym_groups: tuple[SynonymGroup, ...]
    negation_prefixes: tuple[tuple[str, ...], ...]
    negation_triggers: tuple[NegationTrigger, ...]
    false_positive_terms: tuple[tuple[str, ...], ...]
    summary_class: str

    def __len__(self) -> int:
        return len(self.concepts)

    def concept_index(self, concept_id: str) -> int:
        try:
            return self._index[concept_id]
        except KeyError:
            raise LexiconError(f"unknown concept id: {concept_id!r}") from None

    def concept(self, concept_id: str) -> Concept:
        return self.concepts[self.concept_index(concept_id)]

    def class_index(self, class_id: str) -> int:
        try:
            return self.classes.index(class_id)
        except ValueError:
            raise LexiconError(f"unknown class id: {class_id!r}") from None

    def class_concept_indices(self, class_id: str) -> tuple[int, ...]:
        """Vector indices of the concepts belonging to a class."""
        if class_id not in self.classes:
            raise LexiconError(f"unknown class id: {class_id!r}")
        return tuple(
            i for i, c in enumerate(self.concepts) if class_id in c.class_ids
        )

    def single_concept_classes(self) -> tuple[str, ...]:
        return tuple(
            cls for cls in self.classes if len(self.class_concept_indices(cls)) < 2
        )

    @property
    def summary_concept_index(self) -> int:
        (index,) = self.class_concept_indices(self.summary_class)
        return index

    def content_hash(self) -> str:
        """Stable hash of the lexicon content, recorded in stage headers."""
        payload = json.dumps(to_mapping(self), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "_index", {c.id: i for i, c in enumerate(self.concepts)}
        )


# ---------------------------------------------------------------------------
# Built-in default: six pathology classes, 17 concepts.
# ---------------------------------------------------------------------------

def _a(text: str) -> dict[str, str]:
    return {"text": text, "kind": TYPE_A}


def _b(text: str) -> dict[str, str]:
    return {"text": text, "kind": TYPE_B}


_BUILTIN_DATA: dict[str, Any] = {
    "classes": [
        "healthy",
        "cancer",
        "cardiomegaly",
        "pleural_effusion",
        "pneumonia",
        "pneumothorax",
    ],
    "summary_class": "healthy",
    "concepts": [
        {
            "id": "unremarkable",
            "name": "Unremarkable",
            "classes": ["healthy"],
            "phrases": [
                _a("normal"),
                _a("unremarkable"),
                _b("lungs clear"),
                _a("no evidence"),
                _b("no interval change"),
                _b("no acute cardiopulmonary abnormality"),
                _b("normal hilar contours"),
                _b("no acute process"),
            ],
        },
        {
            "id": "mass",
            "name": "Mass",
            "classes": ["cancer"],
            "phrases": [
                _a("mass"),
                _b("cavitary lesion"),
                _a("carcinoma"),
                _a("neoplasm"),
                _a("tumor"),
                _a("tumour"),
                _b("rounded opacity"),
                _a("lung cancer"),
                _a("apical opacity"),
                _a("lump"),
                _a("triangular opacity"),
                _a("malignant"),
                _a("malignancy"),
            ],
        },
        {
            "id": "nodule",
            "name": "Nodule",
            "classes": ["cancer"],
            "phrases": [
                _a("nodular densities"),
                _a("nodular density"),
                _a("nodular opacities"),
                _a("nodular opacity"),
                _a("nodular opacification"),
                _a("nodule"),
            ],
        },
        {
            "id": "irregular_hilum",
            "name": "Irregular Hilum",
            "classes": ["cancer"],
            "phrases": [
                _a("hilar mass"),
                _a("hilar opacity"),
                _b("hilus enlarged"),
                _b("hilus fullness"),
                _b("hilus bulbous"),
            ],
        },
        {
            "id": "adenopathy",
            "name": "Adenopathy",
            "classes": ["cancer"],
            "phrases": [
                _a("mediastinal lymphadenopathy"),
                _a("mediastinal adenopathy"),
                _a("hilar lymphadenopathy"),
                _a("hilar adenopathy"),
            ],
        },
        {
            "id": "irregular_parenchyma",
            "name": "Irregular Parenchyma",
            "classes": ["cancer"],
            "phrases": [
                _a("pulmonary metastasis"),
                _a("carcinomatosis"),
                _a("metastatic disease"),
            ],
        },
        {
            "id": "pneumonitis",
            "name": "Pneumonitis",
            "classes": ["pneumonia"],
            "phrases": [
                _a("pneumonia"),
                _a("pneumonitis"),
                _a("bronchopneumonia"),
                _a("airspace disease"),
                _a("air bronchograms"),
                _a("cavitation"),
            ],
        },
        {
            "id": "consolidation",
            "name": "Consolidation",
            "classes": ["pneumonia"],
            "phrases": [_a("consolidation")],
        },
        {
            "id": "infection",
            "name": "Infection",
            "classes": ["pneumonia"],
            "phrases": [
                _a("infection"),
                _a("infectious process"),
                _a("infectious"),
            ],
        },
        {
            # Listed first under pneumonia; counts toward pleural effusion
            # when no other pneumonia concept is present (see labelling).
            "id": "opacities",
            "name": "Opacities",
            "classes": ["pneumonia", "pleural_effusion"],
            "phrases": [
                _a("airspace opacities"),
                _a("airspace opacity"),
                _a("homogeneous opacities"),
                _a("homogeneous opacity"),
                _a("patchy opacities"),
                _a("patchy opacity"),
                _a("ground-glass opacities"),
                _a("ground-glass opacity"),
                _a("alveolar opacities"),
                _a("alveolar opacity"),
                _a("ill-defined opacities"),
                _a("ill-defined opacity"),
                _a("reticulonodular pattern"),
            ],
        },
        {
            "id": "effusion",
            "name": "Effusion",
            "classes": ["pleural_effusion"],
            "phrases": [
                _a("effusion"),
                _a("effusions"),
                _a("pleural effusion"),
            ],
        },
        {
            "id": "fluid",
            "name": "Fluid",
            "classes": ["pleural_effusion"],
            "phrases": [
                _a("pleural fluid"),
                _a("fluid collection"),
                _b("layering fluid"),
            ],
        },
        {
            "id": "meniscus_sign",
            "name": "Meniscus Sign",
            "classes": ["pleural_effusion"],
            "phrases": [
                _a("meniscus"),
                _a("meniscus sign"),
            ],
        },
        {
            "id": "costophrenic_angle",
            "name": "Costophrenic Angle",
            "classes": ["pleural_effusion"],
            "phrases": [_b("costophrenic angle blunting")],
        },
        {
            "id": "enlarged_heart",
            "name": "Enlarged Heart",
            "classes": ["cardiomegaly"],
            "phrases": [
                _a("cardiomegaly"),
                _b("borderline cardiac silhouette"),
                _b("borderline heart"),
                _b("prominent cardiac silhouette"),
                _b("heart enlarged"),
                _b("top-normal heart"),
            ],
        },
        {
            "id": "absent_lung_markings",
            "name": "Absent Lung Markings",
            "classes": ["pneumothorax"],
            "phrases": [
                _b("absent lung markings"),
                _a("apical pneumothorax"),
                _a("basilar pneumothorax"),
                _a("hydro pneumothorax"),
                _a("hydropneumothorax"),
                _a("lateral pneumothorax"),
                _a("pneumothorax"),
                _a("pneumothoraces"),
            ],
        },
        {
            "id": "irregular_diaphragm",
            "name": "Irregular Diaphragm",
            "classes": ["pneumothorax"],
            "phrases": [
                _b("flattening of ipsilateral diaphragm"),
                _b("inversion of ipsilateral diaphragm"),
            ],
        },
    ],
    "synonyms": [
        ["hilum", "hilus", "hilar"],
        ["heart size", "cardiac silhouette", "cardiac contour"],
    ],
    "negation_prefixes": ["no", "there is no", "no evidence of"],
    "negation_triggers": [
        {"text": "clear of", "keep": 1},
        "without",
        "should not be mistaken for",
    ],
    "false_positive_terms": ["nipple shadow", "evaluate"],
}


# ---------------------------------------------------------------------------
# Parsing / validation / dumping
# ---------------------------------------------------------------------------

def _norm_words(text: Any, what: str) -> tuple[str, ...]:
    if not isinstance(text, str) or not text.strip():
        raise LexiconError(f"{what} must be a non-empty string, got {text!r}")
    words = tuple(normalize(text))
    if not words:
        raise LexiconError(f"{what} {text!r} normalizes to nothing")
    return words


def _parse_phrase(raw: Any, concept_id: str) -> Phrase:
    if not isinstance(raw, dict) or "text" not in raw:
        raise LexiconError(f"concept {concept_id!r}: phrase entries need a 'text' key")
    kind = raw.get("kind", TYPE_A)
    if kind not in (TYPE_A, TYPE_B):
        raise LexiconError(f"concept {concept_id!r}: phrase kind must be 'A' or 'B'")
    return Phrase(_norm_words(raw["text"], f"concept {concept_id!r} phrase"), kind)


def _parse_trigger(raw: Any) -> NegationTrigger:
    if isinstance(raw, str):
        return NegationTrigger(_norm_words(raw, "negation trigger"), 0)
    if isinstance(raw, dict) and "text" in raw:
        keep = int(raw.get("keep", 0))
        words = _norm_words(raw["text"], "negation trigger")
        if not 0 <= keep < len(words):
            raise LexiconError(f"negation trigger {raw['text']!r}: keep out of range")
        return NegationTrigger(words, keep)
    raise LexiconError(f"bad negation trigger entry: {raw!r}")


def parse_lexicon(data: Any) -> ConceptLexicon:
    """Validate a parsed mapping and build the immutable lexicon."""
    if not isinstance(data, dict):
        raise LexiconError("lexicon file must contain a mapping at top level")

    classes = tuple(str(c) for c in data.get("classes", []))
    if not classes or len(set(classes)) != len(classes):
        raise LexiconError("classes must be a non-empty list of unique ids")

    summary = data.get("summary_class")
    if summary not in classes:
        raise LexiconError(f"summary_class {summary!r} is not a listed class")

    concepts: list[Concept] = []
    seen_ids: set[str] = set()
    seen_phrases: set[tuple[str, ...]] = set()
    for raw in data.get("concepts", []):
        cid = raw.get("id")
        if not cid:
            raise LexiconError("every concept needs an id")
        if cid in seen_ids:
            raise LexiconError(f"duplicate concept id: {cid!r}")
        seen_ids.add(cid)
        name = raw.get("name", "")
        if not name:
            raise LexiconError(f"concept {cid!r}: display name must be non-empty")
        class_ids = tuple(str(c) for c in raw.get("classes", []))
        for cls in class_ids:
            if cls not in classes:
                raise LexiconError(f"concept {cid!r}: unknown class {cls!r}")
        if not class_ids:
            raise LexiconError(f"concept {cid!r}: needs at least one class")
        phrases = tuple(_parse_phrase(p, cid) for p in raw.get("phrases", []))
        if not phrases:
            raise LexiconError(f"concept {cid!r}: empty phrase list")
        for phrase in phrases:
            if phrase.words in seen_phrases:
                raise LexiconError(
                    f"phrase {phrase.text!r} appears in more than one concept"
                )
            seen_phrases.add(phrase.words)
        concepts.append(Concept(cid, name, class_ids, phrases))
    if not concepts:
        raise LexiconError("lexicon has no concepts")

    groups: list[SynonymGroup] = []
    claimed: set[tuple[str, ...]] = set()
    for raw_group in data.get("synonyms", []):
        members = tuple(_norm_words(m, "synonym member") for m in raw_group)
        if len(members) < 2:
            raise LexiconError("synonym groups need at least 2 members")
        for member in members:
            if member in claimed:
                raise LexiconError(
                    f"synonym member {' '.join(member)!r} appears in two groups"
                )
            claimed.add(member)
        groups.append(SynonymGroup(members))

    lexicon = ConceptLexicon(
        concepts=tuple(concepts),
        classes=classes,
        synonym_groups=tuple(groups),
        negation_prefixes=tuple(
            _norm_words(p, "negation prefix") for p in data.get("negation_prefixes", [])
        ),
        negation_triggers=tuple(
            _parse_trigger(t) for t in data.get("negation_triggers", [])
        ),
        false_positive_terms=tuple(
            _norm_words(t, "false positive term")
            for t in data.get("false_positive_terms", [])
        ),
        summary_class=str(summary),
    )

    for cls in lexicon.classes:
        if not lexicon.class_concept_indices(cls):
            raise LexiconError(f"class {cls!r} has no concepts")
    return lexicon


def load_lexicon(path: str = BUILTIN) -> ConceptLexicon:
    """Load a lexicon from a YAML file, or the built-in default."""
    if path == BUILTIN:
        return parse_lexicon(_BUILTIN_DATA)
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = yaml.safe_load(handle)
    except OSError as exc:
        raise LexiconError(f"cannot read lexicon file {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise LexiconError(f"cannot parse lexicon file {path}: {exc}") from exc
    return parse_lexicon(data)


def to_mapping(lexicon: ConceptLexicon) -> dict[str, Any]:
    """Plain mapping equivalent of a lexicon (round-trips via parse_lexicon)."""
    return {
        "classes": list(lexicon.classes),
        "summary_class": lexicon.summary_class,
        "concepts": [
            {
                "id": c.id,
                "name": c.display_name,
                "classes": list(c.class_ids),
                "phrases": [{"text": p.text, "kind": p.kind} for p in c.phrases],
            }
            for c in lexicon.concepts
        ],
        "synonyms": [
            [" ".join(m) for m in g.members] for g in lexicon.synonym_groups
        ],
        "negation_prefixes": [" ".join(p) for p in lexicon.negation_prefixes],
        "negation_triggers": [
            {"text": " ".join(t.words), "keep": t.keep} for t in lexicon.negation_triggers
        ],
        "false_positive_terms": [
            " ".join(t) for t in lexicon.false_positive_terms
        ],
    }


def dump_lexicon(lexicon: ConceptLexicon) -> str:
    """YAML text of the lexicon, loadable by load_lexicon."""
    return yaml.safe_dump(to_mapping(lexicon), sort_keys=False, allow_unicode=True)

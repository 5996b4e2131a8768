"""Exception hierarchy. Data-level failures exit the CLI with code 1."""


class CorpaForgeError(Exception):
    """Base class for all pipeline errors."""


class LexiconError(CorpaForgeError):
    """Invalid lexicon file or unknown concept/class identifier."""


class CorpusError(CorpaForgeError):
    """Ingestion failure that cannot be quarantined (e.g. duplicate ids)."""


class RecordError(CorpaForgeError):
    """Record-stream problem: bad header, schema mismatch, malformed line."""


class SamplingError(CorpaForgeError):
    """Undersampling or splitting cannot proceed on the given rows."""


class SynthesisError(CorpaForgeError):
    """Adversarial report synthesis failed for a record (bank gap or
    verify-repair non-convergence)."""


class EvaluationError(CorpaForgeError):
    """Prediction files cannot be scored (join failures, missing classes)."""

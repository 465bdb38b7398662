"""Exception hierarchy. Every error carries a stable ``code`` for error JSON."""


class HausLipError(Exception):
    code = "error"

    def to_json(self):
        return {"error": self.code, "message": str(self)}


class ClassificationAmbiguous(HausLipError):
    code = "classification_ambiguous"


class DecompositionUnverified(HausLipError):
    code = "decomposition_unverified"


class DimensionMismatch(HausLipError, ValueError):
    code = "dimension_mismatch"


class NotApplicable(HausLipError):
    code = "not_applicable"


class EnumerationInsufficient(HausLipError):
    code = "enumeration_insufficient"


class HorizonExceeded(HausLipError):
    code = "horizon_exceeded"


class WeakTriangleViolation(HausLipError):
    code = "weak_triangle_violation"


class SandwichViolation(HausLipError):
    code = "sandwich_violation"


class InsufficientClosure(HausLipError):
    code = "insufficient_closure"


class DegenerateSample(HausLipError):
    code = "degenerate_sample"


class SkewDegenerate(HausLipError):
    code = "skew_degenerate"


class NoValidPairs(HausLipError):
    code = "no_valid_pairs"


class ScaleRangeDegenerate(HausLipError):
    code = "scale_range_degenerate"


class CertificateMismatch(HausLipError):
    code = "certificate_mismatch"


class InputError(HausLipError, ValueError):
    code = "input_error"

"""Exception hierarchy shared across the package."""


class BrainRGError(Exception):
    """Base class for every error raised by brainrg."""


class UnknownLabel(BrainRGError, KeyError):
    def __str__(self) -> str:
        return Exception.__str__(self)


class DimsMismatch(BrainRGError, ValueError):
    pass


class EmptyRegion(BrainRGError, ValueError):
    pass


class EmptyAtlas(BrainRGError, ValueError):
    pass


class EmptyShape(BrainRGError, ValueError):
    pass


class DeformationCollapse(BrainRGError, RuntimeError):
    pass


class DegenerateInterval(BrainRGError, ValueError):
    pass


class CenterOutsideLesion(BrainRGError, ValueError):
    pass


class SynthesisFailed(BrainRGError, RuntimeError):
    pass


class EmptyPromptError(BrainRGError, ValueError):
    pass


class NonIntegerDownsample(BrainRGError, ValueError):
    pass


class EmptyMask(BrainRGError, ValueError):
    pass


class ClassCountMismatch(BrainRGError, ValueError):
    pass


class EmptyInput(BrainRGError, ValueError):
    pass


class DegenerateReference(BrainRGError, ValueError):
    pass


class MissingAnomalyMask(BrainRGError, ValueError):
    pass


class MissingUserPrompts(BrainRGError, ValueError):
    pass


class ConfigError(BrainRGError, ValueError):
    """Strict JSON config parsing failed (unknown key, bad type, bad range)."""

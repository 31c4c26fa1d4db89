"""Exception types shared across the package.

Exit-code mapping used by the CLI: usage errors -> 1, DataError subclasses -> 2,
NumericalError subclasses -> 3.
"""


class VqspeechError(Exception):
    """Base class for all package errors."""


class DataError(VqspeechError):
    """Bad or inconsistent input data (CLI exit code 2)."""


class NumericalError(VqspeechError):
    """Numerical failure such as a NaN/Inf trip (CLI exit code 3)."""


# --- audio / dsp ---

class UnsupportedFormat(DataError):
    pass


class MalformedHeader(DataError):
    pass


class IoError(DataError):
    pass


class ClipTooShort(DataError):
    pass


class NonColaConfig(DataError):
    pass


class SilentClean(DataError):
    pass


class SilentNoise(DataError):
    pass


# --- tensors / layers ---

class ShapeMismatch(DataError):
    pass


class NonFiniteOutput(NumericalError):
    pass


class HeadDivisibility(DataError):
    pass


# --- quantizer / model ---

class TooFewSamples(DataError):
    pass


class IndexOutOfRange(DataError):
    pass


class InvalidConfig(DataError):
    pass


class UntrainedModel(DataError):
    pass


class EmptyInput(DataError):
    pass


# --- training / persistence ---

class EmptyCorpus(DataError):
    pass


class EmptyValSet(DataError):
    pass


class VersionMismatch(DataError):
    pass


class ChecksumMismatch(DataError):
    pass


# --- stats / eval ---

class LengthMismatch(DataError):
    pass


class TooFewPoints(DataError):
    pass


class DegenerateSample(DataError):
    pass


class EmptyManifest(DataError):
    pass


class InvalidAlpha(DataError):
    pass

"""Exception types shared across the package."""


class NavspeakerError(Exception):
    """Base class for all package errors."""


class ConfigError(NavspeakerError):
    """Bad run configuration (unknown key, wrong type, bad value)."""


class ShapeError(NavspeakerError):
    """Array shapes do not satisfy an operation's contract."""


class NonScalarLoss(NavspeakerError):
    """backward() called on a tensor that is not a scalar."""


class NodeNotFound(NavspeakerError):
    """Unknown viewpoint id for a house."""


class PathNotFound(NavspeakerError):
    """No path satisfying the length bounds within the retry budget."""


class InvalidPath(NavspeakerError):
    """Path too short or not walkable in the house graph."""


class SegmentationError(NavspeakerError):
    """Micro-instruction segmentation does not match the instruction tokens."""


class EmptyCorpus(NavspeakerError):
    """Operation needs at least one corpus record."""


class EmptyEval(NavspeakerError):
    """Metric invoked with no candidate/reference pairs."""


class EmptyBatch(NavspeakerError):
    """Loss invoked with every position masked out."""


class EmptyTrajectory(NavspeakerError):
    """Encoder invoked with zero trajectory steps."""


class SequenceTooShort(NavspeakerError):
    """Sequence shorter than the largest convolution filter width."""


class NoDepth(NavspeakerError):
    """Back-projection invoked with no depth points."""


class SelfRelation(NavspeakerError):
    """Spatial relation queried between an object and itself."""


class VocabError(NavspeakerError):
    """Token id outside the vocabulary."""

"""Exception hierarchy shared by every stage."""


class CogniLocError(Exception):
    """Base class for all errors raised by this package."""


# --- graph / index ---------------------------------------------------------

class GraphError(CogniLocError):
    pass


class MalformedFixture(GraphError):
    pass


class DanglingEdge(GraphError):
    def __init__(self, src: str, dst: str):
        super().__init__(f"DanglingEdge: edge {src!r} -> {dst!r} has an undeclared endpoint")
        self.src = src
        self.dst = dst


class DuplicateSegmentId(GraphError):
    def __init__(self, segment_id: str):
        super().__init__(f"DuplicateSegmentId: {segment_id!r} declared more than once")
        self.segment_id = segment_id


class UnknownSegment(GraphError, KeyError):
    def __init__(self, segment_id: str):
        super().__init__(f"UnknownSegment: {segment_id!r}")
        self.segment_id = segment_id

    def __str__(self) -> str:  # KeyError would repr() the message
        return self.args[0]


class EmptyQuery(GraphError):
    pass


class IoFailure(CogniLocError):
    pass


class CorruptIndex(GraphError):
    pass


# --- agent backends --------------------------------------------------------

class BackendError(CogniLocError):
    """Any failure to obtain a usable completion."""


class BackendUnavailable(BackendError):
    pass


class SchemaViolation(BackendError):
    pass


class MissingScriptEntry(BackendError):
    pass


class MalformedScript(CogniLocError):
    pass


class ScoreOutOfRange(MalformedScript):
    pass


class MissingContextField(CogniLocError, KeyError):
    def __init__(self, name: str):
        super().__init__(f"MissingContextField: {name!r}")
        self.name = name

    def __str__(self) -> str:
        return self.args[0]


# --- pipeline --------------------------------------------------------------

class EmptyReport(CogniLocError):
    pass


class PruneTargetAbsent(CogniLocError):
    pass


class StageWriteError(CogniLocError):
    """A pipeline stage tried to overwrite a field owned by an earlier stage."""


class ConfigError(CogniLocError):
    pass


# --- evaluation ------------------------------------------------------------

class EvaluationError(CogniLocError):
    pass


class EmptyGroundTruth(EvaluationError):
    pass


class NoQueries(EvaluationError):
    pass


class MissingGroundTruth(EvaluationError):
    def __init__(self, bug_id: str):
        super().__init__(f"MissingGroundTruth: bug {bug_id!r} has no ground truth at this granularity")
        self.bug_id = bug_id


class GranularityMismatch(EvaluationError):
    pass


class AllDifferencesZero(EvaluationError):
    pass


class TooFewPairs(EvaluationError):
    pass


class EmptySample(EvaluationError):
    pass

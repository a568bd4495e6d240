"""Exception hierarchy shared by every stage of the pipeline."""


class Vid2DialogError(Exception):
    """Base class for all errors raised by this package."""


# -- ingest -----------------------------------------------------------------


class ParseError(Vid2DialogError, ValueError):
    pass


class MalformedTimestamp(ParseError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyTranscript(ParseError):
    pass


class MalformedRow(ParseError):
    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class UnknownErrorLabel(MalformedRow):
    pass


class ManifestError(Vid2DialogError):
    pass


class MissingFile(ManifestError, FileNotFoundError):
    def __init__(self, path):
        self.path = str(path)
        super().__init__(f"missing file: {self.path}")


class DuplicateRecordingId(ManifestError):
    pass


# -- llm client -------------------------------------------------------------


class LLMError(Vid2DialogError):
    pass


class UnknownTemplate(LLMError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class UnboundPlaceholder(LLMError):
    pass


class UnusedVariable(LLMError):
    pass


class CassetteMiss(LLMError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class EndpointError(LLMError):
    pass


# -- generation stages ------------------------------------------------------


class UnparseableCompletion(Vid2DialogError):
    pass


class EmptySteps(Vid2DialogError):
    pass


class AllStepsFiltered(Vid2DialogError):
    pass


class TokenCollision(Vid2DialogError):
    pass


class CoverageFailure(Vid2DialogError):
    pass


# -- localization -----------------------------------------------------------


class DanglingSourceRef(Vid2DialogError, IndexError):
    pass


class NoLocalizableSteps(Vid2DialogError):
    pass


class MissingSpan(Vid2DialogError, KeyError):
    def __init__(self, ordinal):
        self.ordinal = ordinal
        super().__init__(f"no span for step {ordinal}")

    def __str__(self):
        return Exception.__str__(self)


class EmptyTruth(Vid2DialogError, ValueError):
    pass


# -- dataset ----------------------------------------------------------------


class ValidationFailure(Vid2DialogError):
    def __init__(self, report):
        self.report = report
        super().__init__("conversation failed validation:\n" + str(report))


class EmptyCorpus(Vid2DialogError, ValueError):
    pass


class SchemaViolation(Vid2DialogError):
    def __init__(self, message, line=None, field_path=""):
        self.line = line
        self.field_path = field_path
        where = f"line {line}" if line is not None else "record"
        if field_path:
            where += f", field {field_path}"
        super().__init__(f"{where}: {message}")


class IOFailure(Vid2DialogError, OSError):
    pass


# -- evaluation -------------------------------------------------------------


class EmptyInput(Vid2DialogError, ValueError):
    pass


class UnparseableScore(Vid2DialogError):
    pass


# -- cli --------------------------------------------------------------------


class ConfigError(Vid2DialogError):
    pass


class StageInputMissing(Vid2DialogError):
    pass

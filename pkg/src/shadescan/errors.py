"""Exception hierarchy shared across the package."""


class ShadescanError(Exception):
    """Base class for all errors raised by shadescan."""


class RegistryError(ShadescanError):
    retryable = False


class BackendUnreachable(RegistryError):
    retryable = True


class MalformedResponse(RegistryError):
    pass


class NotFound(RegistryError):
    pass


class CorruptArchive(RegistryError):
    pass


class MalformedXml(ShadescanError):
    pass


class LexError(ShadescanError):
    def __init__(self, message, offset=None):
        super().__init__(message if offset is None else f"{message} at offset {offset}")
        self.offset = offset


class PovError(ShadescanError):
    pass


class MissingMetadata(PovError):
    pass


class SignalForUnknownTest(PovError):
    pass


class UnmappedReference(PovError):
    def __init__(self, reference, path):
        super().__init__(f"{path}: reference to {reference} has no relocation entry")
        self.reference = reference
        self.path = path


class RunnerError(ShadescanError):
    pass


class RunnerTimeout(RunnerError):
    pass


class RunnerCrash(RunnerError):
    pass


class MalformedReport(ShadescanError):
    pass


class PipelineError(ShadescanError):
    pass


class OriginalNotFound(PipelineError):
    pass


class PovSelfCheckFailed(PipelineError):
    pass

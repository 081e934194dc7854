"""Exception hierarchy."""


class RadioForgeError(Exception):
    """Base class for all package errors."""


class ConfigError(RadioForgeError):
    """Configuration could not be parsed or failed validation."""

    def __init__(self, message, key=None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class ModulationError(RadioForgeError, ValueError):
    pass


class SourceError(RadioForgeError, ValueError):
    pass


class ImpairmentError(RadioForgeError, ValueError):
    pass


class ChannelError(RadioForgeError, ValueError):
    pass


class ScheduleError(RadioForgeError):
    pass


class InfeasiblePackingError(ScheduleError):
    """The requested bandwidths do not fit the observable band."""


class AnnotationError(RadioForgeError, ValueError):
    pass


class FrameError(RadioForgeError):
    """A frame failed during synthesis; ``stage`` names the pipeline stage."""

    def __init__(self, frame_index, stage, cause):
        self.frame_index = frame_index
        self.stage = stage
        self.cause = cause
        super().__init__(f"frame {frame_index} failed in stage '{stage}': {cause!r}")

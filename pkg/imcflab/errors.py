class LabError(Exception):
    """Root of every error raised by imcflab."""


class ConfigError(LabError, ValueError):
    def __init__(self, message: str, path: str | None = None, line: int | None = None, column: int | None = None):
        self.path, self.line, self.column = path, line, column
        where = ""
        if path is not None:
            where = f"{path}:{line}:{column}: " if line is not None else f"{path}: "
        super().__init__(where + message)


class MetricError(LabError, ValueError):
    pass


class SolverError(LabError, RuntimeError):
    def __init__(self, message: str, diagnostics: dict | None = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class FlowFailure(LabError, RuntimeError):
    def __init__(self, message: str, member_index: int | None = None):
        self.member_index = member_index
        prefix = f"member {member_index}: " if member_index is not None else ""
        super().__init__(prefix + message)

"""
Exception hierarchy shared by the library modules and the CLI.

Every domain error carries the process exit code the CLI reports for it.
"""


class FourierShapError(Exception):
    exit_code = 1


class PropertyViolation(FourierShapError):
    """A checked mathematical property did not hold"""
    exit_code = 1

    def __init__(self, prop: str, deviation: float, tolerance: float, seed=None):
        self.prop = prop
        self.deviation = deviation
        self.tolerance = tolerance
        self.seed = seed
        msg = f"{prop} violated: max deviation {deviation:.3e} > {tolerance:.1e}"
        if seed is not None:
            msg += f" (reproduce with --seed {seed})"
        super().__init__(msg)


class DegenerateSystemError(FourierShapError):
    exit_code = 1


class SchemaError(FourierShapError):
    """Input file does not follow its documented format"""
    exit_code = 2

    def __init__(self, message: str, path: str = "", line=None):
        self.path = path
        self.line = line
        where = ""
        if path:
            where = f" at {path}"
        elif line is not None:
            where = f" (line {line})"
        super().__init__(f"{message}{where}")


class DimensionMismatchError(FourierShapError):
    exit_code = 3

    def __init__(self, message: str, artifact: str = ""):
        self.artifact = artifact
        prefix = f"{artifact}: " if artifact else ""
        super().__init__(f"{prefix}{message}")


class ResourceGuardError(FourierShapError):
    exit_code = 4


class QueryError(FourierShapError):
    """Failure while explaining one query of a batch"""

    def __init__(self, index: int, cause: FourierShapError):
        self.index = index
        self.cause = cause
        self.exit_code = cause.exit_code
        super().__init__(f"query {index}: {cause}")

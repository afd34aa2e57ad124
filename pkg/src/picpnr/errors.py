"""Exception types shared across the package.

Every error carries a short machine-readable ``kind`` used by the CLI to
emit ``ERROR[<kind>]`` prefixes.
"""


class PnrError(Exception):
    """Base class; ``kind`` feeds the CLI error prefix."""

    kind = "internal"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class SchemaError(PnrError):
    """Input document does not match the expected JSON schema."""

    kind = "schema"


class ValidationError(PnrError):
    """A structural invariant on netlist or layout data is violated."""

    kind = "invariant"


class ConfigError(PnrError):
    kind = "config"


class CapacityError(PnrError):
    """Die cannot fit the inflated footprints."""

    kind = "capacity"


class UnroutablePortError(PnrError):
    """A port has no legal access point."""

    kind = "unroutable-port"


class GdsOverflowError(PnrError):
    """Coordinates exceed the 32-bit GDSII database-unit range."""

    kind = "gds-overflow"


class InconsistentLayoutError(PnrError):
    kind = "inconsistent-layout"

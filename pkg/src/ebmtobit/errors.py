"""Exception hierarchy shared by every ebmtobit module."""


class EbTobitError(Exception):
    """Base class; the CLI maps any subclass to exit code 1."""

    stage = "validate"


class DimensionMismatch(EbTobitError, ValueError):
    pass


class EndpointOrderViolation(EbTobitError, ValueError):
    pass


class NonpositiveSigma(EbTobitError, ValueError):
    pass


class EmptyMatrix(EbTobitError, ValueError):
    pass


class UnboundedCell(EbTobitError, ValueError):
    """Both endpoints infinite of the same sign, or an infinite point cell."""


class ParseError(EbTobitError, ValueError):
    def __init__(self, path, row, col, token, reason="unparseable token"):
        self.path, self.row, self.col, self.token = path, row, col, token
        super().__init__(f"{path}: row {row}, column {col}: {reason} {token!r}")


class InvalidCell(EbTobitError, ValueError):
    pass


class DegenerateRow(EbTobitError, ValueError):
    """A row has zero likelihood under every support point."""

    stage = "likelihood"

    def __init__(self, rows):
        self.rows = list(rows)
        super().__init__(f"rows with zero likelihood at every support point: {self.rows[:10]}")


class DegenerateInput(EbTobitError, ValueError):
    stage = "solve"


class ZeroMarginalRow(EbTobitError, ValueError):
    """A row is impossible under the fitted prior."""

    stage = "posterior"

    def __init__(self, rows):
        self.rows = list(rows)
        super().__init__(f"rows with zero marginal probability under the prior: {self.rows[:10]}")


class DimensionTooHigh(EbTobitError, ValueError):
    stage = "support"


class RuleInapplicable(EbTobitError, ValueError):
    stage = "fill-in"


class ConfigInvalid(EbTobitError, ValueError):
    stage = "config"

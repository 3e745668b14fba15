# seawaylib/errors.py


class SeawayError(Exception):
    """Base error; `code` is printed by the CLI as `Error [<code>]`."""

    code = "E000"
    hint = None

    def __init__(self, message, hint=None):
        super().__init__(message)
        if hint is not None:
            self.hint = hint


class ParameterError(SeawayError):
    code = "E101"
    hint = "Check the vessel parameter file against docs/scenario-schema.md"


class SingularMassError(ParameterError):
    code = "E102"
    hint = "M_RB + M_A must be invertible; check m, I_z, x_g and the added-mass terms"


class ScenarioError(SeawayError):
    code = "E201"
    hint = "Run: seaway validate --scenario <file> for a field-by-field report"


class DimensionError(SeawayError):
    code = "E301"


class NumericalFailure(SeawayError):
    code = "E401"

    def __init__(self, message, row=None, hint=None):
        super().__init__(message, hint=hint)
        self.row = row


class ComparisonError(SeawayError):
    code = "E501"
    hint = "compare_runs needs at least two logs produced from the same scenario file"


class RunAborted(SeawayError):
    code = "E601"

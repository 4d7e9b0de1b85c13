class CasanovaError(Exception):
    """Base error for the library and the CLI

    Carries a human readable detail and the process exit code the CLI
    reports when the error reaches the top level.
    """

    exit_code: int = 2

    def __init__(self, detail: str, exit_code: int | None = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code


class FaultBoundError(CasanovaError):
    """N < 3f + 1"""


class UnknownBlockError(CasanovaError):
    pass


class UnknownTransactionError(CasanovaError):
    pass


class EquivocatorQueriedError(CasanovaError):
    """A view was requested for a validator with two or more most-recent blocks"""


class InvalidBlockError(CasanovaError):
    pass


class DlsError(CasanovaError):
    pass


class ConflictIndexMismatchError(CasanovaError):
    pass


class UnknownConflictError(CasanovaError):
    pass


class ProtocolVariantError(CasanovaError):
    pass


class ScenarioError(CasanovaError):
    pass


class TraceError(CasanovaError):
    pass


class StateBudgetExceeded(CasanovaError):
    def __init__(self, detail: str, explored: int):
        super().__init__(detail)
        self.explored = explored

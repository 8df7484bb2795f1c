"""Exception types shared across the package."""


class InputError(ValueError):
    """Invalid argument: bad shape, non-finite entry, out-of-range parameter."""


class SchemaError(InputError):
    """A JSON document does not match the expected schema.

    ``term_index`` points at the offending entry of a ``terms`` list when the
    problem is local to one term.
    """

    def __init__(self, message, term_index=None):
        if term_index is not None:
            message = f"term {term_index}: {message}"
        super().__init__(message)
        self.term_index = term_index


class ResourceCapError(RuntimeError):
    """A computation would exceed a configured size cap."""

    def __init__(self, message, required=None, cap=None):
        super().__init__(message)
        self.required = required
        self.cap = cap

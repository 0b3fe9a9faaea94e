"""Exception hierarchy; the CLI maps each family to an exit code."""


class AtomDriftError(Exception):
    exit_code = 2


class ConfigError(AtomDriftError, ValueError):
    """Bad arguments or configuration."""
    exit_code = 1


class SignalError(AtomDriftError, ValueError):
    """Unreadable, malformed or out-of-contract signal data."""


class DictionaryError(AtomDriftError, ValueError):
    """Malformed dictionary, atom, or dictionary file."""


class NumericError(AtomDriftError, ArithmeticError):
    """Non-finite or degenerate numbers produced during computation."""
    exit_code = 3

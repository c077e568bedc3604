"""Exception types shared across the toolkit."""


class ConfigError(ValueError):
    """Malformed configuration, automaton file, or inconsistent labelling."""


class OutOfDomainError(ValueError):
    """A state lies outside the gridded working domain."""


class NoGuaranteeError(KeyError):
    """Controller lookup outside the certified domain."""


class SolverAssertionError(AssertionError):
    """An internal fixpoint invariant was violated."""


class InstanceTooLargeError(ValueError):
    """Instance exceeds what the enumerative oracle can handle."""

"""Error types shared across the package.

UsageError maps to exit code 1, DataError to exit code 2 in the CLI.
"""


class GroundrecError(Exception):
    pass


class UsageError(GroundrecError):
    pass


class DataError(GroundrecError):
    pass

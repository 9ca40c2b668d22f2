"""Exception hierarchy.

Input-shaped problems (bad files, bad positions, incompatible automata) and
resource exhaustion (budgets) are kept apart because the CLI maps them to
different exit codes: input errors exit 3, budget errors exit 4.
"""


class TabgError(Exception):
    pass


class InputError(TabgError):
    """Anything wrong with user-supplied data."""


class ParseError(InputError):
    pass


class SignatureError(InputError):
    pass


class PositionError(InputError):
    pass


class ShapeError(InputError):
    """Operation applied to an automaton/constraint of the wrong class."""


class UnsupportedConstraintError(ShapeError):
    """Integer-signed linear atoms reaching the reduction/emptiness pipeline."""


class NamingError(InputError):
    pass


class PlanError(InputError):
    """Invalid pump plan."""


class DecodeError(InputError):
    """Term not in the image of curry."""


class BudgetError(TabgError):
    """A configured resource cap was hit.  Never a wrong answer."""

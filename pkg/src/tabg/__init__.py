"""Tree automata with local brother constraints and global equality,
disequality and counting constraints modulo flat equational theories."""

from .automata import (
    Automaton,
    BrotherAtom,
    BrotherConstraint,
    Rule,
    Run,
    intersect,
    member,
    reachable_states,
    union,
    validate_run,
)
from .constraints import (
    EqAtom,
    FALSE,
    LinAtom,
    Measure,
    NeqAtom,
    RunStats,
    TRUE,
    eval_atom,
    eval_constraint,
    format_constraint,
    measure,
    normalize,
    parse_constraint,
)
from .emso import AnnotatedTA, compile_query, holds, shift_bits
from .errors import (
    BudgetError,
    InputError,
    ParseError,
    PlanError,
    PositionError,
    ShapeError,
    SignatureError,
    TabgError,
    UnsupportedConstraintError,
)
from .fileformat import (
    format_automaton,
    format_hag,
    format_run,
    parse_automaton,
    parse_hag,
    parse_run,
)
from .pumping import (
    EmptinessResult,
    PumpPlan,
    Strata,
    apply_pump,
    compute_bound,
    emptiness,
    find_pump,
    stats,
    strata,
    wqo_leq,
)
from .reduction import (
    SynonymPlan,
    apply_synonym,
    eliminate_class_literal,
    eliminate_counting,
    eliminate_negative,
    reduce_with_trace,
    subdivide,
    to_positive_conjunctive,
)
from .terms import (
    Position,
    Signature,
    Term,
    format_position,
    format_term,
    height,
    parse_position,
    parse_term,
    positions,
    replace,
    subterm,
)
from .theory import (
    CongruenceIndex,
    FlatEquation,
    FlatTheory,
    class_index,
    eq_modulo,
    oracle_eq_modulo,
)
from .unranked import (
    HedgeAutomaton,
    UnrankedTerm,
    WordAutomaton,
    curry,
    hag_member,
    hag_to_tag,
    uncurry,
)

__version__ = "0.1.0"

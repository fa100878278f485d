"""Small computer-algebra layer: trees, parsing, calculus and numeric checks."""

from .calculus import count_nodes, diff, polynomial_coeffs, replace, subs, terms
from .core import (
    ONE,
    PI,
    ZERO,
    Add,
    Const,
    Expr,
    Func,
    I,
    Mul,
    PoleError,
    Pow,
    Symbol,
    add,
    as_expr,
    cos,
    exp,
    func,
    ln,
    mul,
    param,
    power,
    sin,
    sqrt,
    sym,
)
from .evaluate import UnboundNameError, compile_expr, eval_numeric, evaluate
from .integrate import NotIntegrableError, integrate
from .parse import DEFAULT_PARAMS, ExprSyntaxError, UnknownFunctionError, parse
from .printing import render
from .sampling import (
    Domain,
    SamplingError,
    equivalent,
    is_zero,
    max_mismatch,
    sample_values,
    zero_mismatch,
)

simplify = as_expr  # trees are kept in normal form by construction

__all__ = [
    "DEFAULT_PARAMS",
    "ONE",
    "PI",
    "ZERO",
    "Add",
    "Const",
    "Domain",
    "Expr",
    "ExprSyntaxError",
    "Func",
    "I",
    "Mul",
    "NotIntegrableError",
    "PoleError",
    "Pow",
    "SamplingError",
    "Symbol",
    "UnboundNameError",
    "UnknownFunctionError",
    "add",
    "as_expr",
    "compile_expr",
    "cos",
    "count_nodes",
    "diff",
    "equivalent",
    "eval_numeric",
    "evaluate",
    "exp",
    "func",
    "integrate",
    "is_zero",
    "ln",
    "max_mismatch",
    "mul",
    "param",
    "parse",
    "polynomial_coeffs",
    "power",
    "render",
    "replace",
    "sample_values",
    "simplify",
    "sin",
    "sqrt",
    "subs",
    "sym",
    "terms",
    "zero_mismatch",
]

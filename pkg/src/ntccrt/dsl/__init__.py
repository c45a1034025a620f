"""Textual modelling language: parser, printer and validator."""

from .parser import ParseError, parse, parse_constraint, parse_constraint_list, parse_process
from .printer import constraint_str, expr_str, model_str, proc_str
from .validate import ValidationError, ValidationFailed, validate, validate_constraint

__all__ = [
    "ParseError",
    "ValidationError",
    "ValidationFailed",
    "constraint_str",
    "expr_str",
    "model_str",
    "parse",
    "parse_constraint",
    "parse_constraint_list",
    "parse_process",
    "proc_str",
    "validate",
    "validate_constraint",
]

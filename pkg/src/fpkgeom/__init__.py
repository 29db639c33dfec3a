"""Symbolic-numeric verification of f.pk-structures and their Jacobi geometry."""

from .catalog import generalized_heisenberg, standard_contact
from .document import emit_document, load_document
from .fstruct import FpkStructure, classify, structure_propositions, validate_fpk
from .hamjac import EtaChoice, HamiltonianSystem, hamiltonian_field, jacobi_bracket, reeb_field, verify_jacobi_suite
from .report import CheckReport
from .symexpr import Chart, parse_expr
from .sympl import build_symplectization, verify_expansion, verify_top_power

__all__ = [
    "Chart", "CheckReport", "EtaChoice", "FpkStructure", "HamiltonianSystem",
    "build_symplectization", "classify", "emit_document", "generalized_heisenberg",
    "hamiltonian_field", "jacobi_bracket", "load_document", "parse_expr", "reeb_field",
    "standard_contact", "structure_propositions", "validate_fpk", "verify_expansion",
    "verify_jacobi_suite", "verify_top_power",
]

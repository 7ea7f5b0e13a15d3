"""Switching-controller synthesis for polynomial hybrid automata via
continuous invariant generation."""

from .poly import (Polynomial, VectorField, format_fraction, format_poly,
                   lie_derivative, parse_fraction, parse_poly)
from .sets import (And, Atom, Edge, HybridAutomaton, Mode, ModelError, Or,
                   TemplateSet, holds, parse_model, parse_templates)
from .criterion import (SynthesisConstraint, build_psi, ci_check_point,
                        derive_constraints)
from .synth import (RefinedAutomaton, SolveReport, SynthOptions,
                    cegis_solve, instantiate_and_check, parse_controller,
                    refine_guards, serialize_controller, synthesize)
from .verify import (SimOutcome, boundary_sample_check, export_qepcad,
                     export_smtlib2, falsify, simulate)

__version__ = "0.1.0"

__all__ = [
    "Polynomial", "VectorField", "format_fraction", "format_poly",
    "lie_derivative", "parse_fraction", "parse_poly",
    "And", "Atom", "Edge", "HybridAutomaton", "Mode", "ModelError", "Or",
    "TemplateSet", "holds", "parse_model", "parse_templates",
    "SynthesisConstraint", "build_psi", "ci_check_point",
    "derive_constraints",
    "RefinedAutomaton", "SolveReport", "SynthOptions", "cegis_solve",
    "instantiate_and_check", "parse_controller", "refine_guards",
    "serialize_controller", "synthesize",
    "SimOutcome", "boundary_sample_check", "export_qepcad",
    "export_smtlib2", "falsify", "simulate",
    "__version__",
]

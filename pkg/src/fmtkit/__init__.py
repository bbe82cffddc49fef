"""Finite-model-theory workbench: structures, generalized quantifiers, definability, spectra, Keisler proofs."""

__version__ = "0.1.0"

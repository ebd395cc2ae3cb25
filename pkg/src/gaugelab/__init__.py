"""gaugelab: lattice workbench for Yang-Mills flow, Narasimhan-Seshadri
projection, Hodge/harmonic decompositions, and adiabatic-limit experiments."""

__version__ = "0.1.0"

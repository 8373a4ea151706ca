"""Desk-scale numerical laboratory for driven Bose-Hubbard chains of gmon qubits."""

__version__ = "0.1.0"

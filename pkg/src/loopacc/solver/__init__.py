"""Bundled ground SMT solver: linear integer arithmetic with divisibility and
integer arrays, served over the SMT-LIB2 textual protocol."""

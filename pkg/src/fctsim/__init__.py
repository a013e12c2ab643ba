"""Desk-scale fat-tree flow-completion-time toolkit.

Three independent routes to the same quantities live side by side:

* :mod:`fctsim.analytic` -- closed-form M/G/1 mean and tail FCT curves,
  with and without short-flow replication.
* :mod:`fctsim.simcore` -- a deterministic packet-level simulator over a
  fat-tree with ECMP and optional replication.
* :mod:`fctsim.oracle` -- brute-force single- and two-queue simulations
  used to validate the closed forms.
"""

__version__ = "0.1.0"

"""Time-local open-system dynamics and its thermodynamics.

Submodules: :mod:`qstate` (states and entropic quantities), :mod:`generator`
(GKSL generators, integration, classification), :mod:`thermo` (entropy
production, free energy, athermality), :mod:`purity`, :mod:`spinbath`
(central spin in a spin bath) and :mod:`oracle` (exact system+bath propagation).
"""

__version__ = "0.1.0"

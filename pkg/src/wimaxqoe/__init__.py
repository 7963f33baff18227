"""Deterministic discrete-event simulator of a WiMAX point-to-multipoint cell
with Manhattan-grid mobile subscriber stations, a Best-Effort uplink scheduler,
and loss-driven per-flow rate adaptation."""

__version__ = "0.1.0"

"""Python access to the dpsnn cortical grid simulator."""

from ._dpsnn import DpsnnError, bimodality, config_text, fixed_points, gain, psd, run

__all__ = ["DpsnnError", "bimodality", "config_text", "fixed_points", "gain", "psd", "run"]

"""State-level nowcasting of energy-consumption growth (panel MIDAS) and
density nowcasting of CO2-emissions growth (penalized panel quantile
regression with skew-t quantile matching), under a simulated weekly
release calendar."""

__version__ = "0.1.0"

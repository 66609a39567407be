"""Link-level simulator for uplink MIMO-SCMA with a merged bit-level graph receiver."""

__version__ = "0.1.0"

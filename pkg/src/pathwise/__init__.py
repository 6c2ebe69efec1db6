"""pathwise: clinical pathway flowcharts to verified CQL decision services."""

__version__ = "0.1.0"

"""Camera-only BEV detection core verified on synthetic scenes."""

__version__ = "0.1.0"

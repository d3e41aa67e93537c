"""Sketch-to-cartoon painting toolkit.

Pipeline: extract line sketches from color cartoons, overlay color hints,
train a U-Net generator against a patch discriminator under a four-term
composite loss, then paint new sketches interactively through the CLI or
the HTTP service.
"""

__version__ = "0.1.0"

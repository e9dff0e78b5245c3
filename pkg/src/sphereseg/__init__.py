"""sphereseg: spiral-convolution graph U-Net segmentation on icosphere meshes."""

__version__ = "0.1.0"

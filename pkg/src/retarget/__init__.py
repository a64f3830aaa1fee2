"""Content-aware image retargeting by region-weighted triangle-mesh warping,
with seam-carving and uniform-scaling baselines."""
from .raster import RasterImage, decode_image, encode_image, resample_bilinear
from .pipeline import RunConfig, retarget_mesh, run_pipeline

__all__ = ["RasterImage", "decode_image", "encode_image", "resample_bilinear",
           "RunConfig", "retarget_mesh", "run_pipeline"]
__version__ = "0.1.0"

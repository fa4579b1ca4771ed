"""Classical radiograph processing: filtering, morphology, edges, blobs,
HOG descriptors and segmentation, driven from Python or JSON pipelines."""
from .blobs import Blob, detect_blobs_doh, detect_blobs_dog, detect_blobs_log
from .denoise import (BilateralParams, NoiseSpec, add_salt_pepper, bilateral, gaussian_blur,
                      mean_blur, median_blur)
from .edges import GradientField, EdgeMap, canny, canny_otsu, gradient, kernel_edge_response
from .hog import HogSpec, cell_histograms
from .io import load_image, save_image
from .kernels import BorderPolicy, Kernel, pseudo_voigt_mix
from .morphology import StructuringElement, closing, dilate, erode, morph_gradient, opening
from .pipeline import parse_pipeline, run_pipeline
from .segmentation import (FelzParams, SlicParams, felzenszwalb, otsu, slic, threshold,
                           watershed)

__version__ = "0.1.0"

__all__ = [
    "Blob", "detect_blobs_doh", "detect_blobs_dog", "detect_blobs_log",
    "BilateralParams", "NoiseSpec", "add_salt_pepper", "bilateral", "gaussian_blur",
    "mean_blur", "median_blur",
    "GradientField", "EdgeMap", "canny", "canny_otsu", "gradient", "kernel_edge_response",
    "HogSpec", "cell_histograms", "load_image", "save_image",
    "BorderPolicy", "Kernel", "pseudo_voigt_mix",
    "StructuringElement", "closing", "dilate", "erode", "morph_gradient", "opening",
    "parse_pipeline", "run_pipeline",
    "FelzParams", "SlicParams", "felzenszwalb", "otsu", "slic", "threshold", "watershed",
]

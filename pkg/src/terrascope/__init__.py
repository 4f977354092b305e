"""Land-use / land-cover raster analysis."""

from .change import (
    ChangeResult,
    PcaComponents,
    Pyramid,
    TransitionMatrix,
    build_pyramid,
    change_vector_analysis,
    image_difference,
    multiscale_fuse,
    pca_change,
    postclass_compare,
    symmetric_eigen,
    thematic_change,
)
from .cluster import ClassMap, ClusterModel, classify_stack, kmeans_assign, kmeans_fit
from .edges import (
    EdgeMap,
    GradientField,
    laplacian_zero_crossings,
    link_edges,
    nonmax_suppress,
    sobel_gradient_field,
)
from .preprocess import AffineFit, ControlPointSet, fit_affine, normalize, resample
from .raster import (
    BandStack,
    GeoTransform,
    RasterGrid,
    load_ascii_grid,
    load_pgm,
    pixel_world_transform,
    read_world_file,
    save_ascii_grid,
    stack_bands,
)
from .report import AreaReport, class_areas, render_reports
from .segment import (
    SegmentMap,
    edge_based_segment,
    label_components,
    region_grow,
    threshold_segment,
)
from .spatial_stats import GResult, SpatialWeights, build_weights, g_permutation_test, general_g

__version__ = "0.1.0"

"""View-based 3D model retrieval with learned depth-image subspaces."""

from .mesh import TriangleMesh, parse_off, read_off, serialize_off, surface_area, transform_mesh
from .pose import Category, PoseInfo, categorize, cpca_covariance, eigenvalue_ratios, normalize_pose
from .render import geodesic_sphere, render_depth, render_views, transform_image_d4
from .arr import build_view_maps, enumerate_arr, remap_views
from .subspace import SubspaceModel, assemble_training_matrix, project, train_ica, train_nmf, train_pca
from .retrieval import (
    FILTERED,
    ModelDescriptor,
    QueryDescriptor,
    model_distance,
    preprocess_database_model,
    preprocess_query,
    rank_database,
)

__version__ = "0.1.0"

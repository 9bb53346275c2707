from .delaunay import circumcenters, delaunay_triangles, incircle, orient, violates_empty_circle
from .io import (
    MdiInstance,
    TrajectoryInstance,
    dumps_complex,
    load_complex,
    load_mdi,
    load_signals,
    load_trajectories,
    loads_complex,
    save_complex,
    save_mdi,
    save_signals,
    save_trajectories,
    write_manifest,
)
from .mdi import (
    CoauthorshipComplex,
    ValueDistribution,
    generate_coauthorship,
    generate_mdi_instance,
    imputation_accuracy,
    make_instance,
    mask_protocol,
    within_tolerance,
)
from .synthetic_flow import SyntheticFlowDataset, generate_synthetic_flow, punch_holes

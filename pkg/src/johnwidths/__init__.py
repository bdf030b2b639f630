"""Whitney covers, cube-trees, balanced partitions and weighted spline rates."""

from .dyadic import (DyadicCube, RingRegion, GridMask, DomainSpec, Nesting,
                     subdivide, nesting_relation, rasterize)
from .whitney import WhitneyCover, whitney_decompose, face_adjacency
from .tree import Tree
from .cubetree import (CubeTree, ConsistencyCertificate, SubtreeRegion,
                       WitnessCurve, spanning_tree, build_cube_tree,
                       subtree_region, witness_curve, estimate_john_constant)
from .measure import (DensityMeasure, ProductMeasure, BoundaryWeight,
                      WeightPair, ProductPsi, phi_eval, psi_from_phi,
                      weight_grid)
from .treepart import (TreePartition, split_vertex, sigma, partition_tree,
                       balanced_partition, overlap_count)
from .cubepart import CubePartition, partition_cube, cube_partition_overlap
from .domainpart import (DomainPartition, PreparedDomain, partition_domain,
                         domain_overlap, prepare_domain)
from .spline import (SampledFunction, NormSpec, Spline, project_local,
                     approximate, mixed_norm, rate_experiment)
from .exponents import ExponentReport, report, theta, theta_tilde

__version__ = "0.1.0"

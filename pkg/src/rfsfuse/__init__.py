"""Multi-sensor multi-object tracking fusion toolkit.

Random-finite-set densities in Gaussian-mixture form, local GM-PHD and
GM-MB filters, estimation-uncertainty-driven fusion weights, and the
space-varying-weight fusion rules for both filter families, with a
seeded Monte-Carlo harness and CLI.
"""

from .densities import (
    BernoulliComponent,
    GaussianComponent,
    GmDensity,
    MbDensity,
    MppDensity,
    SpacePartition,
    mpp_restrict,
    mpp_union,
    phd_of_mb,
)
from .filters import (
    BirthModel,
    FilterParams,
    extract_mb_estimates,
    extract_phd_estimates,
    mb_predict,
    mb_update,
    phd_predict,
    phd_update,
    prune_merge,
)
from .fusion_mb import (
    MbFusionParams,
    bernoulli_kld,
    bernoulli_waa_fuse,
    check_c2,
    cluster_components,
    hmmb_fuse,
    hpd_region,
)
from .fusion_phd import FusionInputPhd, fused_cardinality, hmphd_fuse, waa_fuse_phd
from .metrics import OspaParams, cardinality_series, ospa
from .models import (
    MotionModel,
    SensorModel,
    converted_covariance,
    detection_probability,
    fov_indicator,
    measure,
    measure_jacobian,
)
from .sim import Scenario, Track, generate_measurements, generate_truth, run_monte_carlo
from .weights import (
    EufParams,
    WeightMap,
    aeuf,
    build_weight_map,
    ceuf,
    euf,
    icc,
    lookup_weight,
    normalize_weights,
)

__version__ = "0.1.0"

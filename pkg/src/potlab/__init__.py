"""potlab: potential theory workbench on weighted graphs with boundary."""

__version__ = "0.1.0"

from .geometry import (
    DegenerateGeometryError,
    Exhaustion,
    GeometryError,
    GeometrySpec,
    GraphWithBoundary,
    GrowthExponents,
    ResourceLimitError,
    ball_volume,
    build_exhaustion,
    fit_growth_exponents,
    generate_graph,
    volume_criteria,
)
from .operators import (
    OperatorError,
    Potential,
    QuadraticFormValue,
    SchrodingerOperator,
    assemble_schrodinger,
    h_transform,
    laplacian,
    quadratic_form,
    split_potential,
)
from .green import (
    CriticalityReport,
    KernelTable,
    NotPositiveError,
    classify_criticality,
    dirichlet_green,
    exhaustion_green,
    strong_subcriticality_epsilon,
)

"""conceptdb: an embedded concept-oriented database engine with COQL.

Concepts pair an identity class with an entity class; collections hold
elements addressed by hierarchical complex identities and ordered by their
concept-typed dimensions.  Queries navigate this order with projection and
de-projection, build cubes, and infer related elements by constraint
propagation.
"""

from . import algebra, coql, cube, inference, interp, schema, snapshot, store
from .algebra import (
    ElementSet,
    aggregate,
    combine,
    deproject,
    eval_access_path,
    eval_query,
    filter_set,
    full_set,
    project,
)
from .cube import CubeQuery, CubeResult, Measure, olap_run, run_cube
from .inference import BottomExtension, InferenceSpec, infer, infer_bottom, infer_trace, infer_via
from .interp import Session, new_session, run_script, run_script_file
from .schema import Concept, Dimension, PrimitiveType, Schema, common_lesser, define_concept, dimension_paths, order_neighbors, validate
from .snapshot import snapshot_load, snapshot_save
from .store import ComplexIdentity, Database, Element, create_collection, insert, lookup, resolve_path, super_of

__version__ = "0.1.0"

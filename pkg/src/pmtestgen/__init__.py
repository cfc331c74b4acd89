"""Generate, validate, export and run Postman test scripts for REST APIs."""

from .collection import PostmanCollection, build_collection, parse_collection, serialize_collection
from .dsl import TestScript, canonicalize, parse_script, render_script
from .generator import CatalogExhausted, generate_deterministic
from .probe import ProbeConfig, ResponseCapture, probe, summarize_capture
from .runner import RunReport, eval_assertion, run_collection, run_scripts

__version__ = "0.1.0"

__all__ = [
    "CatalogExhausted",
    "PostmanCollection",
    "ProbeConfig",
    "ResponseCapture",
    "RunReport",
    "TestScript",
    "build_collection",
    "canonicalize",
    "eval_assertion",
    "generate_deterministic",
    "parse_collection",
    "parse_script",
    "probe",
    "render_script",
    "run_collection",
    "run_scripts",
    "serialize_collection",
    "summarize_capture",
]

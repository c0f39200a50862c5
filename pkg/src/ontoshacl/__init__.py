"""SHACL validation under Horn-SHIQ ontologies.

Two interchangeable routes: validate directly over a finite approximation
of the core universal model, or rewrite the constraints and validate over
the completed data graph. The CLI selftest cross-checks the routes.
"""

__version__ = "0.1.0"

"""
Schema version and bundled schema location for the validation report.

Kept apart from the writers and the validator so both import one definition.
"""

SCHEMA_VERSION = "v1"

SCHEMA_RESOURCE_PACKAGE = "sofrgit.schemas"
SCHEMA_RESOURCE_NAME = f"sofrgit_validation.schema.{SCHEMA_VERSION}.json"

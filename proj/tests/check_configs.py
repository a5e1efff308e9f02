"""Validates every bundled config against configs/schema.json."""
import json
import pathlib
import sys

import jsonschema

root = pathlib.Path(sys.argv[1])
schema = json.loads((root / "schema.json").read_text())
jsonschema.Draft7Validator.check_schema(schema)
bad = 0
for path in sorted(root.glob("*.json")):
    if path.name == "schema.json":
        continue
    try:
        jsonschema.validate(json.loads(path.read_text()), schema)
    except jsonschema.ValidationError as e:
        print(f"{path.name}: {e.message}")
        bad += 1
print(f"checked configs, {bad} invalid")
sys.exit(1 if bad else 0)

"""Run manifests: every artifact with its content hash and the config hash."""
import hashlib
import json
import os

MANIFEST_NAME = "manifest.json"


def file_sha256(path, chunk=1 << 20):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(chunk), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(output_dir, files, config, status="complete", config_key=None):
    """Write ``manifest.json``; with a config, also its canonical dump ``config.txt``.

    ``config_key`` replaces the config hash for runs without a config.
    """
    from .config import config_hash, dump_config

    listed = list(files)
    if config is not None:
        cfg_path = os.path.join(output_dir, "config.txt")
        with open(cfg_path, "w") as fh:
            fh.write(dump_config(config))
        listed = [cfg_path] + [f for f in listed if f != cfg_path]
        config_key = config_hash(config)
    entries = []
    for p in listed:
        if os.path.exists(p):
            entries.append({"file": os.path.relpath(p, output_dir), "sha256": file_sha256(p)})
    manifest = {"config_sha256": config_key, "status": status, "artifacts": entries}
    path = os.path.join(output_dir, MANIFEST_NAME)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return path


def read_manifest(output_dir):
    with open(os.path.join(output_dir, MANIFEST_NAME)) as fh:
        return json.load(fh)

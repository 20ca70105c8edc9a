"""On-disk formats: binary matrices, instance directories, solution files.

Matrix files carry a fixed header (magic ``RLUS``, u32 row count, u32 column
count, both little endian) followed by row-major float64 little-endian data.
An instance directory holds ``config.json`` (the generating config plus the
realized sigma2), ``perm.json`` (the ground-truth permutation), the matrices
``B.bin``, ``X_star.bin``, ``Y.bin``, ``Y_clean.bin``, and CSV exports of B
and Y for interoperability.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .perm import RLocalPermutation
from .synth import InstanceConfig, SensingInstance

MAGIC = b"RLUS"


def write_matrix(path, M: np.ndarray) -> None:
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    rows, cols = M.shape
    header = MAGIC + np.array([rows, cols], dtype="<u4").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(M, dtype="<f8").tobytes())


def read_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        header = fh.read(12)
        if len(header) != 12 or header[:4] != MAGIC:
            raise ValueError(f"{path}: not a {MAGIC.decode()} matrix file")
        rows, cols = np.frombuffer(header[4:], dtype="<u4")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != rows * cols:
        raise ValueError(f"{path}: expected {rows * cols} values, found {data.size}")
    return data.reshape(int(rows), int(cols)).copy()


def write_matrix_csv(path, M: np.ndarray) -> None:
    np.savetxt(path, np.atleast_2d(M), delimiter=",", fmt="%.17g")


def _snr_to_json(snr_db: float):
    return None if math.isinf(snr_db) else snr_db


def _snr_from_json(value) -> float:
    return math.inf if value is None else float(value)


def save_instance(inst: SensingInstance, dirpath) -> Path:
    d = Path(dirpath)
    d.mkdir(parents=True, exist_ok=True)
    cfg = inst.config
    config = {
        "n": cfg.n,
        "d": cfg.d,
        "m": cfg.m,
        "r": cfg.r,
        "snr_db": _snr_to_json(cfg.snr_db),
        "seed": cfg.seed,
        "sigma2": inst.sigma2,
    }
    (d / "config.json").write_text(json.dumps(config, indent=2))
    (d / "perm.json").write_text(inst.pi_star.to_json())
    write_matrix(d / "B.bin", inst.B)
    write_matrix(d / "X_star.bin", inst.X_star)
    write_matrix(d / "Y.bin", inst.Y)
    write_matrix(d / "Y_clean.bin", inst.Y_clean)
    write_matrix_csv(d / "B.csv", inst.B)
    write_matrix_csv(d / "Y.csv", inst.Y)
    return d


def load_instance(dirpath) -> SensingInstance:
    d = Path(dirpath)
    config = json.loads((d / "config.json").read_text())
    cfg = InstanceConfig(
        n=config["n"],
        d=config["d"],
        m=config["m"],
        r=config["r"],
        snr_db=_snr_from_json(config["snr_db"]),
        seed=config["seed"],
    )
    return SensingInstance(
        config=cfg,
        B=read_matrix(d / "B.bin"),
        X_star=read_matrix(d / "X_star.bin"),
        pi_star=RLocalPermutation.from_json((d / "perm.json").read_text()),
        sigma2=float(config["sigma2"]),
        Y=read_matrix(d / "Y.bin"),
        Y_clean=read_matrix(d / "Y_clean.bin"),
    )


def save_solution(solution, path) -> Path:
    """Write a pipeline Solution as JSON plus sibling binary matrices."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    stem = path.with_suffix("")
    x_path = stem.parent / (stem.name + ".X_hat.bin")
    y_path = stem.parent / (stem.name + ".Y_hat.bin")
    write_matrix(x_path, solution.X_hat)
    write_matrix(y_path, solution.Y_hat)
    doc = {
        "pi_hat": json.loads(solution.pi_hat.to_json()),
        "X_hat_file": x_path.name,
        "Y_hat_file": y_path.name,
        "diagnostics": solution.diagnostics,
    }
    path.write_text(json.dumps(doc, indent=2, default=float))
    return path

"""Model serialization to a single JSON document.

Schema (version 1), stable keys:

    {
      "format": "varib-model",
      "version": 1,
      "kind": "linear" | "dual",
      "marginal": "student" | "gaussian",
      "gamma": float,
      "dims": {"n_units": int, "d_in": int, "d_out": int},
      "W" | "A": [[float, ...], ...],          # row-major array literals
      "Sigma": [[...]],
      "U": [[...]],
      "Lambda": [[...]],
      "omega2": [...],
      "nu": [...] | null,                      # null marks the gaussian limit
      "kernel": {"kind": str, "kappa": float, "lambda": float,
                 "subset_size": int} | null,
      "subset_idx": [...] | null,
      "subset_points": [[...]] | null
    }

Gram matrices are never stored; they are recomputed from the kernel config
and the stored subset points.  Floats round-trip exactly (shortest-repr
JSON encoding).
"""

import json
from dataclasses import dataclass

import numpy as np

from .core import Decoder, LinearEncoder
from .exceptions import ConfigError
from .kernel import DualEncoder, KernelConfig

FORMAT = "varib-model"
VERSION = 1


@dataclass
class LoadedModel:
    """A deserialized fit: encoder (linear or dual), decoder, marginal scales."""

    kind: str
    marginal: str
    gamma: float
    encoder: object
    decoder: Decoder
    omega2: np.ndarray
    nu: np.ndarray


def _arr(x):
    return np.asarray(x, dtype=float).tolist()


def model_to_dict(encoder, decoder, omega2, nu, gamma, marginal):
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "marginal": marginal,
        "gamma": float(gamma),
        "Sigma": _arr(encoder.Sigma),
        "U": _arr(decoder.U),
        "Lambda": _arr(decoder.Lambda),
        "omega2": _arr(omega2),
        "nu": None if marginal == "gaussian" else _arr(nu),
        "kernel": None,
        "subset_idx": None,
        "subset_points": None,
    }
    if isinstance(encoder, DualEncoder):
        doc["kind"] = "dual"
        doc["A"] = _arr(encoder.A)
        doc["dims"] = {
            "n_units": encoder.A.shape[0],
            "d_in": int(encoder.subset_points.shape[1]),
            "d_out": decoder.U.shape[0],
        }
        doc["kernel"] = {
            "kind": encoder.kernel.kind,
            "kappa": float(encoder.kernel.kappa),
            "lambda": float(encoder.kernel.lam),
            "subset_size": int(encoder.A.shape[1]),
        }
        doc["subset_idx"] = [int(i) for i in encoder.subset_idx]
        doc["subset_points"] = _arr(encoder.subset_points)
    else:
        doc["kind"] = "linear"
        doc["W"] = _arr(encoder.W)
        doc["dims"] = {
            "n_units": encoder.W.shape[0],
            "d_in": encoder.W.shape[1],
            "d_out": decoder.U.shape[0],
        }
    return doc


def save_model(path, encoder, decoder, omega2, nu, gamma, marginal):
    doc = model_to_dict(encoder, decoder, omega2, nu, gamma, marginal)
    with open(path, "w", encoding="ascii") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def model_from_dict(doc):
    if doc.get("format") != FORMAT:
        raise ConfigError(f"not a {FORMAT} document")
    if doc.get("version") != VERSION:
        raise ConfigError(f"unsupported model version {doc.get('version')}")
    kind = doc["kind"]
    marginal = doc["marginal"]
    Sigma = np.asarray(doc["Sigma"], dtype=float)
    decoder = Decoder(
        U=np.asarray(doc["U"], dtype=float),
        Lambda=np.asarray(doc["Lambda"], dtype=float),
    )
    omega2 = np.asarray(doc["omega2"], dtype=float)
    if doc["nu"] is None:
        nu = np.full(omega2.shape[0], np.inf)
    else:
        nu = np.asarray(doc["nu"], dtype=float)
    if kind == "dual":
        kcfg = KernelConfig(
            kind=doc["kernel"]["kind"],
            kappa=doc["kernel"]["kappa"],
            lam=doc["kernel"]["lambda"],
            subset_size=doc["kernel"]["subset_size"],
        )
        encoder = DualEncoder(
            A=np.asarray(doc["A"], dtype=float),
            subset_idx=np.asarray(doc["subset_idx"], dtype=int),
            kernel=kcfg,
            Sigma=Sigma,
            subset_points=np.asarray(doc["subset_points"], dtype=float),
        )
    elif kind == "linear":
        encoder = LinearEncoder(W=np.asarray(doc["W"], dtype=float), Sigma=Sigma)
    else:
        raise ConfigError(f"unknown model kind {kind!r}")
    return LoadedModel(
        kind=kind,
        marginal=marginal,
        gamma=float(doc["gamma"]),
        encoder=encoder,
        decoder=decoder,
        omega2=omega2,
        nu=nu,
    )


def load_model(path):
    with open(path, "r", encoding="ascii") as fh:
        return model_from_dict(json.load(fh))

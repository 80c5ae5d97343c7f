"""File formats for matrices, bases, and groups.

Dense text format: first line holds n, followed by n rows of n
whitespace-separated values (written with 17 significant digits, so round
trips are exact).  Matrix Market coordinate files are accepted for sparse
inputs.  A basis is either a directory of Matrix Market files (sorted by
name) or a single JSON container ``{"n": int, "matrices": [[[i, j, value],
...], ...]}`` with 0-based indices.  A group file is JSON holding a list of
permutations (images of 0..n-1).
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np
import scipy.io
import scipy.sparse

from .exceptions import MatrixParseError
from .linalg import SparseSymMatrix
from .subspace import GroupAction, SubspaceBasis
from .validation import check_permutation, check_symmetric_matrix

__all__ = [
    "read_matrix",
    "read_dense_matrix",
    "write_dense_matrix",
    "read_basis",
    "write_basis_json",
    "read_group",
    "file_digest",
]


def read_dense_matrix(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MatrixParseError("empty file", path=path, line=1)
    try:
        n = int(lines[0].strip())
    except ValueError:
        raise MatrixParseError("first line must hold the dimension n",
                               path=path, line=1, column=1) from None
    if n <= 0:
        raise MatrixParseError("dimension must be positive", path=path, line=1)
    rows = []
    lineno = 1
    for raw in lines[1:]:
        if not raw.strip():
            lineno += 1
            continue
        lineno += 1
        tokens = raw.split()
        if len(tokens) != n:
            raise MatrixParseError(
                f"expected {n} values, found {len(tokens)}", path=path, line=lineno)
        vals = []
        for col, tok in enumerate(tokens, start=1):
            try:
                vals.append(float(tok))
            except ValueError:
                raise MatrixParseError(
                    f"invalid number {tok!r}", path=path, line=lineno,
                    column=col) from None
        rows.append(vals)
        if len(rows) == n:
            break
    if len(rows) != n:
        raise MatrixParseError(
            f"expected {n} rows, found {len(rows)}", path=path, line=lineno)
    return np.asarray(rows, dtype=float)


def write_dense_matrix(path, a):
    a = np.asarray(a, dtype=float)
    with open(path, "w") as fh:
        fh.write(f"{a.shape[0]}\n")
        for row in a:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def _read_matrix_market(path):
    try:
        mat = scipy.io.mmread(path)
    except Exception as exc:
        raise MatrixParseError(f"matrix market parse failed: {exc}",
                               path=path) from exc
    if scipy.sparse.issparse(mat):
        mat = mat.toarray()
    return np.asarray(mat, dtype=float)


def read_matrix(path):
    """Dense text or Matrix Market (by .mtx extension); symmetric required."""
    if str(path).endswith(".mtx"):
        a = _read_matrix_market(path)
    else:
        a = read_dense_matrix(path)
    try:
        return check_symmetric_matrix(a, name=os.path.basename(str(path)))
    except Exception as exc:
        raise MatrixParseError(str(exc), path=path) from exc


def read_basis(path) -> SubspaceBasis:
    """Directory of .mtx files, a JSON container, or a single .mtx file."""
    path = str(path)
    if os.path.isdir(path):
        files = sorted(f for f in os.listdir(path) if f.endswith(".mtx"))
        if not files:
            raise MatrixParseError("no .mtx files in basis directory", path=path)
        mats = [_read_matrix_market(os.path.join(path, f)) for f in files]
        n = mats[0].shape[0]
        return SubspaceBasis(n, mats)
    if path.endswith(".mtx"):
        mat = _read_matrix_market(path)
        return SubspaceBasis(mat.shape[0], [mat])
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MatrixParseError(f"invalid JSON: {exc.msg}", path=path,
                               line=exc.lineno, column=exc.colno) from exc
    try:
        n = int(payload["n"])
        mats = []
        for triples in payload["matrices"]:
            if triples:
                arr = np.asarray(triples, dtype=float)
                mats.append(SparseSymMatrix(
                    n, arr[:, 0].astype(int), arr[:, 1].astype(int), arr[:, 2]))
            else:
                mats.append(SparseSymMatrix(n, [], [], []))
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise MatrixParseError(f"invalid basis container: {exc}", path=path) from exc
    return SubspaceBasis(n, mats)


def write_basis_json(path, basis: SubspaceBasis, original_scale=True):
    mats = []
    for e, s in zip(basis.elements, basis.original_norms):
        scale = s if original_scale else 1.0
        mats.append([[int(i), int(j), float(scale * v)]
                     for i, j, v in zip(e.rows, e.cols, e.vals)])
    with open(path, "w") as fh:
        json.dump({"n": basis.n, "matrices": mats}, fh)


def read_group(path, n=None) -> GroupAction:
    with open(path) as fh:
        payload = json.load(fh)
    if isinstance(payload, dict):
        payload = payload.get("permutations", payload.get("matrices"))
    if not isinstance(payload, list) or not payload:
        raise MatrixParseError("group file must hold a list of permutations",
                               path=path)
    elems = []
    for item in payload:
        arr = np.asarray(item)
        if arr.ndim == 1:
            elems.append(check_permutation(arr, n))
        else:
            elems.append(arr.astype(float))
    return GroupAction(elems, n=n)


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()

"""Model inputs derived from records: token indices, fingerprint vectors and ACFG batches."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..funcrec import Category, FunctionProgramRecord
from ..hashing import fnv1a64
from ..represent import BB_LEN_LABELS, Fingerprint, build_acfg, build_token_seq

log = logging.getLogger(__name__)

PAD = 0
SELECTIONS = ("core", "runtime", "both")


class NoFunctionsSelected(ValueError):
    pass


def select_functions(record: FunctionProgramRecord, which: str):
    cats = {"core": (Category.CORE,), "runtime": (Category.RUNTIME,), "both": (Category.CORE, Category.RUNTIME)}
    if which not in cats:
        raise ValueError(f"function selection must be one of {SELECTIONS}")
    return sorted(record.of_category(*cats[which]), key=lambda f: f.entry)


def token_index(token: str, vocab: int) -> int:
    """Hashed vocabulary slot; slot 0 is reserved for padding."""
    return 1 + fnv1a64(token) % (vocab - 1)


def stage1_features(record: FunctionProgramRecord, vocab: int, max_len: int, which: str = "runtime") -> np.ndarray:
    """Selected functions' token sequences, concatenated in entry order, hashed and padded."""
    out = np.zeros(max_len, dtype=np.int64)
    pos = 0
    fns = select_functions(record, which)
    if not fns:
        log.warning("%s: no %s functions; all-pad sequence", record.binary_id, which)
    for fn in fns:
        for tok in build_token_seq(fn).tokens:
            if pos == max_len:
                return out
            out[pos] = token_index(tok, vocab)
            pos += 1
    return out


def stage2_features(fp: Fingerprint, vocab: int) -> np.ndarray:
    """Log-scaled hashed bag of function hashes and name tokens, then count and size histogram."""
    x = np.zeros(vocab + 1 + len(fp.size_histogram))
    for h in fp.function_hashes:
        x[fnv1a64(f"{h:016x}") % vocab] += 1
    for tok, n in fp.name_tokens.items():
        x[fnv1a64(tok) % vocab] += n
    x[vocab] = fp.runtime_count
    x[vocab + 1:] = fp.size_histogram
    return np.log1p(x)


def node_features(fn, bag_dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-block feature rows and the (src, dst) edge array of one function's ACFG."""
    g = build_acfg(fn)
    x = np.zeros((len(g.nodes), bag_dim + len(BB_LEN_LABELS) + 3))
    for i, node in enumerate(g.nodes):
        for tok in node.tokens:
            x[i, fnv1a64(tok) % bag_dim] += 1
        x[i, bag_dim + BB_LEN_LABELS.index(node.bb_len_bucket)] = 1
        x[i, -3] = node.in_degree
        x[i, -2] = node.out_degree
        x[i, -1] = node.category == "core_function"
    x[:, :bag_dim] = np.log1p(x[:, :bag_dim])
    x[:, -3:-1] = np.log1p(x[:, -3:-1])
    edges = np.asarray(g.edges, dtype=np.int64).reshape(-1, 2)
    return x, edges


@dataclass
class GraphSample:
    """All selected functions of one binary."""

    x: np.ndarray
    edges: np.ndarray  # global node indices
    func_of_node: np.ndarray
    n_funcs: int


def graph_sample(record: FunctionProgramRecord, which: str, bag_dim: int) -> GraphSample:
    fns = select_functions(record, which)
    if not fns:
        raise NoFunctionsSelected(f"{record.binary_id}: no {which} functions")
    xs, es, owner, offset = [], [], [], 0
    for k, fn in enumerate(fns):
        x, e = node_features(fn, bag_dim)
        xs.append(x)
        es.append(e + offset)
        owner.append(np.full(len(x), k))
        offset += len(x)
    return GraphSample(np.vstack(xs), np.vstack(es), np.concatenate(owner), len(fns))


@dataclass
class GraphBatch:
    x: np.ndarray
    adj_mean: sp.csr_matrix  # row i averages node i's in-neighbours
    func_pool: sp.csr_matrix  # functions x nodes, mean over each function's nodes
    binary_of_func: np.ndarray
    binary_sum: sp.csr_matrix  # binaries x functions, 0/1
    n_binaries: int


def make_batch(samples: list[GraphSample]) -> GraphBatch:
    xs, srcs, dsts, owners, binof = [], [], [], [], []
    n_off = f_off = 0
    for b, s in enumerate(samples):
        xs.append(s.x)
        srcs.append(s.edges[:, 0] + n_off)
        dsts.append(s.edges[:, 1] + n_off)
        owners.append(s.func_of_node + f_off)
        binof.append(np.full(s.n_funcs, b))
        n_off += len(s.x)
        f_off += s.n_funcs
    src, dst = np.concatenate(srcs), np.concatenate(dsts)
    owner, binary_of_func = np.concatenate(owners), np.concatenate(binof)
    adj = sp.csr_matrix((np.ones(len(src)), (dst, src)), shape=(n_off, n_off))
    indeg = np.asarray(adj.sum(axis=1)).ravel()
    adj = sp.diags(np.where(indeg > 0, 1.0 / np.maximum(indeg, 1), 0.0)) @ adj
    counts = np.bincount(owner, minlength=f_off)
    pool = sp.csr_matrix((1.0 / counts[owner], (owner, np.arange(n_off))), shape=(f_off, n_off))
    bsum = sp.csr_matrix((np.ones(f_off), (binary_of_func, np.arange(f_off))), shape=(len(samples), f_off))
    return GraphBatch(np.vstack(xs), adj.tocsr(), pool, binary_of_func, bsum, len(samples))
